// sweep.hpp — the experiment runner and report generators.
//
// A sweep iterates over feature counts m; each (m, trial) task draws fresh
// training data, fits K models on the same (X, y) with independent W_r, and
// scores the requested metrics for the member average and the ensemble on
// shared test draws. All randomness is derived from
// (master_seed, stream, m index, trial, member), so results are bit-identical
// for any worker count.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rfshift/config.hpp"
#include "rfshift/datagen.hpp"
#include "rfshift/features.hpp"
#include "rfshift/kernels.hpp"
#include "rfshift/risk.hpp"
#include "rfshift/rng.hpp"
#include "rfshift/spectrum.hpp"

namespace rfshift {

struct SweepRow {
    std::string setting;
    Activation activation = Activation::relu;
    int n = 0, p = 0, m = 0, K = 0, trials = 0;
    Metric metric = Metric::id_mse;
    ModelKind model_kind = ModelKind::single_avg;
    double mean = 0.0;
    double stderr_ = 0.0;
    int failures = 0;
};

struct SweepResult {
    ExperimentConfig config;
    std::vector<SweepRow> rows;
};

namespace sweepdetail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct TrialCells {
    // Indexed by (metric order in config, model kind 0=single_avg 1=ensemble).
    std::vector<std::array<double, 2>> values;
    bool failed = false;
};

inline TrialCells run_trial(const ExperimentConfig& cfg, const Spectrum& spec,
                            const GroundTruth& g, const ShiftModel& shift, int m_idx, int trial) {
    const int m = cfg.m_values[static_cast<std::size_t>(m_idx)];
    const NoiseModel noise{cfg.sigma, EtaDist::gaussian};
    const std::uint64_t s = cfg.master_seed;
    const auto mi = static_cast<std::uint64_t>(m_idx);
    const auto ti = static_cast<std::uint64_t>(trial);

    Rng rng_x(derive_seed(s, "train_x", mi, ti));
    Rng rng_eps(derive_seed(s, "train_eps", mi, ti));
    const Matrix X = sample_inputs(spec, cfg.n, noise, rng_x);
    Vector y = g.eval_rows(X);
    if (cfg.sigma > 0.0)
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += cfg.sigma * rng_eps.normal();

    const bool need_excess =
        std::any_of(cfg.metrics.begin(), cfg.metrics.end(), [](Metric metric) {
            return metric == Metric::id_excess || metric == Metric::ood_excess;
        });
    const bool need_ood =
        std::any_of(cfg.metrics.begin(), cfg.metrics.end(), [](Metric metric) {
            return metric == Metric::ood_excess || metric == Metric::ood_mse;
        });

    std::vector<FittedModel> members;
    members.reserve(static_cast<std::size_t>(cfg.K));
    for (int r = 0; r < cfg.K; ++r) {
        Rng rng_w(derive_seed(s, "feature_w", mi, ti, static_cast<std::uint64_t>(r)));
        FittedModel member;
        member.fm = sample_feature_model(cfg.p, m, cfg.activation, rng_w);
        const Matrix Phi = feature_map(member.fm, X);
        FitResult fit = fit_min_norm(Phi, y);
        member.theta_hat = std::move(fit.theta_hat);
        member.diag = fit.diag;
        if (need_excess) {
            if (cfg.activation == Activation::identity && g.kind == GroundTruthKind::linear) {
                member.theta_star = theta_star_identity_linear(member.fm, g.beta, spec);
            } else {
                Rng rng_pop(derive_seed(s, "theta_star", mi, ti, static_cast<std::uint64_t>(r)));
                member.theta_star = estimate_theta_star(member.fm, g, spec,
                                                        default_theta_star_samples(m), 0.0,
                                                        rng_pop)
                                        .theta_star;
            }
        }
        members.push_back(std::move(member));
    }

    Rng rng_tx(derive_seed(s, "test_x", mi, ti));
    const Matrix X_test = sample_inputs(spec, cfg.n_test, noise, rng_tx);
    Matrix Z_test;
    if (need_ood) {
        Rng rng_d(derive_seed(s, "test_shift", mi, ti));
        Z_test = X_test + sample_shift(shift, cfg.n_test, rng_d);
    }

    // Member predictions, shared across metrics.
    std::vector<Vector> pred_id(static_cast<std::size_t>(cfg.K));
    std::vector<Vector> pred_ood(static_cast<std::size_t>(cfg.K));
    std::vector<Vector> ref_id(static_cast<std::size_t>(cfg.K));
    std::vector<Vector> ref_ood(static_cast<std::size_t>(cfg.K));
    for (int r = 0; r < cfg.K; ++r) {
        const auto ur = static_cast<std::size_t>(r);
        pred_id[ur] = predict(members[ur], X_test);
        if (need_ood) pred_ood[ur] = predict(members[ur], Z_test);
        if (need_excess) {
            ref_id[ur] = predict_with(members[ur].fm, *members[ur].theta_star, X_test);
            if (need_ood)
                ref_ood[ur] = predict_with(members[ur].fm, *members[ur].theta_star, Z_test);
        }
    }
    auto ensemble_mean = [&](const std::vector<Vector>& preds) {
        Vector out = Vector::Zero(cfg.n_test);
        for (const auto& v : preds) out += v;
        return Vector(out / static_cast<double>(cfg.K));
    };

    Vector y_test_id, y_test_ood;
    {
        Rng rng_te_id(derive_seed(s, "test_eps_id", mi, ti));
        Rng rng_te_ood(derive_seed(s, "test_eps_ood", mi, ti));
        y_test_id = g.eval_rows(X_test);
        if (cfg.sigma > 0.0)
            for (Eigen::Index i = 0; i < y_test_id.size(); ++i)
                y_test_id[i] += cfg.sigma * rng_te_id.normal();
        if (need_ood) {
            y_test_ood = g.eval_rows(Z_test);
            if (cfg.sigma > 0.0)
                for (Eigen::Index i = 0; i < y_test_ood.size(); ++i)
                    y_test_ood[i] += cfg.sigma * rng_te_ood.normal();
        }
    }

    TrialCells cells;
    cells.values.resize(cfg.metrics.size());
    auto mse = [](const Vector& a, const Vector& b) { return (a - b).squaredNorm() / a.size(); };
    for (std::size_t mi2 = 0; mi2 < cfg.metrics.size(); ++mi2) {
        double single_avg = 0.0, ensemble = 0.0;
        switch (cfg.metrics[mi2]) {
        case Metric::id_mse: {
            for (int r = 0; r < cfg.K; ++r)
                single_avg += mse(pred_id[static_cast<std::size_t>(r)], y_test_id);
            single_avg /= cfg.K;
            ensemble = mse(ensemble_mean(pred_id), y_test_id);
            break;
        }
        case Metric::ood_mse: {
            for (int r = 0; r < cfg.K; ++r)
                single_avg += mse(pred_ood[static_cast<std::size_t>(r)], y_test_ood);
            single_avg /= cfg.K;
            ensemble = mse(ensemble_mean(pred_ood), y_test_ood);
            break;
        }
        case Metric::id_excess: {
            Vector ens_diff = Vector::Zero(cfg.n_test);
            for (int r = 0; r < cfg.K; ++r) {
                const auto ur = static_cast<std::size_t>(r);
                const Vector diff = pred_id[ur] - ref_id[ur];
                single_avg += diff.squaredNorm() / cfg.n_test;
                ens_diff += diff;
            }
            single_avg /= cfg.K;
            ens_diff /= static_cast<double>(cfg.K);
            ensemble = ens_diff.squaredNorm() / cfg.n_test;
            break;
        }
        case Metric::ood_excess: {
            Vector ens_diff = Vector::Zero(cfg.n_test);
            for (int r = 0; r < cfg.K; ++r) {
                const auto ur = static_cast<std::size_t>(r);
                const Vector diff = pred_ood[ur] - ref_ood[ur];
                single_avg += diff.squaredNorm() / cfg.n_test;
                ens_diff += diff;
            }
            single_avg /= cfg.K;
            ens_diff /= static_cast<double>(cfg.K);
            ensemble = ens_diff.squaredNorm() / cfg.n_test;
            break;
        }
        }
        if (!std::isfinite(single_avg) || !std::isfinite(ensemble)) cells.failed = true;
        cells.values[mi2] = {single_avg, ensemble};
    }
    return cells;
}

} // namespace sweepdetail

inline SweepResult run_sweep(const ExperimentConfig& cfg, int workers = 1) {
    if (workers < 1) workers = 1;
    const Spectrum spec = build_spectrum(cfg);

    GroundTruth g;
    g.kind = cfg.ground_truth;
    {
        Rng rng_beta(derive_seed(cfg.master_seed, "beta"));
        g.beta = sample_unit_beta(cfg.p, rng_beta);
    }
    ShiftModel shift;
    if (cfg.shift.construction == ShiftConstruction::isotropic) {
        shift = build_shift_model(spec, cfg.b, cfg.n, cfg.shift.parameter,
                                  ShiftConstruction::isotropic, cfg.shift.parameter);
    } else {
        shift = build_shift_model(spec, cfg.b, cfg.n, cfg.shift.parameter,
                                  ShiftConstruction::assumption2_default);
    }

    const int m_count = static_cast<int>(cfg.m_values.size());
    std::vector<std::vector<sweepdetail::TrialCells>> results(
        static_cast<std::size_t>(m_count),
        std::vector<sweepdetail::TrialCells>(static_cast<std::size_t>(cfg.trials)));

    const int total_tasks = m_count * cfg.trials;
    std::atomic<int> next_task{0};
    auto worker_loop = [&]() {
        for (;;) {
            const int task = next_task.fetch_add(1);
            if (task >= total_tasks) return;
            const int m_idx = task / cfg.trials;
            const int trial = task % cfg.trials;
            auto& slot = results[static_cast<std::size_t>(m_idx)][static_cast<std::size_t>(trial)];
            try {
                slot = sweepdetail::run_trial(cfg, spec, g, shift, m_idx, trial);
            } catch (const std::exception&) {
                slot.failed = true;
                slot.values.assign(cfg.metrics.size(), {0.0, 0.0});
            }
        }
    };
    if (workers == 1) {
        worker_loop();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_loop);
        for (auto& t : pool) t.join();
    }

    SweepResult result;
    result.config = cfg;
    for (int m_idx = 0; m_idx < m_count; ++m_idx) {
        const auto& trials = results[static_cast<std::size_t>(m_idx)];
        int failures = 0;
        for (const auto& t : trials) failures += t.failed ? 1 : 0;
        if (failures * 20 > cfg.trials) // > 5%
            throw std::runtime_error("run_sweep: more than 5% of trials failed at m = " +
                                     std::to_string(cfg.m_values[static_cast<std::size_t>(m_idx)]));
        for (std::size_t metric_idx = 0; metric_idx < cfg.metrics.size(); ++metric_idx) {
            for (int kind = 0; kind < 2; ++kind) {
                double sum = 0.0, sum_sq = 0.0;
                int count = 0;
                for (const auto& t : trials) {
                    if (t.failed) continue;
                    const double v = t.values[metric_idx][static_cast<std::size_t>(kind)];
                    sum += v;
                    sum_sq += v * v;
                    ++count;
                }
                SweepRow row;
                row.setting = cfg.setting_name;
                row.activation = cfg.activation;
                row.n = cfg.n;
                row.p = cfg.p;
                row.m = cfg.m_values[static_cast<std::size_t>(m_idx)];
                row.K = cfg.K;
                row.trials = cfg.trials;
                row.metric = cfg.metrics[metric_idx];
                row.model_kind = kind == 0 ? ModelKind::single_avg : ModelKind::ensemble;
                row.failures = failures;
                if (count > 0) {
                    row.mean = sum / count;
                    if (count > 1) {
                        const double var =
                            std::max(0.0, (sum_sq - sum * sum / count) / (count - 1));
                        row.stderr_ = std::sqrt(var / count);
                    }
                }
                result.rows.push_back(std::move(row));
            }
        }
    }
    return result;
}

inline std::string sweep_csv(const SweepResult& result) {
    std::ostringstream out;
    out << "setting,activation,n,p,m,K,trials,metric,model_kind,mean,stderr,failures\n";
    for (const auto& row : result.rows) {
        out << row.setting << ','
            << (row.activation == Activation::relu ? "relu" : "identity") << ',' << row.n << ','
            << row.p << ',' << row.m << ',' << row.K << ',' << row.trials << ','
            << to_string(row.metric) << ',' << to_string(row.model_kind) << ','
            << sweepdetail::format_double(row.mean) << ','
            << sweepdetail::format_double(row.stderr_) << ',' << row.failures << '\n';
    }
    return out.str();
}

inline void write_sweep_csv(const SweepResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_sweep_csv: cannot open " + path);
    out << sweep_csv(result);
}

// Eigenvalue-ratio audit of two spectrum files, plus effective-rank summary
// and the strength checks of the implied diagonal shift |Σ' − Σ| against tau.
inline std::string spectral_ratio_report_text(const Spectrum& base, const Spectrum& shifted,
                                              double b, int n, double tau) {
    if (base.size() != shifted.size())
        throw std::domain_error("spectral_ratio_report: spectrum length mismatch");
    std::ostringstream out;
    out << "index,lambda_base,lambda_shifted,ratio\n";
    for (int i = 0; i < base.size(); ++i) {
        const double lb = base.eigenvalues[static_cast<std::size_t>(i)];
        const double ls = shifted.eigenvalues[static_cast<std::size_t>(i)];
        out << (i + 1) << ',' << sweepdetail::format_double(lb) << ','
            << sweepdetail::format_double(ls) << ',' << sweepdetail::format_double(ls / lb)
            << '\n';
    }
    out << "# r0_base = " << sweepdetail::format_double(effective_rank(base, 0)) << '\n';
    out << "# r0_shifted = " << sweepdetail::format_double(effective_rank(shifted, 0)) << '\n';
    auto kstar_string = [&](const Spectrum& s) -> std::string {
        const auto k = critical_index(s, b, n);
        return k ? std::to_string(*k) : "undefined";
    };
    out << "# kstar_base(b=" << b << ",n=" << n << ") = " << kstar_string(base) << '\n';
    out << "# kstar_shifted(b=" << b << ",n=" << n << ") = " << kstar_string(shifted) << '\n';
    ShiftModel implied;
    implied.tau = tau;
    implied.construction = ShiftConstruction::custom;
    implied.alphas = Vector(base.size());
    for (int i = 0; i < base.size(); ++i)
        implied.alphas[i] = std::abs(shifted.eigenvalues[static_cast<std::size_t>(i)] -
                                     base.eigenvalues[static_cast<std::size_t>(i)]);
    for (const auto& report : validate_shift(implied, base, b, n))
        out << "# shift_check " << report.name << ": value = "
            << sweepdetail::format_double(report.value)
            << ", bound = " << sweepdetail::format_double(report.bound) << ", "
            << (report.pass ? "pass" : "fail") << '\n';
    return out.str();
}

inline void spectral_ratio_report(const std::string& baseline_path,
                                  const std::string& shifted_path, const std::string& out_path,
                                  double b, int n, double tau) {
    const Spectrum base = load_spectrum(baseline_path);
    const Spectrum shifted = load_spectrum(shifted_path);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("spectral_ratio_report: cannot open " + out_path);
    out << spectral_ratio_report_text(base, shifted, b, n, tau);
}

// Spectrum family for kernel verification at arbitrary length p.
inline Spectrum make_kernel_verify_spectrum(const std::string& kind, int p) {
    if (kind == "example2") {
        std::vector<double> lam(static_cast<std::size_t>(p));
        for (int k = 1; k <= p; ++k)
            lam[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k), -5.0 / 6.0);
        return make_spectrum(std::move(lam), "example2-style");
    }
    if (kind == "sim1") return make_example_spectrum(ExampleKind::sim1, p);
    if (kind == "sim2") return make_example_spectrum(ExampleKind::sim2, p);
    if (kind == "identity")
        return make_spectrum(std::vector<double>(static_cast<std::size_t>(p), 1.0), "identity");
    throw std::domain_error("kernel_verify: unknown spectrum kind '" + kind + "'");
}

// One closed-form KernelReport row per p. Draws are coupled across p: the
// points at a smaller p are coordinate prefixes of the points at the largest,
// so the error sequence reflects the p-trend rather than draw noise.
inline std::string kernel_verify_csv(const std::vector<int>& p_values, int n,
                                     const std::string& spec_kind, std::uint64_t seed,
                                     SigmaSqReading reading = SigmaSqReading::trace) {
    if (p_values.empty()) throw std::domain_error("kernel_verify: empty p list");
    const int p_max = *std::max_element(p_values.begin(), p_values.end());
    Rng rng(derive_seed(seed, "kernel_verify_eta"));
    Matrix eta(n, p_max);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p_max; ++j) eta(i, j) = rng.normal();

    std::ostringstream out;
    out << KernelReport::csv_header() << '\n';
    for (int p : p_values) {
        const Spectrum spec = make_kernel_verify_spectrum(spec_kind, p);
        Matrix X = eta.leftCols(p);
        for (int j = 0; j < p; ++j)
            X.col(j) *= std::sqrt(spec.eigenvalues[static_cast<std::size_t>(j)]);
        const KernelReport report = kernel_linearization_report_closed(X, spec, reading);
        out << report.csv_row() << '\n';
    }
    return out.str();
}

inline void kernel_verify(const std::vector<int>& p_values, int n, const std::string& spec_kind,
                          std::uint64_t seed, const std::string& out_path,
                          SigmaSqReading reading = SigmaSqReading::trace) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("kernel_verify: cannot open " + out_path);
    out << kernel_verify_csv(p_values, n, spec_kind, seed, reading);
}

} // namespace rfshift

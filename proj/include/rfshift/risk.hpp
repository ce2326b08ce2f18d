// risk.hpp — Monte-Carlo risk estimation and theorem bound shapes.
//
// Excess risks measure the squared gap to the model's own reference predictor
// f(θ*, ·), evaluated at the same (possibly shifted) points:
//
//   L_id  = E_x  [ f(θ̂, x)   − f(θ*, x)   ]²
//   L_ood = E_xδ [ f(θ̂, x+δ) − f(θ*, x+δ) ]²
//
// Prediction MSE scores against realized labels y = g(x+δ) + ε instead.
//
// Bound shapes evaluate the theorem expressions with all unknown constants
// set to 1; they are meaningful for trend and monotonicity checks only.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "rfshift/datagen.hpp"
#include "rfshift/features.hpp"
#include "rfshift/kernels.hpp"
#include "rfshift/rng.hpp"
#include "rfshift/spectrum.hpp"

namespace rfshift {

enum class Metric { id_excess, ood_excess, id_mse, ood_mse };
enum class ModelKind { single_avg, ensemble };

inline std::string to_string(Metric m) {
    switch (m) {
    case Metric::id_excess: return "id_excess";
    case Metric::ood_excess: return "ood_excess";
    case Metric::id_mse: return "id_mse";
    case Metric::ood_mse: return "ood_mse";
    }
    return "?";
}

inline std::string to_string(ModelKind k) {
    return k == ModelKind::single_avg ? "single_avg" : "ensemble";
}

struct RiskEstimate {
    Metric metric = Metric::id_excess;
    ModelKind model_kind = ModelKind::single_avg;
    double mean = 0.0;
    double stderr_ = 0.0;
    int trials = 1;
    int m = 0;
    int K = 1;
};

namespace rdetail {
inline std::pair<double, double> mean_stderr(const Vector& values) {
    const double n = static_cast<double>(values.size());
    const double mean = values.mean();
    if (values.size() < 2) return {mean, 0.0};
    const double var = (values.array() - mean).square().sum() / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}
} // namespace rdetail

inline RiskEstimate id_excess_risk(const FittedModel& fitted, const Spectrum& spec,
                                   const NoiseModel& noise, int n_test, std::uint64_t seed) {
    if (!fitted.theta_star) throw std::domain_error("id_excess_risk: theta_star missing");
    Rng rng(derive_seed(seed, "risk_x"));
    const Matrix X = sample_inputs(spec, n_test, noise, rng);
    const Vector diff = predict(fitted, X) - predict_with(fitted.fm, *fitted.theta_star, X);
    const auto [mean, se] = rdetail::mean_stderr(diff.array().square().matrix());
    return {Metric::id_excess, ModelKind::single_avg, mean, se, n_test, fitted.fm.m(), 1};
}

inline RiskEstimate ood_excess_risk(const FittedModel& fitted, const Spectrum& spec,
                                    const NoiseModel& noise, const ShiftModel& shift, int n_test,
                                    std::uint64_t seed) {
    if (!fitted.theta_star) throw std::domain_error("ood_excess_risk: theta_star missing");
    Rng rng_x(derive_seed(seed, "risk_x"));
    Rng rng_d(derive_seed(seed, "risk_shift"));
    const Matrix X = sample_inputs(spec, n_test, noise, rng_x);
    const Matrix Z = X + sample_shift(shift, n_test, rng_d);
    const Vector diff = predict(fitted, Z) - predict_with(fitted.fm, *fitted.theta_star, Z);
    const auto [mean, se] = rdetail::mean_stderr(diff.array().square().matrix());
    auto est = RiskEstimate{Metric::ood_excess, ModelKind::single_avg, mean, se, n_test,
                            fitted.fm.m(), 1};
    return est;
}

// Works for FittedModel and EnsembleModel via the predict() overloads.
template <typename Model>
inline RiskEstimate prediction_mse(const Model& model, const Spectrum& spec, const GroundTruth& g,
                                   const NoiseModel& noise, const ShiftModel* shift_or_null,
                                   int n_test, std::uint64_t seed) {
    Rng rng_x(derive_seed(seed, "risk_x"));
    Rng rng_d(derive_seed(seed, "risk_shift"));
    Rng rng_e(derive_seed(seed, "risk_eps"));
    Matrix Z = sample_inputs(spec, n_test, noise, rng_x);
    const bool shifted = shift_or_null != nullptr;
    if (shifted) Z += sample_shift(*shift_or_null, n_test, rng_d);
    Vector y = g.eval_rows(Z);
    if (noise.sigma > 0.0)
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += noise.sigma * rng_e.normal();
    const Vector diff = predict(model, Z) - y;
    const auto [mean, se] = rdetail::mean_stderr(diff.array().square().matrix());
    RiskEstimate est;
    est.metric = shifted ? Metric::ood_mse : Metric::id_mse;
    est.mean = mean;
    est.stderr_ = se;
    est.trials = n_test;
    return est;
}

// R_K = 1 − L_ens / mean(singles).
inline double improvement_ratio(std::span<const double> single_risks, double ensemble_risk) {
    if (single_risks.empty()) throw std::domain_error("improvement_ratio: empty single risks");
    double sum = 0.0;
    for (double v : single_risks) sum += v;
    const double mean = sum / static_cast<double>(single_risks.size());
    if (mean <= 0.0) throw std::domain_error("improvement_ratio: mean single risk must be > 0");
    return 1.0 - ensemble_risk / mean;
}

// Companion linear-feature prediction: (1 − 1/K)·(p/m)/(1 + p/m).
inline double linear_feature_improvement_prediction(int p, int m, int K) {
    if (p < 1 || m < 1 || K < 1)
        throw std::domain_error("linear_feature_improvement_prediction: bad arguments");
    const double ratio = static_cast<double>(p) / static_cast<double>(m);
    return (1.0 - 1.0 / static_cast<double>(K)) * ratio / (1.0 + ratio);
}

// ID upper-bound shape (constants set to 1):
//   tr{Σ}/p·‖θ*‖²/n^{1/4} + σ²·(n^{−1/8} + k*/n + n·Σ_{j>k*}λ_j²/tr{Σ}²)
// Undefined when k*(b) does not exist.
inline std::optional<double> id_bound_shape(const Spectrum& spec, int n, int m,
                                            double theta_star_norm_sq, double sigma, double b,
                                            double /*xi*/) {
    (void)m;
    const auto kstar = critical_index(spec, b, n);
    if (!kstar) return std::nullopt;
    const double tr = spec.trace();
    const double p = static_cast<double>(spec.size());
    double tail_sq = 0.0;
    for (int j = spec.size() - 1; j >= *kstar; --j) {
        const double lam = spec.eigenvalues[static_cast<std::size_t>(j)];
        tail_sq += lam * lam;
    }
    const double nd = static_cast<double>(n);
    const double bias = tr / p * theta_star_norm_sq / std::pow(nd, 0.25);
    const double variance =
        sigma * sigma *
        (std::pow(nd, -0.125) + static_cast<double>(*kstar) / nd + nd * tail_sq / (tr * tr));
    return bias + variance;
}

struct OodBoundShapes {
    double lower = 0.0;
    double upper = 0.0;
    double r2_lower = 0.0;
};

// Theorem shape triple with constants 1. The "small" eigenvalue sum runs over
// {j : λ_j ≤ tr{Σ}/(bn)}.
inline OodBoundShapes ood_bound_shapes(const Spectrum& spec, int n, int m, double sigma,
                                       double tau, double b, double g_grad_sq) {
    const double tr = spec.trace();
    const double cutoff = tr / (b * static_cast<double>(n));
    double small_sum = 0.0;
    for (int j = spec.size() - 1; j >= 0; --j) {
        const double lam = spec.eigenvalues[static_cast<std::size_t>(j)];
        if (lam <= cutoff) small_sum += lam;
    }
    const double pm = static_cast<double>(spec.size()) / static_cast<double>(m);
    const double s2t = sigma * sigma * tau;
    OodBoundShapes shapes;
    shapes.lower = s2t * pm + s2t * small_sum / tr;
    shapes.upper = tau * g_grad_sq + s2t * (pm + 1.0) + s2t * small_sum / tr;
    shapes.r2_lower = (shapes.upper > 0.0) ? 0.5 * s2t * pm / shapes.upper : 0.0;
    return shapes;
}

struct BiasVariance {
    double bias = 0.0;
    double variance = 0.0;
};

// Eq. idloss with the closed-form M₁:
//   bias = θ*ᵀ[I − P]·M₁·[I − P]θ*,  P = Φᵀ(ΦΦᵀ)⁻¹Φ
//   variance = σ²·tr{(ΦΦᵀ)⁻² Φ M₁ Φᵀ}
// The m×m moment M₁ must fit in memory (guard below).
inline BiasVariance id_bias_variance_decompose(const FeatureModel& fm, const Matrix& Phi,
                                               const Vector& theta_star, double sigma,
                                               const Spectrum& spec, int m_guard = 2048) {
    if (fm.m() > m_guard)
        throw std::domain_error(
            "id_bias_variance_decompose: m exceeds closed-form guard, use Monte Carlo");
    if (Phi.cols() != fm.m() || theta_star.size() != fm.m())
        throw std::domain_error("id_bias_variance_decompose: dimension mismatch");
    const Matrix M1 = expected_feature_second_moment(fm, spec);
    const Matrix gram = Phi * Phi.transpose();
    Eigen::LDLT<Matrix> ldlt(gram);
    const Vector v = theta_star - Phi.transpose() * ldlt.solve(Phi * theta_star);
    BiasVariance out;
    out.bias = v.dot(M1 * v);
    const Matrix B = Phi * M1 * Phi.transpose();
    const Matrix GinvB = ldlt.solve(B);
    out.variance = sigma * sigma * ldlt.solve(GinvB).trace();
    return out;
}

} // namespace rfshift

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "rfshift/config.hpp"
#include "rfshift/datagen.hpp"
#include "rfshift/features.hpp"
#include "rfshift/risk.hpp"
#include "rfshift/rng.hpp"
#include "rfshift/spectrum.hpp"
#include "rfshift/sweep.hpp"

using namespace rfshift;

TEST_CASE("improvement ratio arithmetic") {
    const std::array<double, 2> s1 = {2.0, 2.0};
    CHECK(improvement_ratio(s1, 1.0) == doctest::Approx(0.5));
    const std::array<double, 2> s2 = {1.0, 1.0};
    CHECK(improvement_ratio(s2, 1.0) == doctest::Approx(0.0));
    const std::array<double, 2> s3 = {3.0, 1.0};
    CHECK(improvement_ratio(s3, 1.5) == doctest::Approx(0.25));
    const std::array<double, 2> zero = {0.0, 0.0};
    CHECK_THROWS_AS(improvement_ratio(zero, 1.0), std::domain_error);
}

TEST_CASE("linear-feature improvement prediction") {
    CHECK(linear_feature_improvement_prediction(100, 100, 2) == doctest::Approx(0.25));
    CHECK(linear_feature_improvement_prediction(1, 100000, 2) < 1e-4);
    CHECK(linear_feature_improvement_prediction(200, 100, 2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("excess risk vanishes when theta_hat equals theta_star") {
    Rng rng(derive_seed(60, "zero_excess"));
    const Spectrum spec = make_example_spectrum(ExampleKind::sim1, 6);
    FittedModel model;
    model.fm = sample_feature_model(6, 12, Activation::relu, rng);
    model.theta_hat = Vector::Random(12);
    model.theta_star = model.theta_hat;
    const auto id = id_excess_risk(model, spec, NoiseModel{}, 500, 123);
    CHECK(id.mean == 0.0);

    ShiftModel shift;
    shift.alphas = Vector::Constant(6, 4.0);
    const auto ood = ood_excess_risk(model, spec, NoiseModel{}, shift, 500, 123);
    CHECK(ood.mean == 0.0);
}

TEST_CASE("noiseless determined linear systems are recovered exactly") {
    Rng rng(derive_seed(61, "recover"));
    const int p = 10, m = 10, n = 20;
    const Spectrum spec = make_example_spectrum(ExampleKind::sim2, p);
    GroundTruth g;
    g.kind = GroundTruthKind::linear;
    g.beta = sample_unit_beta(p, rng);

    FittedModel model;
    model.fm = sample_feature_model(p, m, Activation::identity, rng);
    Rng rng_x(derive_seed(61, "x"));
    const Matrix X = sample_inputs(spec, n, NoiseModel{}, rng_x);
    const Vector y = g.eval_rows(X);
    const Matrix Phi = feature_map(model.fm, X);
    model.theta_hat = fit_min_norm(Phi, y).theta_hat;
    model.theta_star = theta_star_identity_linear(model.fm, g.beta, spec);

    const auto est = id_excess_risk(model, spec, NoiseModel{}, 2000, 7);
    CHECK(est.mean <= 1e-10);
}

TEST_CASE("zero shift reproduces the in-distribution estimate exactly") {
    Rng rng(derive_seed(62, "zero_shift"));
    const Spectrum spec = make_example_spectrum(ExampleKind::sim1, 8);
    GroundTruth g;
    g.kind = GroundTruthKind::linear;
    g.beta = sample_unit_beta(8, rng);

    FittedModel model;
    model.fm = sample_feature_model(8, 24, Activation::relu, rng);
    Rng rng_x(derive_seed(62, "x"));
    const Matrix X = sample_inputs(spec, 8, NoiseModel{}, rng_x);
    Rng rng_y(derive_seed(62, "y"));
    const Vector y = sample_labels(g, X, NoiseModel{0.1}, rng_y);
    model.theta_hat = fit_min_norm(feature_map(model.fm, X), y).theta_hat;
    Rng rng_pop(derive_seed(62, "pop"));
    model.theta_star = estimate_theta_star(model.fm, g, spec, 2000, 0.0, rng_pop).theta_star;

    ShiftModel zero;
    zero.alphas = Vector::Zero(8);
    const auto id = id_excess_risk(model, spec, NoiseModel{}, 400, 99);
    const auto ood = ood_excess_risk(model, spec, NoiseModel{}, zero, 400, 99);
    CHECK(ood.mean == id.mean); // same input stream, delta identically zero
}

TEST_CASE("prediction MSE floors") {
    Rng rng(derive_seed(63, "mse"));
    const int p = 6;
    const Spectrum spec = make_spectrum(std::vector<double>(p, 1.0));
    GroundTruth g;
    g.kind = GroundTruthKind::linear;
    g.beta = sample_unit_beta(p, rng);

    // Perfect predictor at sigma = 0: identity features realize the target.
    FittedModel exact;
    exact.fm = sample_feature_model(p, p, Activation::identity, rng);
    exact.theta_hat = theta_star_identity_linear(exact.fm, g.beta, spec);
    const auto zero_loss = prediction_mse(exact, spec, g, NoiseModel{}, nullptr, 1000, 5);
    CHECK(zero_loss.mean <= 1e-16);

    // Constant-zero predictor against a zero target: pure noise floor.
    GroundTruth null_g;
    null_g.kind = GroundTruthKind::linear;
    null_g.beta = Vector::Zero(p);
    FittedModel silent;
    silent.fm = exact.fm;
    silent.theta_hat = Vector::Zero(p);
    const double s = 0.4;
    const auto noise_loss =
        prediction_mse(silent, spec, null_g, NoiseModel{s}, nullptr, 100000, 6);
    CHECK(std::abs(noise_loss.mean - s * s) <= 3.0 * noise_loss.stderr_);
}

TEST_CASE("id bound shape evaluates the theorem expression") {
    // sigma = 0, theta* = 0 kills every term.
    const Spectrum flat = make_spectrum(std::vector<double>(16, 1.0));
    const auto zero = id_bound_shape(flat, 4, 16, 0.0, 0.0, 1.0, 0.5);
    REQUIRE(zero.has_value());
    CHECK(*zero == 0.0);

    // k* undefined propagates: identity spectrum with p below b*n.
    const Spectrum small = make_spectrum(std::vector<double>(5, 1.0));
    CHECK_FALSE(id_bound_shape(small, 10, 5, 1.0, 1.0, 1.0, 0.5).has_value());

    // Decreasing across n on the heavy-tailed example (fixed theta* norm).
    double prev = 1e300;
    for (int n : {8, 16, 32}) {
        const Spectrum spec = make_example_spectrum(ExampleKind::example2, n);
        const auto shape = id_bound_shape(spec, n, spec.size(), 1.0, 0.1, 6.0, 0.5);
        REQUIRE(shape.has_value());
        CHECK(*shape < prev);
        prev = *shape;
    }
}

TEST_CASE("ood bound shapes") {
    const Spectrum spec = make_example_spectrum(ExampleKind::sim1, 40);
    const double sigma = 0.3, tau = 2.0, b = 1.0, grad_sq = 1.0;

    const auto zero_tau = ood_bound_shapes(spec, 40, 40, sigma, 0.0, b, grad_sq);
    CHECK(zero_tau.lower == 0.0);
    CHECK(zero_tau.upper == 0.0);
    CHECK(zero_tau.r2_lower == 0.0);

    // m -> infinity: only the small-eigenvalue term survives in the lower shape.
    const auto huge_m = ood_bound_shapes(spec, 40, 1 << 30, sigma, tau, b, grad_sq);
    double small_sum = 0.0;
    const double cutoff = spec.trace() / (b * 40.0);
    for (double lam : spec.eigenvalues)
        if (lam <= cutoff) small_sum += lam;
    CHECK(huge_m.lower ==
          doctest::Approx(sigma * sigma * tau * small_sum / spec.trace()).epsilon(1e-6));

    double prev = 1e300;
    for (int m : {40, 80, 160, 320}) {
        const auto shapes = ood_bound_shapes(spec, 40, m, sigma, tau, b, grad_sq);
        CHECK(shapes.r2_lower < prev);
        prev = shapes.r2_lower;
    }
}

TEST_CASE("bound shapes are deterministic pure functions") {
    const Spectrum spec = make_example_spectrum(ExampleKind::sim2, 24);
    const auto a = id_bound_shape(spec, 6, 48, 1.3, 0.2, 1.0, 0.5);
    const auto b = id_bound_shape(spec, 6, 48, 1.3, 0.2, 1.0, 0.5);
    REQUIRE(a.has_value());
    CHECK(*a == *b);
    const auto s1 = ood_bound_shapes(spec, 6, 48, 0.2, 1.0, 1.0, 0.7);
    const auto s2 = ood_bound_shapes(spec, 6, 48, 0.2, 1.0, 1.0, 0.7);
    CHECK(s1.lower == s2.lower);
    CHECK(s1.upper == s2.upper);
    CHECK(s1.r2_lower == s2.r2_lower);
}

TEST_CASE("ensembling never hurts on average and its gain fades with m") {
    // Identity activation, flat-tail spectrum, isotropic shift: over 500
    // matched-seed trials the ensemble OOD risk stays within two combined
    // standard errors of (or below) the single-model average at every m, and
    // the improvement ratio R2 is non-increasing as m doubles.
    ExperimentConfig cfg;
    cfg.setting_name = "ens_invariant";
    cfg.spectrum.kind = SpectrumSource::Kind::sim1;
    cfg.ground_truth = GroundTruthKind::linear;
    cfg.n = 40;
    cfg.p = 40;
    cfg.m_values = {40, 80, 160, 320, 640, 1280};
    cfg.K = 2;
    cfg.sigma = 0.005;
    cfg.shift = {ShiftConstruction::isotropic, 4.0};
    cfg.n_test = 500;
    cfg.trials = 500;
    cfg.master_seed = 314159;
    cfg.activation = Activation::identity;
    cfg.metrics = {Metric::id_excess, Metric::ood_excess};

    const SweepResult result = run_sweep(cfg, 2);
    struct Cell {
        double mean, se;
    };
    std::map<std::pair<int, int>, Cell> ood, id;
    for (const auto& row : result.rows) {
        const int kind = row.model_kind == ModelKind::single_avg ? 0 : 1;
        if (row.metric == Metric::ood_excess) ood[{row.m, kind}] = {row.mean, row.stderr_};
        if (row.metric == Metric::id_excess) id[{row.m, kind}] = {row.mean, row.stderr_};
    }
    for (int m : cfg.m_values) {
        const Cell single = ood.at({m, 0});
        const Cell ens = ood.at({m, 1});
        const double cse = std::hypot(single.se, ens.se);
        CHECK(ens.mean <= single.mean + 2.0 * cse);
        // shifted inputs can only add risk for these models
        CHECK(id.at({m, 0}).mean <= single.mean);
    }
    double prev_r2 = 1e300, prev_se = 0.0;
    for (int m : {40, 80, 160, 320}) {
        const Cell single = ood.at({m, 0});
        const Cell ens = ood.at({m, 1});
        const double r2 = 1.0 - ens.mean / single.mean;
        const double se =
            std::hypot(ens.se / single.mean, ens.mean * single.se / (single.mean * single.mean));
        CHECK(r2 <= prev_r2 + 2.0 * std::hypot(se, prev_se));
        prev_r2 = r2;
        prev_se = se;
    }
}

TEST_CASE("bias-variance decomposition edge cases") {
    Rng rng(derive_seed(64, "bv"));
    const int p = 8, n = 8, m = 32;
    const Spectrum spec = make_example_spectrum(ExampleKind::sim2, p);
    const FeatureModel fm = sample_feature_model(p, m, Activation::relu, rng);
    Rng rng_x(derive_seed(64, "x"));
    const Matrix X = sample_inputs(spec, n, NoiseModel{}, rng_x);
    const Matrix Phi = feature_map(fm, X);

    Vector theta_star(m);
    for (int i = 0; i < m; ++i) theta_star[i] = rng.normal();

    const auto noiseless = id_bias_variance_decompose(fm, Phi, theta_star, 0.0, spec);
    CHECK(noiseless.variance == 0.0);
    CHECK(noiseless.bias >= 0.0);

    const auto centered = id_bias_variance_decompose(fm, Phi, Vector(Vector::Zero(m)), 0.5, spec);
    CHECK(centered.bias == 0.0);
    CHECK(centered.variance > 0.0);

    FeatureModel big;
    big.activation = Activation::relu;
    big.W = Matrix::Zero(p, 3000);
    CHECK_THROWS_AS(id_bias_variance_decompose(big, Matrix::Zero(n, 3000),
                                               Vector(Vector::Zero(3000)), 0.1, spec),
                    std::domain_error);
}

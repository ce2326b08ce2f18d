// features.hpp — random feature models and min-norm (ridgeless) estimation.
//
// A feature model maps x ↦ φ(xᵀW)/√m with W ∈ R^{p×m}, W_ij ~ N(0, 1/p),
// and φ either ReLU or the identity. Fitting goes through the n×n Gram
// matrix: θ̂ = Φᵀ(ΦΦᵀ)⁻¹y, with eigenvalues of ΦΦᵀ below a relative rank
// tolerance truncated (pseudoinverse). Ridge (reg > 0) solves
// Φᵀ(ΦΦᵀ + reg·I)⁻¹y instead.
//
// θ*(W), the population MSE minimizer, has no closed form for ReLU features;
// estimate_theta_star approximates it by a noiseless ridge fit on a large
// fresh sample. For identity features and a linear target the exact minimizer
// is available and serves as the cross-check oracle.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rfshift/datagen.hpp"
#include "rfshift/rng.hpp"
#include "rfshift/spectrum.hpp"

namespace rfshift {

enum class Activation { relu, identity };

struct FeatureModel {
    Matrix W; // p x m
    Activation activation = Activation::relu;

    int p() const { return static_cast<int>(W.rows()); }
    int m() const { return static_cast<int>(W.cols()); }
};

inline FeatureModel sample_feature_model(int p, int m, Activation activation, Rng& rng) {
    if (p < 1 || m < 1) throw std::domain_error("sample_feature_model: p, m must be >= 1");
    FeatureModel fm;
    fm.activation = activation;
    fm.W.resize(p, m);
    const double scale = 1.0 / std::sqrt(static_cast<double>(p));
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < p; ++i) fm.W(i, j) = scale * rng.normal();
    return fm;
}

// Φ = φ(X·W)/√m, row i = φ(x_iᵀW)/√m.
inline Matrix feature_map(const FeatureModel& fm, const Matrix& X) {
    if (X.cols() != fm.W.rows()) throw std::domain_error("feature_map: dimension mismatch");
    Matrix Phi = X * fm.W;
    if (fm.activation == Activation::relu) Phi = Phi.cwiseMax(0.0);
    Phi /= std::sqrt(static_cast<double>(fm.m()));
    return Phi;
}

struct FitDiagnostics {
    double residual_max = 0.0;            // ||Phi theta - y||_inf
    double gram_condition_estimate = 0.0; // lambda_max / lambda_min_kept of Phi Phi^T
    bool rank_deficient = false;
};

struct FitResult {
    Vector theta_hat;
    FitDiagnostics diag;
};

inline FitResult fit_min_norm(const Matrix& Phi, const Vector& y, double reg = 0.0,
                              double rank_rel_tol = 1e-10) {
    if (Phi.rows() != y.size()) throw std::domain_error("fit_min_norm: Phi/y size mismatch");
    if (!Phi.allFinite() || !y.allFinite())
        throw std::domain_error("fit_min_norm: non-finite inputs");
    if (reg < 0.0) throw std::domain_error("fit_min_norm: reg must be nonnegative");

    const Matrix gram = Phi * Phi.transpose();
    FitResult result;
    if (reg > 0.0) {
        Matrix regularized = gram;
        regularized.diagonal().array() += reg;
        Eigen::LDLT<Matrix> ldlt(regularized);
        const Vector alpha = ldlt.solve(y);
        result.theta_hat = Phi.transpose() * alpha;
        Eigen::SelfAdjointEigenSolver<Matrix> es(regularized, Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        result.diag.gram_condition_estimate = ev(ev.size() - 1) / ev(0);
    } else {
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
        const Vector& ev = es.eigenvalues(); // ascending
        const double ev_max = ev(ev.size() - 1);
        const double cut = rank_rel_tol * std::max(ev_max, 0.0);
        Vector inv = Vector::Zero(ev.size());
        double ev_min_kept = ev_max;
        int kept = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (ev(i) > cut) {
                inv(i) = 1.0 / ev(i);
                ev_min_kept = std::min(ev_min_kept, ev(i));
                ++kept;
            }
        }
        result.diag.rank_deficient = kept < ev.size();
        result.diag.gram_condition_estimate =
            (kept > 0 && ev_min_kept > 0.0) ? ev_max / ev_min_kept : 0.0;
        const Vector alpha =
            es.eigenvectors() * inv.asDiagonal() * (es.eigenvectors().transpose() * y);
        result.theta_hat = Phi.transpose() * alpha;
    }
    result.diag.residual_max = (Phi * result.theta_hat - y).cwiseAbs().maxCoeff();
    return result;
}

struct FittedModel {
    FeatureModel fm;
    Vector theta_hat;
    std::optional<Vector> theta_star;
    FitDiagnostics diag;
};

inline Vector predict_with(const FeatureModel& fm, const Vector& theta, const Matrix& X) {
    if (theta.size() != fm.m()) throw std::domain_error("predict_with: theta size mismatch");
    if (fm.activation == Activation::identity) {
        // x^T W theta / sqrt(m): collapse to a p-vector first.
        const Vector v = fm.W * theta / std::sqrt(static_cast<double>(fm.m()));
        return X * v;
    }
    return feature_map(fm, X) * theta;
}

inline Vector predict(const FittedModel& model, const Matrix& X) {
    return predict_with(model.fm, model.theta_hat, X);
}

struct EnsembleModel {
    std::vector<FittedModel> members;
};

inline Vector predict(const EnsembleModel& ens, const Matrix& X) {
    if (ens.members.empty()) throw std::domain_error("predict: empty ensemble");
    const int p = ens.members.front().fm.p();
    const Activation act = ens.members.front().fm.activation;
    for (const auto& member : ens.members)
        if (member.fm.p() != p || member.fm.activation != act)
            throw std::domain_error("predict: ensemble members disagree on p or activation");
    Vector out = Vector::Zero(X.rows());
    for (const auto& member : ens.members) out += predict(member, X);
    return out / static_cast<double>(ens.members.size());
}

struct ThetaStarEstimate {
    Vector theta_star;
    double pop_mse = 0.0;
    bool underdetermined_warning = false; // n_pop < m
};

inline double default_theta_star_reg(const Matrix& Phi) {
    return 1e-8 * Phi.squaredNorm() / static_cast<double>(Phi.rows());
}

inline int default_theta_star_samples(int m) { return std::max(10 * m, 10000); }

// Noiseless ridge fit of g on n_pop fresh inputs: the large-sample estimate of
// argmin_theta E[g(x) - f_W(theta, x)]^2.
inline ThetaStarEstimate estimate_theta_star(const FeatureModel& fm, const GroundTruth& g,
                                             const Spectrum& spec, int n_pop, double reg_pop,
                                             Rng& rng) {
    if (n_pop < 1) throw std::domain_error("estimate_theta_star: n_pop must be >= 1");
    const NoiseModel clean{0.0, EtaDist::gaussian};
    const Matrix X = sample_inputs(spec, n_pop, clean, rng);
    const Vector targets = g.eval_rows(X);
    const Matrix Phi = feature_map(fm, X);

    ThetaStarEstimate est;
    est.underdetermined_warning = n_pop < fm.m();
    if (reg_pop <= 0.0) reg_pop = default_theta_star_reg(Phi);
    // Normal equations on the m x m side (n_pop >= m is the recommended regime).
    Matrix A = Phi.transpose() * Phi;
    A.diagonal().array() += reg_pop;
    Eigen::LDLT<Matrix> ldlt(A);
    est.theta_star = ldlt.solve(Phi.transpose() * targets);
    est.pop_mse = (Phi * est.theta_star - targets).squaredNorm() / static_cast<double>(n_pop);
    return est;
}

// Exact population minimizer for identity activation and linear g(x) = beta^T x.
// With m >= p and full-row-rank W the class realizes g exactly and the
// minimizer solves W theta = sqrt(m) beta; otherwise the Sigma-weighted normal
// equations (W^T Sigma W)^+ W^T Sigma beta give the projection.
inline Vector theta_star_identity_linear(const FeatureModel& fm, const Vector& beta,
                                         const Spectrum& spec) {
    if (fm.activation != Activation::identity)
        throw std::domain_error("theta_star_identity_linear: requires identity activation");
    const double sqrt_m = std::sqrt(static_cast<double>(fm.m()));
    if (fm.m() >= fm.p()) {
        const Matrix gram = fm.W * fm.W.transpose(); // p x p
        Eigen::LDLT<Matrix> ldlt(gram);
        return sqrt_m * (fm.W.transpose() * ldlt.solve(beta));
    }
    const Vector lam = Eigen::Map<const Vector>(spec.eigenvalues.data(), spec.size());
    const Matrix SW = lam.asDiagonal() * fm.W; // Sigma W
    const Matrix A = fm.W.transpose() * SW;    // W^T Sigma W, m x m
    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    const Vector& ev = es.eigenvalues();
    const double cut = 1e-12 * std::max(ev(ev.size() - 1), 0.0);
    Vector inv = Vector::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > cut) inv(i) = 1.0 / ev(i);
    const Vector rhs = SW.transpose() * beta;
    return sqrt_m * (es.eigenvectors() * inv.asDiagonal() *
                     (es.eigenvectors().transpose() * rhs));
}

} // namespace rfshift

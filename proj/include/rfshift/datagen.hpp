// datagen.hpp — training/test data, labels, and covariate-shift sampling.
//
// Inputs follow x = Σ^{1/2}η with independent unit-variance η coordinates
// (gaussian or rademacher). Labels are y = g(x) + ε with gaussian ε.
// Shifts are zero-mean gaussian δ with diagonal covariance diag(α), built to
// respect the strength constraints tied to the large/small eigenvalue split
// C₁ = {i : λ_i > tr{Σ}/(bn)}, C₂ = its complement.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "rfshift/rng.hpp"
#include "rfshift/spectrum.hpp"

namespace rfshift {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class EtaDist { gaussian, rademacher };

struct NoiseModel {
    double sigma = 0.0;   // label-noise standard deviation
    EtaDist eta = EtaDist::gaussian;
};

enum class GroundTruthKind { linear, softplus, custom };

struct GroundTruth {
    GroundTruthKind kind = GroundTruthKind::linear;
    Vector beta;
    std::function<double(const Eigen::Ref<const Vector>&)> custom_fn;

    double eval(const Eigen::Ref<const Vector>& x) const {
        switch (kind) {
        case GroundTruthKind::linear:
            return beta.dot(x);
        case GroundTruthKind::softplus: {
            const double z = beta.dot(x);
            // log(1 + e^z) without overflow for large |z|
            return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        }
        case GroundTruthKind::custom:
            return custom_fn(x);
        }
        return 0.0;
    }

    Vector eval_rows(const Matrix& X) const {
        Vector out(X.rows());
        if (kind == GroundTruthKind::linear) {
            out = X * beta;
        } else {
            for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = eval(X.row(i).transpose());
        }
        return out;
    }
};

// β drawn uniformly from the unit sphere; the direction is fixed per master
// seed, not per trial.
inline Vector sample_unit_beta(int p, Rng& rng) {
    Vector beta(p);
    for (int i = 0; i < p; ++i) beta[i] = rng.normal();
    const double norm = beta.norm();
    if (norm == 0.0) {
        beta.setZero();
        beta[0] = 1.0;
        return beta;
    }
    return beta / norm;
}

inline Matrix sample_inputs(const Spectrum& spec, int n, const NoiseModel& noise, Rng& rng) {
    const int p = spec.size();
    Matrix X(n, p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) {
            const double eta = (noise.eta == EtaDist::gaussian) ? rng.normal() : rng.rademacher();
            X(i, j) = std::sqrt(spec.eigenvalues[static_cast<std::size_t>(j)]) * eta;
        }
    }
    return X;
}

inline Vector sample_labels(const GroundTruth& g, const Matrix& X, const NoiseModel& noise,
                            Rng& rng) {
    if (g.kind != GroundTruthKind::custom && X.cols() != g.beta.size())
        throw std::domain_error("sample_labels: dimension mismatch between X and beta");
    Vector y = g.eval_rows(X);
    if (noise.sigma > 0.0)
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += noise.sigma * rng.normal();
    return y;
}

enum class ShiftConstruction { assumption2_default, isotropic, custom };

struct ShiftModel {
    Vector alphas; // per-direction shift variances, α_i >= 0
    double tau = 0.0;
    ShiftConstruction construction = ShiftConstruction::custom;
};

// Worst-case allocation used by the lower-bound argument: no shift on the
// large-eigenvalue directions, τ·tr{Σ}/n on the small ones, clipped so that
// max α_i ≤ τ and the small-direction spectral cap α_i ≤ τ·max_{C₂} λ_i holds.
inline ShiftModel build_shift_model(const Spectrum& spec, double b, int n, double tau,
                                    ShiftConstruction construction, double isotropic_c = 0.0) {
    const int p = spec.size();
    ShiftModel shift;
    shift.tau = tau;
    shift.construction = construction;
    shift.alphas = Vector::Zero(p);
    switch (construction) {
    case ShiftConstruction::isotropic:
        shift.alphas.setConstant(isotropic_c);
        return shift;
    case ShiftConstruction::custom:
        return shift;
    case ShiftConstruction::assumption2_default: {
        const double tr = spec.trace();
        const double cutoff = tr / (b * static_cast<double>(n));
        double lam_max_small = 0.0;
        for (int i = 0; i < p; ++i) {
            const double lam = spec.eigenvalues[static_cast<std::size_t>(i)];
            if (lam <= cutoff) lam_max_small = std::max(lam_max_small, lam);
        }
        if (lam_max_small == 0.0) return shift; // no small directions: no shift budget
        const double alpha = tau * std::min({1.0, tr / static_cast<double>(n), lam_max_small});
        for (int i = 0; i < p; ++i)
            if (spec.eigenvalues[static_cast<std::size_t>(i)] <= cutoff) shift.alphas[i] = alpha;
        return shift;
    }
    }
    return shift;
}

struct ConstraintReport {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool pass = false;
};

// The three strength constraints, in diagonal form:
//   (i)   max_i α_i ≤ τ
//   (ii)  Σ_{i∈C₁} α_i/λ_i ≤ τ·n
//   (iii) max_{i∈C₂} α_i ≤ τ·max_{i∈C₂} λ_i
inline std::array<ConstraintReport, 3> validate_shift(const ShiftModel& shift,
                                                      const Spectrum& spec, double b, int n) {
    if (shift.alphas.size() != spec.size())
        throw std::domain_error("validate_shift: alpha/spectrum length mismatch");
    const double tr = spec.trace();
    const double cutoff = tr / (b * static_cast<double>(n));
    double max_alpha = 0.0, large_ratio_sum = 0.0, max_alpha_small = 0.0, max_lam_small = 0.0;
    for (int i = 0; i < spec.size(); ++i) {
        const double lam = spec.eigenvalues[static_cast<std::size_t>(i)];
        const double alpha = shift.alphas[i];
        max_alpha = std::max(max_alpha, alpha);
        if (lam > cutoff) {
            large_ratio_sum += alpha / lam;
        } else {
            max_alpha_small = std::max(max_alpha_small, alpha);
            max_lam_small = std::max(max_lam_small, lam);
        }
    }
    std::array<ConstraintReport, 3> reports;
    reports[0] = {"spectral_norm", max_alpha, shift.tau, max_alpha <= shift.tau};
    const double large_bound = shift.tau * static_cast<double>(n);
    reports[1] = {"large_direction_budget", large_ratio_sum, large_bound,
                  large_ratio_sum <= large_bound};
    const double small_bound = shift.tau * max_lam_small;
    reports[2] = {"small_direction_cap", max_alpha_small, small_bound,
                  max_alpha_small <= small_bound};
    return reports;
}

inline Matrix sample_shift(const ShiftModel& shift, int n_test, Rng& rng) {
    const int p = static_cast<int>(shift.alphas.size());
    Matrix D(n_test, p);
    // Stream consumption is independent of which alphas vanish.
    for (int i = 0; i < n_test; ++i)
        for (int j = 0; j < p; ++j) D(i, j) = std::sqrt(shift.alphas[j]) * rng.normal();
    return D;
}

} // namespace rfshift

// kernels.hpp — closed-form expected kernels and Gaussian moments.
//
// Depth-1 ReLU arc-cosine kernel (expectation of the random-feature Gram
// entry over W, entries N(0, 1/p)):
//
//   E K_{s,t} = (1/p)·[ (x_sᵀx_t / 2π)·arccos(−ρ) + (‖x_s‖‖x_t‖ / 2π)·√(1−ρ²) ],
//   ρ = x_sᵀx_t / (‖x_s‖‖x_t‖)
//
// Linearized surrogate (rank-one + linear + identity):
//
//   K̃ = (tr{Σ}/p)·(1/2π + 3·tr{Σ²}/(4π·tr{Σ}²))·11ᵀ + (1/4p)·XXᵀ
//        + (tr{Σ}/p)·(1/4 − 1/2π)·I_n
//
// The 11ᵀ coefficient admits a second reading in which the quadratic-trace
// term is divided by λ₁² first (an effective-rank form); both are exposed and
// the trace form is the default.
//
// Also here: the expected feature second moment M₁ = (1/m)E φ(Wᵀx)φ(Wᵀx)ᵀ,
// the ReLU-gradient shift kernel E ∇φ(Wᵀx)ᵀ Σ_δ ∇φ(Wᵀx), the Gaussian
// orthant moment E wᵀHw·aᵀw·bᵀw·1(aᵀw≥0)1(bᵀw≥0) in exact finite-p form, and
// the trace-comparison inequality checker.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rfshift/datagen.hpp"
#include "rfshift/features.hpp"
#include "rfshift/spectrum.hpp"

namespace rfshift {

namespace kdetail {
constexpr double kPi = 3.14159265358979323846;

inline double clamp_rho(double rho) { return std::min(1.0, std::max(-1.0, rho)); }

// Largest-magnitude eigenvalue of a symmetric matrix.
inline double sym_op_norm(const Matrix& A) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}
} // namespace kdetail

inline double expected_kernel_entry(const Vector& xs, const Vector& xt, int p) {
    const double ns = xs.norm();
    const double nt = xt.norm();
    if (ns == 0.0 || nt == 0.0) return 0.0; // continuity limit
    const double dot = xs.dot(xt);
    const double rho = kdetail::clamp_rho(dot / (ns * nt));
    const double arc = std::acos(-rho);
    const double root = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    return (dot * arc + ns * nt * root) / (2.0 * kdetail::kPi * static_cast<double>(p));
}

inline Matrix expected_kernel_matrix(const Matrix& X, int p) {
    const int n = static_cast<int>(X.rows());
    Matrix K(n, n);
    for (int s = 0; s < n; ++s)
        for (int t = s; t < n; ++t) {
            K(s, t) = expected_kernel_entry(X.row(s).transpose(), X.row(t).transpose(), p);
            K(t, s) = K(s, t);
        }
    return K;
}

enum class SigmaSqReading { trace, effective_rank };

inline Matrix linearized_kernel(const Matrix& X, const Spectrum& spec,
                                SigmaSqReading reading = SigmaSqReading::trace) {
    if (X.cols() != spec.size())
        throw std::domain_error("linearized_kernel: X columns must match spectrum length");
    const int n = static_cast<int>(X.rows());
    const double p = static_cast<double>(spec.size());
    const double tr = spec.trace();
    const double tr2 = spec.trace_sq();
    const double lam1 = spec.eigenvalues.front();
    const double quad = (reading == SigmaSqReading::trace) ? tr2 : tr2 / (lam1 * lam1);
    const double ones_coeff =
        tr / p * (1.0 / (2.0 * kdetail::kPi) + 3.0 * quad / (4.0 * kdetail::kPi * tr * tr));
    const double id_coeff = tr / p * (0.25 - 1.0 / (2.0 * kdetail::kPi));
    Matrix K = Matrix::Constant(n, n, ones_coeff);
    K.noalias() += X * X.transpose() / (4.0 * p);
    K.diagonal().array() += id_coeff;
    return K;
}

struct KernelReport {
    Matrix empirical_or_expected;
    Matrix linearized;
    double op_norm_error = 0.0;
    double relative_error = 0.0; // error / (tr{Sigma}/p)
    int p = 0;
    int n = 0;
    std::string mode; // "closed" or "mc"

    static std::string csv_header() { return "p,n,m_or_closed,op_norm_error,relative_error"; }

    std::string csv_row() const {
        std::ostringstream out;
        out.precision(17);
        out << p << ',' << n << ',' << mode << ',' << op_norm_error << ',' << relative_error;
        return out.str();
    }
};

inline KernelReport kernel_linearization_report_closed(const Matrix& X, const Spectrum& spec,
                                                       SigmaSqReading reading =
                                                           SigmaSqReading::trace) {
    KernelReport report;
    report.p = spec.size();
    report.n = static_cast<int>(X.rows());
    report.mode = "closed";
    report.empirical_or_expected = expected_kernel_matrix(X, spec.size());
    report.linearized = linearized_kernel(X, spec, reading);
    report.op_norm_error = kdetail::sym_op_norm(report.empirical_or_expected - report.linearized);
    report.relative_error = report.op_norm_error / (spec.trace() / static_cast<double>(spec.size()));
    return report;
}

inline KernelReport kernel_linearization_report_mc(const Matrix& X, const Spectrum& spec, int m,
                                                   int n_rep, Rng& rng,
                                                   SigmaSqReading reading = SigmaSqReading::trace) {
    if (n_rep < 1) throw std::domain_error("kernel_linearization_report_mc: n_rep must be >= 1");
    KernelReport report;
    report.p = spec.size();
    report.n = static_cast<int>(X.rows());
    report.mode = "mc:m=" + std::to_string(m) + ":reps=" + std::to_string(n_rep);
    Matrix avg = Matrix::Zero(X.rows(), X.rows());
    for (int rep = 0; rep < n_rep; ++rep) {
        const FeatureModel fm = sample_feature_model(spec.size(), m, Activation::relu, rng);
        const Matrix Phi = feature_map(fm, X);
        avg.noalias() += Phi * Phi.transpose();
    }
    avg /= static_cast<double>(n_rep);
    report.empirical_or_expected = avg;
    report.linearized = linearized_kernel(X, spec, reading);
    report.op_norm_error = kdetail::sym_op_norm(report.empirical_or_expected - report.linearized);
    report.relative_error = report.op_norm_error / (spec.trace() / static_cast<double>(spec.size()));
    return report;
}

// M₁ = (1/m)·E_x φ(Wᵀx)φ(Wᵀx)ᵀ for gaussian x with covariance Σ:
//   M_ij = (1/2πm)·[ wᵢᵀΣwⱼ·arccos(−ρ_Σ) + ‖Σ^½wᵢ‖‖Σ^½wⱼ‖·√(1−ρ_Σ²) ],
//   M_ii = wᵢᵀΣwᵢ / (2m).
inline Matrix expected_feature_second_moment(const FeatureModel& fm, const Spectrum& spec) {
    if (fm.p() != spec.size())
        throw std::domain_error("expected_feature_second_moment: p mismatch");
    const int m = fm.m();
    const Vector lam = Eigen::Map<const Vector>(spec.eigenvalues.data(), spec.size());
    const Matrix S = fm.W.transpose() * (lam.asDiagonal() * fm.W); // W^T Sigma W
    const Vector d = S.diagonal().cwiseSqrt();
    Matrix M(m, m);
    for (int i = 0; i < m; ++i) {
        M(i, i) = S(i, i) / (2.0 * m);
        for (int j = i + 1; j < m; ++j) {
            const double rho = kdetail::clamp_rho(S(i, j) / (d(i) * d(j)));
            const double val = (S(i, j) * std::acos(-rho) +
                                d(i) * d(j) * std::sqrt(std::max(0.0, 1.0 - rho * rho))) /
                               (2.0 * kdetail::kPi * m);
            M(i, j) = val;
            M(j, i) = val;
        }
    }
    return M;
}

// Entry of E_x ∇φ(Wᵀx)ᵀ Σ_δ ∇φ(Wᵀx):
//   (1/2π)·arccos(−ρ_Σ)·wᵢᵀΣ_δwⱼ with ρ_Σ the Σ-weighted cosine.
// At wⱼ = wᵢ this reduces to wᵢᵀΣ_δwᵢ/2 (ρ_Σ = 1).
inline double relu_gradient_kernel_entry(const Vector& wi, const Vector& wj,
                                         const Spectrum& spec, const ShiftModel& shift) {
    if (wi.size() != spec.size() || wj.size() != spec.size() ||
        shift.alphas.size() != spec.size())
        throw std::domain_error("relu_gradient_kernel_entry: dimension mismatch");
    const Vector lam = Eigen::Map<const Vector>(spec.eigenvalues.data(), spec.size());
    const double sij = wi.dot(lam.asDiagonal() * wj);
    const double di = std::sqrt(wi.dot(lam.asDiagonal() * wi));
    const double dj = std::sqrt(wj.dot(lam.asDiagonal() * wj));
    if (di == 0.0 || dj == 0.0) return 0.0;
    const double rho = kdetail::clamp_rho(sij / (di * dj));
    const double shifted = wi.dot(shift.alphas.asDiagonal() * wj);
    return std::acos(-rho) * shifted / (2.0 * kdetail::kPi);
}

// E_w wᵀHw·aᵀw·bᵀw·1(aᵀw ≥ 0)·1(bᵀw ≥ 0) for w ~ N(0, I_p) and diagonal
// PSD H, exact at finite p (the Rayleigh-quotient terms are kept):
//
//   ( ‖a‖‖b‖·tr{H}/(2π)·ρ + aᵀHb/π )·arccos(−ρ)
//   + ( tr{H} + aᵀHa/‖a‖² + bᵀHb/‖b‖² )·‖a‖‖b‖/(2π)·√(1−ρ²)
inline double ood_moment_closed_form(const Vector& h_diag, const Vector& a, const Vector& b) {
    if (h_diag.size() != a.size() || a.size() != b.size())
        throw std::domain_error("ood_moment_closed_form: dimension mismatch");
    if ((h_diag.array() < 0.0).any())
        throw std::domain_error("ood_moment_closed_form: H must be PSD (nonnegative diagonal)");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw std::domain_error("ood_moment_closed_form: a and b must be nonzero");
    const double rho = kdetail::clamp_rho(a.dot(b) / (na * nb));
    const double trH = h_diag.sum();
    const double aHb = (a.array() * h_diag.array() * b.array()).sum();
    const double aHa = (a.array() * h_diag.array() * a.array()).sum();
    const double bHb = (b.array() * h_diag.array() * b.array()).sum();
    const double arc = std::acos(-rho);
    const double root = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    return (na * nb * trH / (2.0 * kdetail::kPi) * rho + aHb / kdetail::kPi) * arc +
           (trH + aHa / (na * na) + bHb / (nb * nb)) * na * nb / (2.0 * kdetail::kPi) * root;
}

struct InequalityReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

// Inequalities: for positive definite A, B with μ_n(A) > μ₁(B) and PSD C,
//   tr{AC} ≤ tr{(A+B)C} ≤ (1 + μ₁(B)/μ_n(A))·tr{AC}
//   (1 − μ₁(B)/μ_n(A))·tr{A⁻¹C} ≤ tr{(A+B)⁻¹C} ≤ tr{A⁻¹C}
// Equalities are accepted within a small relative slack.
inline std::array<InequalityReport, 4> trace_comparison_check(const Matrix& A, const Matrix& B,
                                                              const Matrix& C) {
    const auto n = A.rows();
    if (A.cols() != n || B.rows() != n || B.cols() != n || C.rows() != n || C.cols() != n)
        throw std::domain_error("trace_comparison_check: size mismatch");
    Eigen::SelfAdjointEigenSolver<Matrix> esA(A, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> esB(B, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> esC(C, Eigen::EigenvaluesOnly);
    const double mu_n_A = esA.eigenvalues()(0);
    const double mu_1_B = esB.eigenvalues()(esB.eigenvalues().size() - 1);
    const double mu_n_C = esC.eigenvalues()(0);
    const double scaleB = std::abs(esB.eigenvalues()(0));
    if (!(mu_n_A > 0.0)) throw std::domain_error("trace_comparison_check: A not positive definite");
    if (mu_n_C < -1e-10 * std::max(1.0, std::abs(esC.eigenvalues()(esC.eigenvalues().size() - 1))))
        throw std::domain_error("trace_comparison_check: C not positive semidefinite");
    if (!(mu_n_A > mu_1_B) && !(scaleB == 0.0 && mu_1_B == 0.0))
        throw std::domain_error("trace_comparison_check: requires mu_n(A) > mu_1(B)");

    const double ratio = mu_1_B / mu_n_A;
    const double t_AC = (A * C).trace();
    const double t_ABC = ((A + B) * C).trace();
    const Matrix Ainv = A.ldlt().solve(Matrix::Identity(n, n));
    const Matrix ABinv = (A + B).ldlt().solve(Matrix::Identity(n, n));
    const double t_AiC = (Ainv * C).trace();
    const double t_ABiC = (ABinv * C).trace();

    const double slack = 1e-9;
    auto le = [slack](double lhs, double rhs) {
        return lhs <= rhs + slack * (std::abs(lhs) + std::abs(rhs) + 1.0);
    };
    std::array<InequalityReport, 4> reports;
    reports[0] = {"forward_lower", t_AC, t_ABC, le(t_AC, t_ABC)};
    reports[1] = {"forward_upper", t_ABC, (1.0 + ratio) * t_AC, le(t_ABC, (1.0 + ratio) * t_AC)};
    reports[2] = {"inverse_lower", (1.0 - ratio) * t_AiC, t_ABiC, le((1.0 - ratio) * t_AiC, t_ABiC)};
    reports[3] = {"inverse_upper", t_ABiC, t_AiC, le(t_ABiC, t_AiC)};
    return reports;
}

} // namespace rfshift

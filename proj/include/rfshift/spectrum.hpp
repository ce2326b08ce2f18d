// spectrum.hpp — covariance spectra and their overfitting diagnostics.
//
// A Spectrum is the ordered eigenvalue sequence λ₁ ≥ … ≥ λ_p > 0 of a diagonal
// input covariance Σ. The diagnostics implemented here:
//
//   effective rank    r_k = (Σ_{i>k} λ_i) / λ_{k+1}
//   critical index    k*(b) = inf { k ≥ 0 : r_k ≥ b·n }        (may not exist)
//   benign ratios     r₀/n,  k*/n,  n^{1+ξ}·Σλ_i² / (Σλ_i)²
//   high-dim margins  n ≤ p^{1/4},  tr{Σ} vs n^{3/4},  n vs ln m,  m ≥ p
//
// k* is reported as "undefined" (empty optional) when no index qualifies;
// downstream code must distinguish that case from k* = 0.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfshift {

struct Spectrum {
    std::vector<double> eigenvalues; // strictly positive, non-increasing
    std::string label;

    int size() const { return static_cast<int>(eigenvalues.size()); }

    double trace() const {
        // Tail-first summation: the small entries accumulate before the large ones.
        double s = 0.0;
        for (auto it = eigenvalues.rbegin(); it != eigenvalues.rend(); ++it) s += *it;
        return s;
    }

    double trace_sq() const {
        double s = 0.0;
        for (auto it = eigenvalues.rbegin(); it != eigenvalues.rend(); ++it) s += *it * *it;
        return s;
    }
};

inline Spectrum make_spectrum(std::vector<double> eigenvalues, std::string label = "") {
    if (eigenvalues.empty()) throw std::invalid_argument("spectrum: empty eigenvalue list");
    for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
        if (!(eigenvalues[i] > 0.0) || !std::isfinite(eigenvalues[i]))
            throw std::invalid_argument("spectrum: eigenvalues must be positive and finite");
        if (i > 0 && eigenvalues[i] > eigenvalues[i - 1])
            throw std::invalid_argument("spectrum: eigenvalues must be non-increasing");
    }
    return Spectrum{std::move(eigenvalues), std::move(label)};
}

// Suffix sums t[k] = Σ_{i≥k} λ_i (0-indexed), accumulated from the tail.
inline std::vector<double> suffix_sums(const Spectrum& spec) {
    const auto& lam = spec.eigenvalues;
    std::vector<double> t(lam.size() + 1, 0.0);
    for (std::size_t i = lam.size(); i-- > 0;) t[i] = t[i + 1] + lam[i];
    return t;
}

// r_k with 0-indexed k in [0, p). For k = p-1 the tail is the single entry
// λ_p, so r_{p-1} = 1.
inline double effective_rank(const Spectrum& spec, int k) {
    if (k < 0 || k >= spec.size()) throw std::domain_error("effective_rank: k out of range");
    double tail = 0.0;
    const auto& lam = spec.eigenvalues;
    for (int i = spec.size() - 1; i >= k; --i) tail += lam[static_cast<std::size_t>(i)];
    return tail / lam[static_cast<std::size_t>(k)];
}

inline std::optional<int> critical_index(const Spectrum& spec, double b, int n) {
    if (!(b > 0.0)) throw std::domain_error("critical_index: b must be positive");
    if (n < 1) throw std::domain_error("critical_index: n must be >= 1");
    const auto t = suffix_sums(spec);
    const double threshold = b * static_cast<double>(n);
    for (int k = 0; k < spec.size(); ++k) {
        if (t[static_cast<std::size_t>(k)] / spec.eigenvalues[static_cast<std::size_t>(k)] >= threshold)
            return k;
    }
    return std::nullopt;
}

struct BenignDiagnostics {
    double r0_over_n = 0.0;
    std::optional<int> kstar;
    std::optional<double> kstar_over_n;
    double tail_ratio = 0.0; // n^{1+ξ}·Σλ_i² / (Σλ_i)²
    double xi = 0.0;
    double b = 0.0;
    int n = 0;
};

inline BenignDiagnostics benign_diagnostics(const Spectrum& spec, int n, double b, double xi) {
    if (n < 1) throw std::domain_error("benign_diagnostics: n must be >= 1");
    if (!(xi > 0.0)) throw std::domain_error("benign_diagnostics: xi must be positive");
    BenignDiagnostics d;
    d.n = n;
    d.b = b;
    d.xi = xi;
    d.r0_over_n = effective_rank(spec, 0) / static_cast<double>(n);
    d.kstar = critical_index(spec, b, n);
    if (d.kstar) d.kstar_over_n = static_cast<double>(*d.kstar) / static_cast<double>(n);
    const double tr = spec.trace();
    d.tail_ratio = std::pow(static_cast<double>(n), 1.0 + xi) * spec.trace_sq() / (tr * tr);
    return d;
}

struct HighDimDiagnostics {
    bool n_le_p_quarter = false;
    double p_quarter_margin = 0.0; // p^{1/4} / n
    double trace_margin = 0.0;     // tr{Σ} / n^{3/4}
    bool trace_ok = false;
    double log_m_margin = 0.0;     // n / ln m
    bool log_m_ok = false;
    bool m_ge_p = false;
    double m_margin = 0.0;         // m / p
    double threshold = 2.0;        // the ratio a "≫" must clear
};

inline HighDimDiagnostics highdim_diagnostics(const Spectrum& spec, int n, int m,
                                              double threshold = 2.0) {
    if (n < 1 || m < 1) throw std::domain_error("highdim_diagnostics: n, m must be >= 1");
    HighDimDiagnostics d;
    d.threshold = threshold;
    const double p = static_cast<double>(spec.size());
    d.p_quarter_margin = std::pow(p, 0.25) / static_cast<double>(n);
    d.n_le_p_quarter = d.p_quarter_margin >= 1.0;
    d.trace_margin = spec.trace() / std::pow(static_cast<double>(n), 0.75);
    d.trace_ok = d.trace_margin >= threshold;
    d.log_m_margin = (m > 1) ? static_cast<double>(n) / std::log(static_cast<double>(m))
                             : std::numeric_limits<double>::infinity();
    d.log_m_ok = d.log_m_margin >= threshold;
    d.m_margin = static_cast<double>(m) / p;
    d.m_ge_p = m >= spec.size();
    return d;
}

enum class ExampleKind { example1, example2, sim1, sim2 };

// Built-in example spectra. example1/example2 take n and build p = n^5 entries;
// sim1/sim2 take p directly. example1's zero tail is dropped: the spectrum
// holds exactly p strictly positive entries, sorted non-increasing.
inline Spectrum make_example_spectrum(ExampleKind kind, int n_or_p, double s = 0.0) {
    if (n_or_p < 1) throw std::domain_error("make_example_spectrum: size must be >= 1");
    switch (kind) {
    case ExampleKind::example1: {
        if (!(s > 0.0 && s < 1.0)) throw std::domain_error("example1: s must lie in (0,1)");
        const long long n = n_or_p;
        const long long p = n * n * n * n * n;
        const double pi = 3.14159265358979323846;
        const double scale = std::pow(static_cast<double>(n), -21.0 / 5.0);
        const double denom = 1.0 + s * s - 2.0 * s * std::cos(pi / static_cast<double>(p + 1));
        std::vector<double> lam(static_cast<std::size_t>(p));
        lam[0] = 1.0;
        for (long long k = 2; k <= p; ++k) {
            const double num = 1.0 + s * s - 2.0 * s * std::cos(static_cast<double>(k) * pi /
                                                                static_cast<double>(p + 1));
            lam[static_cast<std::size_t>(k - 1)] = scale * num / denom;
        }
        std::sort(lam.begin(), lam.end(), std::greater<double>());
        return make_spectrum(std::move(lam), "example1");
    }
    case ExampleKind::example2: {
        const long long n = n_or_p;
        const long long p = n * n * n * n * n;
        std::vector<double> lam(static_cast<std::size_t>(p));
        for (long long k = 1; k <= p; ++k)
            lam[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k), -5.0 / 6.0);
        return make_spectrum(std::move(lam), "example2");
    }
    case ExampleKind::sim1: {
        std::vector<double> lam(static_cast<std::size_t>(n_or_p), 0.25);
        lam[0] = 1.0;
        return make_spectrum(std::move(lam), "sim1");
    }
    case ExampleKind::sim2: {
        std::vector<double> lam(static_cast<std::size_t>(n_or_p));
        for (int i = 1; i <= n_or_p; ++i)
            lam[static_cast<std::size_t>(i - 1)] = std::pow(static_cast<double>(i), -5.0 / 12.0);
        return make_spectrum(std::move(lam), "sim2");
    }
    }
    throw std::domain_error("make_example_spectrum: unknown kind");
}

// Text format: one eigenvalue per line, descending; optional leading
// `# label: <text>` comment. `#` anywhere starts a comment.
inline void save_spectrum(const Spectrum& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_spectrum: cannot open " + path);
    if (!spec.label.empty()) out << "# label: " << spec.label << "\n";
    out.precision(17);
    for (double v : spec.eigenvalues) out << v << "\n";
}

inline Spectrum load_spectrum(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_spectrum: cannot open " + path);
    std::vector<double> lam;
    std::string label;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            const auto tag = line.find("label:", hash);
            if (tag != std::string::npos) {
                label = line.substr(tag + 6);
                const auto first = label.find_first_not_of(" \t");
                label = (first == std::string::npos) ? "" : label.substr(first);
            }
            line = line.substr(0, hash);
        }
        std::istringstream ls(line);
        double v;
        if (ls >> v) lam.push_back(v);
    }
    return make_spectrum(std::move(lam), std::move(label));
}

} // namespace rfshift

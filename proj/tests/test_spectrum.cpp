#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "rfshift/rng.hpp"
#include "rfshift/spectrum.hpp"

using namespace rfshift;

namespace {

// Brute-force oracles, written independently of the suffix-sum implementation.
double brute_effective_rank(const std::vector<double>& lam, int k) {
    double tail = 0.0;
    for (std::size_t i = lam.size(); i-- > static_cast<std::size_t>(k);) tail += lam[i];
    return tail / lam[static_cast<std::size_t>(k)];
}

int brute_critical_index(const std::vector<double>& lam, double b, int n, bool& found) {
    for (int k = 0; k < static_cast<int>(lam.size()); ++k) {
        if (brute_effective_rank(lam, k) >= b * n) {
            found = true;
            return k;
        }
    }
    found = false;
    return -1;
}

Spectrum random_spectrum(Rng& rng, int max_len = 200) {
    const int len = 2 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_len - 1));
    std::vector<double> lam(static_cast<std::size_t>(len));
    for (auto& v : lam) v = std::exp(-6.0 + 8.0 * rng.uniform01());
    std::sort(lam.begin(), lam.end(), std::greater<double>());
    return make_spectrum(std::move(lam));
}

} // namespace

TEST_CASE("effective rank on flat and sim spectra") {
    const Spectrum flat = make_spectrum({1, 1, 1, 1});
    CHECK(effective_rank(flat, 0) == doctest::Approx(4.0));
    for (int k = 0; k < 4; ++k)
        CHECK(effective_rank(flat, k) == doctest::Approx(4.0 - k)); // identity: r_k = p - k

    const Spectrum sim1 = make_example_spectrum(ExampleKind::sim1, 40);
    CHECK(effective_rank(sim1, 0) == doctest::Approx(10.75));
    CHECK(effective_rank(sim1, 1) == doctest::Approx(39.0));

    CHECK_THROWS_AS(effective_rank(flat, 4), std::domain_error);
    CHECK_THROWS_AS(effective_rank(flat, -1), std::domain_error);
}

TEST_CASE("critical index basics and the undefined case") {
    const Spectrum flat = make_spectrum({1, 1, 1, 1});
    auto k = critical_index(flat, 1.0, 2);
    REQUIRE(k.has_value());
    CHECK(*k == 0);

    const Spectrum sim1 = make_example_spectrum(ExampleKind::sim1, 40);
    auto k2 = critical_index(sim1, 0.25, 40);
    REQUIRE(k2.has_value());
    CHECK(*k2 == 0);

    // r_0 = 10.75 and r_k = 40 - k for k >= 1, all below 40.
    CHECK_FALSE(critical_index(sim1, 1.0, 40).has_value());
}

TEST_CASE("effective rank and critical index match brute-force scans") {
    Rng rng(derive_seed(42, "spectrum_oracle"));
    const double bs[] = {0.25, 0.5, 1.0, 2.0, 6.0};
    for (int rep = 0; rep < 1000; ++rep) {
        const Spectrum spec = random_spectrum(rng);
        const int k_probe = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(spec.size()));
        CHECK(effective_rank(spec, k_probe) ==
              doctest::Approx(brute_effective_rank(spec.eigenvalues, k_probe)).epsilon(1e-12));
        const double b = bs[rep % 5];
        const int n = 1 + static_cast<int>(rng.next_u64() % 100);
        bool found = false;
        const int brute = brute_critical_index(spec.eigenvalues, b, n, found);
        const auto got = critical_index(spec, b, n);
        CHECK(got.has_value() == found);
        if (found) CHECK(*got == brute);
    }
}

TEST_CASE("effective rank and critical index are scale free") {
    Rng rng(derive_seed(43, "spectrum_scale"));
    for (int rep = 0; rep < 50; ++rep) {
        const Spectrum spec = random_spectrum(rng, 60);
        for (double c : {1e-3, 7.0, 1e4}) {
            std::vector<double> scaled = spec.eigenvalues;
            for (auto& v : scaled) v *= c;
            const Spectrum sspec = make_spectrum(std::move(scaled));
            const int k_probe = spec.size() / 2;
            CHECK(effective_rank(sspec, k_probe) ==
                  doctest::Approx(effective_rank(spec, k_probe)).epsilon(1e-12));
            const auto a = critical_index(spec, 0.7, 11);
            const auto b = critical_index(sspec, 0.7, 11);
            CHECK(a == b);
        }
    }
}

TEST_CASE("benign diagnostics report the three ratios") {
    const Spectrum flat = make_spectrum({1, 1, 1, 1});
    const auto d = benign_diagnostics(flat, 4, 1.0, 1.0);
    CHECK(d.r0_over_n == doctest::Approx(1.0));
    // n^{1+xi} * sum(lam^2) / sum(lam)^2 = 16 * 4 / 16
    CHECK(d.tail_ratio == doctest::Approx(4.0));
    REQUIRE(d.kstar.has_value());
    CHECK(*d.kstar == 0);
    CHECK(*d.kstar_over_n == doctest::Approx(0.0));
}

TEST_CASE("built-in example spectra match their formulas") {
    const Spectrum sim1 = make_example_spectrum(ExampleKind::sim1, 40);
    CHECK(sim1.size() == 40);
    CHECK(sim1.eigenvalues[0] == doctest::Approx(1.0));
    for (int i = 1; i < 40; ++i)
        CHECK(sim1.eigenvalues[static_cast<std::size_t>(i)] == doctest::Approx(0.25));

    const Spectrum sim2 = make_example_spectrum(ExampleKind::sim2, 3);
    CHECK(sim2.eigenvalues[0] == doctest::Approx(1.0));
    CHECK(sim2.eigenvalues[1] == doctest::Approx(std::pow(2.0, -5.0 / 12.0)));
    CHECK(sim2.eigenvalues[2] == doctest::Approx(std::pow(3.0, -5.0 / 12.0)));

    const Spectrum ex2 = make_example_spectrum(ExampleKind::example2, 2);
    CHECK(ex2.size() == 32);
    CHECK(ex2.eigenvalues[0] == doctest::Approx(1.0));

    const Spectrum ex1 = make_example_spectrum(ExampleKind::example1, 2, 0.5);
    CHECK(ex1.size() == 32);
    CHECK(ex1.eigenvalues[0] == doctest::Approx(1.0));
    for (int i = 1; i < ex1.size(); ++i) {
        CHECK(ex1.eigenvalues[static_cast<std::size_t>(i)] > 0.0);
        CHECK(ex1.eigenvalues[static_cast<std::size_t>(i)] <=
              ex1.eigenvalues[static_cast<std::size_t>(i - 1)]);
    }
    CHECK_THROWS_AS(make_example_spectrum(ExampleKind::example1, 2, 1.5), std::domain_error);
}

TEST_CASE("critical indices of the example spectra at b = 6") {
    // Derived by brute-force scan; n = 4 keeps the spectra small (p = 1024).
    const Spectrum ex1 = make_example_spectrum(ExampleKind::example1, 4, 0.5);
    const auto k1 = critical_index(ex1, 6.0, 4);
    REQUIRE(k1.has_value());
    CHECK(*k1 == 1);

    const Spectrum ex2 = make_example_spectrum(ExampleKind::example2, 4);
    const auto k2 = critical_index(ex2, 6.0, 4);
    REQUIRE(k2.has_value());
    CHECK(*k2 == 2);
}

TEST_CASE("diagnostic ratio trends across n for the example spectra") {
    // example1: all three ratios fall as n grows.
    double prev_r0 = 1e300, prev_ks = 1e300, prev_tail = 1e300;
    for (int n : {2, 3, 4, 5, 6, 8}) {
        const auto d = benign_diagnostics(make_example_spectrum(ExampleKind::example1, n, 0.5),
                                          n, 6.0, 0.5);
        REQUIRE(d.kstar_over_n.has_value());
        CHECK(d.r0_over_n <= prev_r0 + 1e-12);
        CHECK(*d.kstar_over_n <= prev_ks + 1e-12);
        CHECK(d.tail_ratio <= prev_tail + 1e-12);
        prev_r0 = d.r0_over_n;
        prev_ks = *d.kstar_over_n;
        prev_tail = d.tail_ratio;
    }
    // example2: k*/n and the tail ratio fall; r0/n is still rising on this
    // range (it turns over near n = 8) and is pinned as such.
    prev_ks = prev_tail = 1e300;
    double last_r0 = 0.0;
    for (int n : {2, 3, 4, 5, 6, 8}) {
        const auto d = benign_diagnostics(make_example_spectrum(ExampleKind::example2, n), n, 6.0,
                                          0.5);
        REQUIRE(d.kstar_over_n.has_value());
        CHECK(*d.kstar_over_n <= prev_ks + 1e-12);
        CHECK(d.tail_ratio <= prev_tail + 1e-12);
        CHECK(d.r0_over_n > last_r0);
        prev_ks = *d.kstar_over_n;
        prev_tail = d.tail_ratio;
        last_r0 = d.r0_over_n;
    }
}

TEST_CASE("high-dimension diagnostics") {
    // p = n^4 exactly, m = p: boundary case with unit margin.
    const int n = 3;
    const Spectrum flat = make_spectrum(std::vector<double>(81, 1.0));
    const auto d = highdim_diagnostics(flat, n, 81);
    CHECK(d.n_le_p_quarter);
    CHECK(d.p_quarter_margin == doctest::Approx(1.0));
    CHECK(d.m_ge_p);
    CHECK(d.m_margin == doctest::Approx(1.0));

    const Spectrum ex1 = make_example_spectrum(ExampleKind::example1, 4, 0.5);
    const auto d1 = highdim_diagnostics(ex1, 4, 1024);
    CHECK(d1.n_le_p_quarter); // 4 <= 1024^{1/4} = 5.66
    CHECK(d1.p_quarter_margin == doctest::Approx(std::pow(1024.0, 0.25) / 4.0));

    const auto d2 = highdim_diagnostics(flat, n, 80);
    CHECK_FALSE(d2.m_ge_p);
}

TEST_CASE("spectrum file round trip") {
    const Spectrum sim1 = make_example_spectrum(ExampleKind::sim1, 7);
    const std::string path = "test_spectrum_roundtrip.txt";
    save_spectrum(sim1, path);
    const Spectrum loaded = load_spectrum(path);
    CHECK(loaded.label == "sim1");
    REQUIRE(loaded.size() == sim1.size());
    for (int i = 0; i < sim1.size(); ++i)
        CHECK(loaded.eigenvalues[static_cast<std::size_t>(i)] ==
              sim1.eigenvalues[static_cast<std::size_t>(i)]);
    std::remove(path.c_str());

    CHECK_THROWS(make_spectrum({1.0, 2.0}));  // increasing
    CHECK_THROWS(make_spectrum({1.0, -1.0})); // negative
    CHECK_THROWS(make_spectrum({}));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "villain/ivgauss.hpp"

using namespace villain;

TEST_CASE("Philox known answers")
{
    const auto z = Philox::block({0, 0, 0, 0}, {0, 0});
    CHECK(z[0] == 0x6627e8d5u);
    CHECK(z[1] == 0xe169c58du);
    CHECK(z[2] == 0xbc57ac4cu);
    CHECK(z[3] == 0x9b00dbd8u);
    const auto f = Philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    CHECK(f[0] == 0x408f276du);
    CHECK(f[1] == 0x41c83b0eu);
    CHECK(f[2] == 0xa20bc7c6u);
    CHECK(f[3] == 0x6d5451fdu);
}

TEST_CASE("streams are reproducible and normals are standard")
{
    PhiloxStream a(42, 1, 2, 3), b(42, 1, 2, 3), c(43, 1, 2, 3);
    bool differ = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        CHECK(x == b.uniform());
        differ = differ || x != c.uniform();
        CHECK(x > 0.0);
        CHECK(x < 1.0);
    }
    CHECK(differ);
    PhiloxStream g(7, 0, 0, 0);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = g.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
    CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("pmf symmetries and normalisation")
{
    for (double beta : {0.05, 0.7, 3.0, 40.0})
        for (double a : {-1.3, 0.0, 0.25, 0.5, 2.7}) {
            double s = 0;
            const auto c = static_cast<std::int64_t>(std::floor(a));
            for (std::int64_t k = c - 200; k <= c + 200; ++k) s += ivg_pmf({a, beta}, k);
            CHECK(std::abs(s - 1.0) < 1e-14);
        }
    CHECK(ivg_pmf({0, 2.0}, 3) == doctest::Approx(ivg_pmf({0, 2.0}, -3)).epsilon(1e-15));
    CHECK(ivg_pmf({0.5, 2.0}, 0) == doctest::Approx(ivg_pmf({0.5, 2.0}, 1)).epsilon(1e-15));
    CHECK(ivg_pmf({0.2, 200.0}, 0) > 1 - 1e-12);
}

TEST_CASE("moments")
{
    for (double beta : {0.3, 1.0, 5.0, 30.0}) {
        CHECK(std::abs(ivg_mean({0.0, beta})) < 1e-14);
        for (double a : {0.1, 0.37}) {
            CHECK(ivg_mean({a + 1, beta}) == doctest::Approx(ivg_mean({a, beta}) + 1).epsilon(1e-13));
            CHECK(ivg_var({a + 1, beta}) == doctest::Approx(ivg_var({a, beta})).epsilon(1e-12));
            CHECK(ivg_var({-a, beta}) == doctest::Approx(ivg_var({a, beta})).epsilon(1e-12));
        }
    }
    // Small beta approaches the continuous Gaussian.
    CHECK(ivg_var({0.3, 0.05}) == doctest::Approx(20.0).epsilon(1e-10));
    // Two-point limit.
    CHECK(std::abs(ivg_var({0.5, 200.0}) - 0.25) < 1e-6);
    // Direct summation oracle.
    double z = 0, m1 = 0, m2 = 0;
    for (int k = -50; k <= 50; ++k) {
        const double w = std::exp(-0.5 * 1.7 * (k - 0.3) * (k - 0.3));
        z += w;
        m1 += w * k;
        m2 += w * k * k;
    }
    CHECK(ivg_mean({0.3, 1.7}) == doctest::Approx(m1 / z).epsilon(1e-13));
    CHECK(ivg_var({0.3, 1.7}) == doctest::Approx(m2 / z - (m1 / z) * (m1 / z)).epsilon(1e-12));
}

TEST_CASE("variance lower bound for beta > 10")
{
    for (double beta = 10.5; beta <= 40; beta += 0.5)
        for (double a = 0; a <= 0.5 + 1e-12; a += 0.01) CHECK(ivg_var({a, beta}) >= std::exp(-beta * (1 - 2 * a) / 2) / 16);
}

TEST_CASE("sampling")
{
    PhiloxStream rng(11, 0, 0, 0);
    const IvgParams p{0.3, 5.0};
    const int n = 1000000;
    double s = 0;
    for (int i = 0; i < n; ++i) s += static_cast<double>(ivg_sample(p, rng));
    const double se = std::sqrt(ivg_var(p) / n);
    CHECK(std::abs(s / n - ivg_mean(p)) < 4 * se);
    for (int i = 0; i < 100000; ++i) CHECK(ivg_sample({0.0, 50.0}, rng) == 0);
    // Shift equivariance in law: compare histograms with a chi-square test.
    std::map<std::int64_t, double> h1, h2;
    const int m = 200000;
    for (int i = 0; i < m; ++i) {
        h1[ivg_sample({0.4, 1.2}, rng)] += 1;
        h2[ivg_sample({1.4, 1.2}, rng) - 1] += 1;
    }
    double chi = 0;
    int dof = -1;
    for (auto& [k, c] : h1) {
        const double d = h2[k];
        if (c + d < 20) continue;
        chi += (c - d) * (c - d) / (c + d);
        ++dof;
    }
    CHECK(chi < dof + 5 * std::sqrt(2.0 * dof));
    // The cached sampler draws from the same law as the direct one.
    IvgSampler cached(5.0);
    PhiloxStream r1(3, 0, 0, 0), r2(3, 0, 0, 0);
    for (int i = 0; i < 1000; ++i) {
        const double a = -3 + 0.006 * i;
        CHECK(cached.sample(a, r1.uniform()) == ivg_sample({a, 5.0}, r2.uniform()));
    }
}

TEST_CASE("error function M")
{
    for (double beta = 1.0 / 3; beta <= 2.0 + 1e-12; beta += 0.01) {
        const ErrorM m = error_M(beta);
        CHECK(m.value > 0);
        CHECK(m.value >= 2 * beta * std::exp(-2 * M_PI * M_PI * beta));
        CHECK(m.argmin >= 0);
        CHECK(m.argmin <= 0.5);
    }
}

TEST_CASE("ratio K")
{
    const RatioK k = ratio_K(1.0);
    CHECK(k.value > 0);
    CHECK(std::isfinite(k.value));
    const RatioK fine = ratio_K(1.0, 201, 401);
    CHECK(std::abs(fine.value - k.value) < 0.01 * k.value);
    // a -> a + 1 leaves T / Var unchanged.
    for (double a : {0.1, 0.45})
        CHECK(ivg_t3({a, 3.0}) / ivg_var({a, 3.0}) == doctest::Approx(ivg_t3({a + 1, 3.0}) / ivg_var({a + 1, 3.0})).epsilon(1e-12));
}

#include "doctest.h"
#include "test_util.hpp"

#include "reserve_mdn/ccodp.hpp"
#include "reserve_mdn/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

using namespace rmdn;

namespace {

// Textbook chain ladder on cumulative claims: volume-weighted development
// factors, each row projected from its latest diagonal; fitted incremental
// values back-filled by dividing the projected ultimate by the remaining
// factors.
std::vector<std::vector<double>> chain_ladder_fitted(const IncrementalTriangle& tri) {
    const int n = tri.n();
    std::vector<std::vector<double>> cum(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; i + j < n; ++j) cum[i][j] = tri.at({i + 1, j + 1}) + (j ? cum[i][j - 1] : 0.0);
    std::vector<double> f(n, 1.0);
    for (int j = 0; j + 1 < n; ++j) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i + j + 1 < n; ++i) {
            num += cum[i][j + 1];
            den += cum[i][j];
        }
        f[j] = num / den;
    }
    std::vector<std::vector<double>> fitted(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
        const int last = n - 1 - i;
        std::vector<double> c(n);
        c[last] = cum[i][last];
        for (int j = last + 1; j < n; ++j) c[j] = c[j - 1] * f[j - 1];
        for (int j = last - 1; j >= 0; --j) c[j] = c[j + 1] / f[j];
        for (int j = 0; j < n; ++j) fitted[i][j] = c[j] - (j ? c[j - 1] : 0.0);
    }
    return fitted;
}

}  // namespace

TEST_CASE("2x2 hand example") {
    IncrementalTriangle t(2);
    t.set({1, 1}, 100);
    t.set({1, 2}, 50);
    t.set({2, 1}, 80);
    const auto fit = fit_ccodp(t);
    CHECK(fit.A[0] == doctest::Approx(150));
    CHECK(fit.A[1] == doctest::Approx(120));
    CHECK(fit.B[0] == doctest::Approx(2.0 / 3.0));
    CHECK(fit.B[1] == doctest::Approx(1.0 / 3.0));
    CHECK(fit.mean(2, 2) == doctest::Approx(40));
}

TEST_CASE("fitted means equal an independent chain ladder") {
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 3 + rep % 10;
        const auto t = testutil::random_upper(n, 1000 + rep);
        const auto fit = fit_ccodp(t);
        const auto cl = chain_ladder_fitted(t);
        double bsum = 0.0;
        for (double b : fit.B) bsum += b;
        CHECK(bsum == doctest::Approx(1.0).epsilon(1e-12));
        for (int i = 1; i <= n; ++i)
            for (int j = 1; j <= n; ++j) CHECK(testutil::close_rel(fit.mean(i, j), cl[i - 1][j - 1], 1e-8));
    }
}

TEST_CASE("exact multiplicative triangle is reproduced with the dispersion floor") {
    const int n = 6;
    IncrementalTriangle t(n);
    double total = 0.0;
    for (const auto c : upper_cells(n)) {
        const double x = (10.0 + c.i) * (1.0 / (c.j + 1.0));
        t.set(c, x);
        total += x;
    }
    const auto fit = fit_ccodp(t);
    for (const auto c : upper_cells(n)) CHECK(testutil::close_rel(fit.mean(c), t.at(c), 1e-10));
    const double mean_cell = total / static_cast<double>(upper_cells(n).size());
    CHECK(fit.D == doctest::Approx(1e-8 * mean_cell).epsilon(1e-3));
}

TEST_CASE("fit on a reduced inner triangle") {
    const auto t = testutil::random_upper(9, 77);
    const auto inner = fit_ccodp(t, 5);
    CHECK(inner.n() == 5);
    IncrementalTriangle small(5);
    for (const auto c : upper_cells(5)) small.set(c, t.at(c));
    const auto direct = fit_ccodp(small);
    for (int i = 0; i < 5; ++i) CHECK(inner.A[i] == doctest::Approx(direct.A[i]));
    CHECK(inner.D == doctest::Approx(direct.D));
}

TEST_CASE("nonpositive totals are rejected") {
    IncrementalTriangle t(3);
    for (const auto c : upper_cells(3)) t.set(c, 1.0);
    t.set({1, 3}, 0.0);
    CHECK_THROWS_AS(fit_ccodp(t), Error);
}

TEST_CASE("scale equivariance") {
    const auto t = testutil::random_upper(7, 5);
    IncrementalTriangle s(7);
    const double c = 37.5;
    for (const auto cell : upper_cells(7)) s.set(cell, c * t.at(cell));
    const auto a = fit_ccodp(t), b = fit_ccodp(s);
    for (int i = 0; i < 7; ++i) {
        CHECK(b.A[i] == doctest::Approx(c * a.A[i]));
        CHECK(b.B[i] == doctest::Approx(a.B[i]));
    }
    CHECK(b.D == doctest::Approx(c * a.D));
}

TEST_CASE("latest accident adjustment") {
    CcOdpFit fit;
    fit.B = {0.25, 0.25, 0.25, 0.25, 0.0};
    fit.B.back() = 0.0;
    fit.A = {std::exp(6.0), std::exp(5.0), std::exp(5.0), std::exp(5.0), std::exp(0.0)};
    auto adj = adjust_latest_accident(fit);
    CHECK(std::log(adj.A[4]) == doctest::Approx(5.0));
    CHECK(adjust_latest_accident(adj).A == adj.A);

    CcOdpFit high = fit;
    high.A[4] = std::exp(9.0);
    CHECK(adjust_latest_accident(high).A == high.A);

    CcOdpFit flat = fit;
    flat.A.assign(5, 42.0);
    CHECK(adjust_latest_accident(flat).A == flat.A);
}

TEST_CASE("adjustment is idempotent on fitted triangles") {
    for (int rep = 0; rep < 20; ++rep) {
        const auto fit = fit_ccodp(testutil::random_upper(8, 300 + rep));
        const auto once = adjust_latest_accident(fit);
        CHECK(adjust_latest_accident(once).A == once.A);
    }
}

TEST_CASE("ODP quasi-density") {
    CHECK(ccodp_log_density(2.0, 1.0, 0.0) == doctest::Approx(-2.0));
    CHECK(std::exp(ccodp_log_density(2.0, 1.0, 0.0)) == doctest::Approx(0.1353352832));

    using boost::math::quadrature::gauss_kronrod;
    for (auto [m, D] : {std::pair{50.0, 2.0}, {1000.0, 30.0}, {12.0, 1.5}, {5e4, 400.0}}) {
        const double hi = m + 20.0 * std::sqrt(D * m);
        auto f = [&](double x) { return std::exp(ccodp_log_density(m, D, x)); };
        auto xf = [&](double x) { return x * std::exp(ccodp_log_density(m, D, x)); };
        const double mass = gauss_kronrod<double, 61>::integrate(f, 0.0, hi, 15, 1e-12);
        const double mean = gauss_kronrod<double, 61>::integrate(xf, 0.0, hi, 15, 1e-12);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(mean == doctest::Approx(m).epsilon(1e-3));
    }
}

TEST_CASE("ODP quantiles") {
    const double m = 1e4, D = 20.0;
    const double med = odp_quantile(m, D, 0.5);
    CHECK(std::abs(med - m) <= 0.7 * std::sqrt(D * m));
    double prev = 0.0;
    for (double q : {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99}) {
        const double x = odp_quantile(m, D, q);
        CHECK(x >= prev);
        prev = x;
    }
    const double q95 = odp_quantile(m, D, 0.95);
    CHECK(q95 == doctest::Approx(m + 1.6449 * std::sqrt(D * m)).epsilon(0.01));
    CHECK(odp_quantile(500.0, 1e-6, 0.95) == doctest::Approx(500.0).epsilon(1e-3));
}

TEST_CASE("reserve mean sums the lower-triangle fitted means") {
    const auto fit = fit_ccodp(testutil::random_upper(6, 8));
    double r = 0.0;
    for (const auto c : lower_cells(6)) r += fit.mean(c);
    CHECK(ccodp_reserve_mean(fit) == doctest::Approx(r));
}

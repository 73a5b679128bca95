#include "doctest.h"
#include "test_util.hpp"

#include "reserve_mdn/error.hpp"
#include "reserve_mdn/triangle.hpp"

#include <cmath>
#include <numbers>

using namespace rmdn;

TEST_CASE("calendar period arithmetic") {
    CHECK(calendar_period(1, 1) == 1);
    CHECK(calendar_period(40, 1) == 40);
    CHECK(calendar_period(30, 11) == 40);
    for (int i = 1; i <= 12; ++i)
        for (int j = 1; j <= 12; ++j) CHECK(calendar_period(i, j) == calendar_period(j, i));
}

TEST_CASE("upper and lower regions partition the square") {
    for (int n : {2, 5, 20, 40}) {
        const auto up = upper_cells(n);
        const auto lo = lower_cells(n);
        CHECK(up.size() == static_cast<std::size_t>(n * (n + 1) / 2));
        CHECK(up.size() + lo.size() == static_cast<std::size_t>(n * n));
        for (const auto c : lo) CHECK(calendar_period(c) > n);
        for (const auto c : up) CHECK(calendar_period(c) <= n);
    }
}

TEST_CASE("load_triangle reads the smallest complete triangle") {
    testutil::TempDir dir("tri");
    testutil::write_file(dir / "t.csv", "accident,development,amount\n1,1,100\n1,2,50\n2,1,80\n");
    const auto t = load_triangle(dir / "t.csv", 2);
    CHECK(t.observed({1, 1}));
    CHECK(t.observed({1, 2}));
    CHECK(t.observed({2, 1}));
    CHECK_FALSE(t.observed({2, 2}));
    CHECK(t.at({1, 2}) == 50.0);
    CHECK(t.complete_upper());
}

TEST_CASE("load_triangle rejects malformed input") {
    testutil::TempDir dir("tri_bad");
    auto message = [&](const std::string& body, int n) -> std::string {
        testutil::write_file(dir / "b.csv", "accident,development,amount\n" + body);
        try {
            load_triangle(dir / "b.csv", n);
        } catch (const InputError& e) {
            return e.what();
        }
        return "";
    };
    CHECK(message("1,1,100\n1,2,50\n", 2).find("missing upper-triangle cell") != std::string::npos);
    CHECK(message("1,1,100\n1,2,50\n2,1,80\n3,1,5\n", 2).find("index out of range") != std::string::npos);
    CHECK(message("1,1,100\n1,1,100\n1,2,50\n2,1,80\n", 2).find("duplicate cell") != std::string::npos);
    CHECK_FALSE(message("1,1,abc\n1,2,50\n2,1,80\n", 2).empty());
}

TEST_CASE("save and load round trip including realised lower cells") {
    testutil::TempDir dir("tri_rt");
    auto t = testutil::random_upper(6, 3);
    t.set({6, 6}, 12.5);
    save_triangle(dir / "t.csv", t);
    const auto back = load_triangle(dir / "t.csv", 6);
    for (int i = 1; i <= 6; ++i)
        for (int j = 1; j <= 6; ++j) {
            CHECK(back.observed({i, j}) == t.observed({i, j}));
            if (t.observed({i, j})) CHECK(back.at({i, j}) == t.at({i, j}));
        }
    CHECK(back.upper().observed({6, 6}) == false);
}

TEST_CASE("fit_normalizer examples") {
    const std::vector<double> flat{2, 2, 2};
    auto a = fit_normalizer(flat, ScaleKind::raw);
    CHECK(a.mean == 2.0);
    CHECK(a.std == 1.0);

    const std::vector<double> two{0, 2};
    auto b = fit_normalizer(two, ScaleKind::raw);
    CHECK(b.mean == doctest::Approx(1.0));
    CHECK(b.std == doctest::Approx(std::numbers::sqrt2));

    const std::vector<double> logs{1.0, std::exp(2.0)};
    auto c = fit_normalizer(logs, ScaleKind::log);
    CHECK(c.mean == doctest::Approx(1.0));
    CHECK(c.std == doctest::Approx(std::numbers::sqrt2));

    const std::vector<double> bad{1.0, 0.0};
    CHECK_THROWS_AS(fit_normalizer(bad, ScaleKind::log), InputError);
}

TEST_CASE("normalisation round trip") {
    Rng rng(11);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int rep = 0; rep < 200; ++rep) {
        Normalizer nz{u(rng), std::abs(u(rng)) + 1e-3, ScaleKind::raw};
        const double x = u(rng);
        CHECK(testutil::close_rel(nz.denormalize(nz.normalize(x)), x, 1e-12, 1e-9));
        Normalizer nl{u(rng) * 1e-5, 0.5 + std::abs(u(rng)) * 1e-6, ScaleKind::log};
        const double y = std::abs(x) + 1.0;
        CHECK(testutil::close_rel(nl.denormalize(nl.normalize(y)), y, 1e-12));
    }
}

TEST_CASE("input scaling maps periods onto the unit interval") {
    CHECK(scale_period(1, 40) == 0.0);
    CHECK(scale_period(40, 40) == 1.0);
    CHECK(scale_period(3, 5) == doctest::Approx(0.5));
}

#include "doctest.h"
#include "test_util.hpp"

#include "reserve_mdn/error.hpp"
#include "reserve_mdn/mixture.hpp"
#include "reserve_mdn/network.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numeric>

using namespace rmdn;

namespace {

MdnConfig small_config(int K, int layers = 2, int neurons = 7) {
    MdnConfig c;
    c.components = K;
    c.layers = layers;
    c.neurons = neurons;
    return c;
}

}  // namespace

TEST_CASE("zero weights give uniform weights, zero means and unit sigmas") {
    const auto cfg = small_config(3);
    const auto w = make_weights(cfg);
    const auto p = forward(w, cfg, 10, {4, 2});
    for (int k = 0; k < 3; ++k) {
        CHECK(p.alpha[k] == doctest::Approx(1.0 / 3.0));
        CHECK(p.mu[k] == 0.0);
        CHECK(p.sigma[k] == 1.0);
    }
}

TEST_CASE("single component has unit weight") {
    const auto cfg = small_config(1);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto p = forward(init_glorot(cfg, s), cfg, 12, {3, 5});
        CHECK(p.alpha[0] == 1.0);
    }
}

TEST_CASE("forward output is a valid mixture for random weights") {
    const auto cfg = small_config(4, 2, 9);
    Rng rng(5);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int rep = 0; rep < 1000; ++rep) {
        auto w = make_weights(cfg);
        for (auto& v : w.params) v = g(rng);
        const Cell c{1 + rep % 15, 1 + (rep / 15) % 15};
        const auto p = forward(w, cfg, 15, c);
        const double s = std::accumulate(p.alpha.begin(), p.alpha.end(), 0.0);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(*std::min_element(p.sigma.begin(), p.sigma.end()) > 0.0);
    }
}

TEST_CASE("shape mismatch is reported") {
    const auto w = make_weights(small_config(2));
    CHECK_THROWS_AS(forward(w, small_config(3), 8, {1, 1}), ModelError);
    CHECK_THROWS_AS(forward(w, small_config(2), 8, {9, 1}), InputError);
}

TEST_CASE("eval mode is deterministic and train mode draws dropout masks") {
    auto cfg = small_config(2, 2, 30);
    cfg.dropout = 0.5;
    const auto w = init_glorot(cfg, 9);
    Rng r1(1), r2(2);
    const auto a = forward(w, cfg, 10, {2, 3}, Mode::eval, r1);
    const auto b = forward(w, cfg, 10, {2, 3}, Mode::eval, r2);
    CHECK(a.mu == b.mu);
    const auto c = forward(w, cfg, 10, {2, 3}, Mode::train, r1);
    const auto d = forward(w, cfg, 10, {2, 3}, Mode::train, r2);
    CHECK(c.mu != d.mu);
}

TEST_CASE("inverted dropout keeps the activation mean") {
    MdnConfig cfg = small_config(1, 2, 50);
    cfg.dropout = 0.2;
    Rng rng(3);
    const auto m = draw_dropout_masks(cfg, 2000, rng);
    const double mean = std::accumulate(m.scale.begin(), m.scale.end(), 0.0) / static_cast<double>(m.scale.size());
    CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
    for (double s : m.scale) CHECK((s == 0.0 || s == doctest::Approx(1.25)));
}

TEST_CASE("glorot limits and zero biases") {
    const auto cfg = small_config(2, 2, 10);
    const auto w = init_glorot(cfg, 4);
    const auto mask = w.weight_mask();
    const auto& L = w.layout;
    for (std::size_t k = 0; k < w.params.size(); ++k)
        if (!mask[k]) CHECK(w.params[k] == 0.0);
    const double lim0 = std::sqrt(6.0 / 12.0);
    for (std::size_t k = L.hidden_w[0]; k < L.hidden_b[0]; ++k) CHECK(std::abs(w.params[k]) <= lim0);
    CHECK(init_glorot(cfg, 4).params == w.params);
    CHECK(init_glorot(cfg, 5).params != w.params);
}

TEST_CASE("layout sizes") {
    const NetworkLayout L(2, 5, 3);
    CHECK(L.size == static_cast<std::size_t>((5 * 2 + 5) + (5 * 5 + 5) + 3 * (3 * 5 + 3)));
    CHECK(L.head_b[2] + 3 == L.size);
}

TEST_CASE("weight snapshots round trip") {
    testutil::TempDir dir("weights");
    const auto cfg = small_config(3, 2, 6);
    const auto w = init_glorot(cfg, 99);
    save_weights(dir / "w.csv", w);
    const auto back = load_weights(dir / "w.csv");
    CHECK(back.layout == w.layout);
    CHECK(back.params == w.params);
}

TEST_CASE("mixture density examples") {
    MixtureParams one{{1.0}, {0.0}, {1.0}, ScaleKind::raw};
    CHECK(mixture_pdf(one, 0.0) == doctest::Approx(0.39894228));
    MixtureParams two{{0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0}, ScaleKind::raw};
    CHECK(mixture_pdf(two, 0.0) == doctest::Approx(0.24197072));
    CHECK(mixture_log_pdf(two, 0.0) == doctest::Approx(std::log(0.24197072)));
    CHECK(std::isfinite(mixture_log_pdf(one, 60.0)));
    CHECK(mixture_log_pdf(one, 60.0) == doctest::Approx(-0.5 * 3600.0 - kLogSqrtTwoPi));
}

TEST_CASE("mixture density integrates to one") {
    using boost::math::quadrature::gauss_kronrod;
    Rng rng(17);
    std::uniform_real_distribution<double> mu(-2.0, 2.0), sg(0.05, 1.0), a(0.1, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        MixtureParams p;
        const int K = 1 + rep % 4;
        double s = 0.0;
        for (int k = 0; k < K; ++k) {
            p.alpha.push_back(a(rng));
            s += p.alpha.back();
            p.mu.push_back(mu(rng));
            p.sigma.push_back(sg(rng));
        }
        for (auto& v : p.alpha) v /= s;
        const double mass = gauss_kronrod<double, 61>::integrate([&](double x) { return mixture_pdf(p, x); },
                                                                 -10.0, 10.0, 20, 1e-13);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(mixture_cdf(p, 10.0) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

#include "doctest.h"
#include "test_util.hpp"

#include "reserve_mdn/error.hpp"
#include "reserve_mdn/loss.hpp"
#include "reserve_mdn/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

using namespace rmdn;

namespace {

// Triangle of iid N(1000, 100^2) amounts: a response with no (i, j) structure.
IncrementalTriangle constant_response(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> z(1000.0, 100.0);
    IncrementalTriangle t(n);
    for (const auto c : upper_cells(n)) t.set(c, z(rng));
    return t;
}

struct Problem {
    LossContext ctx;
    Batch train, val;
};

Problem small_problem(MdnConfig cfg, std::uint64_t seed = 5) {
    const int n = 10;
    const auto tri = testutil::random_upper(n, seed, 10.0, 200.0);
    std::vector<Cell> tr, va;
    for (const auto c : upper_cells(n)) (calendar_period(c) >= n - 1 ? va : tr).push_back(c);
    Problem p;
    p.ctx.config = cfg;
    p.ctx.n = n;
    p.ctx.normalizer = fit_normalizer(tri.values(tr), ScaleKind::raw);
    p.train = make_batch(tri, tr, p.ctx.normalizer);
    p.val = make_batch(tri, va, p.ctx.normalizer);
    return p;
}

}  // namespace

TEST_CASE("first Adam step moves every parameter by the learning rate against the gradient sign") {
    Adam adam(4, 0.01);
    std::vector<double> p{1.0, -2.0, 0.5, 3.0};
    const std::vector<double> g{0.3, -5.0, 1e-3, 0.0};
    const auto before = p;
    adam.step(p, g);
    CHECK(p[0] == doctest::Approx(before[0] - 0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(before[1] + 0.01).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(before[2] - 0.01).epsilon(1e-4));
    CHECK(p[3] == before[3]);
}

TEST_CASE("Adam minimises a separable quadratic") {
    Adam adam(3, 0.05);
    std::vector<double> p{4.0, -3.0, 10.0};
    const std::vector<double> target{1.0, 2.0, -1.0};
    std::vector<double> g(3);
    for (int t = 0; t < 5000; ++t) {
        for (int k = 0; k < 3; ++k) g[k] = 2.0 * (p[k] - target[k]);
        adam.step(p, g);
    }
    for (int k = 0; k < 3; ++k) CHECK(p[k] == doctest::Approx(target[k]).epsilon(1e-3));
}

TEST_CASE("constant response with one component reaches the Gaussian MLE likelihood") {
    const int n = 20;
    const auto tri = constant_response(n, 77);
    const auto cells = upper_cells(n);
    LossContext ctx;
    ctx.config.components = 1;
    ctx.config.layers = 1;
    ctx.config.neurons = 8;
    ctx.config.learning_rate = 0.01;
    ctx.config.max_epochs = 3000;
    ctx.config.patience = 3000;
    ctx.n = n;
    ctx.normalizer = fit_normalizer(tri.values(cells), ScaleKind::raw);
    const auto batch = make_batch(tri, cells, ctx.normalizer);

    // Closed-form MLE on the normalised scale: mean 0 and variance (m-1)/m by construction.
    const double m = static_cast<double>(cells.size());
    double ss = 0.0, mean = 0.0;
    for (double y : batch.targets) mean += y / m;
    for (double y : batch.targets) ss += (y - mean) * (y - mean);
    const double mle_nll = 0.5 * std::log(2.0 * M_PI * ss / m) + 0.5;

    const auto r = train(ctx, batch, batch, 3);
    CHECK(std::abs(r.best_val_loss - mle_nll) < 0.05);
}

TEST_CASE("early stopping returns the snapshot with the smallest recorded validation loss") {
    MdnConfig cfg;
    cfg.neurons = 6;
    cfg.layers = 1;
    cfg.max_epochs = 800;
    cfg.patience = 50;
    cfg.learning_rate = 0.02;
    const auto p = small_problem(cfg);
    const auto r = train(p.ctx, p.train, p.val, 11);
    REQUIRE_FALSE(r.history.empty());
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& e : r.history) lowest = std::min(lowest, e.val_loss);
    CHECK(r.best_val_loss == lowest);
    CHECK(r.history.at(r.best_epoch - 1).val_loss == lowest);
    CHECK(validation_loss(p.ctx, r.weights, p.val) == doctest::Approx(lowest).epsilon(1e-12));
    CHECK(static_cast<int>(r.history.size()) <= std::min(cfg.max_epochs, r.best_epoch + cfg.patience));
    if (static_cast<int>(r.history.size()) < cfg.max_epochs)
        CHECK(static_cast<int>(r.history.size()) == r.best_epoch + cfg.patience);
}

TEST_CASE("patience 1 stops at the first epoch that fails to improve") {
    MdnConfig cfg;
    cfg.neurons = 6;
    cfg.layers = 1;
    cfg.max_epochs = 2000;
    cfg.patience = 1;
    const auto p = small_problem(cfg);
    const auto r = train(p.ctx, p.train, p.val, 4);
    const auto& h = r.history;
    for (std::size_t e = 1; e + 1 < h.size(); ++e) CHECK(h[e].val_loss < h[e - 1].val_loss);
    if (static_cast<int>(h.size()) < cfg.max_epochs) {
        REQUIRE(h.size() >= 2);
        CHECK(h.back().val_loss >= h[h.size() - 2].val_loss);
        CHECK(r.best_epoch == static_cast<int>(h.size()) - 1);
    }
}

TEST_CASE("same seed and configuration give a bitwise identical history") {
    MdnConfig cfg;
    cfg.neurons = 5;
    cfg.max_epochs = 200;
    cfg.dropout = 0.1;
    cfg.mse_weight = 2.0;
    cfg.lambda_w = 0.001;
    const auto p = small_problem(cfg);
    const auto a = train(p.ctx, p.train, p.val, 21);
    const auto b = train(p.ctx, p.train, p.val, 21);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(a.history[e].train_loss == b.history[e].train_loss);
        CHECK(a.history[e].val_loss == b.history[e].val_loss);
    }
    CHECK(a.weights.params == b.weights.params);
    const auto c = train(p.ctx, p.train, p.val, 22);
    CHECK(c.weights.params != a.weights.params);
}

TEST_CASE("a non-finite loss is reported as a training error") {
    MdnConfig cfg;
    cfg.neurons = 4;
    cfg.max_epochs = 5;
    const auto p = small_problem(cfg);
    auto w = init_glorot(cfg, 1);
    w.params[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train_from(p.ctx, w, p.train, p.val, 1), TrainingError);
}

TEST_CASE("the epoch cap bounds the history") {
    MdnConfig cfg;
    cfg.neurons = 4;
    cfg.max_epochs = 37;
    cfg.patience = 1000;
    const auto p = small_problem(cfg);
    const auto r = train(p.ctx, p.train, p.val, 2);
    CHECK(r.history.size() == 37u);
    CHECK(r.history.back().epoch == 37);
    CHECK(r.restarts == 0);
    CHECK(r.seed == 2u);
}

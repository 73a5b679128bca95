#include "doctest.h"
#include "test_util.hpp"

#include "reserve_mdn/error.hpp"
#include "reserve_mdn/kernels.hpp"
#include "reserve_mdn/loss.hpp"
#include "reserve_mdn/resmdn.hpp"

#include <cmath>
#include <limits>

using namespace rmdn;

namespace {

struct Setup {
    LossContext ctx;
    NetworkWeights w;
    Batch batch;
    DropoutMasks masks;
};

Setup random_setup(int draw) {
    Rng rng(derive_seed(2024, draw));
    std::uniform_int_distribution<int> pick(0, 1000);
    const int Ks[3] = {1, 2, 4};
    Setup s;
    auto& cfg = s.ctx.config;
    cfg.components = Ks[draw % 3];
    cfg.layers = 1 + (draw / 3) % 2;
    cfg.neurons = 3 + pick(rng) % 5;
    cfg.scale = (draw / 6) % 2 ? ScaleKind::log : ScaleKind::raw;
    const bool on = (draw / 12) % 2 == 0;
    cfg.lambda_w = on ? 0.01 : 0.0;
    cfg.lambda_sigma = (draw % 5 < 3) ? 0.05 : 0.0;
    cfg.mse_weight = (draw % 7 < 4) ? 3.0 : 0.0;
    cfg.lambda_c = (draw % 4 != 0) ? 10.0 : 0.0;
    cfg.dropout = (draw % 9 == 0) ? 0.3 : 0.0;

    const int n = 8;
    s.ctx.n = n;
    const auto tri = testutil::random_upper(n, 500 + draw, 5.0, 200.0);
    const auto cells = upper_cells(n);
    s.ctx.normalizer = fit_normalizer(tri.values(cells), cfg.scale);
    s.ctx.constraint_scale = tri.upper_mean();
    ConstraintSet cons;
    if (cfg.lambda_c > 0.0) {
        // Bounds chosen so that some means violate from above, some from below.
        int k = 0;
        for (const auto c : lower_cells(n)) {
            if (k++ % 4) continue;
            const double centre = (k % 3 == 0) ? 400.0 : (k % 3 == 1 ? -50.0 : 100.0);
            cons.push_back({c, centre - 10.0, centre + 10.0});
        }
    }
    s.batch = make_batch(tri, cells, s.ctx.normalizer, cons);
    s.w = init_glorot(cfg, 77 + draw);
    std::normal_distribution<double> g(0.0, 0.15);
    for (auto& v : s.w.params) v += g(rng);
    if (cfg.scale == ScaleKind::log) {
        // Keep log-scale sigmas near one so exp(m + s^2/2) stays representable.
        const auto& L = s.w.layout;
        for (std::size_t k = L.head_w[kSigma]; k < L.head_b[kSigma]; ++k) s.w.params[k] *= 0.2;
        for (int k = 0; k < cfg.components; ++k) s.w.params[L.head_b[kSigma] + k] = -0.5;
    }
    if (cfg.dropout > 0.0) s.masks = draw_dropout_masks(cfg, s.batch.rows(), rng);
    return s;
}

}  // namespace

TEST_CASE("standard normal at zero") {
    LossContext ctx;
    ctx.config.components = 1;
    ctx.config.layers = 1;
    ctx.config.neurons = 3;
    ctx.n = 8;
    auto w = make_weights(ctx.config);
    Batch b;
    b.cells = {{1, 1}};
    b.targets = {0.0};
    const auto l = training_loss(ctx, w, b);
    CHECK(l.total() == doctest::Approx(0.918938533));
    ctx.config.lambda_w = 0.7;
    CHECK(training_loss(ctx, w, b).total() == doctest::Approx(0.918938533));
}

TEST_CASE("constraint violation adds the squared distance") {
    LossContext ctx;
    ctx.config.components = 1;
    ctx.config.layers = 1;
    ctx.config.neurons = 2;
    ctx.config.lambda_c = 1.0;
    ctx.n = 8;
    ctx.normalizer = {12.0, 1.0, ScaleKind::raw};  // zero output means a raw mean of 12
    ctx.constraint_scale = 1.0;
    auto w = make_weights(ctx.config);
    Batch b;
    b.cells = {{1, 1}};
    b.targets = {0.0};
    const double base = training_loss(ctx, w, b).total();
    b.constraints = {{{8, 8}, 0.0, 10.0}};
    const auto l = training_loss(ctx, w, b);
    CHECK(l.constraint_penalty == doctest::Approx(4.0));
    CHECK(l.total() - base == doctest::Approx(4.0));
}

TEST_CASE("pure NLL when all penalties are off") {
    auto s = random_setup(1);
    s.ctx.config.lambda_w = s.ctx.config.lambda_sigma = s.ctx.config.mse_weight = 0.0;
    s.batch.constraints.clear();
    double nll = 0.0;
    for (std::size_t r = 0; r < s.batch.cells.size(); ++r)
        nll -= mixture_log_pdf(forward(s.w, s.ctx.config, s.ctx.n, s.batch.cells[r]), s.batch.targets[r]);
    nll /= static_cast<double>(s.batch.cells.size());
    const auto l = training_loss(s.ctx, s.w, s.batch);
    CHECK(l.total() == doctest::Approx(nll).epsilon(1e-12));
    CHECK(l.mse == 0.0);
    CHECK(l.sigma_penalty == 0.0);
}

TEST_CASE("loss terms match a direct evaluation") {
    auto s = random_setup(2);
    auto& cfg = s.ctx.config;
    cfg.dropout = 0.0;
    cfg.lambda_sigma = 0.05;
    cfg.mse_weight = 3.0;
    cfg.lambda_w = 0.01;
    double nll = 0.0, mse = 0.0, sig = 0.0, con = 0.0;
    for (std::size_t r = 0; r < s.batch.cells.size(); ++r) {
        const auto p = forward(s.w, cfg, s.ctx.n, s.batch.cells[r]);
        nll -= mixture_log_pdf(p, s.batch.targets[r]);
        const double e = mixture_mean(p) - s.batch.targets[r];
        mse += e * e;
        for (double v : p.sigma) sig += v * v;
    }
    for (const auto& c : s.batch.constraints) {
        const double m = raw_mean(forward(s.w, cfg, s.ctx.n, c.cell), s.ctx.normalizer);
        const double v = std::max(0.0, m - c.upper) + std::max(0.0, c.lower - m);
        con += v * v;
    }
    const double N = static_cast<double>(s.batch.cells.size());
    const double M = s.ctx.constraint_scale;
    const auto l = training_loss(s.ctx, s.w, s.batch);
    CHECK(l.nll == doctest::Approx(nll / N));
    CHECK(l.mse == doctest::Approx(3.0 * mse / N));
    CHECK(l.sigma_penalty == doctest::Approx(0.05 * sig));
    CHECK(l.weight_penalty == doctest::Approx(0.01 * s.w.weight_square_norm()));
    if (!s.batch.constraints.empty())
        CHECK(l.constraint_penalty ==
              doctest::Approx(10.0 * con / (static_cast<double>(s.batch.constraints.size()) * M * M)));
}

TEST_CASE("analytic gradient matches central differences") {
    int checked = 0;
    for (int draw = 0; draw < 120; ++draw) {
        auto s = random_setup(draw);
        std::vector<double> g;
        const DropoutMasks* m = s.masks.active() ? &s.masks : nullptr;
        gradient(s.ctx, s.w, s.batch, g, m);
        const double h = 1e-5;
        int bad = 0;
        for (std::size_t k = 0; k < s.w.params.size(); ++k) {
            auto wp = s.w, wm = s.w;
            wp.params[k] += h;
            wm.params[k] -= h;
            const double fd =
                (training_loss_value(s.ctx, wp, s.batch, m) - training_loss_value(s.ctx, wm, s.batch, m)) / (2 * h);
            const bool ok = std::abs(fd - g[k]) <= std::max(1e-7, 1e-4 * std::abs(fd));
            if (!ok && bad++ < 3)
                MESSAGE("draw " << draw << " param " << k << " analytic " << g[k] << " fd " << fd);
            CHECK(ok);
        }
        ++checked;
    }
    CHECK(checked >= 100);
}

TEST_CASE("duplicated batch leaves the gradient unchanged") {
    auto s = random_setup(4);
    s.ctx.config.dropout = 0.0;
    s.batch.constraints.clear();
    std::vector<double> g1, g2;
    gradient(s.ctx, s.w, s.batch, g1);
    Batch twice = s.batch;
    twice.cells.insert(twice.cells.end(), s.batch.cells.begin(), s.batch.cells.end());
    twice.targets.insert(twice.targets.end(), s.batch.targets.begin(), s.batch.targets.end());
    // The sigma activity term is a sum over cells, so it doubles; switch it off.
    s.ctx.config.lambda_sigma = 0.0;
    gradient(s.ctx, s.w, s.batch, g1);
    gradient(s.ctx, s.w, twice, g2);
    for (std::size_t k = 0; k < g1.size(); ++k) CHECK(g2[k] == doctest::Approx(g1[k]).epsilon(1e-12));
}

TEST_CASE("zero weight penalty contributes no gradient") {
    auto s = random_setup(13);
    s.ctx.config.lambda_w = 0.0;
    std::vector<double> g0, g1;
    gradient(s.ctx, s.w, s.batch, g0);
    s.ctx.config.lambda_w = 0.5;
    gradient(s.ctx, s.w, s.batch, g1);
    const auto mask = s.w.weight_mask();
    for (std::size_t k = 0; k < g0.size(); ++k)
        CHECK(g1[k] - g0[k] == doctest::Approx(mask[k] ? 1.0 * s.w.params[k] : 0.0));
}

TEST_CASE("parallel and serial kernels agree") {
    for (int draw = 0; draw < 24; ++draw) {
        auto s = random_setup(draw);
        const auto tw = training_weights(s.ctx, s.batch);
        const DropoutMasks* m = s.masks.active() ? &s.masks : nullptr;
        std::vector<double> gs, gp;
        const auto ls = kernels::accumulate(s.ctx, s.w, s.batch, tw, m, &gs, kernels::Exec::serial);
        const auto lp = kernels::accumulate(s.ctx, s.w, s.batch, tw, m, &gp, kernels::Exec::parallel);
        CHECK(lp.total() == doctest::Approx(ls.total()).epsilon(1e-12));
        for (std::size_t k = 0; k < gs.size(); ++k) CHECK(gp[k] == doctest::Approx(gs[k]).epsilon(1e-10));
        std::vector<double> again;
        kernels::accumulate(s.ctx, s.w, s.batch, tw, m, &again, kernels::Exec::parallel);
        CHECK(again == gp);
    }
}

TEST_CASE("validation loss drops the training-only terms") {
    auto s = random_setup(3);
    s.ctx.config.lambda_sigma = 1.0;
    s.ctx.config.lambda_w = 1.0;
    s.ctx.config.mse_weight = 5.0;
    auto plain = s.ctx;
    plain.config.lambda_sigma = plain.config.lambda_w = plain.config.mse_weight = 0.0;
    CHECK(validation_loss(s.ctx, s.w, s.batch) == doctest::Approx(training_loss(plain, s.w, s.batch).total()));
}

TEST_CASE("constraints") {
    const auto tail = nonnegative_tail_constraints(10, 3);
    for (const auto& c : tail) {
        CHECK(c.cell.j > 7);
        CHECK(!in_upper(c.cell, 10));
        CHECK(c.lower == 0.0);
        CHECK(std::isinf(c.upper));
    }
    CHECK(tail.size() == 7u + 8u + 9u);
    const auto [a, b] = split_constraints(tail, 3);
    CHECK(a.size() == (tail.size() + 1) / 2);
    CHECK(a.size() + b.size() == tail.size());
    CHECK_THROWS_AS(validate_constraints({{{1, 1}, 0.0, 1.0}}, 10), InputError);
    CHECK_THROWS_AS(validate_constraints({{{10, 10}, 2.0, 1.0}}, 10), InputError);

    testutil::TempDir dir("cons");
    save_constraints(dir / "c.csv", tail);
    const auto back = load_constraints(dir / "c.csv", 10);
    REQUIRE(back.size() == tail.size());
    for (std::size_t k = 0; k < back.size(); ++k) {
        CHECK(back[k].cell == tail[k].cell);
        CHECK(back[k].lower == tail[k].lower);
        CHECK(back[k].upper == tail[k].upper);
    }
}

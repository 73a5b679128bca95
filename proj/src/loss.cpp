#include "reserve_mdn/loss.hpp"

#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"
#include "reserve_mdn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace rmdn {

void validate_constraints(const ConstraintSet& constraints, int n) {
    for (const auto& c : constraints) {
        if (c.cell.i < 1 || c.cell.j < 1 || c.cell.i > n || c.cell.j > n)
            throw InputError("constraint cell outside the square");
        if (in_upper(c.cell, n))
            throw InputError("constraint cell (" + std::to_string(c.cell.i) + "," + std::to_string(c.cell.j) +
                             ") is not in the lower triangle");
        if (!(c.lower <= c.upper)) throw InputError("constraint lower bound exceeds upper bound");
    }
}

ConstraintSet load_constraints(const std::filesystem::path& path, int n) {
    const auto t = csv::read(path);
    const auto ca = t.column("accident"), cd = t.column("development");
    const auto cl = t.column("lower"), cu = t.column("upper");
    auto bound = [](const std::string& s, double dflt) {
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s.empty()) return dflt;
        return csv::to_double(s, "constraint bound");
    };
    ConstraintSet out;
    for (const auto& row : t.rows)
        out.push_back({{static_cast<int>(csv::to_long(row[ca], "accident")),
                        static_cast<int>(csv::to_long(row[cd], "development"))},
                       bound(row[cl], -std::numeric_limits<double>::infinity()),
                       bound(row[cu], std::numeric_limits<double>::infinity())});
    validate_constraints(out, n);
    return out;
}

void save_constraints(const std::filesystem::path& path, const ConstraintSet& constraints) {
    csv::Writer w(path);
    w.row({"accident", "development", "lower", "upper"});
    for (const auto& c : constraints) w.values(c.cell.i, c.cell.j, c.lower, c.upper);
}

ConstraintSet nonnegative_tail_constraints(int n, int periods) {
    ConstraintSet out;
    for (const auto c : lower_cells(n))
        if (c.j > n - periods) out.push_back({c, 0.0, std::numeric_limits<double>::infinity()});
    return out;
}

std::pair<ConstraintSet, ConstraintSet> split_constraints(const ConstraintSet& constraints, std::uint64_t seed) {
    std::vector<std::size_t> order(constraints.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_stream(seed, 0xc0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_train = (constraints.size() + 1) / 2;
    std::pair<ConstraintSet, ConstraintSet> out;
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    for (std::size_t k = 0; k < order.size(); ++k)
        (k < n_train ? out.first : out.second).push_back(constraints[order[k]]);
    return out;
}

Batch make_batch(const IncrementalTriangle& tri, std::span<const Cell> cells, const Normalizer& normalizer,
                 ConstraintSet constraints) {
    Batch b;
    b.cells.assign(cells.begin(), cells.end());
    b.targets.reserve(cells.size());
    for (const auto c : cells) {
        const double x = tri.at(c);
        if (normalizer.scale == ScaleKind::log && !(x > 0.0))
            throw InputError("nonpositive amount at (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                             ") under log scale");
        b.targets.push_back(normalizer.normalize(x));
    }
    b.constraints = std::move(constraints);
    return b;
}

TermWeights training_weights(const LossContext& ctx, const Batch& batch) {
    if (batch.cells.empty()) throw InputError("empty training set");
    const double n = static_cast<double>(batch.cells.size());
    TermWeights tw;
    tw.nll = 1.0 / n;
    tw.mse = ctx.config.mse_weight / n;
    tw.sigma = ctx.config.lambda_sigma;
    tw.weight_l2 = ctx.config.lambda_w;
    if (!batch.constraints.empty())
        tw.constraint = ctx.config.lambda_c /
                        (static_cast<double>(batch.constraints.size()) * ctx.constraint_scale * ctx.constraint_scale);
    return tw;
}

TermWeights validation_weights(const LossContext& ctx, const Batch& batch) {
    if (batch.cells.empty()) throw InputError("empty validation set");
    TermWeights tw;
    tw.nll = 1.0 / static_cast<double>(batch.cells.size());
    if (!batch.constraints.empty())
        tw.constraint = ctx.config.lambda_c /
                        (static_cast<double>(batch.constraints.size()) * ctx.constraint_scale * ctx.constraint_scale);
    return tw;
}

LossBreakdown training_loss(const LossContext& ctx, const NetworkWeights& w, const Batch& batch,
                            const DropoutMasks* masks) {
    return kernels::accumulate(ctx, w, batch, training_weights(ctx, batch), masks, nullptr, kernels::Exec::parallel);
}

double training_loss_value(const LossContext& ctx, const NetworkWeights& w, const Batch& batch,
                           const DropoutMasks* masks) {
    return training_loss(ctx, w, batch, masks).total();
}

double gradient(const LossContext& ctx, const NetworkWeights& w, const Batch& batch, std::vector<double>& grad,
                const DropoutMasks* masks) {
    return kernels::accumulate(ctx, w, batch, training_weights(ctx, batch), masks, &grad, kernels::Exec::parallel)
        .total();
}

double validation_loss(const LossContext& ctx, const NetworkWeights& w, const Batch& batch) {
    return kernels::accumulate(ctx, w, batch, validation_weights(ctx, batch), nullptr, nullptr,
                               kernels::Exec::parallel)
        .total();
}

double raw_mean(const MixtureParams& p, const Normalizer& nz) {
    double m = 0.0;
    if (p.scale == ScaleKind::raw) {
        for (std::size_t k = 0; k < p.size(); ++k) m += p.alpha[k] * (nz.mean + nz.std * p.mu[k]);
    } else {
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double sd = nz.std * p.sigma[k];
            m += p.alpha[k] * std::exp(nz.mean + nz.std * p.mu[k] + 0.5 * sd * sd);
        }
    }
    return m;
}

}  // namespace rmdn

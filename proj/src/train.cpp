#include "reserve_mdn/train.hpp"

#include "reserve_mdn/error.hpp"
#include "reserve_mdn/resmdn.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rmdn {

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    b1t_ *= b1_;
    b2t_ *= b2_;
    const double c1 = 1.0 / (1.0 - b1t_);
    const double c2 = 1.0 / (1.0 - b2t_);
    for (std::size_t k = 0; k < params.size(); ++k) {
        m_[k] = b1_ * m_[k] + (1.0 - b1_) * grad[k];
        v_[k] = b2_ * v_[k] + (1.0 - b2_) * grad[k] * grad[k];
        params[k] -= lr_ * (m_[k] * c1) / (std::sqrt(v_[k] * c2) + eps_);
    }
}

TrainResult train_from(const LossContext& ctx, NetworkWeights initial, const Batch& train, const Batch& val,
                       std::uint64_t seed) {
    ctx.config.validate();
    const auto tw = training_weights(ctx, train);
    const auto vw = validation_weights(ctx, val);

    TrainResult result;
    result.seed = seed;
    result.weights = initial;
    NetworkWeights w = std::move(initial);
    Adam adam(w.params.size(), ctx.config.learning_rate);
    auto rng = make_stream(seed, 0xd0);
    kernels::Workspace ws;
    std::vector<double> grad;
    double best = std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= ctx.config.max_epochs; ++epoch) {
        const auto masks = draw_dropout_masks(ctx.config, train.rows(), rng);
        const double loss =
            kernels::accumulate(ctx, w, train, tw, &masks, &grad, kernels::Exec::parallel, &ws).total();
        if (!std::isfinite(loss)) throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
        adam.step(w.params, grad);
        const double vloss =
            kernels::accumulate(ctx, w, val, vw, nullptr, nullptr, kernels::Exec::parallel, &ws).total();
        if (!std::isfinite(vloss))
            throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
        result.history.push_back({epoch, loss, vloss});
        if (vloss < best) {
            best = vloss;
            result.best_epoch = epoch;
            result.weights.params = w.params;
        } else if (epoch - result.best_epoch >= ctx.config.patience) {
            break;
        }
    }
    result.best_val_loss = best;
    return result;
}

namespace {

NetworkWeights initial_weights(const LossContext& ctx, std::uint64_t seed) {
    return ctx.embedding ? init_resmdn(ctx.config, seed) : init_glorot(ctx.config, seed);
}

}  // namespace

TrainResult train(const LossContext& ctx, const Batch& train_batch, const Batch& val, std::uint64_t seed) {
    try {
        return train_from(ctx, initial_weights(ctx, seed), train_batch, val, seed);
    } catch (const TrainingError& first) {
        const std::uint64_t reseed = derive_seed(seed, 0x5eed);
        try {
            auto r = train_from(ctx, initial_weights(ctx, reseed), train_batch, val, reseed);
            r.restarts = 1;
            return r;
        } catch (const TrainingError& second) {
            throw TrainingError("training diverged with seed " + std::to_string(seed) + " (" + first.what() +
                                ") and reseed " + std::to_string(reseed) + " (" + second.what() + ")");
        }
    }
}

}  // namespace rmdn

#pragma once

#include "reserve_mdn/kernels.hpp"
#include "reserve_mdn/loss.hpp"

#include <cstdint>
#include <vector>

namespace rmdn {

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;  // before the epoch's update
    double val_loss = 0.0;    // after the update
};

struct TrainResult {
    NetworkWeights weights;  // snapshot at the best validation epoch
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::uint64_t seed = 0;  // seed of the successful attempt
    int restarts = 0;
};

/// Bias-corrected Adam over a flat parameter vector.
class Adam {
public:
    Adam(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(std::vector<double>& params, const std::vector<double>& grad);

private:
    double lr_, b1_, b2_, eps_;
    double b1t_ = 1.0, b2t_ = 1.0;
    std::vector<double> m_, v_;
};

/// Full-batch Adam from `initial` with early stopping on `val`. Throws
/// TrainingError on a non-finite loss.
TrainResult train_from(const LossContext& ctx, NetworkWeights initial, const Batch& train, const Batch& val,
                       std::uint64_t seed);

/// Initialises from `seed` (Glorot, or zero heads when ctx.embedding is set)
/// and trains. A divergent run is restarted once from a derived seed; a
/// second divergence throws TrainingError naming both seeds.
TrainResult train(const LossContext& ctx, const Batch& train, const Batch& val, std::uint64_t seed);

}  // namespace rmdn

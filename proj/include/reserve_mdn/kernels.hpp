#pragma once

// Data-parallel kernels. Each has a serial reference with the same contract;
// the parallel versions split the work into a fixed number of chunks and
// combine partial results in chunk order, so their output does not depend on
// the thread count.

#include "reserve_mdn/loss.hpp"

#include <vector>

namespace rmdn::kernels {

enum class Exec { serial, parallel };

inline constexpr int kChunks = 16;

/// Scratch buffers reused across epochs.
struct Workspace {
    std::vector<std::vector<double>> chunk_grad;
};

/// Sums per-row loss terms over `batch` and, when `grad` is non-null,
/// accumulates their gradient into it (grad is overwritten). The L2 weight
/// penalty is included when tw.weight_l2 > 0.
LossBreakdown accumulate(const LossContext& ctx, const NetworkWeights& w, const Batch& batch,
                         const TermWeights& tw, const DropoutMasks* masks, std::vector<double>* grad, Exec exec,
                         Workspace* ws = nullptr);

}  // namespace rmdn::kernels

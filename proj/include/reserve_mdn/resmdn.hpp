#pragma once

#include "reserve_mdn/ccodp.hpp"
#include "reserve_mdn/network.hpp"

#include <filesystem>
#include <vector>

namespace rmdn {

/// Frozen per-cell table holding the ccODP mixture approximation
/// (ln alpha^GLM, mu^GLM, ln sigma^GLM), each of length K, on the normalised
/// response scale. Covers every cell of the n x n square; the cell code is
/// n (i - 1) + j.
class GlmEmbedding {
public:
    GlmEmbedding() = default;
    GlmEmbedding(int n, int components);

    int n() const noexcept { return n_; }
    int components() const noexcept { return k_; }
    static int cell_code(int n, Cell c) noexcept { return n * (c.i - 1) + c.j; }

    const double* ln_alpha(Cell c) const { return block(c, 0); }
    const double* mu(Cell c) const { return block(c, 1); }
    const double* ln_sigma(Cell c) const { return block(c, 2); }
    double* mutable_block(Cell c, int head);

private:
    const double* block(Cell c, int head) const;
    int n_ = 0;
    int k_ = 0;
    std::vector<double> table_;
};

/// alpha^GLM = 1/K, mu^GLM = A_i B_j, sigma^GLM = sqrt(D A_i B_j), each
/// standardised by the raw-scale normaliser (mu: (m - mean)/std, sigma: s/std).
GlmEmbedding build_embedding(const CcOdpFit& fit, const MdnConfig& config, const Normalizer& normalizer);

/// Forward pass of the GLM-boosted network.
MixtureParams resmdn_forward(const NetworkWeights& w, const GlmEmbedding& embedding, const MdnConfig& config,
                             Cell cell, Mode mode, Rng& rng);

/// Glorot hidden layers; every head weight and head bias zero, so the first
/// forward pass reproduces the embedding.
NetworkWeights init_resmdn(const MdnConfig& config, std::uint64_t seed);

/// Per-cell boosting terms z^alpha, z^mu, z^sigma of a trained ResMDN.
struct BoostRow {
    Cell cell;
    int k = 0;
    double z_alpha = 0.0, z_mu = 0.0, z_sigma = 0.0;
    double mu_glm = 0.0, sigma_glm = 0.0;
    double mu_res = 0.0, sigma_res = 0.0;
};

std::vector<BoostRow> boost_report(const NetworkWeights& w, const GlmEmbedding& embedding);
void save_boost_report(const std::filesystem::path& path, const std::vector<BoostRow>& rows);

void save_embedding(const std::filesystem::path& path, const GlmEmbedding& embedding);

}  // namespace rmdn

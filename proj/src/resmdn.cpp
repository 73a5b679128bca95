#include "reserve_mdn/resmdn.hpp"

#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"

#include <cmath>
#include <string>

namespace rmdn {

GlmEmbedding::GlmEmbedding(int n, int components)
    : n_(n), k_(components), table_(static_cast<std::size_t>(n) * n * 3 * components, 0.0) {
    if (n < 1 || components < 1) throw InputError("embedding needs positive dimension and component count");
}

const double* GlmEmbedding::block(Cell c, int head) const {
    if (c.i < 1 || c.j < 1 || c.i > n_ || c.j > n_) throw InputError("cell outside the embedding square");
    const std::size_t code = static_cast<std::size_t>(cell_code(n_, c) - 1);
    return table_.data() + (code * 3 + head) * static_cast<std::size_t>(k_);
}

double* GlmEmbedding::mutable_block(Cell c, int head) { return const_cast<double*>(block(c, head)); }

GlmEmbedding build_embedding(const CcOdpFit& fit, const MdnConfig& config, const Normalizer& normalizer) {
    if (config.scale != ScaleKind::raw || normalizer.scale != ScaleKind::raw)
        throw InputError("the GLM embedding is defined on the raw (Gaussian) scale only");
    const int n = fit.n();
    const int K = config.components;
    GlmEmbedding e(n, K);
    const double ln_alpha = -std::log(static_cast<double>(K));
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) {
            const Cell c{i, j};
            const double m = fit.mean(c);
            if (!(m > 0.0) || !std::isfinite(m)) throw ModelError("ccODP mean must be positive and finite");
            const double mu = (m - normalizer.mean) / normalizer.std;
            const double ln_sigma = std::log(std::sqrt(fit.D * m) / normalizer.std);
            double* a = e.mutable_block(c, kAlpha);
            double* u = e.mutable_block(c, kMu);
            double* s = e.mutable_block(c, kSigma);
            for (int k = 0; k < K; ++k) {
                a[k] = ln_alpha;
                u[k] = mu;
                s[k] = ln_sigma;
            }
        }
    }
    return e;
}

MixtureParams resmdn_forward(const NetworkWeights& w, const GlmEmbedding& embedding, const MdnConfig& config,
                             Cell cell, Mode mode, Rng& rng) {
    if (embedding.components() != config.components)
        throw ModelError("embedding component count differs from the network");
    return forward(w, config, embedding.n(), cell, mode, rng, &embedding);
}

NetworkWeights init_resmdn(const MdnConfig& config, std::uint64_t seed) {
    auto w = init_glorot(config, seed);
    const auto& L = w.layout;
    for (std::size_t k = L.head_w[0]; k < L.size; ++k) w.params[k] = 0.0;
    return w;
}

std::vector<BoostRow> boost_report(const NetworkWeights& w, const GlmEmbedding& embedding) {
    const int n = embedding.n();
    const int K = embedding.components();
    if (w.layout.components != K) throw ModelError("embedding component count differs from the network");
    std::vector<BoostRow> rows;
    rows.reserve(static_cast<std::size_t>(n) * n * K);
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) {
            const Cell c{i, j};
            const auto z = head_outputs(w, n, c);
            const auto p = activate(z, ScaleKind::raw, &embedding, c);
            for (int k = 0; k < K; ++k) {
                BoostRow r;
                r.cell = c;
                r.k = k + 1;
                r.z_alpha = z.z[kAlpha][k];
                r.z_mu = z.z[kMu][k];
                r.z_sigma = z.z[kSigma][k];
                r.mu_glm = embedding.mu(c)[k];
                r.sigma_glm = std::exp(embedding.ln_sigma(c)[k]);
                r.mu_res = p.mu[k];
                r.sigma_res = p.sigma[k];
                rows.push_back(r);
            }
        }
    }
    return rows;
}

void save_boost_report(const std::filesystem::path& path, const std::vector<BoostRow>& rows) {
    csv::Writer out(path);
    out.row({"accident", "development", "k", "z_alpha", "z_mu", "z_sigma", "mu_glm", "sigma_glm", "mu_resmdn",
             "sigma_resmdn"});
    for (const auto& r : rows)
        out.values(r.cell.i, r.cell.j, r.k, r.z_alpha, r.z_mu, r.z_sigma, r.mu_glm, r.sigma_glm, r.mu_res,
                   r.sigma_res);
}

void save_embedding(const std::filesystem::path& path, const GlmEmbedding& embedding) {
    csv::Writer out(path);
    out.row({"accident", "development", "code", "k", "ln_alpha", "mu", "ln_sigma"});
    const int n = embedding.n();
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j)
            for (int k = 0; k < embedding.components(); ++k) {
                const Cell c{i, j};
                out.values(i, j, GlmEmbedding::cell_code(n, c), k + 1, embedding.ln_alpha(c)[k],
                           embedding.mu(c)[k], embedding.ln_sigma(c)[k]);
            }
}

}  // namespace rmdn

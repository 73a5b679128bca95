#include "reserve_mdn/kernels.hpp"

#include "reserve_mdn/resmdn.hpp"

#include <algorithm>
#include <cmath>

namespace rmdn::kernels {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-thread buffers for one row's forward and backward pass.
struct RowScratch {
    std::vector<double> act;  // sigmoid outputs, layers x neurons
    std::vector<double> h;    // after dropout scaling
    std::vector<double> z;    // head pre-activations, 3K
    std::vector<double> dz;   // d loss / d z, 3K
    std::vector<double> logit, mu, s, sigma, log_alpha, alpha, lp;
    std::vector<double> dh, dpre;

    explicit RowScratch(const NetworkLayout& L) {
        const std::size_t hn = static_cast<std::size_t>(L.layers) * L.neurons;
        const std::size_t K = L.components;
        act.resize(hn);
        h.resize(hn);
        z.resize(3 * K);
        dz.resize(3 * K);
        for (auto* v : {&logit, &mu, &s, &sigma, &log_alpha, &alpha, &lp}) v->resize(K);
        dh.resize(L.neurons);
        dpre.resize(L.neurons);
    }
};

void forward_row(const LossContext& ctx, const NetworkWeights& w, Cell cell, const double* mask, RowScratch& r) {
    const auto& L = w.layout;
    const double* p = w.params.data();
    const int N = L.neurons;
    const double x0[2] = {scale_period(cell.i, ctx.n), scale_period(cell.j, ctx.n)};
    for (int l = 0; l < L.layers; ++l) {
        const int fi = L.fan_in(l);
        const double* in = l == 0 ? x0 : r.h.data() + static_cast<std::size_t>(l - 1) * N;
        const double* W = p + L.hidden_w[l];
        const double* b = p + L.hidden_b[l];
        double* a_out = r.act.data() + static_cast<std::size_t>(l) * N;
        double* h_out = r.h.data() + static_cast<std::size_t>(l) * N;
        for (int a = 0; a < N; ++a) {
            double acc = b[a];
            const double* row = W + static_cast<std::size_t>(a) * fi;
            for (int c = 0; c < fi; ++c) acc += row[c] * in[c];
            a_out[a] = sigmoid(acc);
            h_out[a] = mask ? a_out[a] * mask[l * N + a] : a_out[a];
        }
    }
    const int K = L.components;
    const double* hL = r.h.data() + static_cast<std::size_t>(L.layers - 1) * N;
    for (int hd = 0; hd < 3; ++hd) {
        const double* W = p + L.head_w[hd];
        const double* b = p + L.head_b[hd];
        for (int k = 0; k < K; ++k) {
            double acc = b[k];
            const double* row = W + static_cast<std::size_t>(k) * N;
            for (int a = 0; a < N; ++a) acc += row[a] * hL[a];
            r.z[hd * K + k] = acc;
        }
    }
    const GlmEmbedding* emb = ctx.embedding;
    for (int k = 0; k < K; ++k) {
        r.logit[k] = r.z[k] + (emb ? emb->ln_alpha(cell)[k] : 0.0);
        r.mu[k] = r.z[K + k] + (emb ? emb->mu(cell)[k] : 0.0);
        r.s[k] = r.z[2 * K + k] + (emb ? emb->ln_sigma(cell)[k] : 0.0);
        r.sigma[k] = std::exp(r.s[k]);
    }
    const double lse = log_sum_exp(r.logit.data(), K);
    for (int k = 0; k < K; ++k) {
        r.log_alpha[k] = r.logit[k] - lse;
        r.alpha[k] = std::exp(r.log_alpha[k]);
    }
}

void backward_row(const LossContext& ctx, const NetworkWeights& w, Cell cell, const double* mask, RowScratch& r,
                  double* g) {
    const auto& L = w.layout;
    const double* p = w.params.data();
    const int N = L.neurons;
    const int K = L.components;
    const double* hL = r.h.data() + static_cast<std::size_t>(L.layers - 1) * N;
    std::fill(r.dh.begin(), r.dh.end(), 0.0);
    for (int hd = 0; hd < 3; ++hd) {
        const double* W = p + L.head_w[hd];
        double* gW = g + L.head_w[hd];
        double* gb = g + L.head_b[hd];
        for (int k = 0; k < K; ++k) {
            const double d = r.dz[hd * K + k];
            if (d == 0.0) continue;
            gb[k] += d;
            const double* row = W + static_cast<std::size_t>(k) * N;
            double* grow = gW + static_cast<std::size_t>(k) * N;
            for (int a = 0; a < N; ++a) {
                grow[a] += d * hL[a];
                r.dh[a] += row[a] * d;
            }
        }
    }
    const double x0[2] = {scale_period(cell.i, ctx.n), scale_period(cell.j, ctx.n)};
    for (int l = L.layers - 1; l >= 0; --l) {
        const int fi = L.fan_in(l);
        const double* in = l == 0 ? x0 : r.h.data() + static_cast<std::size_t>(l - 1) * N;
        const double* a_l = r.act.data() + static_cast<std::size_t>(l) * N;
        for (int a = 0; a < N; ++a) {
            const double m = mask ? mask[l * N + a] : 1.0;
            r.dpre[a] = r.dh[a] * m * a_l[a] * (1.0 - a_l[a]);
        }
        const double* W = p + L.hidden_w[l];
        double* gW = g + L.hidden_w[l];
        double* gb = g + L.hidden_b[l];
        for (int a = 0; a < N; ++a) {
            gb[a] += r.dpre[a];
            double* grow = gW + static_cast<std::size_t>(a) * fi;
            for (int c = 0; c < fi; ++c) grow[c] += r.dpre[a] * in[c];
        }
        if (l > 0) {
            std::fill(r.dh.begin(), r.dh.end(), 0.0);
            for (int a = 0; a < N; ++a) {
                const double d = r.dpre[a];
                const double* row = W + static_cast<std::size_t>(a) * fi;
                for (int c = 0; c < fi; ++c) r.dh[c] += row[c] * d;
            }
        }
    }
}

// Loss of an observed row and its derivative with respect to the head
// pre-activations.
void observed_row_terms(const TermWeights& tw, double y, RowScratch& r, int K, LossBreakdown& out) {
    double E = 0.0;
    for (int k = 0; k < K; ++k) {
        const double res = (y - r.mu[k]) / r.sigma[k];
        r.lp[k] = r.log_alpha[k] - r.s[k] - kLogSqrtTwoPi - 0.5 * res * res;
        E += r.alpha[k] * r.mu[k];
    }
    const double log_f = log_sum_exp(r.lp.data(), K);
    const double err = E - y;
    double sig2 = 0.0;
    for (int k = 0; k < K; ++k) sig2 += r.sigma[k] * r.sigma[k];
    out.nll -= tw.nll * log_f;
    out.mse += tw.mse * err * err;
    out.sigma_penalty += tw.sigma * sig2;

    for (int k = 0; k < K; ++k) {
        const double gamma = std::exp(r.lp[k] - log_f);
        const double res = (y - r.mu[k]) / r.sigma[k];
        r.dz[k] = tw.nll * (r.alpha[k] - gamma) + tw.mse * 2.0 * err * r.alpha[k] * (r.mu[k] - E);
        r.dz[K + k] = -tw.nll * gamma * res / r.sigma[k] + tw.mse * 2.0 * err * r.alpha[k];
        r.dz[2 * K + k] = tw.nll * gamma * (1.0 - res * res) + tw.sigma * 2.0 * r.sigma[k] * r.sigma[k];
    }
}

void constraint_row_terms(const LossContext& ctx, const TermWeights& tw, const ConstraintEntry& c, RowScratch& r,
                          int K, LossBreakdown& out) {
    const auto& nz = ctx.normalizer;
    std::fill(r.dz.begin(), r.dz.end(), 0.0);
    // Raw-scale predicted mean and its partials w.r.t. logit_k, mu_k, s_k.
    double mean = 0.0;
    if (ctx.config.scale == ScaleKind::raw) {
        double E = 0.0;
        for (int k = 0; k < K; ++k) E += r.alpha[k] * r.mu[k];
        mean = nz.mean + nz.std * E;
        for (int k = 0; k < K; ++k) {
            r.dz[k] = nz.std * r.alpha[k] * (r.mu[k] - E);
            r.dz[K + k] = nz.std * r.alpha[k];
        }
    } else {
        for (int k = 0; k < K; ++k) {
            const double m = nz.mean + nz.std * r.mu[k];
            const double sd = nz.std * r.sigma[k];
            r.lp[k] = std::exp(m + 0.5 * sd * sd);  // component mean
            mean += r.alpha[k] * r.lp[k];
        }
        for (int k = 0; k < K; ++k) {
            const double sd = nz.std * r.sigma[k];
            r.dz[k] = r.alpha[k] * (r.lp[k] - mean);
            r.dz[K + k] = r.alpha[k] * r.lp[k] * nz.std;
            r.dz[2 * K + k] = r.alpha[k] * r.lp[k] * sd * sd;
        }
    }
    double slope = 0.0;
    if (mean > c.upper) {
        const double v = mean - c.upper;
        out.constraint_penalty += tw.constraint * v * v;
        slope = 2.0 * tw.constraint * v;
    } else if (mean < c.lower) {
        const double v = c.lower - mean;
        out.constraint_penalty += tw.constraint * v * v;
        slope = -2.0 * tw.constraint * v;
    } else if (!std::isfinite(mean)) {
        out.constraint_penalty += mean;  // propagate the divergence
    }
    for (auto& d : r.dz) d *= slope;
}

void add(LossBreakdown& a, const LossBreakdown& b) {
    a.nll += b.nll;
    a.mse += b.mse;
    a.sigma_penalty += b.sigma_penalty;
    a.constraint_penalty += b.constraint_penalty;
    a.weight_penalty += b.weight_penalty;
}

// Processes rows [begin, end) of the batch.
void run_rows(const LossContext& ctx, const NetworkWeights& w, const Batch& batch, const TermWeights& tw,
              const DropoutMasks* masks, std::size_t begin, std::size_t end, double* g, LossBreakdown& out) {
    RowScratch r(w.layout);
    const int K = w.layout.components;
    const std::size_t n_obs = batch.cells.size();
    for (std::size_t row = begin; row < end; ++row) {
        const double* mask = masks && masks->active() ? masks->row(row) : nullptr;
        if (row < n_obs) {
            const Cell cell = batch.cells[row];
            forward_row(ctx, w, cell, mask, r);
            observed_row_terms(tw, batch.targets[row], r, K, out);
            if (g) backward_row(ctx, w, cell, mask, r, g);
        } else {
            const auto& c = batch.constraints[row - n_obs];
            if (tw.constraint == 0.0) continue;
            forward_row(ctx, w, c.cell, mask, r);
            constraint_row_terms(ctx, tw, c, r, K, out);
            if (g) backward_row(ctx, w, c.cell, mask, r, g);
        }
    }
}

}  // namespace

LossBreakdown accumulate(const LossContext& ctx, const NetworkWeights& w, const Batch& batch,
                         const TermWeights& tw, const DropoutMasks* masks, std::vector<double>* grad, Exec exec,
                         Workspace* ws) {
    LossBreakdown total;
    const std::size_t P = w.params.size();
    if (grad) grad->assign(P, 0.0);
    const std::size_t R = batch.rows();

    if (exec == Exec::serial) {
        run_rows(ctx, w, batch, tw, masks, 0, R, grad ? grad->data() : nullptr, total);
    } else {
        Workspace local;
        Workspace& W = ws ? *ws : local;
        if (grad) {
            W.chunk_grad.resize(kChunks);
            for (auto& cg : W.chunk_grad) cg.assign(P, 0.0);
        }
        LossBreakdown parts[kChunks];
#pragma omp parallel for schedule(static)
        for (int c = 0; c < kChunks; ++c) {
            const std::size_t begin = R * c / kChunks;
            const std::size_t end = R * (c + 1) / kChunks;
            run_rows(ctx, w, batch, tw, masks, begin, end, grad ? W.chunk_grad[c].data() : nullptr, parts[c]);
        }
        for (int c = 0; c < kChunks; ++c) {
            add(total, parts[c]);
            if (grad) {
                const auto& cg = W.chunk_grad[c];
                for (std::size_t k = 0; k < P; ++k) (*grad)[k] += cg[k];
            }
        }
    }

    if (tw.weight_l2 > 0.0) {
        const auto mask = w.weight_mask();
        double s = 0.0;
        for (std::size_t k = 0; k < P; ++k)
            if (mask[k]) {
                s += w.params[k] * w.params[k];
                if (grad) (*grad)[k] += 2.0 * tw.weight_l2 * w.params[k];
            }
        total.weight_penalty = tw.weight_l2 * s;
    }
    return total;
}

}  // namespace rmdn::kernels

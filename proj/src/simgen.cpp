#include "reserve_mdn/simgen.hpp"

#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"
#include "reserve_mdn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rmdn {

const char* to_string(EnvironmentKind kind) {
    switch (kind) {
        case EnvironmentKind::simple_short_tail: return "simple_short_tail";
        case EnvironmentKind::processing_speedup: return "processing_speedup";
        case EnvironmentKind::inflation_shock: return "inflation_shock";
        case EnvironmentKind::high_volatility: return "high_volatility";
    }
    return "?";
}

EnvironmentKind environment_kind_from_string(const std::string& text) {
    for (auto k : {EnvironmentKind::simple_short_tail, EnvironmentKind::processing_speedup,
                   EnvironmentKind::inflation_shock, EnvironmentKind::high_volatility})
        if (text == to_string(k)) return k;
    throw InputError("unknown environment '" + text + "'");
}

namespace {

// Discretised gamma shape j^(a-1) exp(-j/theta) over j = 1..n, normalised.
std::vector<double> gamma_shape(int n, double a, double theta) {
    std::vector<double> p(n);
    double s = 0.0;
    for (int j = 1; j <= n; ++j) s += (p[j - 1] = std::exp((a - 1.0) * std::log(j) - j / theta));
    for (auto& v : p) v /= s;
    return p;
}

}  // namespace

double EnvironmentSpec::pattern(int i, int j) const {
    const auto slow = gamma_shape(n, shape, slow_scale);
    const auto fast = gamma_shape(n, shape, fast_scale);
    const double t = n > 1 ? static_cast<double>(i - 1) / (n - 1) : 0.0;
    const double w = speedup_start + (speedup_end - speedup_start) * t;
    std::vector<double> p(n);
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
        p[k] = (1.0 - w) * slow[k] + w * fast[k] + (k == 1 ? dq2_spike : 0.0);
        s += p[k];
    }
    return p[j - 1] / s;
}

double EnvironmentSpec::inflation(int calendar) const {
    if (shock_start <= 0 || calendar < shock_start) return 1.0;
    return std::pow(1.0 + shock_rate, (calendar - shock_start + 1) / 4.0);
}

double EnvironmentSpec::mean(int i, int j) const {
    return exposure.at(i - 1) * pattern(i, j) * inflation(calendar_period(i, j));
}

void EnvironmentSpec::validate() const {
    if (n < 2) throw InputError("environment dimension must be at least 2");
    if (static_cast<int>(exposure.size()) != n) throw InputError("exposure length differs from n");
    for (double e : exposure)
        if (!(e > 0.0)) throw InputError("exposure must be positive");
    if (!(shape > 0.0 && slow_scale > 0.0 && fast_scale > 0.0)) throw InputError("pattern parameters must be positive");
    for (double w : {speedup_start, speedup_end})
        if (w < 0.0 || w > 1.0) throw InputError("speed-up weights must lie in [0,1]");
    if (dq2_spike < 0.0) throw InputError("DQ2 spike must be nonnegative");
    if (shock_rate <= -1.0) throw InputError("inflation rate must exceed -100%");
    if (!(noise.parameter > 0.0)) throw InputError("noise parameter must be positive");
}

EnvironmentSpec make_environment(EnvironmentKind kind, int n, std::uint64_t seed) {
    EnvironmentSpec s;
    s.kind = kind;
    s.n = n;
    s.seed = seed;
    auto rng = make_stream(seed, 0xe1);
    std::uniform_real_distribution<double> u(0.9, 1.1);
    for (int i = 0; i < n; ++i) s.exposure.push_back(1e6 * u(rng));
    const double scale = n / 40.0;  // keeps tail lengths proportional to n
    switch (kind) {
        case EnvironmentKind::simple_short_tail:
            s.shape = 1.5;
            s.slow_scale = s.fast_scale = 2.5 * scale;
            s.dq2_spike = 0.15;
            s.noise = {NoiseSpec::Kind::gamma, 0.15};
            break;
        case EnvironmentKind::processing_speedup:
            s.shape = 2.0;
            s.slow_scale = 12.0 * scale;
            s.fast_scale = 2.0 * scale;
            s.speedup_start = 0.0;
            s.speedup_end = 0.7;
            s.noise = {NoiseSpec::Kind::gamma, 0.15};
            break;
        case EnvironmentKind::inflation_shock:
            s.shape = 1.8;
            s.slow_scale = s.fast_scale = 4.0 * scale;
            s.shock_start = std::max(1, static_cast<int>(std::lround(0.75 * n)));
            s.shock_rate = 0.08;
            s.noise = {NoiseSpec::Kind::gamma, 0.15};
            break;
        case EnvironmentKind::high_volatility:
            s.shape = 2.0;
            s.slow_scale = s.fast_scale = 4.0 * scale;
            s.noise = {NoiseSpec::Kind::gamma, 0.5};
            break;
    }
    return s;
}

namespace {

double draw(const NoiseSpec& noise, double mean, Rng& rng) {
    if (noise.kind == NoiseSpec::Kind::odp) {
        std::poisson_distribution<long long> p(mean / noise.parameter);
        return noise.parameter * static_cast<double>(p(rng));
    }
    const double k = 1.0 / (noise.parameter * noise.parameter);
    std::gamma_distribution<double> g(k, mean / k);
    return g(rng);
}

}  // namespace

IncrementalTriangle generate(const EnvironmentSpec& spec) {
    spec.validate();
    IncrementalTriangle t(spec.n);
    auto rng = make_stream(spec.seed, 0x9e);
    for (int i = 1; i <= spec.n; ++i)
        for (int j = 1; j <= spec.n; ++j) t.set({i, j}, draw(spec.noise, spec.mean(i, j), rng));
    return t;
}

EmpiricalReference empirical_reference(const EnvironmentSpec& spec, int m, kernels::Exec exec) {
    if (m < 2) throw InputError("empirical reference needs at least two simulations");
    spec.validate();
    const int n = spec.n;
    const std::size_t cells = static_cast<std::size_t>(n) * n;
    std::vector<double> draws(cells * m);  // simulation-major
    EmpiricalReference ref;
    ref.n = n;
    ref.reserves.resize(m);
    auto one = [&](int s) {
        auto sub = spec;
        sub.seed = derive_seed(spec.seed, s);
        const auto t = generate(sub);
        double r = 0.0;
        for (int i = 1; i <= n; ++i)
            for (int j = 1; j <= n; ++j) {
                const double x = t.at({i, j});
                draws[static_cast<std::size_t>(s) * cells + (i - 1) * n + (j - 1)] = x;
                if (!in_upper({i, j}, n)) r += x;
            }
        ref.reserves[s] = r;
    };
    if (exec == kernels::Exec::serial) {
        for (int s = 0; s < m; ++s) one(s);
    } else {
#pragma omp parallel for schedule(static)
        for (int s = 0; s < m; ++s) one(s);
    }
    ref.mean.resize(cells);
    ref.q25.resize(cells);
    ref.q75.resize(cells);
    ref.q95.resize(cells);
    std::vector<double> col(m);
    auto nearest_rank = [&](double q) { return col[std::max<std::size_t>(1, std::ceil(q * m)) - 1]; };
    for (std::size_t c = 0; c < cells; ++c) {
        double s = 0.0;
        for (int k = 0; k < m; ++k) s += (col[k] = draws[static_cast<std::size_t>(k) * cells + c]);
        ref.mean[c] = s / m;
        std::sort(col.begin(), col.end());
        ref.q25[c] = nearest_rank(0.25);
        ref.q75[c] = nearest_rank(0.75);
        ref.q95[c] = nearest_rank(0.95);
    }
    return ref;
}

void save_reference(const std::filesystem::path& path, const EnvironmentSpec& spec, const EmpiricalReference& ref) {
    csv::Writer out(path);
    out.row({"accident", "development", "analytic_mean", "mean", "q25", "q75", "q95"});
    for (int i = 1; i <= ref.n; ++i)
        for (int j = 1; j <= ref.n; ++j) {
            const Cell c{i, j};
            out.values(i, j, spec.mean(i, j), ref.at(ref.mean, c), ref.at(ref.q25, c), ref.at(ref.q75, c),
                       ref.at(ref.q95, c));
        }
}

}  // namespace rmdn

#pragma once

#include "reserve_mdn/kernels.hpp"
#include "reserve_mdn/triangle.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rmdn {

enum class EnvironmentKind { simple_short_tail, processing_speedup, inflation_shock, high_volatility };
const char* to_string(EnvironmentKind kind);
EnvironmentKind environment_kind_from_string(const std::string& text);

struct NoiseSpec {
    enum class Kind { odp, gamma } kind = Kind::gamma;
    double parameter = 0.2;  // dispersion D for odp, coefficient of variation for gamma
};

/// Multiplicative mean surface exposure_i * pattern(i, j) * inflation(i + j - 1)
/// with independent cell noise.
struct EnvironmentSpec {
    EnvironmentKind kind = EnvironmentKind::simple_short_tail;
    int n = 40;
    std::vector<double> exposure;
    /// Development pattern: a mixture of a slow and a fast discretised gamma
    /// shape with a common shape parameter; the fast weight runs linearly
    /// from speedup_start (i = 1) to speedup_end (i = n).
    double shape = 2.0;
    double slow_scale = 3.0;
    double fast_scale = 1.0;
    double speedup_start = 0.0;
    double speedup_end = 0.0;
    double dq2_spike = 0.0;  // extra mass at development period 2 before renormalising
    /// Calendar inflation: 1 before shock_start, then (1 + shock_rate)^((c - start + 1)/4).
    int shock_start = 0;  // 0 disables the shock
    double shock_rate = 0.0;
    NoiseSpec noise;
    std::uint64_t seed = 0;

    /// Expected fraction of accident period i's ultimate paid in development period j.
    double pattern(int i, int j) const;
    double inflation(int calendar) const;
    double mean(int i, int j) const;
    /// Throws InputError if the spec is inconsistent.
    void validate() const;
};

/// Archetype defaults at dimension n.
EnvironmentSpec make_environment(EnvironmentKind kind, int n, std::uint64_t seed);

/// Full square of independent draws around the mean surface.
IncrementalTriangle generate(const EnvironmentSpec& spec);

struct EmpiricalReference {
    int n = 0;
    std::vector<double> mean, q25, q75, q95;  // row-major n x n
    std::vector<double> reserves;            // one total per simulated triangle

    double at(const std::vector<double>& surface, Cell c) const {
        return surface[static_cast<std::size_t>(c.i - 1) * n + (c.j - 1)];
    }
};

/// m independent triangles from spec (simulation s uses seed derive_seed(spec.seed, s)).
EmpiricalReference empirical_reference(const EnvironmentSpec& spec, int m,
                                       kernels::Exec exec = kernels::Exec::parallel);

/// Writes the mean surface and quantiles as accident, development, analytic_mean, mean, q25, q75, q95.
void save_reference(const std::filesystem::path& path, const EnvironmentSpec& spec, const EmpiricalReference& ref);

}  // namespace rmdn

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rmdn {

/// A (accident, development) coordinate, both 1-based.
struct Cell {
    int i = 1;
    int j = 1;
    friend constexpr bool operator==(Cell, Cell) = default;
    friend constexpr auto operator<=>(Cell, Cell) = default;
};

enum class ScaleKind { raw, log };

const char* to_string(ScaleKind kind);
ScaleKind scale_kind_from_string(const std::string& text);

/// Calendar period of a cell: diagonals of the triangle, 1..2n-1.
constexpr int calendar_period(int i, int j) noexcept { return i + j - 1; }
constexpr int calendar_period(Cell c) noexcept { return calendar_period(c.i, c.j); }

/// Observed region of an n x n triangle: i + j <= n + 1.
constexpr bool in_upper(Cell c, int n) noexcept { return c.i + c.j <= n + 1; }

/// Cells with i + j <= n + 1 in row-major order.
std::vector<Cell> upper_cells(int n);
/// Cells with i + j > n + 1 (the forecast region) in row-major order.
std::vector<Cell> lower_cells(int n);

/// Square grid of incremental claim amounts with an observation mask.
class IncrementalTriangle {
public:
    IncrementalTriangle() = default;
    explicit IncrementalTriangle(int n);

    int n() const noexcept { return n_; }

    bool observed(Cell c) const;
    double at(Cell c) const;  // throws if unobserved
    void set(Cell c, double amount);
    void clear(Cell c);

    /// Copy restricted to the upper triangle (drops realised lower cells).
    IncrementalTriangle upper() const;
    bool complete_upper() const;
    bool complete_square() const;

    std::vector<double> values(std::span<const Cell> cells) const;
    /// Mean of the observed upper-triangle amounts.
    double upper_mean() const;

private:
    std::size_t index(Cell c) const;

    int n_ = 0;
    std::vector<double> amounts_;
    std::vector<std::uint8_t> mask_;
};

/// Long-format `accident,development,amount` file. Every upper-triangle cell
/// must be present; lower-triangle cells are optional.
IncrementalTriangle load_triangle(const std::filesystem::path& path, int n);
/// Writes observed cells in row-major order.
void save_triangle(const std::filesystem::path& path, const IncrementalTriangle& tri);

/// Affine standardisation of the response, optionally after a natural log.
struct Normalizer {
    double mean = 0.0;
    double std = 1.0;
    ScaleKind scale = ScaleKind::raw;

    double normalize(double x) const;
    double denormalize(double z) const;
};

/// Sample mean and n-1 standard deviation of `values` (or their logs).
/// A constant sample gets std = 1.
Normalizer fit_normalizer(std::span<const double> values, ScaleKind scale);

/// Network input map: i and j sent linearly from 1..n onto [0, 1].
inline double scale_period(int k, int n) noexcept {
    return n > 1 ? static_cast<double>(k - 1) / static_cast<double>(n - 1) : 0.0;
}

}  // namespace rmdn

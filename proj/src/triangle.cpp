#include "reserve_mdn/triangle.hpp"

#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rmdn {

const char* to_string(ScaleKind kind) { return kind == ScaleKind::log ? "log" : "raw"; }

ScaleKind scale_kind_from_string(const std::string& text) {
    if (text == "raw" || text == "gaussian") return ScaleKind::raw;
    if (text == "log" || text == "log-gaussian" || text == "lognormal") return ScaleKind::log;
    throw InputError("unknown scale kind '" + text + "'");
}

std::vector<Cell> upper_cells(int n) {
    std::vector<Cell> out;
    out.reserve(static_cast<std::size_t>(n) * (n + 1) / 2);
    for (int i = 1; i <= n; ++i)
        for (int j = 1; i + j <= n + 1; ++j) out.push_back({i, j});
    return out;
}

std::vector<Cell> lower_cells(int n) {
    std::vector<Cell> out;
    for (int i = 2; i <= n; ++i)
        for (int j = n + 2 - i; j <= n; ++j) out.push_back({i, j});
    return out;
}

IncrementalTriangle::IncrementalTriangle(int n)
    : n_(n), amounts_(static_cast<std::size_t>(n) * n, 0.0), mask_(static_cast<std::size_t>(n) * n, 0) {
    if (n < 1) throw InputError("triangle dimension must be positive");
}

std::size_t IncrementalTriangle::index(Cell c) const {
    if (c.i < 1 || c.j < 1 || c.i > n_ || c.j > n_)
        throw InputError("index out of range: (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                         ") for n=" + std::to_string(n_));
    return static_cast<std::size_t>(c.i - 1) * n_ + (c.j - 1);
}

bool IncrementalTriangle::observed(Cell c) const { return mask_[index(c)] != 0; }

double IncrementalTriangle::at(Cell c) const {
    const auto k = index(c);
    if (!mask_[k])
        throw InputError("cell (" + std::to_string(c.i) + "," + std::to_string(c.j) + ") is not observed");
    return amounts_[k];
}

void IncrementalTriangle::set(Cell c, double amount) {
    if (!std::isfinite(amount)) throw InputError("non-finite amount");
    const auto k = index(c);
    amounts_[k] = amount;
    mask_[k] = 1;
}

void IncrementalTriangle::clear(Cell c) {
    const auto k = index(c);
    amounts_[k] = 0.0;
    mask_[k] = 0;
}

IncrementalTriangle IncrementalTriangle::upper() const {
    IncrementalTriangle out(n_);
    for (const auto c : upper_cells(n_))
        if (observed(c)) out.set(c, at(c));
    return out;
}

bool IncrementalTriangle::complete_upper() const {
    for (const auto c : upper_cells(n_))
        if (!observed(c)) return false;
    return true;
}

bool IncrementalTriangle::complete_square() const {
    return std::all_of(mask_.begin(), mask_.end(), [](auto m) { return m != 0; });
}

std::vector<double> IncrementalTriangle::values(std::span<const Cell> cells) const {
    std::vector<double> out;
    out.reserve(cells.size());
    for (const auto c : cells) out.push_back(at(c));
    return out;
}

double IncrementalTriangle::upper_mean() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto c : upper_cells(n_))
        if (observed(c)) {
            sum += at(c);
            ++count;
        }
    return count ? sum / static_cast<double>(count) : 0.0;
}

IncrementalTriangle load_triangle(const std::filesystem::path& path, int n) {
    const auto table = csv::read(path);
    const auto ca = table.column("accident");
    const auto cd = table.column("development");
    const auto cx = table.column("amount");
    IncrementalTriangle tri(n);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto where = path.string() + ":" + std::to_string(table.line_numbers[r]) + ": ";
        try {
            const Cell c{static_cast<int>(csv::to_long(row[ca], "accident")),
                         static_cast<int>(csv::to_long(row[cd], "development"))};
            const double x = csv::to_double(row[cx], "amount");
            if (c.i < 1 || c.j < 1 || c.i > n || c.j > n) throw InputError("index out of range");
            if (tri.observed(c)) throw InputError("duplicate cell");
            tri.set(c, x);
        } catch (const InputError& e) {
            throw InputError(where + e.what());
        }
    }
    for (const auto c : upper_cells(n))
        if (!tri.observed(c))
            throw InputError(path.string() + ": missing upper-triangle cell (" + std::to_string(c.i) + "," +
                             std::to_string(c.j) + ")");
    return tri;
}

void save_triangle(const std::filesystem::path& path, const IncrementalTriangle& tri) {
    csv::Writer w(path);
    w.row({"accident", "development", "amount"});
    for (int i = 1; i <= tri.n(); ++i)
        for (int j = 1; j <= tri.n(); ++j)
            if (tri.observed({i, j})) w.values(i, j, tri.at({i, j}));
}

double Normalizer::normalize(double x) const {
    const double v = scale == ScaleKind::log ? std::log(x) : x;
    return (v - mean) / std;
}

double Normalizer::denormalize(double z) const {
    const double v = z * std + mean;
    return scale == ScaleKind::log ? std::exp(v) : v;
}

Normalizer fit_normalizer(std::span<const double> values, ScaleKind scale) {
    if (values.empty()) throw InputError("cannot fit a normalizer to an empty sample");
    std::vector<double> v(values.begin(), values.end());
    if (scale == ScaleKind::log) {
        for (auto& x : v) {
            if (!(x > 0.0)) throw InputError("nonpositive value under log scale");
            x = std::log(x);
        }
    }
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    const bool constant = std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    const double sd = constant ? 1.0 : std::sqrt(ss / (n - 1.0));
    return {mean, sd, scale};
}

}  // namespace rmdn

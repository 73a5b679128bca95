#include "reserve_mdn/partition.hpp"

#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"
#include "reserve_mdn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace rmdn {

void DataSplit::check() const {
    std::set<Cell> seen;
    auto visit = [&](const std::vector<Cell>& part, const char* label) {
        for (const auto c : part) {
            if (c.i < 1 || c.j < 1 || !in_upper(c, n))
                throw ModelError(name + ": " + label + " cell outside the upper triangle");
            if (!seen.insert(c).second) throw ModelError(name + ": cell assigned twice");
        }
    };
    visit(train, "train");
    visit(val, "validation");
    visit(test, "test");
    if (train.empty()) throw ModelError(name + ": empty training set");
    if (val.empty()) throw ModelError(name + ": empty validation set");
}

namespace {

bool contains(const std::vector<Cell>& v, Cell c) { return std::find(v.begin(), v.end(), c) != v.end(); }

// Trains and validates on the dim-triangle; tests on the cells of the
// horizon-triangle outside it.
DataSplit sequential_split(std::string name, int n, int dim, int horizon) {
    DataSplit s;
    s.name = std::move(name);
    s.n = n;
    s.dim = dim;
    s.val = sequential_validation(dim);
    for (const auto c : upper_cells(dim))
        if (!contains(s.val, c)) s.train.push_back(c);
    for (const auto c : upper_cells(horizon))
        if (!in_upper(c, dim)) s.test.push_back(c);
    return s;
}

}  // namespace

std::vector<Cell> sequential_validation(int dim) {
    if (dim < 8) throw InputError("validation needs an inner triangle of dimension at least 8");
    std::vector<Cell> val;
    int displaced[4] = {0, 0, 0, 0};
    int first_displaced[4] = {dim, dim, dim, dim};
    for (const auto c : upper_cells(dim)) {
        if (calendar_period(c) <= dim - 4) continue;
        if (c.i > 3 && c.j > 3) {
            val.push_back(c);
        } else if (c.i > 3 && (c.j == 2 || c.j == 3)) {
            ++displaced[c.j];
            first_displaced[c.j] = std::min(first_displaced[c.j], c.i);
        }
    }
    for (int j : {2, 3}) {
        // Earlier accident periods 4 .. first_displaced - 1, sampled at
        // evenly spaced positions.
        const int lo = 4, hi = first_displaced[j] - 1;
        const int available = std::max(0, hi - lo + 1);
        const int count = std::min(displaced[j], available);
        for (int k = 0; k < count; ++k) {
            const double pos = (k + 0.5) * available / count;
            val.push_back({lo + static_cast<int>(std::floor(pos)), j});
        }
    }
    std::sort(val.begin(), val.end());
    return val;
}

std::pair<DataSplit, DataSplit> rolling_origin(int n) {
    if (n < 20) throw InputError("rolling-origin partitions need n >= 20");
    auto p1 = sequential_split("P1", n, n - 10, n);
    auto p2 = sequential_split("P2", n, n - 8, n - 4);
    p1.check();
    p2.check();
    return {std::move(p1), std::move(p2)};
}

DataSplit final_fit_split(int n) {
    if (n < 12) throw InputError("the final-fit split needs n >= 12");
    auto s = sequential_split("P3", n, n, n);
    s.check();
    return s;
}

int ten_percent(std::size_t count) {
    return std::max(1, static_cast<int>(std::lround(0.1 * static_cast<double>(count))));
}

std::vector<DataSplit> adjusted_partitions(int n, std::uint64_t seed) {
    if (n < 20) throw InputError("adjusted partitions need n >= 20");
    const auto all = upper_cells(n);
    const int k10 = ten_percent(all.size());
    std::vector<Cell> late;
    for (const auto c : all)
        if (calendar_period(c) > n - 11) late.push_back(c);

    auto draw = [](std::vector<Cell> pool, int count, Rng& rng, const char* what) {
        if (static_cast<int>(pool.size()) < count)
            throw InputError(std::string("not enough cells for the ") + what + " draw");
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(static_cast<std::size_t>(count));
        std::sort(pool.begin(), pool.end());
        return pool;
    };
    auto without = [](const std::vector<Cell>& pool, const std::vector<Cell>& drop) {
        std::vector<Cell> out;
        for (const auto c : pool)
            if (!contains(drop, c)) out.push_back(c);
        return out;
    };

    std::vector<DataSplit> splits;
    std::vector<Cell> adj1_test;
    for (int k = 1; k <= 4; ++k) {
        auto rng = make_stream(seed, 0xad0 + k);
        DataSplit s;
        s.name = "ADJ" + std::to_string(k);
        s.n = n;
        s.dim = n;
        if (k == 1) s.test = draw(late, k10, rng, "test");
        if (k == 2) s.test = draw(without(late, adj1_test), k10, rng, "test");
        if (k == 1) adj1_test = s.test;
        const int late_val = (k10 + 1) / 2;
        s.val = draw(without(late, s.test), late_val, rng, "late validation");
        auto rest = without(without(all, s.test), s.val);
        const auto spread = draw(rest, k10 - late_val, rng, "validation");
        s.val.insert(s.val.end(), spread.begin(), spread.end());
        std::sort(s.val.begin(), s.val.end());
        s.train = without(without(all, s.test), s.val);
        s.check();
        splits.push_back(std::move(s));
    }
    return splits;
}

void save_splits(const std::filesystem::path& path, const std::vector<DataSplit>& splits) {
    csv::Writer out(path);
    out.row({"accident", "development", "split", "set"});
    for (const auto& s : splits) {
        for (const auto c : s.train) out.values(c.i, c.j, s.name, "train");
        for (const auto c : s.val) out.values(c.i, c.j, s.name, "val");
        for (const auto c : s.test) out.values(c.i, c.j, s.name, "test");
    }
}

}  // namespace rmdn

#pragma once

#include "reserve_mdn/triangle.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rmdn {

/// Disjoint train / validation / test assignment of upper-triangle cells.
/// `dim` is the dimension of the triangle the model is fitted on: n - 10 for
/// P1, n - 8 for P2 and n for the final-fit and adjusted splits.
struct DataSplit {
    std::string name;
    int n = 0;
    int dim = 0;
    std::vector<Cell> train, val, test;

    /// Throws ModelError naming the violated invariant.
    void check() const;
};

/// Validation cells of the `dim` x `dim` triangle: the latest four calendar
/// periods with accident or development period <= 3 excluded. Each excluded
/// cell at development period 2 or 3 is replaced by a cell of the same
/// development period taken from evenly spaced earlier accident periods.
std::vector<Cell> sequential_validation(int dim);

/// P1 fits the (n-10)-triangle and tests on calendar periods n-9..n. P2
/// works inside the (n-4)-triangle: it fits the (n-8)-triangle and tests on
/// calendar periods n-7..n-4, leaving the last four periods unused.
std::pair<DataSplit, DataSplit> rolling_origin(int n);

/// Whole upper triangle, validation on the latest four calendar periods, no test.
DataSplit final_fit_split(int n);

/// ADJ1..ADJ4: randomised 10% test (ADJ1, ADJ2) and validation sets.
std::vector<DataSplit> adjusted_partitions(int n, std::uint64_t seed);

/// `round(0.1 * count)`, at least one.
int ten_percent(std::size_t count);

/// Long CSV: accident, development, split, set.
void save_splits(const std::filesystem::path& path, const std::vector<DataSplit>& splits);

}  // namespace rmdn

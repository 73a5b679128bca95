#pragma once

#include "reserve_mdn/rng.hpp"
#include "reserve_mdn/triangle.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>
#include <cmath>
#include <algorithm>

namespace testutil {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("rmdn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

/// Upper triangle with independent uniform(lo, hi) amounts.
inline rmdn::IncrementalTriangle random_upper(int n, std::uint64_t seed, double lo = 1.0, double hi = 100.0) {
    rmdn::Rng rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    rmdn::IncrementalTriangle t(n);
    for (const auto c : rmdn::upper_cells(n)) t.set(c, u(rng));
    return t;
}

inline bool close_rel(double a, double b, double rel, double abs = 0.0) {
    return std::abs(a - b) <= std::max(abs, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace testutil

#include "doctest.h"
#include "test_util.hpp"

#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"
#include "reserve_mdn/partition.hpp"

#include <algorithm>
#include <set>

using namespace rmdn;

namespace {

std::set<int> calendars(const std::vector<Cell>& cells) {
    std::set<int> out;
    for (const auto c : cells) out.insert(calendar_period(c));
    return out;
}

bool has(const std::vector<Cell>& v, Cell c) { return std::find(v.begin(), v.end(), c) != v.end(); }

// Brute-force count of upper-triangle cells of an n-triangle whose calendar
// period lies in (lo, hi].
int count_calendar_band(int n, int lo, int hi) {
    int count = 0;
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j)
            if (i + j <= n + 1 && i + j - 1 > lo && i + j - 1 <= hi) ++count;
    return count;
}

// Structure every sequential validation set must have on a dim-triangle.
void check_sequential_validation(const DataSplit& s) {
    const int d = s.dim;
    for (int i = 1; i <= d; ++i)
        for (int j = 1; j <= d; ++j) {
            const Cell c{i, j};
            if (!in_upper(c, d)) continue;
            const bool late = calendar_period(c) > d - 4;
            if (late && i > 3 && j > 3) CHECK(has(s.val, c));
            if (late && (i <= 3 || j <= 3)) CHECK_FALSE(has(s.val, c));
        }
    int at[4] = {0, 0, 0, 0};
    for (const auto c : s.val) {
        CHECK(c.i > 3);
        CHECK(c.j > 1);
        if (c.j <= 3) {
            ++at[c.j];
            CHECK(calendar_period(c) <= d - 4);
        }
    }
    // Replacements come from accident periods 4 onward that sit before the
    // displaced block, so small triangles get fewer than four.
    CHECK(at[2] == std::min(4, d - 8));
    CHECK(at[3] == std::min(4, d - 9));
}

}  // namespace

TEST_CASE("rolling-origin partitions match an enumeration of the calendar bands") {
    for (int n : {20, 36, 40}) {
        const auto [p1, p2] = rolling_origin(n);
        CHECK_NOTHROW(p1.check());
        CHECK_NOTHROW(p2.check());
        CHECK(p1.dim == n - 10);
        CHECK(p2.dim == n - 8);

        CHECK(static_cast<int>(p1.test.size()) == count_calendar_band(n, n - 10, n));
        CHECK(static_cast<int>(p2.test.size()) == count_calendar_band(n - 4, n - 8, n - 4));
        std::set<int> p1_expected, p2_expected;
        for (int c = n - 9; c <= n; ++c) p1_expected.insert(c);
        for (int c = n - 7; c <= n - 4; ++c) p2_expected.insert(c);
        CHECK(calendars(p1.test) == p1_expected);
        CHECK(calendars(p2.test) == p2_expected);

        for (const auto* s : {&p1, &p2}) {
            const int max_fit = std::max(*calendars(s->train).rbegin(), *calendars(s->val).rbegin());
            CHECK(max_fit < *calendars(s->test).begin());
            CHECK(s->train.size() + s->val.size() == upper_cells(s->dim).size());
            check_sequential_validation(*s);
        }
    }
}

TEST_CASE("P2 of a 40-triangle tests on calendar periods 33 to 36") {
    const auto [p1, p2] = rolling_origin(40);
    CHECK(calendars(p2.test) == std::set<int>{33, 34, 35, 36});
    CHECK(p2.test.size() == 33u + 34u + 35u + 36u);
    for (const auto c : p2.train) CHECK(calendar_period(c) <= 32);
    for (const auto c : p2.val) CHECK(calendar_period(c) <= 32);
    CHECK(calendars(p1.test) == std::set<int>{31, 32, 33, 34, 35, 36, 37, 38, 39, 40});
    for (const auto c : p1.train) CHECK(calendar_period(c) <= 30);
    for (const auto c : p1.val) CHECK(calendar_period(c) <= 30);
}

TEST_CASE("final-fit split covers the upper triangle") {
    const auto s = final_fit_split(40);
    CHECK(s.name == "P3");
    CHECK(s.test.empty());
    CHECK(s.train.size() + s.val.size() == 820u);
    CHECK(has(s.train, Cell{40, 1}));
    std::set<int> late;
    for (const auto c : s.val)
        if (c.j > 3) late.insert(calendar_period(c));
    CHECK(late == std::set<int>{37, 38, 39, 40});
    check_sequential_validation(s);
}

TEST_CASE("adjusted partitions") {
    const auto splits = adjusted_partitions(40, 99);
    REQUIRE(splits.size() == 4u);
    for (const auto& s : splits) {
        CHECK_NOTHROW(s.check());
        CHECK(s.val.size() == 82u);
        CHECK(s.train.size() + s.val.size() + s.test.size() == 820u);
        int late_val = 0;
        for (const auto c : s.val) late_val += calendar_period(c) > 29;
        CHECK(late_val >= 41);
    }
    for (int k : {0, 1}) {
        CHECK(splits[k].test.size() == 82u);
        for (const auto c : splits[k].test) CHECK(calendar_period(c) > 29);
    }
    CHECK(splits[2].test.empty());
    CHECK(splits[3].test.empty());
    for (const auto c : splits[0].test) CHECK_FALSE(has(splits[1].test, c));
    CHECK(splits[2].val != splits[3].val);

    const auto again = adjusted_partitions(40, 99);
    for (int k = 0; k < 4; ++k) {
        CHECK(again[k].train == splits[k].train);
        CHECK(again[k].val == splits[k].val);
        CHECK(again[k].test == splits[k].test);
    }
    CHECK(adjusted_partitions(40, 100)[0].test != splits[0].test);
}

TEST_CASE("ten percent rounds to nearest with a floor of one") {
    CHECK(ten_percent(820) == 82);
    CHECK(ten_percent(666) == 67);
    CHECK(ten_percent(4) == 1);
    CHECK(ten_percent(15) == 2);
}

TEST_CASE("partition size limits") {
    CHECK_THROWS_AS(rolling_origin(19), InputError);
    CHECK_THROWS_AS(final_fit_split(11), InputError);
    CHECK_THROWS_AS(adjusted_partitions(19, 1), InputError);
    CHECK_THROWS_AS(sequential_validation(7), InputError);
}

TEST_CASE("split invariants are enforced") {
    DataSplit s{"X", 10, 10, {{1, 1}, {2, 2}}, {{1, 2}}, {}};
    CHECK_NOTHROW(s.check());
    s.val.push_back({1, 1});
    CHECK_THROWS_AS(s.check(), ModelError);
    s.val = {{10, 10}};
    CHECK_THROWS_AS(s.check(), ModelError);
    s.val.clear();
    CHECK_THROWS_AS(s.check(), ModelError);
}

TEST_CASE("split CSV lists every assignment") {
    testutil::TempDir dir("partition");
    const auto [p1, p2] = rolling_origin(20);
    save_splits(dir / "s.csv", {p1, p2});
    const auto t = csv::read(dir / "s.csv");
    CHECK(t.header == std::vector<std::string>{"accident", "development", "split", "set"});
    CHECK(t.rows.size() == upper_cells(20).size() + upper_cells(16).size());
}

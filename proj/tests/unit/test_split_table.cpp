#include "test_support.hpp"

#include <gsopt/core/errors.hpp>
#include <gsopt/densify/split_table.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace gsopt;
using gsopt::testkit::simpson_split_residual;

namespace {

const SplitTable &composited_table() {
    static const SplitTable table = learn_split_table();
    return table;
}

/// Additive mixture optimum for one size scale: o_c = o <m, s> / <s, s> with unit mother opacity.
struct AdditiveFit {
    double k;
    double ratio;  // o_c / o
};

AdditiveFit additive_closed_form() {
    AdditiveFit best{0.0, 0.0};
    double best_res = 1e300;
    for (int i = 1; i <= 1500; ++i) {
        const double k = i * 1e-3;
        // With o = 1 the residual is quadratic in o_c: res(o_c) = a - 2 b o_c + c o_c^2.
        const double a = simpson_split_residual(1.0, k, 0.0, false);
        const double r1 = simpson_split_residual(1.0, k, 1.0, false);
        const double r2 = simpson_split_residual(1.0, k, 2.0, false);
        const double c = 0.5 * (r2 - 2.0 * r1 + a);
        const double b = 0.5 * (c + a - r1);
        const double ratio = b / c;
        const double res = a - b * b / c;
        if (res < best_res) {
            best_res = res;
            best = {k, ratio};
        }
    }
    return best;
}

} // namespace

TEST(SplitTable, ShapeAndRanges) {
    const SplitTable &t = composited_table();
    ASSERT_EQ(t.size(), 64u);
    EXPECT_NEAR(t.opacity_grid.front(), 1e-3, 1e-15);
    EXPECT_NEAR(t.opacity_grid.back(), 0.999, 1e-12);
    EXPECT_NO_THROW(t.validate());
}

TEST(SplitTable, NeverWorseThanNaiveSplit) {
    const SplitTable &t = composited_table();
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double o = t.opacity_grid[i];
        const double learned = simpson_split_residual(o, t.size_scale[i], t.child_opacity[i], true);
        const double naive = simpson_split_residual(o, 1.0 / 1.6, o, true);
        EXPECT_LE(learned, naive * (1.0 + 1e-9)) << "opacity " << o;
    }
}

TEST(SplitTable, LibraryResidualAgreesWithSimpson) {
    for (const double o : {0.01, 0.4, 0.95}) {
        for (const double k : {0.5, 0.8, 1.2}) {
            const double lib = split_residual(o, k, 0.6 * o);
            const double ref = simpson_split_residual(o, k, 0.6 * o, true);
            EXPECT_NEAR(lib, ref, 1e-9 * (1.0 + ref));
        }
    }
}

TEST(SplitTable, LowOpacityLimitMatchesAdditiveLeastSquares) {
    const AdditiveFit fit = additive_closed_form();
    const SplitTable &t = composited_table();
    EXPECT_NEAR(t.size_scale.front(), fit.k, 0.01);
    EXPECT_NEAR(t.child_opacity.front() / t.opacity_grid.front(), fit.ratio, 0.01 * fit.ratio);

    SplitTableSettings s;
    s.objective = SplitObjective::kAdditive;
    s.grid_size = 4;
    const SplitTable additive = learn_split_table(s);
    for (std::size_t i = 0; i < additive.size(); ++i) {
        EXPECT_NEAR(additive.size_scale[i], fit.k, 2e-3);
        EXPECT_NEAR(additive.child_opacity[i] / additive.opacity_grid[i], fit.ratio, 1e-3 * fit.ratio);
    }
}

TEST(SplitTable, ZeroOpacityGivesZeroChildren) {
    EXPECT_EQ(composited_table().lookup(0.0).child_opacity, 0.0);
}

TEST(SplitTable, LookupInterpolatesLinearly) {
    const SplitTable &t = composited_table();
    const double mid = 0.5 * (t.opacity_grid[10] + t.opacity_grid[11]);
    const auto e = t.lookup(mid);
    EXPECT_NEAR(e.size_scale, 0.5 * (t.size_scale[10] + t.size_scale[11]), 1e-14);
    EXPECT_NEAR(e.child_opacity, 0.5 * (t.child_opacity[10] + t.child_opacity[11]), 1e-14);
    EXPECT_EQ(t.lookup(1.0).child_opacity, t.child_opacity.back());
}

TEST(SplitTable, CsvRoundTripIsBitExact) {
    const auto path = std::filesystem::temp_directory_path() / "gsopt_split_table.csv";
    save_split_table_csv(composited_table(), path.string());
    EXPECT_EQ(load_split_table_csv(path.string()), composited_table());
    std::filesystem::remove(path);
}

TEST(SplitTable, ValidateRejectsBadEntries) {
    SplitTable t = composited_table();
    t.size_scale[3] = 1.6;
    EXPECT_THROW(t.validate(), InvalidParameter);
    t = composited_table();
    std::swap(t.opacity_grid[1], t.opacity_grid[2]);
    EXPECT_THROW(t.validate(), InvalidParameter);
    t = composited_table();
    t.child_opacity.pop_back();
    EXPECT_THROW(t.validate(), InvalidParameter);
}

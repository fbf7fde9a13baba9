#pragma once

#include <string>
#include <vector>

namespace gsopt {

/// How child Gaussians are fitted to their mother's 1D alpha profile.
enum class SplitObjective {
    /// 1 - (1 - a+)(1 - a-): what the rasterizer composites.
    kComposited,
    /// a+ + a-: additive mixture.
    kAdditive,
};

/// Offline fit of child (size scale, opacity) as a function of mother opacity.
///
/// Children sit at +-shift * sigma along the split axis of a unit-size mother; their size along
/// that axis is size_scale * sigma. The table depends on opacity only.
struct SplitTable {
    std::vector<double> opacity_grid;
    std::vector<double> size_scale;
    std::vector<double> child_opacity;

    struct Entry {
        double size_scale;
        double child_opacity;
    };

    std::size_t size() const { return opacity_grid.size(); }

    /// Linear interpolation in opacity. Below the first node the child opacity scales
    /// proportionally to the mother opacity; above the last node the last entry is used.
    Entry lookup(double opacity) const;

    /// Throws InvalidParameter unless the grid is ascending and entries are in range.
    void validate() const;

    friend bool operator==(const SplitTable &, const SplitTable &) = default;
};

struct SplitTableSettings {
    double shift = 0.3;
    int grid_size = 64;
    double min_opacity = 1e-3;
    double max_opacity = 0.999;
    SplitObjective objective = SplitObjective::kComposited;
    double x_extent = 6.0;
    double dx = 0.01;
    double max_size_scale = 1.5;
};

/// Integrated squared difference between the mother alpha o e^{-x^2/2} and the children's alpha on
/// [-x_extent, x_extent] (trapezoid rule).
double split_residual(double mother_opacity, double size_scale, double child_opacity,
                      const SplitTableSettings &settings = {});

/// Grid search over the size scale with the child opacity solved exactly per scale, followed by
/// coordinate refinement. Nodes are log-spaced in [min_opacity, max_opacity].
SplitTable learn_split_table(const SplitTableSettings &settings = {});

/// CSV with header "opacity,size_scale,child_opacity" and shortest round-trip decimal values.
void save_split_table_csv(const SplitTable &table, const std::string &path);
SplitTable load_split_table_csv(const std::string &path);

} // namespace gsopt

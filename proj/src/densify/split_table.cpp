#include <gsopt/core/errors.hpp>
#include <gsopt/densify/split_table.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <string_view>

namespace gsopt {

namespace {

/// Integrals of products of the mother profile m, the child sum s = e+ + e- and the child product
/// p = e+ e-, for one size scale. The residual is a quartic in the child opacity with these moments.
struct SplitMoments {
    double mm = 0.0, ms = 0.0, mp = 0.0, ss = 0.0, sp = 0.0, pp = 0.0;
};

SplitMoments split_moments(double size_scale, const SplitTableSettings &s) {
    SplitMoments m;
    const int steps = static_cast<int>(std::lround(2.0 * s.x_extent / s.dx));
    const double inv_2k2 = 1.0 / (2.0 * size_scale * size_scale);
    for (int i = 0; i <= steps; ++i) {
        const double x = -s.x_extent + i * s.dx;
        const double w = (i == 0 || i == steps) ? 0.5 * s.dx : s.dx;
        const double em = std::exp(-0.5 * x * x);
        const double ep = std::exp(-(x - s.shift) * (x - s.shift) * inv_2k2);
        const double en = std::exp(-(x + s.shift) * (x + s.shift) * inv_2k2);
        const double sum = ep + en;
        const double prod = ep * en;
        m.mm += w * em * em;
        m.ms += w * em * sum;
        m.mp += w * em * prod;
        m.ss += w * sum * sum;
        m.sp += w * sum * prod;
        m.pp += w * prod * prod;
    }
    return m;
}

double residual_from_moments(const SplitMoments &m, double o, double oc, SplitObjective objective) {
    double f = o * o * m.mm - 2.0 * o * oc * m.ms + oc * oc * m.ss;
    if (objective == SplitObjective::kComposited) {
        f += 2.0 * o * oc * oc * m.mp - 2.0 * oc * oc * oc * m.sp + oc * oc * oc * oc * m.pp;
    }
    return std::max(f, 0.0);
}

template <typename F>
double golden_section(F &&f, double lo, double hi, int iterations) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < iterations; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? c : d;
}

constexpr double kMinChildOpacity = 1e-12;
constexpr double kMaxChildOpacity = 1.0 - 1e-9;

/// Best child opacity for fixed moments: dense scan of [0, 1) then golden refinement.
double best_child_opacity(const SplitMoments &m, double o, SplitObjective objective) {
    if (objective == SplitObjective::kAdditive) {
        return std::clamp(o * m.ms / m.ss, kMinChildOpacity, kMaxChildOpacity);
    }
    constexpr int kSamples = 400;
    double best = kMinChildOpacity;
    double best_f = residual_from_moments(m, o, best, objective);
    for (int i = 1; i <= kSamples; ++i) {
        const double oc = std::min(kMaxChildOpacity, static_cast<double>(i) / kSamples);
        const double f = residual_from_moments(m, o, oc, objective);
        if (f < best_f) {
            best_f = f;
            best = oc;
        }
    }
    const double step = 1.0 / kSamples;
    const double lo = std::max(kMinChildOpacity, best - step);
    const double hi = std::min(kMaxChildOpacity, best + step);
    const double refined =
        golden_section([&](double oc) { return residual_from_moments(m, o, oc, objective); }, lo, hi, 80);
    return residual_from_moments(m, o, refined, objective) <= best_f ? refined : best;
}

struct Fit {
    double size_scale;
    double child_opacity;
    double residual;
};

Fit fit_at(const SplitMoments &m, double size_scale, double o, SplitObjective objective) {
    const double oc = best_child_opacity(m, o, objective);
    return {size_scale, oc, residual_from_moments(m, o, oc, objective)};
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text, int line) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw FormatError("split table CSV: bad number '" + std::string(text) + "' on line " + std::to_string(line));
    }
    return v;
}

} // namespace

double split_residual(double mother_opacity, double size_scale, double child_opacity,
                      const SplitTableSettings &settings) {
    if (!(size_scale > 0.0)) {
        throw InvalidParameter("split_residual: size scale must be positive");
    }
    return residual_from_moments(split_moments(size_scale, settings), mother_opacity, child_opacity,
                                 settings.objective);
}

SplitTable learn_split_table(const SplitTableSettings &s) {
    if (s.grid_size < 2 || !(s.min_opacity > 0.0) || !(s.max_opacity < 1.0) || !(s.min_opacity < s.max_opacity)) {
        throw InvalidParameter("learn_split_table: invalid opacity grid settings");
    }
    // Size-scale grid; moments do not depend on opacity so they are shared by all nodes.
    constexpr double kScaleStep = 0.01;
    const int scale_count = static_cast<int>(std::floor(s.max_size_scale / kScaleStep + 1e-9));
    std::vector<double> scales;
    for (int i = 1; i <= scale_count; ++i) {
        scales.push_back(i * kScaleStep);
    }
    // The classic 3DGS child size (1/1.6) is always a candidate.
    scales.push_back(1.0 / 1.6);
    std::vector<SplitMoments> moments;
    moments.reserve(scales.size());
    for (const double k : scales) {
        moments.push_back(split_moments(k, s));
    }

    SplitTable table;
    const double log_lo = std::log(s.min_opacity);
    const double log_hi = std::log(s.max_opacity);
    for (int node = 0; node < s.grid_size; ++node) {
        const double o = std::exp(log_lo + (log_hi - log_lo) * node / (s.grid_size - 1));

        Fit best{scales[0], 0.0, std::numeric_limits<double>::infinity()};
        for (std::size_t j = 0; j < scales.size(); ++j) {
            const Fit f = fit_at(moments[j], scales[j], o, s.objective);
            if (f.residual < best.residual) {
                best = f;
            }
        }

        // Coordinate refinement of the size scale around the grid optimum, child opacity re-solved.
        const double lo = std::max(1e-3, best.size_scale - kScaleStep);
        const double hi = std::min(s.max_size_scale, best.size_scale + kScaleStep);
        const double k = golden_section(
            [&](double scale) { return fit_at(split_moments(scale, s), scale, o, s.objective).residual; }, lo, hi,
            40);
        const Fit refined = fit_at(split_moments(k, s), k, o, s.objective);
        if (refined.residual < best.residual) {
            best = refined;
        }

        table.opacity_grid.push_back(o);
        table.size_scale.push_back(best.size_scale);
        table.child_opacity.push_back(best.child_opacity);
    }
    return table;
}

SplitTable::Entry SplitTable::lookup(double opacity) const {
    if (opacity_grid.empty()) {
        throw InvalidParameter("SplitTable::lookup: empty table");
    }
    if (!(opacity > 0.0)) {
        return {size_scale.front(), 0.0};
    }
    if (opacity <= opacity_grid.front()) {
        return {size_scale.front(), child_opacity.front() * opacity / opacity_grid.front()};
    }
    if (opacity >= opacity_grid.back()) {
        return {size_scale.back(), child_opacity.back()};
    }
    const auto it = std::upper_bound(opacity_grid.begin(), opacity_grid.end(), opacity);
    const std::size_t hi = static_cast<std::size_t>(it - opacity_grid.begin());
    const std::size_t lo = hi - 1;
    const double t = (opacity - opacity_grid[lo]) / (opacity_grid[hi] - opacity_grid[lo]);
    return {size_scale[lo] + t * (size_scale[hi] - size_scale[lo]),
            child_opacity[lo] + t * (child_opacity[hi] - child_opacity[lo])};
}

void SplitTable::validate() const {
    if (opacity_grid.empty() || size_scale.size() != opacity_grid.size() ||
        child_opacity.size() != opacity_grid.size()) {
        throw InvalidParameter("SplitTable: columns must be non-empty and of equal length");
    }
    for (std::size_t i = 0; i < size(); ++i) {
        if (!(opacity_grid[i] > 0.0 && opacity_grid[i] <= 1.0)) {
            throw InvalidParameter("SplitTable: opacity node outside (0, 1]");
        }
        if (i > 0 && !(opacity_grid[i] > opacity_grid[i - 1])) {
            throw InvalidParameter("SplitTable: opacity grid must be strictly ascending");
        }
        if (!(size_scale[i] > 0.0 && size_scale[i] <= 1.5)) {
            throw InvalidParameter("SplitTable: size scale outside (0, 1.5]");
        }
        if (!(child_opacity[i] > 0.0 && child_opacity[i] < 1.0)) {
            throw InvalidParameter("SplitTable: child opacity outside (0, 1)");
        }
    }
}

void save_split_table_csv(const SplitTable &table, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    out << "opacity,size_scale,child_opacity\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << format_double(table.opacity_grid[i]) << ',' << format_double(table.size_scale[i]) << ','
            << format_double(table.child_opacity[i]) << '\n';
    }
    if (!out) {
        throw FormatError("failed writing '" + path + "'");
    }
}

SplitTable load_split_table_csv(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line) || line != "opacity,size_scale,child_opacity") {
        throw FormatError("split table CSV: missing header in '" + path + "'");
    }
    SplitTable table;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::array<std::string_view, 3> fields;
        std::string_view rest = line;
        for (int f = 0; f < 3; ++f) {
            const auto comma = rest.find(',');
            if ((f < 2) != (comma != std::string_view::npos)) {
                throw FormatError("split table CSV: expected 3 fields on line " + std::to_string(line_no));
            }
            fields[f] = rest.substr(0, comma);
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        }
        table.opacity_grid.push_back(parse_double(fields[0], line_no));
        table.size_scale.push_back(parse_double(fields[1], line_no));
        table.child_opacity.push_back(parse_double(fields[2], line_no));
    }
    table.validate();
    return table;
}

} // namespace gsopt

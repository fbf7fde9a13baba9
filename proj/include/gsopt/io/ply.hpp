#pragma once

#include <gsopt/core/types.hpp>

#include <string>

namespace gsopt {

/// Binary little-endian PLY in the layout used by 3DGS viewers: x y z nx ny nz f_dc_0..2 f_rest_*
/// opacity scale_0..2 rot_0..3. Scales are stored as log sizes and opacity as its logit.
void save_ply(const GaussianCloud &cloud, const std::string &path);

/// Accepts float or double properties in any order; the SH degree follows from the f_rest count.
GaussianCloud load_ply(const std::string &path);

} // namespace gsopt

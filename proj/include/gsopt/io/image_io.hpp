#pragma once

#include <gsopt/core/types.hpp>

#include <string>

namespace gsopt {

inline constexpr double kDisplayGamma = 2.2;

/// Linear [0, 1] to display-encoded value (gamma 2.2 approximation of sRGB), clamped.
double linear_to_encoded(double v);
double encoded_to_linear(double v);

/// 8-bit RGB PNG. Saved images are clamped to [0, 1] and gamma-encoded; loaded ones are decoded to linear.
void save_png(const Image &image, const std::string &path);
Image load_png(const std::string &path);

/// What save_png followed by load_png returns, without touching the filesystem.
Image png_round_trip(const Image &image);

} // namespace gsopt

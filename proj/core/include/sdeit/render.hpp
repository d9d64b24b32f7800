#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "sdeit/mesh.hpp"

namespace sdeit {

/// Fixed perceptual colormap (viridis control points, linear in between).
std::array<std::uint8_t, 3> colormap(double t);

/// Writes an 8-bit RGB PNG; values are mapped linearly from [lo, hi] and
/// clamped. The range is stored in a "sdeit:range" tEXt chunk. Pixels with
/// mask = 0 are drawn white when `blank_outside` is set.
void write_png(const GridImage& img, const std::filesystem::path& path, double lo, double hi,
               bool blank_outside = false);

}  // namespace sdeit

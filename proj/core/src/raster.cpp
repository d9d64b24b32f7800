#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sdeit/mesh.hpp"

namespace sdeit {
namespace {

constexpr double kInsideTol = 1e-12;

// Visits every (pixel, triangle, barycentric weights) where the pixel centre
// lies in the triangle. First hit wins.
template <typename Visit>
void scan_triangles(const Mesh& mesh, int width, int height, Visit&& visit) {
  if (width < 2 || height < 2) throw std::invalid_argument("raster needs width, height >= 2");
  const auto norm = normalization_for(mesh);
  std::vector<Point> unit(mesh.nodes.size());
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) unit[i] = norm.to_unit(mesh.nodes[i]);

  std::vector<std::uint8_t> taken(std::size_t(width) * height, 0);
  for (std::size_t t = 0; t < mesh.elements.size(); ++t) {
    const auto& tri = mesh.elements[t];
    const Point& a = unit[tri[0]];
    const Point& b = unit[tri[1]];
    const Point& c = unit[tri[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    if (det == 0.0) continue;

    const double lo_x = std::min({a.x, b.x, c.x}), hi_x = std::max({a.x, b.x, c.x});
    const double lo_y = std::min({a.y, b.y, c.y}), hi_y = std::max({a.y, b.y, c.y});
    const int c0 = std::max(0, int(std::floor((lo_x + 1.0) * width / 2.0 - 0.5)));
    const int c1 = std::min(width - 1, int(std::ceil((hi_x + 1.0) * width / 2.0 - 0.5)));
    const int r0 = std::max(0, int(std::floor((1.0 - hi_y) * height / 2.0 - 0.5)));
    const int r1 = std::min(height - 1, int(std::ceil((1.0 - lo_y) * height / 2.0 - 0.5)));

    for (int r = r0; r <= r1; ++r) {
      const double y = 1.0 - (2.0 * r + 1.0) / height;
      for (int col = c0; col <= c1; ++col) {
        const std::size_t idx = std::size_t(r) * width + col;
        if (taken[idx]) continue;
        const double x = -1.0 + (2.0 * col + 1.0) / width;
        const double l1 = ((x - a.x) * (c.y - a.y) - (c.x - a.x) * (y - a.y)) / det;
        const double l2 = ((b.x - a.x) * (y - a.y) - (x - a.x) * (b.y - a.y)) / det;
        const double l0 = 1.0 - l1 - l2;
        if (l0 < -kInsideTol || l1 < -kInsideTol || l2 < -kInsideTol) continue;
        taken[idx] = 1;
        visit(idx, tri, l0, l1, l2);
      }
    }
  }
}

}  // namespace

GridImage rasterize_field(const Mesh& mesh, std::span<const double> field, int width,
                          int height, double background) {
  if (field.size() != mesh.node_count()) {
    throw std::invalid_argument("field length does not match mesh node count");
  }
  GridImage img(width, height, background);
  std::fill(img.mask.begin(), img.mask.end(), 0);
  scan_triangles(mesh, width, height,
                 [&](std::size_t idx, const Triangle& tri, double l0, double l1, double l2) {
                   img.values[idx] = l0 * field[tri[0]] + l1 * field[tri[1]] + l2 * field[tri[2]];
                   img.mask[idx] = 1;
                 });
  const auto [mn, mx] = std::minmax_element(img.values.begin(), img.values.end());
  img.lo = *mn;
  img.hi = *mx;
  return img;
}

std::vector<std::uint8_t> domain_mask(const Mesh& mesh, int width, int height) {
  std::vector<std::uint8_t> mask(std::size_t(width) * height, 0);
  scan_triangles(mesh, width, height,
                 [&](std::size_t idx, const Triangle&, double, double, double) { mask[idx] = 1; });
  return mask;
}

}  // namespace sdeit

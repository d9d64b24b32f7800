#include "sdeit/phantom.hpp"

#include <algorithm>
#include <cmath>

namespace sdeit {

bool Ellipse::contains(Point p) const {
  const double c = std::cos(angle), s = std::sin(angle);
  const double dx = p.x - cx, dy = p.y - cy;
  const double u = (c * dx + s * dy) / semi_x;
  const double v = (-s * dx + c * dy) / semi_y;
  return u * u + v * v <= 1.0;
}

double Phantom::value_at(Point p) const {
  double v = background;
  for (const auto& e : inclusions) {
    if (e.contains(p)) v = e.value;
  }
  return v;
}

Phantom lungs_heart_phantom(double radius, double background, double lung, double heart) {
  const double k = radius / 14.0;
  Phantom ph;
  ph.background = background;
  ph.inclusions.push_back({-6.0 * k, 1.5 * k, 3.2 * k, 5.5 * k, -0.15, lung});
  ph.inclusions.push_back({6.0 * k, 1.5 * k, 3.2 * k, 5.5 * k, 0.15, lung});
  ph.inclusions.push_back({0.0, -4.5 * k, 2.8 * k, 2.8 * k, 0.0, heart});
  return ph;
}

ConductivityField sample_nodes(const Mesh& mesh, const Phantom& phantom) {
  ConductivityField f;
  f.values.resize(Eigen::Index(mesh.node_count()));
  for (std::size_t i = 0; i < mesh.node_count(); ++i) f.values[Eigen::Index(i)] = phantom.value_at(mesh.nodes[i]);
  return f;
}

GridImage phantom_raster(const Mesh& mesh, const Phantom& phantom, int width, int height) {
  const auto norm = normalization_for(mesh);
  const auto coords = grid_coords(width, height);
  GridImage img(width, height, phantom.background);
  img.mask = domain_mask(mesh, width, height);
  for (std::size_t i = 0; i < coords.points.size(); ++i) {
    if (img.mask[i]) img.values[i] = phantom.value_at(norm.to_physical(coords.points[i]));
  }
  const auto [mn, mx] = std::minmax_element(img.values.begin(), img.values.end());
  img.lo = *mn;
  img.hi = *mx;
  return img;
}

}  // namespace sdeit

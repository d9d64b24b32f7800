#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "sdeit/mesh.hpp"
#include "sdeit/phantom.hpp"
#include "support.hpp"

using namespace sdeit;

namespace {

double max_boundary_edge(const Mesh& m) {
  double h = 0.0;
  for (const auto& group : m.electrodes) {
    for (const auto& e : group) {
      const Point a = m.nodes[e[0]], b = m.nodes[e[1]];
      h = std::max(h, std::hypot(a.x - b.x, a.y - b.y));
    }
  }
  return h;
}

double coverage(const Mesh& m, double radius) {
  double total = 0.0;
  for (std::size_t q = 0; q < m.electrode_count(); ++q) total += electrode_length(m, q);
  return total / (2.0 * std::numbers::pi * radius);
}

}  // namespace

TEST(Mesh, DiskMeshMeetsLayout) {
  const Mesh m = make_disk_mesh(14.0, 16, 2.5, 2176);
  EXPECT_EQ(m.electrode_count(), 16u);
  EXPECT_EQ(m.domain_kind, DomainKind::disk);
  EXPECT_NEAR(double(m.element_count()), 2176.0, 0.2 * 2176.0);
  const double h = max_boundary_edge(m);
  for (std::size_t q = 0; q < 16; ++q) EXPECT_NEAR(electrode_length(m, q), 2.5, h);

  std::set<Edge> seen;
  for (const auto& group : m.electrodes) {
    for (auto e : group) {
      if (e[0] > e[1]) std::swap(e[0], e[1]);
      EXPECT_TRUE(seen.insert(e).second);
    }
  }
}

TEST(Mesh, TinyDiskIsValid) {
  Mesh m = make_disk_mesh(1.0, 2, 0.5, 50);
  EXPECT_EQ(m.electrode_count(), 2u);
  EXPECT_NO_THROW(validate_mesh(m));
}

TEST(Mesh, CoverageFollowsElectrodeWidth) {
  const Mesh wide = make_disk_mesh(14.0, 16, 3.0, 2176);
  const Mesh narrow = make_disk_mesh(14.0, 16, 2.5, 2176);
  const double circ = 2.0 * std::numbers::pi * 14.0;
  EXPECT_NEAR(coverage(wide, 14.0), 48.0 / circ, 16.0 * max_boundary_edge(wide) / circ);
  EXPECT_NEAR(coverage(narrow, 14.0), 40.0 / circ, 16.0 * max_boundary_edge(narrow) / circ);
  EXPECT_GT(coverage(wide, 14.0), coverage(narrow, 14.0));
}

TEST(Mesh, ElectrodesAreCentredAtTheirAngles) {
  const Mesh m = make_disk_mesh(14.0, 16, 2.5, 2176);
  const double w = 2.5 / (2.0 * std::numbers::pi * 14.0 / 16.0);
  for (std::size_t q = 0; q < 16; ++q) {
    double sx = 0.0, sy = 0.0, len = 0.0;
    for (const auto& e : m.electrodes[q]) {
      const Point a = m.nodes[e[0]], b = m.nodes[e[1]];
      const double l = std::hypot(a.x - b.x, a.y - b.y);
      sx += 0.5 * (a.x + b.x) * l;
      sy += 0.5 * (a.y + b.y) * l;
      len += l;
    }
    const double expected = 2.0 * std::numbers::pi * (double(q) + w / 2.0) / 16.0;
    const double got = std::atan2(sy, sx);
    EXPECT_NEAR(std::remainder(got - expected, 2.0 * std::numbers::pi), 0.0, 0.05);
  }
}

TEST(Mesh, InfeasibleLayoutThrows) {
  try {
    make_disk_mesh(1.0, 16, 1.0, 200);
    FAIL() << "expected a layout error";
  } catch (const MeshError& e) {
    EXPECT_EQ(e.kind(), MeshError::Kind::layout);
  }
}

TEST(Mesh, SaveLoadRoundTrip) {
  test::TempDir dir("mesh");
  const Mesh m = make_disk_mesh(14.0, 16, 2.5, 600);
  save_mesh(m, dir.path / "m.json");
  const Mesh back = load_mesh(dir.path / "m.json");
  EXPECT_EQ(m, back);
}

TEST(Mesh, OutOfRangeTriangleIsNamed) {
  Mesh m = make_disk_mesh(1.0, 2, 0.5, 50);
  m.elements[3][1] = int(m.node_count()) + 5;
  try {
    validate_mesh(m);
    FAIL() << "expected an invariant error";
  } catch (const MeshError& e) {
    EXPECT_EQ(e.kind(), MeshError::Kind::invariant);
    EXPECT_NE(std::string(e.what()).find("triangle 3"), std::string::npos);
  }
}

TEST(Mesh, SharedElectrodeEdgeIsRejected) {
  Mesh m = make_disk_mesh(1.0, 2, 0.5, 50);
  m.electrodes[1].push_back(m.electrodes[0].front());
  try {
    validate_mesh(m);
    FAIL() << "expected an invariant error";
  } catch (const MeshError& e) {
    EXPECT_EQ(e.kind(), MeshError::Kind::invariant);
    EXPECT_NE(std::string(e.what()).find("disjoint"), std::string::npos);
  }
}

TEST(Mesh, InteriorElectrodeEdgeIsRejected) {
  Mesh m = make_disk_mesh(1.0, 2, 0.5, 50);
  const auto& t = m.elements.front();  // touches the centre node
  m.electrodes[0].push_back({t[0], t[1]});
  EXPECT_THROW(validate_mesh(m), MeshError);
}

TEST(Mesh, DegenerateTriangleIsRejected) {
  Mesh m = test::unit_square_mesh(2);
  m.nodes.push_back({0.5, 0.0});
  m.elements.push_back({0, 1, int(m.node_count()) - 1});
  try {
    validate_mesh(m);
    FAIL();
  } catch (const MeshError& e) {
    EXPECT_EQ(e.kind(), MeshError::Kind::degenerate);
  }
}

TEST(Mesh, ClockwiseTrianglesAreFlipped) {
  Mesh m = test::unit_square_mesh(3);
  std::swap(m.elements[4][1], m.elements[4][2]);
  validate_mesh(m);
  const auto g = compute_geometry(m);
  for (double a : g.area) EXPECT_GT(a, 0.0);
  double total = 0.0;
  for (double a : g.area) total += a;
  EXPECT_NEAR(total, 1.0, 1e-14);
}

TEST(Mesh, HatGradientsSumToZero) {
  const Mesh m = make_disk_mesh(14.0, 16, 2.5, 300);
  const auto g = compute_geometry(m);
  for (std::size_t e = 0; e < g.size(); ++e) {
    const Eigen::Vector2d s = g.grad[e][0] + g.grad[e][1] + g.grad[e][2];
    EXPECT_LT(s.norm(), 1e-12);
  }
}

TEST(Mesh, NormalizationIsIsotropic) {
  Mesh m = test::unit_square_mesh(2);
  for (auto& p : m.nodes) p = {3.0 + 4.0 * p.x, -1.0 + 2.0 * p.y};
  const Normalization n = normalization_for(m);
  EXPECT_DOUBLE_EQ(n.cx, 5.0);
  EXPECT_DOUBLE_EQ(n.cy, 0.0);
  EXPECT_DOUBLE_EQ(n.half_extent, 2.0);
  for (const Point& p : normalized_nodes(m).points) {
    EXPECT_LE(std::abs(p.x), 1.0 + 1e-15);
    EXPECT_LE(std::abs(p.y), 0.5 + 1e-15);
  }
}

TEST(Mesh, GridCoordsLayout) {
  const auto g = grid_coords(4, 2);
  ASSERT_EQ(g.points.size(), 8u);
  EXPECT_EQ(g.source, CoordSource::grid);
  EXPECT_DOUBLE_EQ(g.points[0].x, -0.75);
  EXPECT_DOUBLE_EQ(g.points[0].y, 0.5);
  EXPECT_DOUBLE_EQ(g.points[7].x, 0.75);
  EXPECT_DOUBLE_EQ(g.points[7].y, -0.5);
}

TEST(Mesh, RasterReproducesLinearFields) {
  const Mesh m = make_disk_mesh(14.0, 16, 2.5, 1000);
  std::vector<double> f(m.node_count());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 2.0 + 0.3 * m.nodes[i].x - 0.1 * m.nodes[i].y;
  const GridImage img = rasterize_field(m, f, 40, 40, -7.0);
  const auto norm = normalization_for(m);
  const auto coords = grid_coords(40, 40);
  int inside = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!img.mask[i]) {
      EXPECT_EQ(img.values[i], -7.0);
      continue;
    }
    ++inside;
    const Point p = norm.to_physical(coords.points[i]);
    EXPECT_NEAR(img.values[i], 2.0 + 0.3 * p.x - 0.1 * p.y, 1e-12);
  }
  // ring mesh polygon area over the bounding square
  EXPECT_NEAR(double(inside) / 1600.0, std::numbers::pi / 4.0, 0.03);
}

TEST(Mesh, RasterOfConstantAndMonotoneFields) {
  const Mesh m = make_disk_mesh(14.0, 16, 2.5, 600);
  const std::vector<double> c(m.node_count(), 3.5);
  const GridImage img = rasterize_field(m, c, 16, 16, 0.0);
  EXPECT_EQ(img.mask, domain_mask(m, 16, 16));
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (img.mask[i]) EXPECT_NEAR(img.values[i], 3.5, 1e-13);
  }
  std::vector<double> xs(m.node_count());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = m.nodes[i].x;
  const GridImage gx = rasterize_field(m, xs, 16, 16, 0.0);
  for (int r = 0; r < 16; ++r) {
    for (int col = 1; col < 16; ++col) {
      const std::size_t a = std::size_t(r) * 16 + col - 1, b = a + 1;
      if (gx.mask[a] && gx.mask[b]) EXPECT_GT(gx.values[b], gx.values[a]);
    }
  }
}

TEST(Mesh, RasterRejectsBadInput) {
  const Mesh m = make_disk_mesh(1.0, 2, 0.5, 50);
  EXPECT_THROW(rasterize_field(m, std::vector<double>(3, 1.0), 8, 8, 0.0), std::invalid_argument);
}

TEST(Phantom, RasterHistogramMatchesRegionAreas) {
  const Mesh m = make_disk_mesh(14.0, 16, 2.5, 2176);
  const Phantom ph = lungs_heart_phantom(14.0);
  const GridImage img = phantom_raster(m, ph, 128, 128);
  std::map<double, int> hist;
  int inside = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!img.mask[i]) continue;
    ++hist[img.values[i]];
    ++inside;
  }
  ASSERT_EQ(hist.size(), 3u);
  const double pixel = (28.0 / 128.0) * (28.0 / 128.0);
  const double lung_area = 2.0 * std::numbers::pi * 3.2 * 5.5;
  const double heart_area = std::numbers::pi * 2.8 * 2.8;
  EXPECT_NEAR(hist[0.25] * pixel, lung_area, 0.03 * lung_area);
  EXPECT_NEAR(hist[1.5] * pixel, heart_area, 0.05 * heart_area);
  EXPECT_EQ(hist[1.0] + hist[0.25] + hist[1.5], inside);
  EXPECT_DOUBLE_EQ(img.lo, 0.25);
  EXPECT_DOUBLE_EQ(img.hi, 1.5);
}

TEST(Phantom, NodeSamplingUsesLastInclusion) {
  Phantom ph;
  ph.background = 1.0;
  ph.inclusions.push_back({0.0, 0.0, 2.0, 2.0, 0.0, 0.5});
  ph.inclusions.push_back({0.0, 0.0, 1.0, 1.0, 0.0, 3.0});
  EXPECT_EQ(ph.value_at({0.0, 0.0}), 3.0);
  EXPECT_EQ(ph.value_at({1.5, 0.0}), 0.5);
  EXPECT_EQ(ph.value_at({2.5, 0.0}), 1.0);
  const Mesh m = make_disk_mesh(3.0, 4, 0.5, 200);
  const auto f = sample_nodes(m, ph);
  for (std::size_t i = 0; i < m.node_count(); ++i) {
    EXPECT_EQ(f.values[Eigen::Index(i)], ph.value_at(m.nodes[i]));
  }
}

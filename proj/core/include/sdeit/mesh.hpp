#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sdeit {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

using Triangle = std::array<int, 3>;
using Edge = std::array<int, 2>;
using ElectrodeEdges = std::vector<Edge>;

enum class DomainKind { disk, polygon };

/// 2-D first-order triangular mesh. Coordinates in cm. Triangles are stored
/// counter-clockwise once the mesh has passed validate_mesh().
struct Mesh {
  std::vector<Point> nodes;
  std::vector<Triangle> elements;
  std::vector<ElectrodeEdges> electrodes;
  DomainKind domain_kind = DomainKind::polygon;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t element_count() const { return elements.size(); }
  std::size_t electrode_count() const { return electrodes.size(); }

  friend bool operator==(const Mesh&, const Mesh&) = default;
};

class MeshError : public std::runtime_error {
 public:
  enum class Kind { layout, parse, invariant, degenerate };
  MeshError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Checks every Mesh invariant, flipping clockwise triangles in place.
/// Throws MeshError naming the first offending triangle/electrode/edge.
void validate_mesh(Mesh& mesh);

/// Concentric-ring structured disk mesh. Electrode q is centred at angle
/// 2*pi*(q + w/2)/N_e where w is the electrode's share of one period;
/// electrode endpoints are always mesh nodes. Ring node counts are multiples
/// of n_electrodes, so the mesh is invariant under rotation by 2*pi/N_e.
Mesh make_disk_mesh(double radius, int n_electrodes, double electrode_width,
                    int target_elements);

Mesh load_mesh(const std::filesystem::path& path);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

/// Summed edge length of electrode q.
double electrode_length(const Mesh& mesh, std::size_t q);

/// Per-element P1 data: area and the constant gradients of the three hat
/// functions. Shared by assembly, sensitivity and TV.
struct ElementGeometry {
  std::vector<double> area;
  std::vector<std::array<Eigen::Vector2d, 3>> grad;

  std::size_t size() const { return area.size(); }
};

ElementGeometry compute_geometry(const Mesh& mesh);

// ---------------------------------------------------------------------------
// Normalized coordinates and raster images over [-1,1]^2.

enum class CoordSource { fe_nodes, grid };

struct NormalizedCoords {
  std::vector<Point> points;
  CoordSource source = CoordSource::fe_nodes;
  int width = 0;   // grid variant only
  int height = 0;  // grid variant only
};

/// Isotropic map of a mesh bounding box onto [-1,1]^2: centred at the box
/// centre, scaled by half the larger extent.
struct Normalization {
  double cx = 0.0;
  double cy = 0.0;
  double half_extent = 1.0;

  Point to_unit(Point p) const { return {(p.x - cx) / half_extent, (p.y - cy) / half_extent}; }
  Point to_physical(Point p) const { return {cx + p.x * half_extent, cy + p.y * half_extent}; }
};

Normalization normalization_for(const Mesh& mesh);
NormalizedCoords normalized_nodes(const Mesh& mesh);

/// Pixel centres of an H x W lattice, row-major, row 0 at y = +1.
NormalizedCoords grid_coords(int width, int height);

struct GridImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  double lo = 0.0;
  double hi = 0.0;

  GridImage() = default;
  GridImage(int w, int h, double fill = 0.0)
      : width(w), height(h), values(std::size_t(w) * h, fill), mask(std::size_t(w) * h, 1) {}

  std::size_t size() const { return values.size(); }
  double& at(int row, int col) { return values[std::size_t(row) * width + col]; }
  double at(int row, int col) const { return values[std::size_t(row) * width + col]; }

  friend bool operator==(const GridImage&, const GridImage&) = default;
};

/// Barycentric interpolation of nodal values onto the pixel lattice of the
/// mesh's normalized frame. Pixels outside the mesh take `background` and
/// have mask = 0.
GridImage rasterize_field(const Mesh& mesh, std::span<const double> field, int width,
                          int height, double background);

/// The Omega-membership mask rasterize_field would produce.
std::vector<std::uint8_t> domain_mask(const Mesh& mesh, int width, int height);

}  // namespace sdeit

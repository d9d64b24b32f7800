#include "sdeit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

namespace sdeit {
namespace {

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Edge sorted_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

[[noreturn]] void invariant_error(const std::string& msg) {
  throw MeshError(MeshError::Kind::invariant, msg);
}

// One node of a concentric ring, keyed by (period, fraction within period) so
// that ordering comparisons are identical in every electrode period.
struct RingKey {
  int period;
  double frac;
  int ring_tag;  // 0 = inner ring, 1 = outer ring
  int node;
};

bool key_less(const RingKey& a, const RingKey& b) {
  return std::tie(a.period, a.frac, a.ring_tag) < std::tie(b.period, b.frac, b.ring_tag);
}

void stitch_rings(const std::vector<RingKey>& inner, const std::vector<RingKey>& outer,
                  std::vector<Triangle>& out) {
  std::vector<RingKey> merged;
  merged.reserve(inner.size() + outer.size());
  merged.insert(merged.end(), inner.begin(), inner.end());
  merged.insert(merged.end(), outer.begin(), outer.end());
  std::sort(merged.begin(), merged.end(), key_less);

  const std::size_t len = merged.size();
  std::size_t start = 0;
  while (merged[start].ring_tag != 0) ++start;
  std::size_t back = (start + len - 1) % len;
  while (merged[back].ring_tag != 1) back = (back + len - 1) % len;

  int a = merged[start].node;
  int b = merged[back].node;
  for (std::size_t k = 1; k <= len; ++k) {
    const RingKey& next = merged[(start + k) % len];
    out.push_back({a, b, next.node});
    if (next.ring_tag == 0) {
      a = next.node;
    } else {
      b = next.node;
    }
  }
}

int ring_element_count(int n_electrodes, const std::vector<int>& per_period) {
  int count = n_electrodes * per_period[1];
  for (std::size_t i = 2; i < per_period.size(); ++i) {
    count += n_electrodes * (per_period[i - 1] + per_period[i]);
  }
  return count;
}

std::vector<int> ring_layout(int n_rings, int boundary_per_period) {
  // index 0 is the centre node (unused count), index n_rings the boundary
  std::vector<int> m(n_rings + 1, 1);
  for (int i = 1; i < n_rings; ++i) {
    m[i] = std::max(1, int(std::lround(double(boundary_per_period) * i / n_rings)));
  }
  m[n_rings] = boundary_per_period;
  return m;
}

}  // namespace

void validate_mesh(Mesh& mesh) {
  const auto n_nodes = static_cast<long>(mesh.nodes.size());
  if (n_nodes < 3) invariant_error("mesh has fewer than 3 nodes");
  if (mesh.elements.empty()) invariant_error("mesh has no elements");
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    if (!std::isfinite(mesh.nodes[i].x) || !std::isfinite(mesh.nodes[i].y)) {
      invariant_error("node " + std::to_string(i) + " has a non-finite coordinate");
    }
  }

  double min_x = mesh.nodes[0].x, max_x = min_x, min_y = mesh.nodes[0].y, max_y = min_y;
  for (const auto& p : mesh.nodes) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double extent = std::max(max_x - min_x, max_y - min_y);
  const double area_tol = 1e-14 * extent * extent;

  std::map<Edge, int> edge_use;
  for (std::size_t t = 0; t < mesh.elements.size(); ++t) {
    auto& tri = mesh.elements[t];
    for (int v : tri) {
      if (v < 0 || v >= n_nodes) {
        std::ostringstream os;
        os << "triangle " << t << " references node " << v << " but mesh has " << n_nodes
           << " nodes";
        invariant_error(os.str());
      }
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      invariant_error("triangle " + std::to_string(t) + " repeats a node");
    }
    double a = signed_area(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]);
    if (std::abs(a) <= area_tol) {
      throw MeshError(MeshError::Kind::degenerate,
                      "triangle " + std::to_string(t) + " has zero area");
    }
    if (a < 0) std::swap(tri[1], tri[2]);
    for (int k = 0; k < 3; ++k) ++edge_use[sorted_edge(tri[k], tri[(k + 1) % 3])];
  }

  if (mesh.electrodes.size() < 2) invariant_error("mesh needs at least 2 electrodes");
  std::map<Edge, std::size_t> owner;
  for (std::size_t q = 0; q < mesh.electrodes.size(); ++q) {
    if (mesh.electrodes[q].empty()) {
      invariant_error("electrode " + std::to_string(q) + " has no edges");
    }
    for (const auto& e : mesh.electrodes[q]) {
      if (e[0] < 0 || e[0] >= n_nodes || e[1] < 0 || e[1] >= n_nodes) {
        invariant_error("electrode " + std::to_string(q) + " references a node out of range");
      }
      const Edge key = sorted_edge(e[0], e[1]);
      auto it = edge_use.find(key);
      if (it == edge_use.end() || it->second != 1) {
        std::ostringstream os;
        os << "electrode " << q << " edge (" << e[0] << "," << e[1]
           << ") does not lie on the domain boundary";
        invariant_error(os.str());
      }
      auto [pos, inserted] = owner.emplace(key, q);
      if (!inserted) {
        std::ostringstream os;
        os << "electrodes " << pos->second << " and " << q << " share edge (" << e[0] << ","
           << e[1] << "); electrode groups must be disjoint";
        invariant_error(os.str());
      }
    }
  }
}

Mesh make_disk_mesh(double radius, int n_electrodes, double electrode_width,
                    int target_elements) {
  if (!(radius > 0)) throw MeshError(MeshError::Kind::layout, "radius must be positive");
  if (n_electrodes < 2) throw MeshError(MeshError::Kind::layout, "need at least 2 electrodes");
  if (!(electrode_width > 0)) {
    throw MeshError(MeshError::Kind::layout, "electrode width must be positive");
  }
  const double circumference = 2.0 * std::numbers::pi * radius;
  if (electrode_width * n_electrodes >= circumference) {
    std::ostringstream os;
    os << "electrode layout infeasible: " << n_electrodes << " x " << electrode_width
       << " cm exceeds circumference " << circumference << " cm";
    throw MeshError(MeshError::Kind::layout, os.str());
  }
  target_elements = std::max(target_elements, 2 * n_electrodes);

  // choose ring count and boundary segments per period to hit the target
  int best_rings = 1, best_per_period = 2;
  double best_score = 1e300;
  for (int rings = 1; rings <= 400; ++rings) {
    const double ideal = 2.0 * std::numbers::pi * rings / n_electrodes;
    const int centre = std::max(2, int(std::lround(ideal)));
    for (int s = std::max(2, centre - 2); s <= centre + 2; ++s) {
      auto m = ring_layout(rings, s);
      if (n_electrodes * m[1] < 3) continue;
      const int count = ring_element_count(n_electrodes, m);
      const double score = std::abs(double(count) - target_elements) / target_elements +
                           0.05 * std::abs(std::log(s / std::max(ideal, 1e-9)));
      if (score < best_score) {
        best_score = score;
        best_rings = rings;
        best_per_period = s;
      }
    }
  }

  const int rings = best_rings;
  const int s = best_per_period;
  const auto per_period = ring_layout(rings, s);
  const double period_width = circumference / n_electrodes;
  const double w_frac = electrode_width / period_width;
  const int k_e = std::clamp(int(std::lround(s * w_frac)), 1, s - 1);
  const int k_g = s - k_e;

  Mesh mesh;
  mesh.domain_kind = DomainKind::disk;
  mesh.nodes.push_back({0.0, 0.0});

  auto place = [&](int period, double frac, double r) {
    const double theta = 2.0 * std::numbers::pi * (period + frac) / n_electrodes;
    mesh.nodes.push_back({r * std::cos(theta), r * std::sin(theta)});
    return int(mesh.nodes.size()) - 1;
  };

  std::vector<std::vector<RingKey>> ring_keys(rings + 1);
  for (int i = 1; i <= rings; ++i) {
    const double r = radius * i / rings;
    for (int p = 0; p < n_electrodes; ++p) {
      if (i < rings) {
        const int m = per_period[i];
        const double off = (i % 2 == 1) ? 0.5 : 0.0;
        for (int j = 0; j < m; ++j) {
          const double f = (j + off) / m;
          ring_keys[i].push_back({p, f, 0, place(p, f, r)});
        }
      } else {
        for (int t = 0; t <= k_e; ++t) {
          const double f = w_frac * t / k_e;
          ring_keys[i].push_back({p, f, 0, place(p, f, r)});
        }
        for (int t = 1; t < k_g; ++t) {
          const double f = w_frac + (1.0 - w_frac) * t / k_g;
          ring_keys[i].push_back({p, f, 0, place(p, f, r)});
        }
      }
    }
  }

  // centre fan
  const auto& first = ring_keys[1];
  for (std::size_t j = 0; j < first.size(); ++j) {
    mesh.elements.push_back({0, first[j].node, first[(j + 1) % first.size()].node});
  }
  for (int i = 2; i <= rings; ++i) {
    auto outer = ring_keys[i];
    for (auto& k : outer) k.ring_tag = 1;
    stitch_rings(ring_keys[i - 1], outer, mesh.elements);
  }

  const auto& boundary = ring_keys[rings];
  for (int p = 0; p < n_electrodes; ++p) {
    ElectrodeEdges edges;
    for (int t = 0; t < k_e; ++t) {
      edges.push_back({boundary[std::size_t(p) * s + t].node,
                       boundary[std::size_t(p) * s + t + 1].node});
    }
    mesh.electrodes.push_back(std::move(edges));
  }

  validate_mesh(mesh);
  return mesh;
}

double electrode_length(const Mesh& mesh, std::size_t q) {
  double total = 0.0;
  for (const auto& e : mesh.electrodes.at(q)) {
    const auto& a = mesh.nodes[e[0]];
    const auto& b = mesh.nodes[e[1]];
    total += std::hypot(b.x - a.x, b.y - a.y);
  }
  return total;
}

ElementGeometry compute_geometry(const Mesh& mesh) {
  ElementGeometry g;
  g.area.resize(mesh.elements.size());
  g.grad.resize(mesh.elements.size());
  for (std::size_t t = 0; t < mesh.elements.size(); ++t) {
    const auto& tri = mesh.elements[t];
    const Point& a = mesh.nodes[tri[0]];
    const Point& b = mesh.nodes[tri[1]];
    const Point& c = mesh.nodes[tri[2]];
    const double area = signed_area(a, b, c);
    if (!(area > 0)) {
      throw MeshError(MeshError::Kind::degenerate,
                      "triangle " + std::to_string(t) + " has non-positive area");
    }
    const double inv = 1.0 / (2.0 * area);
    g.area[t] = area;
    g.grad[t][0] = Eigen::Vector2d((b.y - c.y) * inv, (c.x - b.x) * inv);
    g.grad[t][1] = Eigen::Vector2d((c.y - a.y) * inv, (a.x - c.x) * inv);
    g.grad[t][2] = Eigen::Vector2d((a.y - b.y) * inv, (b.x - a.x) * inv);
  }
  return g;
}

Normalization normalization_for(const Mesh& mesh) {
  double min_x = mesh.nodes.at(0).x, max_x = min_x, min_y = mesh.nodes[0].y, max_y = min_y;
  for (const auto& p : mesh.nodes) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  Normalization n;
  n.cx = 0.5 * (min_x + max_x);
  n.cy = 0.5 * (min_y + max_y);
  n.half_extent = 0.5 * std::max(max_x - min_x, max_y - min_y);
  return n;
}

NormalizedCoords normalized_nodes(const Mesh& mesh) {
  const auto norm = normalization_for(mesh);
  NormalizedCoords out;
  out.source = CoordSource::fe_nodes;
  out.points.reserve(mesh.nodes.size());
  for (const auto& p : mesh.nodes) {
    Point u = norm.to_unit(p);
    u.x = std::clamp(u.x, -1.0, 1.0);
    u.y = std::clamp(u.y, -1.0, 1.0);
    out.points.push_back(u);
  }
  return out;
}

NormalizedCoords grid_coords(int width, int height) {
  NormalizedCoords out;
  out.source = CoordSource::grid;
  out.width = width;
  out.height = height;
  out.points.reserve(std::size_t(width) * height);
  for (int r = 0; r < height; ++r) {
    const double y = 1.0 - (2.0 * r + 1.0) / height;
    for (int c = 0; c < width; ++c) {
      out.points.push_back({-1.0 + (2.0 * c + 1.0) / width, y});
    }
  }
  return out;
}

}  // namespace sdeit

#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "sdeit/fem.hpp"
#include "sdeit/mesh.hpp"

namespace sdeit::test {

inline double rel_err(double a, double b, double floor = 1e-300) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central difference of f at x along coordinate i.
template <class F>
double central_diff(F&& f, Eigen::VectorXd x, Eigen::Index i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = f(x);
  x[i] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

inline GridImage random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  GridImage img(w, h);
  for (double& v : img.values) v = u(rng);
  img.lo = lo;
  img.hi = hi;
  return img;
}

// Smooth positive nodal field varying on the scale of the mesh.
inline ConductivityField smooth_field(const Mesh& mesh, double base = 1.0, double amp = 0.3) {
  ConductivityField f{Eigen::VectorXd(Eigen::Index(mesh.node_count()))};
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    const Point p = mesh.nodes[i];
    f.values[Eigen::Index(i)] = base + amp * std::sin(0.2 * p.x + 0.3) * std::cos(0.15 * p.y - 0.1);
  }
  return f;
}

// Structured triangulation of [0,1]^2 with two electrodes on the bottom edge.
inline Mesh unit_square_mesh(int n) {
  Mesh m;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) m.nodes.push_back({double(i) / n, double(j) / n});
  }
  const auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      m.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  m.electrodes.push_back({{id(0, 0), id(1, 0)}});
  m.electrodes.push_back({{id(n - 1, 0), id(n, 0)}});
  validate_mesh(m);
  return m;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("sdeit_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace sdeit::test

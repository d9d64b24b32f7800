#pragma once

#include <vector>

#include "sdeit/fem.hpp"
#include "sdeit/mesh.hpp"

namespace sdeit {

/// Axis-aligned-then-rotated ellipse with a constant conductivity.
struct Ellipse {
  double cx = 0.0, cy = 0.0;
  double semi_x = 1.0, semi_y = 1.0;
  double angle = 0.0;  // radians, counter-clockwise
  double value = 1.0;

  bool contains(Point p) const;
};

/// Piecewise-constant conductivity map in physical coordinates. Later
/// inclusions win where shapes overlap.
struct Phantom {
  double background = 1.0;
  std::vector<Ellipse> inclusions;

  double value_at(Point p) const;
};

/// Thorax-like disk phantom: two elliptical lungs and a circular heart.
Phantom lungs_heart_phantom(double radius = 14.0, double background = 1.0, double lung = 0.25,
                            double heart = 1.5);

ConductivityField sample_nodes(const Mesh& mesh, const Phantom& phantom);

/// Analytic phantom evaluated at pixel centres in the mesh's normalized
/// frame; pixels outside the mesh carry the background and mask = 0.
GridImage phantom_raster(const Mesh& mesh, const Phantom& phantom, int width, int height);

}  // namespace sdeit

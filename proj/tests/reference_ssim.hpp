#pragma once

#include <cmath>
#include <vector>

#include "sdeit/mesh.hpp"

namespace sdeit::test {

// Direct per-window SSIM (uniform window, population moments, every
// stride-1 position), written without any shared code path.
inline double reference_mssim(const GridImage& x, const GridImage& y, int win, double k1,
                              double k2, double range) {
  const double c1 = (k1 * range) * (k1 * range);
  const double c2 = (k2 * range) * (k2 * range);
  const double n = double(win) * win;
  double total = 0.0;
  long count = 0;
  for (int r0 = 0; r0 + win <= x.height; ++r0) {
    for (int c0 = 0; c0 + win <= x.width; ++c0) {
      double mx = 0.0, my = 0.0;
      for (int r = r0; r < r0 + win; ++r) {
        for (int c = c0; c < c0 + win; ++c) {
          mx += x.at(r, c);
          my += y.at(r, c);
        }
      }
      mx /= n;
      my /= n;
      double vx = 0.0, vy = 0.0, cxy = 0.0;
      for (int r = r0; r < r0 + win; ++r) {
        for (int c = c0; c < c0 + win; ++c) {
          const double dx = x.at(r, c) - mx, dy = y.at(r, c) - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
      }
      vx /= n;
      vy /= n;
      cxy /= n;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / double(count);
}

}  // namespace sdeit::test

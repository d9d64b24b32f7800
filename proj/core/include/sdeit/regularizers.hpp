#pragma once

#include <stdexcept>

#include <Eigen/Core>

#include "sdeit/fem.hpp"
#include "sdeit/mesh.hpp"

namespace sdeit {

enum class TvWeighting { element_area, uniform };

struct TvConfig {
  double beta = 1e-8;
  TvWeighting weighting = TvWeighting::element_area;
};

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Smoothed total variation over elements:
///   sum_i w_i * sqrt(|grad sigma|_i^2 + beta)
/// with the constant per-element gradient of the P1 field.
LossGrad tv_loss_grad(const Mesh& mesh, const ElementGeometry& geometry,
                      const Eigen::VectorXd& sigma, const TvConfig& cfg);
LossGrad tv_loss_grad(const Mesh& mesh, const ConductivityField& sigma, const TvConfig& cfg);

/// Lagged-diffusivity approximation of the TV Hessian at sigma (sparse,
/// symmetric positive semi-definite, constants in its null space).
Eigen::MatrixXd tv_lagged_hessian(const Mesh& mesh, const ElementGeometry& geometry,
                                  const Eigen::VectorXd& sigma, const TvConfig& cfg);

/// SSIM with a uniform square window evaluated at every stride-1 position.
/// K1 = (k1 L)^2, K2 = (k2 L)^2; moments use 1/N normalisation.
struct SsimConfig {
  int window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
  /// Only average windows whose centre pixel lies inside x.mask.
  bool masked = false;
};

class SsimError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double mssim(const GridImage& x, const GridImage& y, const SsimConfig& cfg);

/// 1 - mssim(x, y) and its gradient with respect to the pixels of x; y is a
/// constant.
LossGrad ssim_loss_grad(const GridImage& x, const GridImage& y, const SsimConfig& cfg);

}  // namespace sdeit

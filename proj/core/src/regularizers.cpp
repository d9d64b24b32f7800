#include "sdeit/regularizers.hpp"

#include <cmath>

namespace sdeit {

LossGrad tv_loss_grad(const Mesh& mesh, const ElementGeometry& geometry,
                      const Eigen::VectorXd& sigma, const TvConfig& cfg) {
  if (std::size_t(sigma.size()) != mesh.node_count()) {
    throw std::invalid_argument("tv_loss_grad: field does not match mesh");
  }
  if (!(cfg.beta > 0)) throw std::invalid_argument("tv_loss_grad: beta must be positive");
  LossGrad out;
  out.grad = Eigen::VectorXd::Zero(sigma.size());
  for (std::size_t t = 0; t < mesh.element_count(); ++t) {
    const auto& tri = mesh.elements[t];
    const auto& g = geometry.grad[t];
    const Eigen::Vector2d d = sigma[tri[0]] * g[0] + sigma[tri[1]] * g[1] + sigma[tri[2]] * g[2];
    const double s = std::sqrt(d.squaredNorm() + cfg.beta);
    const double w = cfg.weighting == TvWeighting::element_area ? geometry.area[t] : 1.0;
    out.loss += w * s;
    for (int k = 0; k < 3; ++k) out.grad[tri[k]] += w * d.dot(g[k]) / s;
  }
  return out;
}

LossGrad tv_loss_grad(const Mesh& mesh, const ConductivityField& sigma, const TvConfig& cfg) {
  return tv_loss_grad(mesh, compute_geometry(mesh), sigma.values, cfg);
}

Eigen::MatrixXd tv_lagged_hessian(const Mesh& mesh, const ElementGeometry& geometry,
                                  const Eigen::VectorXd& sigma, const TvConfig& cfg) {
  const Eigen::Index n = sigma.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t t = 0; t < mesh.element_count(); ++t) {
    const auto& tri = mesh.elements[t];
    const auto& g = geometry.grad[t];
    const Eigen::Vector2d d = sigma[tri[0]] * g[0] + sigma[tri[1]] * g[1] + sigma[tri[2]] * g[2];
    const double w = cfg.weighting == TvWeighting::element_area ? geometry.area[t] : 1.0;
    const double coef = w / std::sqrt(d.squaredNorm() + cfg.beta);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) h(tri[a], tri[b]) += coef * g[a].dot(g[b]);
    }
  }
  return h;
}

namespace {

struct WindowStats {
  int out_w = 0;
  int out_h = 0;
  Eigen::ArrayXXd mu_x, mu_y, var_x, var_y, cov;  // out_h x out_w
};

// "Valid" box mean of a row-major image.
Eigen::ArrayXXd box_mean(const Eigen::ArrayXXd& img, int win) {
  const Eigen::Index h = img.rows(), w = img.cols();
  const Eigen::Index oh = h - win + 1, ow = w - win + 1;
  Eigen::ArrayXXd rows(h, ow);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < win; ++k) s += img(r, c + k);
      rows(r, c) = s;
    }
  }
  Eigen::ArrayXXd out(oh, ow);
  const double inv = 1.0 / (double(win) * win);
  for (Eigen::Index r = 0; r < oh; ++r) {
    for (Eigen::Index c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < win; ++k) s += rows(r + k, c);
      out(r, c) = s * inv;
    }
  }
  return out;
}

// Adjoint of box_mean without the 1/N factor: scatter each window value onto
// its pixels.
Eigen::ArrayXXd box_scatter(const Eigen::ArrayXXd& win_vals, int win, Eigen::Index h,
                            Eigen::Index w) {
  const Eigen::Index oh = win_vals.rows(), ow = win_vals.cols();
  Eigen::ArrayXXd cols = Eigen::ArrayXXd::Zero(h, ow);
  for (Eigen::Index r = 0; r < oh; ++r) {
    for (int k = 0; k < win; ++k) cols.row(r + k) += win_vals.row(r);
  }
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(h, w);
  for (Eigen::Index c = 0; c < ow; ++c) {
    for (int k = 0; k < win; ++k) out.col(c + k) += cols.col(c);
  }
  return out;
}

Eigen::ArrayXXd as_array(const GridImage& img) {
  Eigen::ArrayXXd a(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) a(r, c) = img.at(r, c);
  }
  return a;
}

void check_pair(const GridImage& x, const GridImage& y, const SsimConfig& cfg) {
  if (x.width != y.width || x.height != y.height) {
    throw SsimError("SSIM images differ in size");
  }
  if (cfg.window < 3 || cfg.window % 2 == 0) throw SsimError("SSIM window must be odd and >= 3");
  if (x.width < cfg.window || x.height < cfg.window) {
    throw SsimError("SSIM images are smaller than the window");
  }
  if (!(cfg.k1 > 0) || !(cfg.k2 > 0) || !(cfg.data_range > 0)) {
    throw SsimError("SSIM constants must be positive");
  }
}

WindowStats window_stats(const Eigen::ArrayXXd& x, const Eigen::ArrayXXd& y, int win) {
  WindowStats s;
  s.mu_x = box_mean(x, win);
  s.mu_y = box_mean(y, win);
  s.var_x = box_mean(x * x, win) - s.mu_x * s.mu_x;
  s.var_y = box_mean(y * y, win) - s.mu_y * s.mu_y;
  s.cov = box_mean(x * y, win) - s.mu_x * s.mu_y;
  s.out_h = int(s.mu_x.rows());
  s.out_w = int(s.mu_x.cols());
  return s;
}

Eigen::ArrayXXd window_weights(const GridImage& x, const WindowStats& s, const SsimConfig& cfg) {
  Eigen::ArrayXXd wts = Eigen::ArrayXXd::Ones(s.out_h, s.out_w);
  if (cfg.masked && !x.mask.empty()) {
    const int half = cfg.window / 2;
    for (int r = 0; r < s.out_h; ++r) {
      for (int c = 0; c < s.out_w; ++c) {
        wts(r, c) = x.mask[std::size_t(r + half) * x.width + (c + half)] ? 1.0 : 0.0;
      }
    }
  }
  if (wts.sum() == 0.0) throw SsimError("no SSIM windows inside the mask");
  return wts;
}

}  // namespace

double mssim(const GridImage& x, const GridImage& y, const SsimConfig& cfg) {
  check_pair(x, y, cfg);
  const auto s = window_stats(as_array(x), as_array(y), cfg.window);
  const double c1 = std::pow(cfg.k1 * cfg.data_range, 2);
  const double c2 = std::pow(cfg.k2 * cfg.data_range, 2);
  const Eigen::ArrayXXd ssim = ((2.0 * s.mu_x * s.mu_y + c1) * (2.0 * s.cov + c2)) /
                               ((s.mu_x.square() + s.mu_y.square() + c1) * (s.var_x + s.var_y + c2));
  const Eigen::ArrayXXd wts = window_weights(x, s, cfg);
  return (ssim * wts).sum() / wts.sum();
}

LossGrad ssim_loss_grad(const GridImage& x, const GridImage& y, const SsimConfig& cfg) {
  check_pair(x, y, cfg);
  const Eigen::ArrayXXd xa = as_array(x);
  const Eigen::ArrayXXd ya = as_array(y);
  const auto s = window_stats(xa, ya, cfg.window);
  const double c1 = std::pow(cfg.k1 * cfg.data_range, 2);
  const double c2 = std::pow(cfg.k2 * cfg.data_range, 2);

  const Eigen::ArrayXXd a1 = 2.0 * s.mu_x * s.mu_y + c1;
  const Eigen::ArrayXXd a2 = 2.0 * s.cov + c2;
  const Eigen::ArrayXXd b1 = s.mu_x.square() + s.mu_y.square() + c1;
  const Eigen::ArrayXXd b2 = s.var_x + s.var_y + c2;
  const Eigen::ArrayXXd den = b1 * b2;
  const Eigen::ArrayXXd ssim = a1 * a2 / den;

  const Eigen::ArrayXXd wts = window_weights(x, s, cfg);
  const double m = wts.sum();

  // partials of SSIM wrt (mu_x, var_x, cov), each window scaled by its weight
  const Eigen::ArrayXXd d_mu = wts * (2.0 * s.mu_y * a2 - ssim * 2.0 * s.mu_x * b2) / den;
  const Eigen::ArrayXXd d_var = wts * (-ssim / b2);
  const Eigen::ArrayXXd d_cov = wts * (2.0 * a1 / den);

  // dSSIM_i/dx_p = (1/N)[d_mu + 2 d_var (x_p - mu_x) + d_cov (y_p - mu_y)]
  const Eigen::ArrayXXd alpha = d_mu - 2.0 * d_var * s.mu_x - d_cov * s.mu_y;
  const Eigen::ArrayXXd beta = 2.0 * d_var;
  const Eigen::Index h = xa.rows(), w = xa.cols();
  const Eigen::ArrayXXd grad_img =
      box_scatter(alpha, cfg.window, h, w) + xa * box_scatter(beta, cfg.window, h, w) +
      ya * box_scatter(d_cov, cfg.window, h, w);
  const double scale = -1.0 / (double(cfg.window) * cfg.window * m);

  LossGrad out;
  out.loss = 1.0 - (ssim * wts).sum() / m;
  out.grad.resize(Eigen::Index(x.size()));
  for (int r = 0; r < x.height; ++r) {
    for (int c = 0; c < x.width; ++c) out.grad[Eigen::Index(r) * x.width + c] = scale * grad_img(r, c);
  }
  return out;
}

}  // namespace sdeit

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "sdeit/recon.hpp"
#include "sdeit/sensitivity.hpp"

namespace sdeit {
namespace {

std::vector<double> impedances(const Mesh& mesh, const std::vector<double>& z) {
  if (z.empty()) return std::vector<double>(mesh.electrode_count(), kDefaultContactImpedance);
  if (z.size() == 1) return std::vector<double>(mesh.electrode_count(), z.front());
  return z;
}

struct Objective {
  double data = 0.0;
  double tv = 0.0;
  double total = 0.0;
};

Objective evaluate(const CemModel& model, const MeasurementFrame& frame, const Eigen::VectorXd& s,
                   const TvReconConfig& cfg) {
  const ForwardResult fwd = model.solve({s}, frame.pattern);
  Objective o;
  o.data = (cfg.voltage_scale * (fwd.predicted - frame.voltages)).squaredNorm();
  o.tv = tv_loss_grad(model.mesh(), model.geometry(), s, cfg.tv).loss;
  o.total = o.data + cfg.alpha * o.tv;
  return o;
}

}  // namespace

double fit_homogeneous(const CemModel& model, const MeasurementFrame& frame) {
  const auto nodes = std::size_t(model.node_count());
  const Eigen::VectorXd u1 =
      model.solve(ConductivityField::constant(nodes, 1.0), frame.pattern).predicted;
  const double num = u1.dot(frame.voltages);
  const double den = u1.squaredNorm();
  if (!(num > 0.0) || !(den > 0.0)) {
    throw ReconError("measurements are not consistent with any positive homogeneous conductivity");
  }
  double c = den / num;
  for (int it = 0; it < 8; ++it) {
    ForwardResult fwd;
    const auto field = ConductivityField::constant(nodes, c);
    const JacobianMatrix jac = conductivity_jacobian(model, field, frame.pattern, &fwd);
    const Eigen::VectorXd du = jac.rowwise().sum();
    const double step = -du.dot(fwd.predicted - frame.voltages) / du.squaredNorm();
    const double next = std::clamp(c + step, 0.5 * c, 2.0 * c);
    if (std::abs(next - c) <= 1e-12 * c) break;
    c = next;
  }
  return c;
}

ReconResult reconstruct_tv(const Mesh& mesh, const MeasurementFrame& frame,
                           const TvReconConfig& cfg, const ReconHooks& hooks) {
  if (frame.pattern.n_electrodes != int(mesh.electrode_count())) {
    throw ReconError("measurement frame electrode count does not match the mesh");
  }
  if (!(cfg.alpha >= 0) || cfg.max_iters < 0 || !(cfg.sigma_floor > 0) ||
      !(cfg.voltage_scale > 0)) {
    throw ReconError("invalid TV reconstruction settings");
  }
  const CemModel model(mesh, impedances(mesh, cfg.contact_impedance));
  const Eigen::Index n = model.node_count();

  Eigen::VectorXd s = Eigen::VectorXd::Constant(n, std::max(fit_homogeneous(model, frame),
                                                            cfg.sigma_floor));
  ReconResult result;
  Objective cur = evaluate(model, frame, s, cfg);

  for (int it = 0; it < cfg.max_iters; ++it) {
    ForwardResult fwd;
    const JacobianMatrix jac =
        cfg.voltage_scale * conductivity_jacobian(model, {s}, frame.pattern, &fwd);
    const Eigen::VectorXd residual = cfg.voltage_scale * (fwd.predicted - frame.voltages);
    const LossGrad tv = tv_loss_grad(mesh, model.geometry(), s, cfg.tv);
    const Eigen::VectorXd grad = 2.0 * jac.transpose() * residual + cfg.alpha * tv.grad;

    Eigen::MatrixXd h = 2.0 * jac.transpose() * jac;
    h += cfg.alpha * tv_lagged_hessian(mesh, model.geometry(), s, cfg.tv);
    h.diagonal().array() += 1e-12 * std::max(h.diagonal().maxCoeff(), 1.0);

    // nodes held at the floor by an outward gradient stay fixed this step
    Eigen::VectorXd g_free = grad;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (s[i] <= cfg.sigma_floor * (1.0 + 1e-12) && grad[i] > 0.0) {
        h.row(i).setZero();
        h.col(i).setZero();
        h(i, i) = 1.0;
        g_free[i] = 0.0;
      }
    }
    const Eigen::VectorXd step = -h.ldlt().solve(g_free);

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    Objective next;
    for (int k = 0; k < 30; ++k, t *= 0.5) {
      trial = (s + t * step).cwiseMax(cfg.sigma_floor);
      next = evaluate(model, frame, trial, cfg);
      if (next.total <= cur.total + 1e-4 * grad.dot(trial - s)) {
        accepted = true;
        break;
      }
    }

    LossRecord rec{it, cur.data, cur.tv, 0.0, cur.total};
    if (hooks.on_iteration) hooks.on_iteration(rec);
    result.loss_history.push_back(rec);

    if (!accepted) {
      result.line_search_failed = true;
      if (hooks.on_warning) {
        hooks.on_warning("iteration " + std::to_string(it) + ": line search failed; stopping");
      }
      break;
    }
    const double rel = (cur.total - next.total) / std::max(std::abs(cur.total), 1e-300);
    s = trial;
    cur = next;
    if (rel < cfg.rel_tol) break;
  }

  result.iterations_run = int(result.loss_history.size());
  result.sigma_meas = {s};
  result.final_data_loss = cur.data;
  result.sigma_grid = rasterize_field(mesh, std::span<const double>(s.data(), std::size_t(s.size())),
                                      cfg.grid_width, cfg.grid_height, cfg.background);
  return result;
}

}  // namespace sdeit

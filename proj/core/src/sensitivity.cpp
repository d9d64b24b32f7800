#include "sdeit/sensitivity.hpp"

#include <map>
#include <utility>

namespace sdeit {

JacobianMatrix conductivity_jacobian(const CemModel& model, const CemSystem& system,
                                     const Eigen::MatrixXd& potentials,
                                     const StimPatternSet& patterns) {
  const Mesh& mesh = model.mesh();
  const auto& geo = model.geometry();
  const Eigen::Index n = model.node_count();
  const Eigen::Index n_el = Eigen::Index(mesh.element_count());

  // distinct selectors -> adjoint load columns
  std::map<std::pair<int, int>, Eigen::Index> column_of;
  for (const auto& per_injection : patterns.selectors) {
    for (const auto& s : per_injection) column_of.emplace(std::make_pair(s.plus, s.minus), 0);
  }
  Eigen::MatrixXd loads = Eigen::MatrixXd::Zero(n + model.electrode_count(), Eigen::Index(column_of.size()));
  Eigen::Index col = 0;
  for (auto& [sel, idx] : column_of) {
    idx = col;
    loads(n + sel.first, col) += 1.0;
    loads(n + sel.second, col) -= 1.0;
    ++col;
  }
  const Eigen::MatrixXd adjoint = system.solve(loads);

  // per-element gradients of forward and adjoint fields: (2*n_el) x cols
  auto element_gradients = [&](const Eigen::MatrixXd& fields, Eigen::Index cols) {
    Eigen::MatrixXd g(2 * n_el, cols);
    for (Eigen::Index t = 0; t < n_el; ++t) {
      const auto& tri = mesh.elements[t];
      const auto& gr = geo.grad[t];
      for (int d = 0; d < 2; ++d) {
        g.row(2 * t + d) = gr[0][d] * fields.row(tri[0]).head(cols) +
                           gr[1][d] * fields.row(tri[1]).head(cols) +
                           gr[2][d] * fields.row(tri[2]).head(cols);
      }
    }
    return g;
  };
  const Eigen::MatrixXd grad_u = element_gradients(potentials, patterns.injection_count());
  const Eigen::MatrixXd grad_w = element_gradients(adjoint, adjoint.cols());

  JacobianMatrix jac = JacobianMatrix::Zero(Eigen::Index(patterns.measurement_count()), n);
  Eigen::Index row = 0;
  for (Eigen::Index k = 0; k < patterns.injection_count(); ++k) {
    for (const auto& s : patterns.selectors[k]) {
      const Eigen::Index w = column_of.at({s.plus, s.minus});
      for (Eigen::Index t = 0; t < n_el; ++t) {
        const double dot = grad_u(2 * t, k) * grad_w(2 * t, w) + grad_u(2 * t + 1, k) * grad_w(2 * t + 1, w);
        const double contrib = -geo.area[t] / 3.0 * dot;
        const auto& tri = mesh.elements[t];
        jac(row, tri[0]) += contrib;
        jac(row, tri[1]) += contrib;
        jac(row, tri[2]) += contrib;
      }
      ++row;
    }
  }
  return jac;
}

JacobianMatrix conductivity_jacobian(const CemModel& model, const ConductivityField& sigma,
                                     const StimPatternSet& patterns, ForwardResult* forward) {
  const CemSystem system = model.factorize(sigma);
  const Eigen::MatrixXd x = system.solve(injection_rhs(model, patterns));
  if (forward != nullptr) {
    forward->solution.potentials = x.topRows(model.node_count());
    forward->solution.electrode_potentials = x.bottomRows(model.electrode_count());
    forward->solution.contact_impedances = model.contact_impedance();
    forward->predicted = apply_selectors(patterns, forward->solution.electrode_potentials);
  }
  return conductivity_jacobian(model, system, x.topRows(model.node_count()), patterns);
}

Eigen::VectorXd data_loss_grad(const MeasurementFrame& frame, const Eigen::VectorXd& predicted,
                               const JacobianMatrix& jac) {
  if (predicted.size() != frame.voltages.size() || jac.rows() != predicted.size()) {
    throw FemError(FemError::Kind::invalid_input, "data_loss_grad: dimension mismatch");
  }
  return 2.0 * jac.transpose() * (predicted - frame.voltages);
}

}  // namespace sdeit

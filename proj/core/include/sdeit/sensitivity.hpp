#pragma once

#include <Eigen/Core>

#include "sdeit/fem.hpp"

namespace sdeit {

/// d(predicted voltage) / d(nodal conductivity), rows = measurements,
/// cols = nodes, in mV per (mS/cm).
using JacobianMatrix = Eigen::MatrixXd;

/// Adjoint-method Jacobian. One extra multi-RHS solve with the distinct
/// measurement selectors as electrode loads; the forward factorisation is
/// shared. When `forward` is given it receives the forward solution at `sigma`.
JacobianMatrix conductivity_jacobian(const CemModel& model, const ConductivityField& sigma,
                                     const StimPatternSet& patterns,
                                     ForwardResult* forward = nullptr);

/// Same as above, reusing an existing factorisation and nodal potentials.
JacobianMatrix conductivity_jacobian(const CemModel& model, const CemSystem& system,
                                     const Eigen::MatrixXd& potentials,
                                     const StimPatternSet& patterns);

/// 2 J^T (U - V).
Eigen::VectorXd data_loss_grad(const MeasurementFrame& frame, const Eigen::VectorXd& predicted,
                               const JacobianMatrix& jac);

}  // namespace sdeit

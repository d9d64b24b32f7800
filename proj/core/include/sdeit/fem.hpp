#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "sdeit/mesh.hpp"

namespace sdeit {

// Units: conductivity mS/cm, current mA, length cm, contact impedance Ohm*cm,
// voltages mV.

/// Nodal conductivity, piecewise linear over the mesh. All values > 0.
struct ConductivityField {
  Eigen::VectorXd values;

  static ConductivityField constant(std::size_t nodes, double value) {
    return {Eigen::VectorXd::Constant(Eigen::Index(nodes), value)};
  }
};

class FemError : public std::runtime_error {
 public:
  enum class Kind { invalid_input, assembly, numeric };
  FemError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void check_conductivity(const Mesh& mesh, const ConductivityField& sigma);

/// Voltage difference U_plus - U_minus between two electrodes.
struct Selector {
  int plus = 0;
  int minus = 0;
  friend bool operator==(const Selector&, const Selector&) = default;
};

struct StimPatternSet {
  int n_electrodes = 0;
  double amplitude = 0.0;
  bool skip_injecting = false;
  Eigen::MatrixXd injections;                   // N_e x K, one column per injection (mA)
  std::vector<std::vector<Selector>> selectors;  // per injection

  Eigen::Index injection_count() const { return injections.cols(); }
  std::size_t measurement_count() const;

  friend bool operator==(const StimPatternSet&, const StimPatternSet&) = default;
};

/// Adjacent drive (+amplitude on k, -amplitude on k+1) and adjacent
/// measurement (U_m - U_{m+1}). With skip_injecting, selectors touching a
/// current-carrying electrode are dropped.
StimPatternSet adjacent_patterns(int n_electrodes, double amplitude, bool skip_injecting);

struct MeasurementFrame {
  StimPatternSet pattern;
  Eigen::VectorXd voltages;  // injection-major, then selector
  std::optional<double> noise_snr_db;
};

struct CemSolution {
  Eigen::MatrixXd potentials;            // N_n x K
  Eigen::MatrixXd electrode_potentials;  // N_e x K
  std::vector<double> contact_impedances;
};

struct ForwardResult {
  CemSolution solution;
  Eigen::VectorXd predicted;
};

class CemSystem;

/// Mesh-bound CEM discretisation. Holds everything that does not depend on
/// conductivity; factorize() builds the system for one sigma.
class CemModel {
 public:
  CemModel(const Mesh& mesh, std::vector<double> contact_impedance);
  CemModel(const Mesh& mesh, double contact_impedance)
      : CemModel(mesh, std::vector<double>(mesh.electrode_count(), contact_impedance)) {}

  const Mesh& mesh() const { return *mesh_; }
  const ElementGeometry& geometry() const { return geometry_; }
  const std::vector<double>& contact_impedance() const { return z_; }
  Eigen::Index node_count() const { return Eigen::Index(mesh_->node_count()); }
  Eigen::Index electrode_count() const { return Eigen::Index(mesh_->electrode_count()); }

  CemSystem factorize(const ConductivityField& sigma) const;

  /// Solve for every injection of the pattern set.
  ForwardResult solve(const ConductivityField& sigma, const StimPatternSet& patterns) const;

 private:
  const Mesh* mesh_;
  ElementGeometry geometry_;
  std::vector<double> z_;
  Eigen::SparseMatrix<double> pattern_;      // full sparsity, contact + grounding values
  std::vector<std::array<int, 9>> slots_;    // element-local entry -> value index
};

/// Factorised CEM system for one conductivity. Unknowns are the nodal
/// potentials followed by the electrode potentials; grounding sum(U) = 0 is
/// imposed through a rank-one term on the electrode block.
class CemSystem {
 public:
  CemSystem(CemSystem&&) noexcept;
  CemSystem& operator=(CemSystem&&) noexcept;
  ~CemSystem();

  /// Solves A X = rhs for a (N_n + N_e) x K right-hand side. Throws
  /// FemError::numeric if the normwise backward error exceeds 1e-10.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  Eigen::Index node_count() const { return nodes_; }
  Eigen::Index electrode_count() const { return electrodes_; }
  const Eigen::SparseMatrix<double>& matrix() const;

 private:
  friend class CemModel;
  struct Impl;
  CemSystem(std::unique_ptr<Impl> impl, Eigen::Index nodes, Eigen::Index electrodes);

  std::unique_ptr<Impl> impl_;
  Eigen::Index nodes_ = 0;
  Eigen::Index electrodes_ = 0;
};

/// Stacked load vectors [0; I_k] for the pattern's injections (mV scaling
/// applied, see units note).
Eigen::MatrixXd injection_rhs(const CemModel& model, const StimPatternSet& patterns);

/// Applies each injection's selectors to the electrode potentials (N_e x K).
Eigen::VectorXd apply_selectors(const StimPatternSet& patterns,
                                const Eigen::MatrixXd& electrode_potentials);

ForwardResult assemble_and_solve(const Mesh& mesh, const ConductivityField& sigma,
                                 std::span<const double> contact_impedance,
                                 const StimPatternSet& patterns);

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation
/// rms(V) * 10^(-snr_db / 20). Infinite snr returns the input voltages.
MeasurementFrame add_noise(const MeasurementFrame& frame, double snr_db, std::uint64_t seed);

inline constexpr double kDefaultContactImpedance = 1e-2;

}  // namespace sdeit

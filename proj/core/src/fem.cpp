#include "sdeit/fem.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

namespace sdeit {
namespace {

// Potentials come out of the (mS, mA, cm) system in volts; loads are scaled
// so that solutions are in mV.
constexpr double kVoltsToMillivolts = 1e3;
// Contact impedance is given in Ohm*cm; the solver works in kOhm*cm.
constexpr double kOhmToKiloOhm = 1e-3;
constexpr double kResidualTol = 1e-10;

}  // namespace

struct CemSystem::Impl {
  Eigen::SparseMatrix<double> matrix;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

CemSystem::CemSystem(std::unique_ptr<Impl> impl, Eigen::Index nodes, Eigen::Index electrodes)
    : impl_(std::move(impl)), nodes_(nodes), electrodes_(electrodes) {}
CemSystem::CemSystem(CemSystem&&) noexcept = default;
CemSystem& CemSystem::operator=(CemSystem&&) noexcept = default;
CemSystem::~CemSystem() = default;

const Eigen::SparseMatrix<double>& CemSystem::matrix() const { return impl_->matrix; }

Eigen::MatrixXd CemSystem::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != nodes_ + electrodes_) {
    throw FemError(FemError::Kind::invalid_input, "right-hand side has wrong row count");
  }
  Eigen::MatrixXd x = impl_->ldlt.solve(rhs);
  const Eigen::SparseMatrix<double>& a = impl_->matrix;
  double anorm = 0.0;
  {
    Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(a.rows());
    for (Eigen::Index c = 0; c < a.outerSize(); ++c) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(a, c); it; ++it) {
        rowsum[it.row()] += std::abs(it.value());
      }
    }
    anorm = rowsum.maxCoeff();
  }
  // residual accumulated in extended precision
  auto residual = [&](const Eigen::MatrixXd& xs) {
    Eigen::MatrixXd r(rhs.rows(), rhs.cols());
    std::vector<long double> acc(std::size_t(a.rows()));
    for (Eigen::Index k = 0; k < rhs.cols(); ++k) {
      for (Eigen::Index i = 0; i < rhs.rows(); ++i) acc[std::size_t(i)] = rhs(i, k);
      for (Eigen::Index c = 0; c < a.outerSize(); ++c) {
        const long double xc = xs(c, k);
        for (Eigen::SparseMatrix<double>::InnerIterator it(a, c); it; ++it) {
          acc[std::size_t(it.row())] -= static_cast<long double>(it.value()) * xc;
        }
      }
      for (Eigen::Index i = 0; i < rhs.rows(); ++i) r(i, k) = double(acc[std::size_t(i)]);
    }
    return r;
  };
  // normwise backward error |b - Ax| / (|A| |x| + |b|), infinity norms
  auto backward_error = [&](const Eigen::MatrixXd& r, Eigen::Index k) {
    const double denom = anorm * x.col(k).lpNorm<Eigen::Infinity>() +
                         rhs.col(k).lpNorm<Eigen::Infinity>();
    return denom > 0.0 ? r.col(k).lpNorm<Eigen::Infinity>() / denom : 0.0;
  };
  Eigen::MatrixXd r = residual(x);
  for (int pass = 0; pass < 3; ++pass) {
    const Eigen::MatrixXd dx = impl_->ldlt.solve(r);
    x += dx;
    r = residual(x);
    if (dx.lpNorm<Eigen::Infinity>() <= 1e-15 * x.lpNorm<Eigen::Infinity>()) break;
  }
  for (Eigen::Index k = 0; k < rhs.cols(); ++k) {
    const double err = backward_error(r, k);
    if (!std::isfinite(err) || err > kResidualTol) {
      std::ostringstream os;
      os << "CEM solve did not converge: relative residual " << err << " for right-hand side "
         << k;
      throw FemError(FemError::Kind::numeric, os.str());
    }
  }
  return x;
}

void check_conductivity(const Mesh& mesh, const ConductivityField& sigma) {
  if (std::size_t(sigma.values.size()) != mesh.node_count()) {
    throw FemError(FemError::Kind::invalid_input,
                   "conductivity has " + std::to_string(sigma.values.size()) +
                       " values but mesh has " + std::to_string(mesh.node_count()) + " nodes");
  }
  for (Eigen::Index i = 0; i < sigma.values.size(); ++i) {
    if (!(sigma.values[i] > 0) || !std::isfinite(sigma.values[i])) {
      throw FemError(FemError::Kind::invalid_input,
                     "conductivity at node " + std::to_string(i) + " is not positive and finite");
    }
  }
}

std::size_t StimPatternSet::measurement_count() const {
  std::size_t n = 0;
  for (const auto& s : selectors) n += s.size();
  return n;
}

StimPatternSet adjacent_patterns(int n_electrodes, double amplitude, bool skip_injecting) {
  if (n_electrodes < 2 || (skip_injecting && n_electrodes < 3)) {
    throw FemError(FemError::Kind::invalid_input, "too few electrodes for adjacent patterns");
  }
  if (!(amplitude > 0)) throw FemError(FemError::Kind::invalid_input, "amplitude must be > 0");

  StimPatternSet p;
  p.n_electrodes = n_electrodes;
  p.amplitude = amplitude;
  p.skip_injecting = skip_injecting;
  p.injections = Eigen::MatrixXd::Zero(n_electrodes, n_electrodes);
  p.selectors.resize(n_electrodes);
  for (int k = 0; k < n_electrodes; ++k) {
    const int k1 = (k + 1) % n_electrodes;
    p.injections(k, k) += amplitude;
    p.injections(k1, k) -= amplitude;
    for (int m = 0; m < n_electrodes; ++m) {
      const int m1 = (m + 1) % n_electrodes;
      if (skip_injecting && (m == k || m == k1 || m1 == k || m1 == k1)) continue;
      p.selectors[k].push_back({m, m1});
    }
  }
  return p;
}

CemModel::CemModel(const Mesh& mesh, std::vector<double> contact_impedance)
    : mesh_(&mesh), geometry_(compute_geometry(mesh)), z_(std::move(contact_impedance)) {
  const Eigen::Index n = node_count();
  const Eigen::Index l = electrode_count();
  if (Eigen::Index(z_.size()) != l) {
    throw FemError(FemError::Kind::invalid_input, "need one contact impedance per electrode");
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.element_count() * 9 + std::size_t(l * l) + 64 * std::size_t(l));
  for (const auto& tri : mesh.elements) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) trips.emplace_back(tri[a], tri[b], 0.0);
    }
  }

  double diag_sum = 0.0;
  for (Eigen::Index q = 0; q < l; ++q) {
    if (!(z_[q] > 0)) {
      throw FemError(FemError::Kind::invalid_input,
                     "contact impedance of electrode " + std::to_string(q) + " must be > 0");
    }
    const double inv_z = 1.0 / (z_[q] * kOhmToKiloOhm);
    double length = 0.0;
    for (const auto& e : mesh.electrodes[q]) {
      const auto& pa = mesh.nodes[e[0]];
      const auto& pb = mesh.nodes[e[1]];
      const double len = std::hypot(pb.x - pa.x, pb.y - pa.y);
      length += len;
      trips.emplace_back(e[0], e[0], inv_z * len / 3.0);
      trips.emplace_back(e[1], e[1], inv_z * len / 3.0);
      trips.emplace_back(e[0], e[1], inv_z * len / 6.0);
      trips.emplace_back(e[1], e[0], inv_z * len / 6.0);
      for (int v : e) {
        trips.emplace_back(v, n + q, -inv_z * len / 2.0);
        trips.emplace_back(n + q, v, -inv_z * len / 2.0);
      }
    }
    if (!(length > 0)) {
      throw FemError(FemError::Kind::assembly,
                     "electrode " + std::to_string(q) + " has zero measure");
    }
    trips.emplace_back(n + q, n + q, inv_z * length);
    diag_sum += inv_z * length;
  }
  const double ground = diag_sum / double(l);
  for (Eigen::Index p = 0; p < l; ++p) {
    for (Eigen::Index q = 0; q < l; ++q) trips.emplace_back(n + p, n + q, ground);
  }

  pattern_.resize(n + l, n + l);
  pattern_.setFromTriplets(trips.begin(), trips.end());
  pattern_.makeCompressed();

  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  auto slot_of = [&](int row, int col) {
    const int* begin = inner + outer[col];
    const int* end = inner + outer[col + 1];
    const int* it = std::lower_bound(begin, end, row);
    return int(it - inner);
  };
  slots_.resize(mesh.element_count());
  for (std::size_t t = 0; t < mesh.element_count(); ++t) {
    const auto& tri = mesh.elements[t];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) slots_[t][a * 3 + b] = slot_of(tri[a], tri[b]);
    }
  }
}

CemSystem CemModel::factorize(const ConductivityField& sigma) const {
  check_conductivity(*mesh_, sigma);
  auto impl = std::make_unique<CemSystem::Impl>();
  impl->matrix = pattern_;
  double* values = impl->matrix.valuePtr();
  for (std::size_t t = 0; t < mesh_->element_count(); ++t) {
    const auto& tri = mesh_->elements[t];
    const double s_mean = (sigma.values[tri[0]] + sigma.values[tri[1]] + sigma.values[tri[2]]) / 3.0;
    const double scale = s_mean * geometry_.area[t];
    const auto& g = geometry_.grad[t];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) values[slots_[t][a * 3 + b]] += scale * g[a].dot(g[b]);
    }
  }
  impl->ldlt.compute(impl->matrix);
  if (impl->ldlt.info() != Eigen::Success) {
    throw FemError(FemError::Kind::assembly, "CEM system is singular or not positive definite");
  }
  return CemSystem(std::move(impl), node_count(), electrode_count());
}

Eigen::MatrixXd injection_rhs(const CemModel& model, const StimPatternSet& patterns) {
  if (patterns.n_electrodes != model.electrode_count()) {
    throw FemError(FemError::Kind::invalid_input, "pattern electrode count does not match mesh");
  }
  const Eigen::Index n = model.node_count();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + model.electrode_count(), patterns.injection_count());
  rhs.bottomRows(model.electrode_count()) = kVoltsToMillivolts * patterns.injections;
  return rhs;
}

Eigen::VectorXd apply_selectors(const StimPatternSet& patterns,
                                const Eigen::MatrixXd& electrode_potentials) {
  Eigen::VectorXd out(Eigen::Index(patterns.measurement_count()));
  Eigen::Index row = 0;
  for (Eigen::Index k = 0; k < patterns.injection_count(); ++k) {
    for (const auto& s : patterns.selectors[k]) {
      out[row++] = electrode_potentials(s.plus, k) - electrode_potentials(s.minus, k);
    }
  }
  return out;
}

ForwardResult CemModel::solve(const ConductivityField& sigma,
                              const StimPatternSet& patterns) const {
  const CemSystem system = factorize(sigma);
  const Eigen::MatrixXd x = system.solve(injection_rhs(*this, patterns));
  ForwardResult r;
  r.solution.potentials = x.topRows(node_count());
  r.solution.electrode_potentials = x.bottomRows(electrode_count());
  r.solution.contact_impedances = z_;
  r.predicted = apply_selectors(patterns, r.solution.electrode_potentials);
  return r;
}

ForwardResult assemble_and_solve(const Mesh& mesh, const ConductivityField& sigma,
                                 std::span<const double> contact_impedance,
                                 const StimPatternSet& patterns) {
  const CemModel model(mesh, std::vector<double>(contact_impedance.begin(), contact_impedance.end()));
  return model.solve(sigma, patterns);
}

MeasurementFrame add_noise(const MeasurementFrame& frame, double snr_db, std::uint64_t seed) {
  if (frame.voltages.size() == 0) {
    throw FemError(FemError::Kind::invalid_input, "cannot add noise to an empty frame");
  }
  MeasurementFrame out = frame;
  out.noise_snr_db = snr_db;
  if (std::isinf(snr_db) && snr_db > 0) return out;

  const double rms = std::sqrt(frame.voltages.squaredNorm() / double(frame.voltages.size()));
  const double sd = rms * std::pow(10.0, -snr_db / 20.0);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, sd);
  for (Eigen::Index i = 0; i < out.voltages.size(); ++i) out.voltages[i] += noise(gen);
  return out;
}

}  // namespace sdeit

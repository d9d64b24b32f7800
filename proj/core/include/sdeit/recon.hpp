#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdeit/fem.hpp"
#include "sdeit/guidance.hpp"
#include "sdeit/inr.hpp"
#include "sdeit/mesh.hpp"
#include "sdeit/regularizers.hpp"

namespace sdeit {

struct GuidanceSettings {
  std::string prompt = kBasicPrompt;
  double strength = 0.4;        // D
  int steps = 50;               // T
  double guidance_scale = 0.8;  // G
  std::uint64_t seed = 0;
  /// Call the provider every `guide_every` guided iterations; reuse the last
  /// guidance image in between.
  int guide_every = 1;
};

/// Data residuals are multiplied by this before squaring, so with voltages in
/// mV the data term is in V^2.
inline constexpr double kDefaultVoltageScale = 1e-3;

struct ReconConfig {
  double alpha0 = 1e-6;
  double alpha1 = 1e-2;
  int n_pre = 800;
  int n_total = 1200;
  double lr = 0.01;
  GuidanceSettings guidance;
  int grid_width = 128;
  int grid_height = 128;
  int encoder_n = 128;
  double encoder_s = 1.0;
  std::uint64_t encoder_seed = 0;
  std::uint64_t mlp_seed = 1;
  OutputMapping output;
  TvConfig tv;
  SsimConfig ssim;
  std::vector<double> contact_impedance;  // empty: kDefaultContactImpedance everywhere
  int checkpoint_every = 100;
  double voltage_scale = kDefaultVoltageScale;

  void validate() const;
};

/// One row of the loss CSV. total = data + alpha0 * tv + alpha1 * ssim.
struct LossRecord {
  int iteration = 0;
  double data = 0.0;
  double tv = 0.0;
  double ssim = 0.0;
  double total = 0.0;
};

struct Checkpoint {
  Encoder encoder;
  MlpParams params;
  AdamState adam;
  int next_iteration = 0;
  std::vector<LossRecord> history;
  std::optional<GridImage> last_guidance;
  int guidance_calls = 0;
};

struct ReconResult {
  ConductivityField sigma_meas;
  GridImage sigma_grid;
  std::optional<GridImage> sigma_dm;
  std::vector<LossRecord> loss_history;
  int iterations_run = 0;
  /// voltage_scale^2 * ||U(sigma_meas) - V||^2 at the returned conductivity.
  double final_data_loss = 0.0;
  int guidance_calls = 0;
  int guidance_failures = 0;
  /// Set by the TV baseline when the line search gave up.
  bool line_search_failed = false;
  std::optional<Checkpoint> state;  // INR runs only
};

class ReconError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReconHooks {
  std::function<void(const LossRecord&)> on_iteration;
  std::function<void(const std::string&)> on_warning;
  std::optional<std::filesystem::path> checkpoint_dir;
  std::optional<Checkpoint> resume;
};

/// The INR objective for one parameter vector: forward solve, data and TV
/// terms on the FE nodes and, when guidance is supplied, the SSIM term on the
/// grid. Holds the factorisation-independent setup shared across iterations.
class InrObjective {
 public:
  struct Result {
    LossRecord terms;     // iteration left at 0
    Eigen::VectorXd grad;  // dL/dtheta
  };
  /// Receives the min-max normalised grid image and returns the guidance
  /// image to compare against, or nullptr to drop the SSIM term.
  using GuidanceFn = std::function<const GridImage*(const GridImage& normalized)>;

  /// `with_grid` enables evaluation on the image grid as well as the nodes.
  InrObjective(const Mesh& mesh, const MeasurementFrame& frame, const ReconConfig& cfg,
               const Encoder& encoder, bool with_grid);

  /// Without `guidance` only data + alpha0 * TV is evaluated.
  Result evaluate(const MlpParams& params, const GuidanceFn& guidance = {}) const;

 private:
  const Mesh* mesh_;
  const MeasurementFrame* frame_;
  ReconConfig cfg_;
  CemModel model_;
  Eigen::MatrixXd rhs_;
  Eigen::MatrixXd node_features_;
  Eigen::MatrixXd all_features_;
  std::vector<std::uint8_t> mask_;
};

/// Full INR pipeline: data + alpha0 * TV for iterations below n_pre, then the
/// guided phase adding alpha1 * (1 - mSSIM(sigma_grid, sigma_dm)). With
/// alpha1 == 0 (or no provider) the guided phase is never entered and the
/// run is the INR+TV reduction.
ReconResult reconstruct_sdeit(const Mesh& mesh, const MeasurementFrame& frame,
                              const ReconConfig& cfg, GuidanceProvider* provider,
                              const ReconHooks& hooks = {});

ReconResult reconstruct_inr_tv(const Mesh& mesh, const MeasurementFrame& frame,
                               const ReconConfig& cfg, const ReconHooks& hooks = {});

struct TvReconConfig {
  double alpha = 1e-6;
  TvConfig tv{1e-4, TvWeighting::element_area};
  int max_iters = 30;
  double sigma_floor = 1e-3;
  double rel_tol = 1e-6;
  std::vector<double> contact_impedance;
  int grid_width = 128;
  int grid_height = 128;
  double background = 1.0;
  double voltage_scale = kDefaultVoltageScale;
};

/// Gauss-Newton with lagged-diffusivity TV Hessian and Armijo backtracking
/// on s^2 ||V - U(sigma)||^2 + alpha * TV(sigma) with s the voltage scale, started from the best
/// homogeneous fit.
ReconResult reconstruct_tv(const Mesh& mesh, const MeasurementFrame& frame,
                           const TvReconConfig& cfg, const ReconHooks& hooks = {});

/// Least-squares constant conductivity for the frame.
double fit_homogeneous(const CemModel& model, const MeasurementFrame& frame);

/// Evaluate an INR state on the FE nodes and on the grid.
ConductivityField inr_nodes(const Mesh& mesh, const Encoder& enc, const MlpParams& params);
GridImage inr_grid(const Mesh& mesh, const Encoder& enc, const MlpParams& params, int width,
                   int height);

}  // namespace sdeit

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sdeit/mesh.hpp"

namespace sdeit {

/// Fourier feature encoder p(x) = [sin(2 pi B x); cos(2 pi B x)] with B drawn
/// once from N(0, s^2).
struct Encoder {
  Eigen::MatrixXd frequencies;  // n x 2
  double bandwidth = 1.0;
  std::uint64_t seed = 0;

  int frequency_count() const { return int(frequencies.rows()); }
  int feature_dim() const { return 2 * frequency_count(); }
};

Encoder make_encoder(int n, double bandwidth, std::uint64_t seed);

/// Row i = [sin(2 pi B x_i); cos(2 pi B x_i)], shape N x 2n.
Eigen::MatrixXd encode(const Encoder& enc, const NormalizedCoords& coords);

enum class Activation { relu };

/// sigma = floor + scale * softplus(raw)
struct OutputMapping {
  double floor = 1e-3;
  double scale = 1.0;
};

class InrError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat parameter vector; layer l owns weight (widths[l+1] x widths[l],
/// column-major) followed by bias (widths[l+1]).
struct MlpParams {
  std::vector<int> widths;
  Eigen::VectorXd theta;
  Activation activation = Activation::relu;
  OutputMapping output;

  std::size_t layer_count() const { return widths.size() - 1; }
  Eigen::Index weight_offset(std::size_t layer) const;
  Eigen::Index bias_offset(std::size_t layer) const { return weight_offset(layer) + Eigen::Index(widths[layer + 1]) * widths[layer]; }

  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const {
    return {theta.data() + weight_offset(layer), widths[layer + 1], widths[layer]};
  }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const {
    return {theta.data() + bias_offset(layer), widths[layer + 1]};
  }
};

Eigen::Index parameter_count(const std::vector<int>& widths);

/// Default architecture: four hidden layers of 128 units.
std::vector<int> default_widths(int feature_dim);

/// Kaiming-uniform fan-in for hidden layers, U(-1e-2, 1e-2) for the output
/// head. Hidden biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
MlpParams mlp_init(const std::vector<int>& widths, std::uint64_t seed,
                   OutputMapping output = {});

/// Activations kept from a forward pass for the reverse sweep.
struct MlpTape {
  std::vector<Eigen::MatrixXd> outputs;  // per layer, N x width; hidden layers post-ReLU, last raw
  Eigen::VectorXd sigma;
};

MlpTape mlp_forward(const MlpParams& params, const Eigen::MatrixXd& features);

/// dL/dtheta for L = sum_i cotangent_i * sigma_i.
Eigen::VectorXd mlp_backward(const MlpParams& params, const Eigen::MatrixXd& features,
                             const MlpTape& tape, const Eigen::VectorXd& cotangent);

struct MlpEval {
  Eigen::VectorXd sigma;
  std::optional<Eigen::VectorXd> grad;
};

MlpEval mlp_eval_grad(const MlpParams& params, const Eigen::MatrixXd& features,
                      const std::optional<Eigen::VectorXd>& cotangent = std::nullopt);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const MlpParams& params) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(params.theta.size());
    s.v = Eigen::VectorXd::Zero(params.theta.size());
    return s;
  }
};

/// Bias-corrected Adam update of params.theta in place.
void adam_step(AdamState& state, MlpParams& params, const Eigen::VectorXd& grads, double lr);

}  // namespace sdeit

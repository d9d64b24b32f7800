#include "sdeit/inr.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace sdeit {
namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Encoder make_encoder(int n, double bandwidth, std::uint64_t seed) {
  if (n < 1) throw InrError("encoder needs at least one frequency");
  if (!(bandwidth > 0)) throw InrError("encoder bandwidth must be positive");
  Encoder enc;
  enc.bandwidth = bandwidth;
  enc.seed = seed;
  enc.frequencies.resize(n, 2);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, bandwidth);
  for (int i = 0; i < n; ++i) {
    enc.frequencies(i, 0) = dist(gen);
    enc.frequencies(i, 1) = dist(gen);
  }
  return enc;
}

Eigen::MatrixXd encode(const Encoder& enc, const NormalizedCoords& coords) {
  const int n = enc.frequency_count();
  Eigen::MatrixXd out(Eigen::Index(coords.points.size()), 2 * n);
  for (std::size_t i = 0; i < coords.points.size(); ++i) {
    const auto& p = coords.points[i];
    for (int j = 0; j < n; ++j) {
      const double arg =
          2.0 * std::numbers::pi * (enc.frequencies(j, 0) * p.x + enc.frequencies(j, 1) * p.y);
      out(Eigen::Index(i), j) = std::sin(arg);
      out(Eigen::Index(i), n + j) = std::cos(arg);
    }
  }
  return out;
}

Eigen::Index parameter_count(const std::vector<int>& widths) {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    total += Eigen::Index(widths[l + 1]) * (widths[l] + 1);
  }
  return total;
}

Eigen::Index MlpParams::weight_offset(std::size_t layer) const {
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += Eigen::Index(widths[l + 1]) * (widths[l] + 1);
  return off;
}

std::vector<int> default_widths(int feature_dim) { return {feature_dim, 128, 128, 128, 128, 1}; }

MlpParams mlp_init(const std::vector<int>& widths, std::uint64_t seed, OutputMapping output) {
  if (widths.size() < 2 || widths.back() != 1) {
    throw InrError("MLP widths must end in a single output");
  }
  for (int w : widths) {
    if (w < 1) throw InrError("MLP layer widths must be positive");
  }
  MlpParams p;
  p.widths = widths;
  p.output = output;
  p.theta.resize(parameter_count(widths));

  std::mt19937_64 gen(seed);
  Eigen::Index k = 0;
  const std::size_t layers = widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int fan_in = widths[l];
    const bool head = (l + 1 == layers);
    const double w_bound = head ? 1e-2 : std::sqrt(6.0 / fan_in);
    const double b_bound = head ? 1e-2 : 1.0 / std::sqrt(double(fan_in));
    std::uniform_real_distribution<double> wdist(-w_bound, w_bound);
    std::uniform_real_distribution<double> bdist(-b_bound, b_bound);
    const Eigen::Index n_w = Eigen::Index(widths[l + 1]) * fan_in;
    for (Eigen::Index i = 0; i < n_w; ++i) p.theta[k++] = wdist(gen);
    for (int i = 0; i < widths[l + 1]; ++i) p.theta[k++] = bdist(gen);
  }
  return p;
}

MlpTape mlp_forward(const MlpParams& params, const Eigen::MatrixXd& features) {
  if (features.cols() != params.widths.front()) {
    throw InrError("feature dimension " + std::to_string(features.cols()) +
                   " does not match MLP input " + std::to_string(params.widths.front()));
  }
  const std::size_t layers = params.layer_count();
  MlpTape tape;
  tape.outputs.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::MatrixXd& input = (l == 0) ? features : tape.outputs[l - 1];
    Eigen::MatrixXd z = input * params.weight(l).transpose();
    z.rowwise() += params.bias(l).transpose();
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    tape.outputs[l] = std::move(z);
  }
  const Eigen::MatrixXd& raw = tape.outputs.back();
  tape.sigma.resize(raw.rows());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    tape.sigma[i] = params.output.floor + params.output.scale * softplus(raw(i, 0));
  }
  return tape;
}

Eigen::VectorXd mlp_backward(const MlpParams& params, const Eigen::MatrixXd& features,
                             const MlpTape& tape, const Eigen::VectorXd& cotangent) {
  const std::size_t layers = params.layer_count();
  const Eigen::MatrixXd& raw = tape.outputs.back();
  if (cotangent.size() != raw.rows()) throw InrError("cotangent length does not match batch");

  Eigen::VectorXd grad(params.theta.size());
  Eigen::MatrixXd dz(raw.rows(), 1);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    dz(i, 0) = cotangent[i] * params.output.scale * sigmoid(raw(i, 0));
  }
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd& input = (l == 0) ? features : tape.outputs[l - 1];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + params.weight_offset(l), params.widths[l + 1],
                                   params.widths[l]);
    gw.noalias() = dz.transpose() * input;
    grad.segment(params.bias_offset(l), params.widths[l + 1]) = dz.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd da = dz * params.weight(l);
      dz = (tape.outputs[l - 1].array() > 0.0).select(da, 0.0);
    }
  }
  return grad;
}

MlpEval mlp_eval_grad(const MlpParams& params, const Eigen::MatrixXd& features,
                      const std::optional<Eigen::VectorXd>& cotangent) {
  MlpTape tape = mlp_forward(params, features);
  MlpEval out;
  if (cotangent) out.grad = mlp_backward(params, features, tape, *cotangent);
  out.sigma = std::move(tape.sigma);
  return out;
}

void adam_step(AdamState& state, MlpParams& params, const Eigen::VectorXd& grads, double lr) {
  if (grads.size() != params.theta.size() || state.m.size() != params.theta.size() ||
      state.v.size() != params.theta.size()) {
    throw InrError("adam_step: shape mismatch");
  }
  if (!grads.allFinite()) throw InrError("adam_step: non-finite gradient");
  state.step += 1;
  const double t = double(state.step);
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.theta.array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

}  // namespace sdeit

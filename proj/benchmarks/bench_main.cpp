#include <benchmark/benchmark.h>

#include "sdeit/inr.hpp"
#include "sdeit/phantom.hpp"
#include "sdeit/regularizers.hpp"
#include "sdeit/sensitivity.hpp"

using namespace sdeit;

namespace {

void BM_ForwardFrame(benchmark::State& state) {
  const Mesh mesh = make_disk_mesh(14.0, 16, 2.5, int(state.range(0)));
  const auto sigma = sample_nodes(mesh, lungs_heart_phantom());
  const auto pat = adjacent_patterns(16, 1.0, false);
  const CemModel model(mesh, kDefaultContactImpedance);
  for (auto _ : state) benchmark::DoNotOptimize(model.solve(sigma, pat).predicted.data());
  state.counters["elements"] = double(mesh.element_count());
}
BENCHMARK(BM_ForwardFrame)->Arg(300)->Arg(2000)->Arg(11424)->Unit(benchmark::kMillisecond);

void BM_Jacobian(benchmark::State& state) {
  const Mesh mesh = make_disk_mesh(14.0, 16, 2.5, int(state.range(0)));
  const auto sigma = sample_nodes(mesh, lungs_heart_phantom());
  const auto pat = adjacent_patterns(16, 1.0, false);
  const CemModel model(mesh, kDefaultContactImpedance);
  for (auto _ : state) benchmark::DoNotOptimize(conductivity_jacobian(model, sigma, pat).data());
}
BENCHMARK(BM_Jacobian)->Arg(300)->Arg(2176)->Unit(benchmark::kMillisecond);

void BM_MlpForwardBackward(benchmark::State& state) {
  const Encoder enc = make_encoder(128, 1.0, 0);
  const Eigen::MatrixXd features = encode(enc, grid_coords(int(state.range(0)), int(state.range(0))));
  const MlpParams params = mlp_init(default_widths(int(features.cols())), 0);
  const Eigen::VectorXd cot = Eigen::VectorXd::Ones(features.rows());
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_eval_grad(params, features, cot).grad->data());
  }
  state.counters["points"] = double(features.rows());
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SsimLossGrad(benchmark::State& state) {
  const int n = int(state.range(0));
  GridImage x(n, n), y(n, n);
  for (int i = 0; i < n * n; ++i) {
    x.values[i] = 0.5 + 0.4 * std::sin(0.01 * i);
    y.values[i] = 0.5 + 0.4 * std::cos(0.013 * i);
  }
  for (auto _ : state) benchmark::DoNotOptimize(ssim_loss_grad(x, y, SsimConfig{}).grad.data());
}
BENCHMARK(BM_SsimLossGrad)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

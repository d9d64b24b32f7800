#include "sdeit/recon.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "sdeit/io.hpp"
#include "sdeit/sensitivity.hpp"

namespace sdeit {

void ReconConfig::validate() const {
  if (n_pre < 0 || n_pre > n_total) throw ReconError("need 0 <= n_pre <= n_total");
  if (!(alpha0 >= 0) || !(alpha1 >= 0)) throw ReconError("regularization weights must be >= 0");
  if (!(lr > 0)) throw ReconError("learning rate must be positive");
  if (grid_width < ssim.window || grid_height < ssim.window) {
    throw ReconError("grid must be at least the SSIM window in each dimension");
  }
  if (guidance.guide_every < 1) throw ReconError("guide_every must be >= 1");
  if (checkpoint_every < 1) throw ReconError("checkpoint_every must be >= 1");
  if (!(voltage_scale > 0)) throw ReconError("voltage_scale must be positive");
}

namespace {

std::vector<double> impedances(const Mesh& mesh, const std::vector<double>& z) {
  if (z.empty()) return std::vector<double>(mesh.electrode_count(), kDefaultContactImpedance);
  if (z.size() == 1) return std::vector<double>(mesh.electrode_count(), z.front());
  return z;
}

void warn(const ReconHooks& hooks, const std::string& msg) {
  if (hooks.on_warning) hooks.on_warning(msg);
}

void write_checkpoint(const ReconHooks& hooks, const Checkpoint& ckpt, const std::string& name) {
  if (!hooks.checkpoint_dir) return;
  std::filesystem::create_directories(*hooks.checkpoint_dir);
  save_checkpoint(ckpt, *hooks.checkpoint_dir / name);
}

std::string checkpoint_name(int iteration) {
  std::ostringstream os;
  os << "ckpt_" << iteration << ".json";
  return os.str();
}

}  // namespace

ConductivityField inr_nodes(const Mesh& mesh, const Encoder& enc, const MlpParams& params) {
  return {mlp_forward(params, encode(enc, normalized_nodes(mesh))).sigma};
}

GridImage inr_grid(const Mesh& mesh, const Encoder& enc, const MlpParams& params, int width,
                   int height) {
  const auto tape = mlp_forward(params, encode(enc, grid_coords(width, height)));
  GridImage img(width, height);
  img.values.assign(tape.sigma.data(), tape.sigma.data() + tape.sigma.size());
  img.mask = domain_mask(mesh, width, height);
  img.lo = tape.sigma.minCoeff();
  img.hi = tape.sigma.maxCoeff();
  return img;
}

InrObjective::InrObjective(const Mesh& mesh, const MeasurementFrame& frame,
                           const ReconConfig& cfg, const Encoder& encoder, bool with_grid)
    : mesh_(&mesh),
      frame_(&frame),
      cfg_(cfg),
      model_(mesh, impedances(mesh, cfg.contact_impedance)),
      rhs_(injection_rhs(model_, frame.pattern)),
      node_features_(encode(encoder, normalized_nodes(mesh))) {
  if (frame.pattern.n_electrodes != int(mesh.electrode_count())) {
    throw ReconError("measurement frame electrode count does not match the mesh");
  }
  cfg_.ssim.data_range = 1.0;
  if (with_grid) {
    const Eigen::MatrixXd grid_features =
        encode(encoder, grid_coords(cfg.grid_width, cfg.grid_height));
    all_features_.resize(node_features_.rows() + grid_features.rows(), node_features_.cols());
    all_features_ << node_features_, grid_features;
    mask_ = domain_mask(mesh, cfg.grid_width, cfg.grid_height);
  }
}

InrObjective::Result InrObjective::evaluate(const MlpParams& params,
                                            const GuidanceFn& guidance) const {
  const bool guided = bool(guidance);
  if (guided && all_features_.size() == 0) {
    throw ReconError("objective was built without the image grid");
  }
  const Eigen::Index n_nodes = model_.node_count();
  const Eigen::Index n_grid = Eigen::Index(cfg_.grid_width) * cfg_.grid_height;
  const Eigen::MatrixXd& features = guided ? all_features_ : node_features_;
  const MlpTape tape = mlp_forward(params, features);
  const ConductivityField sigma{tape.sigma.head(n_nodes)};

  const CemSystem system = model_.factorize(sigma);
  const Eigen::MatrixXd x = system.solve(rhs_);
  const Eigen::VectorXd predicted =
      apply_selectors(frame_->pattern, x.bottomRows(model_.electrode_count()));
  const Eigen::VectorXd residual = cfg_.voltage_scale * (predicted - frame_->voltages);
  const JacobianMatrix jac =
      conductivity_jacobian(model_, system, x.topRows(n_nodes), frame_->pattern);
  const LossGrad tv = tv_loss_grad(*mesh_, model_.geometry(), sigma.values, cfg_.tv);

  Result out;
  out.terms.data = residual.squaredNorm();
  out.terms.tv = tv.loss;

  Eigen::VectorXd cotangent(features.rows());
  cotangent.head(n_nodes) =
      2.0 * cfg_.voltage_scale * (jac.transpose() * residual) + cfg_.alpha0 * tv.grad;

  if (guided) {
    GridImage grid(cfg_.grid_width, cfg_.grid_height);
    grid.values.assign(tape.sigma.data() + n_nodes, tape.sigma.data() + n_nodes + n_grid);
    grid.mask = mask_;
    const NormalizedImage norm = normalize_image(grid);
    if (const GridImage* target = guidance(norm.image)) {
      const LossGrad ss = ssim_loss_grad(norm.image, *target, cfg_.ssim);
      out.terms.ssim = ss.loss;
      cotangent.tail(n_grid) = cfg_.alpha1 * normalize_image_vjp(grid, norm, ss.grad);
    } else {
      cotangent.tail(n_grid).setZero();
    }
  }
  out.terms.total = out.terms.data + cfg_.alpha0 * out.terms.tv + cfg_.alpha1 * out.terms.ssim;
  if (!std::isfinite(out.terms.total) || !cotangent.allFinite()) {
    out.grad = Eigen::VectorXd::Constant(params.theta.size(),
                                         std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  out.grad = mlp_backward(params, features, tape, cotangent);
  return out;
}

ReconResult reconstruct_sdeit(const Mesh& mesh, const MeasurementFrame& frame,
                              const ReconConfig& cfg, GuidanceProvider* provider,
                              const ReconHooks& hooks) {
  cfg.validate();
  if (frame.pattern.n_electrodes != int(mesh.electrode_count())) {
    throw ReconError("measurement frame electrode count does not match the mesh");
  }

  Checkpoint st;
  if (hooks.resume) {
    st = *hooks.resume;
  } else {
    st.encoder = make_encoder(cfg.encoder_n, cfg.encoder_s, cfg.encoder_seed);
    st.params = mlp_init(default_widths(st.encoder.feature_dim()), cfg.mlp_seed, cfg.output);
    st.adam = AdamState::for_params(st.params);
  }

  const bool guided_run = cfg.alpha1 > 0.0 && provider != nullptr && cfg.n_total > cfg.n_pre;
  const InrObjective objective(mesh, frame, cfg, st.encoder, guided_run);

  ReconResult result;
  result.guidance_calls = st.guidance_calls;
  for (int e = st.next_iteration; e < cfg.n_total; ++e) {
    InrObjective::GuidanceFn guidance;
    if (guided_run && e >= cfg.n_pre) {
      guidance = [&](const GridImage& normalized) -> const GridImage* {
        if ((e - cfg.n_pre) % cfg.guidance.guide_every == 0) {
          GuidanceRequest req;
          req.image = normalized;
          req.prompt = cfg.guidance.prompt;
          req.strength = cfg.guidance.strength;
          req.steps = cfg.guidance.steps;
          req.guidance_scale = cfg.guidance.guidance_scale;
          req.seed = cfg.guidance.seed + std::uint64_t(e - cfg.n_pre);
          try {
            GuidanceResponse resp = provider->guide(req);
            validate_response(req, resp);
            st.last_guidance = std::move(resp.image);
            ++result.guidance_calls;
          } catch (const GuidanceError& err) {
            ++result.guidance_failures;
            warn(hooks, "iteration " + std::to_string(e) + ": guidance failed (" + err.what() +
                            (st.last_guidance ? "); reusing last guidance image"
                                              : "); skipping SSIM term"));
          }
        }
        return st.last_guidance ? &*st.last_guidance : nullptr;
      };
    }
    InrObjective::Result step = objective.evaluate(st.params, guidance);
    LossRecord rec = step.terms;
    rec.iteration = e;

    if (!std::isfinite(rec.total) || !step.grad.allFinite()) {
      st.next_iteration = e;
      st.guidance_calls = result.guidance_calls;
      write_checkpoint(hooks, st, "ckpt_abort.json");
      throw ReconError("non-finite loss at iteration " + std::to_string(e));
    }

    adam_step(st.adam, st.params, step.grad, cfg.lr);

    if (hooks.on_iteration) hooks.on_iteration(rec);
    st.history.push_back(rec);
    result.loss_history = st.history;

    if ((e + 1) % cfg.checkpoint_every == 0 && hooks.checkpoint_dir) {
      st.next_iteration = e + 1;
      st.guidance_calls = result.guidance_calls;
      write_checkpoint(hooks, st, checkpoint_name(e + 1));
    }
  }
  result.loss_history = st.history;
  result.iterations_run = int(st.history.size());

  result.sigma_meas = inr_nodes(mesh, st.encoder, st.params);
  result.sigma_grid = inr_grid(mesh, st.encoder, st.params, cfg.grid_width, cfg.grid_height);
  result.sigma_dm = st.last_guidance;
  const CemModel model(mesh, impedances(mesh, cfg.contact_impedance));
  const ForwardResult fwd = model.solve(result.sigma_meas, frame.pattern);
  result.final_data_loss = (cfg.voltage_scale * (fwd.predicted - frame.voltages)).squaredNorm();

  st.next_iteration = cfg.n_total;
  st.guidance_calls = result.guidance_calls;
  result.state = std::move(st);
  return result;
}

ReconResult reconstruct_inr_tv(const Mesh& mesh, const MeasurementFrame& frame,
                               const ReconConfig& cfg, const ReconHooks& hooks) {
  ReconConfig reduced = cfg;
  reduced.alpha1 = 0.0;
  return reconstruct_sdeit(mesh, frame, reduced, nullptr, hooks);
}

}  // namespace sdeit

#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>

#include "sdeit/fem.hpp"
#include "sdeit/guidance.hpp"
#include "sdeit/io.hpp"
#include "sdeit/mesh.hpp"
#include "sdeit/metrics.hpp"
#include "sdeit/phantom.hpp"
#include "sdeit/recon.hpp"
#include "sdeit/render.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#ifndef SDEIT_VERSION
#define SDEIT_VERSION "0.0.0"
#endif

namespace sdeit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliError : public std::runtime_error {
 public:
  CliError(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

const char* code_name(ExitCode code) {
  switch (code) {
    case kOk: return "ok";
    case kUsage: return "usage";
    case kMissingFile: return "missing_file";
    case kBadInput: return "bad_input";
    case kInvariant: return "invariant_violation";
    case kInverseCrime: return "inverse_crime";
    case kNumeric: return "numeric_failure";
    case kGuidance: return "guidance_failure";
    case kInternal: break;
  }
  return "internal";
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw CliError(kMissingFile, what + " not found: " + p.string());
}

double parse_snr(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw CliError(kUsage, "--snr expects a number or \"inf\", got \"" + s + "\"");
  }
}

/// One manifest per run directory; each command appends a step to it.
class RunRecord {
 public:
  RunRecord(fs::path dir, std::string command, std::vector<std::string> argv)
      : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    step_["command"] = std::move(command);
    step_["argv"] = std::move(argv);
    step_["started"] = utc_now();
    step_["inputs"] = json::object();
    step_["outputs"] = json::object();
    step_["seeds"] = json::object();
  }

  fs::path path(const std::string& name) const { return dir_ / name; }
  fs::path output(const std::string& key, const std::string& name) {
    step_["outputs"][key] = name;
    return dir_ / name;
  }
  void input(const std::string& key, const fs::path& p) { step_["inputs"][key] = p.string(); }
  void seed(const std::string& key, std::uint64_t v) { step_["seeds"][key] = v; }
  json& info() { return step_; }

  RunRecord(const RunRecord&) = delete;
  RunRecord& operator=(const RunRecord&) = delete;
  ~RunRecord() {
    if (finished_) return;
    try {
      finish("failed");
    } catch (...) {
    }
  }

  void finish(const std::string& status) {
    finished_ = true;
    step_["finished"] = utc_now();
    step_["status"] = status;
    const fs::path mpath = dir_ / "manifest.json";
    json manifest;
    if (fs::exists(mpath)) {
      try {
        manifest = json::parse(read_text(mpath));
      } catch (const std::exception&) {
        manifest = json();
      }
    }
    if (!manifest.is_object() || !manifest.contains("steps")) {
      manifest = json{{"tool", "sdeit"}, {"version", SDEIT_VERSION}, {"steps", json::array()}};
    }
    manifest["steps"].push_back(step_);
    write_text(mpath, manifest.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  json step_;
  bool finished_ = false;
};

std::vector<double> impedance_list(const std::vector<double>& z, std::size_t electrodes) {
  if (z.size() == 1) return std::vector<double>(electrodes, z.front());
  if (z.size() != electrodes) {
    throw CliError(kInvariant, "--contact-impedance needs 1 or " + std::to_string(electrodes) +
                                   " values, got " + std::to_string(z.size()));
  }
  return z;
}

void render_grid(const GridImage& img, const fs::path& path, bool blank_outside) {
  write_png(img, path, img.lo, img.hi, blank_outside);
}

GridImage with_range(GridImage img) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!img.mask.empty() && !img.mask[i]) continue;
    lo = std::min(lo, img.values[i]);
    hi = std::max(hi, img.values[i]);
  }
  if (lo > hi) lo = hi = 0.0;
  img.lo = lo;
  img.hi = hi;
  return img;
}

// ---------------------------------------------------------------------------

struct MeshGenArgs {
  double radius = 14.0;
  int electrodes = 16;
  double electrode_width = 2.5;
  int elements = 2176;
  std::string name = "mesh.json";
  std::string out_dir;
};

int cmd_mesh_gen(const MeshGenArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  RunRecord run(a.out_dir, "mesh-gen", argv);
  const Mesh mesh = make_disk_mesh(a.radius, a.electrodes, a.electrode_width, a.elements);
  save_mesh(mesh, run.output("mesh", a.name));
  run.info()["mesh"] = {{"nodes", mesh.node_count()},
                        {"elements", mesh.element_count()},
                        {"electrodes", mesh.electrode_count()}};
  run.finish("ok");
  out << "mesh: " << mesh.node_count() << " nodes, " << mesh.element_count() << " elements, "
      << mesh.electrode_count() << " electrodes -> " << run.path(a.name).string() << "\n";
  return kOk;
}

struct SimulateArgs {
  std::string forward_mesh;
  std::string inverse_mesh;
  std::string snr = "60";
  std::uint64_t seed = 0;
  double amplitude = 1.0;
  bool skip_injecting = false;
  std::vector<double> contact_impedance{kDefaultContactImpedance};
  double background = 1.0;
  double lung = 0.25;
  double heart = 1.5;
  int grid = 128;
  bool allow_inverse_crime = false;
  std::string out_dir;
};

bool same_mesh_file(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  if (fs::equivalent(a, b, ec)) return true;
  return read_text(a) == read_text(b);
}

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  require_file(a.forward_mesh, "forward mesh");
  require_file(a.inverse_mesh, "inverse mesh");
  if (!a.allow_inverse_crime && same_mesh_file(a.forward_mesh, a.inverse_mesh)) {
    throw CliError(kInverseCrime,
                   "forward and inverse meshes are identical; pass --allow-inverse-crime to "
                   "simulate on the inversion mesh anyway");
  }
  const double snr = parse_snr(a.snr);
  if (a.grid < 2) throw CliError(kInvariant, "--grid must be at least 2");

  RunRecord run(a.out_dir, "simulate", argv);
  run.input("forward_mesh", a.forward_mesh);
  run.input("inverse_mesh", a.inverse_mesh);
  run.seed("noise", a.seed);

  const Mesh fwd = load_mesh(a.forward_mesh);
  const Mesh inv = load_mesh(a.inverse_mesh);
  if (fwd.electrode_count() != inv.electrode_count()) {
    throw CliError(kInvariant, "forward and inverse meshes have different electrode counts");
  }
  const Phantom phantom = lungs_heart_phantom(normalization_for(fwd).half_extent, a.background,
                                              a.lung, a.heart);
  const auto patterns =
      adjacent_patterns(int(fwd.electrode_count()), a.amplitude, a.skip_injecting);
  const auto z = impedance_list(a.contact_impedance, fwd.electrode_count());
  const ForwardResult res = assemble_and_solve(fwd, sample_nodes(fwd, phantom), z, patterns);

  const MeasurementFrame clean{patterns, res.predicted, std::nullopt};
  const MeasurementFrame noisy = add_noise(clean, snr, a.seed);
  const double noise_power = (noisy.voltages - clean.voltages).squaredNorm();

  save_measurements(noisy, run.output("measurements", "measurements.json"));
  save_measurements(clean, run.output("measurements_clean", "measurements_clean.json"));
  save_field(sample_nodes(inv, phantom), run.output("truth_nodes", "truth_nodes.json"));
  const GridImage truth = phantom_raster(inv, phantom, a.grid, a.grid);
  save_grid_image(truth, run.output("truth_grid", "truth_grid.json"));
  render_grid(truth, run.output("truth_png", "truth.png"), true);

  json noise{{"snr_db", std::isinf(snr) ? json("inf") : json(snr)},
             {"noise_power_mV2", noise_power},
             {"noise_power_V2", noise_power * kDefaultVoltageScale * kDefaultVoltageScale},
             {"measurements", noisy.voltages.size()}};
  write_text(run.output("noise", "noise.json"), noise.dump(2) + "\n");
  run.info()["noise"] = noise;
  run.finish("ok");
  out << "simulated " << noisy.voltages.size() << " measurements, noise power " << noise_power
      << " mV^2 -> " << run.path("measurements.json").string() << "\n";
  return kOk;
}

struct ReconArgs {
  std::string mesh;
  std::string measurements;
  std::string method = "sdeit";
  std::string provider = "stub";
  std::string endpoint;
  double timeout_s = 30.0;
  std::string preset = "simulated";
  std::optional<double> alpha1;
  std::string prompt_preset = "basic";
  std::string prompt;
  ReconConfig cfg;
  int grid = 128;
  std::vector<double> contact_impedance{kDefaultContactImpedance};
  std::string resume;
  int stub_levels = StubOptions{}.levels;
  double stub_blur = StubOptions{}.blur_sigma;
  TvReconConfig tv;
  int log_every = 100;
  std::string out_dir;
};

std::string toml_string(const std::string& s) { return json(s).dump(); }

std::string toml_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Fully resolved reconstruct options; `sdeit reconstruct --config` on this
/// file repeats the run.
std::string resolved_config(const ReconArgs& a) {
  const ReconConfig& c = a.cfg;
  std::ostringstream os;
  os << "[reconstruct]\n"
     << "mesh=" << toml_string(a.mesh) << "\n"
     << "measurements=" << toml_string(a.measurements) << "\n"
     << "method=" << toml_string(a.method) << "\n"
     << "provider=" << toml_string(a.provider) << "\n";
  if (!a.endpoint.empty()) os << "endpoint=" << toml_string(a.endpoint) << "\n";
  os << "timeout=" << toml_number(a.timeout_s) << "\n"
     << "alpha0=" << toml_number(c.alpha0) << "\n"
     << "alpha1=" << toml_number(c.alpha1) << "\n"
     << "n-pre=" << c.n_pre << "\n"
     << "n-total=" << c.n_total << "\n"
     << "lr=" << toml_number(c.lr) << "\n"
     << "prompt=" << toml_string(c.guidance.prompt) << "\n"
     << "strength=" << toml_number(c.guidance.strength) << "\n"
     << "steps=" << c.guidance.steps << "\n"
     << "guidance-scale=" << toml_number(c.guidance.guidance_scale) << "\n"
     << "guide-seed=" << c.guidance.seed << "\n"
     << "guide-every=" << c.guidance.guide_every << "\n"
     << "grid=" << a.grid << "\n"
     << "encoder-n=" << c.encoder_n << "\n"
     << "encoder-s=" << toml_number(c.encoder_s) << "\n"
     << "encoder-seed=" << c.encoder_seed << "\n"
     << "mlp-seed=" << c.mlp_seed << "\n"
     << "output-scale=" << toml_number(c.output.scale) << "\n"
     << "tv-beta=" << toml_number(c.tv.beta) << "\n"
     << "ssim-window=" << c.ssim.window << "\n"
     << "ssim-k1=" << toml_number(c.ssim.k1) << "\n"
     << "ssim-k2=" << toml_number(c.ssim.k2) << "\n"
     << "ssim-masked=" << (c.ssim.masked ? "true" : "false") << "\n"
     << "contact-impedance=[";
  for (std::size_t i = 0; i < a.contact_impedance.size(); ++i) {
    os << (i ? "," : "") << toml_number(a.contact_impedance[i]);
  }
  os << "]\n"
     << "voltage-scale=" << toml_number(c.voltage_scale) << "\n"
     << "checkpoint-every=" << c.checkpoint_every << "\n";
  if (!a.resume.empty()) os << "resume=" << toml_string(a.resume) << "\n";
  os << "stub-levels=" << a.stub_levels << "\n"
     << "stub-blur=" << toml_number(a.stub_blur) << "\n"
     << "tv-alpha=" << toml_number(a.tv.alpha) << "\n"
     << "tv-baseline-beta=" << toml_number(a.tv.tv.beta) << "\n"
     << "tv-max-iters=" << a.tv.max_iters << "\n"
     << "log-every=" << a.log_every << "\n";
  return os.str();
}

int cmd_reconstruct(ReconArgs a, const std::vector<std::string>& argv, std::ostream& out,
                    std::ostream& err) {
  require_file(a.mesh, "mesh");
  require_file(a.measurements, "measurements");
  if (!a.resume.empty()) require_file(a.resume, "checkpoint");

  ReconConfig& cfg = a.cfg;
  cfg.alpha1 = a.alpha1 ? *a.alpha1 : (a.preset == "experimental" ? 3e-3 : 1e-2);
  cfg.guidance.prompt =
      !a.prompt.empty() ? a.prompt : (a.prompt_preset == "full" ? kFullPrompt : kBasicPrompt);
  cfg.grid_width = cfg.grid_height = a.grid;
  a.tv.grid_width = a.tv.grid_height = a.grid;
  try {
    cfg.validate();
  } catch (const ReconError& e) {
    throw CliError(kInvariant, e.what());
  }

  RunRecord run(a.out_dir, "reconstruct", argv);
  run.input("mesh", a.mesh);
  run.input("measurements", a.measurements);
  if (!a.resume.empty()) run.input("resume", a.resume);
  run.seed("encoder", cfg.encoder_seed);
  run.seed("mlp", cfg.mlp_seed);
  run.seed("guidance", cfg.guidance.seed);
  write_text(run.output("config", "config.toml"), resolved_config(a));
  run.info()["method"] = a.method;

  const Mesh mesh = load_mesh(a.mesh);
  const MeasurementFrame frame = load_measurements(a.measurements);
  if (frame.pattern.n_electrodes != int(mesh.electrode_count())) {
    throw CliError(kInvariant, "measurements use " + std::to_string(frame.pattern.n_electrodes) +
                                   " electrodes but the mesh has " +
                                   std::to_string(mesh.electrode_count()));
  }
  cfg.contact_impedance = a.tv.contact_impedance =
      impedance_list(a.contact_impedance, mesh.electrode_count());

  ReconHooks hooks;
  hooks.on_iteration = [&](const LossRecord& r) {
    if (a.log_every > 0 && r.iteration % a.log_every == 0) {
      out << "iter " << r.iteration << " data " << r.data << " tv " << r.tv << " ssim " << r.ssim
          << " total " << r.total << "\n";
    }
  };
  hooks.on_warning = [&](const std::string& msg) { err << "warning: " << msg << "\n"; };

  std::unique_ptr<GuidanceProvider> provider;
  if (a.method == "sdeit") {
    if (a.provider == "remote") {
      if (a.endpoint.empty()) {
        throw CliError(kUsage, "--provider remote needs --endpoint or SDEIT_GUIDE_URL");
      }
      RemoteOptions ro;
      ro.timeout = std::chrono::milliseconds(std::llround(a.timeout_s * 1000.0));
      provider = std::make_unique<RemoteProvider>(a.endpoint, ro);
    } else {
      provider = std::make_unique<StubProvider>(StubOptions{a.stub_levels, a.stub_blur});
    }
    run.info()["provider"] = provider->id();
  }

  const auto start = std::chrono::steady_clock::now();
  ReconResult result;
  if (a.method == "tv") {
    result = reconstruct_tv(mesh, frame, a.tv, hooks);
  } else {
    fs::create_directories(run.path("checkpoints"));
    hooks.checkpoint_dir = run.path("checkpoints");
    if (!a.resume.empty()) hooks.resume = load_checkpoint(a.resume);
    result = a.method == "sdeit" ? reconstruct_sdeit(mesh, frame, cfg, provider.get(), hooks)
                                 : reconstruct_inr_tv(mesh, frame, cfg, hooks);
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_loss_csv(result.loss_history, run.output("loss", "loss.csv"));
  save_field(result.sigma_meas, run.output("sigma_meas", "sigma_meas.json"));
  const GridImage grid = with_range(result.sigma_grid);
  save_grid_image(grid, run.output("sigma_grid", "sigma_grid.json"));
  render_grid(grid, run.output("sigma_grid_png", "sigma_grid.png"), true);
  if (result.sigma_dm) {
    save_grid_image(*result.sigma_dm, run.output("sigma_dm", "sigma_dm.json"));
    write_png(*result.sigma_dm, run.output("sigma_dm_png", "sigma_dm.png"), 0.0, 1.0, false);
  }
  if (result.state) save_checkpoint(*result.state, run.output("final_state", "final_state.json"));

  json summary{{"method", a.method},
               {"iterations", result.iterations_run},
               {"final_data_loss", result.final_data_loss},
               {"guidance_calls", result.guidance_calls},
               {"guidance_failures", result.guidance_failures},
               {"line_search_failed", result.line_search_failed},
               {"elapsed_s", elapsed}};
  if (provider) summary["provider"] = provider->id();
  write_text(run.output("summary", "summary.json"), summary.dump(2) + "\n");
  run.info()["summary"] = summary;
  run.finish("ok");
  out << a.method << ": " << result.iterations_run << " iterations, final data loss "
      << result.final_data_loss << ", " << elapsed << " s -> " << a.out_dir << "\n";
  return kOk;
}

struct EvaluateArgs {
  std::string recon;
  std::string truth;
  bool masked = false;
  std::optional<double> max_i;
  double background = 1.0;
  bool no_fill = false;
  int window = 7;
  std::string case_name = "case";
  std::string out_dir;
};

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  require_file(a.recon, "reconstruction image");
  require_file(a.truth, "truth image");
  RunRecord run(a.out_dir, "evaluate", argv);
  run.input("recon", a.recon);
  run.input("truth", a.truth);
  const GridImage recon = load_grid_image(a.recon);
  const GridImage truth = load_grid_image(a.truth);
  SsimConfig sc;
  sc.window = a.window;
  MetricsOptions opts;
  opts.max_i = a.max_i;
  opts.masked = a.masked;
  if (!a.no_fill) opts.background = a.background;
  const MetricsReport report = evaluate_metrics(recon, truth, sc, opts);
  write_text(run.output("metrics_json", "metrics.json"), metrics_to_json(report) + "\n");
  write_text(run.output("metrics_csv", "metrics.csv"),
             metrics_csv_header() + "\n" + metrics_csv_row(a.case_name, report) + "\n");
  run.info()["metrics"] = json::parse(metrics_to_json(report));
  run.finish("ok");
  out << metrics_csv_header() << "\n" << metrics_csv_row(a.case_name, report) << "\n";
  return kOk;
}

struct RenderArgs {
  std::string image;
  std::string name;
  std::optional<double> lo;
  std::optional<double> hi;
  bool blank_outside = false;
  std::string out_dir;
};

int cmd_render(const RenderArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  require_file(a.image, "image");
  RunRecord run(a.out_dir, "render", argv);
  run.input("image", a.image);
  const GridImage img = load_grid_image(a.image);
  const GridImage ranged = with_range(img);
  const double lo = a.lo.value_or(ranged.lo);
  const double hi = a.hi.value_or(ranged.hi);
  if (!(lo <= hi)) throw CliError(kInvariant, "render range needs lo <= hi");
  const std::string name =
      a.name.empty() ? fs::path(a.image).stem().string() + ".png" : a.name;
  write_png(img, run.output("png", name), lo, hi, a.blank_outside);
  run.info()["range"] = {lo, hi};
  run.finish("ok");
  out << "rendered " << run.path(name).string() << " range [" << lo << ", " << hi << "]\n";
  return kOk;
}

ExitCode classify(const std::exception& e) {
  if (const auto* c = dynamic_cast<const CliError*>(&e)) return c->code();
  if (const auto* m = dynamic_cast<const MeshError*>(&e)) {
    return m->kind() == MeshError::Kind::parse ? kBadInput : kInvariant;
  }
  if (const auto* f = dynamic_cast<const FemError*>(&e)) {
    return f->kind() == FemError::Kind::invalid_input ? kInvariant : kNumeric;
  }
  if (dynamic_cast<const GuidanceError*>(&e)) return kGuidance;
  if (dynamic_cast<const IoError*>(&e)) return kBadInput;
  if (dynamic_cast<const MetricsError*>(&e) || dynamic_cast<const SsimError*>(&e) ||
      dynamic_cast<const InrError*>(&e)) {
    return kInvariant;
  }
  if (dynamic_cast<const ReconError*>(&e)) return kNumeric;
  return kInternal;
}

int report(std::ostream& err, ExitCode code, const std::string& message) {
  err << json{{"error", code_name(code)}, {"exit", int(code)}, {"message", message}}.dump()
      << "\n";
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"EIT reconstruction toolkit", "sdeit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SDEIT_VERSION);

  MeshGenArgs mg;
  auto* mesh_gen = app.add_subcommand("mesh-gen", "Generate a disk mesh with boundary electrodes");
  mesh_gen->add_option("--radius", mg.radius, "Disk radius (cm)")->capture_default_str();
  mesh_gen->add_option("--electrodes", mg.electrodes, "Electrode count")->capture_default_str();
  mesh_gen->add_option("--electrode-width", mg.electrode_width, "Electrode width (cm)")
      ->capture_default_str();
  mesh_gen->add_option("--elements", mg.elements, "Target element count")->capture_default_str();
  mesh_gen->add_option("--name", mg.name, "Mesh file name in the run directory")
      ->capture_default_str();
  mesh_gen->add_option("--out-dir", mg.out_dir, "Run directory")->required();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate noisy measurements of the phantom");
  simulate->add_option("--forward-mesh", sim.forward_mesh, "Mesh used to simulate")->required();
  simulate->add_option("--inverse-mesh", sim.inverse_mesh, "Mesh that will be used to invert")
      ->required();
  simulate->add_option("--snr", sim.snr, "Noise level in dB, or inf")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
  simulate->add_option("--amplitude", sim.amplitude, "Injected current (mA)")
      ->capture_default_str();
  simulate->add_flag("--skip-injecting", sim.skip_injecting,
                     "Drop measurements on current-carrying electrodes");
  simulate->add_option("--contact-impedance", sim.contact_impedance,
                       "Contact impedance (Ohm cm), one value or one per electrode")
      ->capture_default_str();
  simulate->add_option("--background", sim.background, "Background conductivity (mS/cm)")
      ->capture_default_str();
  simulate->add_option("--lung", sim.lung, "Lung conductivity (mS/cm)")->capture_default_str();
  simulate->add_option("--heart", sim.heart, "Heart conductivity (mS/cm)")->capture_default_str();
  simulate->add_option("--grid", sim.grid, "Truth raster size")->capture_default_str();
  simulate->add_flag("--allow-inverse-crime", sim.allow_inverse_crime,
                     "Permit identical forward and inverse meshes");
  simulate->add_option("--out-dir", sim.out_dir, "Run directory")->required();

  ReconArgs rc;
  auto* recon = app.add_subcommand("reconstruct", "Reconstruct conductivity from measurements");
  recon->add_option("--mesh", rc.mesh, "Inverse mesh")->required();
  recon->add_option("--measurements", rc.measurements, "Measurement file")->required();
  recon->add_option("--method", rc.method, "tv | inr-tv | sdeit")
      ->check(CLI::IsMember({"tv", "inr-tv", "sdeit"}))
      ->capture_default_str();
  recon->add_option("--provider", rc.provider, "Guidance provider: stub | remote")
      ->check(CLI::IsMember({"stub", "remote"}))
      ->capture_default_str();
  recon->add_option("--endpoint", rc.endpoint, "Guidance service URL")->envname("SDEIT_GUIDE_URL");
  recon->add_option("--timeout", rc.timeout_s, "Guidance request timeout (s)")
      ->capture_default_str();
  recon->add_option("--preset", rc.preset, "Weight preset: simulated | experimental")
      ->check(CLI::IsMember({"simulated", "experimental"}))
      ->capture_default_str();
  recon->add_option("--alpha0", rc.cfg.alpha0, "TV weight")->capture_default_str();
  recon->add_option("--alpha1", rc.alpha1, "SSIM weight (default from --preset)");
  recon->add_option("--n-pre", rc.cfg.n_pre, "Iterations before guidance")->capture_default_str();
  recon->add_option("--n-total", rc.cfg.n_total, "Total iterations")->capture_default_str();
  recon->add_option("--lr", rc.cfg.lr, "Adam learning rate")->capture_default_str();
  recon->add_option("--prompt-preset", rc.prompt_preset, "basic | full")
      ->check(CLI::IsMember({"basic", "full"}))
      ->capture_default_str();
  recon->add_option("--prompt", rc.prompt, "Guidance prompt (overrides --prompt-preset)");
  recon->add_option("--strength", rc.cfg.guidance.strength, "Denoising strength D")
      ->capture_default_str();
  recon->add_option("--steps", rc.cfg.guidance.steps, "Diffusion steps T")->capture_default_str();
  recon->add_option("--guidance-scale", rc.cfg.guidance.guidance_scale, "Guidance scale G")
      ->capture_default_str();
  recon->add_option("--guide-seed", rc.cfg.guidance.seed, "Base guidance seed")
      ->capture_default_str();
  recon->add_option("--guide-every", rc.cfg.guidance.guide_every,
                    "Call the provider every k guided iterations")
      ->capture_default_str();
  recon->add_option("--grid", rc.grid, "Image grid size")->capture_default_str();
  recon->add_option("--encoder-n", rc.cfg.encoder_n, "Fourier frequency count")
      ->capture_default_str();
  recon->add_option("--encoder-s", rc.cfg.encoder_s, "Fourier bandwidth")->capture_default_str();
  recon->add_option("--encoder-seed", rc.cfg.encoder_seed, "Encoder seed")->capture_default_str();
  recon->add_option("--mlp-seed", rc.cfg.mlp_seed, "MLP initialisation seed")
      ->capture_default_str();
  recon->add_option("--output-scale", rc.cfg.output.scale, "Softplus output scale")
      ->capture_default_str();
  recon->add_option("--tv-beta", rc.cfg.tv.beta, "TV smoothing for the INR runs")
      ->capture_default_str();
  recon->add_option("--ssim-window", rc.cfg.ssim.window, "SSIM window")->capture_default_str();
  recon->add_option("--ssim-k1", rc.cfg.ssim.k1, "SSIM k1")->capture_default_str();
  recon->add_option("--ssim-k2", rc.cfg.ssim.k2, "SSIM k2")->capture_default_str();
  recon->add_flag("--ssim-masked", rc.cfg.ssim.masked, "Average SSIM over in-domain windows");
  recon->add_option("--contact-impedance", rc.contact_impedance,
                    "Contact impedance (Ohm cm), one value or one per electrode")
      ->capture_default_str();
  recon->add_option("--voltage-scale", rc.cfg.voltage_scale,
                    "Residual scale before squaring (1e-3: data term in V^2)")
      ->capture_default_str();
  recon->add_option("--checkpoint-every", rc.cfg.checkpoint_every, "Checkpoint stride")
      ->capture_default_str();
  recon->add_option("--resume", rc.resume, "Resume from a checkpoint file");
  recon->add_option("--stub-levels", rc.stub_levels, "Stub quantisation levels")
      ->capture_default_str();
  recon->add_option("--stub-blur", rc.stub_blur, "Stub blur sigma at D = 1 (pixels)")
      ->capture_default_str();
  recon->add_option("--tv-alpha", rc.tv.alpha, "TV baseline weight")->capture_default_str();
  recon->add_option("--tv-baseline-beta", rc.tv.tv.beta, "TV baseline smoothing")
      ->capture_default_str();
  recon->add_option("--tv-max-iters", rc.tv.max_iters, "TV baseline iteration cap")
      ->capture_default_str();
  recon->add_option("--log-every", rc.log_every, "Progress line stride (0: quiet)")
      ->capture_default_str();
  recon->add_option("--out-dir", rc.out_dir, "Run directory")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compare a reconstruction with the truth");
  evaluate->add_option("--recon", ev.recon, "Reconstructed grid image")->required();
  evaluate->add_option("--truth", ev.truth, "Ground-truth grid image")->required();
  evaluate->add_flag("--masked", ev.masked, "Restrict metrics to the domain mask");
  evaluate->add_option("--max-i", ev.max_i, "PSNR peak (default: max of truth)");
  evaluate->add_option("--background", ev.background, "Fill value outside the domain")
      ->capture_default_str();
  evaluate->add_flag("--no-fill", ev.no_fill, "Keep reconstruction values outside the domain");
  evaluate->add_option("--ssim-window", ev.window, "SSIM window")->capture_default_str();
  evaluate->add_option("--case", ev.case_name, "Case label for the CSV row")->capture_default_str();
  evaluate->add_option("--out-dir", ev.out_dir, "Run directory")->required();

  RenderArgs rd;
  auto* render = app.add_subcommand("render", "Render a grid image to PNG");
  render->add_option("--image", rd.image, "Grid image")->required();
  render->add_option("--name", rd.name, "PNG file name (default: image stem)");
  render->add_option("--lo", rd.lo, "Colormap lower bound (default: image min)");
  render->add_option("--hi", rd.hi, "Colormap upper bound (default: image max)");
  render->add_flag("--blank-outside", rd.blank_outside, "Paint pixels outside the domain white");
  render->add_option("--out-dir", rd.out_dir, "Run directory")->required();

  app.set_config("--config", "",
                 "TOML file; a [subcommand] section may set any of that subcommand's options");

  // --config may be given after the subcommand name; it is an app-level option
  std::vector<std::string> ordered;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      ordered.push_back(args[i]);
      ordered.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      ordered.push_back(args[i]);
    } else {
      rest.push_back(args[i]);
    }
  }
  ordered.insert(ordered.end(), rest.begin(), rest.end());
  std::vector<std::string> reversed(ordered.rbegin(), ordered.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    if (dynamic_cast<const CLI::FileError*>(&e) != nullptr) return report(err, kMissingFile, msg);
    return report(err, kUsage, msg);
  }

  try {
    if (mesh_gen->parsed()) return cmd_mesh_gen(mg, args, out);
    if (simulate->parsed()) return cmd_simulate(sim, args, out);
    if (recon->parsed()) return cmd_reconstruct(rc, args, out, err);
    if (evaluate->parsed()) return cmd_evaluate(ev, args, out);
    if (render->parsed()) return cmd_render(rd, args, out);
  } catch (const std::exception& e) {
    return report(err, classify(e), e.what());
  }
  return report(err, kUsage, "no subcommand given");
}

}  // namespace sdeit::cli

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "sdeit/io.hpp"

namespace sdeit {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_json(const json& doc, const std::filesystem::path& path) {
  write_text(path, doc.dump() + "\n");
}

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd json_vector(const json& j) {
  const auto vals = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), Eigen::Index(vals.size()));
}

json grid_json(const GridImage& img) {
  json doc;
  doc["width"] = img.width;
  doc["height"] = img.height;
  doc["values"] = img.values;
  doc["mask"] = img.mask;
  doc["lo"] = img.lo;
  doc["hi"] = img.hi;
  return doc;
}

GridImage json_grid(const json& doc) {
  GridImage img;
  img.width = doc.at("width").get<int>();
  img.height = doc.at("height").get<int>();
  img.values = doc.at("values").get<std::vector<double>>();
  if (doc.contains("mask")) {
    img.mask = doc.at("mask").get<std::vector<std::uint8_t>>();
  } else {
    img.mask.assign(img.values.size(), 1);
  }
  img.lo = doc.value("lo", 0.0);
  img.hi = doc.value("hi", 0.0);
  if (img.width < 1 || img.height < 1 ||
      img.values.size() != std::size_t(img.width) * std::size_t(img.height) ||
      img.mask.size() != img.values.size()) {
    throw IoError("grid image dimensions do not match its value count");
  }
  if (img.lo > img.hi) throw IoError("grid image has lo > hi");
  return img;
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void save_measurements(const MeasurementFrame& frame, const std::filesystem::path& path) {
  json doc;
  doc["n_electrodes"] = frame.pattern.n_electrodes;
  doc["protocol"] = {{"type", "adjacent"},
                     {"amplitude_mA", frame.pattern.amplitude},
                     {"skip_injecting", frame.pattern.skip_injecting}};
  doc["voltages"] = vector_json(frame.voltages);
  if (frame.noise_snr_db) {
    if (std::isinf(*frame.noise_snr_db)) {
      doc["snr_db"] = "inf";
    } else {
      doc["snr_db"] = *frame.noise_snr_db;
    }
  } else {
    doc["snr_db"] = nullptr;
  }
  write_json(doc, path);
}

MeasurementFrame load_measurements(const std::filesystem::path& path) {
  const json doc = read_json(path);
  try {
    const auto& proto = doc.at("protocol");
    if (proto.at("type").get<std::string>() != "adjacent") {
      throw IoError("unsupported stimulation protocol " + proto.at("type").dump());
    }
    MeasurementFrame frame;
    frame.pattern = adjacent_patterns(doc.at("n_electrodes").get<int>(),
                                      proto.at("amplitude_mA").get<double>(),
                                      proto.value("skip_injecting", false));
    frame.voltages = json_vector(doc.at("voltages"));
    if (std::size_t(frame.voltages.size()) != frame.pattern.measurement_count()) {
      throw IoError("measurement file has " + std::to_string(frame.voltages.size()) +
                    " voltages but the protocol defines " +
                    std::to_string(frame.pattern.measurement_count()));
    }
    if (doc.contains("snr_db") && !doc.at("snr_db").is_null()) {
      const auto& snr = doc.at("snr_db");
      frame.noise_snr_db = snr.is_string() ? std::numeric_limits<double>::infinity()
                                           : snr.get<double>();
    }
    return frame;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_grid_image(const GridImage& img, const std::filesystem::path& path) {
  write_json(grid_json(img), path);
}

GridImage load_grid_image(const std::filesystem::path& path) {
  try {
    return json_grid(read_json(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_field(const ConductivityField& field, const std::filesystem::path& path) {
  write_json(json{{"units", "mS/cm"}, {"values", vector_json(field.values)}}, path);
}

ConductivityField load_field(const std::filesystem::path& path) {
  try {
    return {json_vector(read_json(path).at("values"))};
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json doc;
  doc["encoder"] = {{"seed", ckpt.encoder.seed},
                    {"bandwidth", ckpt.encoder.bandwidth},
                    {"n", ckpt.encoder.frequency_count()},
                    {"B", vector_json(Eigen::Map<const Eigen::VectorXd>(
                              ckpt.encoder.frequencies.data(), ckpt.encoder.frequencies.size()))}};
  doc["mlp"] = {{"widths", ckpt.params.widths},
                {"theta", vector_json(ckpt.params.theta)},
                {"output_floor", ckpt.params.output.floor},
                {"output_scale", ckpt.params.output.scale}};
  doc["adam"] = {{"m", vector_json(ckpt.adam.m)},
                 {"v", vector_json(ckpt.adam.v)},
                 {"step", ckpt.adam.step},
                 {"beta1", ckpt.adam.beta1},
                 {"beta2", ckpt.adam.beta2},
                 {"eps", ckpt.adam.eps}};
  doc["next_iteration"] = ckpt.next_iteration;
  doc["guidance_calls"] = ckpt.guidance_calls;
  json hist = json::array();
  for (const auto& r : ckpt.history) hist.push_back({r.iteration, r.data, r.tv, r.ssim, r.total});
  doc["history"] = std::move(hist);
  if (ckpt.last_guidance) doc["last_guidance"] = grid_json(*ckpt.last_guidance);
  write_json(doc, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const json doc = read_json(path);
  try {
    Checkpoint c;
    const auto& enc = doc.at("encoder");
    c.encoder.seed = enc.at("seed").get<std::uint64_t>();
    c.encoder.bandwidth = enc.at("bandwidth").get<double>();
    const int n = enc.at("n").get<int>();
    const Eigen::VectorXd b = json_vector(enc.at("B"));
    if (b.size() != 2 * n) throw IoError("checkpoint encoder matrix has wrong size");
    c.encoder.frequencies = Eigen::Map<const Eigen::MatrixXd>(b.data(), n, 2);

    const auto& mlp = doc.at("mlp");
    c.params.widths = mlp.at("widths").get<std::vector<int>>();
    c.params.theta = json_vector(mlp.at("theta"));
    c.params.output.floor = mlp.at("output_floor").get<double>();
    c.params.output.scale = mlp.at("output_scale").get<double>();
    if (c.params.theta.size() != parameter_count(c.params.widths)) {
      throw IoError("checkpoint parameter count does not match layer widths");
    }

    const auto& adam = doc.at("adam");
    c.adam.m = json_vector(adam.at("m"));
    c.adam.v = json_vector(adam.at("v"));
    c.adam.step = adam.at("step").get<long>();
    c.adam.beta1 = adam.at("beta1").get<double>();
    c.adam.beta2 = adam.at("beta2").get<double>();
    c.adam.eps = adam.at("eps").get<double>();

    c.next_iteration = doc.at("next_iteration").get<int>();
    c.guidance_calls = doc.value("guidance_calls", 0);
    for (const auto& r : doc.at("history")) {
      c.history.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(),
                           r.at(3).get<double>(), r.at(4).get<double>()});
    }
    if (doc.contains("last_guidance")) c.last_guidance = json_grid(doc.at("last_guidance"));
    return c;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "iteration,data,tv,ssim,total\n";
  os << std::setprecision(17);
  for (const auto& r : history) {
    os << r.iteration << ',' << r.data << ',' << r.tv << ',' << r.ssim << ',' << r.total << '\n';
  }
  write_text(path, os.str());
}

}  // namespace sdeit

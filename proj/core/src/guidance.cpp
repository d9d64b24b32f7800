#include "sdeit/guidance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace sdeit {

using nlohmann::json;

void validate_request(const GuidanceRequest& req) {
  if (!(req.strength >= 0.0 && req.strength <= 1.0)) {
    throw GuidanceInvariantError("denoising strength must lie in [0,1]");
  }
  if (req.steps < 1) throw GuidanceInvariantError("diffusion steps must be >= 1");
  if (!(req.guidance_scale >= 0.0)) throw GuidanceInvariantError("guidance scale must be >= 0");
  if (req.image.width < 1 || req.image.height < 1 ||
      req.image.values.size() != std::size_t(req.image.width) * req.image.height) {
    throw GuidanceInvariantError("request image has inconsistent dimensions");
  }
  for (double v : req.image.values) {
    if (!(v >= 0.0 && v <= 1.0)) throw GuidanceInvariantError("request pixels must lie in [0,1]");
  }
}

void validate_response(const GuidanceRequest& req, const GuidanceResponse& resp) {
  if (resp.image.width != req.image.width || resp.image.height != req.image.height ||
      resp.image.values.size() != req.image.values.size()) {
    std::ostringstream os;
    os << "guidance response is " << resp.image.width << "x" << resp.image.height
       << " but request was " << req.image.width << "x" << req.image.height;
    throw GuidanceInvariantError(os.str());
  }
  for (double v : resp.image.values) {
    if (!(v >= 0.0 && v <= 1.0)) throw GuidanceInvariantError("response pixels must lie in [0,1]");
  }
}

NormalizedImage normalize_image(const GridImage& raster) {
  for (double v : raster.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("normalize_image: non-finite pixel");
  }
  const auto [mn, mx] = std::minmax_element(raster.values.begin(), raster.values.end());
  NormalizedImage out;
  out.image = raster;
  out.lo = *mn;
  out.hi = *mx;
  const double range = out.hi - out.lo;
  if (range < 1e-12) {
    out.hi = out.lo;
    std::fill(out.image.values.begin(), out.image.values.end(), 0.5);
  } else {
    for (double& v : out.image.values) v = (v - out.lo) / range;
  }
  out.image.lo = out.lo;
  out.image.hi = out.hi;
  return out;
}

GridImage denormalize_image(const GridImage& normalized, double lo, double hi) {
  GridImage out = normalized;
  for (double& v : out.values) v = lo + v * (hi - lo);
  const auto [mn, mx] = std::minmax_element(out.values.begin(), out.values.end());
  out.lo = *mn;
  out.hi = *mx;
  return out;
}

Eigen::VectorXd normalize_image_vjp(const GridImage& raster, const NormalizedImage& normalized,
                                    const Eigen::VectorXd& grad_normalized) {
  const Eigen::Index n = Eigen::Index(raster.values.size());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
  const double range = normalized.hi - normalized.lo;
  if (range < 1e-12) return grad;

  const auto& v = raster.values;
  const auto imin = std::distance(v.begin(), std::min_element(v.begin(), v.end()));
  const auto imax = std::distance(v.begin(), std::max_element(v.begin(), v.end()));
  double to_lo = 0.0, to_hi = 0.0;
  for (Eigen::Index p = 0; p < n; ++p) {
    const double x = normalized.image.values[p];
    grad[p] = grad_normalized[p] / range;
    to_lo += grad_normalized[p] * (x - 1.0) / range;
    to_hi -= grad_normalized[p] * x / range;
  }
  grad[imin] += to_lo;
  grad[imax] += to_hi;
  return grad;
}

namespace {

std::vector<double> gaussian_blur(const GridImage& img, double sd) {
  const int radius = int(std::ceil(3.0 * sd));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-double(i) * i / (2.0 * sd * sd));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = img.width, h = img.height;
  std::vector<double> tmp(img.values.size()), out(img.values.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * img.values[std::size_t(r) * w + std::clamp(c + i, 0, w - 1)];
      }
      tmp[std::size_t(r) * w + c] = acc;
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * tmp[std::size_t(std::clamp(r + i, 0, h - 1)) * w + c];
      }
      out[std::size_t(r) * w + c] = acc;
    }
  }
  return out;
}

}  // namespace

GuidanceResponse stub_guide(const GuidanceRequest& req, const StubOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (opts.levels < 2) throw std::invalid_argument("stub_guide: levels must be >= 2");
  validate_request(req);

  GuidanceResponse resp;
  resp.provider_id = "stub";
  resp.image = req.image;
  if (req.strength == 0.0) return resp;

  std::vector<double> vals = opts.blur_sigma > 0.0
                                 ? gaussian_blur(req.image, opts.blur_sigma * req.strength)
                                 : req.image.values;

  std::vector<double> sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> thresholds;
  for (int j = 1; j < opts.levels; ++j) {
    thresholds.push_back(sorted[std::min(n - 1, std::size_t(j) * n / std::size_t(opts.levels))]);
  }
  auto class_of = [&](double v) {
    int c = 0;
    for (double t : thresholds) c += (v >= t) ? 1 : 0;
    return c;
  };
  std::vector<double> sums(opts.levels, 0.0);
  std::vector<std::size_t> counts(opts.levels, 0);
  std::vector<int> cls(n);
  for (std::size_t i = 0; i < n; ++i) {
    cls[i] = class_of(vals[i]);
    sums[cls[i]] += vals[i];
    counts[cls[i]] += 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    resp.image.values[i] = std::clamp(sums[cls[i]] / double(counts[cls[i]]), 0.0, 1.0);
  }
  resp.image.lo = 0.0;
  resp.image.hi = 1.0;
  resp.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return resp;
}

std::string StubProvider::id() const {
  std::ostringstream os;
  os << "stub(levels=" << opts_.levels << ",blur_sigma=" << opts_.blur_sigma << ")";
  return os.str();
}

std::string request_to_json(const GuidanceRequest& req) {
  json doc;
  doc["width"] = req.image.width;
  doc["height"] = req.image.height;
  doc["pixels"] = req.image.values;
  doc["prompt"] = req.prompt;
  doc["strength"] = req.strength;
  doc["steps"] = req.steps;
  doc["guidance_scale"] = req.guidance_scale;
  doc["seed"] = req.seed;
  return doc.dump();
}

GuidanceRequest request_from_json(const std::string& body) {
  try {
    const json doc = json::parse(body);
    GuidanceRequest req;
    req.image.width = doc.at("width").get<int>();
    req.image.height = doc.at("height").get<int>();
    req.image.values = doc.at("pixels").get<std::vector<double>>();
    req.image.mask.assign(req.image.values.size(), 1);
    req.image.hi = 1.0;
    req.prompt = doc.at("prompt").get<std::string>();
    req.strength = doc.at("strength").get<double>();
    req.steps = doc.at("steps").get<int>();
    req.guidance_scale = doc.at("guidance_scale").get<double>();
    req.seed = doc.at("seed").get<std::uint64_t>();
    return req;
  } catch (const json::exception& e) {
    throw GuidanceMalformedError(std::string("malformed guidance request: ") + e.what());
  }
}

std::string response_to_json(const GuidanceResponse& resp) {
  json doc;
  doc["width"] = resp.image.width;
  doc["height"] = resp.image.height;
  doc["pixels"] = resp.image.values;
  doc["provider_id"] = resp.provider_id;
  doc["elapsed_s"] = resp.elapsed_s;
  return doc.dump();
}

GuidanceResponse response_from_json(const std::string& body) {
  try {
    const json doc = json::parse(body);
    GuidanceResponse resp;
    resp.image.width = doc.at("width").get<int>();
    resp.image.height = doc.at("height").get<int>();
    resp.image.values = doc.at("pixels").get<std::vector<double>>();
    resp.image.mask.assign(resp.image.values.size(), 1);
    resp.image.hi = 1.0;
    resp.provider_id = doc.value("provider_id", std::string());
    resp.elapsed_s = doc.value("elapsed_s", 0.0);
    return resp;
  } catch (const json::exception& e) {
    throw GuidanceMalformedError(std::string("malformed guidance response: ") + e.what());
  }
}

}  // namespace sdeit

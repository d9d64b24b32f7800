#include "sdeit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace sdeit {

MetricsReport evaluate_metrics(const GridImage& recon, const GridImage& truth,
                               const SsimConfig& cfg, const MetricsOptions& opts) {
  if (recon.width != truth.width || recon.height != truth.height ||
      recon.values.size() != truth.values.size()) {
    throw MetricsError("recon and truth images differ in size");
  }
  GridImage x = recon;
  const bool have_mask = truth.mask.size() == truth.values.size();
  if (opts.background && have_mask) {
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      if (!truth.mask[i]) x.values[i] = *opts.background;
    }
  }
  if (have_mask) x.mask = truth.mask;

  auto included = [&](std::size_t i) { return !opts.masked || !have_mask || truth.mask[i]; };

  double n = 0.0, sum_x = 0.0, sum_t = 0.0, sq_err = 0.0;
  double t_min = std::numeric_limits<double>::infinity(), t_max = -t_min;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    if (!included(i)) continue;
    const double a = x.values[i], b = truth.values[i];
    n += 1.0;
    sum_x += a;
    sum_t += b;
    sq_err += (a - b) * (a - b);
    t_min = std::min(t_min, b);
    t_max = std::max(t_max, b);
  }
  if (n == 0.0) throw MetricsError("no pixels to evaluate");

  const double mean_x = sum_x / n, mean_t = sum_t / n;
  double sxy = 0.0, sxx = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    if (!included(i)) continue;
    const double dx = x.values[i] - mean_x, dt = truth.values[i] - mean_t;
    sxy += dx * dt;
    sxx += dx * dx;
    stt += dt * dt;
  }
  if (stt == 0.0) throw MetricsError("CC undefined: ground truth is constant");
  if (sxx == 0.0) throw MetricsError("CC undefined: reconstruction is constant");

  MetricsReport rep;
  rep.width = truth.width;
  rep.height = truth.height;
  rep.masked = opts.masked;
  rep.mse = sq_err / n;
  const double peak = opts.max_i.value_or(t_max);
  rep.psnr = rep.mse == 0.0 ? std::numeric_limits<double>::infinity()
                            : 10.0 * std::log10(peak * peak / rep.mse);
  rep.cc = std::clamp(sxy / std::sqrt(sxx * stt), -1.0, 1.0);
  rep.ssim = cfg;
  rep.ssim.data_range = t_max - t_min;
  rep.ssim.masked = opts.masked;
  rep.mssim = mssim(x, truth, rep.ssim);
  return rep;
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::json doc;
  doc["mssim"] = r.mssim;
  if (std::isinf(r.psnr)) {
    doc["psnr"] = "inf";
  } else {
    doc["psnr"] = r.psnr;
  }
  doc["mse"] = r.mse;
  doc["cc"] = r.cc;
  doc["grid"] = {{"height", r.height}, {"width", r.width}};
  doc["ssim"] = {{"window", r.ssim.window},
                 {"k1", r.ssim.k1},
                 {"k2", r.ssim.k2},
                 {"data_range", r.ssim.data_range}};
  doc["masked"] = r.masked;
  return doc.dump(2);
}

std::string metrics_csv_header() { return "case,mssim,cc,psnr,mse"; }

std::string metrics_csv_row(const std::string& case_name, const MetricsReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << case_name << ',' << r.mssim << ',' << r.cc << ',';
  if (std::isinf(r.psnr)) {
    os << "inf";
  } else {
    os << r.psnr;
  }
  os << ',' << r.mse;
  return os.str();
}

}  // namespace sdeit

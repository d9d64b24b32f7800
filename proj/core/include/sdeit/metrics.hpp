#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "sdeit/mesh.hpp"
#include "sdeit/regularizers.hpp"

namespace sdeit {

struct MetricsReport {
  double mssim = 0.0;
  double psnr = 0.0;  // +inf when mse == 0
  double mse = 0.0;
  double cc = 0.0;
  int width = 0;
  int height = 0;
  SsimConfig ssim;
  bool masked = false;
};

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MetricsOptions {
  /// Peak value for PSNR; defaults to max(truth).
  std::optional<double> max_i;
  /// Restrict every metric to pixels inside truth.mask.
  bool masked = false;
  /// Replace recon pixels outside truth.mask with this value first.
  std::optional<double> background;
};

/// MSE, PSNR (peak = max of truth), Pearson CC and mSSIM with data range
/// equal to the truth range (cfg.data_range is overridden).
MetricsReport evaluate_metrics(const GridImage& recon, const GridImage& truth,
                               const SsimConfig& cfg, const MetricsOptions& opts = {});

std::string metrics_to_json(const MetricsReport& report);
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& case_name, const MetricsReport& report);

}  // namespace sdeit

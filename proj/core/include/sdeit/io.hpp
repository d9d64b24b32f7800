#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdeit/fem.hpp"
#include "sdeit/mesh.hpp"
#include "sdeit/recon.hpp"

namespace sdeit {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {"n_electrodes", "protocol": {"type": "adjacent", "amplitude_mA",
/// "skip_injecting"}, "voltages", "snr_db"}
void save_measurements(const MeasurementFrame& frame, const std::filesystem::path& path);
MeasurementFrame load_measurements(const std::filesystem::path& path);

/// {"width", "height", "values", "mask", "lo", "hi"}
void save_grid_image(const GridImage& img, const std::filesystem::path& path);
GridImage load_grid_image(const std::filesystem::path& path);

void save_field(const ConductivityField& field, const std::filesystem::path& path);
ConductivityField load_field(const std::filesystem::path& path);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// iteration,data,tv,ssim,total with round-trip precision.
void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace sdeit

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "sdeit/mesh.hpp"

namespace sdeit {

struct GuidanceRequest {
  GridImage image;  // values in [0,1]
  std::string prompt;
  double strength = 0.4;       // D
  int steps = 50;              // T
  double guidance_scale = 0.8; // G
  std::uint64_t seed = 0;
};

struct GuidanceResponse {
  GridImage image;
  std::string provider_id;
  double elapsed_s = 0.0;
};

/// Raised for any provider failure. The reconstruction loop applies its
/// fallback policy to every subclass alike.
class GuidanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class GuidanceTransportError : public GuidanceError { public: using GuidanceError::GuidanceError; };
class GuidanceTimeoutError : public GuidanceError { public: using GuidanceError::GuidanceError; };
class GuidanceStatusError : public GuidanceError {
 public:
  GuidanceStatusError(int status, const std::string& what) : GuidanceError(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};
class GuidanceMalformedError : public GuidanceError { public: using GuidanceError::GuidanceError; };
class GuidanceInvariantError : public GuidanceError { public: using GuidanceError::GuidanceError; };

/// Throws GuidanceInvariantError unless D in [0,1], T >= 1, G >= 0 and the
/// image is in [0,1].
void validate_request(const GuidanceRequest& req);
/// Throws GuidanceInvariantError unless the response matches the request
/// dimensions and lies in [0,1].
void validate_response(const GuidanceRequest& req, const GuidanceResponse& resp);

struct NormalizedImage {
  GridImage image;
  double lo = 0.0;
  double hi = 0.0;
};

/// Min-max map onto [0,1]. A range below 1e-12 yields a constant 0.5 image
/// with lo = hi = the first value.
NormalizedImage normalize_image(const GridImage& raster);
GridImage denormalize_image(const GridImage& normalized, double lo, double hi);

/// Vector-Jacobian product of normalize_image: maps dL/d(normalized) to
/// dL/d(raster), including the dependence of lo and hi on the extreme pixels.
Eigen::VectorXd normalize_image_vjp(const GridImage& raster, const NormalizedImage& normalized,
                                    const Eigen::VectorXd& grad_normalized);

struct StubOptions {
  int levels = 8;
  double blur_sigma = 2.0;  // pixels at D = 1
};

/// Deterministic stand-in for a diffusion backend: separable Gaussian blur
/// with standard deviation blur_sigma * D (replicated borders, truncated at
/// ceil(3 sigma)), then quantisation to `levels` classes at quantile
/// thresholds, each class replaced by its mean. D = 0 returns the input.
GuidanceResponse stub_guide(const GuidanceRequest& req, const StubOptions& opts);

struct RemoteOptions {
  std::chrono::milliseconds timeout{30000};
};

/// POST /v1/guide against `endpoint` (e.g. "http://127.0.0.1:8080").
GuidanceResponse remote_guide(const std::string& endpoint, const GuidanceRequest& req,
                              const RemoteOptions& opts = {});

/// GET /v1/health; returns the reported mode.
std::string remote_health(const std::string& endpoint, const RemoteOptions& opts = {});

/// JSON wire format shared with the guidance service.
std::string request_to_json(const GuidanceRequest& req);
GuidanceRequest request_from_json(const std::string& body);
std::string response_to_json(const GuidanceResponse& resp);
GuidanceResponse response_from_json(const std::string& body);

class GuidanceProvider {
 public:
  virtual ~GuidanceProvider() = default;
  virtual GuidanceResponse guide(const GuidanceRequest& req) = 0;
  virtual std::string id() const = 0;
};

class StubProvider : public GuidanceProvider {
 public:
  explicit StubProvider(StubOptions opts = {}) : opts_(opts) {}
  GuidanceResponse guide(const GuidanceRequest& req) override { return stub_guide(req, opts_); }
  std::string id() const override;

 private:
  StubOptions opts_;
};

class RemoteProvider : public GuidanceProvider {
 public:
  RemoteProvider(std::string endpoint, RemoteOptions opts = {})
      : endpoint_(std::move(endpoint)), opts_(opts) {}
  GuidanceResponse guide(const GuidanceRequest& req) override {
    return remote_guide(endpoint_, req, opts_);
  }
  std::string id() const override { return "remote:" + endpoint_; }

 private:
  std::string endpoint_;
  RemoteOptions opts_;
};

inline constexpr const char* kBasicPrompt = "Shapes. Clean background. Simple form.";
inline constexpr const char* kFullPrompt =
    "Shapes. The one at the upper right is a triangle. The one at the lower left is a "
    "rectangle. Clean background. Simple form.";

}  // namespace sdeit

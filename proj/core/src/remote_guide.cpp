#include <chrono>

#include "sdeit/guidance.hpp"

#include "httplib.h"
#include "json.hpp"

namespace sdeit {
namespace {

httplib::Client make_client(const std::string& endpoint, const RemoteOptions& opts) {
  httplib::Client cli(endpoint);
  if (!cli.is_valid()) throw GuidanceTransportError("invalid guidance endpoint: " + endpoint);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts.timeout - secs);
  cli.set_connection_timeout(time_t(secs.count()), long(usecs.count()));
  cli.set_read_timeout(time_t(secs.count()), long(usecs.count()));
  cli.set_write_timeout(time_t(secs.count()), long(usecs.count()));
  return cli;
}

[[noreturn]] void raise_transport(httplib::Error err, const std::string& endpoint,
                                  std::chrono::steady_clock::duration waited,
                                  std::chrono::milliseconds timeout) {
  const std::string what = "guidance request to " + endpoint + " failed: " + httplib::to_string(err);
  const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                         (err == httplib::Error::Read && waited >= timeout * 9 / 10);
  if (timed_out) throw GuidanceTimeoutError(what);
  throw GuidanceTransportError(what);
}

}  // namespace

GuidanceResponse remote_guide(const std::string& endpoint, const GuidanceRequest& req,
                              const RemoteOptions& opts) {
  validate_request(req);
  auto cli = make_client(endpoint, opts);
  const auto start = std::chrono::steady_clock::now();
  auto res = cli.Post("/v1/guide", request_to_json(req), "application/json");
  if (!res) raise_transport(res.error(), endpoint, std::chrono::steady_clock::now() - start, opts.timeout);
  if (res->status < 200 || res->status >= 300) {
    throw GuidanceStatusError(res->status, "guidance service returned HTTP " +
                                               std::to_string(res->status) + ": " + res->body);
  }
  GuidanceResponse resp = response_from_json(res->body);
  if (resp.image.values.size() != std::size_t(resp.image.width) * std::size_t(resp.image.height)) {
    throw GuidanceInvariantError("guidance response pixel count does not match its dimensions");
  }
  validate_response(req, resp);
  resp.image.mask = req.image.mask;
  return resp;
}

std::string remote_health(const std::string& endpoint, const RemoteOptions& opts) {
  auto cli = make_client(endpoint, opts);
  const auto start = std::chrono::steady_clock::now();
  auto res = cli.Get("/v1/health");
  if (!res) raise_transport(res.error(), endpoint, std::chrono::steady_clock::now() - start, opts.timeout);
  if (res->status != 200) {
    throw GuidanceStatusError(res->status, "health check returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto doc = nlohmann::json::parse(res->body);
    if (doc.at("status").get<std::string>() != "ok") {
      throw GuidanceStatusError(res->status, "guidance service is not healthy");
    }
    return doc.at("mode").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw GuidanceMalformedError(std::string("malformed health response: ") + e.what());
  }
}

}  // namespace sdeit

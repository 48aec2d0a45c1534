#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "livorlab/eln.hpp"

namespace livorlab::api {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path store = "livorlab.db";
  std::filesystem::path lut_dir = "luts";
  unsigned workers = 2;
  std::optional<std::filesystem::path> static_dir;
  std::optional<std::filesystem::path> extinction_table;
  eln::StoreOptions store_options;  // path is overwritten by `store`
};

/// Reads a JSON config file (all fields optional) and applies the
/// LIVORLAB_ADDR (host:port), LIVORLAB_STORE, LIVORLAB_LUTS and
/// LIVORLAB_WORKERS environment overrides.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file);

/// Resolves a LUT name inside `lut_dir`: the name itself, or the name with a
/// ".flut" suffix. Names with path separators are rejected.
std::filesystem::path resolve_lut(const std::filesystem::path& lut_dir, const std::string& name);

/// HTTP service plus its analysis worker pool. Interrupted Running jobs are
/// failed on start; Queued jobs resume.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds, starts workers and the listener thread. Returns the bound port.
  int start();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

  eln::Store& store();
  int port() const;
  std::size_t recovered_jobs() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP status for an error code.
int http_status(Errc code) noexcept;

}  // namespace livorlab::api

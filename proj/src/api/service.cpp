#include "livorlab/api.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "livorlab/extinction.hpp"
#include "livorlab/lut.hpp"

namespace livorlab::api {

namespace fs = std::filesystem;
using eln::Actor;
using eln::Role;

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::Unauthorized: return 403;
    case Errc::CaseNotFound:
    case Errc::MeasurementNotFound:
    case Errc::AnalysisNotFound:
    case Errc::JobNotFound: return 404;
    case Errc::IllegalTransition:
    case Errc::CaseClosed:
    case Errc::ImmutableRecord: return 409;
    case Errc::ParseError: return 400;
    case Errc::StoreLocked: return 503;
    case Errc::StoreError:
    case Errc::IoError:
    case Errc::Internal: return 500;
    default: return 422;
  }
}

ServiceConfig load_service_config(const std::optional<fs::path>& file) {
  ServiceConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(Errc::ConfigInvalid, "cannot read config " + file->string());
    std::stringstream ss;
    ss << in.rdbuf();
    const Json j = parse_json(ss.str());
    cfg.host = optional<std::string>(j, "host", cfg.host);
    cfg.port = optional<int>(j, "port", cfg.port);
    cfg.store = optional<std::string>(j, "store", cfg.store.string());
    cfg.lut_dir = optional<std::string>(j, "lut_dir", cfg.lut_dir.string());
    cfg.workers = optional<unsigned>(j, "workers", cfg.workers);
    if (j.contains("static_dir") && !j.at("static_dir").is_null()) cfg.static_dir = j.at("static_dir").get<std::string>();
    if (j.contains("extinction_table") && !j.at("extinction_table").is_null()) {
      cfg.extinction_table = j.at("extinction_table").get<std::string>();
    }
    cfg.store_options.session_ttl_seconds =
        optional<std::int64_t>(j, "session_ttl_seconds", cfg.store_options.session_ttl_seconds);
  }
  if (const char* addr = std::getenv("LIVORLAB_ADDR")) {
    const std::string a = addr;
    const auto colon = a.rfind(':');
    if (colon == std::string::npos) throw Error(Errc::ConfigInvalid, "LIVORLAB_ADDR must be host:port");
    cfg.host = a.substr(0, colon);
    try {
      cfg.port = std::stoi(a.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(Errc::ConfigInvalid, "LIVORLAB_ADDR has a bad port: " + a);
    }
  }
  if (const char* s = std::getenv("LIVORLAB_STORE")) cfg.store = s;
  if (const char* s = std::getenv("LIVORLAB_LUTS")) cfg.lut_dir = s;
  if (const char* s = std::getenv("LIVORLAB_WORKERS")) {
    try {
      cfg.workers = static_cast<unsigned>(std::stoul(s));
    } catch (const std::exception&) {
      throw Error(Errc::ConfigInvalid, std::string("LIVORLAB_WORKERS is not a number: ") + s);
    }
  }
  if (cfg.port < 0 || cfg.port > 65535) throw Error(Errc::ConfigInvalid, "port out of range");
  if (cfg.workers == 0 || cfg.workers > 64) throw Error(Errc::ConfigInvalid, "workers must be in [1, 64]");
  return cfg;
}

fs::path resolve_lut(const fs::path& lut_dir, const std::string& name) {
  const bool bad = name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
                   name == "." || name == "..";
  if (!bad) {
    for (const auto& candidate : {lut_dir / name, lut_dir / (name + ".flut")}) {
      if (fs::is_regular_file(candidate)) return candidate;
    }
  }
  throw Error(Errc::LutNotFound, "LUT '" + name + "' not found in " + lut_dir.string());
}

namespace {

struct HttpError {
  int status;
  Json body;
};

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status(e.code()), Json{{"error", to_string(e.code())}, {"message", e.what()}});
}

Json body_json(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return parse_json(req.body);
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const auto v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size() || n < 1) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw Error(Errc::ValidationFailed, std::string("query parameter ") + key + " must be a positive integer");
  }
}

eln::Page query_page(const httplib::Request& req) {
  return {query_size(req, "page", 1), query_size(req, "page_size", 50)};
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  std::unique_ptr<eln::Store> store;
  std::vector<spectral::ExtinctionRecord> extinction;
  httplib::Server server;
  std::thread listener;
  std::vector<std::jthread> workers;
  std::mutex wake_mutex;
  std::condition_variable_any wake;
  std::atomic<bool> running{false};
  std::mutex stop_mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;
  int bound_port = 0;
  std::size_t recovered = 0;

  std::mutex lut_mutex;
  std::map<fs::path, std::shared_ptr<const mcrt::ForwardLut>> luts;

  std::shared_ptr<const mcrt::ForwardLut> lut(const std::string& name) {
    const auto path = resolve_lut(config.lut_dir, name);
    std::lock_guard lock(lut_mutex);
    auto it = luts.find(path);
    if (it != luts.end()) return it->second;
    auto loaded = std::make_shared<const mcrt::ForwardLut>(mcrt::load_lut(path));
    luts.emplace(path, loaded);
    return loaded;
  }

  // ---- authentication

  Actor authenticate(const httplib::Request& req) {
    const auto header = req.get_header_value("Authorization");
    const std::string prefix = "Bearer ";
    if (header.rfind(prefix, 0) != 0) {
      store->record_denied("anonymous", req.path, req.method + " " + req.path + " without a bearer token");
      throw Error(Errc::Unauthorized, "missing bearer token");
    }
    try {
      return store->resolve_session(header.substr(prefix.size()));
    } catch (const Error& e) {
      store->record_denied("anonymous", req.path, req.method + " " + req.path + ": " + e.what());
      throw;
    }
  }

  // Wraps a handler: maps errors to statuses; missing/invalid tokens are 401.
  template <typename F>
  httplib::Server::Handler authed(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      Actor actor;
      try {
        actor = authenticate(req);
      } catch (const Error& e) {
        send_json(res, 401, Json{{"error", to_string(e.code())}, {"message", e.what()}});
        return;
      }
      try {
        f(actor, req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const nlohmann::json::exception& e) {
        send_json(res, 400, Json{{"error", "ParseError"}, {"message", e.what()}});
      } catch (const std::exception& e) {
        send_json(res, 500, Json{{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  // ---- workers

  void run_job(const eln::AnalysisJob& job) {
    try {
      const auto table = lut(job.config.lut);
      const Actor system{"system", Role::Admin};
      const auto m = store->get_measurement(system, job.measurement_id);
      const auto measured = inverse::apply_window(m.reflectance, job.config.window_nm);
      const auto result = inverse::fit(measured, job.config.fit, *table, extinction);
      store->complete_job(job.job_id, result);
    } catch (const Error& e) {
      store->fail_job(job.job_id, e.what());
    } catch (const std::exception& e) {
      store->fail_job(job.job_id, std::string("Internal: ") + e.what());
    }
  }

  void worker_loop(std::stop_token stop) {
    while (!stop.stop_requested()) {
      std::optional<eln::AnalysisJob> job;
      try {
        job = store->claim_job();
      } catch (const Error&) {
        // busy database; retry after the wait below
      }
      if (job) {
        run_job(*job);
        continue;
      }
      std::unique_lock lock(wake_mutex);
      wake.wait_for(lock, stop, std::chrono::milliseconds(250), [] { return false; });
    }
  }

  void notify_workers() { wake.notify_all(); }

  // ---- routes

  void routes() {
    server.Post("/api/login", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const Json j = body_json(req);
        const auto session =
            store->login(optional<std::string>(j, "user_id", ""), optional<std::string>(j, "password", ""));
        send_json(res, 200, session);
      } catch (const Error& e) {
        if (e.code() == Errc::Unauthorized) {
          send_json(res, 401, Json{{"error", to_string(e.code())}, {"message", e.what()}});
        } else {
          send_error(res, e);
        }
      }
    });

    server.Post("/api/cases", authed([this](const Actor& actor, const httplib::Request& req, httplib::Response& res) {
      const auto created = store->create_case(actor, body_json(req).get<eln::CaseMetadata>());
      Json out = created.record;
      out["warnings"] = created.warnings;
      send_json(res, 201, out);
    }));

    server.Get("/api/cases", authed([this](const Actor& actor, const httplib::Request& req, httplib::Response& res) {
      eln::CaseFilter filter;
      if (req.has_param("state") && !req.get_param_value("state").empty()) {
        filter.state = eln::case_state_from_string(req.get_param_value("state"));
      }
      if (req.has_param("body_site")) filter.body_site = req.get_param_value("body_site");
      if (req.has_param("text")) filter.text = req.get_param_value("text");
      if (req.has_param("from")) filter.created_from = req.get_param_value("from");
      if (req.has_param("to")) filter.created_to = req.get_param_value("to");
      const auto page = query_page(req);
      const auto cases = store->query_cases(actor, filter, page);
      send_json(res, 200, Json{{"items", cases}, {"page", page.number}, {"page_size", page.size}});
    }));

    server.Get(R"(/api/cases/([^/]+))",
               authed([this](const Actor& actor, const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, store->get_case(actor, req.matches[1]));
               }));

    server.Post(R"(/api/cases/([^/]+)/transition)",
                authed([this](const Actor& actor, const httplib::Request& req, httplib::Response& res) {
                  const Json j = body_json(req);
                  const auto target = eln::case_state_from_string(required<std::string>(j, "target"));
                  send_json(res, 200, store->transition_case(actor, req.matches[1], target));
                }));

    server.Post(R"(/api/cases/([^/]+)/measurements)",
                authed([this](const Actor& actor, const httplib::Request& req, httplib::Response& res) {
                  if (!req.is_multipart_form_data()) {
                    throw Error(Errc::ValidationFailed, "expected multipart/form-data");
                  }
                  spectral::RawBundle bundle = [&] {
                    if (req.has_file("bundle")) return spectral::parse_bundle_csv(req.get_file_value("bundle").content);
                    for (const char* part : {"sample", "white", "dark"}) {
                      if (!req.has_file(part)) throw Error(Errc::ValidationFailed, std::string("missing part '") + part + "'");
                    }
                    using spectral::SpectrumKind;
                    return spectral::RawBundle{
                        spectral::parse_spectrum_csv(req.get_file_value("sample").content, SpectrumKind::RawCounts),
                        spectral::parse_spectrum_csv(req.get_file_value("white").content, SpectrumKind::RawCounts),
                        spectral::parse_spectrum_csv(req.get_file_value("dark").content, SpectrumKind::RawCounts)};
                  }();
                  eln::InstrumentMetadata instrument;
                  if (req.has_file("instrument")) {
                    instrument = parse_json(req.get_file_value("instrument").content).get<eln::InstrumentMetadata>();
                  }
                  send_json(res, 201, store->attach_measurement(actor, req.matches[1], bundle, instrument));
                }));

    server.Post("/api/analyses", authed([this](const Actor& actor, const httplib::Request& req, httplib::Response& res) {
      const Json j = body_json(req);
      const auto mid = required<std::string>(j, "measurement_id");
      const auto config = required<inverse::AnalysisConfig>(j, "config");
      std::optional<std::string> key;
      if (req.has_header("Idempotency-Key")) key = req.get_header_value("Idempotency-Key");
      const auto submitted = store->submit_job(actor, mid, config, key);
      if (submitted.created) notify_workers();
      send_json(res, submitted.created ? 202 : 200, submitted.job);
    }));

    server.Get(R"(/api/analyses/jobs/([^/]+))",
               authed([this](const Actor& actor, const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, store->get_job(actor, req.matches[1]));
               }));

    server.Get(R"(/api/cases/([^/]+)/results)",
               authed([this](const Actor& actor, const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, results(actor, req.matches[1]));
               }));

    server.Get("/api/audit", authed([this](const Actor& actor, const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> target;
      if (req.has_param("target") && !req.get_param_value("target").empty()) target = req.get_param_value("target");
      const auto page = query_page(req);
      send_json(res, 200,
                Json{{"items", store->audit_trail(actor, target, page)}, {"page", page.number}, {"page_size", page.size}});
    }));

    if (config.static_dir) server.set_mount_point("/", config.static_dir->string());
  }

  // Result-browser view: every measurement with its analyses, newest first.
  // Each analysis carries the measured spectrum on the grid it was fitted on.
  Json results(const Actor& actor, const std::string& case_id) {
    const auto c = store->get_case(actor, case_id);
    Json measurements = Json::array();
    for (const auto& m : store->measurements_for_case(actor, case_id)) {
      Json mj = m;
      Json analyses = Json::array();
      for (const auto& a : store->analyses_for_measurement(actor, m.measurement_id)) {
        Json aj = a;
        aj["measured"] = inverse::apply_window(m.reflectance, a.config.window_nm);
        analyses.push_back(std::move(aj));
      }
      mj["analyses"] = std::move(analyses);
      measurements.push_back(std::move(mj));
    }
    return Json{{"case", c}, {"measurements", measurements}};
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  auto options = impl_->config.store_options;
  options.path = impl_->config.store;
  impl_->store = std::make_unique<eln::Store>(options);
  impl_->extinction = extinction::load_extinction_db(impl_->config.extinction_table);
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::start() {
  if (impl_->running.exchange(true)) return impl_->bound_port;
  impl_->recovered = impl_->store->recover_interrupted_jobs();
  if (impl_->config.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(impl_->config.host);
  } else {
    impl_->bound_port = impl_->server.bind_to_port(impl_->config.host, impl_->config.port) ? impl_->config.port : -1;
  }
  if (impl_->bound_port < 0) {
    impl_->running = false;
    throw Error(Errc::IoError, "cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
  for (unsigned i = 0; i < impl_->config.workers; ++i) {
    impl_->workers.emplace_back([this](std::stop_token st) { impl_->worker_loop(st); });
  }
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->bound_port;
}

void Service::wait() {
  std::unique_lock lock(impl_->stop_mutex);
  impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

void Service::stop() {
  if (!impl_->running.exchange(false)) return;
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  for (auto& w : impl_->workers) w.request_stop();
  impl_->wake.notify_all();
  impl_->workers.clear();
  {
    std::lock_guard lock(impl_->stop_mutex);
    impl_->stopped = true;
  }
  impl_->stopped_cv.notify_all();
}

eln::Store& Service::store() { return *impl_->store; }
int Service::port() const { return impl_->bound_port; }
std::size_t Service::recovered_jobs() const { return impl_->recovered; }

}  // namespace livorlab::api

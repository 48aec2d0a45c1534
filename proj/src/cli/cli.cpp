#include "cli.hpp"

#include <CLI11.hpp>
#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "livorlab/api.hpp"
#include "livorlab/eln.hpp"
#include "livorlab/extinction.hpp"
#include "livorlab/inverse.hpp"
#include "livorlab/lut.hpp"
#include "plot.hpp"
#include "validate.hpp"

namespace livorlab::cli {

namespace fs = std::filesystem;

int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::ParseError: return 2;
    case Errc::IoError:
    case Errc::StoreError:
    case Errc::StoreLocked: return 4;
    case Errc::Internal: return 5;
    default: return 3;
  }
}

namespace {

const eln::Actor kCliActor{"cli", eln::Role::Admin};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Advisory single-writer lock on `<store>.lock`, held for the process
/// lifetime of a command.
class StoreLock {
 public:
  explicit StoreLock(const fs::path& store) {
    if (store.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(store.parent_path(), ec);
    }
    const auto path = store.string() + ".lock";
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(Errc::IoError, "cannot open lock file " + path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error(Errc::StoreLocked, "store " + store.string() + " is in use by another process");
    }
  }
  ~StoreLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  int fd_ = -1;
};

struct Globals {
  std::string store = "livorlab.db";
  std::string config;
  std::uint64_t seed = 1;
  bool seed_set = false;
};

eln::StoreOptions store_options(const Globals& g) {
  eln::StoreOptions o;
  o.path = g.store;
  return o;
}

/// Default analysis: the three hemoglobins, scatterer density and
/// calibration free over the 500-600 nm band.
inverse::AnalysisConfig default_analysis(const std::string& lut) {
  inverse::AnalysisConfig c;
  c.lut = lut;
  c.window_nm = std::make_pair(500.0, 600.0);
  c.fit.initial_guess.concentrations = {{spectral::Chromophore::Hb, 0.02},
                                        {spectral::Chromophore::O2Hb, 0.02},
                                        {spectral::Chromophore::COHb, 0.01}};
  c.fit.initial_guess.scatterer.number_density_per_mm3 = 1.6e8;
  return c;
}

mcrt::LutAxis parse_axis(const Json& j) {
  const auto name = required<std::string>(j, "name");
  if (j.contains("nodes")) return {name, required<std::vector<double>>(j, "nodes")};
  const auto spec = required<std::vector<double>>(j, "log");
  if (spec.size() != 3 || spec[2] < 2) throw Error(Errc::ConfigInvalid, "axis 'log' needs [first, last, count>=2]");
  return mcrt::LutAxis::log_spaced(name, spec[0], spec[1], static_cast<std::size_t>(spec[2]));
}

// ---------------------------------------------------------------------------
// commands

int cmd_ingest(const Globals& g, const std::string& case_id, const eln::CaseMetadata& meta, const std::string& bundle,
               const std::string& sample, const std::string& white, const std::string& dark,
               const std::string& instrument_file, std::ostream& out) {
  spectral::RawBundle raw = [&] {
    if (!bundle.empty()) return spectral::parse_bundle_csv(read_file(bundle));
    if (sample.empty() || white.empty() || dark.empty()) {
      throw Error(Errc::ValidationFailed, "give --bundle or all of --sample, --white and --dark");
    }
    using spectral::SpectrumKind;
    return spectral::RawBundle{spectral::parse_spectrum_csv(read_file(sample), SpectrumKind::RawCounts),
                               spectral::parse_spectrum_csv(read_file(white), SpectrumKind::RawCounts),
                               spectral::parse_spectrum_csv(read_file(dark), SpectrumKind::RawCounts)};
  }();
  eln::InstrumentMetadata instrument;
  if (!instrument_file.empty()) instrument = parse_json(read_file(instrument_file)).get<eln::InstrumentMetadata>();
  // check the bundle before a new case is created for it
  spectral::normalize_reflectance(raw.sample.spectrum, raw.white.spectrum, raw.dark.spectrum);

  StoreLock lock(g.store);
  eln::Store store(store_options(g));
  std::string target = case_id;
  if (target.empty()) {
    const auto created = store.create_case(kCliActor, meta);
    for (const auto& w : created.warnings) out << "warning: " << w << "\n";
    target = created.record.case_id;
    out << "case " << target << "\n";
  }
  const auto m = store.attach_measurement(kCliActor, target, raw, instrument);
  out << m.measurement_id << "\n";
  return 0;
}

int cmd_lut_build(const Globals& g, const std::string& config_path, const std::string& output, unsigned workers,
                  std::ostream& out) {
  Json j = config_path.empty() ? Json::object() : parse_json(read_file(config_path));
  mcrt::LutTemplate tmpl = mcrt::default_lut_template();
  if (j.contains("template")) {
    tmpl.stack = required<mcrt::LayerStack>(j.at("template"), "stack");
    tmpl.variable_layer = optional<std::size_t>(j.at("template"), "variable_layer", 0);
  }
  std::vector<mcrt::LutAxis> axes = mcrt::default_lut_axes();
  if (j.contains("axes")) {
    axes.clear();
    for (const auto& a : j.at("axes")) axes.push_back(parse_axis(a));
  }
  mcrt::SimConfig sim = optional<mcrt::SimConfig>(j, "simulation", mcrt::SimConfig{});
  if (g.seed_set) sim.seed = g.seed;
  const auto max_nodes = optional<std::size_t>(j, "max_nodes", mcrt::kDefaultMaxLutNodes);

  const auto lut = mcrt::build_lut(tmpl, axes, sim, workers, max_nodes);
  mcrt::save_lut(lut, output);

  out << "wrote " << output << "\n";
  for (const auto& a : lut.axes()) {
    out << "  axis " << a.name << ": " << a.nodes.size() << " nodes [" << a.nodes.front() << ", " << a.nodes.back()
        << "]\n";
  }
  const auto v = lut.values();
  const auto s = lut.stderrs();
  out << "  reflectance min " << *std::min_element(v.begin(), v.end()) << " max "
      << *std::max_element(v.begin(), v.end()) << "\n";
  out << "  max stderr " << *std::max_element(s.begin(), s.end()) << "\n";
  return 0;
}

int cmd_lut_inspect(const std::string& path, std::ostream& out) {
  const auto lut = mcrt::load_lut(path);
  Json axes = Json::array();
  for (const auto& a : lut.axes()) axes.push_back(Json{{"name", a.name}, {"nodes", a.nodes}});
  const auto v = lut.values();
  const auto s = lut.stderrs();
  const Json report{{"axes", axes},
                    {"values", v.size()},
                    {"min", *std::min_element(v.begin(), v.end())},
                    {"max", *std::max_element(v.begin(), v.end())},
                    {"max_stderr", *std::max_element(s.begin(), s.end())},
                    {"provenance", parse_json(lut.provenance())}};
  out << report.dump(2) << "\n";
  return 0;
}

int cmd_fit(const Globals& g, const std::string& measurement_id, const std::string& spectrum_file,
            const std::string& analysis_file, const std::string& lut_path, const std::string& extinction,
            const std::string& report_path, const std::string& plot_path, bool record, std::ostream& out) {
  if (measurement_id.empty() == spectrum_file.empty()) {
    throw Error(Errc::ValidationFailed, "give exactly one of --measurement and --spectrum");
  }
  const std::string lut_name = fs::path(lut_path).filename().string();
  inverse::AnalysisConfig config = default_analysis(lut_name);
  if (!analysis_file.empty()) {
    Json j = parse_json(read_file(analysis_file));
    if (!j.contains("lut")) j["lut"] = lut_name;
    config = j.get<inverse::AnalysisConfig>();
  }
  const auto lut = mcrt::load_lut(lut_path);
  const auto db =
      extinction::load_extinction_db(extinction.empty() ? std::nullopt : std::optional<fs::path>(extinction));

  std::optional<StoreLock> lock;
  std::optional<eln::Store> store;
  spectral::Spectrum full = [&] {
    if (!spectrum_file.empty()) {
      return spectral::parse_spectrum_csv(read_file(spectrum_file), spectral::SpectrumKind::Reflectance).spectrum;
    }
    lock.emplace(g.store);
    store.emplace(store_options(g));
    return store->get_measurement(kCliActor, measurement_id).reflectance;
  }();
  const auto measured = inverse::apply_window(full, config.window_nm);
  const auto result = inverse::fit(measured, config.fit, lut, db);

  Json report = result;
  report["measured"] = measured;
  if (record) {
    if (!store) throw Error(Errc::ValidationFailed, "--record needs --measurement");
    const auto rec = store->record_analysis(kCliActor, measurement_id, config, result);
    report["analysis_id"] = rec.analysis_id;
  }
  if (!report_path.empty()) write_file(report_path, report.dump(2) + "\n");
  if (!plot_path.empty()) {
    write_file(plot_path, render_fit_svg(measured, result.predicted,
                                         measurement_id.empty() ? fs::path(spectrum_file).filename().string()
                                                                : measurement_id));
  }
  Json summary{{"estimate", report["estimate"]},
               {"chi2_per_dof", result.chi2_per_dof},
               {"residual_norm", result.residual_norm},
               {"converged", result.converged},
               {"iterations", result.iterations},
               {"at_bound", report["at_bound"]}};
  if (report.contains("cohb_fraction")) summary["cohb_fraction"] = report["cohb_fraction"];
  if (report.contains("analysis_id")) summary["analysis_id"] = report["analysis_id"];
  out << summary.dump(2) << "\n";
  return 0;
}

int cmd_export(const Globals& g, const std::string& case_id, const std::string& dir, std::ostream& out) {
  StoreLock lock(g.store);
  eln::Store store(store_options(g));
  const fs::path target = fs::path(dir) / case_id;
  store.export_case(kCliActor, case_id, target);
  out << target.string() << "\n";
  return 0;
}

int cmd_import(const Globals& g, const std::string& dir, std::ostream& out) {
  StoreLock lock(g.store);
  eln::Store store(store_options(g));
  out << store.import_case(kCliActor, dir).case_id << "\n";
  return 0;
}

int cmd_validate(const Globals& g, bool quick, const std::string& extinction, std::ostream& out) {
  ValidateOptions opt;
  opt.quick = quick;
  if (!extinction.empty()) opt.extinction_table = extinction;
  if (g.seed_set) opt.seed = g.seed;
  bool all = true;
  for (const auto& r : run_validation(opt)) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " [" << r.seconds << " s]\n";
    all = all && r.passed;
  }
  return all ? 0 : 3;
}

int cmd_serve(const Globals& g, std::ostream& out) {
  auto cfg = api::load_service_config(g.config.empty() ? std::nullopt : std::optional<fs::path>(g.config));
  if (!g.store.empty() && g.store != "livorlab.db") cfg.store = g.store;
  StoreLock lock(cfg.store);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  api::Service service(cfg);
  const int port = service.start();
  out << "listening on " << cfg.host << ":" << port << " (store " << cfg.store.string() << ", "
      << service.recovered_jobs() << " interrupted jobs failed)" << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  service.stop();
  out << "stopped" << std::endl;
  return 0;
}

int cmd_user_add(const Globals& g, const std::string& id, const std::string& name, const std::string& role,
                 std::string password, std::ostream& out) {
  if (password.empty()) {
    if (const char* env = std::getenv("LIVORLAB_PASSWORD")) password = env;
  }
  StoreLock lock(g.store);
  eln::Store store(store_options(g));
  const auto user = store.add_user(kCliActor, id, name.empty() ? id : name, eln::role_from_string(role), password);
  out << user.user_id << " (" << eln::to_string(user.role) << ")\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"livorlab: reflectance spectra notebook and skin optics fitting"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--store", g.store, "Notebook database file");
  app.add_option("--config", g.config, "Service configuration file (JSON)");
  auto* seed_opt = app.add_option("--seed", g.seed, "RNG seed for simulations");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Attach a raw spectrum bundle to a case");
  std::string case_id, bundle, sample, white, dark, instrument;
  eln::CaseMetadata meta;
  double pmi = -1.0;
  ingest->add_option("--case", case_id, "Existing case id; omit to create a case");
  ingest->add_option("--body-site", meta.body_site, "Body site of a new case");
  ingest->add_option("--external-ref", meta.external_ref, "Registry number of a new case");
  ingest->add_option("--pmi-hours", pmi, "Postmortem interval of a new case");
  ingest->add_option("--notes", meta.notes, "Notes for a new case");
  ingest->add_option("--bundle", bundle, "CSV with wavelength_nm,sample,white,dark");
  ingest->add_option("--sample", sample, "Sample counts CSV");
  ingest->add_option("--white", white, "White standard counts CSV");
  ingest->add_option("--dark", dark, "Dark counts CSV");
  ingest->add_option("--instrument", instrument, "Instrument metadata JSON");

  // lut
  auto* lut = app.add_subcommand("lut", "Build or inspect forward lookup tables");
  lut->require_subcommand(1);
  auto* lut_build = lut->add_subcommand("build", "Simulate a LUT grid and write a FLUT1 file");
  std::string lut_config, lut_out;
  unsigned workers = 0;
  lut_build->add_option("config", lut_config, "LUT config JSON (defaults when omitted)");
  lut_build->add_option("-o,--out", lut_out, "Output file")->required();
  lut_build->add_option("--workers", workers, "Worker threads (0: hardware)");
  auto* lut_inspect = lut->add_subcommand("inspect", "Print a LUT's axes, ranges and provenance");
  std::string lut_path;
  lut_inspect->add_option("path", lut_path)->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a reflectance spectrum against a LUT");
  std::string fit_mid, fit_spectrum, fit_analysis, fit_lut, fit_ext, fit_report, fit_plot;
  bool fit_record = false;
  fit->add_option("--measurement", fit_mid, "Measurement id in the store");
  fit->add_option("--spectrum", fit_spectrum, "Reflectance CSV (wavelength_nm,value)");
  fit->add_option("--analysis", fit_analysis, "Analysis config JSON");
  fit->add_option("--lut", fit_lut, "LUT file")->required();
  fit->add_option("--extinction", fit_ext, "Extinction table (bundled one by default)");
  fit->add_option("--report", fit_report, "Write the full report JSON here");
  fit->add_option("--plot", fit_plot, "Write a measured-vs-predicted SVG here");
  fit->add_flag("--record", fit_record, "Store the result as an analysis record");

  // export / import
  auto* exp = app.add_subcommand("export", "Export a case directory");
  std::string exp_case, exp_dir = ".";
  exp->add_option("--case", exp_case)->required();
  exp->add_option("-o,--out", exp_dir, "Parent directory");
  auto* imp = app.add_subcommand("import", "Import an exported case directory");
  std::string imp_dir;
  imp->add_option("dir", imp_dir)->required();

  // validate
  auto* val = app.add_subcommand("validate", "Run the physics self-checks");
  bool quick = false;
  std::string val_ext;
  val->add_flag("--quick", quick, "Smaller photon counts");
  val->add_option("--extinction", val_ext, "Extinction table to check against");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");

  // user add
  auto* user = app.add_subcommand("user", "Manage users");
  user->require_subcommand(1);
  auto* user_add = user->add_subcommand("add", "Add a user");
  std::string uid, uname, urole = "Operator", upass;
  user_add->add_option("--id", uid)->required();
  user_add->add_option("--name", uname);
  user_add->add_option("--role", urole, "Operator, Analyst, Reviewer or Admin");
  user_add->add_option("--password", upass, "Password (or LIVORLAB_PASSWORD)");

  std::vector<const char*> argv;
  argv.push_back("livorlab");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }
  g.seed_set = seed_opt->count() > 0;
  if (pmi >= 0.0) meta.postmortem_interval_hours = pmi;

  try {
    if (*ingest) return cmd_ingest(g, case_id, meta, bundle, sample, white, dark, instrument, out);
    if (*lut_build) return cmd_lut_build(g, lut_config, lut_out, workers, out);
    if (*lut_inspect) return cmd_lut_inspect(lut_path, out);
    if (*fit) {
      return cmd_fit(g, fit_mid, fit_spectrum, fit_analysis, fit_lut, fit_ext, fit_report, fit_plot, fit_record, out);
    }
    if (*exp) return cmd_export(g, exp_case, exp_dir, out);
    if (*imp) return cmd_import(g, imp_dir, out);
    if (*val) return cmd_validate(g, quick, val_ext, out);
    if (*serve) return cmd_serve(g, out);
    if (*user_add) return cmd_user_add(g, uid, uname, urole, upass, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "error: ParseError: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << "\n";
    return 5;
  }
  return 5;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace livorlab::cli

#include "livorlab/eln.hpp"

#include <sodium.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>

#include "sqlite.hpp"

#ifndef LIVORLAB_VERSION
#define LIVORLAB_VERSION "0.0.0"
#endif

namespace livorlab::eln {

namespace fs = std::filesystem;
using spectral::SpectrumKind;

// ---------------------------------------------------------------------------
// enums

std::string_view to_string(CaseState s) noexcept {
  switch (s) {
    case CaseState::Open: return "Open";
    case CaseState::Measured: return "Measured";
    case CaseState::Analysed: return "Analysed";
    case CaseState::Reviewed: return "Reviewed";
    case CaseState::Closed: return "Closed";
  }
  return "?";
}

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::Operator: return "Operator";
    case Role::Analyst: return "Analyst";
    case Role::Reviewer: return "Reviewer";
    case Role::Admin: return "Admin";
  }
  return "?";
}

std::string_view to_string(AuditAction a) noexcept {
  switch (a) {
    case AuditAction::Create: return "Create";
    case AuditAction::Transition: return "Transition";
    case AuditAction::Ingest: return "Ingest";
    case AuditAction::Analyse: return "Analyse";
    case AuditAction::Login: return "Login";
    case AuditAction::Denied: return "Denied";
  }
  return "?";
}

std::string_view to_string(JobStatus s) noexcept {
  switch (s) {
    case JobStatus::Queued: return "Queued";
    case JobStatus::Running: return "Running";
    case JobStatus::Done: return "Done";
    case JobStatus::Failed: return "Failed";
  }
  return "?";
}

std::string_view to_string(SpectrumRole r) noexcept {
  switch (r) {
    case SpectrumRole::Sample: return "sample";
    case SpectrumRole::White: return "white";
    case SpectrumRole::Dark: return "dark";
    case SpectrumRole::Reflectance: return "reflectance";
  }
  return "?";
}

CaseState case_state_from_string(std::string_view s) {
  for (auto v : {CaseState::Open, CaseState::Measured, CaseState::Analysed, CaseState::Reviewed, CaseState::Closed}) {
    if (to_string(v) == s) return v;
  }
  throw Error(Errc::ValidationFailed, "unknown case state '" + std::string(s) + "'");
}

Role role_from_string(std::string_view s) {
  for (auto v : {Role::Operator, Role::Analyst, Role::Reviewer, Role::Admin}) {
    if (to_string(v) == s) return v;
  }
  throw Error(Errc::ValidationFailed, "unknown role '" + std::string(s) + "'");
}

JobStatus job_status_from_string(std::string_view s) {
  for (auto v : {JobStatus::Queued, JobStatus::Running, JobStatus::Done, JobStatus::Failed}) {
    if (to_string(v) == s) return v;
  }
  throw Error(Errc::StoreError, "unknown job status '" + std::string(s) + "'");
}

static AuditAction audit_action_from_string(std::string_view s) {
  for (auto v : {AuditAction::Create, AuditAction::Transition, AuditAction::Ingest, AuditAction::Analyse,
                 AuditAction::Login, AuditAction::Denied}) {
    if (to_string(v) == s) return v;
  }
  throw Error(Errc::StoreError, "unknown audit action '" + std::string(s) + "'");
}

bool transition_allowed(CaseState from, CaseState to) noexcept {
  if (from == CaseState::Closed) return false;
  if (to == CaseState::Closed) return true;
  return static_cast<int>(to) == static_cast<int>(from) + 1;
}

void InstrumentMetadata::validate() const {
  if (!(spot_diameter_mm > 0.0) || !std::isfinite(spot_diameter_mm)) {
    throw Error(Errc::ValidationFailed, "spot_diameter_mm must be > 0");
  }
}

std::string engine_version() { return LIVORLAB_VERSION; }

// ---------------------------------------------------------------------------
// helpers

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS meta(key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS users(
  user_id TEXT PRIMARY KEY, display_name TEXT NOT NULL, role TEXT NOT NULL, credential_hash TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS sessions(
  token_hash TEXT PRIMARY KEY, user_id TEXT NOT NULL REFERENCES users(user_id), expires_at TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS cases(
  case_id TEXT PRIMARY KEY, external_ref TEXT NOT NULL, body_site TEXT NOT NULL, pmi_hours REAL,
  notes TEXT NOT NULL, state TEXT NOT NULL, created_at TEXT NOT NULL, updated_at TEXT NOT NULL);
CREATE INDEX IF NOT EXISTS cases_order ON cases(created_at DESC, case_id);
CREATE TABLE IF NOT EXISTS measurements(
  measurement_id TEXT PRIMARY KEY, case_id TEXT NOT NULL REFERENCES cases(case_id),
  instrument TEXT NOT NULL, operator_id TEXT NOT NULL, recorded_at TEXT NOT NULL);
CREATE INDEX IF NOT EXISTS measurements_case ON measurements(case_id, recorded_at);
CREATE TABLE IF NOT EXISTS spectra(
  measurement_id TEXT NOT NULL REFERENCES measurements(measurement_id), role TEXT NOT NULL,
  kind TEXT NOT NULL, text BLOB NOT NULL, wavelengths BLOB NOT NULL, vals BLOB NOT NULL,
  PRIMARY KEY(measurement_id, role));
CREATE TABLE IF NOT EXISTS analyses(
  analysis_id TEXT PRIMARY KEY, measurement_id TEXT NOT NULL REFERENCES measurements(measurement_id),
  job_id TEXT UNIQUE, config TEXT NOT NULL, result TEXT NOT NULL, engine_version TEXT NOT NULL,
  created_at TEXT NOT NULL, created_by TEXT NOT NULL);
CREATE INDEX IF NOT EXISTS analyses_measurement ON analyses(measurement_id, created_at);
CREATE TABLE IF NOT EXISTS audit(
  seq INTEGER PRIMARY KEY, actor TEXT NOT NULL, action TEXT NOT NULL, target_id TEXT NOT NULL,
  at TEXT NOT NULL, detail TEXT NOT NULL);
CREATE INDEX IF NOT EXISTS audit_target ON audit(target_id, seq);
CREATE TABLE IF NOT EXISTS jobs(
  job_id TEXT PRIMARY KEY, seq INTEGER NOT NULL UNIQUE,
  measurement_id TEXT NOT NULL REFERENCES measurements(measurement_id), config TEXT NOT NULL,
  status TEXT NOT NULL, submitted_by TEXT NOT NULL, submitted_at TEXT NOT NULL, finished_at TEXT,
  result_ref TEXT, error TEXT, idempotency_key TEXT, UNIQUE(submitted_by, idempotency_key));
CREATE INDEX IF NOT EXISTS jobs_status ON jobs(status, seq);

CREATE TRIGGER IF NOT EXISTS measurements_frozen_u BEFORE UPDATE ON measurements
  BEGIN SELECT RAISE(ABORT, 'ImmutableRecord'); END;
CREATE TRIGGER IF NOT EXISTS measurements_frozen_d BEFORE DELETE ON measurements
  BEGIN SELECT RAISE(ABORT, 'ImmutableRecord'); END;
CREATE TRIGGER IF NOT EXISTS spectra_frozen_u BEFORE UPDATE ON spectra
  BEGIN SELECT RAISE(ABORT, 'ImmutableRecord'); END;
CREATE TRIGGER IF NOT EXISTS spectra_frozen_d BEFORE DELETE ON spectra
  BEGIN SELECT RAISE(ABORT, 'ImmutableRecord'); END;
CREATE TRIGGER IF NOT EXISTS analyses_frozen_u BEFORE UPDATE ON analyses
  BEGIN SELECT RAISE(ABORT, 'ImmutableRecord'); END;
CREATE TRIGGER IF NOT EXISTS analyses_frozen_d BEFORE DELETE ON analyses
  BEGIN SELECT RAISE(ABORT, 'ImmutableRecord'); END;
CREATE TRIGGER IF NOT EXISTS audit_frozen_u BEFORE UPDATE ON audit
  BEGIN SELECT RAISE(ABORT, 'ImmutableRecord'); END;
CREATE TRIGGER IF NOT EXISTS audit_frozen_d BEFORE DELETE ON audit
  BEGIN SELECT RAISE(ABORT, 'ImmutableRecord'); END;
CREATE TRIGGER IF NOT EXISTS jobs_lifecycle BEFORE UPDATE OF status ON jobs
  WHEN NOT ((OLD.status = 'Queued' AND NEW.status = 'Running')
         OR (OLD.status = 'Running' AND NEW.status IN ('Done', 'Failed')))
  BEGIN SELECT RAISE(ABORT, 'ImmutableRecord'); END;
)sql";

std::int64_t system_micros() {
  using namespace std::chrono;
  return duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
}

Timestamp format_micros(std::int64_t us) {
  const std::time_t secs = static_cast<std::time_t>(us / 1'000'000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[64];
  std::snprintf(out, sizeof out, "%s.%06lldZ", buf, static_cast<long long>(us % 1'000'000));
  return out;
}

std::string random_hex(std::size_t bytes) {
  std::vector<unsigned char> raw(bytes);
  randombytes_buf(raw.data(), raw.size());
  std::string hex(bytes * 2 + 1, '\0');
  sodium_bin2hex(hex.data(), hex.size(), raw.data(), raw.size());
  hex.pop_back();
  return hex;
}

std::string new_id(char prefix) { return std::string(1, prefix) + "-" + random_hex(8); }

std::string token_hash(const std::string& token) {
  unsigned char digest[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(token.data()), token.size());
  char hex[crypto_hash_sha256_BYTES * 2 + 1];
  sodium_bin2hex(hex, sizeof hex, digest, sizeof digest);
  return hex;
}

std::vector<double> unpack_doubles(const std::string& blob) {
  std::vector<double> out(blob.size() / sizeof(double));
  if (!out.empty()) std::memcpy(out.data(), blob.data(), out.size() * sizeof(double));
  return out;
}

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
  if (!out) throw Error(Errc::IoError, "short write to " + p.string());
}

int rank(Role r) { return static_cast<int>(r); }

constexpr const char* kCaseCols =
    "case_id, external_ref, body_site, pmi_hours, notes, state, created_at, updated_at";

Case read_case(const sql::Stmt& s) {
  Case c;
  c.case_id = s.text(0);
  c.external_ref = s.text(1);
  c.body_site = s.text(2);
  c.postmortem_interval_hours = s.opt_real(3);
  c.notes = s.text(4);
  c.state = case_state_from_string(s.text(5));
  c.created_at = s.text(6);
  c.updated_at = s.text(7);
  return c;
}

constexpr const char* kJobCols =
    "job_id, measurement_id, config, status, submitted_by, submitted_at, finished_at, result_ref, error";

AnalysisJob read_job(const sql::Stmt& s) {
  AnalysisJob j;
  j.job_id = s.text(0);
  j.measurement_id = s.text(1);
  j.config = parse_json(s.text(2)).get<inverse::AnalysisConfig>();
  j.status = job_status_from_string(s.text(3));
  j.submitted_by = s.text(4);
  j.submitted_at = s.text(5);
  j.finished_at = s.opt_text(6);
  j.result_ref = s.opt_text(7);
  j.error = s.opt_text(8);
  return j;
}

constexpr const char* kAnalysisCols =
    "analysis_id, measurement_id, job_id, config, result, engine_version, created_at, created_by";

AnalysisRecord read_analysis(const sql::Stmt& s) {
  return AnalysisRecord{s.text(0),
                        s.text(1),
                        s.opt_text(2),
                        parse_json(s.text(3)).get<inverse::AnalysisConfig>(),
                        parse_json(s.text(4)).get<inverse::FitResult>(),
                        s.text(5),
                        s.text(6),
                        s.text(7)};
}

void check_page(const Page& page) {
  if (page.number < 1 || page.size < 1 || page.size > 1000) {
    throw Error(Errc::ValidationFailed, "page number must be >= 1 and page size in [1, 1000]");
  }
}

Json instrument_json(const InstrumentMetadata& m) {
  Json j;
  to_json(j, m);
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Store internals

struct Store::Impl {
  StoreOptions options;
  std::mutex pool_mutex;
  std::vector<std::unique_ptr<sql::Db>> idle;
  std::mutex hook_mutex;
  FaultHook hook;

  class Lease {
   public:
    explicit Lease(Impl& impl) : impl_(impl), db_(impl.acquire()) {}
    ~Lease() { impl_.release(std::move(db_)); }
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    sql::Db& operator*() { return *db_; }
    sql::Db* operator->() { return db_.get(); }

   private:
    Impl& impl_;
    std::unique_ptr<sql::Db> db_;
  };

  std::unique_ptr<sql::Db> acquire() {
    {
      std::lock_guard lock(pool_mutex);
      if (!idle.empty()) {
        auto db = std::move(idle.back());
        idle.pop_back();
        return db;
      }
    }
    return std::make_unique<sql::Db>(options.path.string());
  }

  void release(std::unique_ptr<sql::Db> db) {
    if (!db) return;
    std::lock_guard lock(pool_mutex);
    idle.push_back(std::move(db));
  }

  void fault(std::string_view point) {
    FaultHook h;
    {
      std::lock_guard lock(hook_mutex);
      h = hook;
    }
    if (h) h(point);
  }

  // Store-wide clock: strictly increasing across every write transaction.
  static Timestamp tick(sql::Db& db) {
    std::int64_t last = 0;
    {
      sql::Stmt s(db, "SELECT value FROM meta WHERE key = 'clock'");
      if (s.step()) last = std::stoll(s.text(0));
    }
    const std::int64_t now = std::max(system_micros(), last + 1);
    sql::Stmt(db, "INSERT INTO meta(key, value) VALUES('clock', ?1) "
                  "ON CONFLICT(key) DO UPDATE SET value = excluded.value")
        .bind(1, std::to_string(now))
        .run();
    return format_micros(now);
  }

  static std::int64_t append_audit(sql::Db& db, const std::string& actor, AuditAction action,
                                   const std::string& target, const Timestamp& at, const std::string& detail) {
    std::int64_t seq = 1;
    {
      sql::Stmt s(db, "SELECT COALESCE(MAX(seq), 0) + 1 FROM audit");
      s.step();
      seq = s.i64(0);
    }
    sql::Stmt(db, "INSERT INTO audit(seq, actor, action, target_id, at, detail) VALUES(?1, ?2, ?3, ?4, ?5, ?6)")
        .bind(1, seq)
        .bind(2, actor)
        .bind(3, to_string(action))
        .bind(4, target)
        .bind(5, at)
        .bind(6, detail)
        .run();
    return seq;
  }

  void denied(const std::string& actor, const std::string& target, const std::string& detail) {
    Lease db(*this);
    sql::WriteTxn txn(*db);
    const auto at = tick(*db);
    append_audit(*db, actor.empty() ? "anonymous" : actor, AuditAction::Denied, target, at, detail);
    txn.commit();
  }

  void authorize(const Actor& actor, Role minimum, const std::string& target, std::string_view what) {
    if (actor.role && rank(*actor.role) >= rank(minimum)) return;
    const std::string detail = std::string(what) + " requires " + std::string(to_string(minimum)) + " (caller " +
                               (actor.role ? std::string(to_string(*actor.role)) : std::string("has no role")) + ")";
    denied(actor.user_id, target, detail);
    throw Error(Errc::Unauthorized, detail);
  }

  static std::optional<Case> find_case(sql::Db& db, const std::string& id) {
    sql::Stmt s(db, std::string("SELECT ") + kCaseCols + " FROM cases WHERE case_id = ?1");
    s.bind(1, id);
    if (!s.step()) return std::nullopt;
    return read_case(s);
  }

  static Case require_case(sql::Db& db, const std::string& id) {
    auto c = find_case(db, id);
    if (!c) throw Error(Errc::CaseNotFound, "no case '" + id + "'");
    return *c;
  }

  static Spectrum read_spectrum(sql::Db& db, const std::string& mid, SpectrumRole role) {
    sql::Stmt s(db, "SELECT kind, wavelengths, vals FROM spectra WHERE measurement_id = ?1 AND role = ?2");
    s.bind(1, mid).bind(2, to_string(role));
    if (!s.step()) throw Error(Errc::StoreError, "measurement " + mid + " lacks its " + std::string(to_string(role)));
    return Spectrum(unpack_doubles(s.blob(1)), unpack_doubles(s.blob(2)),
                    spectral::spectrum_kind_from_string(s.text(0)));
  }

  static std::optional<MeasurementRecord> find_measurement(sql::Db& db, const std::string& mid) {
    std::string case_id, instrument, op, at;
    {
      sql::Stmt s(db, "SELECT case_id, instrument, operator_id, recorded_at FROM measurements "
                      "WHERE measurement_id = ?1");
      s.bind(1, mid);
      if (!s.step()) return std::nullopt;
      case_id = s.text(0);
      instrument = s.text(1);
      op = s.text(2);
      at = s.text(3);
    }
    return MeasurementRecord{mid,
                             case_id,
                             parse_json(instrument).get<InstrumentMetadata>(),
                             op,
                             at,
                             read_spectrum(db, mid, SpectrumRole::Sample),
                             read_spectrum(db, mid, SpectrumRole::White),
                             read_spectrum(db, mid, SpectrumRole::Dark),
                             read_spectrum(db, mid, SpectrumRole::Reflectance)};
  }

  static MeasurementRecord require_measurement(sql::Db& db, const std::string& mid) {
    auto m = find_measurement(db, mid);
    if (!m) throw Error(Errc::MeasurementNotFound, "no measurement '" + mid + "'");
    return *m;
  }

  static void insert_spectrum(sql::Db& db, const std::string& mid, SpectrumRole role, const std::string& text,
                              const Spectrum& s) {
    sql::Stmt(db, "INSERT INTO spectra(measurement_id, role, kind, text, wavelengths, vals) "
                  "VALUES(?1, ?2, ?3, ?4, ?5, ?6)")
        .bind(1, mid)
        .bind(2, to_string(role))
        .bind(3, spectral::to_string(s.kind()))
        .bind_blob(4, text.data(), text.size())
        .bind_blob(5, s.wavelengths().data(), s.wavelengths().size() * sizeof(double))
        .bind_blob(6, s.values().data(), s.values().size() * sizeof(double))
        .run();
  }

  static void set_case_state(sql::Db& db, const std::string& case_id, CaseState state, const Timestamp& at) {
    sql::Stmt(db, "UPDATE cases SET state = ?1, updated_at = ?2 WHERE case_id = ?3")
        .bind(1, to_string(state))
        .bind(2, at)
        .bind(3, case_id)
        .run();
  }

  // Inserts the record, advances Measured -> Analysed and appends the audit
  // entry. Caller owns the transaction.
  AnalysisRecord insert_analysis(sql::Db& db, const std::string& actor, const std::string& mid,
                                 const inverse::AnalysisConfig& config, const inverse::FitResult& result,
                                 const std::optional<std::string>& job_id) {
    std::string case_id;
    {
      sql::Stmt s(db, "SELECT case_id FROM measurements WHERE measurement_id = ?1");
      s.bind(1, mid);
      if (!s.step()) throw Error(Errc::MeasurementNotFound, "no measurement '" + mid + "'");
      case_id = s.text(0);
    }
    const auto at = tick(db);
    AnalysisRecord rec{new_id('A'), mid, job_id, config, result, engine_version(), at, actor};
    sql::Stmt(db, std::string("INSERT INTO analyses(") + kAnalysisCols + ") VALUES(?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)")
        .bind(1, rec.analysis_id)
        .bind(2, mid)
        .bind(3, job_id)
        .bind(4, Json(config).dump())
        .bind(5, Json(result).dump())
        .bind(6, rec.engine_version)
        .bind(7, at)
        .bind(8, actor)
        .run();
    std::string detail = "recorded " + rec.analysis_id + " for " + mid;
    if (job_id) detail += " from " + *job_id;
    const Case c = require_case(db, case_id);
    if (c.state == CaseState::Measured) {
      set_case_state(db, case_id, CaseState::Analysed, at);
      detail += "; case " + case_id + " Measured -> Analysed";
    }
    append_audit(db, actor, AuditAction::Analyse, rec.analysis_id, at, detail);
    return rec;
  }

  static std::optional<AnalysisJob> find_job(sql::Db& db, const std::string& job_id) {
    sql::Stmt s(db, std::string("SELECT ") + kJobCols + " FROM jobs WHERE job_id = ?1");
    s.bind(1, job_id);
    if (!s.step()) return std::nullopt;
    return read_job(s);
  }
};

Store::Store(StoreOptions options) : impl_(std::make_unique<Impl>()) {
  if (sodium_init() < 0) throw Error(Errc::Internal, "libsodium failed to initialize");
  impl_->options = std::move(options);
  if (impl_->options.path.empty()) throw Error(Errc::ConfigInvalid, "store path is empty");
  if (impl_->options.path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(impl_->options.path.parent_path(), ec);
  }
  Impl::Lease db(*impl_);
  db->exec("PRAGMA journal_mode=WAL");
  sql::WriteTxn txn(*db);
  db->exec(kSchema);
  txn.commit();
}

Store::~Store() = default;

const fs::path& Store::path() const noexcept { return impl_->options.path; }

void Store::set_fault_hook(FaultHook hook) {
  std::lock_guard lock(impl_->hook_mutex);
  impl_->hook = std::move(hook);
}

// ---------------------------------------------------------------------------
// users and sessions

User Store::add_user(const Actor& actor, const std::string& user_id, const std::string& display_name, Role role,
                     const std::string& password) {
  impl_->authorize(actor, Role::Admin, user_id, "adding users");
  if (user_id.empty() || user_id.size() > 128) throw Error(Errc::ValidationFailed, "user_id must be 1-128 chars");
  if (password.empty()) throw Error(Errc::ValidationFailed, "password must not be empty");
  const auto ops = impl_->options.pwhash_opslimit ? impl_->options.pwhash_opslimit : crypto_pwhash_OPSLIMIT_INTERACTIVE;
  const auto mem = impl_->options.pwhash_memlimit ? impl_->options.pwhash_memlimit : crypto_pwhash_MEMLIMIT_INTERACTIVE;
  char hashed[crypto_pwhash_STRBYTES];
  if (crypto_pwhash_str(hashed, password.data(), password.size(), ops, mem) != 0) {
    throw Error(Errc::Internal, "password hashing ran out of memory");
  }
  User user{user_id, display_name, role, hashed};
  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  {
    sql::Stmt s(*db, "SELECT 1 FROM users WHERE user_id = ?1");
    s.bind(1, user_id);
    if (s.step()) throw Error(Errc::ValidationFailed, "user '" + user_id + "' exists");
  }
  const auto at = Impl::tick(*db);
  sql::Stmt(*db, "INSERT INTO users(user_id, display_name, role, credential_hash) VALUES(?1, ?2, ?3, ?4)")
      .bind(1, user.user_id)
      .bind(2, user.display_name)
      .bind(3, to_string(role))
      .bind(4, user.credential_hash)
      .run();
  Impl::append_audit(*db, actor.user_id, AuditAction::Create, user_id, at,
                     "user " + user_id + " with role " + std::string(to_string(role)));
  txn.commit();
  return user;
}

std::optional<User> Store::find_user(const std::string& user_id) const {
  Impl::Lease db(*impl_);
  sql::Stmt s(*db, "SELECT user_id, display_name, role, credential_hash FROM users WHERE user_id = ?1");
  s.bind(1, user_id);
  if (!s.step()) return std::nullopt;
  return User{s.text(0), s.text(1), role_from_string(s.text(2)), s.text(3)};
}

std::size_t Store::user_count() const {
  Impl::Lease db(*impl_);
  sql::Stmt s(*db, "SELECT COUNT(*) FROM users");
  s.step();
  return static_cast<std::size_t>(s.i64(0));
}

Session Store::login(const std::string& user_id, const std::string& password) {
  const auto user = find_user(user_id);
  if (!user || crypto_pwhash_str_verify(user->credential_hash.c_str(), password.data(), password.size()) != 0) {
    impl_->denied(user_id, "session", "login with bad credentials");
    throw Error(Errc::Unauthorized, "bad credentials");
  }
  Session session{random_hex(32), user_id, {}};
  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  const auto at = Impl::tick(*db);
  session.expires_at = format_micros(system_micros() + impl_->options.session_ttl_seconds * 1'000'000);
  sql::Stmt(*db, "DELETE FROM sessions WHERE expires_at <= ?1").bind(1, at).run();
  sql::Stmt(*db, "INSERT INTO sessions(token_hash, user_id, expires_at) VALUES(?1, ?2, ?3)")
      .bind(1, token_hash(session.token))
      .bind(2, user_id)
      .bind(3, session.expires_at)
      .run();
  Impl::append_audit(*db, user_id, AuditAction::Login, user_id, at, "session until " + session.expires_at);
  txn.commit();
  return session;
}

Actor Store::resolve_session(const std::string& token) const {
  Impl::Lease db(*impl_);
  sql::Stmt s(*db, "SELECT s.user_id, u.role, s.expires_at FROM sessions s JOIN users u ON u.user_id = s.user_id "
                   "WHERE s.token_hash = ?1");
  s.bind(1, token_hash(token));
  if (!s.step()) throw Error(Errc::Unauthorized, "unknown session token");
  if (s.text(2) <= format_micros(system_micros())) throw Error(Errc::Unauthorized, "session expired");
  return Actor{s.text(0), role_from_string(s.text(1))};
}

void Store::record_denied(const std::string& actor, const std::string& target, const std::string& detail) {
  impl_->denied(actor, target, detail);
}

// ---------------------------------------------------------------------------
// cases

CreatedCase Store::create_case(const Actor& actor, const CaseMetadata& meta) {
  impl_->authorize(actor, Role::Operator, "case", "creating cases");
  if (meta.body_site.empty()) throw Error(Errc::ValidationFailed, "body_site is required");
  if (meta.postmortem_interval_hours &&
      (!std::isfinite(*meta.postmortem_interval_hours) || *meta.postmortem_interval_hours < 0.0)) {
    throw Error(Errc::ValidationFailed, "postmortem_interval_hours must be >= 0");
  }
  CreatedCase out;
  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  if (!meta.external_ref.empty()) {
    sql::Stmt s(*db, "SELECT case_id FROM cases WHERE external_ref = ?1 ORDER BY case_id");
    s.bind(1, meta.external_ref);
    while (s.step()) out.warnings.push_back("external_ref '" + meta.external_ref + "' also used by " + s.text(0));
  }
  const auto at = Impl::tick(*db);
  out.record = Case{new_id('C'), meta.external_ref, meta.body_site, meta.postmortem_interval_hours, meta.notes,
                    CaseState::Open, at, at};
  sql::Stmt(*db, std::string("INSERT INTO cases(") + kCaseCols + ") VALUES(?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)")
      .bind(1, out.record.case_id)
      .bind(2, meta.external_ref)
      .bind(3, meta.body_site)
      .bind(4, meta.postmortem_interval_hours)
      .bind(5, meta.notes)
      .bind(6, to_string(CaseState::Open))
      .bind(7, at)
      .bind(8, at)
      .run();
  std::string detail = "body_site=" + meta.body_site;
  for (const auto& w : out.warnings) detail += "; warning: " + w;
  Impl::append_audit(*db, actor.user_id, AuditAction::Create, out.record.case_id, at, detail);
  txn.commit();
  return out;
}

Case Store::get_case(const Actor& actor, const std::string& case_id) const {
  impl_->authorize(actor, Role::Operator, case_id, "reading cases");
  Impl::Lease db(*impl_);
  return Impl::require_case(*db, case_id);
}

std::vector<Case> Store::query_cases(const Actor& actor, const CaseFilter& filter, Page page) const {
  impl_->authorize(actor, Role::Operator, "cases", "querying cases");
  check_page(page);
  std::string q = std::string("SELECT ") + kCaseCols + " FROM cases WHERE 1 = 1";
  int n = 0;
  if (filter.state) q += " AND state = ?" + std::to_string(++n);
  if (filter.body_site) q += " AND body_site = ?" + std::to_string(++n);
  if (filter.created_from) q += " AND created_at >= ?" + std::to_string(++n);
  if (filter.created_to) q += " AND created_at <= ?" + std::to_string(++n);
  if (filter.text) {
    const auto i = std::to_string(++n);
    q += " AND (instr(lower(external_ref), lower(?" + i + ")) > 0 OR instr(lower(body_site), lower(?" + i +
         ")) > 0 OR instr(lower(notes), lower(?" + i + ")) > 0)";
  }
  q += " ORDER BY created_at DESC, case_id ASC LIMIT ?" + std::to_string(n + 1) + " OFFSET ?" + std::to_string(n + 2);
  Impl::Lease db(*impl_);
  sql::Stmt s(*db, q);
  int i = 0;
  if (filter.state) s.bind(++i, to_string(*filter.state));
  if (filter.body_site) s.bind(++i, *filter.body_site);
  if (filter.created_from) s.bind(++i, *filter.created_from);
  if (filter.created_to) s.bind(++i, *filter.created_to);
  if (filter.text) s.bind(++i, *filter.text);
  s.bind(++i, static_cast<std::int64_t>(page.size));
  s.bind(++i, static_cast<std::int64_t>((page.number - 1) * page.size));
  std::vector<Case> out;
  while (s.step()) out.push_back(read_case(s));
  return out;
}

Case Store::transition_case(const Actor& actor, const std::string& case_id, CaseState target) {
  const Role needed = target == CaseState::Reviewed || target == CaseState::Closed ? Role::Reviewer
                      : target == CaseState::Analysed                            ? Role::Analyst
                                                                                 : Role::Operator;
  impl_->authorize(actor, needed, case_id, "transition to " + std::string(to_string(target)));
  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  Case c = Impl::require_case(*db, case_id);
  if (!transition_allowed(c.state, target)) {
    throw Error(Errc::IllegalTransition,
                std::string(to_string(c.state)) + " -> " + std::string(to_string(target)) + " for " + case_id);
  }
  const auto at = Impl::tick(*db);
  Impl::set_case_state(*db, case_id, target, at);
  Impl::append_audit(*db, actor.user_id, AuditAction::Transition, case_id, at,
                     std::string(to_string(c.state)) + " -> " + std::string(to_string(target)));
  txn.commit();
  c.state = target;
  c.updated_at = at;
  return c;
}

// ---------------------------------------------------------------------------
// measurements

MeasurementRecord Store::attach_measurement(const Actor& actor, const std::string& case_id,
                                            const spectral::RawBundle& bundle, const InstrumentMetadata& instrument) {
  impl_->authorize(actor, Role::Operator, case_id, "attaching measurements");
  instrument.validate();
  const auto norm =
      spectral::normalize_reflectance(bundle.sample.spectrum, bundle.white.spectrum, bundle.dark.spectrum);
  const std::string reflectance_text = spectral::format_spectrum_csv(norm.reflectance);

  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  const Case c = Impl::require_case(*db, case_id);
  if (c.state == CaseState::Closed) throw Error(Errc::CaseClosed, "case " + case_id + " is Closed");
  const auto at = Impl::tick(*db);
  MeasurementRecord rec{new_id('M'),          case_id,
                        instrument,           actor.user_id,
                        at,                   bundle.sample.spectrum,
                        bundle.white.spectrum, bundle.dark.spectrum,
                        norm.reflectance};
  sql::Stmt(*db, "INSERT INTO measurements(measurement_id, case_id, instrument, operator_id, recorded_at) "
                 "VALUES(?1, ?2, ?3, ?4, ?5)")
      .bind(1, rec.measurement_id)
      .bind(2, case_id)
      .bind(3, instrument_json(instrument).dump())
      .bind(4, actor.user_id)
      .bind(5, at)
      .run();
  impl_->fault("measurement");
  Impl::insert_spectrum(*db, rec.measurement_id, SpectrumRole::Sample, bundle.sample.text, rec.sample);
  impl_->fault("spectrum:sample");
  Impl::insert_spectrum(*db, rec.measurement_id, SpectrumRole::White, bundle.white.text, rec.white);
  impl_->fault("spectrum:white");
  Impl::insert_spectrum(*db, rec.measurement_id, SpectrumRole::Dark, bundle.dark.text, rec.dark);
  impl_->fault("spectrum:dark");
  Impl::insert_spectrum(*db, rec.measurement_id, SpectrumRole::Reflectance, reflectance_text, rec.reflectance);
  impl_->fault("spectrum:reflectance");

  std::string detail = "measurement " + rec.measurement_id + " on " + case_id;
  if (c.state == CaseState::Open) {
    Impl::set_case_state(*db, case_id, CaseState::Measured, at);
    detail += "; case Open -> Measured";
  }
  impl_->fault("case");
  const auto clamped = std::count(norm.clamped.begin(), norm.clamped.end(), true);
  const auto above = std::count(norm.above_unity.begin(), norm.above_unity.end(), true);
  if (clamped) detail += "; " + std::to_string(clamped) + " values clamped to 0";
  if (above) detail += "; " + std::to_string(above) + " values above 1";
  Impl::append_audit(*db, actor.user_id, AuditAction::Ingest, rec.measurement_id, at, detail);
  impl_->fault("audit");
  txn.commit();
  return rec;
}

MeasurementRecord Store::get_measurement(const Actor& actor, const std::string& measurement_id) const {
  impl_->authorize(actor, Role::Operator, measurement_id, "reading measurements");
  Impl::Lease db(*impl_);
  sql::ReadTxn snapshot(*db);
  return Impl::require_measurement(*db, measurement_id);
}

std::vector<MeasurementRecord> Store::measurements_for_case(const Actor& actor, const std::string& case_id) const {
  impl_->authorize(actor, Role::Operator, case_id, "reading measurements");
  Impl::Lease db(*impl_);
  sql::ReadTxn snapshot(*db);
  Impl::require_case(*db, case_id);
  std::vector<std::string> ids;
  {
    sql::Stmt s(*db, "SELECT measurement_id FROM measurements WHERE case_id = ?1 ORDER BY recorded_at, measurement_id");
    s.bind(1, case_id);
    while (s.step()) ids.push_back(s.text(0));
  }
  std::vector<MeasurementRecord> out;
  for (const auto& id : ids) out.push_back(Impl::require_measurement(*db, id));
  return out;
}

std::string Store::spectrum_text(const std::string& measurement_id, SpectrumRole role) const {
  Impl::Lease db(*impl_);
  sql::Stmt s(*db, "SELECT text FROM spectra WHERE measurement_id = ?1 AND role = ?2");
  s.bind(1, measurement_id).bind(2, to_string(role));
  if (!s.step()) throw Error(Errc::MeasurementNotFound, "no measurement '" + measurement_id + "'");
  return s.blob(0);
}

// ---------------------------------------------------------------------------
// analyses

AnalysisRecord Store::record_analysis(const Actor& actor, const std::string& measurement_id,
                                      const inverse::AnalysisConfig& config, const inverse::FitResult& result) {
  impl_->authorize(actor, Role::Analyst, measurement_id, "recording analyses");
  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  auto rec = impl_->insert_analysis(*db, actor.user_id, measurement_id, config, result, std::nullopt);
  txn.commit();
  return rec;
}

AnalysisRecord Store::get_analysis(const Actor& actor, const std::string& analysis_id) const {
  impl_->authorize(actor, Role::Operator, analysis_id, "reading analyses");
  Impl::Lease db(*impl_);
  sql::Stmt s(*db, std::string("SELECT ") + kAnalysisCols + " FROM analyses WHERE analysis_id = ?1");
  s.bind(1, analysis_id);
  if (!s.step()) throw Error(Errc::AnalysisNotFound, "no analysis '" + analysis_id + "'");
  return read_analysis(s);
}

std::vector<AnalysisRecord> Store::analyses_for_measurement(const Actor& actor,
                                                            const std::string& measurement_id) const {
  impl_->authorize(actor, Role::Operator, measurement_id, "reading analyses");
  Impl::Lease db(*impl_);
  sql::Stmt s(*db, std::string("SELECT ") + kAnalysisCols +
                       " FROM analyses WHERE measurement_id = ?1 ORDER BY created_at DESC, analysis_id DESC");
  s.bind(1, measurement_id);
  std::vector<AnalysisRecord> out;
  while (s.step()) out.push_back(read_analysis(s));
  return out;
}

std::vector<AuditEntry> Store::audit_trail(const Actor& actor, const std::optional<std::string>& target_id,
                                           Page page) const {
  impl_->authorize(actor, Role::Reviewer, target_id.value_or("audit"), "reading the audit trail");
  check_page(page);
  Impl::Lease db(*impl_);
  sql::Stmt s(*db, target_id ? "SELECT seq, actor, action, target_id, at, detail FROM audit WHERE target_id = ?3 "
                               "ORDER BY seq LIMIT ?1 OFFSET ?2"
                             : "SELECT seq, actor, action, target_id, at, detail FROM audit "
                               "ORDER BY seq LIMIT ?1 OFFSET ?2");
  s.bind(1, static_cast<std::int64_t>(page.size));
  s.bind(2, static_cast<std::int64_t>((page.number - 1) * page.size));
  if (target_id) s.bind(3, *target_id);
  std::vector<AuditEntry> out;
  while (s.step()) {
    out.push_back({s.i64(0), s.text(1), audit_action_from_string(s.text(2)), s.text(3), s.text(4), s.text(5)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// jobs

SubmittedJob Store::submit_job(const Actor& actor, const std::string& measurement_id,
                               const inverse::AnalysisConfig& config,
                               const std::optional<std::string>& idempotency_key) {
  impl_->authorize(actor, Role::Analyst, measurement_id, "submitting analyses");
  config.fit.validate();
  if (config.lut.empty()) throw Error(Errc::ConfigInvalid, "lut is required");
  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  if (idempotency_key) {
    sql::Stmt s(*db, std::string("SELECT ") + kJobCols + " FROM jobs WHERE submitted_by = ?1 AND idempotency_key = ?2");
    s.bind(1, actor.user_id).bind(2, *idempotency_key);
    if (s.step()) return {read_job(s), false};
  }
  {
    sql::Stmt s(*db, "SELECT 1 FROM measurements WHERE measurement_id = ?1");
    s.bind(1, measurement_id);
    if (!s.step()) throw Error(Errc::MeasurementNotFound, "no measurement '" + measurement_id + "'");
  }
  std::int64_t seq = 1;
  {
    sql::Stmt s(*db, "SELECT COALESCE(MAX(seq), 0) + 1 FROM jobs");
    s.step();
    seq = s.i64(0);
  }
  const auto at = Impl::tick(*db);
  AnalysisJob job;
  job.job_id = new_id('J');
  job.measurement_id = measurement_id;
  job.config = config;
  job.submitted_by = actor.user_id;
  job.submitted_at = at;
  sql::Stmt(*db, "INSERT INTO jobs(job_id, seq, measurement_id, config, status, submitted_by, submitted_at, "
                 "idempotency_key) VALUES(?1, ?2, ?3, ?4, 'Queued', ?5, ?6, ?7)")
      .bind(1, job.job_id)
      .bind(2, seq)
      .bind(3, measurement_id)
      .bind(4, Json(config).dump())
      .bind(5, actor.user_id)
      .bind(6, at)
      .bind(7, idempotency_key)
      .run();
  Impl::append_audit(*db, actor.user_id, AuditAction::Analyse, job.job_id, at,
                     "queued job " + job.job_id + " for " + measurement_id + " with LUT " + config.lut);
  txn.commit();
  return {job, true};
}

AnalysisJob Store::get_job(const Actor& actor, const std::string& job_id) const {
  impl_->authorize(actor, Role::Operator, job_id, "reading jobs");
  Impl::Lease db(*impl_);
  auto job = Impl::find_job(*db, job_id);
  if (!job) throw Error(Errc::JobNotFound, "no job '" + job_id + "'");
  return *job;
}

std::optional<AnalysisJob> Store::claim_job() {
  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  std::string job_id;
  {
    sql::Stmt s(*db, "SELECT job_id FROM jobs j WHERE status = 'Queued' AND NOT EXISTS ("
                     "SELECT 1 FROM jobs r WHERE r.measurement_id = j.measurement_id AND r.status = 'Running') "
                     "ORDER BY seq LIMIT 1");
    if (!s.step()) return std::nullopt;
    job_id = s.text(0);
  }
  sql::Stmt(*db, "UPDATE jobs SET status = 'Running' WHERE job_id = ?1 AND status = 'Queued'").bind(1, job_id).run();
  if (db->changes() != 1) return std::nullopt;
  auto job = Impl::find_job(*db, job_id);
  txn.commit();
  return job;
}

std::optional<AnalysisRecord> Store::complete_job(const std::string& job_id, const inverse::FitResult& result) {
  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  const auto job = Impl::find_job(*db, job_id);
  if (!job) throw Error(Errc::JobNotFound, "no job '" + job_id + "'");
  if (job->status != JobStatus::Running) return std::nullopt;
  auto rec = impl_->insert_analysis(*db, job->submitted_by, job->measurement_id, job->config, result, job_id);
  impl_->fault("job:record");
  sql::Stmt(*db, "UPDATE jobs SET status = 'Done', finished_at = ?1, result_ref = ?2 "
                 "WHERE job_id = ?3 AND status = 'Running'")
      .bind(1, rec.created_at)
      .bind(2, rec.analysis_id)
      .bind(3, job_id)
      .run();
  if (db->changes() != 1) return std::nullopt;
  impl_->fault("job:commit");
  txn.commit();
  return rec;
}

void Store::fail_job(const std::string& job_id, const std::string& error) {
  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  const auto at = Impl::tick(*db);
  sql::Stmt(*db, "UPDATE jobs SET status = 'Failed', finished_at = ?1, error = ?2 WHERE job_id = ?3 AND status = 'Running'")
      .bind(1, at)
      .bind(2, error)
      .bind(3, job_id)
      .run();
  if (db->changes() != 1) return;
  Impl::append_audit(*db, "system", AuditAction::Analyse, job_id, at, "job failed: " + error);
  txn.commit();
}

std::size_t Store::recover_interrupted_jobs() {
  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  std::vector<std::string> ids;
  {
    sql::Stmt s(*db, "SELECT job_id FROM jobs WHERE status = 'Running' ORDER BY seq");
    while (s.step()) ids.push_back(s.text(0));
  }
  for (const auto& id : ids) {
    const auto at = Impl::tick(*db);
    sql::Stmt(*db, "UPDATE jobs SET status = 'Failed', finished_at = ?1, error = ?2 WHERE job_id = ?3")
        .bind(1, at)
        .bind(2, "interrupted by a service restart; resubmit to retry")
        .bind(3, id)
        .run();
    Impl::append_audit(*db, "system", AuditAction::Analyse, id, at, "job failed: interrupted by a service restart");
  }
  txn.commit();
  return ids.size();
}

// ---------------------------------------------------------------------------
// export and import

void Store::export_case(const Actor& actor, const std::string& case_id, const fs::path& dir) const {
  impl_->authorize(actor, Role::Operator, case_id, "exporting cases");
  Impl::Lease db(*impl_);
  sql::ReadTxn snapshot(*db);
  const Case c = Impl::require_case(*db, case_id);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "case.meta", Json(c).dump(2) + "\n");

  std::vector<std::string> mids;
  {
    sql::Stmt s(*db, "SELECT measurement_id FROM measurements WHERE case_id = ?1 ORDER BY recorded_at");
    s.bind(1, case_id);
    while (s.step()) mids.push_back(s.text(0));
  }
  for (const auto& mid : mids) {
    const auto mdir = dir / ("measurement-" + mid);
    fs::create_directories(mdir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + mdir.string());
    {
      sql::Stmt s(*db, "SELECT measurement_id, case_id, instrument, operator_id, recorded_at FROM measurements "
                       "WHERE measurement_id = ?1");
      s.bind(1, mid);
      s.step();
      const Json meta{{"measurement_id", s.text(0)},
                      {"case_id", s.text(1)},
                      {"instrument", parse_json(s.text(2))},
                      {"operator_id", s.text(3)},
                      {"recorded_at", s.text(4)}};
      write_file(mdir / "measurement.meta", meta.dump(2) + "\n");
    }
    sql::Stmt s(*db, "SELECT role, text FROM spectra WHERE measurement_id = ?1");
    s.bind(1, mid);
    while (s.step()) write_file(mdir / (s.text(0) + ".csv"), s.blob(1));

    sql::Stmt a(*db, std::string("SELECT ") + kAnalysisCols + " FROM analyses WHERE measurement_id = ?1");
    a.bind(1, mid);
    while (a.step()) {
      const auto rec = read_analysis(a);
      write_file(dir / ("analysis-" + rec.analysis_id + ".meta"), Json(rec).dump(2) + "\n");
    }
  }
}

Case Store::import_case(const Actor& actor, const fs::path& dir) {
  impl_->authorize(actor, Role::Admin, dir.string(), "importing cases");
  const Json cj = parse_json(read_file(dir / "case.meta"));
  Case c;
  try {
    c.case_id = required<std::string>(cj, "case_id");
    c.external_ref = optional<std::string>(cj, "external_ref", "");
    c.body_site = required<std::string>(cj, "body_site");
    if (cj.contains("postmortem_interval_hours") && !cj.at("postmortem_interval_hours").is_null()) {
      c.postmortem_interval_hours = cj.at("postmortem_interval_hours").get<double>();
    }
    c.notes = optional<std::string>(cj, "notes", "");
    c.state = case_state_from_string(required<std::string>(cj, "state"));
    c.created_at = required<std::string>(cj, "created_at");
    c.updated_at = required<std::string>(cj, "updated_at");
  } catch (const Error& e) {
    throw Error(Errc::ValidationFailed, std::string("case.meta: ") + e.what());
  }

  struct Pending {
    Json meta;
    std::array<std::string, 4> texts;
    std::array<Spectrum, 4> spectra;
  };
  std::vector<Pending> measurements;
  std::vector<Json> analyses;
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  for (const auto& p : entries) {
    const auto name = p.filename().string();
    if (fs::is_directory(p) && name.rfind("measurement-", 0) == 0) {
      const auto sample = spectral::parse_spectrum_csv(read_file(p / "sample.csv"), SpectrumKind::RawCounts);
      const auto white = spectral::parse_spectrum_csv(read_file(p / "white.csv"), SpectrumKind::RawCounts);
      const auto dark = spectral::parse_spectrum_csv(read_file(p / "dark.csv"), SpectrumKind::RawCounts);
      const auto refl = spectral::parse_spectrum_csv(read_file(p / "reflectance.csv"), SpectrumKind::Reflectance);
      const auto norm = spectral::normalize_reflectance(sample.spectrum, white.spectrum, dark.spectrum);
      if (spectral::format_spectrum_csv(norm.reflectance) != refl.text) {
        throw Error(Errc::ValidationFailed, name + ": reflectance.csv does not match the raw spectra");
      }
      measurements.push_back({parse_json(read_file(p / "measurement.meta")),
                              {sample.text, white.text, dark.text, refl.text},
                              {sample.spectrum, white.spectrum, dark.spectrum, refl.spectrum}});
    } else if (name.rfind("analysis-", 0) == 0 && p.extension() == ".meta") {
      analyses.push_back(parse_json(read_file(p)));
    }
  }

  Impl::Lease db(*impl_);
  sql::WriteTxn txn(*db);
  if (Impl::find_case(*db, c.case_id)) throw Error(Errc::ValidationFailed, "case " + c.case_id + " already exists");
  const auto at = Impl::tick(*db);
  sql::Stmt(*db, std::string("INSERT INTO cases(") + kCaseCols + ") VALUES(?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)")
      .bind(1, c.case_id)
      .bind(2, c.external_ref)
      .bind(3, c.body_site)
      .bind(4, c.postmortem_interval_hours)
      .bind(5, c.notes)
      .bind(6, to_string(c.state))
      .bind(7, c.created_at)
      .bind(8, c.updated_at)
      .run();
  for (const auto& m : measurements) {
    const auto mid = required<std::string>(m.meta, "measurement_id");
    if (required<std::string>(m.meta, "case_id") != c.case_id) {
      throw Error(Errc::ValidationFailed, "measurement " + mid + " belongs to another case");
    }
    InstrumentMetadata instrument = required<InstrumentMetadata>(m.meta, "instrument");
    sql::Stmt(*db, "INSERT INTO measurements(measurement_id, case_id, instrument, operator_id, recorded_at) "
                   "VALUES(?1, ?2, ?3, ?4, ?5)")
        .bind(1, mid)
        .bind(2, c.case_id)
        .bind(3, instrument_json(instrument).dump())
        .bind(4, required<std::string>(m.meta, "operator_id"))
        .bind(5, required<std::string>(m.meta, "recorded_at"))
        .run();
    const SpectrumRole roles[] = {SpectrumRole::Sample, SpectrumRole::White, SpectrumRole::Dark,
                                  SpectrumRole::Reflectance};
    for (std::size_t i = 0; i < 4; ++i) Impl::insert_spectrum(*db, mid, roles[i], m.texts[i], m.spectra[i]);
  }
  for (const auto& a : analyses) {
    const auto config = required<inverse::AnalysisConfig>(a, "config");
    const auto result = required<inverse::FitResult>(a, "result");
    std::optional<std::string> job_id;
    if (a.contains("job_id") && !a.at("job_id").is_null()) job_id = a.at("job_id").get<std::string>();
    sql::Stmt(*db, std::string("INSERT INTO analyses(") + kAnalysisCols + ") VALUES(?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)")
        .bind(1, required<std::string>(a, "analysis_id"))
        .bind(2, required<std::string>(a, "measurement_id"))
        .bind(3, job_id)
        .bind(4, Json(config).dump())
        .bind(5, Json(result).dump())
        .bind(6, required<std::string>(a, "engine_version"))
        .bind(7, required<std::string>(a, "created_at"))
        .bind(8, required<std::string>(a, "created_by"))
        .run();
  }
  Impl::append_audit(*db, actor.user_id, AuditAction::Create, c.case_id, at,
                     "imported with " + std::to_string(measurements.size()) + " measurements and " +
                         std::to_string(analyses.size()) + " analyses");
  txn.commit();
  return c;
}

// ---------------------------------------------------------------------------
// maintenance

std::vector<std::string> Store::integrity_check() const {
  Impl::Lease db(*impl_);
  sql::ReadTxn snapshot(*db);
  std::vector<std::string> problems;
  auto scan = [&](const char* query, const char* what) {
    sql::Stmt s(*db, query);
    while (s.step()) problems.push_back(std::string(what) + " " + s.text(0));
  };
  scan("SELECT measurement_id FROM measurements m WHERE NOT EXISTS (SELECT 1 FROM cases c WHERE c.case_id = m.case_id)",
       "measurement without case:");
  scan("SELECT measurement_id FROM measurements m WHERE (SELECT COUNT(*) FROM spectra s "
       "WHERE s.measurement_id = m.measurement_id) != 4",
       "measurement without its four spectra:");
  scan("SELECT measurement_id FROM spectra s WHERE NOT EXISTS "
       "(SELECT 1 FROM measurements m WHERE m.measurement_id = s.measurement_id)",
       "spectrum without measurement:");
  scan("SELECT analysis_id FROM analyses a WHERE NOT EXISTS "
       "(SELECT 1 FROM measurements m WHERE m.measurement_id = a.measurement_id)",
       "analysis without measurement:");
  scan("SELECT job_id FROM jobs WHERE status = 'Done' AND (result_ref IS NULL OR NOT EXISTS "
       "(SELECT 1 FROM analyses a WHERE a.analysis_id = jobs.result_ref))",
       "done job without its analysis:");
  scan("SELECT job_id FROM jobs WHERE status = 'Failed' AND error IS NULL", "failed job without error:");
  {
    sql::Stmt s(*db, "SELECT COUNT(*), COALESCE(MIN(seq), 1), COALESCE(MAX(seq), 0) FROM audit");
    s.step();
    if (s.i64(0) != s.i64(2) || s.i64(1) != 1) {
      problems.push_back("audit sequence has gaps: " + std::to_string(s.i64(0)) + " entries, max " +
                         std::to_string(s.i64(2)));
    }
  }
  return problems;
}

std::string Store::dump() const {
  Impl::Lease db(*impl_);
  sql::ReadTxn snapshot(*db);
  std::string out;
  for (const char* table : {"meta", "users", "sessions", "cases", "measurements", "spectra", "analyses", "audit", "jobs"}) {
    out += "## ";
    out += table;
    out += '\n';
    sql::Stmt s(*db, std::string("SELECT * FROM ") + table + " ORDER BY rowid");
    while (s.step()) {
      for (int c = 0; c < s.columns(); ++c) {
        if (c) out += '|';
        if (s.is_null(c)) {
          out += "NULL";
        } else {
          out += s.blob(c);
        }
      }
      out += '\n';
    }
  }
  return out;
}

void Store::execute_sql(std::string_view sql) {
  Impl::Lease db(*impl_);
  db->exec(sql);
}

// ---------------------------------------------------------------------------
// JSON

void to_json(Json& j, const Case& c) {
  j = Json{{"case_id", c.case_id},
           {"external_ref", c.external_ref},
           {"body_site", c.body_site},
           {"postmortem_interval_hours",
            c.postmortem_interval_hours ? Json(*c.postmortem_interval_hours) : Json(nullptr)},
           {"notes", c.notes},
           {"state", to_string(c.state)},
           {"created_at", c.created_at},
           {"updated_at", c.updated_at}};
}

void to_json(Json& j, const CaseMetadata& m) {
  j = Json{{"external_ref", m.external_ref},
           {"body_site", m.body_site},
           {"postmortem_interval_hours",
            m.postmortem_interval_hours ? Json(*m.postmortem_interval_hours) : Json(nullptr)},
           {"notes", m.notes}};
}

void from_json(const Json& j, CaseMetadata& m) {
  if (!j.is_object()) throw Error(Errc::ValidationFailed, "case metadata must be an object");
  try {
    m.external_ref = optional<std::string>(j, "external_ref", "");
    m.body_site = optional<std::string>(j, "body_site", "");
    m.postmortem_interval_hours.reset();
    if (j.contains("postmortem_interval_hours") && !j.at("postmortem_interval_hours").is_null()) {
      m.postmortem_interval_hours = required<double>(j, "postmortem_interval_hours");
    }
    m.notes = optional<std::string>(j, "notes", "");
  } catch (const Error& e) {
    throw Error(Errc::ValidationFailed, e.what());
  }
}

void to_json(Json& j, const InstrumentMetadata& m) {
  j = Json{{"device", m.device},
           {"light_source", m.light_source},
           {"geometry", m.geometry},
           {"spot_diameter_mm", m.spot_diameter_mm},
           {"white_standard", m.white_standard}};
}

void from_json(const Json& j, InstrumentMetadata& m) {
  const InstrumentMetadata d;
  if (!j.is_object()) throw Error(Errc::ValidationFailed, "instrument metadata must be an object");
  try {
    m.device = optional<std::string>(j, "device", d.device);
    m.light_source = optional<std::string>(j, "light_source", d.light_source);
    m.geometry = optional<std::string>(j, "geometry", d.geometry);
    m.spot_diameter_mm = optional<double>(j, "spot_diameter_mm", d.spot_diameter_mm);
    m.white_standard = optional<std::string>(j, "white_standard", d.white_standard);
  } catch (const Error& e) {
    throw Error(Errc::ValidationFailed, e.what());
  }
  m.validate();
}

void to_json(Json& j, const MeasurementRecord& m) {
  j = Json{{"measurement_id", m.measurement_id},
           {"case_id", m.case_id},
           {"instrument", m.instrument},
           {"operator_id", m.operator_id},
           {"recorded_at", m.recorded_at},
           {"spectra",
            Json{{"sample", m.sample}, {"white", m.white}, {"dark", m.dark}, {"reflectance", m.reflectance}}}};
}

void to_json(Json& j, const AnalysisRecord& a) {
  j = Json{{"analysis_id", a.analysis_id},
           {"measurement_id", a.measurement_id},
           {"job_id", a.job_id ? Json(*a.job_id) : Json(nullptr)},
           {"config", a.config},
           {"result", a.result},
           {"engine_version", a.engine_version},
           {"created_at", a.created_at},
           {"created_by", a.created_by}};
}

void to_json(Json& j, const AuditEntry& e) {
  j = Json{{"sequence_number", e.sequence_number},
           {"actor", e.actor},
           {"action", to_string(e.action)},
           {"target_id", e.target_id},
           {"at", e.at},
           {"detail", e.detail}};
}

void to_json(Json& j, const AnalysisJob& job) {
  auto opt = [](const std::optional<std::string>& v) { return v ? Json(*v) : Json(nullptr); };
  j = Json{{"job_id", job.job_id},
           {"measurement_id", job.measurement_id},
           {"config", job.config},
           {"status", to_string(job.status)},
           {"submitted_by", job.submitted_by},
           {"submitted_at", job.submitted_at},
           {"finished_at", opt(job.finished_at)},
           {"result_ref", opt(job.result_ref)},
           {"error", opt(job.error)}};
}

void to_json(Json& j, const Session& s) {
  j = Json{{"token", s.token}, {"user_id", s.user_id}, {"expires_at", s.expires_at}};
}

}  // namespace livorlab::eln

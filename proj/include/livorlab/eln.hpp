#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "livorlab/inverse.hpp"
#include "livorlab/json_io.hpp"
#include "livorlab/spectral_csv.hpp"

namespace livorlab::eln {

using spectral::Spectrum;

enum class CaseState { Open, Measured, Analysed, Reviewed, Closed };
enum class Role { Operator, Analyst, Reviewer, Admin };
enum class AuditAction { Create, Transition, Ingest, Analyse, Login, Denied };
enum class JobStatus { Queued, Running, Done, Failed };

std::string_view to_string(CaseState s) noexcept;
std::string_view to_string(Role r) noexcept;
std::string_view to_string(AuditAction a) noexcept;
std::string_view to_string(JobStatus s) noexcept;
CaseState case_state_from_string(std::string_view s);
Role role_from_string(std::string_view s);
JobStatus job_status_from_string(std::string_view s);

/// Legal edges: the forward chain Open->Measured->Analysed->Reviewed->Closed
/// plus any non-Closed state -> Closed.
bool transition_allowed(CaseState from, CaseState to) noexcept;

/// UTC, ISO-8601 with microseconds: "2026-01-31T12:00:00.000000Z".
/// Fixed width, so lexicographic order is time order.
using Timestamp = std::string;

/// Who is asking. An actor without a role is authenticated as nobody.
struct Actor {
  std::string user_id;
  std::optional<Role> role;
};

struct CaseMetadata {
  std::string external_ref;
  std::string body_site;
  std::optional<double> postmortem_interval_hours;
  std::string notes;
};

struct Case {
  std::string case_id;
  std::string external_ref;
  std::string body_site;
  std::optional<double> postmortem_interval_hours;
  std::string notes;
  CaseState state = CaseState::Open;
  Timestamp created_at;
  Timestamp updated_at;
};

struct CreatedCase {
  Case record;
  std::vector<std::string> warnings;
};

struct InstrumentMetadata {
  std::string device = "MCS 400";
  std::string light_source = "halogen, illuminant D65";
  std::string geometry = "45/45";
  double spot_diameter_mm = 5.0;
  std::string white_standard = "compressed barium sulphate, ISO 7724-2";

  void validate() const;
};

enum class SpectrumRole { Sample, White, Dark, Reflectance };
std::string_view to_string(SpectrumRole r) noexcept;

struct MeasurementRecord {
  std::string measurement_id;
  std::string case_id;
  InstrumentMetadata instrument;
  std::string operator_id;
  Timestamp recorded_at;
  Spectrum sample;
  Spectrum white;
  Spectrum dark;
  Spectrum reflectance;
};

struct AnalysisRecord {
  std::string analysis_id;
  std::string measurement_id;
  std::optional<std::string> job_id;
  inverse::AnalysisConfig config;
  inverse::FitResult result;
  std::string engine_version;
  Timestamp created_at;
  std::string created_by;
};

struct AuditEntry {
  std::int64_t sequence_number = 0;
  std::string actor;
  AuditAction action = AuditAction::Create;
  std::string target_id;
  Timestamp at;
  std::string detail;
};

struct User {
  std::string user_id;
  std::string display_name;
  Role role = Role::Operator;
  std::string credential_hash;
};

struct Session {
  std::string token;
  std::string user_id;
  Timestamp expires_at;
};

struct AnalysisJob {
  std::string job_id;
  std::string measurement_id;
  inverse::AnalysisConfig config;
  JobStatus status = JobStatus::Queued;
  std::string submitted_by;
  Timestamp submitted_at;
  std::optional<Timestamp> finished_at;
  std::optional<std::string> result_ref;
  std::optional<std::string> error;
};

struct SubmittedJob {
  AnalysisJob job;
  bool created;  // false when an idempotency key matched an earlier job
};

struct CaseFilter {
  std::optional<CaseState> state;
  std::optional<std::string> body_site;
  std::optional<Timestamp> created_from;  // inclusive
  std::optional<Timestamp> created_to;    // inclusive
  std::optional<std::string> text;        // substring of external_ref, body_site or notes
};

/// 1-based page of `size` items.
struct Page {
  std::size_t number = 1;
  std::size_t size = 50;
};

struct StoreOptions {
  std::filesystem::path path;
  // libsodium argon2id limits; tests lower them to the minimum
  unsigned long long pwhash_opslimit = 0;  // 0: crypto_pwhash_OPSLIMIT_INTERACTIVE
  std::size_t pwhash_memlimit = 0;         // 0: crypto_pwhash_MEMLIMIT_INTERACTIVE
  std::int64_t session_ttl_seconds = 8 * 3600;
};

/// Point names passed to the fault hook, in the order attach_measurement
/// reaches them: "measurement", "spectrum:sample", "spectrum:white",
/// "spectrum:dark", "spectrum:reflectance", "case", "audit". Completing a job
/// calls "job:record" and "job:commit". A hook that throws aborts the
/// transaction.
using FaultHook = std::function<void(std::string_view point)>;

/// The notebook. Backed by one SQLite database; safe to share between threads
/// and to open from several processes (writes serialize on the database lock).
class Store {
 public:
  explicit Store(StoreOptions options);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const std::filesystem::path& path() const noexcept;

  // users and sessions
  User add_user(const Actor& actor, const std::string& user_id, const std::string& display_name, Role role,
                const std::string& password);
  std::optional<User> find_user(const std::string& user_id) const;
  std::size_t user_count() const;
  /// Wrong credentials write a Denied entry and raise Unauthorized.
  Session login(const std::string& user_id, const std::string& password);
  /// Actor behind a live token; Unauthorized for unknown or expired tokens.
  Actor resolve_session(const std::string& token) const;
  /// Appends a Denied entry for a request that never got an actor.
  void record_denied(const std::string& actor, const std::string& target, const std::string& detail);

  // cases
  CreatedCase create_case(const Actor& actor, const CaseMetadata& meta);
  Case get_case(const Actor& actor, const std::string& case_id) const;
  std::vector<Case> query_cases(const Actor& actor, const CaseFilter& filter, Page page) const;
  Case transition_case(const Actor& actor, const std::string& case_id, CaseState target);

  // measurements
  MeasurementRecord attach_measurement(const Actor& actor, const std::string& case_id,
                                       const spectral::RawBundle& bundle, const InstrumentMetadata& instrument);
  MeasurementRecord get_measurement(const Actor& actor, const std::string& measurement_id) const;
  std::vector<MeasurementRecord> measurements_for_case(const Actor& actor, const std::string& case_id) const;
  /// The stored CSV text of one spectrum, exactly as ingested.
  std::string spectrum_text(const std::string& measurement_id, SpectrumRole role) const;

  // analyses
  AnalysisRecord record_analysis(const Actor& actor, const std::string& measurement_id,
                                 const inverse::AnalysisConfig& config, const inverse::FitResult& result);
  AnalysisRecord get_analysis(const Actor& actor, const std::string& analysis_id) const;
  /// Newest first.
  std::vector<AnalysisRecord> analyses_for_measurement(const Actor& actor, const std::string& measurement_id) const;

  std::vector<AuditEntry> audit_trail(const Actor& actor, const std::optional<std::string>& target_id,
                                      Page page) const;

  // analysis jobs
  SubmittedJob submit_job(const Actor& actor, const std::string& measurement_id,
                          const inverse::AnalysisConfig& config,
                          const std::optional<std::string>& idempotency_key);
  AnalysisJob get_job(const Actor& actor, const std::string& job_id) const;
  /// Moves the oldest Queued job whose measurement has no Running job to
  /// Running. The claim is a compare-and-set on the status column.
  std::optional<AnalysisJob> claim_job();
  /// Job Done + AnalysisRecord + audit entry in one transaction. Returns
  /// nothing if the job is no longer Running.
  std::optional<AnalysisRecord> complete_job(const std::string& job_id, const inverse::FitResult& result);
  void fail_job(const std::string& job_id, const std::string& error);
  /// Marks jobs left Running by a dead process as Failed. Returns how many.
  std::size_t recover_interrupted_jobs();

  // export and import
  void export_case(const Actor& actor, const std::string& case_id, const std::filesystem::path& dir) const;
  /// Imports one exported case directory, keeping its ids and timestamps.
  Case import_case(const Actor& actor, const std::filesystem::path& dir);

  /// Referential-integrity scan; returns one line per problem.
  std::vector<std::string> integrity_check() const;
  /// Every row of every table, in a fixed order.
  std::string dump() const;
  /// Runs raw SQL. Trigger rejections surface as ImmutableRecord.
  void execute_sql(std::string_view sql);

  void set_fault_hook(FaultHook hook);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// The engine version stamped on analysis records.
std::string engine_version();

void to_json(Json& j, const Case& c);
void to_json(Json& j, const CaseMetadata& m);
void from_json(const Json& j, CaseMetadata& m);
void to_json(Json& j, const InstrumentMetadata& m);
void from_json(const Json& j, InstrumentMetadata& m);
void to_json(Json& j, const MeasurementRecord& m);
void to_json(Json& j, const AnalysisRecord& a);
void to_json(Json& j, const AuditEntry& e);
void to_json(Json& j, const AnalysisJob& job);
void to_json(Json& j, const Session& s);

}  // namespace livorlab::eln

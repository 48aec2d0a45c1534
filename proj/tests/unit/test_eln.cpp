#include <doctest.h>

#include <random>
#include <set>
#include <thread>

#include "livorlab/eln.hpp"
#include "support.hpp"

using namespace livorlab;
using namespace livorlab::eln;
using testing::kAdmin;
using testing::kAnalyst;
using testing::kNobody;
using testing::kOperator;
using testing::kReviewer;
using testing::TempDir;

namespace {

constexpr CaseState kStates[] = {CaseState::Open, CaseState::Measured, CaseState::Analysed, CaseState::Reviewed,
                                 CaseState::Closed};

// The declared graph, written out by hand: row = from, column = to.
constexpr bool kLegal[5][5] = {
    /* Open     */ {false, true, false, false, true},
    /* Measured */ {false, false, true, false, true},
    /* Analysed */ {false, false, false, true, true},
    /* Reviewed */ {false, false, false, false, true},
    /* Closed   */ {false, false, false, false, false},
};

template <typename F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::Internal;
}

struct Fixture {
  TempDir dir;
  Store store{testing::fast_store(dir / "eln.db")};
  std::mt19937_64 rng{12345};

  std::string new_case(const std::string& site = "left scapula") {
    return store.create_case(kOperator, {"", site, std::nullopt, ""}).record.case_id;
  }

  MeasurementRecord measure(const std::string& case_id) {
    return store.attach_measurement(kOperator, case_id, testing::random_bundle(rng), {});
  }

  static inverse::AnalysisConfig analysis_config() {
    inverse::AnalysisConfig c;
    c.lut = "default";
    c.fit.initial_guess = testing::typical_skin();
    return c;
  }

  static inverse::FitResult fake_result(const MeasurementRecord& m, double cohb) {
    inverse::FitResult r;
    r.estimate = testing::typical_skin();
    r.estimate.concentrations.set(spectral::Chromophore::COHb, cohb);
    r.predicted = m.reflectance;
    r.converged = true;
    r.iterations = 3;
    return r;
  }

  void walk_to(const std::string& case_id, CaseState target) {
    for (auto s : kStates) {
      if (s == CaseState::Open) continue;
      if (store.get_case(kAdmin, case_id).state == target) return;
      store.transition_case(kAdmin, case_id, s);
    }
  }

  std::vector<AuditEntry> all_audit() {
    std::vector<AuditEntry> out;
    for (std::size_t p = 1;; ++p) {
      auto page = store.audit_trail(kAdmin, std::nullopt, {p, 1000});
      if (page.empty()) return out;
      out.insert(out.end(), page.begin(), page.end());
    }
  }
};

}  // namespace

TEST_SUITE("eln") {

TEST_CASE("transition graph helper matches the declared graph") {
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) CHECK(transition_allowed(kStates[i], kStates[j]) == kLegal[i][j]);
}

TEST_CASE("5x5 transition matrix against the store") {
  Fixture f;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const auto id = f.new_case();
      f.walk_to(id, kStates[i]);
      REQUIRE(f.store.get_case(kAdmin, id).state == kStates[i]);
      const auto before = f.store.dump();
      INFO(to_string(kStates[i]) << " -> " << to_string(kStates[j]));
      if (kLegal[i][j]) {
        CHECK(f.store.transition_case(kAdmin, id, kStates[j]).state == kStates[j]);
        CHECK(f.store.get_case(kAdmin, id).state == kStates[j]);
      } else {
        CHECK(error_of([&] { f.store.transition_case(kAdmin, id, kStates[j]); }) == Errc::IllegalTransition);
        CHECK(f.store.dump() == before);
      }
    }
  }
}

TEST_CASE("named transition examples") {
  Fixture f;
  const auto a = f.new_case();
  f.walk_to(a, CaseState::Analysed);
  CHECK(f.store.transition_case(kReviewer, a, CaseState::Reviewed).state == CaseState::Reviewed);

  const auto b = f.new_case();
  CHECK(error_of([&] { f.store.transition_case(kAdmin, b, CaseState::Analysed); }) == Errc::IllegalTransition);

  const auto c = f.new_case();
  f.walk_to(c, CaseState::Measured);
  CHECK(f.store.transition_case(kReviewer, c, CaseState::Closed).state == CaseState::Closed);
}

TEST_CASE("role requirements for transitions") {
  Fixture f;
  const auto id = f.new_case();
  f.walk_to(id, CaseState::Analysed);
  CHECK(error_of([&] { f.store.transition_case(kAnalyst, id, CaseState::Reviewed); }) == Errc::Unauthorized);
  CHECK(error_of([&] { f.store.transition_case(kOperator, id, CaseState::Closed); }) == Errc::Unauthorized);
  CHECK(f.store.get_case(kAdmin, id).state == CaseState::Analysed);
}

TEST_CASE("case creation") {
  Fixture f;
  const auto created = f.store.create_case(kOperator, {"", "thigh", std::nullopt, ""});
  CHECK(created.record.state == CaseState::Open);
  CHECK(created.warnings.empty());
  CHECK(created.record.case_id.rfind("C-", 0) == 0);
  CHECK(created.record.created_at.size() == 27);
  CHECK(created.record.created_at.back() == 'Z');

  f.store.create_case(kOperator, {"R-7", "thigh", 12.5, ""});
  const auto dup = f.store.create_case(kOperator, {"R-7", "back", std::nullopt, ""});
  CHECK(dup.warnings.size() == 1);

  CHECK(error_of([&] { f.store.create_case(kOperator, {"", "", std::nullopt, ""}); }) == Errc::ValidationFailed);
  CHECK(error_of([&] { f.store.create_case(kOperator, {"", "arm", -1.0, ""}); }) == Errc::ValidationFailed);
}

TEST_CASE("a caller without a role is refused and the refusal is audited") {
  Fixture f;
  const auto before = f.all_audit().size();
  CHECK(error_of([&] { f.store.create_case(kNobody, {"", "arm", std::nullopt, ""}); }) == Errc::Unauthorized);
  const auto trail = f.all_audit();
  REQUIRE(trail.size() == before + 1);
  CHECK(trail.back().action == AuditAction::Denied);
  CHECK(trail.back().actor == "ghost");
  CHECK(f.store.query_cases(kAdmin, {}, {}).empty());
}

TEST_CASE("create writes exactly one Create entry for the case") {
  Fixture f;
  const auto id = f.new_case();
  const auto entries = f.store.audit_trail(kReviewer, id, {});
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].action == AuditAction::Create);
  CHECK(entries[0].target_id == id);
  CHECK(entries[0].actor == "op");
}

TEST_CASE("audit trail is Reviewer-only") {
  Fixture f;
  f.new_case();
  CHECK(error_of([&] { f.store.audit_trail(kAnalyst, std::nullopt, {}); }) == Errc::Unauthorized);
  CHECK_FALSE(f.store.audit_trail(kReviewer, std::nullopt, {}).empty());
}

TEST_CASE("attaching a measurement") {
  Fixture f;
  const auto id = f.new_case();
  std::mt19937_64 rng(3);
  const auto text = testing::random_bundle_text(rng);
  const auto m = f.store.attach_measurement(kOperator, id, testing::parse_bundle(text), {});
  CHECK(f.store.get_case(kAdmin, id).state == CaseState::Measured);
  CHECK(f.store.spectrum_text(m.measurement_id, SpectrumRole::Sample) == text.sample);
  CHECK(f.store.spectrum_text(m.measurement_id, SpectrumRole::White) == text.white);
  CHECK(f.store.spectrum_text(m.measurement_id, SpectrumRole::Dark) == text.dark);
  const auto back = f.store.get_measurement(kOperator, m.measurement_id);
  CHECK(back.sample == m.sample);
  CHECK(back.reflectance == m.reflectance);
  CHECK(back.instrument.geometry == "45/45");
  CHECK(back.instrument.spot_diameter_mm == 5.0);

  // a second measurement leaves the state alone
  f.measure(id);
  CHECK(f.store.get_case(kAdmin, id).state == CaseState::Measured);
  CHECK(f.store.measurements_for_case(kOperator, id).size() == 2);
}

TEST_CASE("white identical to dark persists nothing") {
  Fixture f;
  const auto id = f.new_case();
  const auto before = f.store.dump();
  auto text = testing::random_bundle_text(f.rng, 30);
  text.white = text.dark;
  CHECK(error_of([&] { f.store.attach_measurement(kOperator, id, testing::parse_bundle(text), {}); }) ==
        Errc::DegenerateReference);
  CHECK(f.store.dump() == before);
}

TEST_CASE("closed cases take no measurements") {
  Fixture f;
  const auto id = f.new_case();
  f.store.transition_case(kAdmin, id, CaseState::Closed);
  CHECK(error_of([&] { f.measure(id); }) == Errc::CaseClosed);
  CHECK(error_of([&] { f.measure("C-0000000000000000"); }) == Errc::CaseNotFound);
}

TEST_CASE("fault at any write point leaves the store untouched") {
  const char* points[] = {"measurement", "spectrum:sample", "spectrum:white", "spectrum:dark",
                          "spectrum:reflectance", "case", "audit"};
  for (const char* point : points) {
    Fixture f;
    const auto id = f.new_case();
    const auto before = f.store.dump();
    std::vector<std::string> seen;
    f.store.set_fault_hook([&](std::string_view p) {
      seen.emplace_back(p);
      if (p == point) throw std::runtime_error(std::string("injected at ") + point);
    });
    INFO("fault point " << point);
    CHECK_THROWS_WITH(f.measure(id), doctest::Contains("injected"));
    CHECK(seen.back() == point);
    CHECK(f.store.dump() == before);
    CHECK(f.store.integrity_check().empty());
    f.store.set_fault_hook({});
    f.measure(id);  // store still usable
    CHECK(f.store.get_case(kAdmin, id).state == CaseState::Measured);
  }
}

TEST_CASE("immutable tables reject UPDATE and DELETE") {
  Fixture f;
  const auto id = f.new_case();
  const auto m = f.measure(id);
  f.store.record_analysis(kAnalyst, m.measurement_id, Fixture::analysis_config(), Fixture::fake_result(m, 0.01));
  const auto before = f.store.dump();
  const char* attempts[] = {
      "UPDATE measurements SET operator_id = 'mallory'",
      "DELETE FROM measurements",
      "UPDATE spectra SET text = 'wavelength_nm,value\n1,1\n'",
      "DELETE FROM spectra",
      "UPDATE analyses SET created_by = 'mallory'",
      "DELETE FROM analyses",
      "UPDATE audit SET detail = 'nothing happened'",
      "DELETE FROM audit",
  };
  for (const char* sql : attempts) {
    INFO(sql);
    CHECK(error_of([&] { f.store.execute_sql(sql); }) == Errc::ImmutableRecord);
    CHECK(f.store.dump() == before);
  }
}

TEST_CASE("analyses supersede, never edit") {
  Fixture f;
  const auto id = f.new_case();
  const auto m = f.measure(id);
  const auto a1 =
      f.store.record_analysis(kAnalyst, m.measurement_id, Fixture::analysis_config(), Fixture::fake_result(m, 0.01));
  CHECK(f.store.get_case(kAdmin, id).state == CaseState::Analysed);
  const auto a2 =
      f.store.record_analysis(kAnalyst, m.measurement_id, Fixture::analysis_config(), Fixture::fake_result(m, 0.02));
  CHECK(f.store.get_case(kAdmin, id).state == CaseState::Analysed);
  const auto list = f.store.analyses_for_measurement(kOperator, m.measurement_id);
  REQUIRE(list.size() == 2);
  CHECK(list[0].analysis_id == a2.analysis_id);
  CHECK(list[1].analysis_id == a1.analysis_id);
  CHECK(list[0].created_at > list[1].created_at);
  CHECK(f.store.get_analysis(kOperator, a1.analysis_id).result.estimate.concentrations.get(
            spectral::Chromophore::COHb) == 0.01);
  CHECK(f.store.get_analysis(kOperator, a1.analysis_id).engine_version == engine_version());
  CHECK(error_of([&] {
          f.store.record_analysis(kOperator, m.measurement_id, Fixture::analysis_config(),
                                  Fixture::fake_result(m, 0.01));
        }) == Errc::Unauthorized);
}

TEST_CASE("query: empty, state filter, paging") {
  Fixture f;
  CHECK(f.store.query_cases(kOperator, {}, {}).empty());

  std::vector<std::string> ids;
  for (int i = 0; i < 5; ++i) ids.push_back(f.new_case(i % 2 ? "arm" : "back"));
  f.measure(ids[2]);

  CaseFilter measured;
  measured.state = CaseState::Measured;
  const auto only = f.store.query_cases(kOperator, measured, {});
  REQUIRE(only.size() == 1);
  CHECK(only[0].case_id == ids[2]);

  std::vector<std::size_t> sizes;
  std::set<std::string> seen;
  std::vector<std::string> order;
  for (std::size_t p = 1; p <= 4; ++p) {
    const auto page = f.store.query_cases(kOperator, {}, {p, 2});
    sizes.push_back(page.size());
    for (const auto& c : page) {
      seen.insert(c.case_id);
      order.push_back(c.case_id);
    }
  }
  CHECK(sizes == std::vector<std::size_t>{2, 2, 1, 0});
  CHECK(seen.size() == 5);
  // newest first
  CHECK(order == std::vector<std::string>(ids.rbegin(), ids.rend()));

  CaseFilter site;
  site.body_site = "arm";
  CHECK(f.store.query_cases(kOperator, site, {}).size() == 2);
  CaseFilter text;
  text.text = "bac";
  CHECK(f.store.query_cases(kOperator, text, {}).size() == 3);
  CaseFilter range;
  range.created_from = f.store.get_case(kAdmin, ids[1]).created_at;
  range.created_to = f.store.get_case(kAdmin, ids[3]).created_at;
  CHECK(f.store.query_cases(kOperator, range, {}).size() == 3);
  CHECK(error_of([&] { f.store.query_cases(kNobody, {}, {}); }) == Errc::Unauthorized);
}

TEST_CASE("timestamps are strictly increasing across mutations") {
  Fixture f;
  std::string last;
  for (int i = 0; i < 50; ++i) {
    const auto id = f.new_case();
    const auto at = f.store.get_case(kAdmin, id).created_at;
    CHECK(at > last);
    last = at;
  }
}

TEST_CASE("login, sessions and bad credentials") {
  Fixture f;
  f.store.add_user(kAdmin, "alice", "Alice", Role::Analyst, "correct horse");
  CHECK(f.store.user_count() == 1);
  const auto user = f.store.find_user("alice");
  REQUIRE(user);
  CHECK(user->credential_hash.rfind("$argon2id$", 0) == 0);

  const auto session = f.store.login("alice", "correct horse");
  CHECK(session.token.size() == 64);
  const auto actor = f.store.resolve_session(session.token);
  CHECK(actor.user_id == "alice");
  CHECK(actor.role == Role::Analyst);

  CHECK(error_of([&] { f.store.login("alice", "wrong"); }) == Errc::Unauthorized);
  CHECK(error_of([&] { f.store.login("bob", "x"); }) == Errc::Unauthorized);
  CHECK(error_of([&] { f.store.resolve_session("deadbeef"); }) == Errc::Unauthorized);
  CHECK(error_of([&] { f.store.add_user(kReviewer, "eve", "Eve", Role::Admin, "pw"); }) == Errc::Unauthorized);

  const auto trail = f.all_audit();
  std::size_t denied = 0;
  for (const auto& e : trail) denied += e.action == AuditAction::Denied;
  CHECK(denied == 3);
}

TEST_CASE("expired sessions are rejected") {
  TempDir dir;
  auto opts = testing::fast_store(dir / "eln.db");
  opts.session_ttl_seconds = 1;
  Store store(opts);
  store.add_user(kAdmin, "alice", "Alice", Role::Operator, "pw");
  const auto s = store.login("alice", "pw");
  CHECK(store.resolve_session(s.token).user_id == "alice");
  std::this_thread::sleep_for(std::chrono::milliseconds(1100));
  CHECK(error_of([&] { store.resolve_session(s.token); }) == Errc::Unauthorized);
}

TEST_CASE("job lifecycle, idempotency and at-most-once completion") {
  Fixture f;
  const auto m = f.measure(f.new_case());
  const auto cfg = Fixture::analysis_config();
  const auto first = f.store.submit_job(kAnalyst, m.measurement_id, cfg, std::string("key-1"));
  CHECK(first.created);
  CHECK(first.job.status == JobStatus::Queued);
  const auto audit_before = f.all_audit().size();
  const auto again = f.store.submit_job(kAnalyst, m.measurement_id, cfg, std::string("key-1"));
  CHECK_FALSE(again.created);
  CHECK(again.job.job_id == first.job.job_id);
  CHECK(f.all_audit().size() == audit_before);

  const auto second = f.store.submit_job(kAnalyst, m.measurement_id, cfg, std::nullopt);
  auto claimed = f.store.claim_job();
  REQUIRE(claimed);
  CHECK(claimed->job_id == first.job.job_id);
  CHECK(claimed->status == JobStatus::Running);
  // one Running job per measurement: the second waits
  CHECK_FALSE(f.store.claim_job());

  const auto rec = f.store.complete_job(first.job.job_id, Fixture::fake_result(m, 0.01));
  REQUIRE(rec);
  CHECK(rec->job_id == first.job.job_id);
  CHECK_FALSE(f.store.complete_job(first.job.job_id, Fixture::fake_result(m, 0.01)));
  const auto done = f.store.get_job(kOperator, first.job.job_id);
  CHECK(done.status == JobStatus::Done);
  CHECK(done.result_ref == rec->analysis_id);
  CHECK(f.store.analyses_for_measurement(kOperator, m.measurement_id).size() == 1);

  claimed = f.store.claim_job();
  REQUIRE(claimed);
  CHECK(claimed->job_id == second.job.job_id);
  f.store.fail_job(second.job.job_id, "LUT 'x' not found");
  const auto failed = f.store.get_job(kOperator, second.job.job_id);
  CHECK(failed.status == JobStatus::Failed);
  CHECK(failed.error == std::string("LUT 'x' not found"));

  CHECK(error_of([&] { f.store.get_job(kOperator, "J-0000000000000000"); }) == Errc::JobNotFound);
  CHECK(error_of([&] { f.store.submit_job(kAnalyst, "M-0000000000000000", cfg, std::nullopt); }) ==
        Errc::MeasurementNotFound);
  CHECK(error_of([&] { f.store.submit_job(kOperator, m.measurement_id, cfg, std::nullopt); }) == Errc::Unauthorized);
}

TEST_CASE("job status moves only forward") {
  Fixture f;
  const auto m = f.measure(f.new_case());
  const auto job = f.store.submit_job(kAnalyst, m.measurement_id, Fixture::analysis_config(), std::nullopt).job;
  CHECK(error_of([&] { f.store.execute_sql("UPDATE jobs SET status = 'Done' WHERE job_id = '" + job.job_id + "'"); }) ==
        Errc::ImmutableRecord);
  f.store.claim_job();
  f.store.complete_job(job.job_id, Fixture::fake_result(m, 0.0));
  CHECK(error_of([&] {
          f.store.execute_sql("UPDATE jobs SET status = 'Queued' WHERE job_id = '" + job.job_id + "'");
        }) == Errc::ImmutableRecord);
}

TEST_CASE("fault while completing a job leaves it Running with no record") {
  for (const char* point : {"job:record", "job:commit"}) {
    Fixture f;
    const auto m = f.measure(f.new_case());
    const auto job = f.store.submit_job(kAnalyst, m.measurement_id, Fixture::analysis_config(), std::nullopt).job;
    f.store.claim_job();
    const auto before = f.store.dump();
    f.store.set_fault_hook([&](std::string_view p) {
      if (p == point) throw std::runtime_error("crash");
    });
    CHECK_THROWS(f.store.complete_job(job.job_id, Fixture::fake_result(m, 0.0)));
    CHECK(f.store.dump() == before);
    f.store.set_fault_hook({});
    CHECK(f.store.recover_interrupted_jobs() == 1);
    CHECK(f.store.get_job(kOperator, job.job_id).status == JobStatus::Failed);
    CHECK(f.store.analyses_for_measurement(kOperator, m.measurement_id).empty());
  }
}

TEST_CASE("export and import round trip") {
  Fixture f;
  const auto id = f.new_case();
  std::vector<testing::BundleText> texts;
  std::vector<std::string> mids;
  for (int i = 0; i < 3; ++i) {
    texts.push_back(testing::random_bundle_text(f.rng));
    mids.push_back(f.store.attach_measurement(kOperator, id, testing::parse_bundle(texts.back()), {}).measurement_id);
  }
  const auto m0 = f.store.get_measurement(kOperator, mids[0]);
  f.store.record_analysis(kAnalyst, mids[0], Fixture::analysis_config(), Fixture::fake_result(m0, 0.01));

  const auto out = f.dir / "export";
  f.store.export_case(kOperator, id, out);
  CHECK(std::filesystem::exists(out / "case.meta"));
  for (std::size_t i = 0; i < mids.size(); ++i) {
    const auto mdir = out / ("measurement-" + mids[i]);
    CHECK(testing::read_file(mdir / "sample.csv") == texts[i].sample);
    CHECK(testing::read_file(mdir / "white.csv") == texts[i].white);
    CHECK(testing::read_file(mdir / "dark.csv") == texts[i].dark);
    CHECK(testing::read_file(mdir / "reflectance.csv") ==
          f.store.spectrum_text(mids[i], SpectrumRole::Reflectance));
  }

  TempDir other;
  Store second(testing::fast_store(other / "eln.db"));
  const auto imported = second.import_case(kAdmin, out);
  CHECK(imported.case_id == id);
  CHECK(imported.state == CaseState::Analysed);
  const auto out2 = other / "export";
  second.export_case(kAdmin, id, out2);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), out);
    CHECK(testing::read_file(out2 / rel) == testing::read_file(entry.path()));
  }
  CHECK(error_of([&] { second.import_case(kAdmin, out); }) == Errc::ValidationFailed);
  CHECK(error_of([&] { second.import_case(kReviewer, out); }) == Errc::Unauthorized);
}

TEST_CASE("import refuses a reflectance that does not match its raw spectra") {
  Fixture f;
  const auto id = f.new_case();
  const auto m = f.measure(id);
  const auto out = f.dir / "export";
  f.store.export_case(kOperator, id, out);
  const auto refl = out / ("measurement-" + m.measurement_id) / "reflectance.csv";
  auto text = testing::read_file(refl);
  text.insert(text.size() - 2, "1");
  testing::write_file(refl, text);
  TempDir other;
  Store second(testing::fast_store(other / "eln.db"));
  CHECK(error_of([&] { second.import_case(kAdmin, out); }) == Errc::ValidationFailed);
  CHECK(second.query_cases(kAdmin, {}, {}).empty());
}

TEST_CASE("referential integrity scan is clean after normal use") {
  Fixture f;
  for (int i = 0; i < 3; ++i) {
    const auto m = f.measure(f.new_case());
    f.store.record_analysis(kAnalyst, m.measurement_id, Fixture::analysis_config(), Fixture::fake_result(m, 0.0));
  }
  CHECK(f.store.integrity_check().empty());
}

TEST_CASE("a second process handle sees the same store") {
  Fixture f;
  const auto id = f.new_case();
  Store other(testing::fast_store(f.dir / "eln.db"));
  CHECK(other.get_case(kAdmin, id).case_id == id);
  other.transition_case(kAdmin, id, CaseState::Closed);
  CHECK(f.store.get_case(kAdmin, id).state == CaseState::Closed);
}

TEST_CASE("concurrent writers keep the audit sequence gap-free") {
  Fixture f;
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 25; ++i) f.new_case();
    });
  }
  for (auto& t : threads) t.join();
  const auto trail = f.all_audit();
  REQUIRE(trail.size() == 100);
  for (std::size_t i = 0; i < trail.size(); ++i) CHECK(trail[i].sequence_number == static_cast<std::int64_t>(i + 1));
}

}  // TEST_SUITE

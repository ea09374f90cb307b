// SPDX-License-Identifier: Apache-2.0
// Acceptance gate. Each criterion prints one PASS/FAIL line with the measured
// numbers; the exit status is non-zero when any criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "lm/app/workspace.hpp"
#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"
#include "lm/core/random.hpp"
#include "lm/features/standard_set.hpp"
#include "lm/inference/service.hpp"
#include "lm/ingest/cohort.hpp"
#include "lm/monitoring/monitor.hpp"
#include "lm/training/metrics.hpp"
#include "lm/training/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lm;

constexpr const char* kTask = "unplanned_admission_90d";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

fs::path scratch(const std::string& name) {
  static const fs::path base = [] {
    auto p = fs::temp_directory_path() / ("lm-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return base / name;
}

std::pair<int, std::string> capture(const std::string& cmd) {
  std::string out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return {-1, out};
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) out += buf.data();
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::vector<features::FeatureDefinition> standard_defs() { return features::standard_feature_set(); }

// An empty store with the standard catalog: every lookup computes.
void register_standard(features::FeatureRepository& repo) {
  for (const auto& d : standard_defs()) repo.register_feature(d);
}

// The shared world: 2,000 synthetic patients at injection rate 0.3, the
// standard feature set, and one trained Production model with its profile.
struct World {
  ingest::GeneratorConfig gen;
  ingest::TimelineIndex timelines;
  features::FeatureRepository features;
  model::ModelRegistry registry;
  Cohort cohort;
  fs::path profiles = scratch("profiles");
  training::PipelineResult trained;

  World() {
    gen.n_patients = 2000;
    gen.target_injection_rate = 0.3;
    timelines = ingest::TimelineIndex(ingest::generate_synthetic(gen));
    register_standard(features);
    TargetSpec target{EventType::admission, {ingest::kUnplannedAdmissionCode}, 90};
    cohort = ingest::build_cohort(timelines.all(), target, ingest::FixedDate{index_date()}, "demo");
    trained = training::run_pipeline(env(registry, profiles), config());
    registry.transition_stage(trained.spec.model_id, trained.spec.version, model::Stage::Staging, "acceptance");
    trained.spec =
        registry.transition_stage(trained.spec.model_id, trained.spec.version, model::Stage::Production, "acceptance");
  }

  Date index_date() const { return ingest::planted_reference_date(gen); }

  training::PipelineEnv env(model::ModelRegistry& reg, std::optional<fs::path> profiles_dir = std::nullopt) {
    return training::PipelineEnv{features, reg, timelines, [this](const std::string&) { return cohort; },
                                 std::move(profiles_dir)};
  }

  training::TrainConfig config() const {
    training::TrainConfig cfg;
    cfg.task_id = kTask;
    cfg.cohort_id = "demo";
    for (const auto& n : features::standard_numeric_feature_names()) cfg.feature_refs.push_back({n, 0});
    return cfg;
  }

  const std::vector<features::FeatureRef>& refs() const { return trained.spec.feature_refs; }
};

World& world() {
  static World w;
  return w;
}

inference::PredictionRequest request(const std::string& patient, Date as_of,
                                     features::FeaturePolicy policy = features::FeaturePolicy::compute_on_miss) {
  return inference::PredictionRequest{kTask, patient, as_of, policy, ""};
}

// --- 1 ----------------------------------------------------------------------

fs::path demo_root() { return scratch("demo"); }

Outcome demo_lifecycle() {
  const auto root = demo_root();
  const auto log = scratch("demo.log");
  const std::string cmd = std::string("LM_BIN='") + LM_CLI_PATH + "' '" + LM_DEMO_SCRIPT + "' '" + root.string() +
                          "' > '" + log.string() + "' 2>&1";
  const auto t0 = std::chrono::steady_clock::now();
  const int status = std::system(cmd.c_str());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const int rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (rc != 0) return {false, "demo exited " + std::to_string(rc) + ", see " + log.string()};

  const app::Workspace ws(root);
  const auto timelines = ws.load_timelines();
  std::size_t events = 0;
  for (const auto& t : timelines.all()) events += t.events.size();
  const features::FeatureRepository repo(root);
  const inference::PredictionLog predictions(ws.predictions_log());
  const inference::FeedbackLog feedback(ws.feedback_log());
  const bool ok = secs < 300 && timelines.all().size() == 2000 && events >= 20000 && repo.catalog().size() >= 40 &&
                  predictions.size() == 1000 && feedback.latest_all().size() == 200;
  return {ok, "exit 0 in " + num(secs, 1) + " s; " + std::to_string(timelines.all().size()) + " patients, " +
                  std::to_string(events) + " events, " + std::to_string(repo.catalog().size()) + " features, " +
                  std::to_string(predictions.size()) + " predictions, " + std::to_string(feedback.latest_all().size()) +
                  " feedbacks"};
}

// --- 2 ----------------------------------------------------------------------

Outcome reproducibility() {
  const std::string cmd = std::string("'") + LM_CLI_PATH + "' --json --data-root '" + demo_root().string() +
                          "' train run --task " + kTask + " --cohort demo --model-id repro-check 2>&1";
  std::vector<Json> runs;
  for (int i = 0; i < 2; ++i) {
    const auto [rc, out] = capture(cmd);
    if (rc != 0) return {false, "train run exited " + std::to_string(rc) + ": " + out};
    std::istringstream lines(out);
    std::string line, last;
    while (std::getline(lines, line))
      if (line.rfind("{\"", 0) == 0) last = line;
    runs.push_back(Json::parse(last));
  }
  const auto& a = runs[0];
  const auto& b = runs[1];
  // Metrics go through the canonical encoder so "full precision" means every bit of every double.
  const bool same_artifact = a["artifact_digest"] == b["artifact_digest"];
  const bool same_metrics = canonical_encode_json(a["metrics"]) == canonical_encode_json(b["metrics"]);
  const bool same_prov = a["provenance_ref"] == b["provenance_ref"];
  const bool distinct_runs = a["run_id"] != b["run_id"];
  return {same_artifact && same_metrics && same_prov && distinct_runs,
          "artifact " + std::string(same_artifact ? "equal" : "DIFFERS") + ", metrics " +
              (same_metrics ? "bit-equal" : "DIFFER") + ", provenance " + (same_prov ? "equal" : "DIFFERS") +
              " (" + a["provenance_ref"].get<std::string>().substr(0, 12) + "), runs " +
              a["run_id"].get<std::string>() + "/" + b["run_id"].get<std::string>()};
}

// --- 3 ----------------------------------------------------------------------

Outcome skew() {
  auto& w = world();
  Rng rng(303);
  std::vector<CohortRow> pairs;
  for (int i = 0; i < 200; ++i) {
    const auto& row = w.cohort.rows[rng.below(w.cohort.rows.size())];
    pairs.push_back({row.patient_id, w.index_date().plus_days(-static_cast<int>(rng.between(0, 730))), 0});
  }
  // The pipeline's features stage: materialize the cells, then read them back.
  std::vector<features::Cell> cells;
  for (const auto& p : pairs) cells.push_back({p.patient_id, p.index_date});
  const auto report = w.features.materialize(w.timelines, w.refs(), cells);
  if (!report.failures.empty()) return {false, "materialization failed: " + report.failures.front().message};
  const auto rows = training::training_rows(w.features, w.timelines, w.refs(), pairs);

  features::FeatureRepository cold;
  register_standard(cold);
  inference::PredictionLog log;
  inference::FeedbackLog fb;
  inference::InferenceService svc(cold, w.registry, w.timelines, log, fb);
  int mismatches = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto served = cold.get_vector_asof(w.timelines, pairs[i].patient_id, w.refs(), pairs[i].index_date,
                                             features::FeaturePolicy::compute_on_miss);
    const auto rec = svc.predict(request(pairs[i].patient_id, pairs[i].index_date));
    if (rows[i].vector_digest != served.vector.vector_digest || rows[i].entries != served.vector.entries ||
        rec.vector_digest != rows[i].vector_digest || rows[i].compute_digest() != rows[i].vector_digest)
      ++mismatches;
  }
  return {mismatches == 0, std::to_string(pairs.size()) + " pairs, " + std::to_string(mismatches) + " digest mismatches"};
}

// --- 4 ----------------------------------------------------------------------

// Serves one patient from a replacement timeline and everyone else from the base.
class Overlay : public ingest::TimelineSource {
 public:
  explicit Overlay(const ingest::TimelineSource& base) : base_(base) {}
  void replace(std::shared_ptr<const PatientTimeline> t) { replaced_ = std::move(t); }
  std::shared_ptr<const PatientTimeline> fetch(std::string_view patient_id) const override {
    if (replaced_ && replaced_->patient_id == patient_id) return replaced_;
    return base_.fetch(patient_id);
  }

 private:
  const ingest::TimelineSource& base_;
  std::shared_ptr<const PatientTimeline> replaced_;
};

Outcome point_in_time() {
  auto& w = world();
  const auto& refs = w.refs();
  const Date index = w.index_date();
  std::map<std::string, Digest> stored_before;
  for (const auto& row : w.cohort.rows)
    stored_before[row.patient_id] =
        w.features.get_vector_asof(w.timelines, row.patient_id, refs, index, features::FeaturePolicy::precomputed_only)
            .vector.vector_digest;

  features::FeatureRepository cold;
  register_standard(cold);
  Overlay overlay(w.timelines);
  inference::PredictionLog base_log, ext_log;
  inference::FeedbackLog base_fb, ext_fb;
  inference::InferenceService base_svc(w.features, w.registry, w.timelines, base_log, base_fb);
  inference::InferenceService ext_svc(w.features, w.registry, overlay, ext_log, ext_fb);
  const std::vector<std::string> codes{ingest::kRiskFactorCode, ingest::kUnplannedAdmissionCode, "DX-01", "RX-03"};

  Rng rng(404);
  constexpr int kTrials = 10000;
  int violations = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const auto& row = w.cohort.rows[rng.below(w.cohort.rows.size())];
    // A third of the trials sit on the materialized date, the rest earlier.
    const Date as_of = rng.below(3) == 0 ? index : index.plus_days(-static_cast<int>(rng.between(1, 365)));
    auto extended = std::make_shared<PatientTimeline>(*w.timelines.fetch(row.patient_id));
    const auto extra = rng.between(1, 6);
    for (std::int64_t k = 0; k < extra; ++k)
      extended->events.push_back({row.patient_id, as_of.plus_days(static_cast<int>(rng.between(1, 400))),
                                  static_cast<EventType>(rng.below(4)), codes[rng.below(codes.size())],
                                  rng.uniform01() * 5000.0, "late-arrival"});
    extended->sort_events();
    overlay.replace(extended);

    const auto before =
        w.features.get_vector_asof(w.timelines, row.patient_id, refs, as_of, features::FeaturePolicy::compute_on_miss);
    const auto recomputed =
        cold.get_vector_asof(overlay, row.patient_id, refs, as_of, features::FeaturePolicy::compute_on_miss);
    const auto p_base = base_svc.predict(request(row.patient_id, as_of));
    const auto p_ext = ext_svc.predict(request(row.patient_id, as_of));
    if (before.vector.vector_digest != recomputed.vector.vector_digest || p_base.vector_digest != p_ext.vector_digest ||
        p_base.probability != p_ext.probability || p_base.decision != p_ext.decision)
      ++violations;
  }
  int changed_stored = 0;
  for (const auto& [patient, d] : stored_before)
    changed_stored += w.features.get_vector_asof(w.timelines, patient, refs, index, features::FeaturePolicy::precomputed_only)
                          .vector.vector_digest != d;
  return {violations == 0 && changed_stored == 0,
          std::to_string(kTrials) + " trials, " + std::to_string(violations) + " violations; " +
              std::to_string(changed_stored) + "/" + std::to_string(stored_before.size()) + " stored vectors changed"};
}

// --- 5 ----------------------------------------------------------------------

double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  long long twice = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        ++pairs;
        twice += s[i] > s[j] ? 2 : s[i] == s[j] ? 1 : 0;
      }
  return static_cast<double>(twice) / static_cast<double>(2 * pairs);
}

Outcome metric_oracles() {
  Rng rng(505);
  int auc_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = rng.bernoulli(0.5);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(rng.below(4)) : rng.uniform01();
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    auc_mismatch += training::auc(s, y) != auc_pairs(s, y);
  }

  double worst_grad = 0;
  for (int point = 0; point < 50; ++point) {
    const std::size_t d = 1 + rng.below(12), n = 5 + rng.below(60);
    training::Matrix X(n, std::vector<double>(d));
    std::vector<int> y(n);
    for (auto& row : X)
      for (auto& v : row) v = rng.normal();
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    training::LinearModel m{rng.normal(), std::vector<double>(d)};
    for (auto& c : m.coefficients) c = rng.normal();
    const double l2 = rng.uniform01() * 0.1;
    const auto g = training::logistic_gradient(m, X, y, l2);
    const double h = 1e-5;
    double diff = 0, norm = 0;
    for (std::size_t j = 0; j <= d; ++j) {
      auto plus = m, minus = m;
      (j < d ? plus.coefficients[j] : plus.intercept) += h;
      (j < d ? minus.coefficients[j] : minus.intercept) -= h;
      const double fd = (training::logistic_loss(plus, X, y, l2) - training::logistic_loss(minus, X, y, l2)) / (2 * h);
      const double analytic = j < d ? g.w[j] : g.b;
      diff += (analytic - fd) * (analytic - fd);
      norm += std::max(analytic * analytic, fd * fd);
    }
    worst_grad = std::max(worst_grad, std::sqrt(diff / norm));
  }

  // (0.9-0.5)ln(0.9/0.5) + (0.1-0.5)ln(0.1/0.5)
  const double psi_oracle = 0.4 * std::log(1.8) + 0.4 * std::log(5.0);
  const double psi_value = monitoring::psi({0.5, 0.5}, {0.9, 0.1});
  const bool ok = auc_mismatch == 0 && worst_grad < 1e-5 && std::abs(psi_value - 0.8789) <= 1e-4 &&
                  std::abs(psi_value - psi_oracle) <= 1e-12;
  return {ok, "auc mismatches " + std::to_string(auc_mismatch) + "/100, worst gradient rel. error " +
                  num(worst_grad * 1e9, 3) + "e-9, psi " + num(psi_value, 6) + " (oracle " + num(psi_oracle, 6) + ")"};
}

// --- 6 ----------------------------------------------------------------------

Outcome planted_signal() {
  auto& w = world();
  std::string planted;
  for (const auto& d : w.features.catalog().search(""))
    if (d.generator_id == "code_indicator" && d.params.value("code", "") == ingest::kRiskFactorCode) planted = d.name;
  const auto& r = w.trained;
  const bool ok = r.report.auc_test > 0.7 && !r.importance.empty() && r.importance.front().name == planted;
  return {ok, "auc_test " + num(r.report.auc_test) + ", top feature " +
                  (r.importance.empty() ? "-" : r.importance.front().name) + " (planted: " + planted + ")"};
}

// --- 7 ----------------------------------------------------------------------

Outcome drift_detection() {
  auto& w = world();
  const auto& spec = w.trained.spec;
  const auto lineage = w.registry.get_lineage(spec.provenance_ref);
  const auto train_rows = lineage.train_cohort.at("rows").get<std::vector<CohortRow>>();
  const auto vectors = training::training_rows(w.features, w.timelines, w.refs(), train_rows);

  // Shift the feature with the richest training distribution by 3σ.
  std::size_t target = 0, best_distinct = 0;
  for (std::size_t j = 0; j < w.refs().size(); ++j) {
    std::set<double> distinct;
    for (const auto& v : vectors) distinct.insert(std::get<double>(v.entries[j].value));
    if (distinct.size() > best_distinct) {
      best_distinct = distinct.size();
      target = j;
    }
  }
  double mean = 0, sq = 0;
  for (const auto& v : vectors) mean += std::get<double>(v.entries[target].value);
  mean /= static_cast<double>(vectors.size());
  for (const auto& v : vectors) sq += std::pow(std::get<double>(v.entries[target].value) - mean, 2);
  const double sigma = std::sqrt(sq / static_cast<double>(vectors.size()));
  const std::string name = w.refs()[target].name;

  auto critical = [](const monitoring::EvaluationReport& report, const std::string& metric) {
    for (const auto& a : report.new_alerts)
      if (a.severity == monitoring::Severity::critical &&
          (a.kind == monitoring::AlertKind::feature_drift || a.kind == monitoring::AlertKind::prediction_drift) &&
          (metric.empty() || a.metric_name == metric))
        return true;
    return false;
  };

  int false_critical = 0, detected = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    inference::PredictionLog null_log;
    inference::FeedbackLog fb;
    inference::InferenceService svc(w.features, w.registry, w.timelines, null_log, fb);
    for (int i = 0; i < 500; ++i) {
      const auto& row = train_rows[rng.below(train_rows.size())];
      svc.predict(request(row.patient_id, row.index_date, features::FeaturePolicy::precomputed_only));
    }
    monitoring::AlertLog null_alerts;
    false_critical += critical(monitoring::Monitor(w.registry, null_log, fb, null_alerts, w.profiles).evaluate_and_notify(), "");

    inference::PredictionLog shifted_log;
    for (auto rec : null_log.all()) {
      rec.features[target].value = std::get<double>(rec.features[target].value) + 3 * sigma;
      shifted_log.append(rec);
    }
    monitoring::AlertLog shifted_alerts;
    detected += critical(
        monitoring::Monitor(w.registry, shifted_log, fb, shifted_alerts, w.profiles).evaluate_and_notify(), name);
  }
  return {false_critical <= 1 && detected >= 19,
          "shifted " + name + " by 3 sigma (" + num(sigma, 2) + "): detected " + std::to_string(detected) +
              "/20, false critical " + std::to_string(false_critical) + "/20"};
}

// --- 8 ----------------------------------------------------------------------

Outcome stage_machine() {
  using model::Stage;
  const std::set<std::pair<Stage, Stage>> allowed{{Stage::None, Stage::Staging},
                                                  {Stage::Staging, Stage::Production},
                                                  {Stage::Production, Stage::Archived},
                                                  {Stage::Staging, Stage::Archived}};
  model::ModelRegistry reg;
  // Two tasks with two models each, so Production is counted per (task, model).
  const std::vector<std::pair<std::string, std::string>> models{{"t1", "a"}, {"t1", "b"}, {"t2", "c"}, {"t2", "d"}};
  std::map<std::pair<std::string, int>, Stage> oracle;
  std::map<std::string, std::string> task_of;
  int registered = 0;
  auto add_version = [&](const std::string& task, const std::string& id) {
    model::ModelSpec draft;
    draft.task_id = task;
    draft.model_id = id;
    draft.feature_refs = {{"f1", 1}};
    model::ModelArtifact art;
    art.coefficients = {static_cast<double>(++registered)};
    model::ProvenanceRecord prov;
    prov.train_cohort_digest = digest("train");
    prov.test_cohort_digest = digest("test");
    prov.algorithm = "logreg_sgd";
    prov.metrics = {{"auc_test", 0.7}};
    prov.code_revision = "r" + std::to_string(registered);
    const auto spec = reg.register_model(draft, art, prov);
    oracle[{id, spec.version}] = Stage::None;
    task_of[id] = task;
  };
  for (const auto& [task, id] : models)
    for (int v = 0; v < 3; ++v) add_version(task, id);

  const std::vector<Stage> stages{Stage::None, Stage::Staging, Stage::Production, Stage::Archived};
  Rng rng(808);
  constexpr int kSteps = 10000;
  int accepted = 0, violations = 0;
  for (int step = 0; step < kSteps; ++step) {
    if (rng.below(10) == 0) {
      const auto& [task, id] = models[rng.below(models.size())];
      add_version(task, id);
    }
    auto it = std::next(oracle.begin(), static_cast<long>(rng.below(oracle.size())));
    const Stage from = it->second;
    Stage to = stages[rng.below(stages.size())];
    if (rng.bernoulli(0.5)) {
      std::vector<Stage> legal;
      for (const auto& [f, t] : allowed)
        if (f == from) legal.push_back(t);
      if (!legal.empty()) to = legal[rng.below(legal.size())];
    }
    const auto audit_before = reg.audit_log().size();
    bool took = false;
    try {
      reg.transition_stage(it->first.first, it->first.second, to, "fuzz");
      took = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::transition) ++violations;
    }
    const bool legal = allowed.count({from, to}) > 0;
    if (took != legal) ++violations;
    if (took) {
      ++accepted;
      if (to == Stage::Production)
        for (auto& [key, stage] : oracle)
          if (key.first == it->first.first && stage == Stage::Production) stage = Stage::Archived;
      it->second = to;
    } else if (reg.audit_log().size() != audit_before) {
      ++violations;
    }
    std::map<std::pair<std::string, std::string>, int> production;
    for (const auto& spec : reg.list_models()) {
      if (spec.stage != oracle.at({spec.model_id, spec.version})) ++violations;
      if (spec.stage == Stage::Production) ++production[{spec.task_id, spec.model_id}];
    }
    for (const auto& [_, n] : production) violations += n > 1;
  }
  // Every audited transition must itself be in the allowed set.
  for (const auto& e : reg.audit_log()) violations += allowed.count({e.from, e.to}) == 0;
  return {violations == 0 && accepted >= 1000,
          std::to_string(kSteps) + " transitions (" + std::to_string(accepted) + " accepted, " +
              std::to_string(oracle.size()) + " versions), " + std::to_string(violations) + " violations"};
}

// --- 9 ----------------------------------------------------------------------

Outcome precompute_latency() {
  auto& w = world();
  const auto dir = scratch("latency-dataset");
  ingest::write_timelines(dir, w.timelines.all());
  const ingest::DatasetTimelineSource source(dir);
  features::FeatureRepository cold;
  register_standard(cold);
  inference::PredictionLog warm_log, cold_log;
  inference::FeedbackLog warm_fb, cold_fb;
  inference::InferenceService warm(w.features, w.registry, source, warm_log, warm_fb);
  inference::InferenceService coldsvc(cold, w.registry, source, cold_log, cold_fb);

  Rng rng(909);
  std::vector<double> warm_ms, cold_ms;
  int disagreements = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& row = w.cohort.rows[rng.below(w.cohort.rows.size())];
    const auto a = warm.predict(request(row.patient_id, row.index_date, features::FeaturePolicy::precomputed_only));
    const auto b = coldsvc.predict(request(row.patient_id, row.index_date, features::FeaturePolicy::compute_on_miss));
    disagreements += a.vector_digest != b.vector_digest || a.probability != b.probability;
    warm_ms.push_back(a.latency_ms);
    cold_ms.push_back(b.latency_ms);
  }
  const double warm_p95 = percentile(warm_ms, 0.95), cold_p50 = percentile(cold_ms, 0.5);
  return {warm_p95 < cold_p50 && disagreements == 0,
          "1000 requests: precomputed p50/p95 " + num(percentile(warm_ms, 0.5), 4) + "/" + num(warm_p95, 4) +
              " ms vs cold p50/p95 " + num(cold_p50, 4) + "/" + num(percentile(cold_ms, 0.95), 4) + " ms (" +
              std::to_string(disagreements) + " score disagreements)"};
}

// --- 10 ---------------------------------------------------------------------

Outcome experiment_tracking() {
  auto& w = world();
  const auto root = scratch("experiments");
  const std::vector<double> rates{0.05, 0.1, 0.2};
  const std::vector<double> penalties{0.0, 1e-4, 1e-3, 1e-2};
  {
    model::ModelRegistry reg(root);
    for (int i = 0; i < 50; ++i) {
      auto cfg = w.config();
      cfg.model_id = "experiments";
      cfg.hyperparameters.seed = 1000 + static_cast<std::uint64_t>(i);
      cfg.hyperparameters.learning_rate = rates[static_cast<std::size_t>(i) % rates.size()];
      cfg.hyperparameters.l2 = penalties[static_cast<std::size_t>(i) % penalties.size()];
      cfg.hyperparameters.epochs = 5 + i % 4;
      training::run_pipeline(w.env(reg), cfg);
    }
  }
  // Everything below reads the registry back from disk.
  const model::ModelRegistry reg(root);
  std::set<int> versions;
  int unresolved = 0;
  for (const auto& spec : reg.list_models(kTask)) {
    if (spec.model_id != "experiments") continue;
    versions.insert(spec.version);
    try {
      const auto lineage = reg.get_lineage(spec.provenance_ref, &w.features.catalog());
      const bool verified = digest(canonical_encode_json(lineage.record.identity_content())) == spec.provenance_ref &&
                            lineage.feature_definitions.size() == spec.feature_refs.size() &&
                            digest(canonical_encode_json(lineage.train_cohort)) == lineage.record.train_cohort_digest &&
                            reg.load_artifact(spec.artifact_digest).artifact_digest == spec.artifact_digest;
      unresolved += !verified;
    } catch (const Error&) {
      ++unresolved;
    }
  }
  int registered_runs = 0;
  for (const auto& run : reg.list_runs()) registered_runs += run.status == "registered";
  return {versions.size() == 50 && *versions.rbegin() == 50 && unresolved == 0 && registered_runs == 50,
          std::to_string(versions.size()) + " versions listed after reopen, " + std::to_string(registered_runs) +
              " registered runs, " + std::to_string(unresolved) + " unverifiable provenance records"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"end-to-end demo lifecycle", demo_lifecycle},
      {"train run reproducibility", reproducibility},
      {"training/inference skew", skew},
      {"point-in-time safety", point_in_time},
      {"metric oracles", metric_oracles},
      {"planted-signal learnability", planted_signal},
      {"drift detection", drift_detection},
      {"registry stage machine", stage_machine},
      {"precomputation latency", precompute_latency},
      {"experiment tracking at scale", experiment_tracking},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " (" << criteria[i].first
              << "): " << o.detail << " [" << num(secs, 1) << " s]" << std::endl;
  }
  // Scratch data stays behind for inspection when something failed.
  if (failed == 0) fs::remove_all(scratch(""));
  return failed == 0 ? 0 : 1;
}

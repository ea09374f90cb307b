// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"
#include "lm/core/random.hpp"
#include "lm/model/serving.hpp"

namespace lm::model {
namespace {

namespace fs = std::filesystem;

ProvenanceRecord provenance(double auc = 0.8, std::string revision = "rev-a") {
  ProvenanceRecord p;
  p.train_cohort_digest = digest("train");
  p.test_cohort_digest = digest("test");
  p.feature_definitions = {{"f1", 1, "age_at_index", digest("{}")}};
  p.algorithm = "logreg_sgd";
  p.hyperparameters = Json{{"learning_rate", 0.1}};
  p.metrics = {{"auc_test", auc}};
  p.code_revision = std::move(revision);
  return p;
}

ModelSpec draft(std::string model_id = "m1", std::string task = "t1", std::size_t d = 1) {
  ModelSpec s;
  s.task_id = std::move(task);
  s.model_id = std::move(model_id);
  for (std::size_t i = 0; i < d; ++i) s.feature_refs.push_back({"f" + std::to_string(i + 1), 1});
  return s;
}

ModelArtifact artifact(std::vector<double> coef, double intercept = 0.0) {
  ModelArtifact a;
  a.coefficients = std::move(coef);
  a.intercept = intercept;
  return a;
}

features::FeatureVector vec(std::vector<double> values) {
  features::FeatureVector v;
  v.patient_id = "p";
  for (std::size_t i = 0; i < values.size(); ++i) v.entries.push_back({"f" + std::to_string(i + 1), 1, values[i]});
  return v;
}

ModelSpec register_with(ModelRegistry& r, const std::string& id, double auc, double coef = 0.0,
                        const std::string& task = "t1") {
  auto s = draft(id, task);
  s.metrics = {{"auc_test", auc}};
  return r.register_model(s, artifact({coef}), provenance(auc, id + std::to_string(coef)));
}

TEST(ContentStore, RoundTripAndVerification) {
  auto root = fs::temp_directory_path() / "lm_content_store";
  fs::remove_all(root);
  ContentStore store(root);
  const Digest d = store.put("hello");
  EXPECT_EQ(d, digest("hello"));
  EXPECT_EQ(store.get(d), "hello");
  EXPECT_EQ(store.path_for(d)->parent_path().filename(), d.hex().substr(0, 2));
  std::ofstream(*store.path_for(d), std::ios::trunc) << "HELLO";
  try {
    store.get(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::corruption);
  }
  try {
    store.get(digest("absent"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_found);
  }
  fs::remove_all(root);
}

TEST(Score, LinearExamples) {
  EXPECT_EQ(score_linear(artifact({0, 0, 0}), {3, -1, 7}).probability, 0.5);
  EXPECT_EQ(score_linear(artifact({0, 0, 0}), {3, -1, 7}).raw, 0.0);
  const auto r = score_linear(artifact({1}), {2});
  EXPECT_EQ(r.raw, 2.0);
  EXPECT_NEAR(r.probability, 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(r.probability, 0.8808, 1e-4);
  try {
    score_linear(artifact({1, 1, 1}), {1, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::spec);
  }
  auto calibrated = artifact({1});
  calibrated.calibration = PlattCalibration{0.5, -1.0};
  EXPECT_NEAR(score_linear(calibrated, {2}).probability, 0.5, 1e-15);
}

TEST(Score, SigmoidIsStableAtExtremes) {
  EXPECT_EQ(sigmoid(-1000), 0.0);
  EXPECT_EQ(sigmoid(1000), 1.0);
  EXPECT_NEAR(sigmoid(-3) + sigmoid(3), 1.0, 1e-15);
}

TEST(Register, VersionsAndIdempotence) {
  ModelRegistry r;
  auto v1 = r.register_model(draft(), artifact({0.5}), provenance());
  EXPECT_EQ(v1.version, 1);
  EXPECT_EQ(v1.stage, Stage::None);
  EXPECT_EQ(v1.serving_handle, "inproc://" + v1.artifact_digest.hex());
  EXPECT_EQ(v1.decision_threshold(), 0.5);
  auto again = r.register_model(draft(), artifact({0.5}), provenance());
  EXPECT_EQ(again.version, 1);
  EXPECT_EQ(again.registered_seq, v1.registered_seq);
  EXPECT_EQ(r.list_models().size(), 1u);
  EXPECT_EQ(r.register_model(draft(), artifact({0.6}), provenance()).version, 2);
  EXPECT_EQ(r.register_model(draft("other"), artifact({0.5}), provenance()).version, 1);
}

TEST(Register, Errors) {
  ModelRegistry r;
  try {
    r.register_model(draft("m1", "t1", 2), artifact({1}), provenance());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::spec);
  }
  try {
    r.register_model(draft(), artifact({1}), digest("nothing here"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::integrity);
  }
  auto empty = draft();
  empty.feature_refs.clear();
  EXPECT_THROW(r.register_model(empty, artifact({}), provenance()), Error);
  auto p = provenance();
  p.record_digest = digest("wrong");
  EXPECT_THROW(r.store_provenance(p), Error);
}

TEST(Provenance, DigestIgnoresCreationTime) {
  auto a = provenance(), b = provenance();
  a.created_at = "2020-01-01T00:00:00Z";
  b.created_at = "2024-06-01T12:00:00Z";
  EXPECT_EQ(a.compute_digest(), b.compute_digest());
  b.code_revision = "rev-b";
  EXPECT_NE(a.compute_digest(), b.compute_digest());
  b = provenance();
  b.metrics["auc_test"] = std::nextafter(0.8, 1.0);
  EXPECT_NE(a.compute_digest(), b.compute_digest());
}

TEST(Stage, ExamplesAndAudit) {
  ModelRegistry r;
  register_with(r, "m1", 0.8, 0.1);
  register_with(r, "m1", 0.8, 0.2);
  try {
    r.transition_stage("m1", 1, Stage::Production);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::transition);
  }
  EXPECT_EQ(r.transition_stage("m1", 1, Stage::Staging).stage, Stage::Staging);
  r.transition_stage("m1", 1, Stage::Production, "alice");
  r.transition_stage("m1", 2, Stage::Staging);
  r.transition_stage("m1", 2, Stage::Production, "bob");
  EXPECT_EQ(r.get_model("m1", 1).stage, Stage::Archived);
  EXPECT_EQ(r.get_model("m1", 2).stage, Stage::Production);
  auto audit = r.audit_log();
  ASSERT_EQ(audit.size(), 5u);
  EXPECT_EQ(audit[3].version, 1);
  EXPECT_EQ(audit[3].to, Stage::Archived);
  EXPECT_EQ(audit[3].actor, "bob");
  EXPECT_FALSE(audit[4].at.empty());
  try {
    r.transition_stage("m1", 9, Stage::Staging);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_found);
  }
  EXPECT_THROW(r.transition_stage("m1", 1, Stage::Staging), Error);  // Archived is terminal
}

// Oracle: a plain map of stages driven by the allowed-set table.
TEST(Stage, RandomizedSequencesKeepInvariants) {
  ModelRegistry r;
  const std::vector<std::string> ids{"a", "b"};
  std::map<std::pair<std::string, int>, Stage> oracle;
  for (const auto& id : ids)
    for (int v = 1; v <= 4; ++v) {
      register_with(r, id, 0.5 + v * 0.01, v);
      oracle[{id, v}] = Stage::None;
    }
  const std::vector<Stage> all{Stage::None, Stage::Staging, Stage::Production, Stage::Archived};
  Rng rng(99);
  int accepted = 0;
  for (int step = 0; step < 10000; ++step) {
    // Occasionally add a fresh version so the machine never runs dry.
    if (rng.below(8) == 0) {
      const auto& id = ids[rng.below(ids.size())];
      auto spec = register_with(r, id, 0.7, 100.0 + step);
      oracle[{id, spec.version}] = Stage::None;
    }
    std::vector<std::map<std::pair<std::string, int>, Stage>::iterator> live;
    for (auto o = oracle.begin(); o != oracle.end(); ++o)
      if (o->second != Stage::Archived) live.push_back(o);
    auto it = !live.empty() && rng.bernoulli(0.8) ? live[rng.below(live.size())]
                                                   : std::next(oracle.begin(), static_cast<long>(rng.below(oracle.size())));
    const Stage from = it->second;
    Stage to = all[rng.below(all.size())];
    if (rng.bernoulli(0.5)) {
      // Half the draws pick a legal successor when one exists.
      std::vector<Stage> legal;
      for (Stage s : all)
        if (transition_allowed(from, s)) legal.push_back(s);
      if (!legal.empty()) to = legal[rng.below(legal.size())];
    }
    try {
      r.transition_stage(it->first.first, it->first.second, to);
      ASSERT_TRUE(transition_allowed(from, to));
      ++accepted;
      if (to == Stage::Production)
        for (auto& [key, stage] : oracle)
          if (key.first == it->first.first && stage == Stage::Production) stage = Stage::Archived;
      it->second = to;
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::transition);
      ASSERT_FALSE(transition_allowed(from, to));
    }
    std::map<std::string, int> production;
    for (const auto& spec : r.list_models()) {
      ASSERT_EQ(spec.stage, (oracle.at({spec.model_id, spec.version})));
      if (spec.stage == Stage::Production) ++production[spec.task_id + "/" + spec.model_id];
    }
    for (const auto& [_, n] : production) ASSERT_LE(n, 1);
  }
  EXPECT_GT(accepted, 1000);
}

TEST(BestModel, Examples) {
  ModelRegistry r;
  try {
    r.get_best_model("t1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_model);
  }
  register_with(r, "m1", 0.80);
  register_with(r, "m2", 0.88);
  r.transition_stage("m1", 1, Stage::Staging);
  EXPECT_THROW(r.get_best_model("t1"), Error);  // only Staging
  r.transition_stage("m1", 1, Stage::Production);
  EXPECT_EQ(r.get_best_model("t1").model_id, "m1");
  r.transition_stage("m2", 1, Stage::Staging);
  r.transition_stage("m2", 1, Stage::Production);
  EXPECT_EQ(r.get_best_model("t1").model_id, "m2");
  EXPECT_THROW(r.get_best_model("other-task"), Error);
}

TEST(BestModel, TieGoesToLatestAndOrderDoesNotMatter) {
  std::vector<std::pair<std::string, double>> models{{"a", 0.7}, {"b", 0.9}, {"c", 0.9}, {"d", 0.6}};
  std::sort(models.begin(), models.end());
  do {
    ModelRegistry r;
    for (const auto& [id, auc] : models) {
      register_with(r, id, auc);
      r.transition_stage(id, 1, Stage::Staging);
      r.transition_stage(id, 1, Stage::Production);
    }
    // Among the tied b and c, the later registration wins.
    const auto best = r.get_best_model("t1");
    EXPECT_EQ(best.metrics.at("auc_test"), 0.9);
    auto later = std::find_if(models.rbegin(), models.rend(), [](const auto& m) { return m.second == 0.9; });
    EXPECT_EQ(best.model_id, later->first);
  } while (std::next_permutation(models.begin(), models.end()));
}

TEST(Lineage, RoundTripTamperAndUnknown) {
  auto root = fs::temp_directory_path() / "lm_lineage";
  fs::remove_all(root);
  ModelRegistry r(root);
  Cohort train;
  train.target_spec = TargetSpec{EventType::admission, {"ADM-UNPLANNED"}, 90};
  train.rows = {{"p1", Date::from_days(100), 1}};
  train.data_digest = train.compute_digest();
  Cohort test = train;
  test.rows[0].label = 0;
  test.data_digest = test.compute_digest();
  EXPECT_EQ(r.store_cohort(train), train.data_digest);
  EXPECT_EQ(r.store_cohort(test), test.data_digest);

  auto p = provenance();
  p.train_cohort_digest = train.data_digest;
  p.test_cohort_digest = test.data_digest;
  const Digest d = r.store_provenance(p);
  auto lineage = r.get_lineage(d);
  EXPECT_EQ(lineage.record.record_digest, d);
  EXPECT_EQ(lineage.record.compute_digest(), d);
  EXPECT_EQ(lineage.train_cohort, train.content());

  try {
    r.get_lineage(digest("unknown"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_found);
  }

  const auto file = *r.content().path_for(d);
  auto bytes = read_file(file);
  auto pos = bytes.find("logreg_sgd");
  bytes.replace(pos, 10, "logreg_xxx");
  std::ofstream(file, std::ios::trunc | std::ios::binary) << bytes;
  try {
    r.get_provenance(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::corruption);
  }
  fs::remove_all(root);
}

TEST(Lineage, ResolvesCatalogDefinitions) {
  features::FeatureCatalog catalog(std::make_shared<features::GeneratorRegistry>(features::GeneratorRegistry::with_builtins()),
                                   std::nullopt);
  features::FeatureDefinition def;
  def.name = "f1";
  def.generator_id = "age_at_index";
  catalog.register_feature(def);
  ModelRegistry r;
  Cohort c;
  c.rows = {{"p", Date::from_days(1), 0}};
  auto p = provenance();
  p.train_cohort_digest = p.test_cohort_digest = r.store_cohort(c);
  p.feature_definitions = {{"f1", 1, "age_at_index", catalog.get({"f1", 1}).params_digest()}};
  auto l = r.get_lineage(r.store_provenance(p), &catalog);
  ASSERT_EQ(l.feature_definitions.size(), 1u);
  EXPECT_EQ(l.feature_definitions[0].generator_id, "age_at_index");
  p.feature_definitions[0].generator_id = "sex_indicator";
  EXPECT_THROW(r.get_lineage(r.store_provenance(p), &catalog), Error);
}

std::map<std::string, std::string> blobs(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root / "artifacts"))
    if (e.is_regular_file()) out[e.path().filename().string()] = read_file(e.path());
  return out;
}

TEST(Registry, PersistsAndNeverRewritesBlobs) {
  auto root = fs::temp_directory_path() / "lm_registry_persist";
  fs::remove_all(root);
  {
    ModelRegistry r(root);
    register_with(r, "m1", 0.8, 0.1);
    auto before = blobs(root);
    register_with(r, "m1", 0.85, 0.2);
    r.transition_stage("m1", 1, Stage::Staging);
    r.transition_stage("m1", 1, Stage::Production);
    r.transition_stage("m1", 2, Stage::Staging);
    r.transition_stage("m1", 2, Stage::Production);
    auto run = r.begin_run("t1", "m1");
    r.update_run(run, "failed:features", "boom");
    auto after = blobs(root);
    for (const auto& [name, bytes] : before) EXPECT_EQ(after.at(name), bytes);
    EXPECT_GT(after.size(), before.size());
  }
  ModelRegistry reopened(root);
  EXPECT_EQ(reopened.list_models().size(), 2u);
  EXPECT_EQ(reopened.get_model("m1", 1).stage, Stage::Archived);
  EXPECT_EQ(reopened.get_best_model("t1").version, 2);
  EXPECT_EQ(reopened.audit_log().size(), 5u);
  EXPECT_EQ(reopened.get_run("run-000001").status, "failed:features");
  EXPECT_EQ(reopened.begin_run("t1", "m1"), "run-000002");
  EXPECT_EQ(register_with(reopened, "m1", 0.9, 0.3).version, 3);
  EXPECT_GT(reopened.get_model("m1", 3).registered_seq, reopened.get_model("m1", 2).registered_seq);
  fs::remove_all(root);
}

TEST(Serving, InprocAndHttpAgree) {
  ModelRegistry r;
  auto a = artifact({0.3, -1.2}, 0.25);
  a.calibration = PlattCalibration{0.9, 0.1};
  auto spec = r.register_model(draft("m1", "t1", 2), a, provenance());
  ServingClient client(r);
  const auto local = client.score(spec.serving_handle, vec({2.0, 0.5}));
  EXPECT_NEAR(local.raw, 0.25 + 0.6 - 0.6, 1e-15);
  EXPECT_EQ(local.probability, sigmoid(0.9 * local.raw + 0.1));

  RunnerServer runner(r.load_artifact(spec.artifact_digest));
  runner.start();
  const auto remote = client.score(runner.handle(), vec({2.0, 0.5}));
  EXPECT_EQ(remote.raw, local.raw);
  EXPECT_EQ(remote.probability, local.probability);
  try {
    client.score(runner.handle(), vec({1, 2, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::spec);
  }
  EXPECT_THROW(client.score(spec.serving_handle, vec({1})), Error);
  const auto dead = runner.handle();
  runner.stop();
  try {
    client.score(dead, vec({1, 2}));
    FAIL();
  } catch (const ServingError& e) {
    EXPECT_EQ(e.code(), ErrorCode::serving);
    EXPECT_EQ(e.retry_after_seconds(), ServingClient::kRetryAfterSeconds);
  }
  EXPECT_THROW(client.score("ftp://nowhere", vec({1, 2})), Error);
}

}  // namespace
}  // namespace lm::model

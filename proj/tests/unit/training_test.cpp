// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "lm/core/error.hpp"
#include "lm/core/jsonl.hpp"
#include "lm/core/random.hpp"
#include "lm/ingest/cohort.hpp"
#include "lm/ingest/synthetic.hpp"
#include "lm/features/standard_set.hpp"
#include "lm/training/metrics.hpp"
#include "lm/training/pipeline.hpp"

namespace lm::training {
namespace {

namespace fs = std::filesystem;

// O(n²) oracle, computed in integers until the final division.
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

TEST(Auc, Examples) {
  EXPECT_EQ(auc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}), 0.75);
  EXPECT_EQ(auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}), 1.0);
  EXPECT_EQ(auc({0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}), 0.5);
  try {
    auc({0.1, 0.2}, {1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::metric);
  }
}

TEST(Auc, MatchesPairCountingExactly) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = rng.bernoulli(0.5);  // coarse scores force ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform01();
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    ASSERT_EQ(auc(s, y), auc_pairs(s, y)) << "trial " << trial;
  }
}

TEST(Brier, Examples) {
  EXPECT_EQ(brier({1, 0}, {1, 0}), 0.0);
  EXPECT_EQ(brier({0.5}, {1}), 0.25);
  EXPECT_NEAR(brier({0.8, 0.4}, {1, 0}), (0.04 + 0.16) / 2, 1e-15);
  EXPECT_EQ(accuracy({0.5, 0.51}, {0, 1}), 1.0);  // 0.5 is not above the threshold
}

TEST(Gradient, ExampleAtOrigin) {
  LinearModel m{0.0, {0.0}};
  auto g = logistic_gradient(m, {{1.0}, {-1.0}}, {1, 0}, 0.0);
  EXPECT_DOUBLE_EQ(g.w[0], -0.5);
  EXPECT_DOUBLE_EQ(g.b, 0.0);
  EXPECT_EQ(model::sigmoid(m.raw(std::vector<double>{123.0})), 0.5);
}

// Relative error of the gradient vector against central differences.
double fd_relative_error(const LinearModel& m, const Matrix& X, const std::vector<int>& y, double l2) {
  const auto g = logistic_gradient(m, X, y, l2);
  const double h = 1e-5;
  double diff = 0, norm = 0;
  auto probe = [&](double analytic, auto perturb) {
    LinearModel plus = m, minus = m;
    perturb(plus, h);
    perturb(minus, -h);
    const double fd = (logistic_loss(plus, X, y, l2) - logistic_loss(minus, X, y, l2)) / (2 * h);
    diff += (analytic - fd) * (analytic - fd);
    norm += std::max(analytic * analytic, fd * fd);
  };
  for (std::size_t j = 0; j < m.coefficients.size(); ++j)
    probe(g.w[j], [j](LinearModel& mm, double d) { mm.coefficients[j] += d; });
  probe(g.b, [](LinearModel& mm, double d) { mm.intercept += d; });
  return std::sqrt(diff) / std::sqrt(norm);
}

TEST(Gradient, MatchesCentralDifferences) {
  Rng rng(3);
  for (int point = 0; point < 20; ++point) {
    const std::size_t d = 1 + rng.below(10), n = 5 + rng.below(40);
    Matrix X(n, std::vector<double>(d));
    std::vector<int> y(n);
    for (auto& row : X)
      for (auto& v : row) v = rng.normal();
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    LinearModel m{rng.normal(), std::vector<double>(d)};
    for (auto& w : m.coefficients) w = rng.normal();
    EXPECT_LT(fd_relative_error(m, X, y, rng.uniform01() * 0.1), 1e-5) << "point " << point;
  }
}

Matrix planted(std::size_t n, std::size_t d, std::vector<int>& y, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(n, std::vector<double>(d));
  y.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : X[i]) v = rng.normal();
    y[i] = X[i][0] > 0 ? 1 : 0;
  }
  return X;
}

TEST(Logreg, LearnsPlantedSeparableSignal) {
  std::vector<int> y_train, y_test;
  const auto X_train = planted(400, 5, y_train, 1), X_test = planted(400, 5, y_test, 2);
  Hyperparameters hp;
  hp.l2 = 0.01;
  const auto m = train_logreg(X_train, y_train, hp);
  const auto scores = m.raw(X_test);
  EXPECT_GT(auc_pairs(scores, y_test), 0.95);
  EXPECT_EQ(auc(scores, y_test), auc_pairs(scores, y_test));
}

TEST(Logreg, DeterministicGivenSeed) {
  std::vector<int> y;
  const auto X = planted(100, 3, y, 9);
  Hyperparameters hp;
  const auto a = train_logreg(X, y, hp), b = train_logreg(X, y, hp);
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.intercept, b.intercept);
  hp.seed = 8;
  EXPECT_NE(train_logreg(X, y, hp).coefficients, a.coefficients);
}

TEST(Logreg, FullBatchLossNeverIncreases) {
  std::vector<int> y;
  auto X = planted(200, 4, y, 5);
  Rng rng(6);
  for (auto& v : y)
    if (rng.bernoulli(0.1)) v = 1 - v;  // non-separable
  Hyperparameters hp;
  hp.batch_size = 200;
  hp.learning_rate = 0.1;
  hp.epochs = 100;
  double previous = logistic_loss(LinearModel{0, std::vector<double>(4)}, X, y, hp.l2);
  train_logreg(X, y, hp, [&](int epoch, double loss) {
    EXPECT_LE(loss, previous + 1e-15) << "epoch " << epoch;
    previous = loss;
  });
}

TEST(Logreg, Errors) {
  try {
    train_logreg({{1}, {2}}, {1, 1}, Hyperparameters{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_data);
  }
  EXPECT_THROW(train_logreg({{1}}, {1}, Hyperparameters{}), Error);
  Hyperparameters bad;
  bad.learning_rate = 0;
  EXPECT_THROW(train_logreg({{1}, {2}}, {0, 1}, bad), Error);
}

// Brute-force oracle on the smoothed Platt loss.
std::pair<double, double> platt_grid(const std::vector<double>& s, const std::vector<int>& y) {
  double pos = 0, neg = 0;
  for (int v : y) (v ? pos : neg) += 1;
  const double tp = (pos + 1) / (pos + 2), tn = 1 / (neg + 2);
  auto loss = [&](double a, double b) {
    double sum = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double p = model::sigmoid(a * s[i] + b), t = y[i] ? tp : tn;
      sum -= t * std::log(p) + (1 - t) * std::log(1 - p);
    }
    return sum;
  };
  double best = INFINITY, ba = 0, bb = 0;
  for (double a = -3; a <= 3; a += 0.005)
    for (double b = -2; b <= 2; b += 0.005)
      if (double l = loss(a, b); l < best) best = l, ba = a, bb = b;
  return {ba, bb};
}

TEST(Platt, SymmetricExample) {
  const std::vector<double> s{-2, -1, 1, 2};
  const std::vector<int> y{0, 0, 1, 1};
  const auto fit = fit_platt(s, y);
  const auto [ga, gb] = platt_grid(s, y);
  EXPECT_NEAR(fit.a, ga, 0.01);
  EXPECT_NEAR(fit.b, gb, 0.01);
  EXPECT_NEAR(fit.a, 0.675, 0.01);
  EXPECT_NEAR(fit.b, 0.0, 1e-9);
  EXPECT_LE(fit.iterations, 100);
}

TEST(Platt, SignFlipSymmetryAndGridAgreement) {
  const std::vector<double> s{-3, -1.5, -0.2, 0.4, 0.9, 2.5, 0.1};
  const std::vector<int> y{0, 1, 0, 1, 1, 1, 0};
  const auto fit = fit_platt(s, y);
  const auto [ga, gb] = platt_grid(s, y);
  EXPECT_NEAR(fit.a, ga, 0.01);
  EXPECT_NEAR(fit.b, gb, 0.01);
  std::vector<double> fs;
  std::vector<int> fy;
  for (std::size_t i = 0; i < s.size(); ++i) {
    fs.push_back(-s[i]);
    fy.push_back(1 - y[i]);
  }
  const auto flipped = fit_platt(fs, fy);
  EXPECT_NEAR(flipped.a, fit.a, 1e-7);
  EXPECT_NEAR(flipped.b, -fit.b, 1e-7);
}

TEST(Platt, Errors) {
  try {
    fit_platt({1, 2, 3}, {1, 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::calibration);
  }
}

TEST(Platt, ImprovesMiscalibratedBrier) {
  Rng rng(21);
  std::vector<double> logits, overconfident, calibrated;
  std::vector<int> y;
  for (int i = 0; i < 2000; ++i) {
    const double z = rng.normal() * 1.5;
    logits.push_back(3 * z);
    overconfident.push_back(model::sigmoid(3 * z));
    y.push_back(rng.bernoulli(model::sigmoid(z)) ? 1 : 0);
  }
  const auto fit = fit_platt(logits, y);
  for (double s : logits) calibrated.push_back(model::sigmoid(fit.a * s + fit.b));
  EXPECT_LE(brier(calibrated, y), brier(overconfident, y));
  EXPECT_NEAR(fit.a, 1.0 / 3.0, 0.1);
}

TEST(PermutationImportance, ZeroCoefficientPlantedAndDeterminism) {
  std::vector<int> y;
  const auto X = planted(300, 4, y, 12);
  LinearModel m{0.0, {2.0, 0.3, 0.0, -0.2}};
  const auto report = permutation_importance(m, X, y, 5, 5, {"signal", "a", "zero", "b"});
  ASSERT_EQ(report.size(), 4u);
  EXPECT_EQ(report[0].name, "signal");
  EXPECT_GT(report[0].importance, report[1].importance);
  for (const auto& f : report)
    if (f.name == "zero") EXPECT_NEAR(f.importance, 0.0, 0.02);
  const auto again = permutation_importance(m, X, y, 5, 5, {"signal", "a", "zero", "b"});
  for (std::size_t i = 0; i < report.size(); ++i) {
    EXPECT_EQ(report[i].name, again[i].name);
    EXPECT_EQ(report[i].importance, again[i].importance);
  }
}

// ----------------------------------------------------------------- pipeline

struct World {
  ingest::GeneratorConfig gen;
  ingest::TimelineIndex timelines;
  features::FeatureRepository features;
  model::ModelRegistry registry;
  Cohort cohort;

  explicit World(int patients = 600, double rate = 0.3) {
    gen.n_patients = patients;
    gen.target_injection_rate = rate;
    timelines = ingest::TimelineIndex(ingest::generate_synthetic(gen));
    for (const auto& d : features::standard_feature_set()) features.register_feature(d);
    TargetSpec target{EventType::admission, {std::string(ingest::kUnplannedAdmissionCode)}, 90};
    cohort = ingest::build_cohort(timelines.all(), target, ingest::FixedDate{ingest::planted_reference_date(gen)},
                                  "demo");
  }

  PipelineEnv env(std::optional<fs::path> profiles = std::nullopt) {
    return PipelineEnv{features, registry, timelines,
                       [this](const std::string& id) {
                         if (id != cohort.cohort_id) throw Error(ErrorCode::not_found, "no cohort " + id);
                         return cohort;
                       },
                       profiles};
  }

  TrainConfig config() const {
    TrainConfig cfg;
    cfg.task_id = "unplanned_admission_90d";
    cfg.cohort_id = "demo";
    for (const auto& n : features::standard_numeric_feature_names()) cfg.feature_refs.push_back({n, 0});
    return cfg;
  }
};

TEST(Pipeline, PlantedSignalDeterminismAndRunRecord) {
  World w;
  const auto a = run_pipeline(w.env(), w.config());
  EXPECT_GT(a.report.auc_test, 0.7);
  EXPECT_EQ(a.report.n_train + a.report.n_test, w.cohort.rows.size());
  EXPECT_EQ(a.importance.front().name, "risk_factor_indicator");
  EXPECT_EQ(a.spec.version, 1);
  EXPECT_EQ(a.spec.feature_refs.size(), a.artifact.coefficients.size());
  EXPECT_TRUE(a.artifact.calibration.has_value());
  EXPECT_EQ(w.registry.get_run(a.run_id).status, "registered");
  for (const auto& [k, v] : a.spec.metrics)
    if (k.rfind("n_", 0) != 0) {
      EXPECT_GE(v, 0.0) << k;
      EXPECT_LE(v, 1.0) << k;
    }

  const auto b = run_pipeline(w.env(), w.config());
  EXPECT_EQ(b.spec.artifact_digest, a.spec.artifact_digest);
  EXPECT_EQ(b.provenance.record_digest, a.provenance.record_digest);
  EXPECT_EQ(b.spec.metrics, a.spec.metrics);
  EXPECT_EQ(b.spec.version, 1);  // idempotent registration
  EXPECT_NE(b.run_id, a.run_id);

  auto lineage = w.registry.get_lineage(a.spec.provenance_ref, &w.features.catalog());
  EXPECT_EQ(lineage.feature_definitions.size(), a.spec.feature_refs.size());

  auto changed = w.config();
  changed.hyperparameters.seed = 99;
  EXPECT_EQ(run_pipeline(w.env(), changed).spec.version, 2);
}

TEST(Pipeline, RowsEqualServingVectors) {
  World w(200);
  auto cfg = w.config();
  const auto r = run_pipeline(w.env(), cfg);
  features::FeatureRepository cold;
  for (const auto& d : features::standard_feature_set()) cold.register_feature(d);
  const auto rows = training_rows(w.features, w.timelines, r.spec.feature_refs, w.cohort.rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto served = cold.get_vector_asof(w.timelines, w.cohort.rows[i].patient_id, r.spec.feature_refs,
                                             w.cohort.rows[i].index_date, features::FeaturePolicy::compute_on_miss);
    ASSERT_EQ(rows[i].vector_digest, served.vector.vector_digest);
  }
}

TEST(Pipeline, FailuresMarkTheRunWithTheStage) {
  World w(200);
  auto cfg = w.config();
  cfg.feature_refs.push_back({"does_not_exist", 0});
  try {
    run_pipeline(w.env(), cfg);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "features");
    EXPECT_EQ(e.cause(), ErrorCode::not_found);
  }
  EXPECT_EQ(w.registry.list_runs().back().status, "failed:features");
  EXPECT_TRUE(w.registry.list_models().empty());

  cfg = w.config();
  cfg.cohort_id = "missing";
  EXPECT_THROW(run_pipeline(w.env(), cfg), PipelineError);
  EXPECT_EQ(w.registry.list_runs().back().status, "failed:split");

  World degenerate(200, 0.0);  // no positives at all
  try {
    run_pipeline(degenerate.env(), degenerate.config());
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "train");
    EXPECT_EQ(e.cause(), ErrorCode::degenerate_data);
  }
}

TEST(Pipeline, WritesReferenceProfile) {
  auto dir = fs::temp_directory_path() / "lm_profiles";
  fs::remove_all(dir);
  World w(200);
  const auto r = run_pipeline(w.env(dir), w.config());
  const auto p = monitoring::load_profile(dir, r.spec.model_id, r.spec.version);
  EXPECT_EQ(p.features.size(), r.spec.feature_refs.size());
  double sum = 0;
  for (double v : p.score.proportions) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  fs::remove_all(dir);
}

TEST(TrainConfigFile, ParsesNamesAndPinnedRefs) {
  auto file = fs::temp_directory_path() / "lm_train.json";
  write_file_atomic(file, R"({"task_id":"t","cohort_id":"c","feature_refs":["age_at_index",["sex_indicator",2]],
    "hyperparameters":{"epochs":5,"seed":3},"split":{"train_fraction":0.7,"test_fraction":0.3}})");
  const auto cfg = load_train_config(file);
  ASSERT_EQ(cfg.feature_refs.size(), 2u);
  EXPECT_EQ(cfg.feature_refs[0].version, 0);
  EXPECT_EQ(cfg.feature_refs[1].version, 2);
  EXPECT_EQ(cfg.hyperparameters.epochs, 5);
  EXPECT_EQ(cfg.hyperparameters.learning_rate, 0.1);
  EXPECT_EQ(cfg.train_fraction, 0.7);
  EXPECT_EQ(cfg.effective_model_id(), "t");
  write_file_atomic(file, R"({"task_id":"t","cohort_id":"c","feature_refs":["a"],"split":{"train_fraction":0.7,"test_fraction":0.2}})");
  EXPECT_THROW(load_train_config(file), Error);
  fs::remove(file);
}

}  // namespace
}  // namespace lm::training

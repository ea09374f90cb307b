// SPDX-License-Identifier: Apache-2.0
// `lm`: operator command line over a data root. Every subcommand is a thin
// call into the library; exit 0 on success, 1 on domain errors, 2 on usage.
#include <CLI11.hpp>
#include <httplib.h>
#include <signal.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lm/app/workspace.hpp"
#include "lm/core/error.hpp"
#include "lm/core/jsonl.hpp"
#include "lm/core/random.hpp"
#include "lm/features/standard_set.hpp"
#include "lm/inference/http_api.hpp"
#include "lm/ingest/cohort.hpp"
#include "lm/ingest/normalize.hpp"
#include "lm/training/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using lm::Error;
using lm::ErrorCode;
using lm::Json;

struct Globals {
  bool json = false;
  std::string config_path;
  std::string data_root;
  lm::app::AppConfig cfg;

  void resolve() {
    cfg = lm::app::load_app_config(config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path));
    if (!data_root.empty()) cfg.data_root = data_root;
  }
  lm::app::Workspace workspace() const { return lm::app::Workspace(cfg.data_root); }

  // One structured record or its human line.
  void emit(const Json& record, const std::string& text) const {
    if (json) {
      std::cout << record.dump() << "\n";
    } else {
      std::cout << text << "\n";
    }
    std::cout.flush();
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

// Latest version of every numeric feature in the catalog, in name order.
std::vector<lm::features::FeatureRef> numeric_latest(const lm::features::FeatureCatalog& catalog) {
  std::vector<lm::features::FeatureRef> out;
  for (const auto& d : catalog.search(""))
    if (d.value_type == lm::features::ValueType::numeric && catalog.latest(d.name).version == d.version)
      out.push_back(d.ref());
  return out;
}

std::vector<lm::features::FeatureRef> refs_for(const lm::features::FeatureCatalog& catalog, const std::string& list) {
  if (list.empty()) return numeric_latest(catalog);
  return catalog.resolve_latest(split_list(list));
}

// Blocks until SIGINT or SIGTERM. Signals must already be blocked in every thread.
void wait_for_shutdown(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
}

sigset_t block_shutdown_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

// --- ingest ---------------------------------------------------------------------

void add_ingest(CLI::App& app, Globals& g) {
  auto* ingest = app.add_subcommand("ingest", "Create or normalize the claims dataset");
  ingest->require_subcommand(1);

  auto* gen = ingest->add_subcommand("generate", "Write a synthetic longitudinal dataset");
  auto cfg = std::make_shared<lm::ingest::GeneratorConfig>();
  auto seed = std::make_shared<std::optional<std::uint64_t>>();
  auto shard = std::make_shared<std::size_t>(50000);
  gen->add_option("--patients", cfg->n_patients, "Number of patients")->capture_default_str();
  gen->add_option("--seed", *seed, "Generator seed (default: config seed)");
  gen->add_option("--rate", cfg->target_injection_rate, "Planted target injection rate")->capture_default_str();
  gen->add_option("--mean-events", cfg->mean_events_per_patient, "Mean events per patient")->capture_default_str();
  gen->add_option("--shard-size", *shard, "Events per shard file")->capture_default_str();
  gen->callback([&g, cfg, seed, shard] {
    cfg->seed = seed->value_or(g.cfg.seed);
    cfg->validate();
    const auto ws = g.workspace();
    const auto timelines = lm::ingest::generate_synthetic(*cfg);
    lm::ingest::write_timelines(ws.dataset_dir(), timelines, *shard);
    ws.save_generator_config(*cfg);
    std::size_t events = 0;
    for (const auto& t : timelines) events += t.events.size();
    const auto planted = lm::ingest::planted_reference_date(*cfg).iso();
    g.emit(Json{{"patients", timelines.size()}, {"events", events}, {"planted_reference_date", planted},
                {"dataset", ws.dataset_dir().string()}},
           "generated " + std::to_string(timelines.size()) + " patients, " + std::to_string(events) +
               " events in " + ws.dataset_dir().string() + " (planted reference date " + planted + ")");
  });

  auto* norm = ingest->add_subcommand("normalize", "Map raw source records onto claim events");
  auto input = std::make_shared<std::string>();
  auto mappings = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  norm->add_option("--input", *input, "Raw records, one {source_name, payload} per line")->required();
  norm->add_option("--mappings", *mappings, "Extra source mappings (JSON array)");
  norm->add_option("--out", *out, "Output directory (default: <data_root>/normalized)");
  norm->callback([&g, input, mappings, out] {
    auto sources = lm::ingest::SourceRegistry::with_builtins();
    if (!mappings->empty()) sources.load_json(Json::parse(lm::read_file(*mappings)));
    std::vector<lm::ingest::RawSourceRecord> records;
    lm::read_jsonl(*input, [&](const Json& j) { records.push_back(j.get<lm::ingest::RawSourceRecord>()); });
    const auto result = lm::ingest::normalize_to_cdm(records, sources);
    const fs::path dir = out->empty() ? g.cfg.data_root / "normalized" : fs::path(*out);
    fs::create_directories(dir);
    lm::ingest::write_events(dir / "events.jsonl", result.events);
    std::vector<Json> rejects(result.rejects.begin(), result.rejects.end());
    lm::write_jsonl(dir / "rejects.jsonl", rejects);
    g.emit(Json{{"records", records.size()}, {"events", result.events.size()}, {"rejects", result.rejects.size()},
                {"out", dir.string()}},
           std::to_string(result.events.size()) + " events, " + std::to_string(result.rejects.size()) +
               " rejects written to " + dir.string());
  });
}

// --- cohort ---------------------------------------------------------------------

void add_cohort(CLI::App& app, Globals& g) {
  auto* cohort = app.add_subcommand("cohort", "Build and split labeled cohorts");
  cohort->require_subcommand(1);

  struct BuildOpts {
    std::string id, target_type = "admission", codes = lm::ingest::kUnplannedAdmissionCode, index;
    int horizon = 90;
  };
  auto b = std::make_shared<BuildOpts>();
  auto* build = cohort->add_subcommand("build", "Index and label patients");
  build->add_option("--id", b->id, "Cohort id")->required();
  build->add_option("--target-type", b->target_type, "Target event type")->capture_default_str();
  build->add_option("--codes", b->codes, "Comma-separated target codes")->capture_default_str();
  build->add_option("--horizon", b->horizon, "Label horizon in days")->capture_default_str();
  build->add_option("--index", b->index,
                    "Index rule: fixed:YYYY-MM-DD, first:<type>:<codes>, or 'planted' for the generator's date")
      ->required();
  build->callback([&g, b] {
    const auto ws = g.workspace();
    lm::TargetSpec target;
    target.event_type = Json(b->target_type).get<lm::EventType>();
    const auto codes = split_list(b->codes);
    target.code_set = {codes.begin(), codes.end()};
    target.horizon_days = b->horizon;
    target.validate();
    const auto rule = b->index == "planted"
                          ? lm::ingest::IndexRule{lm::ingest::FixedDate{
                                lm::ingest::planted_reference_date(ws.generator_config())}}
                          : lm::ingest::parse_index_rule(b->index);
    const auto timelines = ws.load_timelines();
    const auto c = lm::ingest::build_cohort(timelines.all(), target, rule, b->id);
    ws.save_cohort(c);
    const auto positives = std::count_if(c.rows.begin(), c.rows.end(), [](const auto& r) { return r.label == 1; });
    g.emit(Json{{"cohort_id", c.cohort_id}, {"rows", c.rows.size()}, {"positives", positives},
                {"data_digest", c.data_digest}, {"index_rule", lm::ingest::describe(rule)}},
           "cohort " + c.cohort_id + ": " + std::to_string(c.rows.size()) + " rows, " + std::to_string(positives) +
               " positive, digest " + c.data_digest.hex());
  });

  struct SplitOpts {
    std::string id;
    double train = 0.8, test = 0.2;
    std::optional<std::uint64_t> seed;
  };
  auto s = std::make_shared<SplitOpts>();
  auto* split = cohort->add_subcommand("split", "Patient-level train/test split");
  split->add_option("--id", s->id, "Cohort id")->required();
  split->add_option("--train", s->train, "Train fraction")->capture_default_str();
  split->add_option("--test", s->test, "Test fraction")->capture_default_str();
  split->add_option("--seed", s->seed, "Split seed (default: config seed)");
  split->callback([&g, s] {
    const auto ws = g.workspace();
    const auto [train, test] =
        lm::ingest::split_cohort(ws.load_cohort(s->id), s->train, s->test, s->seed.value_or(g.cfg.seed));
    ws.save_cohort(train);
    ws.save_cohort(test);
    Json out = Json::array();
    std::string text;
    for (const auto* c : {&train, &test}) {
      out.push_back(Json{{"cohort_id", c->cohort_id}, {"rows", c->rows.size()}, {"data_digest", c->data_digest}});
      text += (text.empty() ? "" : "\n") + c->cohort_id + ": " + std::to_string(c->rows.size()) + " rows, digest " +
              c->data_digest.hex();
    }
    g.emit(Json{{"cohorts", out}}, text);
  });
}

// --- features -------------------------------------------------------------------

void add_features(CLI::App& app, Globals& g) {
  auto* features = app.add_subcommand("features", "Feature catalog and materialization");
  features->require_subcommand(1);

  auto standard = std::make_shared<bool>(false);
  auto file = std::make_shared<std::string>();
  auto* reg = features->add_subcommand("register", "Register feature definitions");
  reg->add_flag("--standard-set", *standard, "Register the built-in standard feature set");
  reg->add_option("--file", *file, "Definitions, one JSON object per line");
  reg->callback([&g, standard, file] {
    if (!*standard && file->empty()) throw CLI::ValidationError("register", "give --standard-set or --file");
    lm::features::FeatureRepository repo(g.cfg.data_root);
    std::vector<lm::features::FeatureDefinition> defs;
    if (*standard) defs = lm::features::standard_feature_set();
    if (!file->empty())
      lm::read_jsonl(*file, [&](const Json& j) { defs.push_back(j.get<lm::features::FeatureDefinition>()); });
    Json receipts = Json::array();
    int created = 0;
    for (auto& d : defs) {
      const auto r = repo.register_feature(std::move(d));
      created += r.created;
      receipts.push_back(Json{{"name", r.name}, {"version", r.version}, {"created", r.created}});
    }
    g.emit(Json{{"receipts", receipts}, {"created", created}, {"catalog_size", repo.catalog().size()}},
           std::to_string(defs.size()) + " definitions, " + std::to_string(created) + " new versions, catalog has " +
               std::to_string(repo.catalog().size()));
  });

  struct MatOpts {
    std::string cohort, names;
    unsigned threads = 0;
  };
  auto m = std::make_shared<MatOpts>();
  auto* mat = features->add_subcommand("materialize", "Precompute feature values for a cohort's index dates");
  mat->add_option("--cohort", m->cohort, "Cohort whose (patient, index date) cells are computed")->required();
  mat->add_option("--features", m->names, "Comma-separated names (default: every numeric feature)");
  mat->add_option("--threads", m->threads, "Worker threads (0 = hardware)");
  mat->callback([&g, m] {
    const auto ws = g.workspace();
    lm::features::FeatureRepository repo(ws.root());
    const auto timelines = ws.load_timelines();
    const auto cohort = ws.load_cohort(m->cohort);
    std::vector<lm::features::Cell> cells;
    for (const auto& r : cohort.rows) cells.push_back({r.patient_id, r.index_date});
    const auto refs = refs_for(repo.catalog(), m->names);
    const auto started = std::chrono::steady_clock::now();
    const auto report = repo.materialize(timelines, refs, cells, m->threads);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    g.emit(Json{{"written", report.written}, {"skipped", report.skipped}, {"failures", report.failures.size()},
                {"features", refs.size()}, {"cells", cells.size()}, {"seconds", secs}},
           "materialized " + std::to_string(refs.size()) + " features x " + std::to_string(cells.size()) +
               " cells: " + std::to_string(report.written) + " written, " + std::to_string(report.skipped) +
               " skipped, " + std::to_string(report.failures.size()) + " failed (" + fmt(secs, 2) + " s)");
    if (!report.failures.empty())
      throw Error(ErrorCode::pipeline, std::to_string(report.failures.size()) + " cells failed, first: " +
                                           report.failures.front().message);
  });

  auto query = std::make_shared<std::string>();
  auto* search = features->add_subcommand("search", "Search the catalog by name, generator or group");
  search->add_option("query", *query, "Case-insensitive substring (empty lists all)");
  search->callback([&g, query] {
    lm::features::FeatureRepository repo(g.cfg.data_root);
    const auto hits = repo.search_catalog(*query);
    if (g.json) {
      g.emit(Json{{"definitions", hits}}, "");
      return;
    }
    for (const auto& d : hits)
      std::cout << d.name << "@v" << d.version << "  " << d.generator_id << "  " << d.params.dump()
                << (d.group_id ? "  [" + *d.group_id + "]" : "") << "\n";
    std::cout << hits.size() << " definitions\n";
  });
}

// --- train ----------------------------------------------------------------------

void add_train(CLI::App& app, Globals& g) {
  auto* train = app.add_subcommand("train", "Training pipeline");
  train->require_subcommand(1);

  struct RunOpts {
    std::string spec, task, cohort, model_id, features;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs, batch;
    std::optional<double> lr, l2;
    bool no_calibrate = false;
  };
  auto o = std::make_shared<RunOpts>();
  auto* run = train->add_subcommand("run", "Split, featurize, train, calibrate, evaluate and register");
  run->add_option("--spec", o->spec, "Training config file (JSON); flags below override it");
  run->add_option("--task", o->task, "Prediction task id");
  run->add_option("--cohort", o->cohort, "Cohort id");
  run->add_option("--model-id", o->model_id, "Model id (default: task id)");
  run->add_option("--features", o->features, "Comma-separated names (default: every numeric feature)");
  run->add_option("--seed", o->seed, "Training seed");
  run->add_option("--epochs", o->epochs, "SGD epochs");
  run->add_option("--batch", o->batch, "Mini-batch size");
  run->add_option("--lr", o->lr, "Learning rate");
  run->add_option("--l2", o->l2, "L2 penalty");
  run->add_flag("--no-calibrate", o->no_calibrate, "Skip Platt calibration");
  run->callback([&g, o] {
    const auto ws = g.workspace();
    lm::training::TrainConfig cfg;
    if (!o->spec.empty()) cfg = lm::training::load_train_config(o->spec);
    if (!o->task.empty()) cfg.task_id = o->task;
    if (!o->cohort.empty()) cfg.cohort_id = o->cohort;
    if (!o->model_id.empty()) cfg.model_id = o->model_id;
    if (o->seed) cfg.hyperparameters.seed = *o->seed;
    if (o->epochs) cfg.hyperparameters.epochs = *o->epochs;
    if (o->batch) cfg.hyperparameters.batch_size = *o->batch;
    if (o->lr) cfg.hyperparameters.learning_rate = *o->lr;
    if (o->l2) cfg.hyperparameters.l2 = *o->l2;
    if (o->no_calibrate) cfg.calibrate = false;

    lm::features::FeatureRepository repo(ws.root());
    if (!o->features.empty() || cfg.feature_refs.empty()) cfg.feature_refs = refs_for(repo.catalog(), o->features);
    lm::model::ModelRegistry registry(ws.root());
    const auto timelines = ws.load_timelines();
    const lm::training::PipelineEnv env{repo, registry, timelines,
                                        [&ws](const std::string& id) { return ws.load_cohort(id); },
                                        ws.profiles_dir()};
    const auto r = lm::training::run_pipeline(env, cfg);
    Json out{{"run_id", r.run_id},
             {"model_id", r.spec.model_id},
             {"version", r.spec.version},
             {"artifact_digest", r.spec.artifact_digest},
             {"provenance_ref", r.spec.provenance_ref},
             {"metrics", r.spec.metrics},
             {"top_features", Json::array()}};
    for (std::size_t i = 0; i < std::min<std::size_t>(5, r.importance.size()); ++i)
      out["top_features"].push_back(r.importance[i]);
    std::string text = r.run_id + ": registered " + r.spec.model_id + " v" + std::to_string(r.spec.version) +
                       "\n  auc_test " + fmt(r.report.auc_test) + "  auc_train " + fmt(r.report.auc_train) +
                       "  brier_test " + fmt(r.report.brier_test) + "  accuracy_test " +
                       fmt(r.report.accuracy_test) + "\n  artifact " + r.spec.artifact_digest.hex() +
                       "\n  provenance " + r.spec.provenance_ref.hex();
    if (!r.importance.empty()) text += "\n  top feature " + r.importance.front().name;
    g.emit(out, text);
  });
}

// --- registry -------------------------------------------------------------------

void add_registry(CLI::App& app, Globals& g) {
  auto* registry = app.add_subcommand("registry", "Model registry");
  registry->require_subcommand(1);

  auto task = std::make_shared<std::string>();
  auto* list = registry->add_subcommand("list", "List registered model versions");
  list->add_option("--task", *task, "Only this task");
  list->callback([&g, task] {
    lm::model::ModelRegistry reg(g.cfg.data_root);
    const auto models = reg.list_models(*task);
    if (g.json) {
      g.emit(Json{{"models", models}}, "");
      return;
    }
    for (const auto& m : models) {
      auto auc = m.metrics.find("auc_test");
      std::cout << m.model_id << " v" << m.version << "  " << lm::model::to_string(m.stage) << "  task "
                << m.task_id << "  auc_test " << (auc == m.metrics.end() ? "-" : fmt(auc->second)) << "  "
                << m.registered_at << "\n";
    }
    std::cout << models.size() << " versions\n";
  });

  struct Ref {
    std::string model_id;
    int version = 0;
    std::string stage, actor = "cli";
  };
  auto show_ref = std::make_shared<Ref>();
  auto* show = registry->add_subcommand("show", "Show one version with its provenance and transitions");
  show->add_option("model_id", show_ref->model_id)->required();
  show->add_option("version", show_ref->version)->required();
  show->callback([&g, show_ref] {
    lm::model::ModelRegistry reg(g.cfg.data_root);
    const auto spec = reg.get_model(show_ref->model_id, show_ref->version);
    Json transitions = Json::array();
    for (const auto& e : reg.audit_log())
      if (e.model_id == spec.model_id && e.version == spec.version) transitions.push_back(e);
    const Json out{{"spec", spec}, {"provenance", reg.get_provenance(spec.provenance_ref)}, {"transitions", transitions}};
    g.emit(out, out.dump(2));
  });

  auto promote_ref = std::make_shared<Ref>();
  auto* promote = registry->add_subcommand("promote", "Move a version to another stage");
  promote->add_option("model_id", promote_ref->model_id)->required();
  promote->add_option("version", promote_ref->version)->required();
  promote->add_option("stage", promote_ref->stage, "Staging, Production, Archived or None")->required();
  promote->add_option("--actor", promote_ref->actor, "Recorded in the audit log")->capture_default_str();
  promote->callback([&g, promote_ref] {
    lm::model::ModelRegistry reg(g.cfg.data_root);
    const auto before = reg.audit_log().size();
    const auto spec = reg.transition_stage(promote_ref->model_id, promote_ref->version,
                                           lm::model::parse_stage(promote_ref->stage), promote_ref->actor);
    const auto log = reg.audit_log();
    Json events(std::vector<lm::model::TransitionEvent>(log.begin() + static_cast<std::ptrdiff_t>(before), log.end()));
    std::string text;
    for (const auto& e : events)
      text += (text.empty() ? "" : "\n") + e["model_id"].get<std::string>() + " v" + std::to_string(e["version"].get<int>()) +
              ": " + e["from"].get<std::string>() + " -> " + e["to"].get<std::string>();
    g.emit(Json{{"spec", spec}, {"transitions", events}}, text);
  });
}

// --- serving --------------------------------------------------------------------

void add_serve(CLI::App& app, Globals& g) {
  struct ServeOpts {
    std::string host, port_file;
    std::optional<int> port;
    std::optional<long long> monitor_interval;
    bool no_monitor = false;
  };
  auto o = std::make_shared<ServeOpts>();
  auto* serve = app.add_subcommand("serve", "Start the HTTP API and the periodic monitor job");
  serve->add_option("--host", o->host, "Bind address (default: config host)");
  serve->add_option("--port", o->port, "Port; 0 picks a free one (default: config port)");
  serve->add_option("--port-file", o->port_file, "Write the bound port here once listening");
  serve->add_option("--monitor-interval", o->monitor_interval, "Seconds between monitor runs");
  serve->add_flag("--no-monitor", o->no_monitor, "Do not start the monitor job");
  serve->callback([&g, o] {
    const auto signals = block_shutdown_signals();
    const auto ws = g.workspace();
    lm::features::FeatureRepository repo(ws.root());
    lm::model::ModelRegistry registry(ws.root());
    const lm::ingest::DatasetTimelineSource source(ws.dataset_dir());
    lm::inference::PredictionLog predictions(ws.predictions_log());
    lm::inference::FeedbackLog feedback(ws.feedback_log());
    lm::monitoring::AlertLog alerts(ws.alerts_log());
    lm::inference::ServiceConfig sc;
    if (!g.cfg.api_key.empty()) sc.api_keys.insert(g.cfg.api_key);
    sc.primary_metrics = g.cfg.primary_metrics;
    lm::inference::InferenceService service(repo, registry, source, predictions, feedback, sc);
    auto mcfg = g.cfg.monitor;
    if (o->monitor_interval) mcfg.interval = std::chrono::seconds(*o->monitor_interval);
    lm::monitoring::Monitor monitor(registry, predictions, feedback, alerts, ws.profiles_dir(), mcfg);
    std::unique_ptr<lm::monitoring::MonitorJob> job;
    if (!o->no_monitor) job = std::make_unique<lm::monitoring::MonitorJob>(monitor, mcfg.interval);

    lm::inference::ApiServer api(service, alerts, &monitor);
    const auto host = o->host.empty() ? g.cfg.host : o->host;
    const int port = api.start(host, o->port.value_or(g.cfg.port));
    if (!o->port_file.empty()) lm::write_file_atomic(o->port_file, std::to_string(port) + "\n");
    g.emit(Json{{"listening", "http://" + host + ":" + std::to_string(port)}},
           "listening on http://" + host + ":" + std::to_string(port) + " (Ctrl-C to stop)");
    wait_for_shutdown(signals);
    api.stop();
    if (job) job->stop();
    g.emit(Json{{"stopped", true}, {"predictions", predictions.size()}},
           "stopped after " + std::to_string(predictions.size()) + " logged predictions");
  });

  struct RunnerOpts {
    std::string model_id, host = "127.0.0.1";
    int version = 0, port = 0;
  };
  auto r = std::make_shared<RunnerOpts>();
  auto* runner = app.add_subcommand("runner", "Standalone model runner");
  runner->require_subcommand(1);
  auto* rserve = runner->add_subcommand("serve", "Serve one model version at POST /score");
  rserve->add_option("model_id", r->model_id)->required();
  rserve->add_option("version", r->version)->required();
  rserve->add_option("--host", r->host)->capture_default_str();
  rserve->add_option("--port", r->port, "0 picks a free port")->capture_default_str();
  rserve->callback([&g, r] {
    const auto signals = block_shutdown_signals();
    lm::model::ModelRegistry registry(g.cfg.data_root);
    const auto spec = registry.get_model(r->model_id, r->version);
    lm::model::RunnerServer server(registry.load_artifact(spec.artifact_digest));
    server.start(r->host, r->port);
    g.emit(Json{{"handle", server.handle()}}, "runner for " + spec.model_id + " v" + std::to_string(spec.version) +
                                                  " at " + server.handle());
    wait_for_shutdown(signals);
    server.stop();
  });
}

// --- traffic --------------------------------------------------------------------

void add_traffic(CLI::App& app, Globals& g) {
  struct TrafficOpts {
    std::string url, task, cohort, policy = "compute_on_miss";
    std::size_t requests = 1000, feedback = 200;
    std::optional<std::uint64_t> seed;
  };
  auto o = std::make_shared<TrafficOpts>();
  auto* traffic = app.add_subcommand("traffic", "Synthetic client traffic");
  traffic->require_subcommand(1);
  auto* sim = traffic->add_subcommand("simulate", "Replay prediction requests and submit outcome feedback");
  sim->add_option("--url", o->url, "API base URL (default: http://<config host>:<config port>)");
  sim->add_option("--task", o->task, "Prediction task id")->required();
  sim->add_option("--cohort", o->cohort, "Cohort supplying patients, as-of dates and observed outcomes")->required();
  sim->add_option("--requests", o->requests)->capture_default_str();
  sim->add_option("--feedback", o->feedback, "How many predictions receive outcome feedback")->capture_default_str();
  sim->add_option("--policy", o->policy, "precomputed_only or compute_on_miss")->capture_default_str();
  sim->add_option("--seed", o->seed, "Sampling seed (default: config seed)");
  sim->callback([&g, o] {
    const auto ws = g.workspace();
    const auto cohort = ws.load_cohort(o->cohort);
    if (cohort.rows.empty()) throw Error(ErrorCode::empty_cohort, "cohort " + o->cohort + " has no rows");
    const auto url = o->url.empty() ? "http://" + g.cfg.host + ":" + std::to_string(g.cfg.port) : o->url;
    httplib::Client client(url);
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
    httplib::Headers headers;
    if (!g.cfg.api_key.empty()) headers.emplace("X-API-Key", g.cfg.api_key);

    lm::Rng rng(o->seed.value_or(g.cfg.seed));
    std::vector<std::pair<std::string, int>> served;  // request id, observed outcome
    std::map<int, std::size_t> failures;
    std::vector<double> latency_ms;
    for (std::size_t i = 0; i < o->requests; ++i) {
      const auto& row = cohort.rows[rng.below(cohort.rows.size())];
      const Json body{{"task_id", o->task},
                      {"patient_id", row.patient_id},
                      {"as_of_date", row.index_date},
                      {"feature_policy", o->policy}};
      const auto t0 = std::chrono::steady_clock::now();
      auto res = client.Post("/v1/predict", headers, body.dump(), "application/json");
      latency_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      if (!res) {
        ++failures[0];
        continue;
      }
      if (res->status != 200) {
        ++failures[res->status];
        continue;
      }
      // The cohort label is the outcome observed after the as-of date.
      served.emplace_back(Json::parse(res->body).at("request_id").get<std::string>(), row.label);
    }
    std::size_t feedback_ok = 0;
    for (std::size_t i = 0; i < std::min(o->feedback, served.size()); ++i) {
      const Json fb{{"request_id", served[i].first},
                    {"observed_outcome", served[i].second},
                    {"workflow_state", "outcome_observed"}};
      auto res = client.Post("/v1/feedback", headers, fb.dump(), "application/json");
      if (res && (res->status == 200 || res->status == 201)) {
        ++feedback_ok;
      } else {
        ++failures[res ? res->status : 0];
      }
    }
    Json fail = Json::object();
    for (const auto& [status, n] : failures) fail[std::to_string(status)] = n;
    g.emit(Json{{"requests", o->requests},
                {"predictions_ok", served.size()},
                {"feedback_ok", feedback_ok},
                {"failures", fail},
                {"client_p50_ms", percentile(latency_ms, 0.5)},
                {"client_p95_ms", percentile(latency_ms, 0.95)}},
           std::to_string(served.size()) + "/" + std::to_string(o->requests) + " predictions, " +
               std::to_string(feedback_ok) + " feedback records; client latency p50 " +
               fmt(percentile(latency_ms, 0.5), 2) + " ms, p95 " + fmt(percentile(latency_ms, 0.95), 2) + " ms");
    if (!failures.empty()) throw Error(ErrorCode::serving, "traffic had failed calls: " + fail.dump());
  });
}

// --- monitor and provenance ---------------------------------------------------

void add_monitor(CLI::App& app, Globals& g) {
  auto* monitor = app.add_subcommand("monitor", "Model monitoring");
  monitor->require_subcommand(1);
  auto* once = monitor->add_subcommand("run-once", "Evaluate every Production model once");
  once->callback([&g] {
    const auto ws = g.workspace();
    lm::model::ModelRegistry registry(ws.root());
    const lm::inference::PredictionLog predictions(ws.predictions_log());
    const lm::inference::FeedbackLog feedback(ws.feedback_log());
    lm::monitoring::AlertLog alerts(ws.alerts_log());
    lm::monitoring::Monitor m(registry, predictions, feedback, alerts, ws.profiles_dir(), g.cfg.monitor);
    const auto report = m.evaluate_and_notify();
    if (g.json) {
      g.emit(Json(report), "");
      return;
    }
    for (const auto& ev : report.models) {
      std::cout << ev.model_id << " v" << ev.version;
      if (ev.accuracy)
        std::cout << "  auc " << fmt(ev.accuracy->auc) << "  accuracy " << fmt(ev.accuracy->accuracy) << "  n "
                  << ev.accuracy->n;
      std::cout << "\n";
      double worst = 0;
      std::string worst_name;
      for (const auto& f : ev.drift)
        if (f.psi >= worst) {
          worst = f.psi;
          worst_name = f.target;
        }
      if (!ev.drift.empty()) std::cout << "  max psi " << fmt(worst) << " (" << worst_name << ")\n";
      for (const auto& n : ev.notes) std::cout << "  note: " << n << "\n";
    }
    for (const auto& a : report.new_alerts)
      std::cout << "ALERT " << a.alert_id << " " << lm::monitoring::to_string(a.kind) << " " << a.model_id << " v"
                << a.model_version << " " << a.metric_name << " = " << fmt(a.value) << " (threshold "
                << fmt(a.threshold) << "): " << a.suggested_action << "\n";
    std::cout << report.models.size() << " production models, " << report.new_alerts.size() << " new alerts\n";
  });
}

void add_provenance(CLI::App& app, Globals& g) {
  auto* prov = app.add_subcommand("provenance", "Provenance records");
  prov->require_subcommand(1);
  auto digest = std::make_shared<std::string>();
  auto* show = prov->add_subcommand("show", "Resolve a provenance digest into its verified lineage");
  show->add_option("digest", *digest, "Provenance record digest (hex)")->required();
  show->callback([&g, digest] {
    lm::model::ModelRegistry registry(g.cfg.data_root);
    lm::features::FeatureRepository repo(g.cfg.data_root);
    const auto lineage = registry.get_lineage(lm::Digest::from_hex(*digest), &repo.catalog());
    const Json out(lineage);
    g.emit(out, out.dump(2));
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lm: longitudinal model lifecycle (ingest, features, training, registry, serving, monitoring)"};
  app.name("lm");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_flag("--json", g.json, "Structured output, one JSON record per result");
  app.add_option("--config", g.config_path, "Config file (JSON)");
  app.add_option("--data-root", g.data_root, "Data root (overrides LM_DATA_ROOT and the config file)");
  app.parse_complete_callback([&g] { g.resolve(); });

  add_ingest(app, g);
  add_cohort(app, g);
  add_features(app, g);
  add_train(app, g);
  add_registry(app, g);
  add_serve(app, g);
  add_traffic(app, g);
  add_monitor(app, g);
  add_provenance(app, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const lm::PipelineError& e) {
    std::cerr << "error: pipeline failed at " << e.stage() << " (" << lm::to_string(e.cause()) << "): " << e.what()
              << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << lm::to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

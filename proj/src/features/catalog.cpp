// SPDX-License-Identifier: Apache-2.0
#include "lm/features/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <mutex>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"

namespace lm::features {

Digest FeatureDefinition::params_digest() const { return digest(canonical_encode_json(params)); }

bool FeatureDefinition::same_declaration(const FeatureDefinition& o) const {
  return name == o.name && generator_id == o.generator_id &&
         canonical_encode_json(params) == canonical_encode_json(o.params) && dependencies == o.dependencies &&
         value_type == o.value_type && group_id == o.group_id;
}

FeatureCatalog::FeatureCatalog(std::shared_ptr<const GeneratorRegistry> generators,
                               std::optional<std::filesystem::path> file)
    : generators_(std::move(generators)) {
  if (file) {
    read_jsonl(*file, [&](const Json& j) { insert_locked(j.get<FeatureDefinition>()); });
    log_ = std::make_unique<JsonlAppender>(*file);
  }
}

void FeatureCatalog::insert_locked(FeatureDefinition def) {
  auto& latest = latest_[def.name];
  latest = std::max(latest, def.version);
  auto ref = def.ref();
  defs_.emplace(std::move(ref), std::move(def));
}

void FeatureCatalog::check_name_cycle_locked(const FeatureDefinition& draft) const {
  std::set<std::string> visited;
  std::deque<std::string> frontier(draft.dependencies.begin(), draft.dependencies.end());
  while (!frontier.empty()) {
    auto name = std::move(frontier.front());
    frontier.pop_front();
    if (name == draft.name) {
      throw Error(ErrorCode::cycle, "registering '" + draft.name + "' would create a dependency cycle");
    }
    if (!visited.insert(name).second) continue;
    auto it = latest_.find(name);
    if (it == latest_.end()) continue;
    const auto& def = defs_.at(FeatureRef{name, it->second});
    frontier.insert(frontier.end(), def.dependencies.begin(), def.dependencies.end());
  }
}

RegistrationReceipt FeatureCatalog::register_feature(FeatureDefinition draft) {
  if (draft.name.empty()) throw Error(ErrorCode::registration, "feature name must be non-empty");
  const FeatureGenerator* gen = generators_->find(draft.generator_id);
  if (!gen) throw Error(ErrorCode::registration, "unknown generator '" + draft.generator_id + "'");
  if (draft.params.is_null()) draft.params = Json::object();
  gen->validate(draft.params, draft.dependencies);
  if (gen->value_type() != draft.value_type) {
    throw Error(ErrorCode::registration, "generator '" + draft.generator_id + "' produces " +
                                             std::string(to_string(gen->value_type())) + " values");
  }
  std::set<std::string> unique_deps(draft.dependencies.begin(), draft.dependencies.end());
  if (unique_deps.size() != draft.dependencies.size()) {
    throw Error(ErrorCode::registration, "duplicate dependency in '" + draft.name + "'");
  }

  std::unique_lock lock(mutex_);
  draft.dependency_refs.clear();
  for (const auto& dep : draft.dependencies) {
    if (dep == draft.name) throw Error(ErrorCode::cycle, "feature '" + dep + "' depends on itself");
    auto it = latest_.find(dep);
    if (it == latest_.end()) {
      throw Error(ErrorCode::registration, "dependency '" + dep + "' of '" + draft.name + "' is not cataloged");
    }
    const auto& dep_def = defs_.at(FeatureRef{dep, it->second});
    if (gen->id() == "weighted_sum" && dep_def.value_type != ValueType::numeric) {
      throw Error(ErrorCode::registration, "dependency '" + dep + "' is not numeric");
    }
    draft.dependency_refs.push_back(dep_def.ref());
  }
  check_name_cycle_locked(draft);

  auto latest = latest_.find(draft.name);
  if (latest != latest_.end()) {
    const auto& current = defs_.at(FeatureRef{draft.name, latest->second});
    if (current.same_declaration(draft)) return {draft.name, current.version, false};
    draft.version = latest->second + 1;
  } else {
    draft.version = 1;
  }
  if (log_) log_->append(Json(draft));
  RegistrationReceipt receipt{draft.name, draft.version, true};
  insert_locked(std::move(draft));
  return receipt;
}

const FeatureDefinition& FeatureCatalog::get(const FeatureRef& ref) const {
  std::shared_lock lock(mutex_);
  auto it = defs_.find(ref);
  if (it == defs_.end()) throw Error(ErrorCode::not_found, "feature " + ref.label() + " is not cataloged");
  return it->second;
}

const FeatureDefinition& FeatureCatalog::latest(const std::string& name) const {
  std::shared_lock lock(mutex_);
  auto it = latest_.find(name);
  if (it == latest_.end()) throw Error(ErrorCode::not_found, "feature '" + name + "' is not cataloged");
  return defs_.at(FeatureRef{name, it->second});
}

bool FeatureCatalog::contains(const FeatureRef& ref) const {
  std::shared_lock lock(mutex_);
  return defs_.count(ref) > 0;
}

std::vector<FeatureRef> FeatureCatalog::resolve_latest(const std::vector<std::string>& names) const {
  std::vector<FeatureRef> refs;
  for (const auto& n : names) refs.push_back(latest(n).ref());
  return refs;
}

namespace {
std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}
}  // namespace

std::vector<FeatureDefinition> FeatureCatalog::search(const std::string& query) const {
  const std::string q = lower(query);
  std::shared_lock lock(mutex_);
  std::vector<FeatureDefinition> out;
  for (const auto& [ref, def] : defs_) {
    if (q.empty() || lower(def.name).find(q) != std::string::npos ||
        lower(def.generator_id).find(q) != std::string::npos ||
        (def.group_id && lower(*def.group_id).find(q) != std::string::npos)) {
      out.push_back(def);
    }
  }
  return out;
}

std::size_t FeatureCatalog::size() const {
  std::shared_lock lock(mutex_);
  return defs_.size();
}

namespace {

struct Graph {
  std::vector<FeatureRef> nodes;                 // sorted
  std::vector<std::vector<std::size_t>> deps;    // node -> its dependencies
  std::vector<std::optional<std::string>> group;
};

/// Kahn order; throws on cycles.
std::vector<std::size_t> topo_order(const Graph& g) {
  const std::size_t n = g.nodes.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> dependents(n);
  for (std::size_t i = 0; i < n; ++i) {
    indegree[i] = g.deps[i].size();
    for (auto d : g.deps[i]) dependents[d].push_back(i);
  }
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    auto i = ready.front();
    ready.pop_front();
    order.push_back(i);
    for (auto d : dependents[i])
      if (--indegree[d] == 0) ready.push_back(d);
  }
  if (order.size() != n) throw Error(ErrorCode::cycle, "feature dependency cycle");
  return order;
}

/// Longest-path levels with per-node floors.
std::vector<std::size_t> levels_with_floor(const Graph& g, const std::vector<std::size_t>& order,
                                           const std::vector<std::size_t>& floor) {
  std::vector<std::size_t> level(g.nodes.size(), 0);
  for (auto i : order) {
    std::size_t l = floor[i];
    for (auto d : g.deps[i]) l = std::max(l, level[d] + 1);
    level[i] = l;
  }
  return level;
}

/// Raises group members to a common level until stable. Returns nullopt when
/// the groups' constraints cannot be met together.
std::optional<std::vector<std::size_t>> co_stage(const Graph& g, const std::vector<std::size_t>& order,
                                                 const std::vector<std::vector<std::size_t>>& groups) {
  const std::size_t n = g.nodes.size();
  std::vector<std::size_t> floor(n, 0);
  for (std::size_t round = 0; round <= n * n + 1; ++round) {
    auto level = levels_with_floor(g, order, floor);
    bool changed = false;
    for (const auto& members : groups) {
      std::size_t top = 0;
      for (auto m : members) top = std::max(top, level[m]);
      for (auto m : members) {
        if (floor[m] < top) {
          floor[m] = top;
          changed = true;
        }
      }
    }
    if (!changed) return level;
    for (auto l : level)
      if (l > n) return std::nullopt;
  }
  return std::nullopt;
}

bool reaches(const Graph& g, std::size_t from, std::size_t to) {
  std::vector<bool> seen(g.nodes.size(), false);
  std::vector<std::size_t> stack{from};
  while (!stack.empty()) {
    auto i = stack.back();
    stack.pop_back();
    if (i == to) return true;
    if (seen[i]) continue;
    seen[i] = true;
    for (auto d : g.deps[i]) stack.push_back(d);
  }
  return false;
}

}  // namespace

ExecutionStages FeatureCatalog::resolve_execution_order(const std::vector<FeatureRef>& refs) const {
  Graph g;
  {
    std::shared_lock lock(mutex_);
    std::set<FeatureRef> closure;
    std::deque<FeatureRef> frontier(refs.begin(), refs.end());
    while (!frontier.empty()) {
      auto ref = frontier.front();
      frontier.pop_front();
      if (closure.count(ref)) continue;
      auto it = defs_.find(ref);
      if (it == defs_.end()) throw Error(ErrorCode::not_found, "feature " + ref.label() + " is not cataloged");
      closure.insert(ref);
      for (const auto& d : it->second.dependency_refs) frontier.push_back(d);
    }
    g.nodes.assign(closure.begin(), closure.end());
    std::map<FeatureRef, std::size_t> index;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) index[g.nodes[i]] = i;
    g.deps.resize(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto& def = defs_.at(g.nodes[i]);
      for (const auto& d : def.dependency_refs) g.deps[i].push_back(index.at(d));
      g.group.push_back(def.group_id);
    }
  }

  const auto order = topo_order(g);
  std::map<std::string, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (g.group[i]) by_group[*g.group[i]].push_back(i);

  std::vector<std::vector<std::size_t>> accepted;
  for (const auto& [group, members] : by_group) {
    if (members.size() < 2) continue;
    bool independent = true;
    for (std::size_t a = 0; a < members.size() && independent; ++a)
      for (std::size_t b = 0; b < members.size() && independent; ++b)
        if (a != b && reaches(g, members[a], members[b])) independent = false;
    if (!independent) continue;
    auto trial = accepted;
    trial.push_back(members);
    if (co_stage(g, order, trial)) accepted = std::move(trial);
  }
  const auto level = accepted.empty() ? levels_with_floor(g, order, std::vector<std::size_t>(g.nodes.size(), 0))
                                      : *co_stage(g, order, accepted);

  std::map<std::size_t, std::vector<FeatureRef>> by_level;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) by_level[level[i]].push_back(g.nodes[i]);
  ExecutionStages stages;
  for (auto& [_, members] : by_level) {
    std::sort(members.begin(), members.end());
    stages.push_back(std::move(members));
  }
  return stages;
}

ExecutionStages FeatureCatalog::resolve_execution_order(const std::vector<std::string>& names) const {
  return resolve_execution_order(resolve_latest(names));
}

std::set<std::string> FeatureCatalog::dependents_closure(const std::string& name) const {
  std::shared_lock lock(mutex_);
  if (!latest_.count(name)) throw Error(ErrorCode::not_found, "feature '" + name + "' is not cataloged");
  std::map<std::string, std::set<std::string>> dependents;
  for (const auto& [ref, def] : defs_)
    for (const auto& d : def.dependencies) dependents[d].insert(def.name);
  std::set<std::string> out;
  std::deque<std::string> frontier{name};
  while (!frontier.empty()) {
    auto n = frontier.front();
    frontier.pop_front();
    if (!out.insert(n).second) continue;
    for (const auto& d : dependents[n]) frontier.push_back(d);
  }
  return out;
}

void to_json(Json& j, const FeatureRef& r) { j = Json::array({r.name, r.version}); }
void from_json(const Json& j, FeatureRef& r) {
  r.name = j.at(0).get<std::string>();
  r.version = j.at(1).get<int>();
}

void to_json(Json& j, const FeatureDefinition& d) {
  j = Json{{"name", d.name},
           {"version", d.version},
           {"generator_id", d.generator_id},
           {"params", d.params},
           {"dependencies", d.dependencies},
           {"value_type", std::string(to_string(d.value_type))},
           {"group_id", d.group_id ? Json(*d.group_id) : Json(nullptr)},
           {"dependency_refs", d.dependency_refs}};
}

void from_json(const Json& j, FeatureDefinition& d) {
  d.name = j.at("name").get<std::string>();
  d.version = j.value("version", 0);
  d.generator_id = j.at("generator_id").get<std::string>();
  d.params = j.value("params", Json::object());
  d.dependencies = j.value("dependencies", std::vector<std::string>{});
  d.value_type = parse_value_type(j.value("value_type", std::string("numeric")));
  auto g = j.find("group_id");
  d.group_id = (g == j.end() || g->is_null()) ? std::nullopt : std::optional<std::string>(g->get<std::string>());
  d.dependency_refs = j.value("dependency_refs", std::vector<FeatureRef>{});
}

}  // namespace lm::features

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "lm/core/jsonl.hpp"
#include "lm/features/generators.hpp"

namespace lm::features {

struct FeatureRef {
  std::string name;
  int version = 0;

  std::string label() const { return name + "@v" + std::to_string(version); }
  auto operator<=>(const FeatureRef&) const = default;
};

struct FeatureDefinition {
  std::string name;
  int version = 0;  // assigned by the catalog
  std::string generator_id;
  Json params = Json::object();
  std::vector<std::string> dependencies;
  ValueType value_type = ValueType::numeric;
  std::optional<std::string> group_id;
  /// Versions of `dependencies` pinned when this version was registered.
  std::vector<FeatureRef> dependency_refs;

  FeatureRef ref() const { return {name, version}; }
  Digest params_digest() const;
  /// Equality of everything a user declares (version and pins excluded).
  bool same_declaration(const FeatureDefinition& other) const;
};

struct RegistrationReceipt {
  std::string name;
  int version = 0;
  bool created = false;
};

using ExecutionStages = std::vector<std::vector<FeatureRef>>;

/// Versioned feature catalog. Definitions are never modified or removed, so
/// references returned by `get` stay valid for the catalog's lifetime.
/// Reads take a shared lock; registrations are serialized.
class FeatureCatalog {
 public:
  /// When `file` is set, existing entries are replayed from it and every new
  /// version is appended to it.
  FeatureCatalog(std::shared_ptr<const GeneratorRegistry> generators, std::optional<std::filesystem::path> file);

  /// Identical re-registration returns the existing version; any declared
  /// change creates version latest+1. Unknown generators and bad params throw
  /// `Error(registration)`; a dependency cycle over feature names throws
  /// `Error(cycle)`.
  RegistrationReceipt register_feature(FeatureDefinition draft);

  /// Throws `Error(not_found)`.
  const FeatureDefinition& get(const FeatureRef& ref) const;
  const FeatureDefinition& latest(const std::string& name) const;
  bool contains(const FeatureRef& ref) const;
  /// Latest version of each name, in name order.
  std::vector<FeatureRef> resolve_latest(const std::vector<std::string>& names) const;

  /// Case-insensitive substring match on name, generator id or group id;
  /// all versions, ordered by (name, version). Empty query lists everything.
  std::vector<FeatureDefinition> search(const std::string& query) const;
  std::size_t size() const;

  /// Topological stages over the dependency closure of `refs`. Features in a
  /// stage are mutually independent; members of a group share a stage when
  /// the dependency structure allows it.
  ExecutionStages resolve_execution_order(const std::vector<FeatureRef>& refs) const;
  ExecutionStages resolve_execution_order(const std::vector<std::string>& names) const;

  /// `name` plus every feature name that transitively depends on it (any version).
  std::set<std::string> dependents_closure(const std::string& name) const;

  const GeneratorRegistry& generators() const { return *generators_; }

 private:
  void insert_locked(FeatureDefinition def);
  void check_name_cycle_locked(const FeatureDefinition& draft) const;

  std::shared_ptr<const GeneratorRegistry> generators_;
  std::unique_ptr<JsonlAppender> log_;
  mutable std::shared_mutex mutex_;
  std::map<FeatureRef, FeatureDefinition> defs_;
  std::map<std::string, int, std::less<>> latest_;
};

void to_json(Json& j, const FeatureRef& r);
void from_json(const Json& j, FeatureRef& r);
void to_json(Json& j, const FeatureDefinition& d);
void from_json(const Json& j, FeatureDefinition& d);

}  // namespace lm::features

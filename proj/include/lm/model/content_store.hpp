// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "lm/core/digest.hpp"

namespace lm::model {

/// Blob store addressed by SHA-256, laid out as `<root>/sha256/<xx>/<hex>`.
/// Without a root the blobs live in memory. Writes are atomic and blobs are
/// never overwritten once present.
class ContentStore {
 public:
  explicit ContentStore(std::optional<std::filesystem::path> root = std::nullopt);

  /// Stores `bytes` under their own digest.
  Digest put(const std::string& bytes);
  /// Stores `bytes` under a caller-computed key (records whose identity
  /// excludes some of their bytes). Keeps the existing blob if present.
  void put_as(const Digest& key, const std::string& bytes);

  bool contains(const Digest& key) const;
  /// Reads and checks that the bytes hash to `key`. Throws `Error(not_found)`
  /// or `Error(corruption)`.
  std::string get(const Digest& key) const;
  /// Reads without the hash check; `put_as` blobs are verified by their owner.
  std::string get_unverified(const Digest& key) const;

  std::optional<std::filesystem::path> path_for(const Digest& key) const;

 private:
  std::optional<std::filesystem::path> root_;
  mutable std::mutex mutex_;
  std::map<Digest, std::string> memory_;
};

}  // namespace lm::model

// SPDX-License-Identifier: Apache-2.0
#include "lm/model/content_store.hpp"

#include "lm/core/error.hpp"
#include "lm/core/jsonl.hpp"

namespace lm::model {

namespace fs = std::filesystem;

ContentStore::ContentStore(std::optional<fs::path> root) : root_(std::move(root)) {
  if (root_) fs::create_directories(*root_ / "sha256");
}

std::optional<fs::path> ContentStore::path_for(const Digest& key) const {
  if (!root_) return std::nullopt;
  return *root_ / "sha256" / key.hex().substr(0, 2) / key.hex();
}

Digest ContentStore::put(const std::string& bytes) {
  Digest d = digest(bytes);
  put_as(d, bytes);
  return d;
}

void ContentStore::put_as(const Digest& key, const std::string& bytes) {
  if (key.empty()) throw Error(ErrorCode::integrity, "content key is empty");
  std::lock_guard lock(mutex_);
  if (!root_) {
    memory_.emplace(key, bytes);
    return;
  }
  const auto p = *path_for(key);
  if (fs::exists(p)) return;
  fs::create_directories(p.parent_path());
  write_file_atomic(p, bytes);
}

bool ContentStore::contains(const Digest& key) const {
  if (key.empty()) return false;
  std::lock_guard lock(mutex_);
  if (!root_) return memory_.count(key) > 0;
  return fs::exists(*path_for(key));
}

std::string ContentStore::get_unverified(const Digest& key) const {
  if (key.empty()) throw Error(ErrorCode::not_found, "empty content digest");
  std::lock_guard lock(mutex_);
  if (!root_) {
    auto it = memory_.find(key);
    if (it == memory_.end()) throw Error(ErrorCode::not_found, "no content for digest " + key.hex());
    return it->second;
  }
  const auto p = *path_for(key);
  if (!fs::exists(p)) throw Error(ErrorCode::not_found, "no content for digest " + key.hex());
  return read_file(p);
}

std::string ContentStore::get(const Digest& key) const {
  auto bytes = get_unverified(key);
  if (digest(bytes) != key) throw Error(ErrorCode::corruption, "content for " + key.hex() + " fails verification");
  return bytes;
}

}  // namespace lm::model

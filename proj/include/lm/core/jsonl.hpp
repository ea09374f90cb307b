// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lm {

/// Calls `on_record` for every non-empty line of a JSON-lines file. A missing
/// file is treated as empty. A truncated final line (torn write) is skipped;
/// malformed lines elsewhere throw `Error(corruption)`.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const nlohmann::json&)>& on_record);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Writes records (canonically encoded) to `path` atomically via tmp + rename.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

/// Writes text atomically via tmp + rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// Append-only JSON-lines log. Each append writes one canonical line and
/// flushes it; appends from threads of one process are serialized.
class JsonlAppender {
 public:
  explicit JsonlAppender(std::filesystem::path path);

  void append(const nlohmann::json& record);
  void append_all(const std::vector<nlohmann::json>& records);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace lm

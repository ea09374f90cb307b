// SPDX-License-Identifier: Apache-2.0
#include "lm/core/jsonl.hpp"

#include <sstream>

#include <unistd.h>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"

namespace lm {

namespace fs = std::filesystem;

void read_jsonl(const fs::path& path, const std::function<void(const nlohmann::json&)>& on_record) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded()) {
      if (in.eof()) break;  // torn tail from an interrupted append
      throw Error(ErrorCode::corruption,
                  path.string() + ":" + std::to_string(line_no) + ": malformed record");
    }
    on_record(record);
  }
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::vector<nlohmann::json> out;
  read_jsonl(path, [&](const nlohmann::json& r) { out.push_back(r); });
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_jsonl(const fs::path& path, const std::vector<nlohmann::json>& records) {
  std::string bytes;
  for (const auto& r : records) {
    bytes += canonical_encode_json(r);
    bytes.push_back('\n');
  }
  write_file_atomic(path, bytes);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

JsonlAppender::JsonlAppender(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::io, "cannot open " + path_.string() + " for append");
}

void JsonlAppender::append(const nlohmann::json& record) {
  std::string line = canonical_encode_json(record);
  line.push_back('\n');
  std::lock_guard lock(mutex_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw Error(ErrorCode::io, "append to " + path_.string() + " failed");
}

void JsonlAppender::append_all(const std::vector<nlohmann::json>& records) {
  std::string bytes;
  for (const auto& r : records) {
    bytes += canonical_encode_json(r);
    bytes.push_back('\n');
  }
  std::lock_guard lock(mutex_);
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out_.flush();
  if (!out_) throw Error(ErrorCode::io, "append to " + path_.string() + " failed");
}

}  // namespace lm

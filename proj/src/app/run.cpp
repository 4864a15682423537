#include "soilref/app/run.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "soilref/core/io.hpp"

namespace soilref::app {

void Log::info(const std::string& msg) const {
  if (!quiet) fmt::print(stderr, "{}\n", msg);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

nlohmann::json hash_tree(const fs::path& dir, const std::function<bool(const fs::path&)>& skip) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir);
    if (skip && skip(rel)) continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  nlohmann::json out = nlohmann::json::object();
  for (const auto& rel : files) out[rel.generic_string()] = io::sha256_file(dir / rel);
  return out;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.parent_path() / fmt::format(".{}.tmp-{}", path.filename().string(), ::getpid());
  io::write_text(tmp, text);
  fs::rename(tmp, path);
}

StagedRun::StagedRun(fs::path out, std::string command) : out_(std::move(out)) {
  if (out_.empty()) throw std::invalid_argument("no output directory given (--out)");
  out_ = fs::absolute(out_).lexically_normal();
  if (out_.filename().empty()) out_ = out_.parent_path();
  if (fs::exists(out_)) {
    if (!fs::is_directory(out_)) throw std::runtime_error("output path exists and is not a directory: " + out_.string());
    if (!fs::is_empty(out_) && !fs::exists(out_ / "run.json")) {
      throw std::runtime_error("refusing to replace non-empty directory without run.json: " + out_.string());
    }
  }
  fs::create_directories(out_.parent_path());
  staging_ = out_.parent_path() / fmt::format(".{}.staging-{}", out_.filename().string(), ::getpid());
  fs::remove_all(staging_);
  fs::create_directories(staging_);
  manifest_["command"] = std::move(command);
  manifest_["started"] = utc_now();
}

StagedRun::~StagedRun() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void StagedRun::commit() {
  manifest_["outputs"] = hash_tree(staging_, [](const fs::path& rel) { return rel == "run.json"; });
  manifest_["output_dir"] = out_.string();
  manifest_["finished"] = utc_now();
  io::write_text(staging_ / "run.json", manifest_.dump(2) + "\n");
  if (fs::exists(out_)) fs::remove_all(out_);
  fs::rename(staging_, out_);
  committed_ = true;
}

}  // namespace soilref::app

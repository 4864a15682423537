#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

namespace soilref::app {

namespace fs = std::filesystem;

/// Progress output on stderr unless quiet.
struct Log {
  bool quiet = false;
  void info(const std::string& msg) const;
};

/// Output directory written through a staging directory and promoted with a
/// rename once complete. commit() hashes every staged file into run.json
/// (the run manifest). An uncommitted stage is removed on destruction.
///
/// An existing output directory is replaced only when it is empty or holds a
/// previous run.json; anything else is refused.
class StagedRun {
 public:
  StagedRun(fs::path out, std::string command);
  ~StagedRun();
  StagedRun(const StagedRun&) = delete;
  StagedRun& operator=(const StagedRun&) = delete;

  const fs::path& dir() const { return staging_; }
  const fs::path& out() const { return out_; }
  nlohmann::json& manifest() { return manifest_; }

  void commit();

 private:
  fs::path out_;
  fs::path staging_;
  nlohmann::json manifest_;
  bool committed_ = false;
};

/// UTC timestamp, ISO 8601 with seconds.
std::string utc_now();

/// Relative path -> sha256 of every regular file under dir, sorted by path.
nlohmann::json hash_tree(const fs::path& dir, const std::function<bool(const fs::path&)>& skip = {});

/// Writes via a sibling temporary file and rename.
void write_text_atomic(const fs::path& path, const std::string& text);

}  // namespace soilref::app

#pragma once

#include "r3d/config.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace r3d {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,     // bad command line or config
  kExitData = 2,      // missing, stale or malformed inputs
  kExitInternal = 3,  // an invariant check failed
};

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, ExitCode code, const std::string& message);
  const std::string& stage() const { return stage_; }
  ExitCode code() const { return code_; }

 private:
  std::string stage_;
  ExitCode code_;
};

const std::vector<std::string>& StageNames();

/// 64-bit FNV-1a.
std::uint64_t Fnv1a(const void* data, std::size_t size,
                    std::uint64_t hash = 0xcbf29ce484222325ull);
std::uint64_t HashFile(const std::filesystem::path& path);

struct StageOptions {
  bool force = false;
  std::ostream* log = nullptr;
};

enum class StageOutcome { kRan, kSkipped };

/// Runs one stage. Each stage records a manifest (input and output content
/// hashes) under `<output>/manifests`. A rerun with unchanged inputs and
/// intact outputs is skipped; existing outputs that do not match the
/// current inputs raise StageError unless `force` is set.
/// Throws StageError for every failure.
StageOutcome RunStage(const std::string& stage, const RunConfig& config,
                      const StageOptions& options = {});

/// Output locations inside `<output>`.
std::filesystem::path DetectionsPath(const RunConfig& c, const std::string& detector);
std::filesystem::path MapPath(const RunConfig& c);
std::filesystem::path LabelsPath(const RunConfig& c);
std::filesystem::path ReportCsvPath(const RunConfig& c, const std::string& detector);
std::filesystem::path PairCsvPath(const RunConfig& c, const std::string& detector);
std::filesystem::path ReportTextPath(const RunConfig& c);
std::filesystem::path PlotDataPath(const RunConfig& c);

/// Name under which label sets are evaluated and reported.
inline constexpr const char* kLabelsName = "labels";

}  // namespace r3d

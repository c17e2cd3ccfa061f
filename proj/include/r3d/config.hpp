#pragma once

#include "r3d/evaluator.hpp"
#include "r3d/labeler.hpp"
#include "r3d/pipeline.hpp"
#include "r3d/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace r3d {

struct RunConfig {
  // [run]
  std::filesystem::path dataset = "dataset";
  std::filesystem::path output = "output";
  std::uint64_t seed = 1;
  int threads = 1;

  // [synth]
  SceneSpec scene;  // scene.seed mirrors `seed`
  PhotographerConfig photographer;
  CameraIntrinsics intrinsics = DefaultIntrinsics();
  double validation_voxel_size = 0.01;

  // [detect]
  DetectorSuite detectors;
  std::filesystem::path external_detections;  // empty = none

  // [paint]
  double voxel_size = 0.01;
  PaintParams paint;
  std::vector<std::string> painters;  // empty = every detected name

  // [label]
  LabelParams label;
  std::vector<std::string> label_sources;  // empty = painters
  std::string fallback_detector = kHarris;  // "none" disables

  // [eval]
  EvalParams eval;
  std::vector<std::string> eval_detectors;  // empty = every detector + labels
};

/// One message per problem, prefixed with "line N: " when it comes from the
/// config text.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
/// Absent keys keep their defaults. Throws ConfigError listing every unknown
/// key, malformed value and range violation found.
RunConfig ParseConfig(const std::string& text);
RunConfig LoadConfig(const std::filesystem::path& path);

/// Applies one `section.key=value` override.
void SetConfigValue(RunConfig& config, const std::string& dotted_key,
                    const std::string& value);

/// Range and consistency checks; empty when valid.
std::vector<std::string> ValidateConfig(const RunConfig& config);

/// Canonical text form with every key; parses back to an identical config.
std::string FormatConfig(const RunConfig& config);
/// Only the named section, in canonical form.
std::string FormatConfigSection(const RunConfig& config,
                                const std::string& section);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace r3d

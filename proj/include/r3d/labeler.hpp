#pragma once

#include "r3d/detectors.hpp"
#include "r3d/geometry.hpp"
#include "r3d/raster.hpp"
#include "r3d/voxelmap.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace r3d {

/// Label priority: 3 = map and detector, 2 = map only,
/// 1 = detector only, 0 = neither.
using PriorityGrid = Raster<std::uint8_t>;

enum class LabelProvenance : std::uint8_t { kMapOnly, kDetectorOnly, kBoth, kFallback };

std::string_view ProvenanceName(LabelProvenance p);
LabelProvenance ParseProvenance(std::string_view name);

struct Label {
  Detection detection;
  LabelProvenance provenance = LabelProvenance::kBoth;

  bool operator==(const Label&) const = default;
};

struct LabelSet {
  int frame_index = 0;
  std::vector<Label> labels;

  bool operator==(const LabelSet&) const = default;
};

struct LabelParams {
  int count_kernel = 9;           // erosion and box blur of the counting map
  double min_count = 1.0;         // divisor guard for the mean score map
  double dog_sigma1 = 1.0;
  double dog_sigma2 = 1.6;
  double peak_min = 0.01;         // DoG peak floor for map candidates
  double near_reject_m = 0.5;     // map candidates closer than this are dropped
  int coincidence_px = 1;         // D_s / D_a match tolerance (Chebyshev)
  double priority_sigma = 1.0;    // blur applied to C * S
  int maxima_radius = 2;
  double score_threshold = 0.05;
  int view_threshold = 10;
  double max_range_m = 20.0;
};

struct ScoreAndCount {
  ScoreGrid score;
  CountGrid count;
};

/// Per-pixel first-hit score and view count; misses give (0, 0).
ScoreAndCount RenderScoreAndCount(const VoxelMap& map,
                                  const CameraIntrinsics& intr,
                                  const Pose& pose, double max_range);

/// ErodeMin(k) followed by BoxBlur(k).
CountGrid SmoothCount(const CountGrid& count, int kernel = 9);

struct MeanScore {
  ScoreGrid mean;
  Raster<std::uint8_t> below_min_count;  // 1 where the guard was applied
};

MeanScore ComputeMeanScore(const ScoreGrid& score,
                           const CountGrid& smoothed_count, double min_count);

std::vector<Detection> MapCandidates(const ScoreGrid& mean,
                                     const DepthMap& depth,
                                     const LabelParams& params = {});

PriorityGrid BuildPriorityMap(std::span<const Detection> map_candidates,
                              std::span<const Detection> detector_hits,
                              int width, int height, int tolerance_px = 1);

/// Blurs C * S, extracts maxima, reassigns S at each peak and thresholds.
std::vector<Detection> FilterDoublePoints(const PriorityGrid& priority,
                                          const ScoreGrid& mean,
                                          const LabelParams& params = {});

/// Replaces labels inside the low-view region (raw count < threshold) by the
/// fallback detections that fall there.
LabelSet ApplyViewFallback(int frame_index, std::span<const Label> labels,
                           const CountGrid& raw_count,
                           std::span<const Detection> fallback,
                           int view_threshold = 10);

struct LabelInputs {
  int frame_index = 0;
  CameraIntrinsics intrinsics;
  Pose pose;
  const DepthMap* depth = nullptr;
  std::span<const DetectionSet> detector_sets;
  std::span<const Detection> fallback;
};

LabelSet GenerateLabels(const VoxelMap& map, const LabelInputs& inputs,
                        const LabelParams& params = {});

/// `frame_index,x,y,confidence,provenance` per line.
void WriteLabels(const std::filesystem::path& path,
                 std::span<const LabelSet> sets);
std::vector<LabelSet> ReadLabels(const std::filesystem::path& path);

}  // namespace r3d

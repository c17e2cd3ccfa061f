#pragma once

#include "r3d/detectors.hpp"
#include "r3d/geometry.hpp"
#include "r3d/raster.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace r3d {

inline constexpr int kHistogramBins = 10;  // distances 0..9; 10+ is `unmatched`

struct EvalParams {
  int frame_stride = 30;
  double min_overlap = 0.10;
  double eps_floor_m = 0.05;
  double eps_rel = 0.02;
  std::size_t max_detections = 2000;
  double nms_radius = 2.0;
  int max_distance = 10;
  int overlap_sample_stride = 4;
};

/// Depth-consistency tolerance for a point at depth z.
inline double DepthTolerance(double z, const EvalParams& p) {
  return std::max(p.eps_floor_m, p.eps_rel * z);
}

/// The per-frame inputs of the benchmark. Frames share intrinsics.
struct FrameView {
  int frame_index = 0;
  Pose pose;
  const DepthMap* depth = nullptr;
};

struct FramePair {
  int query = 0;      // position in the frame list
  int candidate = 0;
  double overlap = 0.0;

  bool operator==(const FramePair&) const = default;
};

struct DistanceHistogram {
  std::array<std::uint64_t, kHistogramBins> bins{};
  std::uint64_t unmatched = 0;
  std::uint64_t visible_queries = 0;

  DistanceHistogram& operator+=(const DistanceHistogram& other);
  bool operator==(const DistanceHistogram&) const = default;
};

/// Per-pixel rounded distance to the nearest candidate, capped at max_r.
using DistanceGrid = Raster<std::uint8_t>;

/// Fraction of sampled valid-depth candidate pixels that land inside the
/// query image in front of the camera and agree with the query depth.
double FrameOverlap(const CameraIntrinsics& intr, const FrameView& candidate,
                    const FrameView& query, int sample_stride,
                    const EvalParams& params);

/// Every `frame_stride`-th frame, all ordered pairs with overlap >= min.
std::vector<FramePair> SelectPairs(const CameraIntrinsics& intr,
                                   std::span<const FrameView> frames,
                                   const EvalParams& params);

struct Backprojected {
  double x = 0.0;
  double y = 0.0;
  bool visible = false;
};

/// Moves candidate detections into the query view, flagging occluded,
/// out-of-view, and depth-inconsistent ones.
std::vector<Backprojected> BackprojectDetections(
    std::span<const Detection> detections, const DepthMap& candidate_depth,
    const CameraIntrinsics& intr, const RelativeTransform& candidate_to_query,
    const DepthMap& query_depth, const EvalParams& params);

DistanceGrid ComputeDistanceMap(std::span<const Detection> candidates,
                                int width, int height, int max_r = 10);
/// Rounded Euclidean length for an integer squared distance.
int RoundedDistance(int squared);

/// Histogram of query detections against kept candidate backprojections.
/// `query_visible[i]` says whether query detection i is seen by the candidate.
DistanceHistogram PairHistogram(std::span<const Detection> query_detections,
                                std::span<const Backprojected> backprojected,
                                std::span<const std::uint8_t> query_visible,
                                int width, int height, int max_r = 10);

/// Full pair evaluation: both backprojections plus the histogram. The
/// detection lists must already be capped (see CapDetections).
DistanceHistogram EvaluatePair(const CameraIntrinsics& intr,
                               const FrameView& query,
                               std::span<const Detection> query_detections,
                               const FrameView& candidate,
                               std::span<const Detection> candidate_detections,
                               const EvalParams& params);

std::vector<Detection> CapDetections(std::span<const Detection> detections,
                                     const EvalParams& params);

struct Report {
  std::array<double, kHistogramBins + 1> mean_count{};    // last = 10+
  std::array<double, kHistogramBins + 1> mean_percent{};  // last = 10+
  std::size_t pair_count = 0;
  std::size_t percent_pairs = 0;  // pairs with at least one visible query
  double repeatable_0_3 = 0.0;    // sum of mean counts in bins 0..3
};

class EvaluatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Report Aggregate(std::span<const DistanceHistogram> histograms);

/// `bin,mean_count,mean_percent` CSV plus a JSON summary next to it.
void ExportReport(const Report& report, const std::filesystem::path& csv_path,
                  const std::filesystem::path& summary_path,
                  const EvalParams& params, const std::string& detector);
Report ReadReportCsv(const std::filesystem::path& csv_path);

void WritePairHistograms(const std::filesystem::path& path,
                         std::span<const FramePair> pairs,
                         std::span<const FrameView> frames,
                         std::span<const DistanceHistogram> histograms);

}  // namespace r3d

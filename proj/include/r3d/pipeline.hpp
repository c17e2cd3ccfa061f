#pragma once

#include "r3d/detectors.hpp"
#include "r3d/evaluator.hpp"
#include "r3d/labeler.hpp"
#include "r3d/synth.hpp"
#include "r3d/voxelmap.hpp"

#include <map>
#include <string>
#include <vector>

namespace r3d {

inline constexpr const char* kHarris = "harris";
inline constexpr const char* kShiTomasi = "shi_tomasi";
inline constexpr const char* kFast = "fast";
inline constexpr const char* kDog = "dog";

/// Names of the natively implemented detectors, in a fixed order.
const std::vector<std::string>& NativeDetectorNames();

struct DetectorSuite {
  std::vector<std::string> enabled = NativeDetectorNames();
  HarrisParams harris;
  ShiTomasiParams shi_tomasi;
  FastParams fast;
  DogParams dog;
};

/// Runs one native detector by name; throws std::invalid_argument otherwise.
std::vector<Detection> RunDetector(const std::string& name,
                                   const GrayImage& image,
                                   const DetectorSuite& suite);

/// Detection sets keyed by detector name, each holding one set per frame
/// in frame-list order.
using DetectionTable = std::map<std::string, std::vector<DetectionSet>>;

DetectionTable DetectAll(const std::vector<RenderedFrame>& frames,
                         const DetectorSuite& suite, int threads);

/// Regroups loose sets (e.g. from a detection file) into a table aligned with
/// `frames`; frames without detections get empty sets.
DetectionTable TableFromSets(const std::vector<DetectionSet>& sets,
                             const std::vector<RenderedFrame>& frames);
std::vector<DetectionSet> SetsFromTable(const DetectionTable& table);

struct PaintParams {
  double max_range_m = 20.0;
  int visibility_stride = 1;
};

struct PaintSummary {
  std::size_t sets = 0;
  std::size_t painted = 0;
  std::size_t missed = 0;
};

/// Paints every 1/N-normalized set of every painting detector and runs one
/// visibility pass per frame. Frame-parallel; the result is independent of
/// `threads` and frame order.
PaintSummary PaintAll(VoxelMap& map, const std::vector<RenderedFrame>& frames,
                      const DetectionTable& table,
                      const std::vector<std::string>& painters,
                      const PaintParams& params, int threads);

/// Labels every frame. `fallback` names a table entry used in low-view
/// regions; empty means none.
std::vector<LabelSet> LabelAll(const VoxelMap& map,
                               const std::vector<RenderedFrame>& frames,
                               const DetectionTable& table,
                               const std::vector<std::string>& label_sources,
                               const std::string& fallback,
                               const LabelParams& params, int threads);

struct Evaluation {
  std::vector<FramePair> pairs;
  std::vector<DistanceHistogram> histograms;
  Report report;
};

std::vector<FrameView> MakeViews(const std::vector<RenderedFrame>& frames);

/// Caps each frame's detections, then evaluates the given pairs.
std::vector<DistanceHistogram> EvaluatePairs(
    const CameraIntrinsics& intr, const std::vector<FrameView>& views,
    const std::vector<std::vector<Detection>>& detections,
    const std::vector<FramePair>& pairs, const EvalParams& params, int threads);

/// Pair selection, evaluation and aggregation for one detector.
/// Throws EvaluatorError when fewer than two frames survive the stride.
Evaluation EvaluateDetector(const CameraIntrinsics& intr,
                            const std::vector<RenderedFrame>& frames,
                            const std::vector<std::vector<Detection>>& detections,
                            const EvalParams& params, int threads);

}  // namespace r3d

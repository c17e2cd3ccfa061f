#include "r3d/pipeline.hpp"

#include "r3d/parallel.hpp"

#include <stdexcept>

namespace r3d {

const std::vector<std::string>& NativeDetectorNames() {
  static const std::vector<std::string> names = {kHarris, kShiTomasi, kFast, kDog};
  return names;
}

std::vector<Detection> RunDetector(const std::string& name,
                                   const GrayImage& image,
                                   const DetectorSuite& suite) {
  if (name == kHarris) return DetectHarris(image, suite.harris);
  if (name == kShiTomasi) return DetectShiTomasi(image, suite.shi_tomasi);
  if (name == kFast) return DetectFast(image, suite.fast);
  if (name == kDog) return DetectDog(image, suite.dog);
  throw std::invalid_argument("unknown detector '" + name + "'");
}

DetectionTable DetectAll(const std::vector<RenderedFrame>& frames,
                         const DetectorSuite& suite, int threads) {
  DetectionTable table;
  for (const std::string& name : suite.enabled) {
    RunDetector(name, GrayImage(1, 1), suite);  // rejects unknown names early
    table[name].resize(frames.size());
  }
  ParallelFor(frames.size(), threads, [&](std::size_t i) {
    for (const std::string& name : suite.enabled) {
      DetectionSet& set = table.at(name)[i];
      set.frame_index = frames[i].frame_index;
      set.detector_name = name;
      set.detections = RunDetector(name, frames[i].image, suite);
    }
  });
  return table;
}

DetectionTable TableFromSets(const std::vector<DetectionSet>& sets,
                             const std::vector<RenderedFrame>& frames) {
  std::map<int, std::size_t> position;
  for (std::size_t i = 0; i < frames.size(); ++i) position[frames[i].frame_index] = i;
  DetectionTable table;
  for (const DetectionSet& s : sets) {
    auto it = position.find(s.frame_index);
    if (it == position.end()) {
      throw std::invalid_argument("detections for unknown frame " +
                                  std::to_string(s.frame_index));
    }
    auto& column = table[s.detector_name];
    if (column.empty()) {
      column.resize(frames.size());
      for (std::size_t i = 0; i < frames.size(); ++i) {
        column[i].frame_index = frames[i].frame_index;
        column[i].detector_name = s.detector_name;
      }
    }
    auto& dst = column[it->second].detections;
    dst.insert(dst.end(), s.detections.begin(), s.detections.end());
  }
  return table;
}

std::vector<DetectionSet> SetsFromTable(const DetectionTable& table) {
  std::vector<DetectionSet> out;
  for (const auto& [name, column] : table) {
    out.insert(out.end(), column.begin(), column.end());
  }
  return out;
}

PaintSummary PaintAll(VoxelMap& map, const std::vector<RenderedFrame>& frames,
                      const DetectionTable& table,
                      const std::vector<std::string>& painters,
                      const PaintParams& params, int threads) {
  std::vector<const std::vector<DetectionSet>*> columns;
  for (const std::string& name : painters) {
    auto it = table.find(name);
    if (it == table.end()) {
      throw std::invalid_argument("no detections for painting detector '" + name + "'");
    }
    columns.push_back(&it->second);
  }
  std::vector<PaintSummary> per_frame(frames.size());
  ParallelFor(frames.size(), threads, [&](std::size_t i) {
    const RenderedFrame& f = frames[i];
    for (const auto* column : columns) {
      const DetectionSet& set = (*column)[i];
      if (set.detections.empty()) continue;
      const PaintStats s = PaintFrame(map, f.intrinsics, f.pose,
                                      NormalizeFrameConfidence(set),
                                      params.max_range_m);
      per_frame[i].sets += 1;
      per_frame[i].painted += s.painted;
      per_frame[i].missed += s.missed;
    }
    VisibilityPass(map, f.intrinsics, f.pose, params.max_range_m,
                   params.visibility_stride);
  });
  PaintSummary total;
  for (const PaintSummary& s : per_frame) {
    total.sets += s.sets;
    total.painted += s.painted;
    total.missed += s.missed;
  }
  return total;
}

std::vector<LabelSet> LabelAll(const VoxelMap& map,
                               const std::vector<RenderedFrame>& frames,
                               const DetectionTable& table,
                               const std::vector<std::string>& label_sources,
                               const std::string& fallback,
                               const LabelParams& params, int threads) {
  std::vector<const std::vector<DetectionSet>*> columns;
  for (const std::string& name : label_sources) {
    auto it = table.find(name);
    if (it == table.end()) {
      throw std::invalid_argument("no detections for labeling detector '" + name + "'");
    }
    columns.push_back(&it->second);
  }
  const std::vector<DetectionSet>* fallback_column = nullptr;
  if (!fallback.empty()) {
    auto it = table.find(fallback);
    if (it == table.end()) {
      throw std::invalid_argument("no detections for fallback detector '" + fallback + "'");
    }
    fallback_column = &it->second;
  }
  std::vector<LabelSet> out(frames.size());
  ParallelFor(frames.size(), threads, [&](std::size_t i) {
    const RenderedFrame& f = frames[i];
    std::vector<DetectionSet> sets;
    for (const auto* column : columns) sets.push_back((*column)[i]);
    LabelInputs in;
    in.frame_index = f.frame_index;
    in.intrinsics = f.intrinsics;
    in.pose = f.pose;
    in.depth = &f.depth;
    in.detector_sets = sets;
    if (fallback_column) in.fallback = (*fallback_column)[i].detections;
    out[i] = GenerateLabels(map, in, params);
  });
  return out;
}

std::vector<FrameView> MakeViews(const std::vector<RenderedFrame>& frames) {
  std::vector<FrameView> views;
  views.reserve(frames.size());
  for (const RenderedFrame& f : frames) views.push_back({f.frame_index, f.pose, &f.depth});
  return views;
}

std::vector<DistanceHistogram> EvaluatePairs(
    const CameraIntrinsics& intr, const std::vector<FrameView>& views,
    const std::vector<std::vector<Detection>>& detections,
    const std::vector<FramePair>& pairs, const EvalParams& params, int threads) {
  if (detections.size() != views.size()) {
    throw EvaluatorError("detection lists do not match the frame list");
  }
  std::vector<std::vector<Detection>> capped(views.size());
  std::vector<char> needed(views.size(), 0);
  for (const FramePair& p : pairs) needed[p.query] = needed[p.candidate] = 1;
  ParallelFor(views.size(), threads, [&](std::size_t i) {
    if (needed[i]) capped[i] = CapDetections(detections[i], params);
  });
  std::vector<DistanceHistogram> out(pairs.size());
  ParallelFor(pairs.size(), threads, [&](std::size_t k) {
    const FramePair& p = pairs[k];
    out[k] = EvaluatePair(intr, views[p.query], capped[p.query],
                          views[p.candidate], capped[p.candidate], params);
  });
  return out;
}

Evaluation EvaluateDetector(const CameraIntrinsics& intr,
                            const std::vector<RenderedFrame>& frames,
                            const std::vector<std::vector<Detection>>& detections,
                            const EvalParams& params, int threads) {
  const std::size_t stride = static_cast<std::size_t>(std::max(1, params.frame_stride));
  const std::size_t kept = (frames.size() + stride - 1) / stride;
  if (kept < 2) {
    throw EvaluatorError("need >= 2 frames after stride (frame_stride " +
                         std::to_string(params.frame_stride) + " keeps " +
                         std::to_string(kept) + " of " +
                         std::to_string(frames.size()) + " frames)");
  }
  const std::vector<FrameView> views = MakeViews(frames);
  Evaluation ev;
  ev.pairs = SelectPairs(intr, views, params);
  ev.histograms = EvaluatePairs(intr, views, detections, ev.pairs, params, threads);
  ev.report = Aggregate(ev.histograms);
  return ev;
}

}  // namespace r3d

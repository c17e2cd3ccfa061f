#include "r3d/labeler.hpp"

#include "r3d/imageproc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace r3d {
namespace {

void RequireSameShape(const auto& a, const auto& b, const char* what) {
  if (!a.SameShape(b)) throw std::invalid_argument(std::string(what) + ": size mismatch");
}

LabelProvenance ProvenanceFromPriority(std::uint8_t p) {
  switch (p) {
    case 3: return LabelProvenance::kBoth;
    case 2: return LabelProvenance::kMapOnly;
    default: return LabelProvenance::kDetectorOnly;
  }
}

}  // namespace

std::string_view ProvenanceName(LabelProvenance p) {
  switch (p) {
    case LabelProvenance::kMapOnly: return "map";
    case LabelProvenance::kDetectorOnly: return "detector";
    case LabelProvenance::kBoth: return "both";
    case LabelProvenance::kFallback: return "fallback";
  }
  return "unknown";
}

LabelProvenance ParseProvenance(std::string_view name) {
  if (name == "map") return LabelProvenance::kMapOnly;
  if (name == "detector") return LabelProvenance::kDetectorOnly;
  if (name == "both") return LabelProvenance::kBoth;
  if (name == "fallback") return LabelProvenance::kFallback;
  throw std::invalid_argument("unknown provenance '" + std::string(name) + "'");
}

ScoreAndCount RenderScoreAndCount(const VoxelMap& map,
                                  const CameraIntrinsics& intr,
                                  const Pose& pose, double max_range) {
  ScoreAndCount out{ScoreGrid(intr.width, intr.height, 0.0),
                    CountGrid(intr.width, intr.height, 0.0)};
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const auto values = QueryMap(map, PixelRay(x, y, intr, pose), max_range);
      if (!values) continue;
      out.score(x, y) = values->score;
      out.count(x, y) = values->view_count;
    }
  }
  return out;
}

CountGrid SmoothCount(const CountGrid& count, int kernel) {
  return BoxBlur(ErodeMin(count, kernel), kernel);
}

MeanScore ComputeMeanScore(const ScoreGrid& score,
                           const CountGrid& smoothed_count, double min_count) {
  RequireSameShape(score, smoothed_count, "mean score");
  if (!(min_count > 0.0)) throw std::invalid_argument("min_count must be positive");
  MeanScore out{ScoreGrid(score.width(), score.height()),
                Raster<std::uint8_t>(score.width(), score.height(), 0)};
  auto s = score.values();
  auto c = smoothed_count.values();
  auto m = out.mean.values();
  auto flag = out.below_min_count.values();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (c[i] < min_count) flag[i] = 1;
    m[i] = s[i] / std::max(c[i], min_count);
  }
  return out;
}

std::vector<Detection> MapCandidates(const ScoreGrid& mean,
                                     const DepthMap& depth,
                                     const LabelParams& params) {
  RequireSameShape(mean, depth, "map candidates");
  const ScoreGrid dog =
      DifferenceOfGaussians(mean, params.dog_sigma1, params.dog_sigma2);
  std::vector<Detection> out;
  for (const Detection& d :
       LocalMaxima(dog, params.maxima_radius, params.peak_min)) {
    const double z = depth(d.x, d.y);
    if (z > 0.0 && z >= params.near_reject_m) out.push_back(d);
  }
  return out;
}

PriorityGrid BuildPriorityMap(std::span<const Detection> map_candidates,
                              std::span<const Detection> detector_hits,
                              int width, int height, int tolerance_px) {
  PriorityGrid c(width, height, 0);
  // Detector hits go in first; a map candidate overwrites its own pixel and
  // absorbs coincident detector hits around it.
  Raster<std::uint8_t> detector_mask(width, height, 0);
  for (const Detection& a : detector_hits) {
    if (!c.InBounds(a.x, a.y)) throw std::invalid_argument("detection out of bounds");
    detector_mask(a.x, a.y) = 1;
  }
  Raster<std::uint8_t> absorbed(width, height, 0);
  for (const Detection& s : map_candidates) {
    if (!c.InBounds(s.x, s.y)) throw std::invalid_argument("candidate out of bounds");
    bool coincident = false;
    for (int dy = -tolerance_px; dy <= tolerance_px; ++dy) {
      for (int dx = -tolerance_px; dx <= tolerance_px; ++dx) {
        const int x = s.x + dx;
        const int y = s.y + dy;
        if (c.InBounds(x, y) && detector_mask(x, y)) {
          coincident = true;
          absorbed(x, y) = 1;
        }
      }
    }
    c(s.x, s.y) = std::max<std::uint8_t>(c(s.x, s.y), coincident ? 3 : 2);
  }
  for (const Detection& a : detector_hits) {
    if (!absorbed(a.x, a.y) && c(a.x, a.y) == 0) c(a.x, a.y) = 1;
  }
  return c;
}

std::vector<Detection> FilterDoublePoints(const PriorityGrid& priority,
                                          const ScoreGrid& mean,
                                          const LabelParams& params) {
  RequireSameShape(priority, mean, "double-point filter");
  ScoreGrid weighted(mean.width(), mean.height());
  auto p = priority.values();
  auto s = mean.values();
  auto w = weighted.values();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = p[i] * s[i];
  const ScoreGrid blurred = GaussianBlur(weighted, params.priority_sigma);
  std::vector<Detection> out;
  for (const Detection& peak :
       LocalMaxima(blurred, params.maxima_radius,
                   std::numeric_limits<double>::epsilon())) {
    const double value = mean(peak.x, peak.y);
    if (value >= params.score_threshold) out.push_back({peak.x, peak.y, value});
  }
  return out;
}

LabelSet ApplyViewFallback(int frame_index, std::span<const Label> labels,
                           const CountGrid& raw_count,
                           std::span<const Detection> fallback,
                           int view_threshold) {
  auto low_view = [&](int x, int y) {
    return raw_count(x, y) < static_cast<double>(view_threshold);
  };
  LabelSet out;
  out.frame_index = frame_index;
  for (const Label& l : labels) {
    if (!low_view(l.detection.x, l.detection.y)) out.labels.push_back(l);
  }
  for (const Detection& d : fallback) {
    if (!raw_count.InBounds(d.x, d.y)) {
      throw std::invalid_argument("fallback detection out of bounds");
    }
    if (low_view(d.x, d.y)) out.labels.push_back({d, LabelProvenance::kFallback});
  }
  std::sort(out.labels.begin(), out.labels.end(),
            [](const Label& a, const Label& b) {
              if (a.detection.y != b.detection.y) return a.detection.y < b.detection.y;
              if (a.detection.x != b.detection.x) return a.detection.x < b.detection.x;
              return a.provenance < b.provenance;
            });
  return out;
}

LabelSet GenerateLabels(const VoxelMap& map, const LabelInputs& inputs,
                        const LabelParams& params) {
  if (inputs.depth == nullptr) throw std::invalid_argument("labeling needs a depth map");
  const auto& intr = inputs.intrinsics;
  const ScoreAndCount rendered =
      RenderScoreAndCount(map, intr, inputs.pose, params.max_range_m);
  const CountGrid smoothed = SmoothCount(rendered.count, params.count_kernel);
  const MeanScore mean =
      ComputeMeanScore(rendered.score, smoothed, params.min_count);

  const auto candidates = MapCandidates(mean.mean, *inputs.depth, params);
  std::vector<Detection> detector_hits;
  for (const DetectionSet& set : inputs.detector_sets) {
    detector_hits.insert(detector_hits.end(), set.detections.begin(),
                         set.detections.end());
  }
  const PriorityGrid priority = BuildPriorityMap(
      candidates, detector_hits, intr.width, intr.height, params.coincidence_px);
  const auto peaks = FilterDoublePoints(priority, mean.mean, params);

  const int reach = static_cast<int>(std::ceil(3.0 * params.priority_sigma));
  std::vector<Label> labels;
  labels.reserve(peaks.size());
  for (const Detection& peak : peaks) {
    std::uint8_t best = 0;
    for (int dy = -reach; dy <= reach; ++dy) {
      for (int dx = -reach; dx <= reach; ++dx) {
        const int x = peak.x + dx;
        const int y = peak.y + dy;
        if (priority.InBounds(x, y)) best = std::max(best, priority(x, y));
      }
    }
    labels.push_back({peak, ProvenanceFromPriority(best)});
  }
  return ApplyViewFallback(inputs.frame_index, labels, rendered.count,
                           inputs.fallback, params.view_threshold);
}

void WriteLabels(const std::filesystem::path& path,
                 std::span<const LabelSet> sets) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  for (const LabelSet& set : sets) {
    for (const Label& l : set.labels) {
      std::snprintf(buf, sizeof(buf), "%.17g", l.detection.confidence);
      out << set.frame_index << ',' << l.detection.x << ',' << l.detection.y
          << ',' << buf << ',' << ProvenanceName(l.provenance) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<LabelSet> ReadLabels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<LabelSet> sets;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string f[5];
    for (auto& field : f) {
      if (!std::getline(ss, field, ',')) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": expected 5 fields");
      }
    }
    try {
      const int frame = std::stoi(f[0]);
      Label l{{std::stoi(f[1]), std::stoi(f[2]), std::stod(f[3])},
              ParseProvenance(f[4])};
      if (sets.empty() || sets.back().frame_index != frame) {
        sets.push_back({frame, {}});
      }
      sets.back().labels.push_back(l);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return sets;
}

}  // namespace r3d

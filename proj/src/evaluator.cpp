#include "r3d/evaluator.hpp"

#include "r3d/imageproc.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace r3d {
namespace {

struct StampOffset {
  int dx;
  int dy;
  std::uint8_t value;
};

// Offsets whose rounded length is below max_r, sorted by value.
std::vector<StampOffset> StampTable(int max_r) {
  std::vector<StampOffset> table;
  for (int dy = -max_r; dy <= max_r; ++dy) {
    for (int dx = -max_r; dx <= max_r; ++dx) {
      const int d = RoundedDistance(dx * dx + dy * dy);
      if (d < max_r) table.push_back({dx, dy, static_cast<std::uint8_t>(d)});
    }
  }
  return table;
}

const std::vector<StampOffset>& CachedStampTable(int max_r) {
  static const std::vector<StampOffset> kDefault = StampTable(10);
  if (max_r == 10) return kDefault;
  thread_local std::vector<StampOffset> custom;
  thread_local int custom_r = -1;
  if (custom_r != max_r) {
    custom = StampTable(max_r);
    custom_r = max_r;
  }
  return custom;
}

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

DistanceHistogram& DistanceHistogram::operator+=(const DistanceHistogram& o) {
  for (int i = 0; i < kHistogramBins; ++i) bins[i] += o.bins[i];
  unmatched += o.unmatched;
  visible_queries += o.visible_queries;
  return *this;
}

int RoundedDistance(int squared) {
  if (squared <= 0) return 0;
  // round(sqrt(n)) = i  <=>  i^2 - i + 1 <= n <= i^2 + i
  int i = static_cast<int>(std::lround(std::sqrt(static_cast<double>(squared))));
  while (i * i - i + 1 > squared) --i;
  while (i * i + i < squared) ++i;
  return i;
}

double FrameOverlap(const CameraIntrinsics& intr, const FrameView& candidate,
                    const FrameView& query, int sample_stride,
                    const EvalParams& params) {
  if (sample_stride < 1) throw EvaluatorError("overlap sample stride must be >= 1");
  const DepthMap& dc = *candidate.depth;
  const DepthMap& dq = *query.depth;
  const RelativeTransform rel =
      ComputeRelativeTransform(candidate.pose, query.pose);
  std::size_t valid = 0;
  std::size_t landed = 0;
  for (int y = 0; y < intr.height; y += sample_stride) {
    for (int x = 0; x < intr.width; x += sample_stride) {
      const double z = dc(x, y);
      if (!(z > 0.0)) continue;
      ++valid;
      const auto proj =
          ProjectFromCamera(rel.Apply(UnprojectToCamera(x, y, z, intr)), intr);
      if (!proj) continue;
      const long qx = std::lround(proj->x);
      const long qy = std::lround(proj->y);
      if (qx < 0 || qy < 0 || qx >= intr.width || qy >= intr.height) continue;
      const double zq = dq(static_cast<int>(qx), static_cast<int>(qy));
      if (zq > 0.0 &&
          std::abs(proj->depth - zq) < DepthTolerance(proj->depth, params)) {
        ++landed;
      }
    }
  }
  return valid == 0 ? 0.0 : static_cast<double>(landed) / valid;
}

std::vector<FramePair> SelectPairs(const CameraIntrinsics& intr,
                                   std::span<const FrameView> frames,
                                   const EvalParams& params) {
  if (params.frame_stride < 1) throw EvaluatorError("frame_stride must be >= 1");
  std::vector<int> kept;
  for (int i = 0; i < static_cast<int>(frames.size()); i += params.frame_stride) {
    kept.push_back(i);
  }
  std::vector<FramePair> pairs;
  for (int q : kept) {
    for (int c : kept) {
      if (q == c) continue;
      const double overlap = FrameOverlap(intr, frames[c], frames[q],
                                          params.overlap_sample_stride, params);
      if (overlap >= params.min_overlap) pairs.push_back({q, c, overlap});
    }
  }
  return pairs;
}

std::vector<Backprojected> BackprojectDetections(
    std::span<const Detection> detections, const DepthMap& candidate_depth,
    const CameraIntrinsics& intr, const RelativeTransform& candidate_to_query,
    const DepthMap& query_depth, const EvalParams& params) {
  std::vector<Backprojected> out(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& a = detections[i];
    const double z = candidate_depth(a.x, a.y);
    if (!(z > 0.0)) continue;
    const auto b = ProjectFromCamera(
        candidate_to_query.Apply(UnprojectToCamera(a.x, a.y, z, intr)), intr);
    if (!b) continue;
    out[i].x = b->x;
    out[i].y = b->y;
    const long bx = std::lround(b->x);
    const long by = std::lround(b->y);
    if (bx < 0 || by < 0 || bx >= intr.width || by >= intr.height) continue;
    const double zq = query_depth(static_cast<int>(bx), static_cast<int>(by));
    out[i].visible =
        zq > 0.0 && std::abs(b->depth - zq) < DepthTolerance(b->depth, params);
  }
  return out;
}

DistanceGrid ComputeDistanceMap(std::span<const Detection> candidates,
                                int width, int height, int max_r) {
  if (max_r < 1 || max_r > 255) throw EvaluatorError("max_r must be in [1, 255]");
  DistanceGrid grid(width, height, static_cast<std::uint8_t>(max_r));
  const auto& table = CachedStampTable(max_r);
  for (const Detection& c : candidates) {
    if (!grid.InBounds(c.x, c.y)) throw EvaluatorError("candidate out of bounds");
    const bool interior = c.x >= max_r && c.y >= max_r &&
                          c.x < width - max_r && c.y < height - max_r;
    for (const StampOffset& o : table) {
      const int x = c.x + o.dx;
      const int y = c.y + o.dy;
      if (!interior && !grid.InBounds(x, y)) continue;
      std::uint8_t& cell = grid(x, y);
      if (o.value < cell) cell = o.value;
    }
  }
  return grid;
}

DistanceHistogram PairHistogram(std::span<const Detection> query_detections,
                                std::span<const Backprojected> backprojected,
                                std::span<const std::uint8_t> query_visible,
                                int width, int height, int max_r) {
  if (query_visible.size() != query_detections.size()) {
    throw EvaluatorError("visibility mask size mismatch");
  }
  max_r = std::min(max_r, kHistogramBins);
  std::vector<Detection> kept;
  kept.reserve(backprojected.size());
  for (const Backprojected& b : backprojected) {
    if (b.visible) {
      kept.push_back({static_cast<int>(std::lround(b.x)),
                      static_cast<int>(std::lround(b.y)), 0.0});
    }
  }
  DistanceHistogram h;
  if (kept.empty()) {
    for (std::uint8_t v : query_visible) {
      if (v) {
        ++h.visible_queries;
        ++h.unmatched;
      }
    }
    return h;
  }
  const DistanceGrid grid = ComputeDistanceMap(kept, width, height, max_r);
  for (std::size_t i = 0; i < query_detections.size(); ++i) {
    if (!query_visible[i]) continue;
    ++h.visible_queries;
    const int d = grid(query_detections[i].x, query_detections[i].y);
    if (d < max_r) {
      ++h.bins[d];
    } else {
      ++h.unmatched;
    }
  }
  return h;
}

std::vector<Detection> CapDetections(std::span<const Detection> detections,
                                     const EvalParams& params) {
  return NmsCap(detections, params.nms_radius, params.max_detections);
}

DistanceHistogram EvaluatePair(const CameraIntrinsics& intr,
                               const FrameView& query,
                               std::span<const Detection> query_detections,
                               const FrameView& candidate,
                               std::span<const Detection> candidate_detections,
                               const EvalParams& params) {
  const auto into_query = BackprojectDetections(
      candidate_detections, *candidate.depth, intr,
      ComputeRelativeTransform(candidate.pose, query.pose), *query.depth,
      params);
  const auto into_candidate = BackprojectDetections(
      query_detections, *query.depth, intr,
      ComputeRelativeTransform(query.pose, candidate.pose), *candidate.depth,
      params);
  std::vector<std::uint8_t> visible(query_detections.size());
  for (std::size_t i = 0; i < visible.size(); ++i) {
    visible[i] = into_candidate[i].visible ? 1 : 0;
  }
  return PairHistogram(query_detections, into_query, visible, intr.width,
                       intr.height, params.max_distance);
}

Report Aggregate(std::span<const DistanceHistogram> histograms) {
  if (histograms.empty()) throw EvaluatorError("cannot aggregate zero pairs");
  Report r;
  r.pair_count = histograms.size();
  std::array<double, kHistogramBins + 1> count_sum{};
  std::array<double, kHistogramBins + 1> pct_sum{};
  for (const DistanceHistogram& h : histograms) {
    for (int b = 0; b < kHistogramBins; ++b) count_sum[b] += h.bins[b];
    count_sum[kHistogramBins] += h.unmatched;
    if (h.visible_queries == 0) continue;
    ++r.percent_pairs;
    const double v = static_cast<double>(h.visible_queries);
    for (int b = 0; b < kHistogramBins; ++b) pct_sum[b] += 100.0 * h.bins[b] / v;
    pct_sum[kHistogramBins] += 100.0 * h.unmatched / v;
  }
  for (int b = 0; b <= kHistogramBins; ++b) {
    r.mean_count[b] = count_sum[b] / static_cast<double>(r.pair_count);
    r.mean_percent[b] =
        r.percent_pairs == 0 ? 0.0 : pct_sum[b] / static_cast<double>(r.percent_pairs);
  }
  r.repeatable_0_3 =
      r.mean_count[0] + r.mean_count[1] + r.mean_count[2] + r.mean_count[3];
  return r;
}

void ExportReport(const Report& report, const std::filesystem::path& csv_path,
                  const std::filesystem::path& summary_path,
                  const EvalParams& params, const std::string& detector) {
  if (report.pair_count == 0) {
    throw EvaluatorError("refusing to export an empty report to " +
                         csv_path.string());
  }
  {
    std::ofstream out(csv_path);
    if (!out) throw EvaluatorError("cannot write " + csv_path.string());
    out << "bin,mean_count,mean_percent\n";
    for (int b = 0; b <= kHistogramBins; ++b) {
      out << (b < kHistogramBins ? std::to_string(b) : std::string("10+"))
          << ',' << Fmt(report.mean_count[b]) << ','
          << Fmt(report.mean_percent[b]) << '\n';
    }
    if (!out) throw EvaluatorError("write failed for " + csv_path.string());
  }
  nlohmann::ordered_json j;
  j["detector"] = detector;
  j["pair_count"] = report.pair_count;
  j["pairs_with_visible_queries"] = report.percent_pairs;
  j["repeatable_bins_0_3"] = report.repeatable_0_3;
  j["parameters"] = {{"frame_stride", params.frame_stride},
                     {"min_overlap", params.min_overlap},
                     {"eps_floor_m", params.eps_floor_m},
                     {"eps_rel", params.eps_rel},
                     {"max_detections", params.max_detections},
                     {"nms_radius", params.nms_radius},
                     {"max_distance", params.max_distance}};
  std::ofstream out(summary_path);
  if (!out) throw EvaluatorError("cannot write " + summary_path.string());
  out << j.dump(2) << '\n';
  if (!out) throw EvaluatorError("write failed for " + summary_path.string());
}

Report ReadReportCsv(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw EvaluatorError("cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(in, line) || line != "bin,mean_count,mean_percent") {
    throw EvaluatorError(csv_path.string() + ": missing report header");
  }
  Report r;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row > kHistogramBins) throw EvaluatorError(csv_path.string() + ": too many rows");
    std::stringstream ss(line);
    std::string bin, count, pct;
    std::getline(ss, bin, ',');
    std::getline(ss, count, ',');
    std::getline(ss, pct, ',');
    const std::string expected = row < kHistogramBins ? std::to_string(row) : "10+";
    if (bin != expected) {
      throw EvaluatorError(csv_path.string() + ": unexpected bin '" + bin + "'");
    }
    try {
      r.mean_count[row] = std::stod(count);
      r.mean_percent[row] = std::stod(pct);
    } catch (const std::exception&) {
      throw EvaluatorError(csv_path.string() + ": malformed row '" + line + "'");
    }
    ++row;
  }
  if (row != kHistogramBins + 1) {
    throw EvaluatorError(csv_path.string() + ": expected 11 data rows");
  }
  r.repeatable_0_3 =
      r.mean_count[0] + r.mean_count[1] + r.mean_count[2] + r.mean_count[3];
  return r;
}

void WritePairHistograms(const std::filesystem::path& path,
                         std::span<const FramePair> pairs,
                         std::span<const FrameView> frames,
                         std::span<const DistanceHistogram> histograms) {
  std::ofstream out(path);
  if (!out) throw EvaluatorError("cannot write " + path.string());
  out << "query,candidate,overlap";
  for (int b = 0; b < kHistogramBins; ++b) out << ",bin" << b;
  out << ",unmatched,visible_queries\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const DistanceHistogram& h = histograms[i];
    out << frames[pairs[i].query].frame_index << ','
        << frames[pairs[i].candidate].frame_index << ','
        << Fmt(pairs[i].overlap);
    for (auto v : h.bins) out << ',' << v;
    out << ',' << h.unmatched << ',' << h.visible_queries << '\n';
  }
  if (!out) throw EvaluatorError("write failed for " + path.string());
}

}  // namespace r3d

#include "r3d/detectors.hpp"

#include "r3d/imageproc.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace r3d {
namespace {

constexpr double kTensorSigma = 1.0;
constexpr int kSobelRadius = 1;

// Bresenham circle of radius 3, clockwise from the top.
constexpr std::array<std::array<int, 2>, 16> kFastCircle = {{{0, -3},
                                                             {1, -3},
                                                             {2, -2},
                                                             {3, -1},
                                                             {3, 0},
                                                             {3, 1},
                                                             {2, 2},
                                                             {1, 3},
                                                             {0, 3},
                                                             {-1, 3},
                                                             {-2, 2},
                                                             {-3, 1},
                                                             {-3, 0},
                                                             {-3, -1},
                                                             {-2, -2},
                                                             {-1, -3}}};

struct StructureTensor {
  ScoreGrid xx, xy, yy;
};

StructureTensor ComputeStructureTensor(const GrayImage& image) {
  const int w = image.width();
  const int h = image.height();
  ScoreGrid xx(w, h), xy(w, h), yy(w, h);
  auto at = [&](int x, int y) {
    return static_cast<double>(image.Clamped(x, y));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = ((at(x + 1, y - 1) - at(x - 1, y - 1)) +
                         2.0 * (at(x + 1, y) - at(x - 1, y)) +
                         (at(x + 1, y + 1) - at(x - 1, y + 1))) /
                        8.0;
      const double gy = ((at(x - 1, y + 1) - at(x - 1, y - 1)) +
                         2.0 * (at(x, y + 1) - at(x, y - 1)) +
                         (at(x + 1, y + 1) - at(x + 1, y - 1))) /
                        8.0;
      xx(x, y) = gx * gx;
      xy(x, y) = gx * gy;
      yy(x, y) = gy * gy;
    }
  }
  return {GaussianBlur(xx, kTensorSigma), GaussianBlur(xy, kTensorSigma),
          GaussianBlur(yy, kTensorSigma)};
}

int TensorMargin() {
  return kSobelRadius + static_cast<int>(std::ceil(3.0 * kTensorSigma));
}

// Overwrites the border band with the grid minimum so it can never be a
// maximum above a positive floor.
void MaskBorder(ScoreGrid& grid, int margin) {
  double lo = 0.0;
  for (double v : grid.values()) lo = std::min(lo, v);
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (x < margin || y < margin || x >= grid.width() - margin ||
          y >= grid.height() - margin) {
        grid(x, y) = lo;
      }
    }
  }
}

double MaxValue(const ScoreGrid& grid) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : grid.values()) hi = std::max(hi, v);
  return hi;
}

ScoreGrid ToScoreGrid(const GrayImage& image) {
  ScoreGrid g(image.width(), image.height());
  auto src = image.values();
  auto dst = g.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  return g;
}

[[noreturn]] void FailLine(const std::filesystem::path& path, int line_no,
                           const std::string& what) {
  throw DetectionFileError(path.string() + ":" + std::to_string(line_no) +
                           ": " + what);
}

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

int HarrisMargin() { return TensorMargin(); }
int ShiTomasiMargin() { return TensorMargin(); }
int FastMargin() { return 3; }
int DogMargin(const DogParams& params) {
  return static_cast<int>(std::ceil(3.0 * params.sigma2));
}

ScoreGrid HarrisResponse(const GrayImage& image, double k) {
  const StructureTensor t = ComputeStructureTensor(image);
  ScoreGrid r(image.width(), image.height());
  auto xx = t.xx.values();
  auto xy = t.xy.values();
  auto yy = t.yy.values();
  auto out = r.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double tr = xx[i] + yy[i];
    out[i] = xx[i] * yy[i] - xy[i] * xy[i] - k * tr * tr;
  }
  return r;
}

ScoreGrid ShiTomasiResponse(const GrayImage& image) {
  const StructureTensor t = ComputeStructureTensor(image);
  ScoreGrid r(image.width(), image.height());
  auto xx = t.xx.values();
  auto xy = t.xy.values();
  auto yy = t.yy.values();
  auto out = r.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double half_diff = 0.5 * (xx[i] - yy[i]);
    out[i] = 0.5 * (xx[i] + yy[i]) -
             std::sqrt(half_diff * half_diff + xy[i] * xy[i]);
  }
  return r;
}

std::vector<Detection> DetectHarris(const GrayImage& image,
                                    const HarrisParams& params) {
  ScoreGrid r = HarrisResponse(image, params.k);
  MaskBorder(r, HarrisMargin());
  const double peak = MaxValue(r);
  if (!(peak >= params.min_response)) return {};
  return LocalMaxima(r, params.nms_radius,
                     std::max(params.threshold * peak, params.min_response));
}

std::vector<Detection> DetectShiTomasi(const GrayImage& image,
                                       const ShiTomasiParams& params) {
  if (!(params.quality > 0.0 && params.quality < 1.0)) {
    throw std::invalid_argument("shi-tomasi quality must lie in (0, 1)");
  }
  ScoreGrid r = ShiTomasiResponse(image);
  MaskBorder(r, ShiTomasiMargin());
  const double peak = MaxValue(r);
  if (!(peak >= params.min_response)) return {};
  const auto maxima = LocalMaxima(
      r, params.nms_radius, std::max(params.quality * peak, params.min_response));
  return NmsCap(maxima, params.nms_radius, params.max_count);
}

double FastScore(const GrayImage& image, int x, int y, double threshold,
                 int arc) {
  const double center = image(x, y);
  std::array<double, 16> diff;
  for (int i = 0; i < 16; ++i) {
    diff[i] = static_cast<double>(
                  image(x + kFastCircle[i][0], y + kFastCircle[i][1])) -
              center;
  }
  double best = 0.0;
  for (int sign : {1, -1}) {
    // Longest circular run of pixels beyond the threshold on one side.
    int start = -1;
    for (int i = 0; i < 16; ++i) {
      if (!(sign * diff[i] > threshold)) {
        start = i;
        break;
      }
    }
    if (start < 0) {
      double sum = 0.0;
      for (double d : diff) sum += std::abs(d);
      best = std::max(best, sum);
      continue;
    }
    int run = 0;
    double sum = 0.0;
    for (int step = 1; step <= 16; ++step) {
      const int i = (start + step) % 16;
      if (sign * diff[i] > threshold) {
        ++run;
        sum += std::abs(diff[i]);
      } else {
        if (run >= arc) best = std::max(best, sum);
        run = 0;
        sum = 0.0;
      }
    }
  }
  return best;
}

std::vector<Detection> DetectFast(const GrayImage& image,
                                  const FastParams& params) {
  if (!(params.threshold > 0.0)) {
    throw std::invalid_argument("FAST threshold must be positive");
  }
  ScoreGrid score(image.width(), image.height(), 0.0);
  const int m = FastMargin();
  for (int y = m; y < image.height() - m; ++y) {
    for (int x = m; x < image.width() - m; ++x) {
      score(x, y) = FastScore(image, x, y, params.threshold, params.arc);
    }
  }
  return LocalMaxima(score, params.nms_radius,
                     std::numeric_limits<double>::min());
}

std::vector<Detection> DetectDog(const GrayImage& image,
                                 const DogParams& params) {
  ScoreGrid r =
      DifferenceOfGaussians(ToScoreGrid(image), params.sigma1, params.sigma2);
  for (double& v : r.values()) v = std::abs(v);
  MaskBorder(r, DogMargin(params));
  return LocalMaxima(r, params.nms_radius,
                     std::max(params.threshold,
                              std::numeric_limits<double>::min()));
}

DetectionSet NormalizeFrameConfidence(DetectionSet set) {
  if (set.detections.empty()) return set;
  const double c = 1.0 / static_cast<double>(set.detections.size());
  for (Detection& d : set.detections) d.confidence = c;
  return set;
}

ExternalDetections LoadExternalDetections(const std::filesystem::path& path,
                                          int width, int height,
                                          const std::vector<int>& known_frames) {
  std::ifstream in(path);
  if (!in) throw DetectionFileError("cannot open " + path.string());
  const std::set<int> frames(known_frames.begin(), known_frames.end());

  std::map<std::pair<std::string, int>, DetectionSet> grouped;
  ExternalDetections out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = Trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(body);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(Trim(field));
    if (fields.size() != 5) FailLine(path, line_no, "expected 5 fields");

    auto parse_int = [&](const std::string& s) {
      int v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) {
        FailLine(path, line_no, "bad integer '" + s + "'");
      }
      return v;
    };
    const int frame = parse_int(fields[0]);
    const int x = parse_int(fields[1]);
    const int y = parse_int(fields[2]);
    double conf = 0.0;
    try {
      std::size_t used = 0;
      conf = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      FailLine(path, line_no, "bad confidence '" + fields[3] + "'");
    }
    if (!std::isfinite(conf) || conf < 0.0) {
      FailLine(path, line_no, "confidence must be finite and >= 0");
    }
    if (fields[4].empty()) FailLine(path, line_no, "empty detector name");
    if (!frames.contains(frame)) {
      FailLine(path, line_no, "unknown frame index " + fields[0]);
    }
    if (x < 0 || y < 0 || x >= width || y >= height) {
      ++out.rejected_out_of_bounds;
      continue;
    }
    auto& set = grouped[{fields[4], frame}];
    set.frame_index = frame;
    set.detector_name = fields[4];
    set.detections.push_back({x, y, conf});
  }
  for (auto& [key, set] : grouped) out.sets.push_back(std::move(set));
  return out;
}

void WriteDetections(const std::filesystem::path& path,
                     const std::vector<DetectionSet>& sets) {
  std::ofstream out(path);
  if (!out) throw DetectionFileError("cannot write " + path.string());
  char buf[64];
  for (const DetectionSet& set : sets) {
    for (const Detection& d : set.detections) {
      std::snprintf(buf, sizeof(buf), "%.17g", d.confidence);
      out << set.frame_index << ',' << d.x << ',' << d.y << ',' << buf << ','
          << set.detector_name << '\n';
    }
  }
  if (!out) throw DetectionFileError("write failed for " + path.string());
}

}  // namespace r3d

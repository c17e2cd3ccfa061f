#include "r3d/imageproc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace r3d {
namespace {

void RequireOddKernel(int k) {
  if (k < 1 || k % 2 == 0) {
    throw std::invalid_argument("kernel size must be odd and positive");
  }
}

// Correlates rows then columns with a symmetric kernel, replicating edges.
ScoreGrid SeparableFilter(const ScoreGrid& grid, std::span<const double> taps) {
  const int w = grid.width();
  const int h = grid.height();
  const int r = static_cast<int>(taps.size() / 2);
  ScoreGrid tmp(w, h);
  std::vector<double> padded(static_cast<std::size_t>(std::max(w, h) + 2 * r));
  for (int y = 0; y < h; ++y) {
    const auto src = grid.row(y);
    for (int i = -r; i < w + r; ++i) padded[i + r] = src[std::clamp(i, 0, w - 1)];
    auto dst = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = 0; t <= 2 * r; ++t) acc += taps[t] * padded[x + t];
      dst[x] = acc;
    }
  }
  ScoreGrid out(w, h);
  for (int x = 0; x < w; ++x) {
    for (int i = -r; i < h + r; ++i) padded[i + r] = tmp(x, std::clamp(i, 0, h - 1));
    for (int y = 0; y < h; ++y) {
      double acc = 0.0;
      for (int t = 0; t <= 2 * r; ++t) acc += taps[t] * padded[y + t];
      out(x, y) = acc;
    }
  }
  return out;
}

template <typename Pick>
ScoreGrid SeparableRankFilter(const ScoreGrid& grid, int k, Pick pick) {
  const int w = grid.width();
  const int h = grid.height();
  const int r = k / 2;
  ScoreGrid tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = grid(x, y);
      for (int d = -r; d <= r; ++d) v = pick(v, grid.Clamped(x + d, y));
      tmp(x, y) = v;
    }
  }
  ScoreGrid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = tmp(x, y);
      for (int d = -r; d <= r; ++d) v = pick(v, tmp.Clamped(x, y + d));
      out(x, y) = v;
    }
  }
  return out;
}

}  // namespace

std::vector<double> GaussianKernel(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * r + 1);
  for (int i = -r; i <= r; ++i) {
    taps[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  }
  const double sum = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= sum;
  return taps;
}

ScoreGrid GaussianBlur(const ScoreGrid& grid, double sigma) {
  const auto taps = GaussianKernel(sigma);
  return SeparableFilter(grid, taps);
}

ScoreGrid BoxBlur(const ScoreGrid& grid, int k) {
  RequireOddKernel(k);
  if (k == 1) return grid;
  const std::vector<double> taps(k, 1.0 / k);
  return SeparableFilter(grid, taps);
}

ScoreGrid ErodeMin(const ScoreGrid& grid, int k) {
  RequireOddKernel(k);
  if (k == 1) return grid;
  return SeparableRankFilter(grid, k,
                             [](double a, double b) { return std::min(a, b); });
}

ScoreGrid DifferenceOfGaussians(const ScoreGrid& grid, double sigma1,
                                double sigma2) {
  if (!(sigma1 > 0.0 && sigma1 < sigma2)) {
    throw std::invalid_argument("DoG requires 0 < sigma1 < sigma2");
  }
  ScoreGrid out = GaussianBlur(grid, sigma1);
  const ScoreGrid wide = GaussianBlur(grid, sigma2);
  auto o = out.values();
  auto b = wide.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= b[i];
  return out;
}

std::vector<Detection> LocalMaxima(const ScoreGrid& grid, int radius,
                                   double min_value) {
  if (radius < 1) throw std::invalid_argument("maxima radius must be >= 1");
  const ScoreGrid dilated = SeparableRankFilter(
      grid, 2 * radius + 1, [](double a, double b) { return std::max(a, b); });
  std::vector<Detection> out;
  const int w = grid.width();
  const int h = grid.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = grid(x, y);
      if (!(v >= min_value) || v < dilated(x, y)) continue;
      // v is the window maximum; drop it if an earlier pixel ties.
      bool earlier_tie = false;
      for (int dy = -radius; dy <= 0 && !earlier_tie; ++dy) {
        const int yy = y + dy;
        if (yy < 0) continue;
        const int x_end = dy == 0 ? x - 1 : std::min(w - 1, x + radius);
        for (int xx = std::max(0, x - radius); xx <= x_end; ++xx) {
          if (grid(xx, yy) == v) {
            earlier_tie = true;
            break;
          }
        }
      }
      if (!earlier_tie) out.push_back({x, y, v});
    }
  }
  return out;
}

std::vector<Detection> NmsCap(std::span<const Detection> detections,
                              double radius, std::size_t cap) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Detection& da = detections[a];
    const Detection& db = detections[b];
    if (da.confidence != db.confidence) return da.confidence > db.confidence;
    if (da.y != db.y) return da.y < db.y;
    return da.x < db.x;
  });

  // Buckets of accepted detections on a grid with cell size >= radius.
  const int cell = std::max(1, static_cast<int>(std::ceil(radius)));
  const double r2 = radius * radius;
  auto key = [](int cx, int cy) {
    return (static_cast<std::int64_t>(cx) << 32) ^
           static_cast<std::uint32_t>(cy);
  };
  auto floor_div = [](int a, int b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
  };
  std::unordered_map<std::int64_t, std::vector<Detection>> buckets;

  std::vector<Detection> out;
  out.reserve(std::min(cap, detections.size()));
  for (std::size_t idx : order) {
    if (out.size() >= cap) break;
    const Detection& d = detections[idx];
    const int bx = floor_div(d.x, cell);
    const int by = floor_div(d.y, cell);
    bool suppressed = false;
    for (int dy = -1; dy <= 1 && !suppressed; ++dy) {
      for (int dx = -1; dx <= 1 && !suppressed; ++dx) {
        auto it = buckets.find(key(bx + dx, by + dy));
        if (it == buckets.end()) continue;
        for (const Detection& a : it->second) {
          const double ex = a.x - d.x;
          const double ey = a.y - d.y;
          if (ex * ex + ey * ey <= r2) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (suppressed) continue;
    out.push_back(d);
    buckets[key(bx, by)].push_back(d);
  }
  return out;
}

}  // namespace r3d

#include "r3d/imageproc.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace r3d {
namespace {

ScoreGrid RandomGrid(int w, int h, std::mt19937_64& rng, int levels) {
  std::uniform_int_distribution<int> u(0, levels - 1);
  ScoreGrid g(w, h);
  for (double& v : g.values()) v = u(rng);
  return g;
}

// Direct 2D convolution with edge replication; no separability.
ScoreGrid BruteGaussian(const ScoreGrid& g, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  double norm = 0.0;
  for (int i = -r; i <= r; ++i) norm += std::exp(-i * i / (2 * sigma * sigma));
  ScoreGrid out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double w = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
          s += w * g.Clamped(x + dx, y + dy);
        }
      }
      out(x, y) = s / (norm * norm);
    }
  }
  return out;
}

std::vector<Detection> BruteMaxima(const ScoreGrid& g, int radius, double min_value) {
  std::vector<Detection> out;
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const double v = g(x, y);
      if (v < min_value) continue;
      bool keep = true;
      for (int dy = -radius; dy <= radius && keep; ++dy) {
        for (int dx = -radius; dx <= radius && keep; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (!g.InBounds(xx, yy) || (dx == 0 && dy == 0)) continue;
          const double o = g(xx, yy);
          const bool earlier = yy < y || (yy == y && xx < x);
          if (o > v || (o == v && earlier)) keep = false;
        }
      }
      if (keep) out.push_back({x, y, v});
    }
  }
  return out;
}

TEST(ImageProc, GaussianKernelIsNormalizedWithThreeSigmaRadius) {
  for (double sigma : {0.5, 1.0, 1.6, 2.3}) {
    const auto k = GaussianKernel(sigma);
    EXPECT_EQ(k.size(), 2 * static_cast<std::size_t>(std::ceil(3 * sigma)) + 1);
    double s = 0.0;
    for (double v : k) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(k.front(), k.back());
  }
}

TEST(ImageProc, GaussianMatchesDirectConvolution) {
  std::mt19937_64 rng(1);
  const ScoreGrid g = RandomGrid(23, 17, rng, 50);
  for (double sigma : {1.0, 1.6}) {
    const ScoreGrid a = GaussianBlur(g, sigma);
    const ScoreGrid b = BruteGaussian(g, sigma);
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) ASSERT_NEAR(a(x, y), b(x, y), 1e-9);
    }
  }
}

TEST(ImageProc, ImpulseResponseIsKernelOuterProduct) {
  ScoreGrid g(21, 21);
  g(10, 10) = 1.0;
  const ScoreGrid b = GaussianBlur(g, 1.0);
  const auto k = GaussianKernel(1.0);
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      EXPECT_NEAR(b(10 + dx, 10 + dy), k[dx + 3] * k[dy + 3], 1e-15);
    }
  }
  EXPECT_EQ(b(10, 14), 0.0);
}

TEST(ImageProc, BoxBlurOfConstantIsConstant) {
  ScoreGrid g(12, 9, 20.0);
  const ScoreGrid b = BoxBlur(g, 9);
  for (double v : b.values()) EXPECT_NEAR(v, 20.0, 1e-12);
}

TEST(ImageProc, BoxBlurMatchesWindowMean) {
  std::mt19937_64 rng(2);
  const ScoreGrid g = RandomGrid(15, 11, rng, 30);
  const ScoreGrid b = BoxBlur(g, 5);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      double s = 0.0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) s += g.Clamped(x + dx, y + dy);
      ASSERT_NEAR(b(x, y), s / 25.0, 1e-12);
    }
  }
}

TEST(ImageProc, ErodeSpreadsSingleZeroOverWindow) {
  ScoreGrid g(30, 30, 20.0);
  g(15, 15) = 0.0;
  const ScoreGrid e = ErodeMin(g, 9);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 30; ++x) {
      const bool inside = std::abs(x - 15) <= 4 && std::abs(y - 15) <= 4;
      EXPECT_EQ(e(x, y), inside ? 0.0 : 20.0) << x << "," << y;
    }
  }
}

TEST(ImageProc, EvenKernelSizesAreRejected) {
  ScoreGrid g(5, 5);
  EXPECT_THROW(BoxBlur(g, 4), std::invalid_argument);
  EXPECT_THROW(ErodeMin(g, 0), std::invalid_argument);
}

TEST(ImageProc, DogIsDifferenceOfBlurs) {
  std::mt19937_64 rng(4);
  const ScoreGrid g = RandomGrid(20, 20, rng, 10);
  const ScoreGrid d = DifferenceOfGaussians(g, 1.0, 1.6);
  const ScoreGrid a = GaussianBlur(g, 1.0), b = GaussianBlur(g, 1.6);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) EXPECT_DOUBLE_EQ(d(x, y), a(x, y) - b(x, y));
}

TEST(ImageProc, LocalMaximaMatchBruteForceWithTies) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    // Few levels make plateaus and ties common.
    const ScoreGrid g = RandomGrid(19, 13, rng, 4);
    for (int radius : {1, 2, 3}) {
      EXPECT_EQ(LocalMaxima(g, radius, 1.0), BruteMaxima(g, radius, 1.0));
    }
  }
}

TEST(ImageProc, PlateauYieldsSingleEarliestMaximum) {
  ScoreGrid g(10, 10);
  for (int y = 3; y <= 5; ++y)
    for (int x = 3; x <= 5; ++x) g(x, y) = 1.0;
  const auto m = LocalMaxima(g, 2, 0.5);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].x, 3);
  EXPECT_EQ(m[0].y, 3);
}

TEST(ImageProc, NmsCapMatchesGreedyOracle) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> ux(0, 63), uy(0, 47), uc(0, 20);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Detection> dets;
    for (int i = 0; i < 300; ++i) dets.push_back({ux(rng), uy(rng), uc(rng) * 0.05});
    auto order = dets;
    std::sort(order.begin(), order.end(), [](const Detection& a, const Detection& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      if (a.y != b.y) return a.y < b.y;
      return a.x < b.x;
    });
    std::vector<Detection> expect;
    for (const Detection& d : order) {
      if (expect.size() == 60) break;
      bool clear = true;
      for (const Detection& k : expect) {
        if (std::hypot(d.x - k.x, d.y - k.y) <= 2.0) clear = false;
      }
      if (clear) expect.push_back(d);
    }
    EXPECT_EQ(NmsCap(dets, 2.0, 60), expect);
  }
}

}  // namespace
}  // namespace r3d

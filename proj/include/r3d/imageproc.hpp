#pragma once

#include "r3d/raster.hpp"

#include <span>
#include <vector>

namespace r3d {

/// Separable Gaussian with kernel radius ceil(3 sigma) and edge replication.
ScoreGrid GaussianBlur(const ScoreGrid& grid, double sigma);

/// Normalized 1D Gaussian taps, length 2 * ceil(3 sigma) + 1.
std::vector<double> GaussianKernel(double sigma);

/// Mean over a k x k window (k odd), edge replication.
ScoreGrid BoxBlur(const ScoreGrid& grid, int k);

/// Minimum over a k x k window (k odd), edge replication.
ScoreGrid ErodeMin(const ScoreGrid& grid, int k);

/// GaussianBlur(grid, sigma1) - GaussianBlur(grid, sigma2), sigma1 < sigma2.
ScoreGrid DifferenceOfGaussians(const ScoreGrid& grid, double sigma1,
                                double sigma2);

/// Pixels that are >= min_value and not exceeded by any pixel within the
/// Chebyshev radius. Among equal values the pixel earliest in (y, x) order
/// wins. Output is in raster order with confidence = grid value.
std::vector<Detection> LocalMaxima(const ScoreGrid& grid, int radius,
                                   double min_value);

/// Greedy non-maximum suppression: strongest first (ties by (y, x)), reject
/// anything within Euclidean `radius` of an accepted detection, stop at `cap`.
std::vector<Detection> NmsCap(std::span<const Detection> detections,
                              double radius, std::size_t cap);

}  // namespace r3d

#pragma once

#include "r3d/raster.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace r3d {

/// Detections of one detector on one frame.
struct DetectionSet {
  int frame_index = 0;
  std::string detector_name;
  std::vector<Detection> detections;

  bool operator==(const DetectionSet&) const = default;
};

struct HarrisParams {
  double k = 0.04;
  double threshold = 0.01;  // relative to the frame's maximum response
  // Absolute floor: the response of an ideal right-angle corner spanning
  // 8 gray levels. Keeps near-uniform frames from reporting quantization noise.
  double min_response = 5e-9;
  int nms_radius = 2;
};

struct ShiTomasiParams {
  double quality = 0.01;
  double min_response = 5e-5;  // same 8-gray-level corner floor as Harris
  int nms_radius = 2;
  std::size_t max_count = 1000;
};

struct FastParams {
  double threshold = 20.0 / 255.0;  // ORB default of 20 on 8-bit intensities
  int arc = 9;
  int nms_radius = 2;
};

struct DogParams {
  double sigma1 = 1.0;
  double sigma2 = 1.6;
  double threshold = 0.03;
  int nms_radius = 2;
};

// Pixels closer to the border than these margins never produce detections.
int HarrisMargin();
int ShiTomasiMargin();
int FastMargin();
int DogMargin(const DogParams& params);

/// Harris response det(M) - k trace(M)^2 on the Gaussian(sigma = 1) smoothed
/// Sobel structure tensor.
ScoreGrid HarrisResponse(const GrayImage& image, double k);
/// Minimum eigenvalue of the same structure tensor.
ScoreGrid ShiTomasiResponse(const GrayImage& image);

std::vector<Detection> DetectHarris(const GrayImage& image,
                                    const HarrisParams& params = {});
std::vector<Detection> DetectShiTomasi(const GrayImage& image,
                                       const ShiTomasiParams& params = {});
std::vector<Detection> DetectFast(const GrayImage& image,
                                  const FastParams& params = {});
std::vector<Detection> DetectDog(const GrayImage& image,
                                 const DogParams& params = {});

/// FAST score at one pixel: sum of |I(p) - I(center)| over the qualifying
/// contiguous arc, or 0 when no arc of the required length exists.
double FastScore(const GrayImage& image, int x, int y, double threshold,
                 int arc);

/// Replaces every confidence with 1/N.
DetectionSet NormalizeFrameConfidence(DetectionSet set);

class DetectionFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExternalDetections {
  std::vector<DetectionSet> sets;  // sorted by (detector, frame)
  std::size_t rejected_out_of_bounds = 0;
};

/// Parses `frame_index,x,y,confidence,detector_name` records. Frames must be
/// listed in `known_frames`; detections outside width x height are dropped
/// and counted.
ExternalDetections LoadExternalDetections(const std::filesystem::path& path,
                                          int width, int height,
                                          const std::vector<int>& known_frames);

void WriteDetections(const std::filesystem::path& path,
                     const std::vector<DetectionSet>& sets);

}  // namespace r3d

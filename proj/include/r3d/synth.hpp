#pragma once

#include "r3d/geometry.hpp"
#include "r3d/raster.hpp"
#include "r3d/voxelmap.hpp"

#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace r3d {

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Procedural room: an inward-facing cuboid shell of size `room` with its
/// minimum corner at `room_origin`, plus axis-aligned boxes resting on the
/// floor (z is up).
struct SceneSpec {
  std::uint64_t seed = 1;
  Vec3 room_origin = Vec3::Zero();
  Vec3 room = Vec3(4.0, 4.0, 4.0);
  int box_count = 3;
  double box_min_size = 0.4;
  double box_max_size = 1.0;
  double box_clearance = 0.3;        // to walls and between boxes
  double checker_probability = 0.3;  // chance a face is checkered
  double checker_period = 0.5;
  double checker_contrast = 0.6;
  double min_shade = 0.15;
  double max_shade = 0.95;
  int placement_retries = 200;
};

struct SurfaceMaterial {
  double shade = 0.5;
  double checker_period = 0.0;  // 0 = flat
  double checker_contrast = 0.0;
};

struct Scene {
  TriangleMesh mesh;
  std::vector<SurfaceMaterial> materials;  // one per triangle
  std::vector<Vec3> corners;    // trihedral vertices of the room and boxes
  std::vector<Vec3> junctions;  // checkerboard crossings and line ends
  Vec3 bbox_min = Vec3::Zero();
  Vec3 bbox_max = Vec3::Zero();
};

Scene BuildScene(const SceneSpec& spec);

struct PhotographerConfig {
  double pitch_sigma = std::numbers::pi / 8.0;
  double roll_sigma = std::numbers::pi / 4.0;
  double lower_bound_m = 0.6;
  double upper_vertical_m = 5.0;
  double upper_sides_m = 20.0;
  double upper_view_m = 10.0;
  double images_per_m3 = 10.0;
  int volume_samples = 100;
  int max_attempts_per_frame = 2000;
  double max_range_m = 20.0;
};

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream, index).
Rng SplitRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Camera-to-world rotation: yaw about world z, then pitch, then roll about
/// the optical axis. At zero angles the camera looks along +x with image
/// rows pointing down (-z).
Mat3 OrientationFromAngles(double yaw, double pitch, double roll);
Mat3 SampleOrientation(Rng& rng, const PhotographerConfig& cfg);

/// Seven-ray validity test: world +-x, +-y (sides), +-z (top/bottom) and the
/// view ray must each hit within [lower, upper].
bool ValidatePosition(const VoxelMap& map, const Vec3& position,
                      const Mat3& orientation, const PhotographerConfig& cfg);

struct VolumeEstimate {
  double bbox_volume = 0.0;
  int accepted = 0;
  int sampled = 0;
  double effective_volume = 0.0;
  std::size_t image_budget = 0;
};

VolumeEstimate EstimateEffectiveVolume(const VoxelMap& map, const Vec3& lo,
                                       const Vec3& hi,
                                       const PhotographerConfig& cfg,
                                       std::uint64_t seed);

struct RenderedFrame {
  int frame_index = 0;
  GrayImage image;
  DepthMap depth;
  Pose pose;
  CameraIntrinsics intrinsics;
};

/// Intensity from a 2x2 supersampled shade; depth is the exact z of the
/// pixel-center ray hit (0 on miss).
RenderedFrame RenderFrame(const Scene& scene, const Pose& pose,
                          const CameraIntrinsics& intr, double max_range,
                          int frame_index = 0);

/// First hit of a ray against the scene triangles, or nullopt.
struct SurfaceHit {
  double t = 0.0;
  std::size_t triangle = 0;
};
std::optional<SurfaceHit> IntersectScene(const Scene& scene, const Ray& ray,
                                         double max_range);

struct PhotographResult {
  std::vector<RenderedFrame> frames;
  VolumeEstimate volume;
  std::size_t attempts = 0;
  bool budget_reached = true;
};

PhotographResult Photograph(const Scene& scene, const VoxelMap& map,
                            const CameraIntrinsics& intr,
                            const PhotographerConfig& cfg, std::uint64_t seed,
                            int threads = 1);

CameraIntrinsics DefaultIntrinsics();

}  // namespace r3d

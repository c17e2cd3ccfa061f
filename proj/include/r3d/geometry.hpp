#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace r3d {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pinhole camera. Pixel centers sit on integer coordinates, x is the column,
/// y the row, origin top-left.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws GeometryError when the invariants do not hold.
  void Validate() const;

  bool Contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Rigid camera-to-world transform.
class Pose {
 public:
  Pose() = default;
  /// Throws GeometryError if `rotation` is not a proper rotation.
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose FromMatrix(const Mat4& m);
  Mat4 Matrix() const;

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 Apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Pose Inverse() const;
  Pose operator*(const Pose& rhs) const;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

struct PixelProjection {
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
};

/// Rotation and translation taking candidate-camera coordinates to
/// query-camera coordinates.
struct RelativeTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 Apply(const Vec3& p) const { return rotation * p + translation; }
};

/// Camera-frame point for a pixel at the given z-depth.
inline Vec3 UnprojectToCamera(double x, double y, double depth,
                              const CameraIntrinsics& intr) {
  return {(x - intr.cx) / intr.fx * depth, (y - intr.cy) / intr.fy * depth,
          depth};
}

/// Projects a camera-frame point; nullopt when it is not in front of the camera.
inline std::optional<PixelProjection> ProjectFromCamera(
    const Vec3& p, const CameraIntrinsics& intr) {
  if (!(p.z() > 0.0)) return std::nullopt;
  return PixelProjection{intr.fx * p.x() / p.z() + intr.cx,
                         intr.fy * p.y() / p.z() + intr.cy, p.z()};
}

/// World point seen at pixel (x, y) with z-depth `depth`.
/// Throws GeometryError for nonpositive depth or out-of-bounds pixels.
Vec3 Unproject(double x, double y, double depth, const CameraIntrinsics& intr,
               const Pose& pose);

/// Throws GeometryError when the point is behind the camera.
PixelProjection Project(const Vec3& world, const CameraIntrinsics& intr,
                        const Pose& pose);

/// Non-throwing variant of Project for hot loops.
std::optional<PixelProjection> TryProject(const Vec3& world,
                                          const CameraIntrinsics& intr,
                                          const Pose& pose);

Ray PixelRay(double x, double y, const CameraIntrinsics& intr,
             const Pose& pose);

RelativeTransform ComputeRelativeTransform(const Pose& candidate,
                                           const Pose& query);

// File formats: intrinsics are a single line `fx fy cx cy width height`;
// poses are one line per frame, the frame index followed by a row-major 4x4
// camera-to-world matrix.
CameraIntrinsics ReadIntrinsics(const std::filesystem::path& path);
void WriteIntrinsics(const std::filesystem::path& path,
                     const CameraIntrinsics& intr);

struct IndexedPose {
  int frame_index = 0;
  Pose pose;
};

std::vector<IndexedPose> ReadPoses(const std::filesystem::path& path);
void WritePoses(const std::filesystem::path& path,
                const std::vector<IndexedPose>& poses);

}  // namespace r3d

#include "r3d/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace r3d {
namespace {

constexpr double kOrthonormalTolerance = 1e-9;

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void CameraIntrinsics::Validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw GeometryError("intrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw GeometryError("intrinsics: image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw GeometryError("intrinsics: principal point outside the image");
  }
}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw GeometryError("pose: non-finite entries");
  }
  const double err =
      (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (err >= kOrthonormalTolerance || rotation.determinant() < 0.0) {
    throw GeometryError("pose: rotation is not orthonormal with det +1");
  }
}

Pose Pose::FromMatrix(const Mat4& m) {
  if (std::abs(m(3, 0)) + std::abs(m(3, 1)) + std::abs(m(3, 2)) != 0.0 ||
      m(3, 3) != 1.0) {
    throw GeometryError("pose: last row must be 0 0 0 1");
  }
  return Pose(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

Mat4 Pose::Matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose Pose::Inverse() const {
  Pose inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation_ = rotation_ * rhs.rotation_;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  return out;
}

Vec3 Unproject(double x, double y, double depth, const CameraIntrinsics& intr,
               const Pose& pose) {
  if (!(depth > 0.0)) throw GeometryError("unproject: invalid depth");
  if (!(x >= 0.0 && y >= 0.0 && x <= intr.width - 1 && y <= intr.height - 1)) {
    throw GeometryError("unproject: pixel outside image");
  }
  return pose.Apply(UnprojectToCamera(x, y, depth, intr));
}

std::optional<PixelProjection> TryProject(const Vec3& world,
                                          const CameraIntrinsics& intr,
                                          const Pose& pose) {
  const Vec3 cam = pose.rotation().transpose() * (world - pose.translation());
  return ProjectFromCamera(cam, intr);
}

PixelProjection Project(const Vec3& world, const CameraIntrinsics& intr,
                        const Pose& pose) {
  auto p = TryProject(world, intr, pose);
  if (!p) throw GeometryError("project: point behind camera");
  return *p;
}

Ray PixelRay(double x, double y, const CameraIntrinsics& intr,
             const Pose& pose) {
  const Vec3 dir((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
  return {pose.translation(), (pose.rotation() * dir).normalized()};
}

RelativeTransform ComputeRelativeTransform(const Pose& candidate,
                                           const Pose& query) {
  // query^-1 * candidate
  const Mat3 qt = query.rotation().transpose();
  RelativeTransform rel;
  rel.rotation = qt * candidate.rotation();
  rel.translation = qt * (candidate.translation() - query.translation());
  return rel;
}

CameraIntrinsics ReadIntrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open intrinsics file " + path.string());
  CameraIntrinsics intr;
  if (!(in >> intr.fx >> intr.fy >> intr.cx >> intr.cy >> intr.width >>
        intr.height)) {
    throw GeometryError("malformed intrinsics file " + path.string());
  }
  intr.Validate();
  return intr;
}

void WriteIntrinsics(const std::filesystem::path& path,
                     const CameraIntrinsics& intr) {
  std::ofstream out(path);
  if (!out) throw GeometryError("cannot write " + path.string());
  out << FormatDouble(intr.fx) << ' ' << FormatDouble(intr.fy) << ' '
      << FormatDouble(intr.cx) << ' ' << FormatDouble(intr.cy) << ' '
      << intr.width << ' ' << intr.height << '\n';
}

std::vector<IndexedPose> ReadPoses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open pose file " + path.string());
  std::vector<IndexedPose> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[line.find_first_not_of(" \t")] == '#') continue;
    std::istringstream ls(line);
    IndexedPose ip;
    Mat4 m;
    ls >> ip.frame_index;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) ls >> m(r, c);
    }
    if (!ls) {
      throw GeometryError(path.string() + ":" + std::to_string(line_no) +
                          ": expected frame index and 16 values");
    }
    try {
      ip.pose = Pose::FromMatrix(m);
    } catch (const GeometryError& e) {
      throw GeometryError(path.string() + ":" + std::to_string(line_no) +
                          ": " + e.what());
    }
    poses.push_back(ip);
  }
  return poses;
}

void WritePoses(const std::filesystem::path& path,
                const std::vector<IndexedPose>& poses) {
  std::ofstream out(path);
  if (!out) throw GeometryError("cannot write " + path.string());
  for (const auto& ip : poses) {
    out << ip.frame_index;
    const Mat4 m = ip.pose.Matrix();
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) out << ' ' << FormatDouble(m(r, c));
    }
    out << '\n';
  }
}

}  // namespace r3d

#include "r3d/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

namespace r3d {
namespace {

namespace fs = std::filesystem;

CameraIntrinsics Intr() { return {220.0, 230.0, 159.5, 119.5, 320, 240}; }

Mat3 Yaw90() {
  Mat3 r;
  r << 0, -1, 0,
       1, 0, 0,
       0, 0, 1;
  return r;
}

Mat3 RandomRotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

fs::path TempFile(const std::string& name) {
  return fs::temp_directory_path() / ("r3d_geometry_" + name);
}

TEST(Geometry, PrincipalPixelUnprojectsOntoOpticalAxis) {
  const Vec3 p = Unproject(159.5, 119.5, 2.0, Intr(), Pose());
  EXPECT_DOUBLE_EQ(p.x(), 0.0);
  EXPECT_DOUBLE_EQ(p.y(), 0.0);
  EXPECT_DOUBLE_EQ(p.z(), 2.0);
}

TEST(Geometry, YawedPoseMatchesHandComputedPoint) {
  // Camera point (1, 0, 2) sits at pixel (cx + fx/2, cy) at depth 2. With the
  // 90 degree yaw R = [[0,-1,0],[1,0,0],[0,0,1]] and t = (1, 2, 3):
  // R p + t = (0, 1, 2) + (1, 2, 3) = (1, 3, 5).
  const Pose pose(Yaw90(), Vec3(1, 2, 3));
  const Vec3 w = Unproject(159.5 + 110.0, 119.5, 2.0, Intr(), pose);
  EXPECT_NEAR(w.x(), 1.0, 1e-12);
  EXPECT_NEAR(w.y(), 3.0, 1e-12);
  EXPECT_NEAR(w.z(), 5.0, 1e-12);

  const PixelProjection px = Project(Vec3(1, 3, 5), Intr(), pose);
  EXPECT_NEAR(px.x, 269.5, 1e-12);
  EXPECT_NEAR(px.y, 119.5, 1e-12);
  EXPECT_NEAR(px.depth, 2.0, 1e-12);
}

TEST(Geometry, RoundTripRandomTriples) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0.0, 319.0), uy(0.0, 239.0),
      ud(0.1, 20.0), ut(-50.0, 50.0);
  const auto intr = Intr();
  for (int i = 0; i < 10000; ++i) {
    const Pose pose(RandomRotation(rng), Vec3(ut(rng), ut(rng), ut(rng)));
    const double x = ux(rng), y = uy(rng), d = ud(rng);
    const Vec3 w = Unproject(x, y, d, intr, pose);
    const PixelProjection p = Project(w, intr, pose);
    ASSERT_NEAR(p.x, x, 1e-6);
    ASSERT_NEAR(p.y, y, 1e-6);
    ASSERT_NEAR(p.depth, d, 1e-9);
  }
}

TEST(Geometry, ProjectBehindCameraThrows) {
  EXPECT_THROW(Project(Vec3(0, 0, -1), Intr(), Pose()), GeometryError);
  EXPECT_FALSE(TryProject(Vec3(0, 0, 0), Intr(), Pose()).has_value());
}

TEST(Geometry, UnprojectRejectsBadInput) {
  EXPECT_THROW(Unproject(10, 10, 0.0, Intr(), Pose()), GeometryError);
  EXPECT_THROW(Unproject(10, 10, -1.0, Intr(), Pose()), GeometryError);
  EXPECT_THROW(Unproject(320, 10, 1.0, Intr(), Pose()), GeometryError);
  EXPECT_THROW(Unproject(-1, 10, 1.0, Intr(), Pose()), GeometryError);
}

TEST(Geometry, PoseRejectsImproperRotations) {
  Mat3 scaled = Mat3::Identity() * 1.01;
  EXPECT_THROW(Pose(scaled, Vec3::Zero()), GeometryError);
  Mat3 mirror = Mat3::Identity();
  mirror(2, 2) = -1.0;
  EXPECT_THROW(Pose(mirror, Vec3::Zero()), GeometryError);
}

TEST(Geometry, IntrinsicsValidation) {
  EXPECT_NO_THROW(Intr().Validate());
  auto bad = Intr();
  bad.fx = 0.0;
  EXPECT_THROW(bad.Validate(), GeometryError);
  bad = Intr();
  bad.width = 0;
  EXPECT_THROW(bad.Validate(), GeometryError);
}

TEST(Geometry, RelativeTransformMatchesMatrixComposition) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ut(-5.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const Pose a(RandomRotation(rng), Vec3(ut(rng), ut(rng), ut(rng)));
    const Pose b(RandomRotation(rng), Vec3(ut(rng), ut(rng), ut(rng)));
    // Oracle: general 4x4 inverse, no use of the rigid-inverse shortcut.
    const Mat4 oracle = b.Matrix().inverse() * a.Matrix();
    const RelativeTransform rel = ComputeRelativeTransform(a, b);
    EXPECT_LT((rel.rotation - oracle.topLeftCorner<3, 3>()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((rel.translation - oracle.topRightCorner<3, 1>()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Geometry, SelfRelativeTransformIsIdentity) {
  const Pose p(Yaw90(), Vec3(4, -2, 1));
  const RelativeTransform rel = ComputeRelativeTransform(p, p);
  EXPECT_LT((rel.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(rel.translation.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Geometry, PixelRayPassesThroughUnprojectedPoint) {
  const Pose pose(Yaw90(), Vec3(1, 2, 3));
  const Ray ray = PixelRay(40.0, 200.0, Intr(), pose);
  EXPECT_NEAR(ray.direction.norm(), 1.0, 1e-12);
  const Vec3 w = Unproject(40.0, 200.0, 3.0, Intr(), pose);
  const Vec3 v = w - ray.origin;
  EXPECT_LT((v.normalized() - ray.direction).norm(), 1e-12);
}

TEST(Geometry, PoseFileRoundTripIsExact) {
  std::mt19937_64 rng(5);
  std::vector<IndexedPose> poses;
  for (int i = 0; i < 20; ++i) {
    poses.push_back({i * 3, Pose(RandomRotation(rng), Vec3(0.1 * i, -0.3, 1e-7 * i))});
  }
  const auto path = TempFile("poses.txt");
  WritePoses(path, poses);
  const auto back = ReadPoses(path);
  ASSERT_EQ(back.size(), poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    EXPECT_EQ(back[i].frame_index, poses[i].frame_index);
    EXPECT_EQ(back[i].pose.Matrix(), poses[i].pose.Matrix());
  }
  fs::remove(path);
}

TEST(Geometry, IntrinsicsFileRoundTrip) {
  const auto path = TempFile("intr.txt");
  WriteIntrinsics(path, Intr());
  EXPECT_EQ(ReadIntrinsics(path), Intr());
  fs::remove(path);
}

TEST(Geometry, MalformedPoseLineReportsLineNumber) {
  const auto path = TempFile("bad_poses.txt");
  {
    std::ofstream out(path);
    out << "0 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n";
    out << "1 1 0 0 0 0 1 0\n";
  }
  try {
    ReadPoses(path);
    FAIL() << "expected a parse error";
  } catch (const GeometryError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  fs::remove(path);
}

}  // namespace
}  // namespace r3d

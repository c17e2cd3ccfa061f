#include "r3d/synth.hpp"

#include "r3d/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace r3d {
namespace {

constexpr double kAmbient = 0.4;
constexpr double kDiffuse = 0.6;

const Vec3& LightDirection() {
  static const Vec3 kLight = Vec3(0.4, 0.3, 0.866).normalized();
  return kLight;
}

// Axis-aligned rectangle on the plane coord[axis] = plane, spanning
// [lo, hi] on the other two axes, facing `sign` along `axis`.
struct Rect {
  int axis = 0;
  double plane = 0.0;
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  int sign = 1;
};

void AddRect(Scene& scene, const Rect& r, const SurfaceMaterial& material) {
  const int u = (r.axis + 1) % 3;
  const int v = (r.axis + 2) % 3;
  auto corner = [&](double cu, double cv) {
    Vec3 p;
    p[r.axis] = r.plane;
    p[u] = cu;
    p[v] = cv;
    return p;
  };
  const int base = static_cast<int>(scene.mesh.vertices.size());
  scene.mesh.vertices.push_back(corner(r.lo[u], r.lo[v]));
  scene.mesh.vertices.push_back(corner(r.hi[u], r.lo[v]));
  scene.mesh.vertices.push_back(corner(r.hi[u], r.hi[v]));
  scene.mesh.vertices.push_back(corner(r.lo[u], r.hi[v]));
  // (u, v, axis) is right-handed, so counter-clockwise in (u, v) faces +axis.
  if (r.sign > 0) {
    scene.mesh.triangles.push_back({base, base + 1, base + 2});
    scene.mesh.triangles.push_back({base, base + 2, base + 3});
  } else {
    scene.mesh.triangles.push_back({base, base + 2, base + 1});
    scene.mesh.triangles.push_back({base, base + 3, base + 2});
  }
  for (int i = 0; i < 2; ++i) {
    scene.mesh.shades.push_back(material.shade);
    scene.materials.push_back(material);
  }

  if (material.checker_period <= 0.0) return;
  const double p = material.checker_period;
  const auto first = [&](double lo) {
    return static_cast<long>(std::floor(lo / p)) + 1;
  };
  // Grid lines strictly inside the rectangle on each in-plane axis.
  std::vector<double> us, vs;
  for (long k = first(r.lo[u]); k * p < r.hi[u]; ++k) {
    if (k * p > r.lo[u]) us.push_back(k * p);
  }
  for (long k = first(r.lo[v]); k * p < r.hi[v]; ++k) {
    if (k * p > r.lo[v]) vs.push_back(k * p);
  }
  for (double cu : us) {
    for (double cv : vs) scene.junctions.push_back(corner(cu, cv));
    scene.junctions.push_back(corner(cu, r.lo[v]));
    scene.junctions.push_back(corner(cu, r.hi[v]));
  }
  for (double cv : vs) {
    scene.junctions.push_back(corner(r.lo[u], cv));
    scene.junctions.push_back(corner(r.hi[u], cv));
  }
}

double CheckerFactor(const SurfaceMaterial& m, int axis, const Vec3& p) {
  if (m.checker_period <= 0.0) return 1.0;
  const int u = (axis + 1) % 3;
  const int v = (axis + 2) % 3;
  const long parity = static_cast<long>(std::floor(p[u] / m.checker_period)) +
                      static_cast<long>(std::floor(p[v] / m.checker_period));
  return (parity & 1) ? 1.0 - m.checker_contrast : 1.0;
}

struct Box {
  Vec3 lo, hi;
};

double Shade(const Scene& scene, const Ray& ray, double max_range) {
  const auto hit = IntersectScene(scene, ray, max_range);
  if (!hit) return 0.0;
  const auto& t = scene.mesh.triangles[hit->triangle];
  const auto& v = scene.mesh.vertices;
  const Vec3 n = (v[t[1]] - v[t[0]]).cross(v[t[2]] - v[t[0]]).normalized();
  int axis = 0;
  n.cwiseAbs().maxCoeff(&axis);
  const Vec3 p = ray.origin + hit->t * ray.direction;
  const SurfaceMaterial& m = scene.materials[hit->triangle];
  const double lambert = kAmbient + kDiffuse * std::abs(n.dot(LightDirection()));
  return std::clamp(m.shade * CheckerFactor(m, axis, p) * lambert, 0.0, 1.0);
}

}  // namespace

Scene BuildScene(const SceneSpec& spec) {
  if ((spec.room.array() <= 0.0).any()) throw SceneError("room extents must be positive");
  if (spec.box_count < 0) throw SceneError("box count must be nonnegative");
  if (spec.box_count > 0 &&
      !(spec.box_min_size > 0.0 && spec.box_min_size <= spec.box_max_size)) {
    throw SceneError("box size range is invalid");
  }
  Rng rng = SplitRng(spec.seed, 0, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto checker = [&](SurfaceMaterial m) {
    if (spec.checker_period > 0.0 && unit(rng) < spec.checker_probability) {
      m.checker_period = spec.checker_period;
      m.checker_contrast = spec.checker_contrast;
    }
    return m;
  };
  // Distinct shades within one object keep its edges visible.
  auto shades = [&](int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int attempt = 0; attempt < 50; ++attempt) {
        s = spec.min_shade + (spec.max_shade - spec.min_shade) * unit(rng);
        if (std::all_of(out.begin(), out.end(),
                        [&](double o) { return std::abs(o - s) >= 0.1; })) {
          break;
        }
      }
      out.push_back(s);
    }
    return out;
  };

  Scene scene;
  const Vec3 lo = spec.room_origin;
  const Vec3 hi = spec.room_origin + spec.room;
  scene.bbox_min = lo;
  scene.bbox_max = hi;

  const auto room_shades = shades(6);
  for (int axis = 0; axis < 3; ++axis) {
    // Inward-facing: the low wall faces +axis, the high wall faces -axis.
    Rect low{axis, lo[axis], lo, hi, +1};
    Rect high{axis, hi[axis], lo, hi, -1};
    AddRect(scene, low, checker({room_shades[2 * axis], 0.0, 0.0}));
    AddRect(scene, high, checker({room_shades[2 * axis + 1], 0.0, 0.0}));
  }
  for (int i = 0; i < 8; ++i) {
    scene.corners.emplace_back((i & 1) ? hi.x() : lo.x(),
                               (i & 2) ? hi.y() : lo.y(),
                               (i & 4) ? hi.z() : lo.z());
  }

  std::vector<Box> boxes;
  for (int b = 0; b < spec.box_count; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.placement_retries && !placed; ++attempt) {
      Vec3 size;
      for (int a = 0; a < 3; ++a) {
        size[a] = spec.box_min_size +
                  (spec.box_max_size - spec.box_min_size) * unit(rng);
      }
      size.z() = std::min(size.z(), spec.room.z() - spec.box_clearance);
      const double free_x = spec.room.x() - 2 * spec.box_clearance - size.x();
      const double free_y = spec.room.y() - 2 * spec.box_clearance - size.y();
      if (free_x < 0.0 || free_y < 0.0 || size.z() <= 0.0) continue;
      Box box;
      box.lo = Vec3(lo.x() + spec.box_clearance + free_x * unit(rng),
                    lo.y() + spec.box_clearance + free_y * unit(rng), lo.z());
      box.hi = box.lo + size;
      const bool clear = std::all_of(boxes.begin(), boxes.end(), [&](const Box& o) {
        return box.lo.x() >= o.hi.x() + spec.box_clearance ||
               o.lo.x() >= box.hi.x() + spec.box_clearance ||
               box.lo.y() >= o.hi.y() + spec.box_clearance ||
               o.lo.y() >= box.hi.y() + spec.box_clearance;
      });
      if (!clear) continue;
      boxes.push_back(box);
      placed = true;
    }
    if (!placed) {
      throw SceneError("could not place box " + std::to_string(b) + " after " +
                       std::to_string(spec.placement_retries) + " attempts");
    }
  }

  for (const Box& box : boxes) {
    const auto box_shades = shades(5);
    int s = 0;
    for (int axis = 0; axis < 2; ++axis) {
      AddRect(scene, {axis, box.lo[axis], box.lo, box.hi, -1},
              checker({box_shades[s++], 0.0, 0.0}));
      AddRect(scene, {axis, box.hi[axis], box.lo, box.hi, +1},
              checker({box_shades[s++], 0.0, 0.0}));
    }
    // Top face only; the bottom rests on the floor.
    AddRect(scene, {2, box.hi.z(), box.lo, box.hi, +1},
            checker({box_shades[s++], 0.0, 0.0}));
    for (int i = 0; i < 8; ++i) {
      scene.corners.emplace_back((i & 1) ? box.hi.x() : box.lo.x(),
                                 (i & 2) ? box.hi.y() : box.lo.y(),
                                 (i & 4) ? box.hi.z() : box.lo.z());
    }
  }

  // Floor checker lines ending at a box footprint.
  // Two triangles per rectangle; the floor is the fifth room rectangle.
  const SurfaceMaterial& floor = scene.materials[8];
  if (floor.checker_period > 0.0) {
    const double p = floor.checker_period;
    for (const Box& box : boxes) {
      for (int a = 0; a < 2; ++a) {
        const int o = 1 - a;
        for (long k = static_cast<long>(std::floor(box.lo[a] / p)) + 1;
             k * p < box.hi[a]; ++k) {
          if (k * p <= box.lo[a]) continue;
          for (double edge : {box.lo[o], box.hi[o]}) {
            Vec3 j(0.0, 0.0, lo.z());
            j[a] = k * p;
            j[o] = edge;
            scene.junctions.push_back(j);
          }
        }
      }
    }
  }

  scene.mesh.Validate();
  return scene;
}

Rng SplitRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

Mat3 OrientationFromAngles(double yaw, double pitch, double roll) {
  Mat3 base;
  base.col(0) = Vec3(0.0, -1.0, 0.0);
  base.col(1) = Vec3(0.0, 0.0, -1.0);
  base.col(2) = Vec3(1.0, 0.0, 0.0);
  const Mat3 yaw_m = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 pitch_m =
      Eigen::AngleAxisd(-pitch, Vec3::UnitY()).toRotationMatrix();
  const Mat3 roll_m = Eigen::AngleAxisd(roll, Vec3::UnitZ()).toRotationMatrix();
  return yaw_m * pitch_m * base * roll_m;
}

Mat3 SampleOrientation(Rng& rng, const PhotographerConfig& cfg) {
  std::uniform_real_distribution<double> yaw(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> pitch(0.0, cfg.pitch_sigma);
  std::normal_distribution<double> roll(0.0, cfg.roll_sigma);
  const double y = yaw(rng);
  const double p = pitch(rng);
  const double r = roll(rng);
  return OrientationFromAngles(y, p, r);
}

bool ValidatePosition(const VoxelMap& map, const Vec3& position,
                      const Mat3& orientation, const PhotographerConfig& cfg) {
  auto within = [&](const Vec3& dir, double upper) {
    const auto hit = map.Raycast({position, dir}, upper);
    return hit && hit->entry_distance >= cfg.lower_bound_m;
  };
  for (int axis = 0; axis < 3; ++axis) {
    const double upper = axis == 2 ? cfg.upper_vertical_m : cfg.upper_sides_m;
    Vec3 dir = Vec3::Zero();
    dir[axis] = 1.0;
    if (!within(dir, upper) || !within(-dir, upper)) return false;
  }
  return within(orientation.col(2), cfg.upper_view_m);
}

VolumeEstimate EstimateEffectiveVolume(const VoxelMap& map, const Vec3& lo,
                                       const Vec3& hi,
                                       const PhotographerConfig& cfg,
                                       std::uint64_t seed) {
  const Vec3 extent = hi - lo;
  if ((extent.array() <= 0.0).any()) throw SceneError("empty bounding box");
  VolumeEstimate est;
  est.bbox_volume = extent.prod();
  est.sampled = cfg.volume_samples;
  Rng rng = SplitRng(seed, 1, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < cfg.volume_samples; ++i) {
    Vec3 pos;
    for (int a = 0; a < 3; ++a) pos[a] = lo[a] + extent[a] * unit(rng);
    const Mat3 rot = SampleOrientation(rng, cfg);
    if (ValidatePosition(map, pos, rot, cfg)) ++est.accepted;
  }
  if (est.sampled > 0) {
    est.effective_volume =
        est.bbox_volume * static_cast<double>(est.accepted) / est.sampled;
  }
  est.image_budget = static_cast<std::size_t>(
      std::llround(cfg.images_per_m3 * est.effective_volume));
  return est;
}

std::optional<SurfaceHit> IntersectScene(const Scene& scene, const Ray& ray,
                                         double max_range) {
  std::optional<SurfaceHit> best;
  double best_t = max_range;
  const auto& v = scene.mesh.vertices;
  for (std::size_t i = 0; i < scene.mesh.triangles.size(); ++i) {
    const auto& tri = scene.mesh.triangles[i];
    const Vec3& a = v[tri[0]];
    const Vec3 e1 = v[tri[1]] - a;
    const Vec3 e2 = v[tri[2]] - a;
    const Vec3 pvec = ray.direction.cross(e2);
    const double det = e1.dot(pvec);
    if (std::abs(det) < 1e-14) continue;
    const double inv_det = 1.0 / det;
    const Vec3 tvec = ray.origin - a;
    const double u = tvec.dot(pvec) * inv_det;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 qvec = tvec.cross(e1);
    const double w = ray.direction.dot(qvec) * inv_det;
    if (w < 0.0 || u + w > 1.0) continue;
    const double t = e2.dot(qvec) * inv_det;
    if (t > 0.0 && t <= best_t) {
      if (best && t == best_t) continue;
      best_t = t;
      best = SurfaceHit{t, i};
    }
  }
  return best;
}

RenderedFrame RenderFrame(const Scene& scene, const Pose& pose,
                          const CameraIntrinsics& intr, double max_range,
                          int frame_index) {
  RenderedFrame f;
  f.frame_index = frame_index;
  f.pose = pose;
  f.intrinsics = intr;
  f.image = GrayImage(intr.width, intr.height, 0.0f);
  f.depth = DepthMap(intr.width, intr.height, 0.0f);
  const Vec3 optical_axis = pose.rotation().col(2);
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const Ray center = PixelRay(x, y, intr, pose);
      if (const auto hit = IntersectScene(scene, center, max_range)) {
        f.depth(x, y) =
            static_cast<float>(hit->t * center.direction.dot(optical_axis));
      }
      double sum = 0.0;
      for (double oy : {-0.25, 0.25}) {
        for (double ox : {-0.25, 0.25}) {
          sum += Shade(scene, PixelRay(x + ox, y + oy, intr, pose), max_range);
        }
      }
      // 8-bit quantization so in-memory frames match the stored graymaps.
      f.image(x, y) = static_cast<float>(std::round(sum * 0.25 * 255.0) / 255.0);
    }
  }
  return f;
}

PhotographResult Photograph(const Scene& scene, const VoxelMap& map,
                            const CameraIntrinsics& intr,
                            const PhotographerConfig& cfg, std::uint64_t seed,
                            int threads) {
  PhotographResult result;
  result.volume =
      EstimateEffectiveVolume(map, scene.bbox_min, scene.bbox_max, cfg, seed);
  const std::size_t budget = result.volume.image_budget;
  if (budget == 0) {
    result.budget_reached = false;
    return result;
  }
  const Vec3 extent = scene.bbox_max - scene.bbox_min;
  std::vector<std::optional<Pose>> poses(budget);
  std::vector<std::size_t> attempts(budget, 0);
  ParallelFor(budget, threads, [&](std::size_t k) {
    Rng rng = SplitRng(seed, 2, k);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int a = 0; a < cfg.max_attempts_per_frame; ++a) {
      ++attempts[k];
      Vec3 pos;
      for (int i = 0; i < 3; ++i) pos[i] = scene.bbox_min[i] + extent[i] * unit(rng);
      const Mat3 rot = SampleOrientation(rng, cfg);
      if (ValidatePosition(map, pos, rot, cfg)) {
        poses[k] = Pose(rot, pos);
        return;
      }
    }
  });
  std::size_t found = 0;
  while (found < budget && poses[found]) ++found;
  for (std::size_t k = 0; k < found; ++k) result.attempts += attempts[k];
  result.budget_reached = found == budget;
  result.frames.resize(found);
  ParallelFor(found, threads, [&](std::size_t k) {
    result.frames[k] = RenderFrame(scene, *poses[k], intr, cfg.max_range_m,
                                   static_cast<int>(k));
  });
  return result;
}

CameraIntrinsics DefaultIntrinsics() {
  return CameraIntrinsics{220.0, 220.0, 159.5, 119.5, 320, 240};
}

}  // namespace r3d

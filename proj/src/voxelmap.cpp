#include "r3d/voxelmap.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace r3d {
namespace {

constexpr char kSnapshotMagic[4] = {'R', '3', 'D', 'V'};
constexpr std::uint32_t kSnapshotVersion = 1;
constexpr std::uint64_t kAxisMask = (std::uint64_t{1} << 21) - 1;

std::uint64_t Mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

int FloorToInt(double v) { return static_cast<int>(std::floor(v)); }

template <typename T>
void PutLe(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T> || std::is_floating_point_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T GetLe(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw VoxelMapError("truncated map snapshot");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

// Ray parameter where the ray crosses the plane `coord` on one axis.
inline double PlaneT(double coord, double origin, double inv_dir) {
  return (coord - origin) * inv_dir;
}

}  // namespace

void TriangleMesh::Validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& t : triangles) {
    for (int i : t) {
      if (i < 0 || i >= n) throw VoxelMapError("mesh: vertex index out of range");
    }
  }
  if (!shades.empty() && shades.size() != triangles.size()) {
    throw VoxelMapError("mesh: shade count does not match triangle count");
  }
}

void TriangleMesh::RemoveDegenerate() {
  std::vector<std::array<int, 3>> kept;
  std::vector<double> kept_shades;
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    const auto& t = triangles[i];
    const Vec3 n = (vertices[t[1]] - vertices[t[0]])
                       .cross(vertices[t[2]] - vertices[t[0]]);
    if (n.norm() > 0.0) {
      kept.push_back(t);
      if (!shades.empty()) kept_shades.push_back(shades[i]);
    }
  }
  triangles = std::move(kept);
  shades = std::move(kept_shades);
}

TriangleMesh ReadObj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw VoxelMapError("cannot open mesh " + path.string());
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw VoxelMapError(path.string() + ":" + std::to_string(line_no) + ": " +
                        what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) fail("malformed vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> tri{};
      std::string tok;
      int count = 0;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        int idx = 0;
        try {
          idx = std::stoi(head);
        } catch (const std::exception&) {
          fail("malformed face index '" + tok + "'");
        }
        if (idx <= 0) fail("face indices must be 1-based and positive");
        if (count < 3) tri[count] = idx - 1;
        ++count;
      }
      if (count != 3) fail("only triangular faces are supported");
      mesh.triangles.push_back(tri);
    }
  }
  mesh.Validate();
  mesh.RemoveDegenerate();
  return mesh;
}

void WriteObj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw VoxelMapError("cannot write " + path.string());
  char buf[96];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(),
                  v.z());
    out << buf;
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

std::uint64_t PackCell(const CellCoord& c) {
  for (int v : c) {
    if (v < kCellCoordMin || v > kCellCoordMax) {
      throw VoxelMapError("cell coordinate outside the 21-bit range");
    }
  }
  return (static_cast<std::uint64_t>(c[0]) & kAxisMask) |
         ((static_cast<std::uint64_t>(c[1]) & kAxisMask) << 21) |
         ((static_cast<std::uint64_t>(c[2]) & kAxisMask) << 42);
}

CellCoord UnpackCell(std::uint64_t key) {
  auto axis = [](std::uint64_t bits) {
    // Sign-extend 21 bits.
    return static_cast<int>(static_cast<std::int64_t>(bits << 43) >> 43);
  };
  return {axis(key & kAxisMask), axis((key >> 21) & kAxisMask),
          axis((key >> 42) & kAxisMask)};
}

VoxelMap::VoxelMap(double resolution) : resolution_(resolution) {
  if (!(resolution > 0.0)) throw VoxelMapError("resolution must be positive");
  Rehash(1024);
}

long VoxelMap::Find(std::uint64_t key) const {
  if (keys_.empty()) return -1;
  const std::size_t mask = keys_.size() - 1;
  for (std::size_t i = Mix(key) & mask;; i = (i + 1) & mask) {
    if (keys_[i] == key) return static_cast<long>(i);
    if (keys_[i] == kEmpty) return -1;
  }
}

void VoxelMap::Insert(std::uint64_t key) {
  if (2 * (count_ + 1) > keys_.size()) Rehash(keys_.size() * 2);
  const std::size_t mask = keys_.size() - 1;
  for (std::size_t i = Mix(key) & mask;; i = (i + 1) & mask) {
    if (keys_[i] == key) return;
    if (keys_[i] == kEmpty) {
      keys_[i] = key;
      ++count_;
      return;
    }
  }
}

void VoxelMap::Rehash(std::size_t capacity) {
  std::vector<std::uint64_t> old_keys = std::move(keys_);
  std::vector<std::int64_t> old_scores = std::move(scores_);
  std::vector<std::uint32_t> old_views = std::move(views_);
  keys_.assign(capacity, kEmpty);
  scores_.assign(capacity, 0);
  views_.assign(capacity, 0);
  const std::size_t mask = capacity - 1;
  for (std::size_t j = 0; j < old_keys.size(); ++j) {
    if (old_keys[j] == kEmpty) continue;
    std::size_t i = Mix(old_keys[j]) & mask;
    while (keys_[i] != kEmpty) i = (i + 1) & mask;
    keys_[i] = old_keys[j];
    scores_[i] = old_scores[j];
    views_[i] = old_views[j];
  }
}

void VoxelMap::AddOccupied(const CellCoord& c) {
  if (sealed_) throw VoxelMapError("map is sealed; occupancy is fixed");
  Insert(PackCell(c));
}

void VoxelMap::Seal() {
  std::array<int, 3> lo{std::numeric_limits<int>::max(),
                        std::numeric_limits<int>::max(),
                        std::numeric_limits<int>::max()};
  std::array<int, 3> hi{std::numeric_limits<int>::min(),
                        std::numeric_limits<int>::min(),
                        std::numeric_limits<int>::min()};
  ForEachCell([&](const CellCoord& c, std::int64_t, std::uint32_t) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a] >> kBrickShift);
      hi[a] = std::max(hi[a], c[a] >> kBrickShift);
    }
  });
  brick_bits_.clear();
  brick_dims_ = {0, 0, 0};
  if (count_ > 0) {
    brick_lo_ = lo;
    for (int a = 0; a < 3; ++a) brick_dims_[a] = hi[a] - lo[a] + 1;
    const std::size_t n = static_cast<std::size_t>(brick_dims_[0]) *
                          brick_dims_[1] * brick_dims_[2];
    brick_bits_.assign((n + 63) / 64, 0);
    ForEachCell([&](const CellCoord& c, std::int64_t, std::uint32_t) {
      const std::size_t idx =
          (static_cast<std::size_t>((c[2] >> kBrickShift) - brick_lo_[2]) *
               brick_dims_[1] +
           ((c[1] >> kBrickShift) - brick_lo_[1])) *
              brick_dims_[0] +
          ((c[0] >> kBrickShift) - brick_lo_[0]);
      brick_bits_[idx / 64] |= std::uint64_t{1} << (idx % 64);
    });
  }
  sealed_ = true;
}

bool VoxelMap::BrickOccupied(int bx, int by, int bz) const {
  const std::size_t idx =
      (static_cast<std::size_t>(bz - brick_lo_[2]) * brick_dims_[1] +
       (by - brick_lo_[1])) *
          brick_dims_[0] +
      (bx - brick_lo_[0]);
  return (brick_bits_[idx / 64] >> (idx % 64)) & 1U;
}

std::optional<CellValues> VoxelMap::Values(const CellCoord& c) const {
  const long i = Find(PackCell(c));
  if (i < 0) return std::nullopt;
  const auto units = std::atomic_ref<const std::int64_t>(scores_[i]).load(
      std::memory_order_relaxed);
  const auto views = std::atomic_ref<const std::uint32_t>(views_[i]).load(
      std::memory_order_relaxed);
  return CellValues{static_cast<double>(units) / kScoreUnitsPerConfidence,
                    views};
}

std::int64_t VoxelMap::ScoreUnits(const CellCoord& c) const {
  const long i = Find(PackCell(c));
  if (i < 0) return 0;
  return std::atomic_ref<const std::int64_t>(scores_[i]).load(
      std::memory_order_relaxed);
}

CellCoord VoxelMap::CellOf(const Vec3& p) const {
  return {FloorToInt(p.x() / resolution_), FloorToInt(p.y() / resolution_),
          FloorToInt(p.z() / resolution_)};
}

void VoxelMap::AddScoreUnits(const CellCoord& c, std::int64_t units) {
  const long i = Find(PackCell(c));
  if (i < 0) throw VoxelMapError("painting an unoccupied cell");
  std::atomic_ref<std::int64_t>(scores_[i]).fetch_add(
      units, std::memory_order_relaxed);
}

void VoxelMap::IncrementViews(const CellCoord& c) {
  const long i = Find(PackCell(c));
  if (i < 0) throw VoxelMapError("counting views of an unoccupied cell");
  std::atomic_ref<std::uint32_t>(views_[i]).fetch_add(
      1, std::memory_order_relaxed);
}

std::int64_t VoxelMap::TotalScoreUnits() const {
  std::int64_t total = 0;
  ForEachCell([&](const CellCoord&, std::int64_t s, std::uint32_t) {
    total += s;
  });
  return total;
}

std::optional<VoxelHit> VoxelMap::Raycast(const Ray& ray,
                                          double max_range) const {
  if (!sealed_) throw VoxelMapError("raycast on an unsealed map");
  if (count_ == 0 || !(max_range > 0.0)) return std::nullopt;

  const Vec3& o = ray.origin;
  const Vec3& d = ray.direction;
  const double r = resolution_;
  const double brick = r * (1 << kBrickShift);
  std::array<double, 3> inv{};
  std::array<int, 3> step{};
  for (int a = 0; a < 3; ++a) {
    inv[a] = d[a] != 0.0 ? 1.0 / d[a] : std::numeric_limits<double>::infinity();
    step[a] = d[a] > 0.0 ? 1 : (d[a] < 0.0 ? -1 : 0);
  }

  // Clip against the brick bounding box.
  double t_enter = 0.0;
  double t_exit = max_range;
  for (int a = 0; a < 3; ++a) {
    const double lo = brick_lo_[a] * brick;
    const double hi = (brick_lo_[a] + brick_dims_[a]) * brick;
    if (step[a] == 0) {
      if (o[a] < lo || o[a] > hi) return std::nullopt;
      continue;
    }
    double t0 = PlaneT(lo, o[a], inv[a]);
    double t1 = PlaneT(hi, o[a], inv[a]);
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit) return std::nullopt;

  // Coarse traversal over bricks.
  std::array<int, 3> b{};
  std::array<double, 3> b_next{};
  std::array<double, 3> b_delta{};
  for (int a = 0; a < 3; ++a) {
    b[a] = std::clamp(FloorToInt((o[a] + t_enter * d[a]) / brick),
                      brick_lo_[a], brick_lo_[a] + brick_dims_[a] - 1);
    if (step[a] == 0) {
      b_next[a] = std::numeric_limits<double>::infinity();
      b_delta[a] = std::numeric_limits<double>::infinity();
    } else {
      const int boundary = step[a] > 0 ? b[a] + 1 : b[a];
      b_next[a] = PlaneT(boundary * brick, o[a], inv[a]);
      b_delta[a] = brick * std::abs(inv[a]);
    }
  }

  double t_cur = t_enter;
  while (t_cur <= max_range) {
    if (BrickOccupied(b[0], b[1], b[2])) {
      // Fine traversal of the cells inside this brick.
      std::array<int, 3> lo{}, hi{}, c{};
      for (int a = 0; a < 3; ++a) {
        lo[a] = b[a] << kBrickShift;
        hi[a] = lo[a] + (1 << kBrickShift) - 1;
        c[a] = std::clamp(FloorToInt((o[a] + t_cur * d[a]) / r), lo[a], hi[a]);
      }
      while (true) {
        std::array<double, 3> next{};
        double entry = 0.0;
        for (int a = 0; a < 3; ++a) {
          if (step[a] == 0) {
            next[a] = std::numeric_limits<double>::infinity();
            continue;
          }
          const int near = step[a] > 0 ? c[a] : c[a] + 1;
          entry = std::max(entry, PlaneT(near * r, o[a], inv[a]));
          next[a] = PlaneT((near + step[a]) * r, o[a], inv[a]);
        }
        if (entry > max_range) return std::nullopt;
        if (Find(PackCell(c)) >= 0) return VoxelHit{c, entry};
        int axis = 0;
        if (next[1] < next[axis]) axis = 1;
        if (next[2] < next[axis]) axis = 2;
        if (!std::isfinite(next[axis])) break;
        c[axis] += step[axis];
        if (c[axis] < lo[axis] || c[axis] > hi[axis]) break;
      }
    }
    int axis = 0;
    if (b_next[1] < b_next[axis]) axis = 1;
    if (b_next[2] < b_next[axis]) axis = 2;
    if (!std::isfinite(b_next[axis])) return std::nullopt;
    t_cur = b_next[axis];
    b[axis] += step[axis];
    if (b[axis] < brick_lo_[axis] ||
        b[axis] >= brick_lo_[axis] + brick_dims_[axis]) {
      return std::nullopt;
    }
    b_next[axis] += b_delta[axis];
  }
  return std::nullopt;
}

void VoxelMap::Save(const std::filesystem::path& path) const {
  std::vector<std::size_t> slots;
  slots.reserve(count_);
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (keys_[i] != kEmpty) slots.push_back(i);
  }
  std::sort(slots.begin(), slots.end(),
            [&](std::size_t a, std::size_t b) { return keys_[a] < keys_[b]; });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VoxelMapError("cannot write map snapshot " + path.string());
  out.write(kSnapshotMagic, 4);
  PutLe<std::uint32_t>(out, kSnapshotVersion);
  PutLe<double>(out, resolution_);
  PutLe<std::uint64_t>(out, count_);
  for (std::size_t i : slots) {
    PutLe<std::uint64_t>(out, keys_[i]);
    PutLe<std::int64_t>(out, scores_[i]);
    PutLe<std::uint32_t>(out, views_[i]);
  }
  if (!out) throw VoxelMapError("write failed for " + path.string());
}

VoxelMap VoxelMap::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VoxelMapError("cannot open map snapshot " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kSnapshotMagic, 4) != 0) {
    throw VoxelMapError(path.string() + ": not a map snapshot");
  }
  const auto version = GetLe<std::uint32_t>(in);
  if (version != kSnapshotVersion) {
    throw VoxelMapError(path.string() + ": unsupported snapshot version " +
                        std::to_string(version));
  }
  VoxelMap map(GetLe<double>(in));
  const auto n = GetLe<std::uint64_t>(in);
  std::size_t capacity = 1024;
  while (capacity < 2 * n) capacity *= 2;
  map.Rehash(capacity);
  for (std::uint64_t k = 0; k < n; ++k) {
    const auto key = GetLe<std::uint64_t>(in);
    const auto score = GetLe<std::int64_t>(in);
    const auto views = GetLe<std::uint32_t>(in);
    if (key >> 63) throw VoxelMapError(path.string() + ": invalid cell key");
    map.Insert(key);
    const long i = map.Find(key);
    map.scores_[i] = score;
    map.views_[i] = views;
  }
  if (map.count_ != n) throw VoxelMapError(path.string() + ": duplicate cells");
  map.Seal();
  return map;
}

bool VoxelMap::operator==(const VoxelMap& other) const {
  if (resolution_ != other.resolution_ || count_ != other.count_) return false;
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (keys_[i] == kEmpty) continue;
    const long j = other.Find(keys_[i]);
    if (j < 0 || other.scores_[j] != scores_[i] ||
        other.views_[j] != views_[i]) {
      return false;
    }
  }
  return true;
}

bool TriangleBoxOverlap(const Vec3& box_center, const Vec3& half_size,
                        const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 v0 = a - box_center;
  const Vec3 v1 = b - box_center;
  const Vec3 v2 = c - box_center;
  const std::array<Vec3, 3> edges = {v1 - v0, v2 - v1, v0 - v2};

  // Axes e_i x f_j.
  for (const Vec3& e : edges) {
    for (int k = 0; k < 3; ++k) {
      Vec3 axis = Vec3::Zero();
      axis[(k + 1) % 3] = -e[(k + 2) % 3];
      axis[(k + 2) % 3] = e[(k + 1) % 3];
      const double p0 = axis.dot(v0);
      const double p1 = axis.dot(v1);
      const double p2 = axis.dot(v2);
      const double rad = half_size.cwiseProduct(axis.cwiseAbs()).sum();
      if (std::min({p0, p1, p2}) > rad || std::max({p0, p1, p2}) < -rad) {
        return false;
      }
    }
  }
  // Box face normals.
  for (int k = 0; k < 3; ++k) {
    if (std::min({v0[k], v1[k], v2[k]}) > half_size[k] ||
        std::max({v0[k], v1[k], v2[k]}) < -half_size[k]) {
      return false;
    }
  }
  // Triangle plane.
  const Vec3 normal = edges[0].cross(edges[1]);
  const double dist = normal.dot(v0);
  const double rad = half_size.cwiseProduct(normal.cwiseAbs()).sum();
  return std::abs(dist) <= rad;
}

VoxelMap VoxelizeMesh(const TriangleMesh& mesh, double resolution) {
  if (mesh.triangles.empty()) throw VoxelMapError("cannot voxelize an empty mesh");
  mesh.Validate();
  VoxelMap map(resolution);
  // Work in cell units; the slack keeps faces lying on a cell boundary from
  // slipping between both neighbours through rounding.
  const Vec3 half = Vec3::Constant(0.5 + 1e-9);
  for (const auto& t : mesh.triangles) {
    const Vec3 a = mesh.vertices[t[0]] / resolution;
    const Vec3 b = mesh.vertices[t[1]] / resolution;
    const Vec3 c = mesh.vertices[t[2]] / resolution;
    const Vec3 lo = a.cwiseMin(b).cwiseMin(c);
    const Vec3 hi = a.cwiseMax(b).cwiseMax(c);
    std::array<int, 3> first{}, last{};
    for (int k = 0; k < 3; ++k) {
      first[k] = FloorToInt(lo[k]) - 1;
      last[k] = FloorToInt(hi[k]) + 1;
    }
    for (int z = first[2]; z <= last[2]; ++z) {
      for (int y = first[1]; y <= last[1]; ++y) {
        for (int x = first[0]; x <= last[0]; ++x) {
          const Vec3 center(x + 0.5, y + 0.5, z + 0.5);
          if (TriangleBoxOverlap(center, half, a, b, c)) {
            map.AddOccupied({x, y, z});
          }
        }
      }
    }
  }
  map.Seal();
  return map;
}

std::vector<std::int64_t> QuantizeConfidences(std::span<const Detection> dets) {
  std::vector<std::int64_t> units(dets.size());
  double prefix = 0.0;
  std::int64_t emitted = 0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    prefix += dets[i].confidence;
    const std::int64_t target = std::llround(prefix * kScoreUnitsPerConfidence);
    units[i] = target - emitted;
    emitted = target;
  }
  return units;
}

PaintStats PaintFrame(VoxelMap& map, const CameraIntrinsics& intr,
                      const Pose& pose, const DetectionSet& set,
                      double max_range) {
  const auto units = QuantizeConfidences(set.detections);
  PaintStats stats;
  for (std::size_t i = 0; i < set.detections.size(); ++i) {
    const Detection& det = set.detections[i];
    const auto hit = map.Raycast(PixelRay(det.x, det.y, intr, pose), max_range);
    if (!hit) {
      ++stats.missed;
      continue;
    }
    map.AddScoreUnits(hit->cell, units[i]);
    ++stats.painted;
  }
  return stats;
}

std::size_t VisibilityPass(VoxelMap& map, const CameraIntrinsics& intr,
                           const Pose& pose, double max_range,
                           int pixel_stride) {
  if (pixel_stride < 1) throw VoxelMapError("pixel_stride must be >= 1");
  std::vector<std::uint64_t> seen;
  for (int y = 0; y < intr.height; y += pixel_stride) {
    for (int x = 0; x < intr.width; x += pixel_stride) {
      const auto hit = map.Raycast(PixelRay(x, y, intr, pose), max_range);
      if (hit) seen.push_back(PackCell(hit->cell));
    }
  }
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  for (std::uint64_t key : seen) map.IncrementViews(UnpackCell(key));
  return seen.size();
}

std::optional<CellValues> QueryMap(const VoxelMap& map, const Ray& ray,
                                   double max_range) {
  const auto hit = map.Raycast(ray, max_range);
  if (!hit) return std::nullopt;
  return map.Values(hit->cell);
}

}  // namespace r3d

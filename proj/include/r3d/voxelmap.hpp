#pragma once

#include "r3d/detectors.hpp"
#include "r3d/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace r3d {

class VoxelMapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  /// Optional per-triangle shade in [0, 1]; empty or one entry per triangle.
  std::vector<double> shades;

  /// Throws VoxelMapError on out-of-range indices.
  void Validate() const;
  /// Drops zero-area triangles (and their shades).
  void RemoveDegenerate();
};

/// Minimal OBJ: `v x y z` and triangular `f` records (1-based, `/` suffixes
/// ignored). Other records are skipped.
TriangleMesh ReadObj(const std::filesystem::path& path);
void WriteObj(const std::filesystem::path& path, const TriangleMesh& mesh);

using CellCoord = std::array<int, 3>;

/// 21 bits per axis, two's complement; x in the low bits.
std::uint64_t PackCell(const CellCoord& c);
CellCoord UnpackCell(std::uint64_t key);

inline constexpr int kCellCoordMin = -(1 << 20);
inline constexpr int kCellCoordMax = (1 << 20) - 1;

/// Fixed-point scale for accumulated confidences.
inline constexpr double kScoreUnitsPerConfidence = 1e9;

struct VoxelHit {
  CellCoord cell{};
  double entry_distance = 0.0;
};

struct CellValues {
  double score = 0.0;
  std::uint32_t view_count = 0;
};

/// Sparse occupancy grid anchored at the world origin: cell (i, j, k) spans
/// [i r, (i + 1) r) on each axis. The occupied set is fixed once built;
/// score and view accumulators are updated atomically, so painting and
/// visibility passes may run concurrently from several threads.
class VoxelMap {
 public:
  VoxelMap() = default;
  explicit VoxelMap(double resolution);

  VoxelMap(const VoxelMap&) = delete;
  VoxelMap& operator=(const VoxelMap&) = delete;
  VoxelMap(VoxelMap&&) = default;
  VoxelMap& operator=(VoxelMap&&) = default;

  double resolution() const { return resolution_; }
  std::size_t cell_count() const { return count_; }

  /// Marks cells occupied. Only valid while building (before Seal()).
  void AddOccupied(const CellCoord& c);
  /// Builds the acceleration structure; required before any ray query.
  void Seal();
  bool sealed() const { return sealed_; }

  bool IsOccupied(const CellCoord& c) const { return Find(PackCell(c)) >= 0; }
  std::optional<CellValues> Values(const CellCoord& c) const;
  std::int64_t ScoreUnits(const CellCoord& c) const;

  CellCoord CellOf(const Vec3& p) const;

  /// First occupied cell along the ray whose entry distance <= max_range.
  std::optional<VoxelHit> Raycast(const Ray& ray, double max_range) const;

  /// Accumulates into an occupied cell; out-of-map cells throw.
  void AddScoreUnits(const CellCoord& c, std::int64_t units);
  void IncrementViews(const CellCoord& c);

  /// Sum of score units over all cells.
  std::int64_t TotalScoreUnits() const;

  /// Visits every occupied cell in unspecified order.
  template <typename Fn>
  void ForEachCell(Fn&& fn) const {
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (keys_[i] != kEmpty) fn(UnpackCell(keys_[i]), scores_[i], views_[i]);
    }
  }

  /// Snapshot: magic "R3DV", u32 version, f64 resolution, u64 cell count,
  /// then per cell u64 packed key, i64 score units, u32 views (little
  /// endian), cells sorted by key.
  void Save(const std::filesystem::path& path) const;
  static VoxelMap Load(const std::filesystem::path& path);

  bool operator==(const VoxelMap& other) const;

 private:
  static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};
  static constexpr int kBrickShift = 3;  // 8^3 cells per brick

  long Find(std::uint64_t key) const;
  void Insert(std::uint64_t key);
  void Rehash(std::size_t capacity);
  bool BrickOccupied(int bx, int by, int bz) const;

  double resolution_ = 0.0;
  bool sealed_ = false;
  std::size_t count_ = 0;
  std::vector<std::uint64_t> keys_;
  std::vector<std::int64_t> scores_;
  std::vector<std::uint32_t> views_;

  // Dense bitmap of bricks containing at least one occupied cell.
  std::array<int, 3> brick_lo_{};
  std::array<int, 3> brick_dims_{};
  std::vector<std::uint64_t> brick_bits_;
};

/// Marks every cell whose closed cube overlaps a mesh triangle.
VoxelMap VoxelizeMesh(const TriangleMesh& mesh, double resolution);

/// Closed box / closed triangle overlap by separating axes.
bool TriangleBoxOverlap(const Vec3& box_center, const Vec3& half_size,
                        const Vec3& a, const Vec3& b, const Vec3& c);

/// Splits the confidences of a set into integer units whose total equals
/// round(sum * 1e9), so a 1/N-normalized set always contributes exactly 1e9.
std::vector<std::int64_t> QuantizeConfidences(std::span<const Detection> dets);

struct PaintStats {
  std::size_t painted = 0;
  std::size_t missed = 0;
};

/// Adds each detection's confidence to the first cell its pixel ray hits.
PaintStats PaintFrame(VoxelMap& map, const CameraIntrinsics& intr,
                      const Pose& pose, const DetectionSet& set,
                      double max_range);

/// Increments view_count once for every distinct cell hit by the rays of
/// every pixel_stride-th pixel. Returns the number of distinct cells.
std::size_t VisibilityPass(VoxelMap& map, const CameraIntrinsics& intr,
                           const Pose& pose, double max_range,
                           int pixel_stride);

std::optional<CellValues> QueryMap(const VoxelMap& map, const Ray& ray,
                                   double max_range);

}  // namespace r3d

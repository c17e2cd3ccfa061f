#pragma once

#include "r3d/geometry.hpp"
#include "r3d/raster.hpp"
#include "r3d/synth.hpp"
#include "r3d/voxelmap.hpp"

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace r3d {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit binary graymap (P5); intensities are mapped to [0, 1].
GrayImage ReadPgm(const std::filesystem::path& path);
void WritePgm(const std::filesystem::path& path, const GrayImage& image);

/// Little-endian float32, row-major, meters; dimensions come from the caller.
DepthMap ReadDepthBin(const std::filesystem::path& path, int width, int height);
void WriteDepthBin(const std::filesystem::path& path, const DepthMap& depth);

/// On-disk layout:
///   intrinsics.txt, poses.txt, mesh.obj,
///   frames/NNNNNN.pgm, depth/NNNNNN.bin
/// plus corners.txt / junctions.txt for synthetic scenes (x y z per line).
struct Dataset {
  CameraIntrinsics intrinsics;
  std::vector<RenderedFrame> frames;
  TriangleMesh mesh;
  std::vector<Vec3> corners;
  std::vector<Vec3> junctions;

  std::vector<int> FrameIndices() const;
};

std::filesystem::path FramePath(const std::filesystem::path& root, int index);
std::filesystem::path DepthPath(const std::filesystem::path& root, int index);

void WriteDataset(const std::filesystem::path& root, const Dataset& dataset);
/// `load_images = false` skips the graymaps (depth and poses are always read).
Dataset ReadDataset(const std::filesystem::path& root, bool load_images = true);

std::vector<Vec3> ReadPoints(const std::filesystem::path& path);
void WritePoints(const std::filesystem::path& path, const std::vector<Vec3>& pts);

}  // namespace r3d

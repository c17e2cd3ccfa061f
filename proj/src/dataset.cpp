#include "r3d/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace r3d {
namespace fs = std::filesystem;

namespace {

std::string Numbered(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d.%s", index, ext);
  return buf;
}

// Reads the next whitespace-delimited PGM header token, skipping comments.
std::string HeaderToken(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

GrayImage ReadPgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  if (HeaderToken(in) != "P5") throw DatasetError(path.string() + ": not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(HeaderToken(in));
    h = std::stoi(HeaderToken(in));
    maxval = std::stoi(HeaderToken(in));
  } catch (const std::exception&) {
    throw DatasetError(path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw DatasetError(path.string() + ": unsupported PGM dimensions or depth");
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  if (!in.read(reinterpret_cast<char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()))) {
    throw DatasetError(path.string() + ": truncated PGM");
  }
  GrayImage img(w, h);
  auto v = img.values();
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    v[i] = static_cast<float>(bytes[i] / static_cast<double>(maxval));
  }
  return img;
}

void WritePgm(const fs::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  auto v = image.values();
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double q = std::round(std::clamp(static_cast<double>(v[i]), 0.0, 1.0) * 255.0);
    bytes[i] = static_cast<unsigned char>(q);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DatasetError("write failed for " + path.string());
}

DepthMap ReadDepthBin(const fs::path& path, int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  DepthMap depth(width, height);
  auto v = depth.values();
  std::vector<unsigned char> bytes(v.size() * 4);
  if (!in.read(reinterpret_cast<char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size())) ||
      in.peek() != std::char_traits<char>::eof()) {
    throw DatasetError(path.string() + ": size does not match " +
                       std::to_string(width) + "x" + std::to_string(height));
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    unsigned char* b = &bytes[4 * i];
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 4);
    float f;
    std::memcpy(&f, b, 4);
    if (!std::isfinite(f) || f < 0.0f) {
      throw DatasetError(path.string() + ": depth must be finite and >= 0");
    }
    v[i] = f;
  }
  return depth;
}

void WriteDepthBin(const fs::path& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  for (float f : depth.values()) {
    unsigned char b[4];
    std::memcpy(b, &f, 4);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 4);
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!out) throw DatasetError("write failed for " + path.string());
}

std::vector<int> Dataset::FrameIndices() const {
  std::vector<int> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.frame_index);
  return out;
}

fs::path FramePath(const fs::path& root, int index) {
  return root / "frames" / Numbered(index, "pgm");
}

fs::path DepthPath(const fs::path& root, int index) {
  return root / "depth" / Numbered(index, "bin");
}

std::vector<Vec3> ReadPoints(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::vector<Vec3> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z())) {
      throw DatasetError(path.string() + ": malformed point line '" + line + "'");
    }
    pts.push_back(p);
  }
  return pts;
}

void WritePoints(const fs::path& path, const std::vector<Vec3>& pts) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  char buf[96];
  for (const Vec3& p : pts) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
}

void WriteDataset(const fs::path& root, const Dataset& dataset) {
  fs::create_directories(root / "frames");
  fs::create_directories(root / "depth");
  WriteIntrinsics(root / "intrinsics.txt", dataset.intrinsics);
  std::vector<IndexedPose> poses;
  for (const RenderedFrame& f : dataset.frames) {
    poses.push_back({f.frame_index, f.pose});
    WritePgm(FramePath(root, f.frame_index), f.image);
    WriteDepthBin(DepthPath(root, f.frame_index), f.depth);
  }
  WritePoses(root / "poses.txt", poses);
  WriteObj(root / "mesh.obj", dataset.mesh);
  WritePoints(root / "corners.txt", dataset.corners);
  WritePoints(root / "junctions.txt", dataset.junctions);
}

Dataset ReadDataset(const fs::path& root, bool load_images) {
  if (!fs::is_directory(root)) {
    throw DatasetError("dataset directory " + root.string() + " does not exist");
  }
  Dataset ds;
  ds.intrinsics = ReadIntrinsics(root / "intrinsics.txt");
  for (const IndexedPose& ip : ReadPoses(root / "poses.txt")) {
    RenderedFrame f;
    f.frame_index = ip.frame_index;
    f.pose = ip.pose;
    f.intrinsics = ds.intrinsics;
    f.depth = ReadDepthBin(DepthPath(root, ip.frame_index), ds.intrinsics.width,
                           ds.intrinsics.height);
    if (load_images) {
      f.image = ReadPgm(FramePath(root, ip.frame_index));
      if (!f.image.SameShape(f.depth)) {
        throw DatasetError(FramePath(root, ip.frame_index).string() +
                           ": image size does not match intrinsics");
      }
    }
    ds.frames.push_back(std::move(f));
  }
  if (fs::exists(root / "mesh.obj")) ds.mesh = ReadObj(root / "mesh.obj");
  if (fs::exists(root / "corners.txt")) ds.corners = ReadPoints(root / "corners.txt");
  if (fs::exists(root / "junctions.txt")) ds.junctions = ReadPoints(root / "junctions.txt");
  return ds;
}

}  // namespace r3d

#include "r3d/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace r3d {
namespace {

namespace fs = std::filesystem;

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string Format(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
template <typename T>
std::string FormatInt(T v) {
  return std::to_string(v);
}

template <typename T>
T ParseNumber(const std::string& text) {
  T v{};
  const std::string s = Trim(text);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw std::invalid_argument("cannot parse '" + s + "' as a number");
  }
  return v;
}

std::vector<std::string> ParseList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}
std::string FormatList(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

Vec3 ParseVec3(const std::string& text) {
  const auto parts = ParseList(text);
  if (parts.size() != 3) throw std::invalid_argument("expected three comma-separated numbers");
  return {ParseNumber<double>(parts[0]), ParseNumber<double>(parts[1]),
          ParseNumber<double>(parts[2])};
}
std::string FormatVec3(const Vec3& v) {
  return Format(v.x()) + ", " + Format(v.y()) + ", " + Format(v.z());
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> check;  // empty string = ok
};

using Check = std::function<std::string(const RunConfig&)>;

template <typename T, typename Ref>
Field Num(const char* section, const char* key, Ref ref, Check check = {}) {
  Field f{section, key, {}, {}, std::move(check)};
  f.get = [ref](const RunConfig& c) {
    const T v = ref(const_cast<RunConfig&>(c));
    if constexpr (std::is_floating_point_v<T>) return Format(v);
    else return FormatInt(v);
  };
  f.set = [ref](RunConfig& c, const std::string& s) { ref(c) = ParseNumber<T>(s); };
  return f;
}

template <typename Ref>
Field Text(const char* section, const char* key, Ref ref, Check check = {}) {
  Field f{section, key, {}, {}, std::move(check)};
  f.get = [ref](const RunConfig& c) {
    return std::string(ref(const_cast<RunConfig&>(c)));
  };
  f.set = [ref](RunConfig& c, const std::string& s) { ref(c) = Trim(s); };
  return f;
}

template <typename Ref>
Field List(const char* section, const char* key, Ref ref, Check check = {}) {
  Field f{section, key, {}, {}, std::move(check)};
  f.get = [ref](const RunConfig& c) { return FormatList(ref(const_cast<RunConfig&>(c))); };
  f.set = [ref](RunConfig& c, const std::string& s) { ref(c) = ParseList(s); };
  return f;
}

template <typename Ref>
Field Vector3(const char* section, const char* key, Ref ref, Check check = {}) {
  Field f{section, key, {}, {}, std::move(check)};
  f.get = [ref](const RunConfig& c) { return FormatVec3(ref(const_cast<RunConfig&>(c))); };
  f.set = [ref](RunConfig& c, const std::string& s) { ref(c) = ParseVec3(s); };
  return f;
}

template <typename Get>
Check AtLeast(Get get, double lo) {
  return [get, lo](const RunConfig& c) -> std::string {
    const double v = static_cast<double>(get(const_cast<RunConfig&>(c)));
    if (v >= lo) return "";
    return "must be >= " + Format(lo) + " (got " + Format(v) + ")";
  };
}
template <typename Get>
Check Positive(Get get) {
  return [get](const RunConfig& c) -> std::string {
    const double v = static_cast<double>(get(const_cast<RunConfig&>(c)));
    if (v > 0.0) return "";
    return "must be > 0 (got " + Format(v) + ")";
  };
}
template <typename Get>
Check Within(Get get, double lo, double hi) {
  return [get, lo, hi](const RunConfig& c) -> std::string {
    const double v = static_cast<double>(get(const_cast<RunConfig&>(c)));
    if (v >= lo && v <= hi) return "";
    return "must lie in [" + Format(lo) + ", " + Format(hi) + "] (got " + Format(v) + ")";
  };
}
template <typename Get>
Check NonNegative(Get get) {
  return AtLeast(get, 0.0);
}
template <typename Get>
Check OddPositive(Get get) {
  return [get](const RunConfig& c) -> std::string {
    const int v = get(const_cast<RunConfig&>(c));
    if (v >= 1 && v % 2 == 1) return "";
    return "must be a positive odd number (got " + std::to_string(v) + ")";
  };
}

#define R3D_REF(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    // run
    f.push_back(Text("run", "dataset", [](RunConfig& c) -> auto& { return c.dataset; }));
    f.back().get = [](const RunConfig& c) { return c.dataset.string(); };
    f.push_back(Text("run", "output", [](RunConfig& c) -> auto& { return c.output; }));
    f.back().get = [](const RunConfig& c) { return c.output.string(); };
    f.push_back(Num<std::uint64_t>("run", "seed", R3D_REF(seed)));
    f.back().set = [](RunConfig& c, const std::string& s) {
      c.seed = ParseNumber<std::uint64_t>(s);
      c.scene.seed = c.seed;
    };
    f.push_back(Num<int>("run", "threads", R3D_REF(threads),
                         AtLeast(R3D_REF(threads), 1)));

    // synth
    f.push_back(Vector3("synth", "room_origin", R3D_REF(scene.room_origin)));
    f.push_back(Vector3("synth", "room_size", R3D_REF(scene.room),
                        [](const RunConfig& c) -> std::string {
                          if ((c.scene.room.array() > 0.0).all()) return "";
                          return "every room dimension must be > 0";
                        }));
    f.push_back(Num<int>("synth", "box_count", R3D_REF(scene.box_count),
                         NonNegative(R3D_REF(scene.box_count))));
    f.push_back(Num<double>("synth", "box_min_size", R3D_REF(scene.box_min_size),
                            Positive(R3D_REF(scene.box_min_size))));
    f.push_back(Num<double>("synth", "box_max_size", R3D_REF(scene.box_max_size),
                            [](const RunConfig& c) -> std::string {
                              if (c.scene.box_max_size >= c.scene.box_min_size) return "";
                              return "must be >= box_min_size";
                            }));
    f.push_back(Num<double>("synth", "box_clearance", R3D_REF(scene.box_clearance),
                            NonNegative(R3D_REF(scene.box_clearance))));
    f.push_back(Num<double>("synth", "checker_probability",
                            R3D_REF(scene.checker_probability),
                            Within(R3D_REF(scene.checker_probability), 0, 1)));
    f.push_back(Num<double>("synth", "checker_period", R3D_REF(scene.checker_period),
                            Positive(R3D_REF(scene.checker_period))));
    f.push_back(Num<double>("synth", "checker_contrast", R3D_REF(scene.checker_contrast),
                            Within(R3D_REF(scene.checker_contrast), 0, 1)));
    f.push_back(Num<double>("synth", "min_shade", R3D_REF(scene.min_shade),
                            Within(R3D_REF(scene.min_shade), 0, 1)));
    f.push_back(Num<double>("synth", "max_shade", R3D_REF(scene.max_shade),
                            [](const RunConfig& c) -> std::string {
                              if (c.scene.max_shade >= c.scene.min_shade &&
                                  c.scene.max_shade <= 1.0) {
                                return "";
                              }
                              return "must lie in [min_shade, 1]";
                            }));
    f.push_back(Num<int>("synth", "placement_retries", R3D_REF(scene.placement_retries),
                         AtLeast(R3D_REF(scene.placement_retries), 1)));
    f.push_back(Num<double>("synth", "pitch_sigma", R3D_REF(photographer.pitch_sigma),
                            NonNegative(R3D_REF(photographer.pitch_sigma))));
    f.push_back(Num<double>("synth", "roll_sigma", R3D_REF(photographer.roll_sigma),
                            NonNegative(R3D_REF(photographer.roll_sigma))));
    f.push_back(Num<double>("synth", "lower_bound_m", R3D_REF(photographer.lower_bound_m),
                            NonNegative(R3D_REF(photographer.lower_bound_m))));
    f.push_back(Num<double>("synth", "upper_vertical_m",
                            R3D_REF(photographer.upper_vertical_m),
                            Positive(R3D_REF(photographer.upper_vertical_m))));
    f.push_back(Num<double>("synth", "upper_sides_m", R3D_REF(photographer.upper_sides_m),
                            Positive(R3D_REF(photographer.upper_sides_m))));
    f.push_back(Num<double>("synth", "upper_view_m", R3D_REF(photographer.upper_view_m),
                            Positive(R3D_REF(photographer.upper_view_m))));
    f.push_back(Num<double>("synth", "images_per_m3", R3D_REF(photographer.images_per_m3),
                            Positive(R3D_REF(photographer.images_per_m3))));
    f.push_back(Num<int>("synth", "volume_samples", R3D_REF(photographer.volume_samples),
                         AtLeast(R3D_REF(photographer.volume_samples), 1)));
    f.push_back(Num<int>("synth", "max_attempts_per_frame",
                         R3D_REF(photographer.max_attempts_per_frame),
                         AtLeast(R3D_REF(photographer.max_attempts_per_frame), 1)));
    f.push_back(Num<double>("synth", "max_range_m", R3D_REF(photographer.max_range_m),
                            Positive(R3D_REF(photographer.max_range_m))));
    f.push_back(Num<double>("synth", "fx", R3D_REF(intrinsics.fx), Positive(R3D_REF(intrinsics.fx))));
    f.push_back(Num<double>("synth", "fy", R3D_REF(intrinsics.fy), Positive(R3D_REF(intrinsics.fy))));
    f.push_back(Num<double>("synth", "cx", R3D_REF(intrinsics.cx)));
    f.push_back(Num<double>("synth", "cy", R3D_REF(intrinsics.cy)));
    f.push_back(Num<int>("synth", "width", R3D_REF(intrinsics.width),
                         AtLeast(R3D_REF(intrinsics.width), 1)));
    f.push_back(Num<int>("synth", "height", R3D_REF(intrinsics.height),
                         AtLeast(R3D_REF(intrinsics.height), 1)));
    f.push_back(Num<double>("synth", "validation_voxel_size", R3D_REF(validation_voxel_size),
                            Positive(R3D_REF(validation_voxel_size))));

    // detect
    f.push_back(List("detect", "detectors", R3D_REF(detectors.enabled),
                     [](const RunConfig& c) -> std::string {
                       const auto& known = NativeDetectorNames();
                       for (const auto& n : c.detectors.enabled) {
                         if (std::find(known.begin(), known.end(), n) == known.end()) {
                           return "unknown detector '" + n + "' (native: " + FormatList(known) + ")";
                         }
                       }
                       return "";
                     }));
    f.push_back(Text("detect", "external_detections",
                     [](RunConfig& c) -> auto& { return c.external_detections; }));
    f.back().get = [](const RunConfig& c) { return c.external_detections.string(); };
    f.push_back(Num<double>("detect", "harris_k", R3D_REF(detectors.harris.k),
                            Positive(R3D_REF(detectors.harris.k))));
    f.push_back(Num<double>("detect", "harris_threshold", R3D_REF(detectors.harris.threshold),
                            NonNegative(R3D_REF(detectors.harris.threshold))));
    f.push_back(Num<double>("detect", "harris_min_response",
                            R3D_REF(detectors.harris.min_response),
                            NonNegative(R3D_REF(detectors.harris.min_response))));
    f.push_back(Num<int>("detect", "harris_nms_radius", R3D_REF(detectors.harris.nms_radius),
                         AtLeast(R3D_REF(detectors.harris.nms_radius), 1)));
    f.push_back(Num<double>("detect", "shi_tomasi_quality",
                            R3D_REF(detectors.shi_tomasi.quality),
                            NonNegative(R3D_REF(detectors.shi_tomasi.quality))));
    f.push_back(Num<double>("detect", "shi_tomasi_min_response",
                            R3D_REF(detectors.shi_tomasi.min_response),
                            NonNegative(R3D_REF(detectors.shi_tomasi.min_response))));
    f.push_back(Num<int>("detect", "shi_tomasi_nms_radius",
                         R3D_REF(detectors.shi_tomasi.nms_radius),
                         AtLeast(R3D_REF(detectors.shi_tomasi.nms_radius), 1)));
    f.push_back(Num<std::size_t>("detect", "shi_tomasi_max_count",
                                 R3D_REF(detectors.shi_tomasi.max_count),
                                 AtLeast(R3D_REF(detectors.shi_tomasi.max_count), 1)));
    f.push_back(Num<double>("detect", "fast_threshold", R3D_REF(detectors.fast.threshold),
                            Positive(R3D_REF(detectors.fast.threshold))));
    f.push_back(Num<int>("detect", "fast_arc", R3D_REF(detectors.fast.arc),
                         Within(R3D_REF(detectors.fast.arc), 1, 16)));
    f.push_back(Num<int>("detect", "fast_nms_radius", R3D_REF(detectors.fast.nms_radius),
                         AtLeast(R3D_REF(detectors.fast.nms_radius), 1)));
    f.push_back(Num<double>("detect", "dog_sigma1", R3D_REF(detectors.dog.sigma1),
                            Positive(R3D_REF(detectors.dog.sigma1))));
    f.push_back(Num<double>("detect", "dog_sigma2", R3D_REF(detectors.dog.sigma2),
                            [](const RunConfig& c) -> std::string {
                              if (c.detectors.dog.sigma2 > c.detectors.dog.sigma1) return "";
                              return "must be > dog_sigma1";
                            }));
    f.push_back(Num<double>("detect", "dog_threshold", R3D_REF(detectors.dog.threshold),
                            NonNegative(R3D_REF(detectors.dog.threshold))));
    f.push_back(Num<int>("detect", "dog_nms_radius", R3D_REF(detectors.dog.nms_radius),
                         AtLeast(R3D_REF(detectors.dog.nms_radius), 1)));

    // paint
    f.push_back(Num<double>("paint", "voxel_size", R3D_REF(voxel_size),
                            Positive(R3D_REF(voxel_size))));
    f.push_back(Num<double>("paint", "max_range_m", R3D_REF(paint.max_range_m),
                            Positive(R3D_REF(paint.max_range_m))));
    f.push_back(Num<int>("paint", "visibility_stride", R3D_REF(paint.visibility_stride),
                         AtLeast(R3D_REF(paint.visibility_stride), 1)));
    f.push_back(List("paint", "painters", R3D_REF(painters)));

    // label
    f.push_back(List("label", "sources", R3D_REF(label_sources)));
    f.push_back(Text("label", "fallback_detector", R3D_REF(fallback_detector)));
    f.push_back(Num<int>("label", "count_kernel", R3D_REF(label.count_kernel),
                         OddPositive(R3D_REF(label.count_kernel))));
    f.push_back(Num<double>("label", "min_count", R3D_REF(label.min_count),
                            Positive(R3D_REF(label.min_count))));
    f.push_back(Num<double>("label", "dog_sigma1", R3D_REF(label.dog_sigma1),
                            Positive(R3D_REF(label.dog_sigma1))));
    f.push_back(Num<double>("label", "dog_sigma2", R3D_REF(label.dog_sigma2),
                            [](const RunConfig& c) -> std::string {
                              if (c.label.dog_sigma2 > c.label.dog_sigma1) return "";
                              return "must be > dog_sigma1";
                            }));
    f.push_back(Num<double>("label", "peak_min", R3D_REF(label.peak_min),
                            NonNegative(R3D_REF(label.peak_min))));
    f.push_back(Num<double>("label", "near_reject_m", R3D_REF(label.near_reject_m),
                            NonNegative(R3D_REF(label.near_reject_m))));
    f.push_back(Num<int>("label", "coincidence_px", R3D_REF(label.coincidence_px),
                         NonNegative(R3D_REF(label.coincidence_px))));
    f.push_back(Num<double>("label", "priority_sigma", R3D_REF(label.priority_sigma),
                            Positive(R3D_REF(label.priority_sigma))));
    f.push_back(Num<int>("label", "maxima_radius", R3D_REF(label.maxima_radius),
                         AtLeast(R3D_REF(label.maxima_radius), 1)));
    f.push_back(Num<double>("label", "score_threshold", R3D_REF(label.score_threshold),
                            NonNegative(R3D_REF(label.score_threshold))));
    f.push_back(Num<int>("label", "view_threshold", R3D_REF(label.view_threshold),
                         NonNegative(R3D_REF(label.view_threshold))));
    f.push_back(Num<double>("label", "max_range_m", R3D_REF(label.max_range_m),
                            Positive(R3D_REF(label.max_range_m))));

    // eval
    f.push_back(List("eval", "detectors", R3D_REF(eval_detectors)));
    f.push_back(Num<int>("eval", "frame_stride", R3D_REF(eval.frame_stride),
                         AtLeast(R3D_REF(eval.frame_stride), 1)));
    f.push_back(Num<double>("eval", "min_overlap", R3D_REF(eval.min_overlap),
                            Within(R3D_REF(eval.min_overlap), 0, 1)));
    f.push_back(Num<double>("eval", "eps_floor_m", R3D_REF(eval.eps_floor_m),
                            NonNegative(R3D_REF(eval.eps_floor_m))));
    f.push_back(Num<double>("eval", "eps_rel", R3D_REF(eval.eps_rel),
                            NonNegative(R3D_REF(eval.eps_rel))));
    f.push_back(Num<std::size_t>("eval", "max_detections", R3D_REF(eval.max_detections),
                                 AtLeast(R3D_REF(eval.max_detections), 1)));
    f.push_back(Num<double>("eval", "nms_radius", R3D_REF(eval.nms_radius),
                            NonNegative(R3D_REF(eval.nms_radius))));
    f.push_back(Num<int>("eval", "max_distance", R3D_REF(eval.max_distance),
                         Within(R3D_REF(eval.max_distance), 1, kHistogramBins)));
    f.push_back(Num<int>("eval", "overlap_sample_stride", R3D_REF(eval.overlap_sample_stride),
                         AtLeast(R3D_REF(eval.overlap_sample_stride), 1)));
    return f;
  }();
  return fields;
}

#undef R3D_REF

const Field* FindField(const std::string& section, const std::string& key) {
  for (const Field& f : Fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

bool KnownSection(const std::string& section) {
  for (const Field& f : Fields()) {
    if (f.section == section) return true;
  }
  return false;
}

std::vector<std::string> CrossChecks(const RunConfig& c) {
  std::vector<std::string> errors;
  if (c.dataset.empty()) errors.push_back("[run] dataset: must not be empty");
  if (c.output.empty()) errors.push_back("[run] output: must not be empty");
  if (!c.dataset.empty() && !c.output.empty()) {
    std::error_code ec;
    const fs::path a = fs::weakly_canonical(c.dataset, ec);
    const fs::path b = fs::weakly_canonical(c.output, ec);
    if (a == b) errors.push_back("[run] dataset and output must be distinct paths");
  }
  if (c.intrinsics.cx < 0 || c.intrinsics.cx > c.intrinsics.width - 1 ||
      c.intrinsics.cy < 0 || c.intrinsics.cy > c.intrinsics.height - 1) {
    errors.push_back("[synth] principal point must lie inside the image");
  }
  return errors;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error([&] {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  " + e;
        return msg;
      }()),
      errors_(std::move(errors)) {}

std::vector<std::string> ValidateConfig(const RunConfig& config) {
  std::vector<std::string> errors;
  for (const Field& f : Fields()) {
    if (!f.check) continue;
    const std::string e = f.check(config);
    if (!e.empty()) errors.push_back("[" + f.section + "] " + f.key + ": " + e);
  }
  for (auto& e : CrossChecks(config)) errors.push_back(std::move(e));
  return errors;
}

RunConfig ParseConfig(const std::string& text) {
  RunConfig config;
  std::vector<std::string> errors;
  std::map<const Field*, int> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  for (int line_no = 1; std::getline(in, raw); ++line_no) {
    const std::string where = "line " + std::to_string(line_no) + ": ";
    std::string line = raw.substr(0, raw.find('#'));
    line = Trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + "malformed section header '" + line + "'");
        continue;
      }
      section = Trim(line.substr(1, line.size() - 2));
      if (!KnownSection(section)) {
        errors.push_back(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected 'key = value', got '" + line + "'");
      continue;
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (section.empty()) {
      errors.push_back(where + "key '" + key + "' appears before any [section]");
      continue;
    }
    if (!KnownSection(section)) continue;  // already reported
    const Field* field = FindField(section, key);
    if (!field) {
      errors.push_back(where + "unknown key '" + key + "' in [" + section + "]");
      continue;
    }
    if (auto it = seen.find(field); it != seen.end()) {
      errors.push_back(where + "duplicate key '" + key + "' (first set on line " +
                       std::to_string(it->second) + ")");
      continue;
    }
    seen[field] = line_no;
    try {
      field->set(config, value);
    } catch (const std::exception& e) {
      errors.push_back(where + "[" + section + "] " + key + ": " + e.what());
    }
  }
  for (const Field& f : Fields()) {
    if (!f.check) continue;
    const std::string e = f.check(config);
    if (e.empty()) continue;
    auto it = seen.find(&f);
    const std::string where =
        it == seen.end() ? "" : "line " + std::to_string(it->second) + ": ";
    errors.push_back(where + "[" + f.section + "] " + f.key + ": " + e);
  }
  for (auto& e : CrossChecks(config)) errors.push_back(std::move(e));
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return config;
}

RunConfig LoadConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

void SetConfigValue(RunConfig& config, const std::string& dotted_key,
                    const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos) {
    throw ConfigError({"override '" + dotted_key + "' must be section.key"});
  }
  const Field* f = FindField(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
  if (!f) throw ConfigError({"unknown key '" + dotted_key + "'"});
  try {
    f->set(config, value);
  } catch (const std::exception& e) {
    throw ConfigError({dotted_key + ": " + e.what()});
  }
}

std::string FormatConfigSection(const RunConfig& config, const std::string& section) {
  std::string out = "[" + section + "]\n";
  for (const Field& f : Fields()) {
    if (f.section == section) out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

std::string FormatConfig(const RunConfig& config) {
  std::string out;
  std::string last;
  for (const Field& f : Fields()) {
    if (f.section == last) continue;
    if (!out.empty()) out += "\n";
    out += FormatConfigSection(config, f.section);
    last = f.section;
  }
  return out;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return FormatConfig(a) == FormatConfig(b);
}

}  // namespace r3d

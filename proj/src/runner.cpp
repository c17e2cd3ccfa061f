#include "r3d/runner.hpp"

#include "r3d/dataset.hpp"
#include "r3d/detectors.hpp"
#include "r3d/evaluator.hpp"
#include "r3d/labeler.hpp"
#include "r3d/pipeline.hpp"
#include "r3d/synth.hpp"
#include "r3d/voxelmap.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace r3d {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Every regular file below `root`, sorted.
std::vector<fs::path> FilesUnder(const fs::path& root) {
  std::vector<fs::path> out;
  if (fs::is_regular_file(root)) return {root};
  if (!fs::is_directory(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> FilesWithExtension(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path ManifestPath(const RunConfig& c, const std::string& stage) {
  return c.output / "manifests" / (stage + ".json");
}

fs::path DetectionsDir(const RunConfig& c) { return c.output / "detections"; }
fs::path EvalDir(const RunConfig& c) { return c.output / "eval"; }

struct StagePlan {
  std::vector<fs::path> inputs;
  std::string settings;
  std::vector<fs::path> areas;  // files or directories owned by the stage
  std::function<void()> run;
};

class Stage {
 public:
  Stage(std::string name, const RunConfig& config, const StageOptions& options)
      : name_(std::move(name)), config_(config), options_(options) {}

  StageOutcome Execute(StagePlan plan);

  [[noreturn]] void Fail(ExitCode code, const std::string& message) const {
    throw StageError(name_, code, message);
  }
  void Log(const std::string& message) const {
    if (options_.log) *options_.log << "[" << name_ << "] " << message << "\n";
  }

  const RunConfig& config() const { return config_; }

 private:
  std::uint64_t Fingerprint(const StagePlan& plan) const;
  json RecordOutputs(const StagePlan& plan) const;

  std::string name_;
  const RunConfig& config_;
  const StageOptions& options_;
};

std::string Relative(const fs::path& p, const RunConfig& c) {
  for (const auto& [root, tag] : {std::pair{c.dataset, "dataset"}, std::pair{c.output, "output"}}) {
    const fs::path rel = p.lexically_relative(root);
    if (!rel.empty() && *rel.begin() != "..") return std::string(tag) + "/" + rel.generic_string();
  }
  return p.generic_string();
}

std::uint64_t Stage::Fingerprint(const StagePlan& plan) const {
  std::uint64_t h = Fnv1a(name_.data(), name_.size());
  h = Fnv1a(plan.settings.data(), plan.settings.size(), h);
  for (const fs::path& in : plan.inputs) {
    const std::string tag = Relative(in, config_) + "=" + Hex(HashFile(in));
    h = Fnv1a(tag.data(), tag.size(), h);
  }
  return h;
}

json Stage::RecordOutputs(const StagePlan& plan) const {
  json out = json::object();
  for (const fs::path& area : plan.areas) {
    for (const fs::path& f : FilesUnder(area)) out[Relative(f, config_)] = Hex(HashFile(f));
  }
  return out;
}

StageOutcome Stage::Execute(StagePlan plan) {
  for (const fs::path& in : plan.inputs) {
    if (!fs::is_regular_file(in)) Fail(kExitData, "missing input " + in.string());
  }
  const std::string fingerprint = Hex(Fingerprint(plan));
  const fs::path manifest_path = ManifestPath(config_, name_);

  bool have_outputs = false;
  for (const fs::path& area : plan.areas) have_outputs |= !FilesUnder(area).empty();

  if (fs::exists(manifest_path) && have_outputs) {
    json manifest;
    try {
      std::ifstream in(manifest_path);
      manifest = json::parse(in);
    } catch (const std::exception&) {
      manifest = json::object();
    }
    if (manifest.value("fingerprint", "") == fingerprint &&
        manifest.value("outputs", json::object()) == RecordOutputs(plan)) {
      Log("up to date, skipping");
      return StageOutcome::kSkipped;
    }
  }
  if ((have_outputs || fs::exists(manifest_path)) && !options_.force) {
    Fail(kExitData,
         "existing outputs do not match the current inputs and settings "
         "(or were modified); rerun with --force to replace them");
  }

  fs::remove(manifest_path);
  for (const fs::path& area : plan.areas) fs::remove_all(area);
  plan.run();

  json manifest;
  manifest["stage"] = name_;
  manifest["fingerprint"] = fingerprint;
  json inputs = json::object();
  for (const fs::path& in : plan.inputs) inputs[Relative(in, config_)] = Hex(HashFile(in));
  manifest["inputs"] = inputs;
  manifest["settings"] = plan.settings;
  manifest["outputs"] = RecordOutputs(plan);
  fs::create_directories(manifest_path.parent_path());
  std::ofstream out(manifest_path);
  out << manifest.dump(2) << "\n";
  if (!out) Fail(kExitData, "cannot write " + manifest_path.string());
  return StageOutcome::kRan;
}

std::vector<fs::path> DatasetFiles(const RunConfig& c, bool images) {
  std::vector<fs::path> out;
  for (const fs::path& f : FilesUnder(c.dataset)) {
    const fs::path rel = f.lexically_relative(c.dataset);
    if (!images && *rel.begin() == "frames") continue;
    out.push_back(f);
  }
  return out;
}

Dataset LoadDataset(const Stage& stage, bool images) {
  if (!fs::is_directory(stage.config().dataset)) {
    stage.Fail(kExitData, "dataset directory " + stage.config().dataset.string() +
                              " does not exist (run `synth` first or point [run] dataset at one)");
  }
  Dataset ds = ReadDataset(stage.config().dataset, images);
  if (ds.frames.empty()) stage.Fail(kExitData, "dataset has no frames");
  return ds;
}

DetectionTable LoadDetectionTable(const Stage& stage, const Dataset& ds) {
  const RunConfig& c = stage.config();
  const auto files = FilesWithExtension(DetectionsDir(c), ".csv");
  if (files.empty()) {
    stage.Fail(kExitData, "no detection files in " + DetectionsDir(c).string() +
                              " (run `detect` first)");
  }
  DetectionTable table;
  for (const fs::path& f : files) {
    const std::string name = f.stem().string();
    ExternalDetections ext = LoadExternalDetections(f, ds.intrinsics.width,
                                                    ds.intrinsics.height, ds.FrameIndices());
    for (const DetectionSet& s : ext.sets) {
      if (s.detector_name != name) {
        stage.Fail(kExitData, f.string() + " holds detections named '" + s.detector_name + "'");
      }
    }
    DetectionTable one = TableFromSets(ext.sets, ds.frames);
    auto& column = table[name];
    if (one.count(name)) {
      column = std::move(one.at(name));
    } else {
      column.resize(ds.frames.size());
      for (std::size_t i = 0; i < ds.frames.size(); ++i) {
        column[i].frame_index = ds.frames[i].frame_index;
        column[i].detector_name = name;
      }
    }
  }
  return table;
}

std::vector<std::string> DetectionInputsNames(const RunConfig& c) {
  std::vector<std::string> names;
  for (const fs::path& f : FilesWithExtension(DetectionsDir(c), ".csv")) {
    names.push_back(f.stem().string());
  }
  return names;
}

void RequireNames(const Stage& stage, const std::vector<std::string>& wanted,
                  const DetectionTable& table, const std::string& what) {
  for (const std::string& n : wanted) {
    if (!table.count(n)) {
      stage.Fail(kExitData, what + " '" + n + "' has no detection file (run `detect` with it enabled)");
    }
  }
}

std::vector<std::string> Painters(const RunConfig& c, const DetectionTable& table) {
  if (!c.painters.empty()) return c.painters;
  std::vector<std::string> names;
  for (const auto& [name, column] : table) names.push_back(name);
  return names;
}

// ---------------------------------------------------------------------------

StagePlan SynthPlan(Stage& stage) {
  const RunConfig& c = stage.config();
  StagePlan plan;
  plan.settings = "seed = " + std::to_string(c.seed) + "\n" + FormatConfigSection(c, "synth");
  plan.areas = {c.dataset};
  plan.run = [&stage, &c] {
    SceneSpec spec = c.scene;
    spec.seed = c.seed;
    const Scene scene = BuildScene(spec);
    const VoxelMap occupancy = VoxelizeMesh(scene.mesh, c.validation_voxel_size);
    PhotographResult shots =
        Photograph(scene, occupancy, c.intrinsics, c.photographer, c.seed, c.threads);
    stage.Log(std::to_string(shots.frames.size()) + " frames, effective volume " +
              std::to_string(shots.volume.effective_volume) + " m^3");
    if (!shots.budget_reached) {
      stage.Log("warning: image budget of " + std::to_string(shots.volume.image_budget) +
                " not reached after " + std::to_string(shots.attempts) + " attempts");
    }
    if (shots.frames.empty()) stage.Fail(kExitData, "no valid camera position was found");
    Dataset ds;
    ds.intrinsics = c.intrinsics;
    ds.frames = std::move(shots.frames);
    ds.mesh = scene.mesh;
    ds.corners = scene.corners;
    ds.junctions = scene.junctions;
    WriteDataset(c.dataset, ds);
  };
  return plan;
}

StagePlan DetectPlan(Stage& stage) {
  const RunConfig& c = stage.config();
  StagePlan plan;
  plan.inputs = DatasetFiles(c, true);
  if (!c.external_detections.empty()) plan.inputs.push_back(c.external_detections);
  plan.settings = FormatConfigSection(c, "detect");
  plan.areas = {DetectionsDir(c)};
  plan.run = [&stage, &c] {
    const Dataset ds = LoadDataset(stage, true);
    DetectionTable table = DetectAll(ds.frames, c.detectors, c.threads);
    if (!c.external_detections.empty()) {
      const ExternalDetections ext = LoadExternalDetections(
          c.external_detections, ds.intrinsics.width, ds.intrinsics.height, ds.FrameIndices());
      if (ext.rejected_out_of_bounds > 0) {
        stage.Log("dropped " + std::to_string(ext.rejected_out_of_bounds) +
                  " external detections outside the image");
      }
      for (auto& [name, column] : TableFromSets(ext.sets, ds.frames)) {
        if (table.count(name)) {
          stage.Fail(kExitData, "external detector '" + name + "' clashes with a native detector");
        }
        table[name] = std::move(column);
      }
    }
    if (table.empty()) stage.Fail(kExitUsage, "no detectors selected");
    fs::create_directories(DetectionsDir(c));
    for (const auto& [name, column] : table) {
      std::size_t n = 0;
      for (const auto& s : column) n += s.detections.size();
      stage.Log(name + ": " + std::to_string(n) + " detections");
      WriteDetections(DetectionsPath(c, name), column);
    }
  };
  return plan;
}

StagePlan PaintPlan(Stage& stage) {
  const RunConfig& c = stage.config();
  StagePlan plan;
  plan.inputs = DatasetFiles(c, false);
  for (const auto& n : DetectionInputsNames(c)) plan.inputs.push_back(DetectionsPath(c, n));
  plan.settings = FormatConfigSection(c, "paint");
  plan.areas = {MapPath(c)};
  plan.run = [&stage, &c] {
    const Dataset ds = LoadDataset(stage, false);
    const DetectionTable table = LoadDetectionTable(stage, ds);
    const std::vector<std::string> painters = Painters(c, table);
    RequireNames(stage, painters, table, "painter");
    VoxelMap map = VoxelizeMesh(ds.mesh, c.voxel_size);
    const PaintSummary summary = PaintAll(map, ds.frames, table, painters, c.paint, c.threads);
    const std::int64_t total = map.TotalScoreUnits();
    if (total < 0 || total > static_cast<std::int64_t>(summary.sets * kScoreUnitsPerConfidence)) {
      stage.Fail(kExitInternal, "painted score total " + std::to_string(total) +
                                    " exceeds the number of painted sets");
    }
    stage.Log(std::to_string(map.cell_count()) + " cells, " + std::to_string(summary.sets) +
              " sets, " + std::to_string(summary.painted) + " detections painted, " +
              std::to_string(summary.missed) + " missed");
    fs::create_directories(c.output);
    map.Save(MapPath(c));
  };
  return plan;
}

StagePlan LabelPlan(Stage& stage) {
  const RunConfig& c = stage.config();
  StagePlan plan;
  plan.inputs = DatasetFiles(c, false);
  for (const auto& n : DetectionInputsNames(c)) plan.inputs.push_back(DetectionsPath(c, n));
  if (!fs::exists(MapPath(c))) {
    stage.Fail(kExitData, "missing map snapshot " + MapPath(c).string() + " (run `paint` first)");
  }
  plan.inputs.push_back(MapPath(c));
  plan.settings = FormatConfigSection(c, "paint") + FormatConfigSection(c, "label");
  plan.areas = {LabelsPath(c)};
  plan.run = [&stage, &c] {
    const Dataset ds = LoadDataset(stage, false);
    const DetectionTable table = LoadDetectionTable(stage, ds);
    const std::vector<std::string> sources =
        c.label_sources.empty() ? Painters(c, table) : c.label_sources;
    RequireNames(stage, sources, table, "label source");
    std::string fallback = c.fallback_detector;
    if (fallback == "none") fallback.clear();
    if (!fallback.empty()) RequireNames(stage, {fallback}, table, "fallback detector");
    const VoxelMap map = VoxelMap::Load(MapPath(c));
    const std::vector<LabelSet> labels =
        LabelAll(map, ds.frames, table, sources, fallback, c.label, c.threads);
    std::size_t n = 0;
    for (const auto& s : labels) n += s.labels.size();
    stage.Log(std::to_string(n) + " labels over " + std::to_string(labels.size()) + " frames");
    WriteLabels(LabelsPath(c), labels);
  };
  return plan;
}

std::vector<std::vector<Detection>> LabelDetections(const std::vector<LabelSet>& sets,
                                                    const Dataset& ds, const Stage& stage) {
  std::map<int, const LabelSet*> by_frame;
  for (const auto& s : sets) by_frame[s.frame_index] = &s;
  std::vector<std::vector<Detection>> out(ds.frames.size());
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    auto it = by_frame.find(ds.frames[i].frame_index);
    if (it == by_frame.end()) continue;
    for (const Label& l : it->second->labels) out[i].push_back(l.detection);
    by_frame.erase(it);
  }
  if (!by_frame.empty()) {
    stage.Fail(kExitData, "labels refer to frame " + std::to_string(by_frame.begin()->first) +
                              " which is not in the dataset");
  }
  return out;
}

StagePlan EvalPlan(Stage& stage) {
  const RunConfig& c = stage.config();
  StagePlan plan;
  plan.inputs = DatasetFiles(c, false);
  std::vector<std::string> names = c.eval_detectors;
  if (names.empty()) {
    names = DetectionInputsNames(c);
    if (fs::exists(LabelsPath(c))) names.push_back(kLabelsName);
  }
  if (names.empty()) stage.Fail(kExitData, "nothing to evaluate (run `detect` first)");
  for (const auto& n : names) {
    const fs::path p = n == kLabelsName ? LabelsPath(c) : DetectionsPath(c, n);
    if (!fs::exists(p)) {
      stage.Fail(kExitData, "missing " + p.string() + " for detector '" + n + "'");
    }
    plan.inputs.push_back(p);
  }
  plan.settings = FormatConfigSection(c, "eval");
  plan.areas = {EvalDir(c)};
  plan.run = [&stage, &c, names] {
    const Dataset ds = LoadDataset(stage, false);
    DetectionTable table;
    if (std::any_of(names.begin(), names.end(), [](const auto& n) { return n != kLabelsName; })) {
      table = LoadDetectionTable(stage, ds);
    }
    fs::create_directories(EvalDir(c));
    const std::vector<FrameView> views = MakeViews(ds.frames);
    for (const std::string& name : names) {
      std::vector<std::vector<Detection>> detections;
      if (name == kLabelsName) {
        detections = LabelDetections(ReadLabels(LabelsPath(c)), ds, stage);
      } else {
        for (const DetectionSet& s : table.at(name)) detections.push_back(s.detections);
      }
      const Evaluation ev = EvaluateDetector(ds.intrinsics, ds.frames, detections, c.eval, c.threads);
      for (const DistanceHistogram& h : ev.histograms) {
        std::uint64_t sum = h.unmatched;
        for (auto b : h.bins) sum += b;
        if (sum != h.visible_queries) {
          stage.Fail(kExitInternal, name + ": histogram bins do not sum to the visible queries");
        }
      }
      ExportReport(ev.report, ReportCsvPath(c, name), EvalDir(c) / (name + ".json"), c.eval, name);
      WritePairHistograms(PairCsvPath(c, name), ev.pairs, views, ev.histograms);
      char buf[96];
      std::snprintf(buf, sizeof buf, ": %zu pairs, %.2f repeatable in bins 0-3",
                    ev.report.pair_count, ev.report.repeatable_0_3);
      stage.Log(name + buf);
    }
  };
  return plan;
}

std::vector<fs::path> ReportInputs(const RunConfig& c) {
  std::vector<fs::path> out;
  for (const fs::path& f : FilesWithExtension(EvalDir(c), ".csv")) {
    if (f.stem().string().ends_with("_pairs")) continue;
    out.push_back(f);
    out.push_back(fs::path(f).replace_extension(".json"));
  }
  return out;
}

std::string FormatTable(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i == 0) out << std::left << std::setw(static_cast<int>(width[i])) << r[i];
      else out << "  " << std::right << std::setw(static_cast<int>(width[i])) << r[i];
    }
    out << "\n";
  };
  emit(header);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  out << std::string(total - 2, '-') << "\n";
  for (const auto& r : rows) emit(r);
  return out.str();
}

std::string Fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

StagePlan ReportPlan(Stage& stage) {
  const RunConfig& c = stage.config();
  StagePlan plan;
  plan.inputs = ReportInputs(c);
  if (plan.inputs.empty()) {
    stage.Fail(kExitData, "no evaluation results in " + EvalDir(c).string() + " (run `eval` first)");
  }
  plan.settings = FormatConfigSection(c, "paint") + FormatConfigSection(c, "label") +
                  FormatConfigSection(c, "eval");
  plan.areas = {ReportTextPath(c), PlotDataPath(c)};
  plan.run = [&stage, &c, inputs = plan.inputs] {
    std::vector<std::pair<std::string, Report>> reports;
    for (const fs::path& f : inputs) {
      if (f.extension() != ".csv") continue;
      Report r = ReadReportCsv(f);
      std::ifstream in(fs::path(f).replace_extension(".json"));
      const json summary = json::parse(in);
      r.pair_count = summary.at("pair_count").get<std::size_t>();
      r.percent_pairs = summary.at("pairs_with_visible_queries").get<std::size_t>();
      reports.emplace_back(f.stem().string(), r);
    }

    std::vector<std::string> header = {"detector"};
    for (int b = 0; b < kHistogramBins; ++b) header.push_back(std::to_string(b));
    header.push_back(std::to_string(kHistogramBins) + "+");
    std::vector<std::string> count_header = header;
    count_header.push_back("0-3");
    count_header.push_back("pairs");

    std::vector<std::vector<std::string>> counts, percents;
    for (const auto& [name, r] : reports) {
      std::vector<std::string> rc = {name}, rp = {name};
      for (std::size_t b = 0; b < r.mean_count.size(); ++b) {
        rc.push_back(Fixed(r.mean_count[b], 2));
        rp.push_back(Fixed(r.mean_percent[b], 1));
      }
      rc.push_back(Fixed(r.repeatable_0_3, 2));
      rc.push_back(std::to_string(r.pair_count));
      counts.push_back(std::move(rc));
      percents.push_back(std::move(rp));
    }

    std::ofstream out(ReportTextPath(c));
    out << "Repeatability by pixel distance\n\n";
    out << "Mean detections per pair\n" << FormatTable(count_header, counts) << "\n";
    out << "Mean percent of visible detections per pair\n" << FormatTable(header, percents) << "\n";
    out << "Settings\n";
    std::istringstream settings(FormatConfigSection(c, "paint") + FormatConfigSection(c, "label") +
                                FormatConfigSection(c, "eval"));
    for (std::string line; std::getline(settings, line);) out << "  " << line << "\n";
    if (!out) stage.Fail(kExitData, "cannot write " + ReportTextPath(c).string());

    std::ofstream plot(PlotDataPath(c));
    plot << "# bin mean_count mean_percent; bin " << kHistogramBins
         << " holds distances of " << kHistogramBins << "+ and unmatched detections\n";
    bool first = true;
    for (const auto& [name, r] : reports) {
      if (!first) plot << "\n\n";
      first = false;
      plot << "# " << name << "\n";
      for (std::size_t b = 0; b < r.mean_count.size(); ++b) {
        plot << b << " " << Fixed(r.mean_count[b], 6) << " " << Fixed(r.mean_percent[b], 6) << "\n";
      }
    }
    if (!plot) stage.Fail(kExitData, "cannot write " + PlotDataPath(c).string());
    stage.Log("wrote " + ReportTextPath(c).string());
  };
  return plan;
}

void EchoConfig(const RunConfig& c) {
  fs::create_directories(c.output);
  std::ofstream out(c.output / "config.resolved.ini");
  out << FormatConfig(c);
}

}  // namespace

StageError::StageError(std::string stage, ExitCode code, const std::string& message)
    : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)), code_(code) {}

const std::vector<std::string>& StageNames() {
  static const std::vector<std::string> names = {"synth", "detect", "paint",
                                                 "label", "eval",   "report"};
  return names;
}

std::uint64_t Fnv1a(const void* data, std::size_t size, std::uint64_t hash) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::uint64_t HashFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError("hash", kExitData, "cannot read " + path.string());
  std::uint64_t h = Fnv1a(nullptr, 0);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = Fnv1a(buf.data(), static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

fs::path DetectionsPath(const RunConfig& c, const std::string& detector) {
  return DetectionsDir(c) / (detector + ".csv");
}
fs::path MapPath(const RunConfig& c) { return c.output / "map.r3dv"; }
fs::path LabelsPath(const RunConfig& c) { return c.output / "labels.csv"; }
fs::path ReportCsvPath(const RunConfig& c, const std::string& detector) {
  return EvalDir(c) / (detector + ".csv");
}
fs::path PairCsvPath(const RunConfig& c, const std::string& detector) {
  return EvalDir(c) / (detector + "_pairs.csv");
}
fs::path ReportTextPath(const RunConfig& c) { return c.output / "report.txt"; }
fs::path PlotDataPath(const RunConfig& c) { return c.output / "report_plot.dat"; }

StageOutcome RunStage(const std::string& name, const RunConfig& config,
                      const StageOptions& options) {
  if (const auto errors = ValidateConfig(config); !errors.empty()) {
    throw StageError(name, kExitUsage, ConfigError(errors).what());
  }
  Stage stage(name, config, options);
  try {
    EchoConfig(config);
    StagePlan plan;
    if (name == "synth") plan = SynthPlan(stage);
    else if (name == "detect") plan = DetectPlan(stage);
    else if (name == "paint") plan = PaintPlan(stage);
    else if (name == "label") plan = LabelPlan(stage);
    else if (name == "eval") plan = EvalPlan(stage);
    else if (name == "report") plan = ReportPlan(stage);
    else throw StageError(name, kExitUsage, "unknown stage");
    return stage.Execute(std::move(plan));
  } catch (const StageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    stage.Fail(kExitData, e.what());
  } catch (const std::logic_error& e) {
    stage.Fail(kExitInternal, e.what());
  } catch (const std::runtime_error& e) {
    // Dataset, detection-file, snapshot and evaluator errors and I/O failures.
    stage.Fail(kExitData, e.what());
  } catch (const json::exception& e) {
    stage.Fail(kExitData, e.what());
  } catch (const std::exception& e) {
    stage.Fail(kExitInternal, e.what());
  }
}

}  // namespace r3d

#include "r3d/runner.hpp"

#include "r3d/dataset.hpp"
#include "r3d/evaluator.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace r3d {
namespace {

namespace fs = std::filesystem;

// Content hash of every file under `root`, keyed by relative path.
std::map<std::string, std::uint64_t> Tree(const fs::path& root) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    out[e.path().lexically_relative(root).generic_string()] = HashFile(e.path());
  }
  return out;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class RunnerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("r3d_runner_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  // A small camera and a thin photograph budget keep a full run to seconds.
  RunConfig Small(const std::string& tag) const {
    RunConfig c;
    c.dataset = root_ / tag / "dataset";
    c.output = root_ / tag / "out";
    c.seed = 7;
    c.scene.seed = 7;
    c.scene.box_count = 1;
    c.intrinsics = {55.0, 55.0, 39.5, 29.5, 80, 60};
    c.photographer.images_per_m3 = 1.0;
    c.validation_voxel_size = 0.02;
    c.voxel_size = 0.02;
    c.eval.frame_stride = 2;
    return c;
  }

  void RunAll(const RunConfig& c, const StageOptions& opts = {}) {
    for (const auto& s : StageNames()) RunStage(s, c, opts);
  }

  fs::path root_;
};

TEST_F(RunnerTest, SynthWithSameSeedGivesIdenticalTrees) {
  RunConfig a = Small("a");
  RunConfig b = Small("b");
  b.threads = 3;
  RunStage("synth", a);
  RunStage("synth", b);
  const auto ta = Tree(a.dataset);
  EXPECT_GT(ta.size(), 10u);
  EXPECT_EQ(ta, Tree(b.dataset));

  RunConfig other = Small("c");
  other.seed = other.scene.seed = 8;
  RunStage("synth", other);
  EXPECT_NE(ta, Tree(other.dataset));
}

TEST_F(RunnerTest, FullRunConservesQueriesAndIgnoresThreadCount) {
  RunConfig one = Small("one");
  RunConfig many = Small("many");
  many.threads = 3;
  RunAll(one);
  RunAll(many);

  auto t1 = Tree(one.output);
  auto t3 = Tree(many.output);
  t1.erase("config.resolved.ini");
  t3.erase("config.resolved.ini");
  EXPECT_EQ(t1, t3);
  EXPECT_EQ(Tree(one.dataset), Tree(many.dataset));

  // Every per-pair row: bins plus unmatched equal the visible queries.
  const std::vector<std::string> names = {"dog", "fast", "harris", "labels", "shi_tomasi"};
  for (const auto& name : names) {
    std::ifstream in(PairCsvPath(one, name));
    ASSERT_TRUE(in) << name;
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::vector<std::string> f;
      for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
      ASSERT_EQ(f.size(), 3u + kHistogramBins + 2u);
      std::uint64_t sum = 0;
      for (int b = 0; b <= kHistogramBins; ++b) sum += std::stoull(f[3 + b]);
      EXPECT_EQ(sum, std::stoull(f.back())) << name << ": " << line;
      ++rows;
    }
    EXPECT_GT(rows, 0) << name;
  }

  const std::string report = Slurp(ReportTextPath(one));
  for (const auto& name : names) EXPECT_NE(report.find(name), std::string::npos);
  EXPECT_NE(report.find("view_threshold = 10"), std::string::npos);
  EXPECT_NE(report.find("frame_stride = 2"), std::string::npos);

  std::ifstream plot(PlotDataPath(one));
  int data_lines = 0;
  for (std::string line; std::getline(plot, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    int bin = -1;
    double count = -1, pct = -1;
    ss >> bin >> count >> pct;
    EXPECT_TRUE(bin >= 0 && bin <= kHistogramBins && count >= 0 && pct >= 0) << line;
    ++data_lines;
  }
  EXPECT_EQ(data_lines, static_cast<int>(names.size()) * (kHistogramBins + 1));
  EXPECT_TRUE(ParseConfig(Slurp(one.output / "config.resolved.ini")) == one);
}

TEST_F(RunnerTest, RerunsSkipOrFailLoudly) {
  RunConfig c = Small("r");
  RunAll(c);
  for (const auto& s : StageNames()) EXPECT_EQ(RunStage(s, c), StageOutcome::kSkipped) << s;

  // Changed settings: the stage refuses to overwrite without force.
  RunConfig changed = c;
  changed.fallback_detector = "fast";
  try {
    RunStage("label", changed);
    FAIL() << "stale labels were overwritten silently";
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), kExitData);
    EXPECT_EQ(e.stage(), "label");
    EXPECT_NE(std::string(e.what()).find("--force"), std::string::npos);
  }
  EXPECT_EQ(RunStage("label", changed, {.force = true}), StageOutcome::kRan);
  // Downstream results now describe old labels.
  EXPECT_THROW(RunStage("eval", changed), StageError);
  EXPECT_EQ(RunStage("eval", changed, {.force = true}), StageOutcome::kRan);
  EXPECT_EQ(RunStage("eval", changed), StageOutcome::kSkipped);

  // A hand-edited output is detected too.
  { std::ofstream(LabelsPath(c), std::ios::app) << "\n"; }
  EXPECT_THROW(RunStage("label", changed), StageError);

  // Thread count is not part of any fingerprint.
  RunConfig threaded = changed;
  threaded.threads = 4;
  EXPECT_EQ(RunStage("paint", threaded), StageOutcome::kSkipped);
}

TEST_F(RunnerTest, MissingInputsAreStageScoped) {
  RunConfig c = Small("m");
  try {
    RunStage("detect", c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), kExitData);
    EXPECT_EQ(std::string(e.what()).rfind("[detect]", 0), 0u) << e.what();
  }
  RunStage("synth", c);
  RunStage("detect", c);
  try {
    RunStage("label", c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), kExitData);
    EXPECT_NE(std::string(e.what()).find("paint"), std::string::npos) << e.what();
  }
  RunConfig bad = c;
  bad.fallback_detector = "sift";
  RunStage("paint", c);
  EXPECT_THROW(RunStage("label", bad), StageError);
  bad = c;
  bad.eval.frame_stride = 0;
  try {
    RunStage("eval", bad);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), kExitUsage);
  }
}

TEST_F(RunnerTest, EvalOnOneFrameNeedsTwoFrames) {
  RunConfig c = Small("one_frame");
  RunStage("synth", c);
  Dataset ds = ReadDataset(c.dataset);
  ds.frames.resize(1);
  fs::remove_all(c.dataset);
  WriteDataset(c.dataset, ds);
  c.eval.frame_stride = 1;
  RunStage("detect", c);
  try {
    RunStage("eval", c);
    FAIL() << "evaluated a single frame";
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), kExitData);
    EXPECT_NE(std::string(e.what()).find("need >= 2 frames after stride"), std::string::npos)
        << e.what();
  }
}

TEST_F(RunnerTest, ExternalDetectionsJoinTheTable) {
  RunConfig c = Small("ext");
  RunStage("synth", c);
  const Dataset ds = ReadDataset(c.dataset, false);
  const fs::path ext = root_ / "mine.csv";
  {
    std::ofstream out(ext);
    for (int f : ds.FrameIndices()) out << f << ",40,30,0.5,mine\n" << f << ",500,30,1,mine\n";
  }
  c.detectors.enabled = {"harris"};
  c.external_detections = ext;
  RunStage("detect", c);
  EXPECT_TRUE(fs::exists(DetectionsPath(c, "mine")));
  EXPECT_TRUE(fs::exists(DetectionsPath(c, "harris")));
  EXPECT_FALSE(fs::exists(DetectionsPath(c, "fast")));
  c.eval_detectors = {"mine"};
  RunStage("eval", c);
  EXPECT_TRUE(fs::exists(ReportCsvPath(c, "mine")));
  EXPECT_FALSE(fs::exists(ReportCsvPath(c, "harris")));
}

#ifdef R3D_CLI_PATH
int Cli(const std::string& args) {
  const int status = std::system((std::string(R3D_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

TEST_F(RunnerTest, CommandLineExitCodes) {
  const fs::path empty = root_ / "empty.ini";
  std::ofstream(empty).close();
  const fs::path typo = root_ / "typo.ini";
  std::ofstream(typo) << "[eval]\nframe_strde = 3\n";
  const fs::path cfg = root_ / "run.ini";
  std::ofstream(cfg) << "[run]\ndataset = " << (root_ / "nods").string() << "\noutput = "
                     << (root_ / "cliout").string() << "\n";

  EXPECT_EQ(Cli("--config " + empty.string() + " config"), kExitOk);
  EXPECT_EQ(Cli("--config " + typo.string() + " config"), kExitUsage);
  EXPECT_EQ(Cli("--config " + (root_ / "absent.ini").string() + " config"), kExitUsage);
  EXPECT_EQ(Cli("config --set eval.frame_stride=0"), kExitUsage);
  EXPECT_EQ(Cli(""), kExitUsage);
  EXPECT_EQ(Cli("frobnicate"), kExitUsage);
  EXPECT_EQ(Cli("--config " + cfg.string() + " detect"), kExitData);
  EXPECT_EQ(Cli("--help"), kExitOk);
}
#endif

}  // namespace
}  // namespace r3d

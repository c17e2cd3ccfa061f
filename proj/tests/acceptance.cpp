// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include "r3d/config.hpp"
#include "r3d/evaluator.hpp"
#include "r3d/geometry.hpp"
#include "r3d/labeler.hpp"
#include "r3d/pipeline.hpp"
#include "r3d/runner.hpp"
#include "r3d/synth.hpp"
#include "r3d/voxelmap.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <thread>

namespace {

using namespace r3d;
using Clock = std::chrono::steady_clock;

double Since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Options {
  int threads = 8;
  std::uint64_t label_seed = 1;
  int label_boxes = 1;
  double label_checker_probability = 0.5;
  double label_checker_period = 1.0;
  std::uint64_t holdout_seed = 2;
  int holdout_stride = 5;
};

int failures = 0;

void Verdict(int id, bool pass, const std::string& title, const std::string& detail) {
  std::printf("%s  %d. %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string Fmt(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Distance map against an oracle that rounds sqrt directly.

void DistanceOracle() {
  const auto t0 = Clock::now();
  constexpr int kW = 320, kH = 240, kMax = 10;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> count(1, 2000), ux(0, kW - 1), uy(0, kH - 1);
  std::vector<std::uint8_t> oracle(kW * kH);
  long mismatches = 0;
  long full_checks = 0;
  for (int g = 0; g < 1000; ++g) {
    std::vector<Detection> pts(count(rng));
    for (auto& p : pts) p = {ux(rng), uy(rng), 1.0};
    const DistanceGrid grid = ComputeDistanceMap(pts, kW, kH, kMax);

    // Each candidate stamps its (2 cap + 1)^2 neighbourhood.
    std::fill(oracle.begin(), oracle.end(), kMax);
    for (const auto& p : pts) {
      for (int dy = -kMax; dy <= kMax; ++dy) {
        for (int dx = -kMax; dx <= kMax; ++dx) {
          const int x = p.x + dx, y = p.y + dy;
          if (x < 0 || y < 0 || x >= kW || y >= kH) continue;
          const int r = static_cast<int>(std::floor(std::sqrt(double(dx * dx + dy * dy)) + 0.5));
          auto& o = oracle[y * kW + x];
          o = static_cast<std::uint8_t>(std::min<int>(o, std::min(r, kMax)));
        }
      }
    }
    for (int y = 0; y < kH; ++y) {
      for (int x = 0; x < kW; ++x) mismatches += grid(x, y) != oracle[y * kW + x];
    }

    // Every 100th grid also against the all-pairs minimum.
    if (g % 100 == 0) {
      for (int y = 0; y < kH; ++y) {
        for (int x = 0; x < kW; ++x) {
          double best = 1e300;
          for (const auto& p : pts) best = std::min(best, std::hypot(x - p.x, y - p.y));
          const int r = std::min(kMax, static_cast<int>(std::floor(best + 0.5)));
          mismatches += grid(x, y) != r;
          ++full_checks;
        }
      }
    }
  }
  const double secs = Since(t0);
  Verdict(1, mismatches == 0 && secs < 60.0, "distance-oracle exactness",
          Fmt("1000 grids 240x320 with 1-2000 points, %ld mismatching pixels "
              "(%ld pixels also checked against the all-pairs minimum), %.1f s",
              mismatches, full_checks, secs));
}

// ---------------------------------------------------------------------------
// 2. Geometry round trip.

void GeometryRoundTrip() {
  std::mt19937_64 rng(202);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> ux(0.0, 319.0), uy(0.0, 239.0), ud(0.05, 20.0),
      ut(-50.0, 50.0);
  const CameraIntrinsics intr = DefaultIntrinsics();
  double worst_px = 0.0, worst_m = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    const Pose pose(q.normalized().toRotationMatrix(), Vec3(ut(rng), ut(rng), ut(rng)));
    const double x = ux(rng), y = uy(rng), d = ud(rng);
    const Vec3 w = Unproject(x, y, d, intr, pose);
    const PixelProjection p = Project(w, intr, pose);
    worst_px = std::max({worst_px, std::abs(p.x - x), std::abs(p.y - y)});
    worst_m = std::max(worst_m, std::abs(p.depth - d));
    worst_m = std::max(worst_m, (Unproject(p.x, p.y, p.depth, intr, pose) - w).norm());
  }
  Verdict(2, worst_px <= 1e-6 && worst_m <= 1e-9, "geometry round trip",
          Fmt("10^4 triples, worst %.2e px, %.2e m", worst_px, worst_m));
}

// ---------------------------------------------------------------------------
// Shared synthetic pipeline.

struct SceneRun {
  Scene scene;
  CameraIntrinsics intr;
  std::vector<RenderedFrame> frames;
  DetectionTable table;
  VoxelMap map;
  std::vector<LabelSet> labels;
  double seconds = 0.0;
};

SceneRun RunScene(const SceneSpec& spec, int threads) {
  const auto t0 = Clock::now();
  const RunConfig cfg;
  SceneRun run;
  run.scene = BuildScene(spec);
  run.intr = cfg.intrinsics;
  {
    const VoxelMap occupancy = VoxelizeMesh(run.scene.mesh, cfg.validation_voxel_size);
    run.frames = Photograph(run.scene, occupancy, run.intr, cfg.photographer, spec.seed, threads).frames;
  }
  run.table = DetectAll(run.frames, cfg.detectors, threads);
  run.map = VoxelizeMesh(run.scene.mesh, cfg.voxel_size);
  PaintAll(run.map, run.frames, run.table, NativeDetectorNames(), cfg.paint, threads);
  run.labels = LabelAll(run.map, run.frames, run.table, NativeDetectorNames(),
                        cfg.fallback_detector, cfg.label, threads);
  run.seconds = Since(t0);
  return run;
}

std::vector<Detection> LabelPoints(const LabelSet& set) {
  std::vector<Detection> out;
  for (const Label& l : set.labels) out.push_back(l.detection);
  return out;
}

// ---------------------------------------------------------------------------
// 3. Self pairs.

void SelfPairs(const SceneRun& run) {
  const EvalParams params;
  const auto views = MakeViews(run.frames);
  std::string detail;
  bool pass = true;
  for (const auto& [name, column] : run.table) {
    std::uint64_t visible = 0, bin0 = 0, unmatched = 0, with_depth = 0;
    for (std::size_t i = 0; i < views.size(); ++i) {
      const auto dets = CapDetections(column[i].detections, params);
      for (const auto& d : dets) with_depth += (*views[i].depth)(d.x, d.y) > 0.0f;
      const auto h = EvaluatePair(run.intr, views[i], dets, views[i], dets, params);
      visible += h.visible_queries;
      bin0 += h.bins[0];
      unmatched += h.unmatched;
    }
    const bool ok = visible > 0 && bin0 == visible && unmatched == 0 && visible == with_depth;
    pass &= ok;
    detail += Fmt("%s%s %llu/%llu in bin 0, %llu unmatched", detail.empty() ? "" : "; ",
                  name.c_str(), (unsigned long long)bin0, (unsigned long long)visible,
                  (unsigned long long)unmatched);
  }
  Verdict(3, pass, "self-pair repeatability",
          Fmt("%zu frames; ", run.frames.size()) + detail);
}

// ---------------------------------------------------------------------------
// 4. Painting conservation.

void PaintingConservation(int threads) {
  SceneSpec spec;
  spec.seed = 404;
  spec.box_count = 2;
  const Scene scene = BuildScene(spec);
  const CameraIntrinsics intr = DefaultIntrinsics();
  std::mt19937_64 rng(405);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> inside(0.05, 3.95), conf(0.01, 5.0);
  std::uniform_int_distribution<int> count(0, 300), ux(0, intr.width - 1), uy(0, intr.height - 1);

  std::vector<RenderedFrame> frames(40);
  DetectionTable table;
  const std::vector<std::string> names = {"a", "b", "c"};
  std::size_t nonempty = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    frames[i].frame_index = static_cast<int>(i);
    frames[i].intrinsics = intr;
    frames[i].pose = Pose(q.normalized().toRotationMatrix(),
                          Vec3(inside(rng), inside(rng), inside(rng)));
    for (const auto& name : names) {
      DetectionSet s{static_cast<int>(i), name, {}};
      s.detections.resize(count(rng));
      for (auto& d : s.detections) d = {ux(rng), uy(rng), conf(rng)};
      nonempty += !s.detections.empty();
      table[name].push_back(std::move(s));
    }
  }

  auto paint = [&](const std::vector<RenderedFrame>& f, const DetectionTable& t, int th,
                   PaintSummary* summary) {
    VoxelMap map = VoxelizeMesh(scene.mesh, 0.01);
    *summary = PaintAll(map, f, t, names, {}, th);
    return map;
  };
  PaintSummary s1, s2;
  const VoxelMap serial = paint(frames, table, 1, &s1);

  // Reverse the frame order and repaint with several threads.
  std::vector<RenderedFrame> reversed(frames.rbegin(), frames.rend());
  DetectionTable reversed_table;
  for (const auto& [name, column] : table) reversed_table[name].assign(column.rbegin(), column.rend());
  const VoxelMap parallel = paint(reversed, reversed_table, threads, &s2);

  const auto expected = static_cast<std::int64_t>(nonempty) * 1'000'000'000LL;
  const bool pass = serial.TotalScoreUnits() == expected && s1.missed == 0 &&
                    parallel.TotalScoreUnits() == expected && serial == parallel;
  Verdict(4, pass, "painting conservation",
          Fmt("%zu non-empty sets, score sum %lld / %lld units (1 thread, in order) and "
              "%lld (%d threads, reversed), maps %s, %zu rays missed",
              nonempty, (long long)serial.TotalScoreUnits(), (long long)expected,
              (long long)parallel.TotalScoreUnits(), threads,
              serial == parallel ? "identical" : "DIFFER", s1.missed + s2.missed));
}

// ---------------------------------------------------------------------------
// 5. Label quality against projected ground truth.

struct Projected {
  double x, y;
  bool corner;
  bool eligible;  // corner seen by >= 10 painted views at its pixel
};

void LabelQuality(const SceneRun& run, const Options& opt) {
  const LabelParams lp;
  std::size_t eligible = 0, found = 0, labels = 0, far = 0;
  for (std::size_t i = 0; i < run.frames.size(); ++i) {
    const RenderedFrame& f = run.frames[i];
    const ScoreAndCount sc = RenderScoreAndCount(run.map, run.intr, f.pose, lp.max_range_m);
    std::vector<Projected> truth;
    auto add = [&](const std::vector<Vec3>& pts, bool corner) {
      for (const Vec3& p : pts) {
        const auto pr = TryProject(p, run.intr, f.pose);
        if (!pr) continue;
        const int x = static_cast<int>(std::lround(pr->x));
        const int y = static_cast<int>(std::lround(pr->y));
        if (!run.intr.Contains(x, y)) continue;
        // Visible when the rendered depth next to it agrees.
        bool visible = false;
        for (int dy = -1; dy <= 1 && !visible; ++dy) {
          for (int dx = -1; dx <= 1 && !visible; ++dx) {
            if (!run.intr.Contains(x + dx, y + dy)) continue;
            const double z = f.depth(x + dx, y + dy);
            visible = z > 0.0 && std::abs(z - pr->depth) < 0.03;
          }
        }
        if (!visible) continue;
        truth.push_back({pr->x, pr->y, corner, corner && sc.count(x, y) >= 10.0});
      }
    };
    add(run.scene.corners, true);
    add(run.scene.junctions, false);

    for (const Projected& t : truth) {
      if (!t.eligible) continue;
      ++eligible;
      for (const Label& l : run.labels[i].labels) {
        if (std::hypot(l.detection.x - t.x, l.detection.y - t.y) <= 2.0) {
          ++found;
          break;
        }
      }
    }
    for (const Label& l : run.labels[i].labels) {
      ++labels;
      bool near = false;
      for (const Projected& t : truth) {
        near |= std::hypot(l.detection.x - t.x, l.detection.y - t.y) <= 4.0;
      }
      far += !near;
    }
  }
  const double recall = eligible ? double(found) / eligible : 0.0;
  const double far_rate = labels ? double(far) / labels : 1.0;
  const bool pass = run.frames.size() >= 200 && eligible > 0 && recall >= 0.80 &&
                    far_rate <= 0.10 && run.seconds <= 600.0;
  Verdict(5, pass, "end-to-end label quality",
          Fmt("scene seed %llu with %d box(es), checker probability %.2f, period %.2f m; "
              "%zu views; recall %zu/%zu = %.1f%% within 2 px; %zu/%zu = %.1f%% labels "
              "farther than 4 px; pipeline %.0f s at %d threads",
              (unsigned long long)opt.label_seed, opt.label_boxes,
              opt.label_checker_probability, opt.label_checker_period, run.frames.size(),
              found, eligible, 100 * recall, far, labels, 100 * far_rate, run.seconds,
              opt.threads));
}

// ---------------------------------------------------------------------------
// 6. Labels and corner detectors against a count-matched uniform detector.

void DetectorSeparation(const SceneRun& run, const Options& opt) {
  EvalParams params;
  params.frame_stride = opt.holdout_stride;
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> ux(0, run.intr.width - 1), uy(0, run.intr.height - 1);
  std::uniform_real_distribution<double> uc(0.0, 1.0);

  std::vector<std::pair<std::string, std::vector<std::vector<Detection>>>> subjects;
  for (const char* name : {kHarris, kShiTomasi, kFast}) {
    std::vector<std::vector<Detection>> d;
    for (const auto& s : run.table.at(name)) d.push_back(s.detections);
    subjects.emplace_back(name, std::move(d));
  }
  std::vector<std::vector<Detection>> label_points;
  for (const auto& s : run.labels) label_points.push_back(LabelPoints(s));
  subjects.emplace_back(kLabelsName, std::move(label_points));

  bool pass = true;
  std::size_t pairs = 0;
  std::string detail;
  for (const auto& [name, dets] : subjects) {
    std::vector<std::vector<Detection>> random(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const std::size_t n = CapDetections(dets[i], params).size();
      for (std::size_t k = 0; k < n; ++k) random[i].push_back({ux(rng), uy(rng), uc(rng)});
    }
    const Evaluation real = EvaluateDetector(run.intr, run.frames, dets, params, opt.threads);
    const Report base = EvaluateDetector(run.intr, run.frames, random, params, opt.threads).report;
    pairs = real.pairs.size();
    const double r = real.report.repeatable_0_3;
    const bool ok = r > 0.0 && r >= 3.0 * base.repeatable_0_3;
    pass &= ok;
    detail += Fmt("%s%s %.3f vs %.3f (x%.1f)", detail.empty() ? "" : "; ", name.c_str(), r,
                  base.repeatable_0_3, base.repeatable_0_3 > 0 ? r / base.repeatable_0_3 : INFINITY);
  }
  Verdict(6, pass, "detector separation",
          Fmt("held-out scene seed %llu, %zu frames, stride %d, %zu pairs; mean bins 0-3 "
              "per pair, detector vs count-matched uniform random: ",
              (unsigned long long)opt.holdout_seed, run.frames.size(), params.frame_stride,
              pairs) + detail);
}

// ---------------------------------------------------------------------------
// 7. The perturbation tests live in the unit suite; rerun them here.

void ConstantConformance(const char* argv0) {
  std::string dir(argv0);
  dir = dir.substr(0, dir.find_last_of('/') + 1);
  const std::string cmd = dir + "constants_test --gtest_brief=1 > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const bool pass = status == 0;
  Verdict(7, pass, "default-constant conformance",
          pass ? "11 perturbation tests pass (voxel 0.01 m, 1/N, view threshold 10, kernel 9, "
                 "DoG floor 0.01, 0.5 m, 0.05, stride 30, 10% overlap, cap 2000, 10+ bin)"
               : "constants_test failed (run it directly for details)");
}

// ---------------------------------------------------------------------------
// 8. Throughput and thread-count independence.

void Performance(const SceneRun& run, int threads) {
  const auto views = MakeViews(run.frames);
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> ux(0, run.intr.width - 1), uy(0, run.intr.height - 1);
  std::uniform_real_distribution<double> uc(0.0, 1.0);
  std::vector<std::vector<Detection>> dets(views.size());
  for (auto& d : dets) {
    d.resize(2000);
    for (auto& x : d) x = {ux(rng), uy(rng), uc(rng)};
  }
  // Pairs are drawn from the overlapping ones.
  const EvalParams params;
  EvalParams every = params;
  every.frame_stride = 1;
  const auto overlapping = SelectPairs(run.intr, views, every);
  std::uniform_int_distribution<std::size_t> up(0, overlapping.size() - 1);
  std::vector<FramePair> pairs(5000);
  for (auto& p : pairs) p = overlapping[up(rng)];
  auto t0 = Clock::now();
  const auto many = EvaluatePairs(run.intr, views, dets, pairs, params, threads);
  const double t_many = Since(t0);
  t0 = Clock::now();
  const auto one = EvaluatePairs(run.intr, views, dets, pairs, params, 1);
  const double t_one = Since(t0);
  const Report a = Aggregate(many), b = Aggregate(one);
  std::uint64_t visible = 0;
  for (const auto& h : many) visible += h.visible_queries;
  const bool same = many == one && std::memcmp(a.mean_count.data(), b.mean_count.data(), sizeof a.mean_count) == 0 &&
                    std::memcmp(a.mean_percent.data(), b.mean_percent.data(), sizeof a.mean_percent) == 0;
  Verdict(8, t_many <= 60.0 && same, "performance envelope",
          Fmt("5000 pairs drawn from %zu overlapping pairs at 240x320, 2000 detections per "
              "frame before capping, %llu visible queries: %.1f s at %d threads, %.1f s at 1 "
              "thread (%u hardware threads available); aggregate %s",
              overlapping.size(), (unsigned long long)visible, t_many, threads, t_one,
              std::thread::hardware_concurrency(),
              same ? "bitwise identical" : "DIFFERS"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-8"};
  Options opt;
  app.add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--label-seed", opt.label_seed, "Scene seed for label quality");
  app.add_option("--label-boxes", opt.label_boxes, "Boxes in the label-quality scene");
  app.add_option("--label-checker-probability", opt.label_checker_probability);
  app.add_option("--label-checker-period", opt.label_checker_period);
  app.add_option("--holdout-seed", opt.holdout_seed, "Scene seed for detector separation");
  app.add_option("--holdout-stride", opt.holdout_stride, "Frame stride for detector separation")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  DistanceOracle();
  GeometryRoundTrip();

  SceneSpec label_spec;
  label_spec.seed = opt.label_seed;
  label_spec.box_count = opt.label_boxes;
  label_spec.checker_probability = opt.label_checker_probability;
  label_spec.checker_period = opt.label_checker_period;
  const SceneRun label_run = RunScene(label_spec, opt.threads);
  SelfPairs(label_run);
  PaintingConservation(opt.threads);
  LabelQuality(label_run, opt);

  SceneSpec holdout;
  holdout.seed = opt.holdout_seed;
  const SceneRun holdout_run = RunScene(holdout, opt.threads);
  DetectorSeparation(holdout_run, opt);

  ConstantConformance(argv[0]);
  Performance(label_run, opt.threads);

  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}

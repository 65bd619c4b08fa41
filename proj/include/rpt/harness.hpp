#pragma once

#include <rpt/metrics.hpp>
#include <rpt/pipeline.hpp>
#include <rpt/synth.hpp>
#include <rpt/tracking.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <climits>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace rpt::harness {

// --- running sequences --------------------------------------------------------

struct SequenceOutput {
  std::vector<std::vector<Person3D>> persons;  // final output per frame (tracked if enabled)
  std::vector<FrameResult> raw;                // pipeline results before tracking
};

// Runs frames in order. The pair prefilter of frame f sees the raw pipeline
// output of frame f-1. With the prefilter disabled, frames are independent and
// are spread over `threads` workers; results are identical either way.
inline SequenceOutput run_sequence(const std::vector<FrameDetections>& frames, std::span<const CameraCalib> cams,
                                   const PipelineConfig& cfg, const std::optional<TrackerConfig>& tracker_cfg,
                                   double frame_dt_s, int threads = 1) {
  validate(cfg);
  SequenceOutput out;
  const std::size_t n = frames.size();
  out.raw.resize(n);
  const bool parallel = threads > 1 && !cfg.enable_pair_prefilter && n > 1;
  if (parallel) {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto worker = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          out.raw[i] = process_frame(frames[i], cams, {}, cfg);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const int count = std::min<int>(threads, static_cast<int>(n));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const Person3D> prev;
      if (i > 0) prev = out.raw[i - 1].persons;
      out.raw[i] = process_frame(frames[i], cams, prev, cfg);
    }
  }
  out.persons.reserve(n);
  if (tracker_cfg) {
    Tracker tracker(*tracker_cfg);
    for (auto& r : out.raw) {
      const auto t0 = std::chrono::steady_clock::now();
      out.persons.push_back(tracker.update(r.persons, frame_dt_s));
      r.timings[Step::Tracking] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  } else {
    for (const auto& r : out.raw) out.persons.push_back(r.persons);
  }
  return out;
}

inline EvalResult evaluate_sequence(const std::vector<std::vector<Person3D>>& gt, const JointSet& gt_set,
                                    const std::vector<std::vector<Person3D>>& pred, const JointSet& pred_set,
                                    const JointSet& eval_set, const EvalOptions& opt = {}) {
  std::vector<EvalFrame> g, p;
  g.reserve(gt.size());
  p.reserve(pred.size());
  for (const auto& f : gt) g.push_back(to_eval_frame(f, gt_set, eval_set));
  for (const auto& f : pred) p.push_back(to_eval_frame(f, pred_set, eval_set));
  return evaluate(g, p, eval_set, opt);
}

// Drops held persons, which carry stale positions.
inline std::vector<std::vector<Person3D>> without_held(const std::vector<std::vector<Person3D>>& frames) {
  std::vector<std::vector<Person3D>> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    std::vector<Person3D> keep;
    for (const auto& p : f)
      if (!p.held) keep.push_back(p);
    out.push_back(std::move(keep));
  }
  return out;
}

// --- synthetic fixtures ---------------------------------------------------------

struct Fixture {
  synth::Scene scene;
  synth::SyntheticDetections detections;
  double frame_dt_s = 1.0 / 30.0;
};

inline Fixture make_fixture(const synth::SceneSpec& spec, const synth::CorruptionSpec& corr) {
  Fixture fx;
  fx.scene = synth::generate_scene(spec);
  fx.detections = synth::project_scene(fx.scene.gt_frames, fx.scene.cams, fx.scene.joint_set, corr, spec.room);
  fx.frame_dt_s = 1.0 / spec.fps;
  return fx;
}

// Pipeline room matching the synthetic scene room.
inline PipelineConfig config_for(const synth::SceneSpec& spec, PipelineConfig cfg = {}) {
  cfg.room = spec.room;
  return cfg;
}

// --- timing statistics -------------------------------------------------------------

struct StatSummary {
  double mean = 0.0;
  double median = 0.0;
  double p99 = 0.0;
};

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline StatSummary summarize(const std::vector<double>& v) {
  StatSummary s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.median = percentile(v, 0.5);
  s.p99 = percentile(v, 0.99);
  return s;
}

// --- bench -----------------------------------------------------------------------------

struct BenchOptions {
  int repetitions = 1000;
  int warmup = 50;
  bool tracking = true;
};

struct BenchReport {
  int repetitions = 0;
  std::vector<std::string> rows;         // step names followed by "total"
  std::vector<StatSummary> seconds;      // one per row
  double pairs_per_frame = 0.0;
};

// Times the 2D-to-3D stage on preloaded detections, single worker. Each
// repetition processes one frame of the fixture (cycling), with the previous
// frame's output precomputed so the prefilter sees realistic input.
inline BenchReport run_bench(const std::vector<FrameDetections>& frames, std::span<const CameraCalib> cams,
                             const PipelineConfig& cfg, const TrackerConfig& tracker_cfg, double frame_dt_s,
                             const BenchOptions& opt = {}) {
  if (frames.empty()) throw Error(ErrorCode::InvalidConfig, "bench needs at least one frame");
  const auto reference = run_sequence(frames, cams, cfg, std::nullopt, frame_dt_s);
  std::vector<std::vector<double>> samples(kStepCount + 1);
  long pairs = 0;
  std::optional<Tracker> tracker;
  const std::size_t n = frames.size();
  for (int r = -opt.warmup; r < opt.repetitions; ++r) {
    const std::size_t i = static_cast<std::size_t>(r + opt.warmup) % n;
    if (i == 0) tracker.emplace(tracker_cfg);
    std::span<const Person3D> prev;
    if (i > 0) prev = reference.raw[i - 1].persons;
    FrameResult res = process_frame(frames[i], cams, prev, cfg);
    if (opt.tracking) {
      const auto t0 = std::chrono::steady_clock::now();
      auto tracked = tracker->update(res.persons, frame_dt_s);
      res.timings[Step::Tracking] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      (void)tracked;
    }
    if (r < 0) continue;
    for (int s = 0; s < kStepCount; ++s) samples[s].push_back(res.timings.seconds[s]);
    samples[kStepCount].push_back(res.timings.total());
    pairs += res.stats.pairs_triangulated;
  }
  BenchReport rep;
  rep.repetitions = opt.repetitions;
  for (int s = 0; s < kStepCount; ++s) rep.rows.emplace_back(kStepNames[s]);
  rep.rows.emplace_back("total");
  for (const auto& v : samples) rep.seconds.push_back(summarize(v));
  rep.pairs_per_frame = opt.repetitions > 0 ? static_cast<double>(pairs) / opt.repetitions : 0.0;
  return rep;
}

inline const StatSummary& bench_row(const BenchReport& rep, std::string_view name) {
  for (std::size_t i = 0; i < rep.rows.size(); ++i)
    if (rep.rows[i] == name) return rep.seconds[i];
  throw Error(ErrorCode::InvalidConfig, "no bench row '" + std::string(name) + "'");
}

// --- ablations ---------------------------------------------------------------------------

struct Ablation {
  std::string name;
  std::function<void(PipelineConfig&)> apply;
  bool tracking = true;
};

inline std::vector<Ablation> ablation_grid() {
  return {
      {"default", [](PipelineConfig&) {}},
      {"no confidence weighting", [](PipelineConfig& c) { c.use_confidence_weighting = false; }},
      {"no pair prefilter", [](PipelineConfig& c) { c.enable_pair_prefilter = false; }},
      {"keep topk outliers", [](PipelineConfig& c) { c.merge_top_k = INT_MAX; }},
      {"keep topk+distance outliers",
       [](PipelineConfig& c) {
         c.enable_outlier_reject = false;
         c.merge_top_k = INT_MAX;
       }},
      {"score triangulation only", [](PipelineConfig& c) { c.score_mode = ScoreMode::TriangulationOnly; }},
      {"score reprojection only", [](PipelineConfig& c) { c.score_mode = ScoreMode::ReprojectionOnly; }},
      {"min group size 1", [](PipelineConfig& c) { c.min_group_size = 1; }},
      {"min group size 2", [](PipelineConfig& c) { c.min_group_size = 2; }},
      {"min group size 3", [](PipelineConfig& c) { c.min_group_size = 3; }},
      {"no tracking", [](PipelineConfig&) {}, false},
  };
}

struct AblationRow {
  std::string name;
  EvalResult eval;
  double mean_time_s = 0.0;        // mean 3D time per frame, tracking included when enabled
  double pairs_triangulated = 0.0;  // mean per frame
};

inline AblationRow run_ablation(const Ablation& ab, const Fixture& fx, const PipelineConfig& base,
                                const TrackerConfig& tracker_cfg, const JointSet& eval_set) {
  PipelineConfig cfg = base;
  ab.apply(cfg);
  const auto out = run_sequence(fx.detections.frames, fx.scene.cams, cfg,
                                ab.tracking ? std::optional<TrackerConfig>(tracker_cfg) : std::nullopt,
                                fx.frame_dt_s);
  AblationRow row;
  row.name = ab.name;
  row.eval = evaluate_sequence(fx.scene.gt_frames, *fx.scene.joint_set, out.persons, *fx.scene.joint_set, eval_set);
  double t = 0.0, pairs = 0.0;
  for (const auto& r : out.raw) {
    t += r.timings.total();
    pairs += r.stats.pairs_triangulated;
  }
  const double n = std::max<double>(1.0, static_cast<double>(out.raw.size()));
  row.mean_time_s = t / n;
  row.pairs_triangulated = pairs / n;
  return row;
}

}  // namespace rpt::harness

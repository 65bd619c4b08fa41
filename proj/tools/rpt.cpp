// rpt: command-line front end for the triangulation pipeline.
//
//   rpt run     --calib C --detections D --out O
//   rpt eval    --gt G --pred P [--out R]
//   rpt synth   --out-dir DIR
//   rpt bench   [--calib C --detections D] [--reps N]
//   rpt ablate  [--persons N --cameras N ...]

#include <rpt/harness.hpp>
#include <rpt/io.hpp>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using rpt::io::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Global {
  std::string config_path;
  int threads = 1;
  bool no_tracking = false;
  std::string joint_set;
  std::uint64_t seed = 1;
};

struct Settings {
  rpt::PipelineConfig pipeline;
  rpt::TrackerConfig tracker;
  rpt::io::JointSetResolver sets;
  rpt::JointSetPtr joint_set;  // from --joint-set, may be null
};

bool is_config_error(rpt::ErrorCode c) {
  using rpt::ErrorCode;
  return c == ErrorCode::InvalidConfig || c == ErrorCode::UnknownJointSet || c == ErrorCode::InvalidJointSet ||
         c == ErrorCode::InfeasibleSpec;
}

void report_error(const std::string& code, const std::string& message, const std::string& path = {}) {
  Json rec{{"error", code}, {"message", message}};
  if (!path.empty()) rec["path"] = path;
  std::cerr << rec.dump() << std::endl;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw rpt::Error(rpt::ErrorCode::IoError, std::string("no ") + what + " path given");
  if (!fs::is_regular_file(path))
    throw rpt::Error(rpt::ErrorCode::IoError, std::string(what) + " file not found: '" + path + "'");
}

Settings load_settings(const Global& g) {
  Settings s;
  if (!g.config_path.empty()) {
    require_file(g.config_path, "config");
    const Json doc = rpt::io::read_json_file(g.config_path);
    if (!doc.is_object()) throw rpt::Error(rpt::ErrorCode::InvalidConfig, "config must be an object");
    if (doc.contains("schema") && doc.at("schema") != rpt::io::kConfigSchema)
      throw rpt::Error(rpt::ErrorCode::InvalidConfig, "config schema must be '" + std::string(rpt::io::kConfigSchema) + "'");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      if (it.key() == "schema") continue;
      if (it.key() == "pipeline") rpt::io::apply_pipeline_overrides(s.pipeline, it.value());
      else if (it.key() == "tracker") rpt::io::apply_tracker_overrides(s.tracker, it.value());
      else throw rpt::Error(rpt::ErrorCode::InvalidConfig, "config: unknown section '" + it.key() + "'");
    }
  }
  if (!g.joint_set.empty()) {
    if (fs::is_regular_file(g.joint_set)) {
      rpt::JointSet set = rpt::io::joint_set_from_json(rpt::io::read_json_file(g.joint_set));
      const std::string name = set.name;
      s.sets.add(std::move(set));
      s.joint_set = s.sets.resolve(name);
    } else {
      s.joint_set = s.sets.resolve(g.joint_set);
    }
  }
  return s;
}

std::string micros(double seconds) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << seconds * 1e6;
  return os.str();
}

// --- run ----------------------------------------------------------------------

struct RunArgs {
  std::string calib, detections, out;
  bool timings = false;
};

int cmd_run(const Global& g, const RunArgs& a) {
  require_file(a.calib, "calibration");
  require_file(a.detections, "detections");
  if (a.out.empty()) throw rpt::Error(rpt::ErrorCode::IoError, "no output path given");
  Settings s = load_settings(g);
  const auto calib = rpt::io::calibration_from_json(rpt::io::read_json_file(a.calib));
  if (calib.room) s.pipeline.room = *calib.room;
  rpt::validate(s.pipeline);
  const auto det = rpt::io::detections_from_json(rpt::io::read_json_file(a.detections), s.sets);
  if (s.joint_set && s.joint_set->name != det.joint_set->name)
    throw rpt::Error(rpt::ErrorCode::SchemaError, "detections use joint set '" + det.joint_set->name +
                                                      "' but --joint-set is '" + s.joint_set->name + "'");
  // Fail on missing cameras before any processing.
  for (const auto& f : det.frames)
    for (const auto& v : f.views) (void)rpt::find_camera(calib.cams, v.view);

  std::vector<rpt::FrameDetections> frames;
  frames.reserve(det.frames.size());
  for (const auto& f : det.frames) frames.push_back(f.views);
  const auto tracker = g.no_tracking ? std::nullopt : std::optional<rpt::TrackerConfig>(s.tracker);
  if (g.threads > 1 && s.pipeline.enable_pair_prefilter)
    spdlog::info("pair prefilter links consecutive frames; processing sequentially");
  const auto out = rpt::harness::run_sequence(frames, calib.cams, s.pipeline, tracker, 1.0 / det.fps, g.threads);

  rpt::io::PersonsDoc doc;
  doc.joint_set = det.joint_set;
  rpt::StepTimings sum;
  long persons = 0;
  for (std::size_t i = 0; i < det.frames.size(); ++i) {
    rpt::io::PersonsFrame pf;
    pf.frame = det.frames[i].frame;
    pf.persons = out.persons[i];
    if (a.timings) pf.timings = out.raw[i].timings;
    if (out.raw[i].status)
      spdlog::warn("frame {}: {}", pf.frame, rpt::to_string(*out.raw[i].status));
    for (int k = 0; k < rpt::kStepCount; ++k) sum.seconds[k] += out.raw[i].timings.seconds[k];
    persons += static_cast<long>(pf.persons.size());
    doc.frames.push_back(std::move(pf));
  }
  rpt::io::write_json_atomic(a.out, rpt::io::persons_to_json(doc));

  const double n = std::max<double>(1.0, static_cast<double>(frames.size()));
  std::cout << "frames: " << frames.size() << "\npersons: " << persons << "\nmean time per step (us):\n";
  for (int k = 0; k < rpt::kStepCount; ++k)
    std::cout << "  " << rpt::kStepNames[k] << ": " << micros(sum.seconds[k] / n) << "\n";
  std::cout << "  total: " << micros(sum.total() / n) << "\n";
  return kExitOk;
}

// --- eval ---------------------------------------------------------------------------

struct EvalArgs {
  std::string gt, pred, out;
  std::string eval_set = "eval13";
  std::vector<double> pck{100.0, 500.0};
  std::vector<double> recall{100.0, 500.0};
  double match_threshold = 500.0;
};

int cmd_eval(const Global& g, const EvalArgs& a) {
  require_file(a.gt, "ground truth");
  require_file(a.pred, "predictions");
  Settings s = load_settings(g);
  const auto eval_set = s.sets.resolve(a.eval_set);
  const auto gt = rpt::io::persons_from_json(rpt::io::read_json_file(a.gt), s.sets);
  const auto pred = rpt::io::persons_from_json(rpt::io::read_json_file(a.pred), s.sets);
  auto [gf, pf] = rpt::io::align_for_eval(gt, pred, *eval_set);
  rpt::EvalOptions opt;
  opt.pck_thresholds_mm = a.pck;
  opt.recall_thresholds_mm = a.recall;
  opt.match_threshold_mm = a.match_threshold;
  const auto res = rpt::evaluate(gf, pf, *eval_set, opt);
  std::cout << rpt::io::eval_table({{fs::path(a.pred).stem().string(), res}});
  if (!a.out.empty()) rpt::io::write_json_atomic(a.out, rpt::io::eval_result_to_json(res, *eval_set));
  return kExitOk;
}

// --- synth ----------------------------------------------------------------------------

struct SceneArgs {
  int persons = 4;
  int cameras = 5;
  int frames = 10;
  double fps = 30.0;
  std::string motion = "linear";
  double motion_value = 1.0;
  double room_half = 2.5;
  bool fisheye = false;
  bool same_pose = false;
  double sigma = 0.0;
  double occlusion = 0.0;
  double fp_rate = 0.0;
  double swap_rate = 0.0;
  bool truncation = false;

  void add_to(CLI::App* app) {
    app->add_option("--persons", persons, "Persons in the scene")->check(CLI::NonNegativeNumber);
    app->add_option("--cameras", cameras, "Cameras on the ring")->check(CLI::PositiveNumber);
    app->add_option("--frames", frames, "Frames to generate")->check(CLI::PositiveNumber);
    app->add_option("--fps", fps, "Frame rate")->check(CLI::PositiveNumber);
    app->add_option("--motion", motion, "static, linear or walk")->check(CLI::IsMember({"static", "linear", "walk"}));
    app->add_option("--motion-value", motion_value, "Speed (m/s) for linear, step (m) for walk");
    app->add_option("--room-half", room_half, "Half side of the square room floor (m)")->check(CLI::PositiveNumber);
    app->add_flag("--fisheye", fisheye, "Use equidistant fisheye cameras");
    app->add_flag("--same-pose", same_pose, "All persons share one pose");
    app->add_option("--noise", sigma, "Pixel noise sigma")->check(CLI::NonNegativeNumber);
    app->add_option("--occlusion", occlusion, "Per-joint occlusion rate")->check(CLI::Range(0.0, 1.0));
    app->add_option("--fp-rate", fp_rate, "Per-view false positive rate")->check(CLI::Range(0.0, 1.0));
    app->add_option("--swap-rate", swap_rate, "Joint swap rate")->check(CLI::Range(0.0, 1.0));
    app->add_flag("--truncation", truncation, "Drop joints projecting outside the image");
  }

  rpt::synth::SceneSpec spec(const Global& g, const rpt::JointSetPtr& set) const {
    rpt::synth::SceneSpec sp;
    sp.n_persons = persons;
    sp.n_cameras = cameras;
    sp.n_frames = frames;
    sp.fps = fps;
    sp.seed = g.seed;
    sp.same_pose = same_pose;
    sp.room = {rpt::Vec3(-room_half, -room_half, 0.0), rpt::Vec3(room_half, room_half, 3.0)};
    if (set) sp.joint_set = set;
    if (motion == "linear") sp.motion = rpt::synth::Motion::linear(motion_value);
    else if (motion == "walk") sp.motion = rpt::synth::Motion::random_walk(motion_value);
    if (fisheye) sp.distortion = rpt::DistortionModel::fisheye(0.02, -0.005, 0.001, 0.0);
    return sp;
  }

  rpt::synth::CorruptionSpec corruption(const Global& g) const {
    rpt::synth::CorruptionSpec c;
    c.pixel_noise_sigma_px = sigma;
    c.occlusion_rate = occlusion;
    c.false_positive_rate = fp_rate;
    c.swap_rate = swap_rate;
    c.truncation = truncation;
    c.seed = rpt::synth::mix_seed(g.seed, 0x5eed);
    return c;
  }
};

struct SynthArgs {
  std::string out_dir;
  SceneArgs scene;
};

int cmd_synth(const Global& g, const SynthArgs& a) {
  if (a.out_dir.empty()) throw rpt::Error(rpt::ErrorCode::IoError, "no output directory given");
  Settings s = load_settings(g);
  const auto spec = a.scene.spec(g, s.joint_set);
  const auto fx = rpt::harness::make_fixture(spec, a.scene.corruption(g));
  fs::create_directories(a.out_dir);

  rpt::io::DetectionsDoc det;
  det.joint_set = fx.scene.joint_set;
  det.fps = spec.fps;
  rpt::io::PersonsDoc gt;
  gt.joint_set = fx.scene.joint_set;
  for (std::size_t f = 0; f < fx.detections.frames.size(); ++f) {
    det.frames.push_back({static_cast<long>(f), static_cast<double>(f) / spec.fps, fx.detections.frames[f]});
    rpt::io::PersonsFrame pf;
    pf.frame = static_cast<long>(f);
    pf.persons = fx.scene.gt_frames[f];
    for (std::size_t p = 0; p < pf.persons.size(); ++p) pf.persons[p].track_id = static_cast<int>(p);
    gt.frames.push_back(std::move(pf));
  }
  const fs::path dir(a.out_dir);
  rpt::io::write_json_atomic(dir / "calibration.json", rpt::io::calibration_to_json(fx.scene.cams, spec.room));
  rpt::io::write_json_atomic(dir / "detections.json", rpt::io::detections_to_json(det));
  rpt::io::write_json_atomic(dir / "ground_truth.json", rpt::io::persons_to_json(gt));
  std::cout << "wrote " << fx.detections.frames.size() << " frames, " << spec.n_persons << " persons, "
            << spec.n_cameras << " cameras to " << dir.string() << "\n";
  return kExitOk;
}

// --- bench ------------------------------------------------------------------------------

struct BenchArgs {
  std::string calib, detections, json_out;
  int reps = 1000;
  int warmup = 50;
  SceneArgs scene;
};

int cmd_bench(const Global& g, const BenchArgs& a) {
  Settings s = load_settings(g);
  std::vector<rpt::CameraCalib> cams;
  std::vector<rpt::FrameDetections> frames;
  double dt = 1.0 / 30.0;
  std::string fixture;
  if (!a.detections.empty() || !a.calib.empty()) {
    require_file(a.calib, "calibration");
    require_file(a.detections, "detections");
    const auto calib = rpt::io::calibration_from_json(rpt::io::read_json_file(a.calib));
    if (calib.room) s.pipeline.room = *calib.room;
    cams = calib.cams;
    const auto det = rpt::io::detections_from_json(rpt::io::read_json_file(a.detections), s.sets);
    for (const auto& f : det.frames) frames.push_back(f.views);
    dt = 1.0 / det.fps;
    fixture = a.detections;
  } else {
    const auto spec = a.scene.spec(g, s.joint_set);
    const auto fx = rpt::harness::make_fixture(spec, a.scene.corruption(g));
    s.pipeline.room = spec.room;
    cams = fx.scene.cams;
    frames = fx.detections.frames;
    dt = fx.frame_dt_s;
    fixture = "synthetic " + std::to_string(spec.n_persons) + " persons, " + std::to_string(spec.n_cameras) +
              " views, " + spec.joint_set->name;
  }
  rpt::validate(s.pipeline);
  rpt::harness::BenchOptions opt;
  opt.repetitions = a.reps;
  opt.warmup = a.warmup;
  opt.tracking = !g.no_tracking;
  const auto rep = rpt::harness::run_bench(frames, cams, s.pipeline, s.tracker, dt, opt);

  std::cout << "fixture: " << fixture << "\nrepetitions: " << rep.repetitions << " (single worker)\n";
  std::cout << "step                     mean_us  median_us     p99_us\n";
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& st = rep.seconds[i];
    std::printf("%-22s %10s %10s %10s\n", rep.rows[i].c_str(), micros(st.mean).c_str(), micros(st.median).c_str(),
                micros(st.p99).c_str());
  }
  if (!a.json_out.empty()) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < rep.rows.size(); ++i)
      rows.push_back({{"step", rep.rows[i]},
                      {"mean_us", rep.seconds[i].mean * 1e6},
                      {"median_us", rep.seconds[i].median * 1e6},
                      {"p99_us", rep.seconds[i].p99 * 1e6}});
    rpt::io::write_json_atomic(a.json_out, Json{{"schema", "rpt.bench/1"},
                                                {"fixture", fixture},
                                                {"repetitions", rep.repetitions},
                                                {"pairs_per_frame", rep.pairs_per_frame},
                                                {"steps", rows}});
  }
  return kExitOk;
}

// --- ablate -----------------------------------------------------------------------------

struct AblateArgs {
  std::string json_out;
  SceneArgs scene;
};

int cmd_ablate(const Global& g, const AblateArgs& a) {
  Settings s = load_settings(g);
  const auto spec = a.scene.spec(g, s.joint_set);
  const auto fx = rpt::harness::make_fixture(spec, a.scene.corruption(g));
  const auto base = rpt::harness::config_for(spec, s.pipeline);
  const auto eval_set = rpt::builtin_joint_set_ptr("eval13");
  std::vector<std::pair<std::string, rpt::EvalResult>> rows;
  std::vector<std::vector<std::string>> extra;
  Json jrows = Json::array();
  for (const auto& ab : rpt::harness::ablation_grid()) {
    const auto row = rpt::harness::run_ablation(ab, fx, base, s.tracker, *eval_set);
    rows.emplace_back(row.name, row.eval);
    std::ostringstream pairs;
    pairs.setf(std::ios::fixed);
    pairs.precision(1);
    pairs << row.pairs_triangulated;
    extra.push_back({micros(row.mean_time_s), pairs.str()});
    Json j = rpt::io::eval_result_to_json(row.eval, *eval_set);
    j.erase("schema");
    j["name"] = row.name;
    j["time_us"] = row.mean_time_s * 1e6;
    j["pairs_triangulated"] = row.pairs_triangulated;
    jrows.push_back(j);
  }
  std::cout << rpt::io::eval_table(rows, {"Time(us)", "Pairs"}, extra);
  if (!a.json_out.empty()) rpt::io::write_json_atomic(a.json_out, Json{{"schema", "rpt.ablate/1"}, {"rows", jrows}});
  return kExitOk;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("rpt");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("RPT_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Multi-view 3D pose triangulation"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--config", g.config_path, "JSON file with pipeline/tracker overrides");
  app.add_option("--threads", g.threads, "Worker threads for frame-parallel runs")->check(CLI::PositiveNumber);
  app.add_flag("--no-tracking", g.no_tracking, "Skip track assignment and speed clipping");
  app.add_option("--joint-set", g.joint_set, "Builtin joint set name or joint set file");
  app.add_option("--seed", g.seed, "Seed for synthetic data");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Triangulate a detections document");
  run_cmd->add_option("--calib", run.calib, "Calibration document")->required();
  run_cmd->add_option("--detections", run.detections, "Detections document")->required();
  run_cmd->add_option("--out", run.out, "Output persons document")->required();
  run_cmd->add_flag("--timings", run.timings, "Include per-frame step timings in the output");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  eval_cmd->add_option("--gt", ev.gt, "Ground-truth persons document")->required();
  eval_cmd->add_option("--pred", ev.pred, "Predicted persons document")->required();
  eval_cmd->add_option("--out", ev.out, "Write the result document here");
  eval_cmd->add_option("--eval-set", ev.eval_set, "Evaluation joint set");
  eval_cmd->add_option("--pck-thresholds", ev.pck, "PCK thresholds (mm)")->delimiter(',');
  eval_cmd->add_option("--recall-thresholds", ev.recall, "Recall thresholds (mm)")->delimiter(',');
  eval_cmd->add_option("--match-threshold", ev.match_threshold, "Max MPJPE (mm) of a match");

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic calibration, detections and ground truth");
  synth_cmd->add_option("--out-dir", sy.out_dir, "Output directory")->required();
  sy.scene.add_to(synth_cmd);

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "Time the 3D stage per step");
  bench_cmd->add_option("--calib", be.calib, "Calibration document (default: synthetic fixture)");
  bench_cmd->add_option("--detections", be.detections, "Detections document");
  bench_cmd->add_option("--reps", be.reps, "Timed repetitions")->check(CLI::Range(1, 100000000));
  bench_cmd->add_option("--warmup", be.warmup, "Untimed warmup repetitions")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--json", be.json_out, "Write the report as JSON");
  be.scene.frames = 30;
  be.scene.sigma = 1.0;
  be.scene.add_to(bench_cmd);

  AblateArgs ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the ablation grid on a synthetic fixture");
  ablate_cmd->add_option("--json", ab.json_out, "Write the rows as JSON");
  ab.scene.frames = 30;
  ab.scene.sigma = 2.0;
  ab.scene.occlusion = 0.05;
  ab.scene.fp_rate = 0.1;
  ab.scene.add_to(ablate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error("UsageError", e.what());
    return kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(g, run);
    if (*eval_cmd) return cmd_eval(g, ev);
    if (*synth_cmd) return cmd_synth(g, sy);
    if (*bench_cmd) return cmd_bench(g, be);
    if (*ablate_cmd) return cmd_ablate(g, ab);
  } catch (const rpt::Error& e) {
    std::string path;
    const std::string msg = e.what();
    const auto q1 = msg.find('\'');
    if (q1 != std::string::npos) {
      const auto q2 = msg.find('\'', q1 + 1);
      if (q2 != std::string::npos && e.code() == rpt::ErrorCode::IoError) path = msg.substr(q1 + 1, q2 - q1 - 1);
    }
    report_error(std::string(rpt::to_string(e.code())), msg, path);
    return is_config_error(e.code()) ? kExitConfig : kExitData;
  } catch (const std::exception& e) {
    report_error("IoError", e.what());
    return kExitData;
  }
  return kExitOk;
}

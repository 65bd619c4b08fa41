#pragma once

#include <rpt/geometry.hpp>
#include <rpt/metrics.hpp>
#include <rpt/pipeline.hpp>
#include <rpt/skeleton.hpp>
#include <rpt/tracking.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace rpt::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kCalibrationSchema = "rpt.calibration/1";
inline constexpr const char* kDetectionsSchema = "rpt.detections/1";
inline constexpr const char* kPersonsSchema = "rpt.persons/1";
inline constexpr const char* kJointSetSchema = "rpt.jointset/1";
inline constexpr const char* kEvalSchema = "rpt.eval/1";
inline constexpr const char* kConfigSchema = "rpt.config/1";

// --- files ------------------------------------------------------------------

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// Writes via a temporary sibling and rename, so readers never see partial files.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline void write_json_atomic(const std::filesystem::path& path, const Json& doc) {
  write_file_atomic(path, doc.dump(1) + "\n");
}

// --- helpers ------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void schema_fail(const std::string& what) { throw Error(ErrorCode::SchemaError, what); }

inline const Json& need(const Json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key)) schema_fail(ctx + ": missing field '" + key + "'");
  return obj.at(key);
}

template <typename T>
T get(const Json& obj, const char* key, const std::string& ctx) {
  try {
    return need(obj, key, ctx).get<T>();
  } catch (const nlohmann::json::exception& e) {
    schema_fail(ctx + ": field '" + key + "' has wrong type (" + e.what() + ")");
  }
}

inline void check_schema(const Json& doc, const char* expected, const std::string& ctx) {
  const auto schema = get<std::string>(doc, "schema", ctx);
  if (schema != expected) schema_fail(ctx + ": schema '" + schema + "', expected '" + expected + "'");
}

inline Vec3 vec3(const Json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3) schema_fail(ctx + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline double unit_scale(const std::string& unit) {
  if (unit == "m") return 1.0;
  if (unit == "cm") return 0.01;
  if (unit == "mm") return 0.001;
  schema_fail("unknown length unit '" + unit + "'");
}

}  // namespace detail

// --- joint sets -----------------------------------------------------------------

inline Json joint_set_to_json(const JointSet& set) {
  Json limbs = Json::array();
  for (const auto& l : set.limbs)
    limbs.push_back(Json::array({set.joint_names[l.a], set.joint_names[l.b], l.min_len_m, l.max_len_m}));
  Json neighbors = Json::object();
  for (int j = 0; j < set.joint_count(); ++j) {
    Json list = Json::array();
    for (int k : set.neighbor_map[j]) list.push_back(set.joint_names[k]);
    neighbors[set.joint_names[j]] = list;
  }
  return Json{{"schema", kJointSetSchema}, {"name", set.name}, {"joints", set.joint_names},
              {"limbs", limbs}, {"neighbors", neighbors}};
}

inline JointSet joint_set_from_json(const Json& doc) {
  const std::string ctx = "joint set";
  detail::check_schema(doc, kJointSetSchema, ctx);
  JointSet set;
  set.name = detail::get<std::string>(doc, "name", ctx);
  set.joint_names = detail::get<std::vector<std::string>>(doc, "joints", ctx);
  auto idx = [&](const std::string& n) {
    const int i = set.index_of(n);
    if (i < 0) detail::schema_fail(ctx + " '" + set.name + "': unknown joint '" + n + "'");
    return i;
  };
  for (auto name : kCoreJointNames) set.core_indices.push_back(set.index_of(name));
  for (const auto& l : detail::need(doc, "limbs", ctx)) {
    if (!l.is_array() || l.size() != 4) detail::schema_fail(ctx + ": limb must be [a, b, min_m, max_m]");
    set.limbs.push_back({idx(l[0].get<std::string>()), idx(l[1].get<std::string>()), l[2].get<double>(),
                         l[3].get<double>()});
  }
  set.neighbor_map.assign(set.joint_count(), {});
  const auto& nb = detail::need(doc, "neighbors", ctx);
  for (auto it = nb.begin(); it != nb.end(); ++it)
    for (const auto& n : it.value()) set.neighbor_map[idx(it.key())].push_back(idx(n.get<std::string>()));
  validate(set);
  return set;
}

// Builtin sets plus any sets loaded from files.
class JointSetResolver {
 public:
  void add(JointSet set) {
    const std::string name = set.name;
    custom_[name] = std::make_shared<const JointSet>(std::move(set));
  }

  JointSetPtr resolve(const std::string& name) const {
    auto it = custom_.find(name);
    if (it != custom_.end()) return it->second;
    return builtin_joint_set_ptr(name);
  }

 private:
  std::map<std::string, JointSetPtr> custom_;
};

// --- calibration ------------------------------------------------------------------

struct CalibrationDoc {
  std::vector<CameraCalib> cams;
  std::optional<RoomBounds> room;
};

inline Json camera_to_json(const CameraCalib& cam) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(cam.rotation(r, c));
  const int ncoef = cam.distortion.kind == DistortionModel::Kind::FisheyeEquidistant ? 4
                    : cam.distortion.kind == DistortionModel::Kind::RadialTangential ? 5
                                                                                      : 0;
  Json coeffs = Json::array();
  for (int i = 0; i < ncoef; ++i) coeffs.push_back(cam.distortion.coeffs[i]);
  return Json{{"id", cam.id},
              {"fx", cam.fx},
              {"fy", cam.fy},
              {"cx", cam.cx},
              {"cy", cam.cy},
              {"rotation", rot},
              {"translation", detail::to_json(cam.translation)},
              {"distortion", {{"kind", to_string(cam.distortion.kind)}, {"coefficients", coeffs}}},
              {"image_width", cam.image_width},
              {"image_height", cam.image_height}};
}

inline Json calibration_to_json(const std::vector<CameraCalib>& cams, const std::optional<RoomBounds>& room = {}) {
  Json list = Json::array();
  for (const auto& c : cams) list.push_back(camera_to_json(c));
  Json doc{{"schema", kCalibrationSchema}, {"units", "m"}, {"cameras", list}};
  if (room) doc["room"] = {{"min", detail::to_json(room->min_corner)}, {"max", detail::to_json(room->max_corner)}};
  return doc;
}

inline CameraCalib camera_from_json(const Json& j, double scale) {
  const std::string ctx = "camera";
  CameraCalib cam;
  cam.id = detail::get<std::string>(j, "id", ctx);
  const std::string cctx = "camera '" + cam.id + "'";
  cam.fx = detail::get<double>(j, "fx", cctx);
  cam.fy = detail::get<double>(j, "fy", cctx);
  cam.cx = detail::get<double>(j, "cx", cctx);
  cam.cy = detail::get<double>(j, "cy", cctx);
  const auto rot = detail::get<std::vector<double>>(j, "rotation", cctx);
  if (rot.size() != 9) detail::schema_fail(cctx + ": rotation must have 9 numbers (row-major)");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.rotation(r, c) = rot[3 * r + c];
  cam.translation = detail::vec3(detail::need(j, "translation", cctx), cctx + " translation") * scale;
  cam.image_width = detail::get<int>(j, "image_width", cctx);
  cam.image_height = detail::get<int>(j, "image_height", cctx);
  if (j.contains("distortion")) {
    const auto& d = j.at("distortion");
    const auto kind = detail::get<std::string>(d, "kind", cctx + " distortion");
    const auto co = d.contains("coefficients") ? d.at("coefficients").get<std::vector<double>>() : std::vector<double>{};
    auto need_n = [&](std::size_t n) {
      if (co.size() != n)
        detail::schema_fail(cctx + ": distortion '" + kind + "' needs " + std::to_string(n) + " coefficients");
    };
    if (kind == "none") {
      cam.distortion = DistortionModel::none();
    } else if (kind == "radial_tangential") {
      need_n(5);
      cam.distortion = DistortionModel::radial_tangential(co[0], co[1], co[2], co[3], co[4]);
    } else if (kind == "fisheye_equidistant") {
      need_n(4);
      cam.distortion = DistortionModel::fisheye(co[0], co[1], co[2], co[3]);
    } else {
      detail::schema_fail(cctx + ": unsupported distortion kind '" + kind + "'");
    }
  }
  validate(cam);
  return cam;
}

inline CalibrationDoc calibration_from_json(const Json& doc) {
  const std::string ctx = "calibration";
  detail::check_schema(doc, kCalibrationSchema, ctx);
  const double scale = detail::unit_scale(detail::get<std::string>(doc, "units", ctx));
  CalibrationDoc out;
  for (const auto& c : detail::need(doc, "cameras", ctx)) out.cams.push_back(camera_from_json(c, scale));
  for (std::size_t a = 0; a < out.cams.size(); ++a)
    for (std::size_t b = a + 1; b < out.cams.size(); ++b)
      if (out.cams[a].id == out.cams[b].id) detail::schema_fail(ctx + ": duplicate camera id '" + out.cams[a].id + "'");
  if (doc.contains("room")) {
    const auto& r = doc.at("room");
    RoomBounds room{detail::vec3(detail::need(r, "min", ctx), ctx + " room.min") * scale,
                    detail::vec3(detail::need(r, "max", ctx), ctx + " room.max") * scale};
    validate(room);
    out.room = room;
  }
  return out;
}

// --- detections ---------------------------------------------------------------------

struct FrameInput {
  long frame = 0;
  double timestamp = 0.0;
  FrameDetections views;
};

struct DetectionsDoc {
  JointSetPtr joint_set;
  double fps = 30.0;
  std::vector<FrameInput> frames;
};

inline Json detections_to_json(const DetectionsDoc& doc) {
  Json frames = Json::array();
  for (const auto& f : doc.frames) {
    Json views = Json::object();
    for (const auto& v : f.views) {
      Json list = Json::array();
      for (const auto& d : v.persons) {
        Json joints = Json::array();
        for (const auto& p : d.joints) joints.push_back(Json::array({p.x(), p.y()}));
        Json det{{"joints", joints}, {"confidence", d.confidence}};
        if (d.joint_set && d.joint_set != doc.joint_set && d.joint_set->name != doc.joint_set->name)
          det["joint_set"] = d.joint_set->name;
        list.push_back(det);
      }
      views[v.view] = list;
    }
    frames.push_back({{"frame", f.frame}, {"timestamp", f.timestamp}, {"views", views}});
  }
  return Json{{"schema", kDetectionsSchema}, {"joint_set", doc.joint_set->name}, {"fps", doc.fps}, {"frames", frames}};
}

inline DetectionsDoc detections_from_json(const Json& doc, const JointSetResolver& sets = {}) {
  const std::string ctx = "detections";
  detail::check_schema(doc, kDetectionsSchema, ctx);
  DetectionsDoc out;
  out.joint_set = sets.resolve(detail::get<std::string>(doc, "joint_set", ctx));
  if (doc.contains("fps")) out.fps = doc.at("fps").get<double>();
  if (!(out.fps > 0.0)) detail::schema_fail(ctx + ": fps must be positive");
  for (const auto& f : detail::need(doc, "frames", ctx)) {
    FrameInput in;
    in.frame = detail::get<long>(f, "frame", ctx);
    const std::string fctx = ctx + " frame " + std::to_string(in.frame);
    in.timestamp = f.contains("timestamp") ? f.at("timestamp").get<double>() : in.frame / out.fps;
    const auto& views = detail::need(f, "views", fctx);
    if (!views.is_object()) detail::schema_fail(fctx + ": views must map view id to detections");
    for (auto it = views.begin(); it != views.end(); ++it) {
      ViewDetections vd;
      vd.view = it.key();
      int idx = 0;
      for (const auto& d : it.value()) {
        Detection2D det;
        det.view = vd.view;
        det.person_index = idx++;
        det.joint_set = d.contains("joint_set") ? sets.resolve(d.at("joint_set").get<std::string>()) : out.joint_set;
        const auto& joints = detail::need(d, "joints", fctx);
        det.confidence = detail::get<std::vector<double>>(d, "confidence", fctx);
        const std::size_t n = static_cast<std::size_t>(det.joint_set->joint_count());
        if (joints.size() != n || det.confidence.size() != n)
          detail::schema_fail(fctx + " view '" + vd.view + "': expected " + std::to_string(n) + " joints, got " +
                              std::to_string(joints.size()));
        for (const auto& p : joints) {
          if (!p.is_array() || p.size() != 2) detail::schema_fail(fctx + ": joint must be [u, v]");
          det.joints.emplace_back(p[0].get<double>(), p[1].get<double>());
        }
        for (double c : det.confidence)
          if (!(c >= 0.0 && c <= 1.0)) detail::schema_fail(fctx + ": confidence outside [0,1]");
        vd.persons.push_back(std::move(det));
      }
      in.views.push_back(std::move(vd));
    }
    out.frames.push_back(std::move(in));
  }
  return out;
}

// --- persons (pipeline output and ground truth) ----------------------------------------

struct PersonsFrame {
  long frame = 0;
  std::vector<Person3D> persons;
  std::optional<StepTimings> timings;
};

struct PersonsDoc {
  JointSetPtr joint_set;
  std::vector<PersonsFrame> frames;
};

inline Json person_to_json(const Person3D& p) {
  Json joints = Json::array();
  for (int j = 0; j < p.joint_count(); ++j)
    joints.push_back(p.joint_valid[j] ? detail::to_json(p.joints[j]) : Json(nullptr));
  Json valid = Json::array(), filled = Json::array();
  for (int j = 0; j < p.joint_count(); ++j) {
    valid.push_back(p.joint_valid[j] != 0);
    filled.push_back(p.filled[j] != 0);
  }
  Json out = Json::object();
  if (p.track_id) out["track_id"] = *p.track_id;
  if (p.held) out["held"] = true;
  out["group_size"] = p.group_size;
  out["joints"] = joints;
  out["valid"] = valid;
  out["support"] = p.joint_support;
  out["filled"] = filled;
  return out;
}

inline Json timings_to_json(const StepTimings& t) {
  Json out = Json::object();
  for (int s = 0; s < kStepCount; ++s) out[std::string(kStepNames[s])] = t.seconds[s] * 1e6;
  out["total"] = t.total() * 1e6;
  return out;
}

inline Json persons_to_json(const PersonsDoc& doc) {
  Json frames = Json::array();
  for (const auto& f : doc.frames) {
    Json persons = Json::array();
    for (const auto& p : f.persons) persons.push_back(person_to_json(p));
    Json fr{{"frame", f.frame}, {"persons", persons}};
    if (f.timings) fr["timing_us"] = timings_to_json(*f.timings);
    frames.push_back(fr);
  }
  return Json{{"schema", kPersonsSchema}, {"joint_set", doc.joint_set->name}, {"units", "m"}, {"frames", frames}};
}

inline PersonsDoc persons_from_json(const Json& doc, const JointSetResolver& sets = {}) {
  const std::string ctx = "persons";
  detail::check_schema(doc, kPersonsSchema, ctx);
  PersonsDoc out;
  out.joint_set = sets.resolve(detail::get<std::string>(doc, "joint_set", ctx));
  const double scale = doc.contains("units") ? detail::unit_scale(doc.at("units").get<std::string>()) : 1.0;
  const int nj = out.joint_set->joint_count();
  for (const auto& f : detail::need(doc, "frames", ctx)) {
    PersonsFrame pf;
    pf.frame = detail::get<long>(f, "frame", ctx);
    const std::string fctx = ctx + " frame " + std::to_string(pf.frame);
    for (const auto& pj : detail::need(f, "persons", fctx)) {
      Person3D p = Person3D::empty(nj);
      const auto& joints = detail::need(pj, "joints", fctx);
      if (static_cast<int>(joints.size()) != nj)
        detail::schema_fail(fctx + ": person has " + std::to_string(joints.size()) + " joints, expected " +
                            std::to_string(nj));
      for (int j = 0; j < nj; ++j) {
        if (joints[j].is_null()) continue;
        p.joints[j] = detail::vec3(joints[j], fctx) * scale;
        p.joint_valid[j] = 1;
      }
      if (pj.contains("valid")) {
        const auto v = pj.at("valid").get<std::vector<bool>>();
        if (static_cast<int>(v.size()) != nj) detail::schema_fail(fctx + ": 'valid' length mismatch");
        for (int j = 0; j < nj; ++j) p.joint_valid[j] = p.joint_valid[j] && v[j];
      }
      if (pj.contains("support")) {
        p.joint_support = pj.at("support").get<std::vector<int>>();
        if (static_cast<int>(p.joint_support.size()) != nj) detail::schema_fail(fctx + ": 'support' length mismatch");
      }
      if (pj.contains("filled")) {
        const auto v = pj.at("filled").get<std::vector<bool>>();
        if (static_cast<int>(v.size()) != nj) detail::schema_fail(fctx + ": 'filled' length mismatch");
        for (int j = 0; j < nj; ++j) p.filled[j] = v[j] ? 1 : 0;
      }
      if (pj.contains("track_id")) p.track_id = pj.at("track_id").get<int>();
      if (pj.contains("held")) p.held = pj.at("held").get<bool>();
      if (pj.contains("group_size")) p.group_size = pj.at("group_size").get<int>();
      pf.persons.push_back(std::move(p));
    }
    if (f.contains("timing_us")) {
      StepTimings t;
      for (int k = 0; k < kStepCount; ++k)
        t.seconds[k] = detail::get<double>(f.at("timing_us"), std::string(kStepNames[k]).c_str(), fctx) * 1e-6;
      pf.timings = t;
    }
    out.frames.push_back(std::move(pf));
  }
  return out;
}

// --- configuration ----------------------------------------------------------------------

inline Json pipeline_config_to_json(const PipelineConfig& c) {
  return Json{{"conf_floor", c.conf_floor},
              {"prev_match_px", c.prev_match_px},
              {"max_reproj_err_px", c.max_reproj_err_px},
              {"use_confidence_weighting", c.use_confidence_weighting},
              {"score_mode", to_string(c.score_mode)},
              {"gap_to_px", c.gap_to_px},
              {"group_dist_m", c.group_dist_m},
              {"min_group_size", c.min_group_size},
              {"outlier_dist_m", c.outlier_dist_m},
              {"merge_top_k", c.merge_top_k},
              {"min_valid_joints", c.min_valid_joints},
              {"min_height_m", c.min_height_m},
              {"max_height_m", c.max_height_m},
              {"room", {{"min", detail::to_json(c.room.min_corner)}, {"max", detail::to_json(c.room.max_corner)}}},
              {"room_margin_m", c.room_margin_m},
              {"enable_pair_prefilter", c.enable_pair_prefilter},
              {"enable_outlier_reject", c.enable_outlier_reject}};
}

// Applies the keys present in `j`; unknown keys are rejected.
inline void apply_pipeline_overrides(PipelineConfig& c, const Json& j) {
  const std::string ctx = "pipeline config";
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, ctx + " must be an object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const Json& v = it.value();
      if (k == "conf_floor") c.conf_floor = v.get<double>();
      else if (k == "prev_match_px") c.prev_match_px = v.get<double>();
      else if (k == "max_reproj_err_px") c.max_reproj_err_px = v.get<double>();
      else if (k == "use_confidence_weighting") c.use_confidence_weighting = v.get<bool>();
      else if (k == "score_mode") {
        const auto m = v.get<std::string>();
        if (m == "combined") c.score_mode = ScoreMode::Combined;
        else if (m == "triangulation_only") c.score_mode = ScoreMode::TriangulationOnly;
        else if (m == "reprojection_only") c.score_mode = ScoreMode::ReprojectionOnly;
        else throw Error(ErrorCode::InvalidConfig, "unknown score_mode '" + m + "'");
      }
      else if (k == "gap_to_px") c.gap_to_px = v.get<double>();
      else if (k == "group_dist_m") c.group_dist_m = v.get<double>();
      else if (k == "min_group_size") c.min_group_size = v.get<int>();
      else if (k == "outlier_dist_m") c.outlier_dist_m = v.get<double>();
      else if (k == "merge_top_k") c.merge_top_k = v.get<int>();
      else if (k == "min_valid_joints") c.min_valid_joints = v.get<int>();
      else if (k == "min_height_m") c.min_height_m = v.get<double>();
      else if (k == "max_height_m") c.max_height_m = v.get<double>();
      else if (k == "room") {
        c.room.min_corner = detail::vec3(detail::need(v, "min", ctx), ctx + " room.min");
        c.room.max_corner = detail::vec3(detail::need(v, "max", ctx), ctx + " room.max");
      }
      else if (k == "room_margin_m") c.room_margin_m = v.get<double>();
      else if (k == "enable_pair_prefilter") c.enable_pair_prefilter = v.get<bool>();
      else if (k == "enable_outlier_reject") c.enable_outlier_reject = v.get<bool>();
      else throw Error(ErrorCode::InvalidConfig, ctx + ": unknown key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, ctx + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaError) throw Error(ErrorCode::InvalidConfig, e.what());
    throw;
  }
  validate(c);
}

inline Json tracker_config_to_json(const TrackerConfig& c) {
  return Json{{"assign_dist_m", c.assign_dist_m},
              {"max_speed_mps", c.max_speed_mps},
              {"max_misses", c.max_misses},
              {"hold_lost", c.hold_lost}};
}

inline void apply_tracker_overrides(TrackerConfig& c, const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "tracker config must be an object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k == "assign_dist_m") c.assign_dist_m = it.value().get<double>();
      else if (k == "max_speed_mps") c.max_speed_mps = it.value().get<double>();
      else if (k == "max_misses") c.max_misses = it.value().get<int>();
      else if (k == "hold_lost") c.hold_lost = it.value().get<bool>();
      else throw Error(ErrorCode::InvalidConfig, "tracker config: unknown key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("tracker config: ") + e.what());
  }
  validate(c);
}

// --- evaluation results -----------------------------------------------------------------

inline std::string format_threshold(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

inline Json eval_result_to_json(const EvalResult& r, const JointSet& eval_set) {
  Json pck = Json::object(), recall = Json::object(), per_joint = Json::object();
  for (const auto& [t, v] : r.pck) pck[format_threshold(t)] = v;
  for (const auto& [t, v] : r.recall) recall[format_threshold(t)] = v;
  for (int j = 0; j < eval_set.joint_count(); ++j) per_joint[eval_set.joint_names[j]] = r.per_joint_mpjpe[j];
  return Json{{"schema", kEvalSchema},
              {"joint_set", eval_set.name},
              {"pcp", r.pcp},
              {"pck", pck},
              {"mpjpe_mm", r.mpjpe},
              {"recall", recall},
              {"invalid", r.invalid},
              {"f1", r.f1},
              {"per_joint_mpjpe_mm", per_joint},
              {"counts", {{"gt_persons", r.gt_persons}, {"pred_persons", r.pred_persons}, {"matched", r.matched}}}};
}

// Aligned table: PCP, PCK@..., MPJPE, Recall@..., Invalid, F1 (+ optional extra columns).
inline std::string eval_table(const std::vector<std::pair<std::string, EvalResult>>& rows,
                              const std::vector<std::string>& extra_headers = {},
                              const std::vector<std::vector<std::string>>& extra_values = {}) {
  std::vector<std::string> headers{"Name", "PCP"};
  if (!rows.empty()) {
    for (const auto& [t, v] : rows.front().second.pck) headers.push_back("PCK@" + format_threshold(t));
    headers.push_back("MPJPE");
    for (const auto& [t, v] : rows.front().second.recall) headers.push_back("Recall@" + format_threshold(t));
  }
  headers.push_back("Invalid");
  headers.push_back("F1");
  for (const auto& h : extra_headers) headers.push_back(h);

  auto fmt = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(v != 0.0 && std::abs(v) < 0.1 ? 4 : 1) << v;
    return os.str();
  };
  std::vector<std::vector<std::string>> cells;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [name, r] = rows[i];
    std::vector<std::string> row{name, fmt(r.pcp)};
    for (const auto& [t, v] : r.pck) row.push_back(fmt(v));
    row.push_back(fmt(r.mpjpe));
    for (const auto& [t, v] : r.recall) row.push_back(fmt(v));
    row.push_back(fmt(r.invalid));
    row.push_back(fmt(r.f1));
    if (i < extra_values.size())
      for (const auto& e : extra_values[i]) row.push_back(e);
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& row : cells)
      if (c < row.size()) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < headers.size(); ++c) {
      const std::string cell = c < row.size() ? row[c] : "";
      if (c == 0)
        os << std::left << std::setw(static_cast<int>(width[c])) << cell;
      else
        os << " | " << std::right << std::setw(static_cast<int>(width[c])) << cell;
    }
    os << "\n";
  };
  line(headers);
  std::size_t total = 0;
  for (auto w : width) total += w + 3;
  os << std::string(total > 3 ? total - 3 : 0, '-') << "\n";
  for (const auto& row : cells) line(row);
  return os.str();
}

// Converts persons documents to evaluation frames, aligned by frame number.
inline std::pair<std::vector<EvalFrame>, std::vector<EvalFrame>> align_for_eval(const PersonsDoc& gt,
                                                                                const PersonsDoc& pred,
                                                                                const JointSet& eval_set) {
  if (gt.frames.size() != pred.frames.size())
    throw Error(ErrorCode::FrameMisalignment, "ground truth has " + std::to_string(gt.frames.size()) +
                                                  " frames, predictions have " + std::to_string(pred.frames.size()));
  std::vector<EvalFrame> g, p;
  for (std::size_t i = 0; i < gt.frames.size(); ++i) {
    if (gt.frames[i].frame != pred.frames[i].frame)
      throw Error(ErrorCode::FrameMisalignment, "frame ids differ at position " + std::to_string(i) + ": " +
                                                    std::to_string(gt.frames[i].frame) + " vs " +
                                                    std::to_string(pred.frames[i].frame));
    g.push_back(to_eval_frame(gt.frames[i].persons, *gt.joint_set, eval_set));
    p.push_back(to_eval_frame(pred.frames[i].persons, *pred.joint_set, eval_set));
  }
  return {std::move(g), std::move(p)};
}

}  // namespace rpt::io

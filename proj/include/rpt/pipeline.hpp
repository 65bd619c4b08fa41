#pragma once

#include <rpt/common.hpp>
#include <rpt/geometry.hpp>
#include <rpt/skeleton.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rpt {

enum class ScoreMode { Combined, TriangulationOnly, ReprojectionOnly };

inline std::string_view to_string(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::Combined: return "combined";
    case ScoreMode::TriangulationOnly: return "triangulation_only";
    case ScoreMode::ReprojectionOnly: return "reprojection_only";
  }
  return "combined";
}

// Every tunable of the 3D stage. Defaults are artifact choices.
struct PipelineConfig {
  double conf_floor = 0.3;
  double prev_match_px = 40.0;
  double max_reproj_err_px = 10.0;
  bool use_confidence_weighting = true;
  ScoreMode score_mode = ScoreMode::Combined;
  double gap_to_px = 100.0;  // pixels per meter of midpoint gap in the combined score
  double group_dist_m = 0.3;
  int min_group_size = 3;
  double outlier_dist_m = 0.15;
  int merge_top_k = 4;
  int min_valid_joints = 6;
  double min_height_m = 0.5;
  double max_height_m = 2.5;
  RoomBounds room;
  double room_margin_m = 0.25;
  bool enable_pair_prefilter = true;
  bool enable_outlier_reject = true;
};

inline void validate(const PipelineConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (cfg.conf_floor < 0.0 || cfg.conf_floor > 1.0) fail("conf_floor must be in [0,1]");
  if (!(cfg.prev_match_px > 0.0)) fail("prev_match_px must be positive");
  if (!(cfg.max_reproj_err_px > 0.0)) fail("max_reproj_err_px must be positive");
  if (!(cfg.gap_to_px > 0.0)) fail("gap_to_px must be positive");
  if (!(cfg.group_dist_m > 0.0)) fail("group_dist_m must be positive");
  if (!(cfg.outlier_dist_m > 0.0)) fail("outlier_dist_m must be positive");
  if (cfg.min_group_size < 1) fail("min_group_size must be >= 1");
  if (cfg.merge_top_k < 1) fail("merge_top_k must be >= 1");
  if (cfg.min_valid_joints < 1) fail("min_valid_joints must be >= 1");
  if (!(cfg.min_height_m > 0.0) || !(cfg.min_height_m < cfg.max_height_m)) fail("height bounds invalid");
  if (cfg.room_margin_m < 0.0) fail("room_margin_m must be non-negative");
  validate(cfg.room);
}

struct Detection2D {
  std::string view;
  int person_index = 0;
  std::vector<Vec2> joints;  // pixels
  std::vector<double> confidence;
  JointSetPtr joint_set;
};

struct ViewDetections {
  std::string view;
  std::vector<Detection2D> persons;
};

using FrameDetections = std::vector<ViewDetections>;

enum class PairState : std::uint8_t { Candidate, FilteredOut, Scored, Dropped, Grouped };

// View fields index into FrameDetections; view_a < view_b always.
struct ViewPair {
  int view_a = 0;
  int idx_a = 0;
  int view_b = 0;
  int idx_b = 0;
  PairState state = PairState::Candidate;

  std::array<int, 4> key() const { return {view_a, idx_a, view_b, idx_b}; }
};

struct JointEstimate {
  int joint = 0;
  Vec3 position = Vec3::Zero();
  double gap = 0.0;  // midpoint segment length, meters
};

struct Proposal3D {
  ViewPair pair;
  std::vector<JointEstimate> joints;  // present joints only, ascending joint index
  double reproj_err_px = 0.0;
  double score = 0.0;
  bool dropped = false;

  const JointEstimate* find(int joint) const {
    auto it = std::lower_bound(joints.begin(), joints.end(), joint,
                               [](const JointEstimate& e, int j) { return e.joint < j; });
    return (it != joints.end() && it->joint == joint) ? &*it : nullptr;
  }

  double mean_gap() const {
    if (joints.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : joints) s += e.gap;
    return s / static_cast<double>(joints.size());
  }
};

struct Person3D {
  std::vector<Vec3> joints;
  std::vector<std::uint8_t> joint_valid;
  std::vector<int> joint_support;
  std::vector<std::uint8_t> filled;
  int group_size = 0;
  std::optional<int> track_id;
  bool held = false;                   // emitted from a missed track
  std::array<int, 4> source_key{};     // pair key of the best-scoring member proposal

  static Person3D empty(int joint_count) {
    Person3D p;
    p.joints.assign(joint_count, Vec3::Zero());
    p.joint_valid.assign(joint_count, 0);
    p.joint_support.assign(joint_count, 0);
    p.filled.assign(joint_count, 0);
    return p;
  }

  int joint_count() const { return static_cast<int>(joints.size()); }

  int valid_count() const {
    return static_cast<int>(std::count(joint_valid.begin(), joint_valid.end(), std::uint8_t{1}));
  }
};

enum class Step : int {
  Undistortion,
  PairCreation,
  PairFiltering,
  TriangulateScore,
  Grouping,
  TriangulateScore2,
  Merge,
  PostProcess,
  Tracking,
  Count
};

inline constexpr int kStepCount = static_cast<int>(Step::Count);

inline constexpr std::array<std::string_view, kStepCount> kStepNames{
    "undistortion", "pair_creation", "pair_filtering", "triangulate_score", "grouping",
    "triangulate_score_2", "merge", "post_process", "tracking"};

struct StepTimings {
  std::array<double, kStepCount> seconds{};

  double& operator[](Step s) { return seconds[static_cast<int>(s)]; }
  double operator[](Step s) const { return seconds[static_cast<int>(s)]; }
  double total() const { return std::accumulate(seconds.begin(), seconds.end(), 0.0); }
};

struct FrameStats {
  int pairs_created = 0;
  int pairs_after_filter = 0;
  int pairs_triangulated = 0;   // proposals that entered scoring
  int proposals_kept = 0;       // survivors of the error threshold
  int groups = 0;
  int proposals_retriangulated = 0;
  int persons = 0;
};

struct FrameResult {
  std::vector<Person3D> persons;
  StepTimings timings;
  FrameStats stats;
  std::optional<ErrorCode> status;  // set when the frame was skipped (TooFewViews)
};

// --- Undistortion -----------------------------------------------------------

struct PreparedDetection {
  std::vector<Vec2> rectified;  // undistorted pinhole pixels
  std::vector<Vec3> ray_dir;    // world-frame unit directions
  std::vector<double> confidence;
  std::vector<std::uint8_t> valid;  // confidence >= floor and undistortion converged
};

struct PreparedView {
  const CameraCalib* cam = nullptr;
  Mat3 cam_to_world = Mat3::Identity();
  Vec3 center = Vec3::Zero();
  std::vector<PreparedDetection> persons;

  // Pinhole projection into the rectified pixel frame.
  bool project(const Vec3& p, Vec2& out) const {
    const Vec3 pc = cam->rotation * p + cam->translation;
    if (!(pc.z() > kMinDepth)) return false;
    out = {cam->fx * pc.x() / pc.z() + cam->cx, cam->fy * pc.y() / pc.z() + cam->cy};
    return true;
  }
};

struct PreparedFrame {
  std::vector<PreparedView> views;
  JointSetPtr joint_set;  // null when the frame holds no detections
};

inline const CameraCalib& find_camera(std::span<const CameraCalib> cams, const std::string& id) {
  for (const auto& c : cams)
    if (c.id == id) return c;
  throw Error(ErrorCode::CalibrationMissing, "no calibration for view '" + id + "'");
}

inline PreparedFrame prepare_frame(const FrameDetections& detections, std::span<const CameraCalib> cams,
                                   const PipelineConfig& cfg) {
  PreparedFrame frame;
  frame.views.reserve(detections.size());
  for (const auto& view : detections) {
    PreparedView pv;
    pv.cam = &find_camera(cams, view.view);
    pv.cam_to_world = pv.cam->rotation.transpose();
    pv.center = pv.cam->center();
    pv.persons.reserve(view.persons.size());
    for (const auto& det : view.persons) {
      if (!det.joint_set) throw Error(ErrorCode::SchemaError, "detection without joint set");
      if (!frame.joint_set) {
        frame.joint_set = det.joint_set;
      } else if (frame.joint_set != det.joint_set && *frame.joint_set != *det.joint_set) {
        throw Error(ErrorCode::SchemaError, "mixed joint sets within one frame");
      }
      const std::size_t n = static_cast<std::size_t>(frame.joint_set->joint_count());
      if (det.joints.size() != n || det.confidence.size() != n)
        throw Error(ErrorCode::SchemaError, "detection in view '" + view.view + "' has " +
                                                std::to_string(det.joints.size()) + " joints, expected " +
                                                std::to_string(n));
      PreparedDetection pd;
      pd.rectified.resize(n, Vec2::Zero());
      pd.ray_dir.resize(n, Vec3::UnitZ());
      pd.confidence = det.confidence;
      pd.valid.assign(n, 0);
      for (std::size_t j = 0; j < n; ++j) {
        if (!(det.confidence[j] >= cfg.conf_floor) || !det.joints[j].allFinite()) continue;
        auto norm = undistort_normalized(pixel_to_normalized(det.joints[j], *pv.cam), pv.cam->distortion);
        if (!norm) continue;
        pd.rectified[j] = normalized_to_pixel(*norm, *pv.cam);
        pd.ray_dir[j] = (pv.cam_to_world * Vec3(norm->x(), norm->y(), 1.0)).normalized();
        pd.valid[j] = 1;
      }
      pv.persons.push_back(std::move(pd));
    }
    frame.views.push_back(std::move(pv));
  }
  return frame;
}

// --- pair creation ----------------------------------------------------------

inline std::vector<ViewPair> create_pairs(std::span<const int> persons_per_view) {
  if (persons_per_view.size() < 2)
    throw Error(ErrorCode::TooFewViews, "need at least two views, got " + std::to_string(persons_per_view.size()));
  std::vector<ViewPair> pairs;
  std::size_t total = 0;
  for (std::size_t a = 0; a < persons_per_view.size(); ++a)
    for (std::size_t b = a + 1; b < persons_per_view.size(); ++b)
      total += static_cast<std::size_t>(persons_per_view[a]) * static_cast<std::size_t>(persons_per_view[b]);
  pairs.reserve(total);
  const int nv = static_cast<int>(persons_per_view.size());
  for (int a = 0; a < nv; ++a)
    for (int b = a + 1; b < nv; ++b)
      for (int i = 0; i < persons_per_view[a]; ++i)
        for (int k = 0; k < persons_per_view[b]; ++k) pairs.push_back({a, i, b, k});
  return pairs;
}

inline std::vector<ViewPair> create_pairs(const FrameDetections& detections) {
  std::vector<int> counts;
  counts.reserve(detections.size());
  for (const auto& v : detections) counts.push_back(static_cast<int>(v.persons.size()));
  return create_pairs(counts);
}

// --- filtering with the previous frame --------------------------------------

// For every view and detection, the index of the previous person it matches
// (nearest mean core-joint distance below prev_match_px, ties to the lower
// index) or -1.
inline std::vector<std::vector<int>> match_to_previous(const PreparedFrame& frame,
                                                       std::span<const Person3D> prev,
                                                       const PipelineConfig& cfg) {
  std::vector<std::vector<int>> matches(frame.views.size());
  if (!frame.joint_set) return matches;
  const auto& core = frame.joint_set->core_indices;
  std::vector<Vec2> projected(core.size());
  std::vector<std::uint8_t> has_proj(core.size());
  for (std::size_t v = 0; v < frame.views.size(); ++v) {
    const auto& view = frame.views[v];
    matches[v].assign(view.persons.size(), -1);
    std::vector<double> best(view.persons.size(), std::numeric_limits<double>::infinity());
    for (std::size_t p = 0; p < prev.size(); ++p) {
      const Person3D& person = prev[p];
      for (std::size_t c = 0; c < core.size(); ++c) {
        const int j = core[c];
        has_proj[c] = j < person.joint_count() && person.joint_valid[j] && !person.filled[j] &&
                      view.project(person.joints[j], projected[c]);
      }
      for (std::size_t d = 0; d < view.persons.size(); ++d) {
        const auto& det = view.persons[d];
        double sum = 0.0;
        int n = 0;
        for (std::size_t c = 0; c < core.size(); ++c) {
          if (!has_proj[c] || !det.valid[core[c]]) continue;
          sum += (projected[c] - det.rectified[core[c]]).norm();
          ++n;
        }
        if (n == 0) continue;
        const double mean = sum / n;
        if (mean <= cfg.prev_match_px && mean < best[d]) {
          best[d] = mean;
          matches[v][d] = static_cast<int>(p);
        }
      }
    }
  }
  return matches;
}

// A pair survives when both parts match the same previous person or neither matches.
inline bool keep_pair(int match_a, int match_b) { return match_a == match_b; }

inline std::vector<ViewPair> filter_pairs_with_previous(std::span<const ViewPair> pairs, const PreparedFrame& frame,
                                                        std::span<const Person3D> prev, const PipelineConfig& cfg) {
  std::vector<ViewPair> kept;
  if (prev.empty()) {
    kept.assign(pairs.begin(), pairs.end());
    return kept;
  }
  const auto matches = match_to_previous(frame, prev, cfg);
  kept.reserve(pairs.size());
  for (const auto& pair : pairs)
    if (keep_pair(matches[pair.view_a][pair.idx_a], matches[pair.view_b][pair.idx_b])) kept.push_back(pair);
  return kept;
}

// --- triangulation ----------------------------------------------------------

inline Proposal3D triangulate_pair(const ViewPair& pair, const PreparedFrame& frame, std::span<const int> joint_indices,
                                   const PipelineConfig& cfg) {
  (void)cfg;
  Proposal3D prop;
  prop.pair = pair;
  const PreparedView& va = frame.views[pair.view_a];
  const PreparedView& vb = frame.views[pair.view_b];
  const PreparedDetection& da = va.persons[pair.idx_a];
  const PreparedDetection& db = vb.persons[pair.idx_b];
  prop.joints.reserve(joint_indices.size());
  for (int j : joint_indices) {
    if (!da.valid[j] || !db.valid[j]) continue;
    auto tri = try_midpoint(va.center, da.ray_dir[j], vb.center, db.ray_dir[j]);
    if (!tri) continue;
    prop.joints.push_back({j, tri->point, tri->gap});
  }
  std::sort(prop.joints.begin(), prop.joints.end(),
            [](const JointEstimate& x, const JointEstimate& y) { return x.joint < y.joint; });
  prop.dropped = prop.joints.empty();
  return prop;
}

// Mean of present core joints, or of all present joints when none is core.
inline Vec3 proposal_center(const Proposal3D& prop, std::span<const std::uint8_t> is_core) {
  Vec3 sum = Vec3::Zero(), all = Vec3::Zero();
  int n = 0;
  for (const auto& e : prop.joints) {
    all += e.position;
    if (is_core[e.joint]) {
      sum += e.position;
      ++n;
    }
  }
  if (n > 0) return sum / n;
  return prop.joints.empty() ? Vec3::Zero() : Vec3(all / static_cast<double>(prop.joints.size()));
}

inline std::vector<std::uint8_t> core_mask(const JointSet& set) {
  std::vector<std::uint8_t> mask(set.joint_count(), 0);
  for (int j : set.core_indices) mask[j] = 1;
  return mask;
}

// Removes joints outside the room and drops the proposal when its center is outside.
inline void apply_room_filter(Proposal3D& prop, std::span<const std::uint8_t> is_core, const PipelineConfig& cfg) {
  if (prop.joints.empty()) {
    prop.dropped = true;
    return;
  }
  if (!in_room(proposal_center(prop, is_core), cfg.room, cfg.room_margin_m)) {
    prop.dropped = true;
    return;
  }
  std::erase_if(prop.joints, [&](const JointEstimate& e) { return !in_room(e.position, cfg.room, cfg.room_margin_m); });
  prop.dropped = prop.joints.empty();
}

// --- reprojection scoring ---------------------------------------------------

// Drops the distal joint of every implausible limb whose endpoints are both present.
inline void prune_invalid_limbs(Proposal3D& prop, const JointSet& set) {
  if (prop.joints.empty()) return;
  std::vector<std::uint8_t> remove;
  for (const Limb& limb : set.limbs) {
    const JointEstimate* a = prop.find(limb.a);
    const JointEstimate* b = prop.find(limb.b);
    if (!a || !b) continue;
    if (!remove.empty() && (remove[limb.a] || remove[limb.b])) continue;
    if (!limb_plausible(a->position, b->position, limb)) {
      if (remove.empty()) remove.assign(set.joint_count(), 0);
      remove[limb.b] = 1;
    }
  }
  if (!remove.empty()) std::erase_if(prop.joints, [&](const JointEstimate& e) { return remove[e.joint] != 0; });
}

inline void score_proposal(Proposal3D& prop, const PreparedFrame& frame, const PipelineConfig& cfg) {
  prune_invalid_limbs(prop, *frame.joint_set);
  const PreparedView& va = frame.views[prop.pair.view_a];
  const PreparedView& vb = frame.views[prop.pair.view_b];
  const PreparedDetection& da = va.persons[prop.pair.idx_a];
  const PreparedDetection& db = vb.persons[prop.pair.idx_b];

  double weighted = 0.0, weight_sum = 0.0;
  Vec2 pa, pb;
  std::erase_if(prop.joints, [&](const JointEstimate& e) {
    if (!va.project(e.position, pa) || !vb.project(e.position, pb)) return true;
    const double err = 0.5 * ((pa - da.rectified[e.joint]).norm() + (pb - db.rectified[e.joint]).norm());
    const double w = cfg.use_confidence_weighting ? da.confidence[e.joint] * db.confidence[e.joint] : 1.0;
    weighted += w * err;
    weight_sum += w;
    return false;
  });
  if (prop.joints.empty() || !(weight_sum > 0.0)) {
    prop.dropped = true;
    prop.reproj_err_px = std::numeric_limits<double>::infinity();
    prop.score = std::numeric_limits<double>::max();
    return;
  }
  prop.reproj_err_px = weighted / weight_sum;
  const double gap_px = cfg.gap_to_px * prop.mean_gap();
  switch (cfg.score_mode) {
    case ScoreMode::Combined: prop.score = prop.reproj_err_px + gap_px; break;
    case ScoreMode::TriangulationOnly: prop.score = gap_px; break;
    case ScoreMode::ReprojectionOnly: prop.score = prop.reproj_err_px; break;
  }
  prop.pair.state = PairState::Scored;
}

// --- error threshold --------------------------------------------------------

inline bool passes_threshold(const Proposal3D& p, const PipelineConfig& cfg) {
  return !p.dropped && !p.joints.empty() && p.reproj_err_px <= cfg.max_reproj_err_px;
}

inline std::vector<Proposal3D> drop_bad_pairs(std::vector<Proposal3D> proposals, const PipelineConfig& cfg) {
  std::erase_if(proposals, [&](const Proposal3D& p) { return !passes_threshold(p, cfg); });
  return proposals;
}

// --- grouping ---------------------------------------------------------------

namespace detail {

inline int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace detail

// Connected components of the graph linking proposals whose centers lie within
// group_dist_m. Returns index groups ordered by their smallest member.
inline std::vector<std::vector<int>> group_indices(std::span<const Vec3> centers, double group_dist_m) {
  const int n = static_cast<int>(centers.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const double d2 = group_dist_m * group_dist_m;
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      if ((centers[i] - centers[k]).squaredNorm() > d2) continue;
      const int ri = detail::find_root(parent, i), rk = detail::find_root(parent, k);
      if (ri != rk) parent[std::max(ri, rk)] = std::min(ri, rk);
    }
  }
  std::vector<int> slot(n, -1);
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < n; ++i) {
    const int r = detail::find_root(parent, i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[slot[r]].push_back(i);
  }
  return groups;
}

inline std::vector<std::vector<Proposal3D>> group_proposals(std::vector<Proposal3D> proposals, const JointSet& set,
                                                            const PipelineConfig& cfg) {
  const auto is_core = core_mask(set);
  std::vector<Vec3> centers;
  centers.reserve(proposals.size());
  for (const auto& p : proposals) centers.push_back(proposal_center(p, is_core));
  std::vector<std::vector<Proposal3D>> groups;
  for (const auto& idx : group_indices(centers, cfg.group_dist_m)) {
    if (static_cast<int>(idx.size()) < cfg.min_group_size) continue;
    std::vector<Proposal3D> g;
    g.reserve(idx.size());
    for (int i : idx) {
      g.push_back(std::move(proposals[i]));
      g.back().pair.state = PairState::Grouped;
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

// --- full-joint retriangulation ---------------------------------------------

inline std::vector<std::vector<Proposal3D>> retriangulate_full(const std::vector<std::vector<Proposal3D>>& groups,
                                                               const PreparedFrame& frame,
                                                               const PipelineConfig& cfg) {
  const JointSet& set = *frame.joint_set;
  std::vector<int> all(set.joint_count());
  std::iota(all.begin(), all.end(), 0);
  const auto is_core = core_mask(set);
  std::vector<std::vector<Proposal3D>> out;
  out.reserve(groups.size());
  for (const auto& group : groups) {
    std::vector<Proposal3D> full;
    full.reserve(group.size());
    for (const auto& prop : group) {
      Proposal3D p = triangulate_pair(prop.pair, frame, all, cfg);
      apply_room_filter(p, is_core, cfg);
      if (p.dropped) continue;
      score_proposal(p, frame, cfg);
      if (passes_threshold(p, cfg)) full.push_back(std::move(p));
    }
    if (static_cast<int>(full.size()) >= cfg.min_group_size && !full.empty()) out.push_back(std::move(full));
  }
  return out;
}

// --- merging ----------------------------------------------------------------

inline Person3D merge_group(std::span<const Proposal3D> group, int joint_count, const PipelineConfig& cfg) {
  Person3D person = Person3D::empty(joint_count);
  person.group_size = static_cast<int>(group.size());
  if (group.empty()) return person;

  const Proposal3D* best = &group.front();
  for (const auto& p : group)
    if (p.score < best->score || (p.score == best->score && p.pair.key() < best->pair.key())) best = &p;
  person.source_key = best->pair.key();

  std::vector<std::size_t> cursor(group.size(), 0);
  std::vector<Vec3> contrib;
  std::vector<std::pair<double, int>> ranked;
  contrib.reserve(group.size());
  ranked.reserve(group.size());
  for (int j = 0; j < joint_count; ++j) {
    contrib.clear();
    // Proposals store joints in ascending order, so a per-proposal cursor walks them once.
    for (std::size_t g = 0; g < group.size(); ++g) {
      const auto& joints = group[g].joints;
      std::size_t& c = cursor[g];
      while (c < joints.size() && joints[c].joint < j) ++c;
      if (c < joints.size() && joints[c].joint == j) contrib.push_back(joints[c].position);
    }
    if (contrib.empty()) continue;
    Vec3 mean = Vec3::Zero();
    for (const auto& p : contrib) mean += p;
    mean /= static_cast<double>(contrib.size());

    ranked.clear();
    for (int k = 0; k < static_cast<int>(contrib.size()); ++k) {
      const double d = (contrib[k] - mean).norm();
      if (cfg.enable_outlier_reject && d > cfg.outlier_dist_m) continue;
      ranked.emplace_back(d, k);
    }
    if (ranked.empty()) continue;
    const std::size_t keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(cfg.merge_top_k));
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end());
    Vec3 sum = Vec3::Zero();
    for (std::size_t k = 0; k < keep; ++k) sum += contrib[ranked[k].second];
    person.joints[j] = sum / static_cast<double>(keep);
    person.joint_valid[j] = 1;
    person.joint_support[j] = static_cast<int>(keep);
  }
  return person;
}

// --- post-processing --------------------------------------------------------

// Largest side of the axis-aligned box around the valid joints.
inline double person_extent(const Person3D& p) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  bool any = false;
  for (int j = 0; j < p.joint_count(); ++j) {
    if (!p.joint_valid[j]) continue;
    lo = lo.cwiseMin(p.joints[j]);
    hi = hi.cwiseMax(p.joints[j]);
    any = true;
  }
  return any ? (hi - lo).maxCoeff() : 0.0;
}

inline Vec3 valid_centroid(const Person3D& p, bool include_filled = true) {
  Vec3 sum = Vec3::Zero();
  int n = 0;
  for (int j = 0; j < p.joint_count(); ++j) {
    if (!p.joint_valid[j] || (!include_filled && p.filled[j])) continue;
    sum += p.joints[j];
    ++n;
  }
  return n > 0 ? Vec3(sum / n) : Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
}

inline std::vector<Person3D> postprocess_persons(std::vector<Person3D> persons, const PipelineConfig& cfg,
                                                 const JointSet& set) {
  std::vector<Person3D> out;
  out.reserve(persons.size());
  for (auto& p : persons) {
    if (p.valid_count() < cfg.min_valid_joints) continue;
    const double extent = person_extent(p);
    if (extent < cfg.min_height_m || extent > cfg.max_height_m) continue;
    if (!in_room(valid_centroid(p), cfg.room, cfg.room_margin_m)) continue;
    const std::vector<std::uint8_t> measured = p.joint_valid;
    for (int j = 0; j < p.joint_count() && j < set.joint_count(); ++j) {
      if (measured[j]) continue;
      for (int k : set.neighbor_map[j]) {
        if (!measured[k]) continue;
        p.joints[j] = p.joints[k];
        p.joint_valid[j] = 1;
        p.filled[j] = 1;
        p.joint_support[j] = 0;
        break;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

// --- Full frame -------------------------------------------------------------

namespace detail {

class StepClock {
 public:
  explicit StepClock(StepTimings& t) : timings_(t), last_(std::chrono::steady_clock::now()) {}
  void lap(Step s) {
    const auto now = std::chrono::steady_clock::now();
    timings_[s] += std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

 private:
  StepTimings& timings_;
  std::chrono::steady_clock::time_point last_;
};

}  // namespace detail

inline FrameResult process_frame(const FrameDetections& detections, std::span<const CameraCalib> cams,
                                 std::span<const Person3D> prev_persons, const PipelineConfig& cfg) {
  FrameResult result;
  detail::StepClock clock(result.timings);

  const PreparedFrame frame = prepare_frame(detections, cams, cfg);
  clock.lap(Step::Undistortion);

  std::vector<ViewPair> pairs;
  try {
    pairs = create_pairs(detections);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TooFewViews) throw;
    result.status = ErrorCode::TooFewViews;
    return result;
  }
  result.stats.pairs_created = static_cast<int>(pairs.size());
  clock.lap(Step::PairCreation);
  if (!frame.joint_set || pairs.empty()) return result;
  const JointSet& set = *frame.joint_set;

  if (cfg.enable_pair_prefilter && !prev_persons.empty())
    pairs = filter_pairs_with_previous(pairs, frame, prev_persons, cfg);
  result.stats.pairs_after_filter = static_cast<int>(pairs.size());
  clock.lap(Step::PairFiltering);

  const auto is_core = core_mask(set);
  std::vector<Proposal3D> proposals;
  proposals.reserve(pairs.size());
  for (const auto& pair : pairs) {
    Proposal3D p = triangulate_pair(pair, frame, set.core_indices, cfg);
    apply_room_filter(p, is_core, cfg);
    if (p.dropped) continue;
    ++result.stats.pairs_triangulated;
    score_proposal(p, frame, cfg);
    if (passes_threshold(p, cfg)) proposals.push_back(std::move(p));
  }
  result.stats.proposals_kept = static_cast<int>(proposals.size());
  clock.lap(Step::TriangulateScore);

  auto groups = group_proposals(std::move(proposals), set, cfg);
  result.stats.groups = static_cast<int>(groups.size());
  clock.lap(Step::Grouping);

  groups = retriangulate_full(groups, frame, cfg);
  for (const auto& g : groups) result.stats.proposals_retriangulated += static_cast<int>(g.size());
  clock.lap(Step::TriangulateScore2);

  std::vector<Person3D> persons;
  persons.reserve(groups.size());
  for (const auto& g : groups) persons.push_back(merge_group(g, set.joint_count(), cfg));
  clock.lap(Step::Merge);

  persons = postprocess_persons(std::move(persons), cfg, set);
  std::sort(persons.begin(), persons.end(),
            [](const Person3D& a, const Person3D& b) { return a.source_key < b.source_key; });
  result.persons = std::move(persons);
  result.stats.persons = static_cast<int>(result.persons.size());
  clock.lap(Step::PostProcess);
  return result;
}

}  // namespace rpt

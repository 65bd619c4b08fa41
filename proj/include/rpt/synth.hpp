#pragma once

#include <rpt/geometry.hpp>
#include <rpt/pipeline.hpp>
#include <rpt/skeleton.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rpt::synth {

struct Motion {
  enum class Kind { Static, Linear, RandomWalk };
  Kind kind = Kind::Static;
  double value = 0.0;  // speed (m/s) for Linear, step length (m) for RandomWalk

  static Motion still() { return {}; }
  static Motion linear(double speed_mps) { return {Kind::Linear, speed_mps}; }
  static Motion random_walk(double step_m) { return {Kind::RandomWalk, step_m}; }
};

struct SceneSpec {
  int n_persons = 4;
  int n_cameras = 5;
  RoomBounds room{Vec3(-2.5, -2.5, 0.0), Vec3(2.5, 2.5, 3.0)};
  JointSetPtr joint_set = builtin_joint_set_ptr("body20");
  Motion motion;
  std::uint64_t seed = 1;
  int n_frames = 1;
  double fps = 30.0;
  double min_separation_m = 1.0;
  double spawn_margin_m = 0.5;
  bool same_pose = false;  // every person shares one sampled pose

  double camera_height_m = 2.2;
  double camera_height_spread_m = 0.1;  // per-camera height drawn from height ± spread
  double camera_radius_m = 0.0;  // 0: fitted to the room
  double focal_px = 1100.0;
  int image_width = 1920;
  int image_height = 1080;
  DistortionModel distortion;
};

struct Scene {
  std::vector<std::vector<Person3D>> gt_frames;  // [frame][person], person index = identity
  std::vector<CameraCalib> cams;
  JointSetPtr joint_set;
};

struct ConfidenceModel {
  double clean = 0.95;
  double noise_scale_px = 10.0;  // confidence decays as exp(-|noise| / scale)
  double swapped = 0.6;
  double false_positive_min = 0.35;
  double false_positive_max = 0.7;
};

struct CorruptionSpec {
  double pixel_noise_sigma_px = 0.0;
  double occlusion_rate = 0.0;
  bool truncation = false;
  double false_positive_rate = 0.0;
  double swap_rate = 0.0;
  ConfidenceModel confidence;
  std::uint64_t seed = 7;
};

struct SyntheticDetections {
  std::vector<FrameDetections> frames;
  // [frame][view][detection] -> ground-truth person index, -1 for false positives.
  std::vector<std::vector<std::vector<int>>> assignment;
};

// splitmix64 finalizer; combines seeds into independent streams.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1) + 0xBF58476D1CE4E5B9ull * (c + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace detail {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Uniform direction inside a cone of half-angle max_angle around axis.
inline Vec3 sample_cone(Rng& rng, const Vec3& axis, double max_angle) {
  const double cos_max = std::cos(max_angle);
  const double z = uniform(rng, cos_max, 1.0);
  const double phi = uniform(rng, 0.0, 2.0 * M_PI);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Vec3 a = axis.normalized();
  const Vec3 helper = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = a.cross(helper).normalized();
  const Vec3 v = a.cross(u);
  return (z * a + r * std::cos(phi) * u + r * std::sin(phi) * v).normalized();
}

inline double deg(double d) { return d * M_PI / 180.0; }

// A whole-body pose in the person's local frame (x forward, y left, z up),
// feet on the floor, hip_middle above the origin. Indexed like wholebody136.
inline std::vector<Vec3> sample_local_pose(Rng& rng) {
  static const JointSetPtr wb = builtin_joint_set_ptr("wholebody136");
  const JointSet& set = *wb;
  std::vector<Vec3> p(set.joint_count(), Vec3::Zero());
  auto at = [&](const char* name) -> Vec3& { return p[set.index_of(name)]; };

  const double s = uniform(rng, 0.9, 1.1);
  const Vec3 fwd = Vec3::UnitX(), left = Vec3::UnitY(), up = Vec3::UnitZ();
  const Vec3 torso = sample_cone(rng, up, deg(15));

  at("hip_middle") = Vec3::Zero();
  at("hip_left") = left * 0.11 * s;
  at("hip_right") = -left * 0.11 * s;
  at("shoulder_middle") = torso * 0.50 * s;
  at("shoulder_left") = at("shoulder_middle") + left * 0.18 * s;
  at("shoulder_right") = at("shoulder_middle") - left * 0.18 * s;
  at("head") = at("shoulder_middle") + torso * 0.22 * s;
  const Vec3 head = at("head");
  at("nose") = head + (fwd * 0.09 - up * 0.02) * s;
  at("eye_left") = head + (fwd * 0.07 + up * 0.02 + left * 0.03) * s;
  at("eye_right") = head + (fwd * 0.07 + up * 0.02 - left * 0.03) * s;
  at("ear_left") = head + left * 0.075 * s;
  at("ear_right") = head - left * 0.075 * s;

  for (int k = 0; k < 68; ++k) {
    const double az = deg(-70.0 + 140.0 * (k % 17) / 16.0);
    const double el = deg(-40.0 + 70.0 * (k / 17) / 3.0);
    const Vec3 dir = std::cos(el) * std::cos(az) * fwd + std::cos(el) * std::sin(az) * left + std::sin(el) * up;
    p[set.index_of("face_" + std::to_string(k))] = head + dir * 0.09 * s;
  }

  for (const char* side : {"left", "right"}) {
    const std::string sd(side);
    const double sign = sd == "left" ? 1.0 : -1.0;
    const Vec3 thigh = sample_cone(rng, -up, deg(35));
    const Vec3 shin = sample_cone(rng, -up, deg(30));
    const Vec3 knee = p[set.index_of("hip_" + sd)] + thigh * 0.43 * s;
    const Vec3 ankle = knee + shin * 0.42 * s;
    p[set.index_of("knee_" + sd)] = knee;
    p[set.index_of("ankle_" + sd)] = ankle;
    p[set.index_of("big_toe_" + sd)] = ankle + (fwd * 0.15 - up * 0.06 - sign * left * 0.02) * s;
    p[set.index_of("small_toe_" + sd)] = ankle + (fwd * 0.13 - up * 0.06 + sign * left * 0.05) * s;
    p[set.index_of("heel_" + sd)] = ankle + (-fwd * 0.05 - up * 0.06) * s;

    const Vec3 upper = sample_cone(rng, -up, deg(100));
    const Vec3 fore = sample_cone(rng, upper, deg(100));
    const Vec3 elbow = p[set.index_of("shoulder_" + sd)] + upper * 0.29 * s;
    const Vec3 wrist = elbow + fore * 0.26 * s;
    p[set.index_of("elbow_" + sd)] = elbow;
    p[set.index_of("wrist_" + sd)] = wrist;
    Vec3 side_axis = fore.cross(up);
    side_axis = side_axis.norm() < 1e-3 ? left : Vec3(side_axis.normalized());
    const std::string prefix = "hand_" + sd + "_";
    p[set.index_of(prefix + "0")] = wrist;
    for (int f = 0; f < 5; ++f) {
      const Vec3 base = wrist + (fore * 0.08 + side_axis * (f - 2) * 0.018) * s;
      for (int seg = 0; seg < 4; ++seg)
        p[set.index_of(prefix + std::to_string(1 + 4 * f + seg))] = base + fore * 0.03 * seg * s;
    }
  }

  double min_z = std::numeric_limits<double>::infinity();
  for (const auto& q : p) min_z = std::min(min_z, q.z());
  for (auto& q : p) q.z() += 0.02 - min_z;
  return p;
}

inline Person3D place_person(const std::vector<Vec3>& local, double yaw, const Vec3& pos, const JointSet& target) {
  static const JointSetPtr wb = builtin_joint_set_ptr("wholebody136");
  const auto mapping = joint_mapping(*wb, target);
  const Eigen::AngleAxisd rot(yaw, Vec3::UnitZ());
  Person3D person = Person3D::empty(target.joint_count());
  for (int j = 0; j < target.joint_count(); ++j) {
    if (mapping[j] < 0) continue;
    person.joints[j] = rot * local[mapping[j]] + pos;
    person.joint_valid[j] = 1;
    person.joint_support[j] = 1;
  }
  return person;
}

inline CameraCalib look_at_camera(const std::string& id, const Vec3& eye, const Vec3& target, double fx, double fy,
                                  double cx, double cy, int w, int h, const DistortionModel& dist) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
  const Vec3 down = forward.cross(right);
  CameraCalib cam;
  cam.id = id;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.rotation.row(0) = right;
  cam.rotation.row(1) = down;
  cam.rotation.row(2) = forward;
  // Re-orthonormalize so the calibration invariant holds to machine precision.
  Eigen::JacobiSVD<Mat3> svd(cam.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  cam.rotation = svd.matrixU() * svd.matrixV().transpose();
  cam.translation = -cam.rotation * eye;
  cam.distortion = dist;
  cam.image_width = w;
  cam.image_height = h;
  return cam;
}

}  // namespace detail

// Cameras on a ring around the room, looking at the room center at 1 m height.
inline std::vector<CameraCalib> make_ring_rig(const SceneSpec& spec, std::uint64_t seed) {
  detail::Rng rng(mix_seed(seed, 0xCA3E7A));
  const Vec3 center = 0.5 * (spec.room.min_corner + spec.room.max_corner);
  const Vec3 half = 0.5 * (spec.room.max_corner - spec.room.min_corner);
  const double radius = spec.camera_radius_m > 0.0 ? spec.camera_radius_m : std::hypot(half.x(), half.y()) + 0.5;
  const double phase = detail::uniform(rng, 0.0, 2.0 * M_PI);
  std::vector<CameraCalib> cams;
  for (int i = 0; i < spec.n_cameras; ++i) {
    const double phi = phase + 2.0 * M_PI * i / spec.n_cameras + detail::uniform(rng, -0.1, 0.1);
    const double height = spec.camera_height_m + detail::uniform(rng, -spec.camera_height_spread_m, spec.camera_height_spread_m);
    const Vec3 eye(center.x() + radius * std::cos(phi), center.y() + radius * std::sin(phi), height);
    const Vec3 target(center.x(), center.y(), 1.0);
    const double f = spec.focal_px * detail::uniform(rng, 0.97, 1.03);
    cams.push_back(detail::look_at_camera("cam" + std::to_string(i), eye, target, f, f * detail::uniform(rng, 0.995, 1.005),
                                          0.5 * spec.image_width + detail::uniform(rng, -5, 5),
                                          0.5 * spec.image_height + detail::uniform(rng, -5, 5), spec.image_width,
                                          spec.image_height, spec.distortion));
  }
  return cams;
}

inline Scene generate_scene(const SceneSpec& spec) {
  if (spec.n_persons < 0 || spec.n_cameras < 1 || spec.n_frames < 1 || !spec.joint_set || !(spec.fps > 0.0))
    throw Error(ErrorCode::InfeasibleSpec, "scene spec has non-positive counts or no joint set");
  validate(spec.room);
  detail::Rng rng(mix_seed(spec.seed));
  Scene scene;
  scene.joint_set = spec.joint_set;
  scene.cams = make_ring_rig(spec, spec.seed);

  const Vec3 lo = spec.room.min_corner + Vec3::Constant(spec.spawn_margin_m);
  const Vec3 hi = spec.room.max_corner - Vec3::Constant(spec.spawn_margin_m);
  if (!(lo.x() < hi.x() && lo.y() < hi.y())) throw Error(ErrorCode::InfeasibleSpec, "room too small for spawn margin");

  std::vector<Vec3> pos;
  for (int p = 0; p < spec.n_persons; ++p) {
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      const Vec3 c(detail::uniform(rng, lo.x(), hi.x()), detail::uniform(rng, lo.y(), hi.y()), 0.0);
      placed = std::all_of(pos.begin(), pos.end(),
                           [&](const Vec3& q) { return (q - c).norm() >= spec.min_separation_m; });
      if (placed) pos.push_back(c);
    }
    if (!placed)
      throw Error(ErrorCode::InfeasibleSpec, "cannot place " + std::to_string(spec.n_persons) + " persons with " +
                                                 std::to_string(spec.min_separation_m) + " m separation");
  }
  std::vector<std::vector<Vec3>> poses;
  std::vector<double> yaw;
  std::vector<Vec3> vel;
  for (int p = 0; p < spec.n_persons; ++p) {
    if (spec.same_pose && p > 0)
      poses.push_back(poses.front());
    else
      poses.push_back(detail::sample_local_pose(rng));
    yaw.push_back(detail::uniform(rng, 0.0, 2.0 * M_PI));
    const double heading = detail::uniform(rng, 0.0, 2.0 * M_PI);
    vel.emplace_back(std::cos(heading), std::sin(heading), 0.0);
  }

  const double dt = 1.0 / spec.fps;
  for (int f = 0; f < spec.n_frames; ++f) {
    if (f > 0) {
      for (int p = 0; p < spec.n_persons; ++p) {
        Vec3 step = Vec3::Zero();
        if (spec.motion.kind == Motion::Kind::Linear) {
          step = vel[p] * spec.motion.value * dt;
        } else if (spec.motion.kind == Motion::Kind::RandomWalk) {
          const double a = detail::uniform(rng, 0.0, 2.0 * M_PI);
          step = Vec3(std::cos(a), std::sin(a), 0.0) * spec.motion.value;
        }
        Vec3 next = pos[p] + step;
        for (int ax = 0; ax < 2; ++ax) {
          if (next[ax] < lo[ax] || next[ax] > hi[ax]) {
            vel[p][ax] = -vel[p][ax];
            next[ax] = pos[p][ax] - step[ax];
          }
        }
        // People do not walk through each other: a step that breaks the
        // separation is replaced by turning around.
        const bool crowded = std::any_of(pos.begin(), pos.end(), [&](const Vec3& q) {
          return &q != &pos[p] && (q - next).norm() < spec.min_separation_m;
        });
        if (crowded) {
          vel[p] = -vel[p];
          next = pos[p];
        }
        pos[p] = next;
      }
    }
    std::vector<Person3D> persons;
    persons.reserve(spec.n_persons);
    for (int p = 0; p < spec.n_persons; ++p)
      persons.push_back(detail::place_person(poses[p], yaw[p], pos[p], *spec.joint_set));
    scene.gt_frames.push_back(std::move(persons));
  }
  return scene;
}

inline bool in_image(const Vec2& px, const CameraCalib& cam) {
  return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < cam.image_width && px.y() < cam.image_height;
}

// Exact projection followed by truncation, occlusion, swaps, noise and false positives, in that order.
inline SyntheticDetections project_scene(const std::vector<std::vector<Person3D>>& gt_frames,
                                         const std::vector<CameraCalib>& cams, const JointSetPtr& joint_set,
                                         const CorruptionSpec& corr, const RoomBounds& room = {}) {
  SyntheticDetections out;
  const int nj = joint_set->joint_count();
  const auto& cm = corr.confidence;
  for (std::size_t f = 0; f < gt_frames.size(); ++f) {
    FrameDetections frame;
    std::vector<std::vector<int>> frame_assign;
    for (std::size_t v = 0; v < cams.size(); ++v) {
      detail::Rng rng(mix_seed(corr.seed, f, v));
      const CameraCalib& cam = cams[v];
      ViewDetections view;
      view.view = cam.id;
      std::vector<int> assign;
      for (std::size_t p = 0; p < gt_frames[f].size(); ++p) {
        const Person3D& person = gt_frames[f][p];
        Detection2D det;
        det.view = cam.id;
        det.joint_set = joint_set;
        det.joints.assign(nj, Vec2::Zero());
        det.confidence.assign(nj, 0.0);
        int visible = 0;
        for (int j = 0; j < nj; ++j) {
          if (!person.joint_valid[j]) continue;
          auto px = try_project(person.joints[j], cam);
          if (!px) continue;
          det.joints[j] = *px;
          const bool inside = in_image(*px, cam);
          if (corr.truncation && !inside) continue;
          visible += inside ? 1 : 0;
          det.confidence[j] = cm.clean;
        }
        if (visible == 0) continue;
        for (int j = 0; j < nj; ++j)
          if (det.confidence[j] > 0.0 && detail::uniform(rng, 0.0, 1.0) < corr.occlusion_rate) det.confidence[j] = 0.0;
        view.persons.push_back(std::move(det));
        assign.push_back(static_cast<int>(p));
      }

      if (corr.swap_rate > 0.0 && view.persons.size() > 1) {
        auto centroid = [&](const Detection2D& d) {
          Vec2 s = Vec2::Zero();
          int n = 0;
          for (int j = 0; j < nj; ++j)
            if (d.confidence[j] > 0.0) {
              s += d.joints[j];
              ++n;
            }
          return n > 0 ? Vec2(s / n) : s;
        };
        for (std::size_t d = 0; d < view.persons.size(); ++d) {
          if (detail::uniform(rng, 0.0, 1.0) >= corr.swap_rate) continue;
          std::size_t other = d;
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t e = 0; e < view.persons.size(); ++e) {
            if (e == d) continue;
            const double dist = (centroid(view.persons[d]) - centroid(view.persons[e])).norm();
            if (dist < best) {
              best = dist;
              other = e;
            }
          }
          const int j = std::uniform_int_distribution<int>(0, nj - 1)(rng);
          auto& a = view.persons[d];
          auto& b = view.persons[other];
          if (a.confidence[j] <= 0.0 || b.confidence[j] <= 0.0) continue;
          std::swap(a.joints[j], b.joints[j]);
          a.confidence[j] = b.confidence[j] = cm.swapped;
        }
      }

      if (corr.pixel_noise_sigma_px > 0.0) {
        std::normal_distribution<double> noise(0.0, corr.pixel_noise_sigma_px);
        for (auto& det : view.persons) {
          for (int j = 0; j < nj; ++j) {
            if (det.confidence[j] <= 0.0) continue;
            const Vec2 n(noise(rng), noise(rng));
            det.joints[j] += n;
            det.confidence[j] *= std::exp(-n.norm() / cm.noise_scale_px);
          }
        }
      }

      if (corr.false_positive_rate > 0.0 && detail::uniform(rng, 0.0, 1.0) < corr.false_positive_rate) {
        const auto local = detail::sample_local_pose(rng);
        const Vec3 lo = room.min_corner, hi = room.max_corner;
        const Vec3 at(detail::uniform(rng, lo.x(), hi.x()), detail::uniform(rng, lo.y(), hi.y()), 0.0);
        const Person3D ghost = detail::place_person(local, detail::uniform(rng, 0.0, 2.0 * M_PI), at, *joint_set);
        Detection2D det;
        det.view = cam.id;
        det.joint_set = joint_set;
        det.joints.assign(nj, Vec2::Zero());
        det.confidence.assign(nj, 0.0);
        for (int j = 0; j < nj; ++j) {
          if (!ghost.joint_valid[j]) continue;
          auto px = try_project(ghost.joints[j], cam);
          if (!px || !in_image(*px, cam)) continue;
          det.joints[j] = *px;
          det.confidence[j] = detail::uniform(rng, cm.false_positive_min, cm.false_positive_max);
        }
        if (std::any_of(det.confidence.begin(), det.confidence.end(), [](double c) { return c > 0.0; })) {
          view.persons.push_back(std::move(det));
          assign.push_back(-1);
        }
      }

      // Detector output order carries no identity.
      std::vector<std::size_t> order(view.persons.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      ViewDetections shuffled;
      shuffled.view = view.view;
      std::vector<int> shuffled_assign;
      for (std::size_t i = 0; i < order.size(); ++i) {
        shuffled.persons.push_back(std::move(view.persons[order[i]]));
        shuffled.persons.back().person_index = static_cast<int>(i);
        shuffled_assign.push_back(assign[order[i]]);
      }
      frame.push_back(std::move(shuffled));
      frame_assign.push_back(std::move(shuffled_assign));
    }
    out.frames.push_back(std::move(frame));
    out.assignment.push_back(std::move(frame_assign));
  }
  return out;
}

// Linear least-squares (DLT) triangulation of one point from normalized observations.
inline std::optional<Vec3> triangulate_dlt(std::span<const Vec2> normalized, std::span<const CameraCalib* const> cams) {
  const int n = static_cast<int>(normalized.size());
  if (n < 2) return std::nullopt;
  Eigen::MatrixXd a(2 * n, 4);
  for (int i = 0; i < n; ++i) {
    Eigen::Matrix<double, 3, 4> proj;
    proj.leftCols<3>() = cams[i]->rotation;
    proj.col(3) = cams[i]->translation;
    a.row(2 * i) = normalized[i].x() * proj.row(2) - proj.row(0);
    a.row(2 * i + 1) = normalized[i].y() * proj.row(2) - proj.row(1);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h(3)) < 1e-12) return std::nullopt;
  return Vec3(h.head<3>() / h(3));
}

// Reference reconstruction using the true detection-to-person assignment and
// all views per joint. Returns one entry per ground-truth person that has any
// triangulated joint, ordered by person index.
inline std::vector<Person3D> oracle_triangulate(const FrameDetections& detections, const std::vector<CameraCalib>& cams,
                                                const std::vector<std::vector<int>>& assignment, int n_persons,
                                                const JointSet& set, double conf_floor = 0.3) {
  const int nj = set.joint_count();
  std::vector<Person3D> out;
  for (int p = 0; p < n_persons; ++p) {
    Person3D person = Person3D::empty(nj);
    for (int j = 0; j < nj; ++j) {
      std::vector<Vec2> obs;
      std::vector<const CameraCalib*> obs_cams;
      for (std::size_t v = 0; v < detections.size(); ++v) {
        const CameraCalib& cam = find_camera(cams, detections[v].view);
        for (std::size_t d = 0; d < detections[v].persons.size(); ++d) {
          if (assignment[v][d] != p) continue;
          const auto& det = detections[v].persons[d];
          if (!(det.confidence[j] >= conf_floor)) continue;
          auto n = undistort_normalized(pixel_to_normalized(det.joints[j], cam), cam.distortion);
          if (!n) continue;
          obs.push_back(*n);
          obs_cams.push_back(&cam);
        }
      }
      auto x = triangulate_dlt(obs, obs_cams);
      if (!x) continue;
      person.joints[j] = *x;
      person.joint_valid[j] = 1;
      person.joint_support[j] = static_cast<int>(obs.size());
    }
    if (person.valid_count() > 0) out.push_back(std::move(person));
  }
  return out;
}

}  // namespace rpt::synth

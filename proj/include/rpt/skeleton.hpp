#pragma once

#include <rpt/common.hpp>

#include <algorithm>
#include <array>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace rpt {

struct Limb {
  int a = 0;  // proximal joint
  int b = 0;  // distal joint
  double min_len_m = 0.0;
  double max_len_m = 0.0;

  friend bool operator==(const Limb&, const Limb&) = default;
};

struct JointSet {
  std::string name;
  std::vector<std::string> joint_names;
  std::vector<int> core_indices;
  std::vector<Limb> limbs;
  // Fallback neighbors per joint, skeletal parent first, then children.
  std::vector<std::vector<int>> neighbor_map;

  int joint_count() const { return static_cast<int>(joint_names.size()); }

  int index_of(std::string_view joint) const {
    auto it = std::find(joint_names.begin(), joint_names.end(), joint);
    return it == joint_names.end() ? -1 : static_cast<int>(it - joint_names.begin());
  }

  friend bool operator==(const JointSet&, const JointSet&) = default;
};

using JointSetPtr = std::shared_ptr<const JointSet>;

// Order of the twelve association joints; core_indices follows this order.
inline constexpr std::array<std::string_view, 12> kCoreJointNames{
    "shoulder_left", "shoulder_right", "hip_left",   "hip_right",  "elbow_left", "elbow_right",
    "wrist_left",    "wrist_right",    "knee_left",  "knee_right", "ankle_left", "ankle_right"};

inline void validate(const JointSet& set) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::InvalidJointSet, "joint set '" + set.name + "': " + what);
  };
  const int n = set.joint_count();
  if (n == 0) fail("no joints");
  if (static_cast<int>(set.core_indices.size()) != 12) fail("core_indices must have 12 entries");
  for (std::size_t i = 0; i < kCoreJointNames.size(); ++i) {
    const int idx = set.core_indices[i];
    if (idx < 0 || idx >= n || set.joint_names[idx] != kCoreJointNames[i])
      fail("core joint '" + std::string(kCoreJointNames[i]) + "' missing or misplaced");
  }
  for (const Limb& l : set.limbs) {
    if (l.a < 0 || l.a >= n || l.b < 0 || l.b >= n || l.a == l.b) fail("limb references invalid joint");
    if (!(l.min_len_m < l.max_len_m) || l.min_len_m < 0.0) fail("limb bounds must satisfy 0 <= min < max");
  }
  if (static_cast<int>(set.neighbor_map.size()) != n) fail("neighbor_map must cover every joint");
  for (int j = 0; j < n; ++j) {
    if (set.neighbor_map[j].empty()) fail("joint '" + set.joint_names[j] + "' has no neighbor");
    for (int k : set.neighbor_map[j])
      if (k < 0 || k >= n || k == j) fail("neighbor of '" + set.joint_names[j] + "' is invalid");
  }
}

struct RoomBounds {
  Vec3 min_corner = Vec3(-3.0, -3.0, 0.0);
  Vec3 max_corner = Vec3(3.0, 3.0, 3.0);
};

inline void validate(const RoomBounds& room) {
  if (!((room.min_corner.array() < room.max_corner.array()).all()))
    throw Error(ErrorCode::InvalidConfig, "room min_corner must be below max_corner on every axis");
}

inline bool in_room(const Vec3& p, const RoomBounds& room, double margin_m) {
  return (p.array() >= room.min_corner.array() - margin_m).all() &&
         (p.array() <= room.max_corner.array() + margin_m).all();
}

inline bool limb_plausible(const Vec3& pa, const Vec3& pb, const Limb& limb) {
  const double len = (pa - pb).norm();
  return limb.min_len_m <= len && len <= limb.max_len_m;
}

namespace detail {

// Builds a joint set from names, a parent table (by name, "" for roots) and
// limbs given by name. neighbor_map = parent followed by children.
class JointSetBuilder {
 public:
  explicit JointSetBuilder(std::string name) { set_.name = std::move(name); }

  void add(const std::string& joint, const std::string& parent) {
    set_.joint_names.push_back(joint);
    parents_.push_back(parent);
  }

  void limb(const std::string& a, const std::string& b, double lo, double hi) {
    pending_limbs_.push_back({a, b, lo, hi});
  }

  void neighbors(const std::string& joint, std::vector<std::string> names) {
    explicit_neighbors_[joint] = std::move(names);
  }

  JointSet build() {
    const int n = set_.joint_count();
    auto idx = [&](const std::string& j) {
      const int i = set_.index_of(j);
      if (i < 0) throw Error(ErrorCode::InvalidJointSet, "unknown joint '" + j + "' in " + set_.name);
      return i;
    };
    for (auto name : kCoreJointNames) set_.core_indices.push_back(idx(std::string(name)));
    for (const auto& l : pending_limbs_) set_.limbs.push_back({idx(l.a), idx(l.b), l.lo, l.hi});
    set_.neighbor_map.assign(n, {});
    for (int j = 0; j < n; ++j) {
      auto it = explicit_neighbors_.find(set_.joint_names[j]);
      if (it != explicit_neighbors_.end()) {
        for (const auto& k : it->second) set_.neighbor_map[j].push_back(idx(k));
        continue;
      }
      if (!parents_[j].empty()) set_.neighbor_map[j].push_back(idx(parents_[j]));
      for (int c = 0; c < n; ++c)
        if (parents_[c] == set_.joint_names[j]) set_.neighbor_map[j].push_back(c);
    }
    validate(set_);
    return set_;
  }

 private:
  struct PendingLimb {
    std::string a, b;
    double lo, hi;
  };
  JointSet set_;
  std::vector<std::string> parents_;
  std::vector<PendingLimb> pending_limbs_;
  std::map<std::string, std::vector<std::string>> explicit_neighbors_;
};

inline void add_core_limbs(JointSetBuilder& b) {
  b.limb("shoulder_left", "shoulder_right", 0.15, 0.60);
  b.limb("hip_left", "hip_right", 0.08, 0.45);
  b.limb("shoulder_left", "hip_left", 0.25, 0.80);
  b.limb("shoulder_right", "hip_right", 0.25, 0.80);
  for (const char* side : {"left", "right"}) {
    const std::string s(side);
    b.limb("shoulder_" + s, "elbow_" + s, 0.15, 0.50);
    b.limb("elbow_" + s, "wrist_" + s, 0.15, 0.45);
    b.limb("hip_" + s, "knee_" + s, 0.20, 0.70);
    b.limb("knee_" + s, "ankle_" + s, 0.20, 0.65);
  }
}

inline void add_core_joints(JointSetBuilder& b) {
  for (auto name : kCoreJointNames) b.add(std::string(name), "");
  for (const char* side : {"left", "right"}) {
    const std::string s(side);
    const std::string o = s == "left" ? "right" : "left";
    b.neighbors("shoulder_" + s, {"elbow_" + s, "shoulder_" + o, "hip_" + s});
    b.neighbors("hip_" + s, {"knee_" + s, "hip_" + o, "shoulder_" + s});
    b.neighbors("elbow_" + s, {"shoulder_" + s, "wrist_" + s});
    b.neighbors("wrist_" + s, {"elbow_" + s});
    b.neighbors("knee_" + s, {"hip_" + s, "ankle_" + s});
    b.neighbors("ankle_" + s, {"knee_" + s});
  }
}

// 17 COCO body joints followed by hip_middle, shoulder_middle and head.
inline void add_body20(JointSetBuilder& b) {
  b.add("nose", "head");
  b.add("eye_left", "head");
  b.add("eye_right", "head");
  b.add("ear_left", "head");
  b.add("ear_right", "head");
  b.add("shoulder_left", "shoulder_middle");
  b.add("shoulder_right", "shoulder_middle");
  b.add("elbow_left", "shoulder_left");
  b.add("elbow_right", "shoulder_right");
  b.add("wrist_left", "elbow_left");
  b.add("wrist_right", "elbow_right");
  b.add("hip_left", "hip_middle");
  b.add("hip_right", "hip_middle");
  b.add("knee_left", "hip_left");
  b.add("knee_right", "hip_right");
  b.add("ankle_left", "knee_left");
  b.add("ankle_right", "knee_right");
  b.add("hip_middle", "");
  b.add("shoulder_middle", "hip_middle");
  b.add("head", "shoulder_middle");

  add_core_limbs(b);
  b.limb("hip_middle", "shoulder_middle", 0.25, 0.80);
  b.limb("shoulder_middle", "head", 0.10, 0.45);
  b.limb("shoulder_middle", "shoulder_left", 0.05, 0.35);
  b.limb("shoulder_middle", "shoulder_right", 0.05, 0.35);
  b.limb("hip_middle", "hip_left", 0.03, 0.25);
  b.limb("hip_middle", "hip_right", 0.03, 0.25);
  for (const char* j : {"nose", "eye_left", "eye_right", "ear_left", "ear_right"}) b.limb("head", j, 0.02, 0.25);
}

inline void add_wholebody_extras(JointSetBuilder& b) {
  for (const char* side : {"left", "right"}) {
    const std::string s(side);
    b.add("big_toe_" + s, "ankle_" + s);
    b.add("small_toe_" + s, "ankle_" + s);
    b.add("heel_" + s, "ankle_" + s);
    b.limb("ankle_" + s, "big_toe_" + s, 0.05, 0.30);
    b.limb("ankle_" + s, "small_toe_" + s, 0.05, 0.30);
    b.limb("ankle_" + s, "heel_" + s, 0.02, 0.20);
  }
  for (int k = 0; k < 68; ++k) {
    b.add("face_" + std::to_string(k), "head");
    b.limb("head", "face_" + std::to_string(k), 0.02, 0.25);
  }
  for (const char* side : {"left", "right"}) {
    const std::string prefix = std::string("hand_") + side + "_";
    b.add(prefix + "0", std::string("wrist_") + side);
    b.limb(std::string("wrist_") + side, prefix + "0", 0.0, 0.10);
    for (int finger = 0; finger < 5; ++finger) {
      for (int seg = 0; seg < 4; ++seg) {
        const int id = 1 + 4 * finger + seg;
        const std::string parent = prefix + std::to_string(seg == 0 ? 0 : id - 1);
        b.add(prefix + std::to_string(id), parent);
        if (seg == 0)
          b.limb(parent, prefix + std::to_string(id), 0.02, 0.15);
        else
          b.limb(parent, prefix + std::to_string(id), 0.005, 0.08);
      }
    }
  }
}

}  // namespace detail

// Recognized names: core12, body20, wholebody136, eval13.
inline JointSet builtin_joint_set(std::string_view name) {
  detail::JointSetBuilder b{std::string(name)};
  if (name == "core12") {
    detail::add_core_joints(b);
    detail::add_core_limbs(b);
  } else if (name == "eval13") {
    detail::add_core_joints(b);
    b.add("head", "");
    b.neighbors("head", {"shoulder_left", "shoulder_right"});
    detail::add_core_limbs(b);
  } else if (name == "body20") {
    detail::add_body20(b);
  } else if (name == "wholebody136") {
    detail::add_body20(b);
    detail::add_wholebody_extras(b);
  } else {
    throw Error(ErrorCode::UnknownJointSet, "unknown joint set '" + std::string(name) + "'");
  }
  return b.build();
}

// Shared immutable instance of a builtin set.
inline JointSetPtr builtin_joint_set_ptr(std::string_view name) {
  static const std::map<std::string, JointSetPtr, std::less<>> cache = [] {
    std::map<std::string, JointSetPtr, std::less<>> m;
    for (const char* n : {"core12", "body20", "wholebody136", "eval13"})
      m.emplace(n, std::make_shared<const JointSet>(builtin_joint_set(n)));
    return m;
  }();
  auto it = cache.find(name);
  if (it == cache.end()) throw Error(ErrorCode::UnknownJointSet, "unknown joint set '" + std::string(name) + "'");
  return it->second;
}

// For every joint of `to`, the index of the same-named joint in `from` (or -1).
inline std::vector<int> joint_mapping(const JointSet& from, const JointSet& to) {
  std::vector<int> map(to.joint_count(), -1);
  for (int j = 0; j < to.joint_count(); ++j) map[j] = from.index_of(to.joint_names[j]);
  return map;
}

}  // namespace rpt

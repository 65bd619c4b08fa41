#pragma once

#include <rpt/pipeline.hpp>

#include <algorithm>
#include <cmath>
#include <tuple>
#include <utility>
#include <vector>

namespace rpt {

struct TrackerConfig {
  double assign_dist_m = 0.5;
  double max_speed_mps = 10.0;
  int max_misses = 5;
  bool hold_lost = true;  // emit the last position of missed tracks
};

inline void validate(const TrackerConfig& cfg) {
  if (!(cfg.assign_dist_m > 0.0) || !(cfg.max_speed_mps > 0.0) || cfg.max_misses < 1)
    throw Error(ErrorCode::InvalidConfig, "tracker thresholds must be positive");
}

struct Track {
  int track_id = 0;
  Person3D last_person;
  long last_seen_frame = 0;
  int age = 0;
  int misses = 0;
};

// Clamps every joint displacement to max_speed_mps * dt, keeping its direction.
// Joints under the cap, and joints without a predecessor, are copied unchanged.
inline Person3D clip_speed(const Person3D& person, const Person3D& prev, const TrackerConfig& cfg, double frame_dt_s) {
  Person3D out = person;
  const double cap = cfg.max_speed_mps * frame_dt_s;
  const int n = std::min(person.joint_count(), prev.joint_count());
  for (int j = 0; j < n; ++j) {
    if (!person.joint_valid[j] || !prev.joint_valid[j]) continue;
    const Vec3 delta = person.joints[j] - prev.joints[j];
    const double len = delta.norm();
    if (len > cap) out.joints[j] = prev.joints[j] + delta * (cap / len);
  }
  return out;
}

// Greedy nearest-first matching of track centroids to person centroids.
// Returns (track index, person index) pairs in order of increasing distance.
inline std::vector<std::pair<int, int>> greedy_match(std::span<const Vec3> tracks, std::span<const Vec3> persons,
                                                     double max_dist) {
  std::vector<std::tuple<double, int, int>> cand;
  for (int t = 0; t < static_cast<int>(tracks.size()); ++t) {
    if (!tracks[t].allFinite()) continue;
    for (int p = 0; p < static_cast<int>(persons.size()); ++p) {
      if (!persons[p].allFinite()) continue;
      const double d = (tracks[t] - persons[p]).norm();
      if (d <= max_dist) cand.emplace_back(d, t, p);
    }
  }
  std::sort(cand.begin(), cand.end());
  std::vector<char> t_used(tracks.size(), 0), p_used(persons.size(), 0);
  std::vector<std::pair<int, int>> out;
  for (const auto& [d, t, p] : cand) {
    if (t_used[t] || p_used[p]) continue;
    t_used[t] = p_used[p] = 1;
    out.emplace_back(t, p);
  }
  return out;
}

// One tracker per stream; not safe for concurrent use.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {}) : cfg_(cfg) { validate(cfg_); }

  // Assigns track ids, clips speeds and returns the frame's output persons:
  // the (clipped) input persons in input order, followed by held persons.
  std::vector<Person3D> update(std::vector<Person3D> persons, double frame_dt_s) {
    if (!(frame_dt_s > 0.0)) throw Error(ErrorCode::InvalidConfig, "frame_dt_s must be positive");
    ++frame_;
    std::vector<Vec3> track_c, person_c;
    track_c.reserve(tracks_.size());
    for (const auto& t : tracks_) track_c.push_back(valid_centroid(t.last_person, false));
    person_c.reserve(persons.size());
    for (const auto& p : persons) person_c.push_back(valid_centroid(p, false));

    std::vector<int> person_track(persons.size(), -1);
    std::vector<int> track_person(tracks_.size(), -1);
    for (auto [t, p] : greedy_match(track_c, person_c, cfg_.assign_dist_m)) {
      person_track[p] = t;
      track_person[t] = p;
    }

    std::vector<Person3D> out;
    out.reserve(persons.size() + tracks_.size());
    std::vector<Track> next;
    next.reserve(tracks_.size() + persons.size());
    for (std::size_t p = 0; p < persons.size(); ++p) {
      Person3D person = std::move(persons[p]);
      if (person_track[p] >= 0) {
        Track& t = tracks_[person_track[p]];
        person = clip_speed(person, t.last_person, cfg_, frame_dt_s);
        person.track_id = t.track_id;
      } else {
        person.track_id = next_id_++;
      }
      person.held = false;
      out.push_back(person);
    }
    // Surviving tracks keep their order; new tracks follow.
    for (std::size_t t = 0; t < tracks_.size(); ++t) {
      Track& tr = tracks_[t];
      ++tr.age;
      if (track_person[t] >= 0) {
        tr.misses = 0;
        tr.last_seen_frame = frame_;
        tr.last_person = out[track_person[t]];
      } else if (++tr.misses >= cfg_.max_misses) {
        continue;
      } else if (cfg_.hold_lost) {
        Person3D held = tr.last_person;
        held.held = true;
        held.track_id = tr.track_id;
        out.push_back(std::move(held));
      }
      next.push_back(std::move(tr));
    }
    for (std::size_t p = 0; p < person_track.size(); ++p) {
      if (person_track[p] >= 0) continue;
      Track tr;
      tr.track_id = *out[p].track_id;
      tr.last_person = out[p];
      tr.last_seen_frame = frame_;
      next.push_back(std::move(tr));
    }
    tracks_ = std::move(next);
    return out;
  }

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  int next_id_ = 0;
  long frame_ = 0;
};

}  // namespace rpt

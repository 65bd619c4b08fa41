#pragma once

#include <rpt/harness.hpp>

#include <vector>

namespace fixtures {

using namespace rpt;

inline harness::Fixture clean_scene(std::uint64_t seed, int persons = 4, int cameras = 5,
                                    const char* joint_set = "body20", int frames = 1) {
  synth::SceneSpec spec;
  spec.seed = seed;
  spec.n_persons = persons;
  spec.n_cameras = cameras;
  spec.n_frames = frames;
  spec.joint_set = builtin_joint_set_ptr(joint_set);
  if (frames > 1) spec.motion = synth::Motion::linear(1.0);
  return harness::make_fixture(spec, {});
}

inline PipelineConfig scene_config(const harness::Fixture& fx) {
  PipelineConfig cfg;
  cfg.room = RoomBounds{Vec3(-2.5, -2.5, 0.0), Vec3(2.5, 2.5, 3.0)};
  (void)fx;
  return cfg;
}

// Two people seen by two cameras. View "a" sees both; view "b" sees both plus
// a small false positive. Gives 2 x 3 = 6 candidate pairs.
struct TwoViewScene {
  std::vector<CameraCalib> cams;
  FrameDetections frame;
  std::vector<Person3D> truth;
  std::vector<int> truth_of_b;  // view-b detection -> person, -1 for the false positive
  JointSetPtr joint_set;
};

inline Detection2D detect(const Person3D& p, const CameraCalib& cam, const JointSetPtr& set, int index) {
  Detection2D d;
  d.view = cam.id;
  d.person_index = index;
  d.joint_set = set;
  for (int j = 0; j < set->joint_count(); ++j) {
    d.joints.push_back(project(p.joints[j], cam));
    d.confidence.push_back(0.9);
  }
  return d;
}

inline TwoViewScene two_view_scene() {
  TwoViewScene s;
  s.joint_set = builtin_joint_set_ptr("body20");
  synth::detail::Rng rng(2024);
  const auto pose_a = synth::detail::sample_local_pose(rng);
  const auto pose_b = synth::detail::sample_local_pose(rng);
  const auto pose_fp = synth::detail::sample_local_pose(rng);
  s.truth.push_back(synth::detail::place_person(pose_a, 0.3, Vec3(-0.8, 0.2, 0.0), *s.joint_set));
  s.truth.push_back(synth::detail::place_person(pose_b, 2.4, Vec3(0.9, -0.3, 0.0), *s.joint_set));
  // The false positive: a small figure far back in view b only.
  Person3D fp = synth::detail::place_person(pose_fp, 1.0, Vec3(0.0, 0.0, 0.0), *s.joint_set);
  for (auto& j : fp.joints) j = Vec3(2.0, 2.4, 0.0) + 0.45 * j;

  s.cams.push_back(synth::detail::look_at_camera("a", Vec3(-3.2, -3.0, 2.3), Vec3(0, 0, 1), 1100, 1100, 960, 540,
                                                 1920, 1080, {}));
  s.cams.push_back(synth::detail::look_at_camera("b", Vec3(3.4, -2.6, 1.7), Vec3(0, 0, 1), 1100, 1100, 960, 540,
                                                 1920, 1080, {}));
  ViewDetections va{"a", {}}, vb{"b", {}};
  va.persons.push_back(detect(s.truth[1], s.cams[0], s.joint_set, 0));
  va.persons.push_back(detect(s.truth[0], s.cams[0], s.joint_set, 1));
  vb.persons.push_back(detect(s.truth[0], s.cams[1], s.joint_set, 0));
  vb.persons.push_back(detect(fp, s.cams[1], s.joint_set, 1));
  vb.persons.push_back(detect(s.truth[1], s.cams[1], s.joint_set, 2));
  s.truth_of_b = {0, -1, 1};
  s.frame = {va, vb};
  return s;
}

inline PipelineConfig two_view_config() {
  PipelineConfig cfg;
  cfg.min_group_size = 1;  // each person is seen by exactly one pair
  return cfg;
}

}  // namespace fixtures

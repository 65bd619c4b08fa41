#include "fixtures.hpp"
#include "oracles.hpp"

#include <rpt/pipeline.hpp>

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

using namespace rpt;

namespace {

double max_joint_error(const Person3D& a, const Person3D& b) {
  double worst = 0.0;
  for (int j = 0; j < a.joint_count(); ++j) {
    if (a.joint_valid[j] != b.joint_valid[j]) return std::numeric_limits<double>::infinity();
    if (a.joint_valid[j]) worst = std::max(worst, (a.joints[j] - b.joints[j]).norm());
  }
  return worst;
}

// Max over persons of the distance to the closest person of the other list.
double max_set_distance(const std::vector<Person3D>& a, const std::vector<Person3D>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) best = std::min(best, max_joint_error(p, q));
    worst = std::max(worst, best);
  }
  return worst;
}

double scene_mpjpe_mm(const std::vector<Person3D>& gt, const std::vector<Person3D>& pred) {
  double sum = 0.0;
  int n = 0;
  for (const auto& p : pred) {
    double best = std::numeric_limits<double>::infinity();
    const Person3D* match = nullptr;
    for (const auto& g : gt) {
      const double d = (valid_centroid(p) - valid_centroid(g)).norm();
      if (d < best) {
        best = d;
        match = &g;
      }
    }
    for (int j = 0; j < p.joint_count(); ++j) {
      if (!p.joint_valid[j] || p.filled[j]) continue;
      sum += 1000.0 * (p.joints[j] - match->joints[j]).norm();
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

}  // namespace

// --- pair creation -------------------------------------------------------------

TEST(CreatePairs, PaperCounts) {
  const std::vector<int> two_three{2, 3};
  EXPECT_EQ(create_pairs(two_three).size(), 6u);
  const std::vector<int> ones{1, 1, 1};
  EXPECT_EQ(create_pairs(ones).size(), 3u);
}

TEST(CreatePairs, MatchesNestedLoopEnumeration) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int views = 2 + static_cast<int>(rng() % 7);
    std::vector<int> counts(views);
    for (auto& c : counts) c = static_cast<int>(rng() % 6);
    std::set<std::array<int, 4>> want;
    for (int a = 0; a < views; ++a)
      for (int b = 0; b < views; ++b)
        for (int i = 0; i < counts[a]; ++i)
          for (int k = 0; k < counts[b]; ++k)
            if (a != b) want.insert(a < b ? std::array<int, 4>{a, i, b, k} : std::array<int, 4>{b, k, a, i});
    const auto pairs = create_pairs(counts);
    std::set<std::array<int, 4>> got;
    for (const auto& p : pairs) {
      EXPECT_LT(p.view_a, p.view_b);
      got.insert(p.key());
    }
    EXPECT_EQ(got.size(), pairs.size()) << "duplicates";
    EXPECT_EQ(got, want);
  }
}

TEST(CreatePairs, TooFewViews) {
  const std::vector<int> one{4};
  try {
    create_pairs(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewViews);
  }
}

// --- previous-frame prefilter ------------------------------------------------------

TEST(Prefilter, NoPreviousPassesThrough) {
  const auto s = fixtures::two_view_scene();
  const auto cfg = fixtures::two_view_config();
  const auto frame = prepare_frame(s.frame, s.cams, cfg);
  const auto pairs = create_pairs(s.frame);
  EXPECT_EQ(filter_pairs_with_previous(pairs, frame, {}, cfg).size(), 6u);
}

TEST(Prefilter, KeepRule) {
  EXPECT_TRUE(keep_pair(-1, -1));
  EXPECT_TRUE(keep_pair(2, 2));
  EXPECT_FALSE(keep_pair(2, -1));
  EXPECT_FALSE(keep_pair(-1, 0));
  EXPECT_FALSE(keep_pair(0, 1));
}

TEST(Prefilter, TwoViewSceneWithPrevious) {
  const auto s = fixtures::two_view_scene();
  const auto cfg = fixtures::two_view_config();
  const auto frame = prepare_frame(s.frame, s.cams, cfg);
  const auto pairs = create_pairs(s.frame);
  // Previous frame knows only person 0: pairs joining person 0 with anything else are dropped.
  const std::vector<Person3D> prev{s.truth[0]};
  const auto kept = filter_pairs_with_previous(pairs, frame, prev, cfg);
  // View a: det 1 is person 0. View b: det 0 is person 0.
  std::set<std::array<int, 4>> keys;
  for (const auto& p : kept) keys.insert(p.key());
  const std::set<std::array<int, 4>> want{{0, 1, 1, 0}, {0, 0, 1, 1}, {0, 0, 1, 2}};
  EXPECT_EQ(keys, want);
}

TEST(Prefilter, RuleReplayOnRandomScenes) {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    synth::SceneSpec spec;
    spec.seed = seed;
    spec.n_frames = 2;
    spec.motion = synth::Motion::linear(1.5);
    synth::CorruptionSpec corr;
    corr.pixel_noise_sigma_px = 1.0;
    corr.false_positive_rate = 0.3;
    const auto fx = harness::make_fixture(spec, corr);
    const auto cfg = harness::config_for(spec);
    // Previous persons: ground truth minus one person, so some detections match nothing.
    std::vector<Person3D> prev(fx.scene.gt_frames[0].begin(), fx.scene.gt_frames[0].end() - 1);
    const auto& dets = fx.detections.frames[1];
    const auto frame = prepare_frame(dets, fx.scene.cams, cfg);
    const auto pairs = create_pairs(dets);
    const auto kept = filter_pairs_with_previous(pairs, frame, prev, cfg);

    // Oracle: project previous core joints with the public projection and match by mean distance.
    const auto& core = fx.scene.joint_set->core_indices;
    auto match = [&](int v, int d) {
      const CameraCalib& cam = find_camera(fx.scene.cams, dets[v].view);
      const auto& det = dets[v].persons[d];
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int p = 0; p < static_cast<int>(prev.size()); ++p) {
        double sum = 0.0;
        int n = 0;
        for (int j : core) {
          if (det.confidence[j] < cfg.conf_floor || !prev[p].joint_valid[j] || prev[p].filled[j]) continue;
          const auto px = try_project(prev[p].joints[j], cam);
          if (!px) continue;
          sum += (*px - det.joints[j]).norm();
          ++n;
        }
        if (n == 0) continue;
        const double m = sum / n;
        if (m <= cfg.prev_match_px && m < best_d) {
          best_d = m;
          best = p;
        }
      }
      return best;
    };
    std::set<std::array<int, 4>> want, got;
    for (const auto& p : pairs) {
      const int ma = match(p.view_a, p.idx_a), mb = match(p.view_b, p.idx_b);
      const bool keep = (ma < 0 && mb < 0) || (ma >= 0 && ma == mb);
      if (keep) want.insert(p.key());
    }
    for (const auto& p : kept) got.insert(p.key());
    EXPECT_EQ(got, want) << "seed " << seed;
    EXPECT_LT(kept.size(), pairs.size());
  }
}

// --- triangulation and scoring --------------------------------------------------------

TEST(TriangulatePair, ExactRecoveryCore) {
  const auto fx = fixtures::clean_scene(3, 1, 2, "core12");
  PipelineConfig cfg = fixtures::scene_config(fx);
  const auto frame = prepare_frame(fx.detections.frames[0], fx.scene.cams, cfg);
  const auto prop = triangulate_pair({0, 0, 1, 0}, frame, fx.scene.joint_set->core_indices, cfg);
  ASSERT_EQ(prop.joints.size(), 12u);
  const auto& gt = fx.scene.gt_frames[0][0];
  for (const auto& e : prop.joints) EXPECT_LT((e.position - gt.joints[e.joint]).norm(), 1e-6);
}

TEST(TriangulatePair, LowConfidenceJointIsAbsent) {
  auto fx = fixtures::clean_scene(3, 1, 2, "body20");
  auto& det = fx.detections.frames[0][0].persons[0];
  const int wrist = fx.scene.joint_set->index_of("wrist_left");
  det.confidence[wrist] = 0.1;
  const auto cfg = fixtures::scene_config(fx);
  const auto frame = prepare_frame(fx.detections.frames[0], fx.scene.cams, cfg);
  const auto prop = triangulate_pair({0, 0, 1, 0}, frame, fx.scene.joint_set->core_indices, cfg);
  EXPECT_EQ(prop.find(wrist), nullptr);
  EXPECT_EQ(prop.joints.size(), 11u);
}

TEST(TriangulatePair, NoisyPixelsWithinLeastSquaresBound) {
  synth::SceneSpec spec;
  spec.n_persons = 1;
  spec.n_cameras = 2;
  synth::CorruptionSpec corr;
  corr.pixel_noise_sigma_px = 2.0;
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    spec.seed = seed;
    corr.seed = seed;
    const auto fx = harness::make_fixture(spec, corr);
    const auto cfg = harness::config_for(spec);
    const auto& dets = fx.detections.frames[0];
    if (dets[0].persons.empty() || dets[1].persons.empty()) continue;
    const auto frame = prepare_frame(dets, fx.scene.cams, cfg);
    const auto prop = triangulate_pair({0, 0, 1, 0}, frame, fx.scene.joint_set->core_indices, cfg);
    const auto& gt = fx.scene.gt_frames[0][0];
    for (const auto& e : prop.joints) {
      const auto ra = pixel_to_ray(dets[0].persons[0].joints[e.joint], fx.scene.cams[0]);
      const auto rb = pixel_to_ray(dets[1].persons[0].joints[e.joint], fx.scene.cams[1]);
      const Vec3 ls = oracle::least_squares_point({ra.origin, rb.origin}, {ra.direction, rb.direction});
      const double oracle_err = (ls - gt.joints[e.joint]).norm();
      EXPECT_LE((e.position - gt.joints[e.joint]).norm(), 1.5 * oracle_err + 1e-9);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(ScoreProposal, ExactProposalHasZeroError) {
  const auto fx = fixtures::clean_scene(4, 2, 3);
  const auto cfg = fixtures::scene_config(fx);
  const auto frame = prepare_frame(fx.detections.frames[0], fx.scene.cams, cfg);
  const auto& assign = fx.detections.assignment[0];
  for (const auto& pair : create_pairs(fx.detections.frames[0])) {
    if (assign[pair.view_a][pair.idx_a] != assign[pair.view_b][pair.idx_b]) continue;
    auto prop = triangulate_pair(pair, frame, fx.scene.joint_set->core_indices, cfg);
    score_proposal(prop, frame, cfg);
    EXPECT_LT(prop.reproj_err_px, 1e-6);
  }
}

TEST(ScoreProposal, MismatchedPairsFailThreshold) {
  const auto s = fixtures::two_view_scene();
  const auto cfg = fixtures::two_view_config();
  const auto frame = prepare_frame(s.frame, s.cams, cfg);
  const auto is_core = core_mask(*s.joint_set);
  for (const auto& pair : create_pairs(s.frame)) {
    const int pa = 1 - pair.idx_a;  // view a holds person 1 then person 0
    const int pb = s.truth_of_b[pair.idx_b];
    if (pa == pb) continue;
    auto prop = triangulate_pair(pair, frame, s.joint_set->core_indices, cfg);
    apply_room_filter(prop, is_core, cfg);
    if (prop.dropped) continue;
    score_proposal(prop, frame, cfg);
    EXPECT_FALSE(passes_threshold(prop, cfg)) << pair.idx_a << "-" << pair.idx_b;
    if (pb < 0) EXPECT_GT(prop.reproj_err_px, 5.0 * cfg.max_reproj_err_px);
  }
}

TEST(ScoreProposal, ScoreModesIsolateTheirTerm) {
  synth::SceneSpec spec;
  spec.seed = 8;
  spec.n_persons = 3;
  spec.n_cameras = 5;
  synth::CorruptionSpec corr;
  corr.pixel_noise_sigma_px = 2.0;
  const auto fx = harness::make_fixture(spec, corr);
  const auto& dets = fx.detections.frames[0];
  PipelineConfig cfg = harness::config_for(spec);
  const auto frame = prepare_frame(dets, fx.scene.cams, cfg);
  const auto pairs = create_pairs(dets);
  int checked = 0;
  for (std::size_t i = 0; i < pairs.size() && checked < 100; ++i) {
    const auto base = triangulate_pair(pairs[i], frame, fx.scene.joint_set->core_indices, cfg);
    if (base.dropped) continue;

    cfg.score_mode = ScoreMode::TriangulationOnly;
    auto tri = base;
    score_proposal(tri, frame, cfg);
    cfg.score_mode = ScoreMode::ReprojectionOnly;
    auto rep = base;
    score_proposal(rep, frame, cfg);
    cfg.score_mode = ScoreMode::Combined;
    if (tri.dropped) continue;

    // Oracle: recompute both terms from the surviving joints with the public projection.
    const CameraCalib& ca = find_camera(fx.scene.cams, dets[pairs[i].view_a].view);
    const CameraCalib& cb = find_camera(fx.scene.cams, dets[pairs[i].view_b].view);
    const auto& da = dets[pairs[i].view_a].persons[pairs[i].idx_a];
    const auto& db = dets[pairs[i].view_b].persons[pairs[i].idx_b];
    double gap = 0.0, werr = 0.0, wsum = 0.0;
    for (const auto& e : tri.joints) {
      gap += e.gap;
      const double err = 0.5 * ((project(e.position, ca) - da.joints[e.joint]).norm() +
                                (project(e.position, cb) - db.joints[e.joint]).norm());
      const double w = da.confidence[e.joint] * db.confidence[e.joint];
      werr += w * err;
      wsum += w;
    }
    gap /= static_cast<double>(tri.joints.size());
    EXPECT_NEAR(tri.score, cfg.gap_to_px * gap, 1e-9);
    EXPECT_NEAR(rep.score, werr / wsum, 1e-9);
    EXPECT_NEAR(rep.reproj_err_px, werr / wsum, 1e-9);
    ++checked;
  }
  EXPECT_GE(checked, 50);
}

TEST(ScoreProposal, ImplausibleLimbIsPruned) {
  const auto fx = fixtures::clean_scene(5, 1, 2);
  auto cfg = fixtures::scene_config(fx);
  const auto frame = prepare_frame(fx.detections.frames[0], fx.scene.cams, cfg);
  auto prop = triangulate_pair({0, 0, 1, 0}, frame, fx.scene.joint_set->core_indices, cfg);
  const int wrist = fx.scene.joint_set->index_of("wrist_right");
  for (auto& e : prop.joints)
    if (e.joint == wrist) e.position += Vec3(0.0, 0.0, 1.0);
  score_proposal(prop, frame, cfg);
  EXPECT_EQ(prop.find(wrist), nullptr);
  EXPECT_NE(prop.find(fx.scene.joint_set->index_of("elbow_right")), nullptr);
}

TEST(DropBadPairs, ThresholdSweepIsMonotone) {
  synth::SceneSpec spec;
  spec.seed = 12;
  synth::CorruptionSpec corr;
  corr.pixel_noise_sigma_px = 3.0;
  corr.false_positive_rate = 0.3;
  const auto fx = harness::make_fixture(spec, corr);
  PipelineConfig cfg = harness::config_for(spec);
  const auto& dets = fx.detections.frames[0];
  const auto frame = prepare_frame(dets, fx.scene.cams, cfg);
  const auto is_core = core_mask(*fx.scene.joint_set);
  std::vector<Proposal3D> scored;
  for (const auto& pair : create_pairs(dets)) {
    auto p = triangulate_pair(pair, frame, fx.scene.joint_set->core_indices, cfg);
    apply_room_filter(p, is_core, cfg);
    if (p.dropped) continue;
    score_proposal(p, frame, cfg);
    scored.push_back(p);
  }
  std::set<std::array<int, 4>> previous;
  std::size_t prev_count = 0;
  for (double t = 0.5; t <= 200.0; t *= 1.3) {
    cfg.max_reproj_err_px = t;
    const auto kept = drop_bad_pairs(scored, cfg);
    std::set<std::array<int, 4>> keys;
    for (const auto& p : kept) keys.insert(p.pair.key());
    EXPECT_GE(kept.size(), prev_count);
    EXPECT_TRUE(std::includes(keys.begin(), keys.end(), previous.begin(), previous.end()));
    // Survivors keep their relative input order.
    std::size_t cursor = 0;
    for (const auto& p : kept) {
      while (cursor < scored.size() && scored[cursor].pair.key() != p.pair.key()) ++cursor;
      EXPECT_LT(cursor, scored.size());
    }
    previous = keys;
    prev_count = kept.size();
  }
  EXPECT_GT(prev_count, 40u);
}

// --- grouping ------------------------------------------------------------------------

TEST(Grouping, MatchesBruteForceComponents) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 60);
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), 0.5 * u(rng));
    const double eps = 0.1 + 0.4 * std::abs(u(rng)) / 2.0;
    const auto groups = group_indices(pts, eps);
    const auto label = oracle::component_labels(pts, eps);
    std::vector<int> mine(n, -1);
    int total = 0;
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (int i : groups[g]) {
        EXPECT_EQ(mine[i], -1) << "index in two groups";
        mine[i] = static_cast<int>(g);
        ++total;
      }
    EXPECT_EQ(total, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) EXPECT_EQ(mine[i] == mine[j], label[i] == label[j]);
  }
}

TEST(Grouping, TwoSeparatedPersonsFiveCameras) {
  synth::SceneSpec spec;
  spec.n_persons = 2;
  spec.min_separation_m = 2.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    spec.seed = seed;
    const auto fx = harness::make_fixture(spec, {});
    const auto cfg = harness::config_for(spec);
    const auto& dets = fx.detections.frames[0];
    const auto frame = prepare_frame(dets, fx.scene.cams, cfg);
    const auto is_core = core_mask(*fx.scene.joint_set);
    std::vector<Proposal3D> kept;
    for (const auto& pair : create_pairs(dets)) {
      auto p = triangulate_pair(pair, frame, fx.scene.joint_set->core_indices, cfg);
      apply_room_filter(p, is_core, cfg);
      if (p.dropped) continue;
      score_proposal(p, frame, cfg);
      if (passes_threshold(p, cfg)) kept.push_back(p);
    }
    const auto groups = group_proposals(kept, *fx.scene.joint_set, cfg);
    ASSERT_EQ(groups.size(), 2u) << "seed " << seed;
    EXPECT_EQ(groups[0].size(), 10u);
    EXPECT_EQ(groups[1].size(), 10u);
  }
}

TEST(Grouping, SinglePairKeptWithMinimumOne) {
  const auto fx = fixtures::clean_scene(6, 1, 2);
  auto cfg = fixtures::scene_config(fx);
  cfg.min_group_size = 1;
  const auto r = process_frame(fx.detections.frames[0], fx.scene.cams, {}, cfg);
  EXPECT_EQ(r.stats.groups, 1);
  ASSERT_EQ(r.persons.size(), 1u);
  EXPECT_EQ(r.persons[0].group_size, 1);
  cfg.min_group_size = 2;
  EXPECT_TRUE(process_frame(fx.detections.frames[0], fx.scene.cams, {}, cfg).persons.empty());
}

// --- full retriangulation ------------------------------------------------------------------

TEST(Retriangulate, FullJointsRecovered) {
  const auto fx = fixtures::clean_scene(7, 1, 2);
  auto cfg = fixtures::scene_config(fx);
  cfg.min_group_size = 1;
  const auto frame = prepare_frame(fx.detections.frames[0], fx.scene.cams, cfg);
  auto core = triangulate_pair({0, 0, 1, 0}, frame, fx.scene.joint_set->core_indices, cfg);
  score_proposal(core, frame, cfg);
  const auto full = retriangulate_full({{core}}, frame, cfg);
  ASSERT_EQ(full.size(), 1u);
  ASSERT_EQ(full[0][0].joints.size(), 20u);
  for (const auto& e : full[0][0].joints)
    EXPECT_LT((e.position - fx.scene.gt_frames[0][0].joints[e.joint]).norm(), 1e-6);
}

TEST(Retriangulate, FailingPairLeavesGroup) {
  const auto fx = fixtures::clean_scene(7, 1, 3);
  auto cfg = fixtures::scene_config(fx);
  cfg.min_group_size = 2;
  auto dets = fx.detections.frames[0];
  // Corrupt the non-core joints of the person in view 2 only: pairs with view 2
  // pass on core joints but fail once all joints are used.
  const auto& set = *fx.scene.joint_set;
  const auto is_core = core_mask(set);
  for (int j = 0; j < set.joint_count(); ++j)
    if (!is_core[j]) dets[2].persons[0].joints[j] += Vec2(120.0, -90.0);
  const auto frame = prepare_frame(dets, fx.scene.cams, cfg);
  std::vector<Proposal3D> group;
  for (const auto& pair : create_pairs(dets)) {
    auto p = triangulate_pair(pair, frame, set.core_indices, cfg);
    score_proposal(p, frame, cfg);
    ASSERT_TRUE(passes_threshold(p, cfg));
    group.push_back(p);
  }
  ASSERT_EQ(group.size(), 3u);
  const auto full = retriangulate_full({group}, frame, cfg);
  ASSERT_EQ(full.size(), 0u) << "only one pair survives, below the minimum of 2";
  cfg.min_group_size = 1;
  const auto full1 = retriangulate_full({group}, frame, cfg);
  ASSERT_EQ(full1.size(), 1u);
  ASSERT_EQ(full1[0].size(), 1u);
  EXPECT_EQ(full1[0][0].pair.view_a, 0);
  EXPECT_EQ(full1[0][0].pair.view_b, 1);
}

// --- merging ------------------------------------------------------------------------------

namespace {
Proposal3D proposal_with(std::initializer_list<std::pair<int, Vec3>> joints, std::array<int, 4> key = {0, 0, 1, 0}) {
  Proposal3D p;
  p.pair = {key[0], key[1], key[2], key[3]};
  for (const auto& [j, x] : joints) p.joints.push_back({j, x, 0.0});
  return p;
}
}  // namespace

TEST(Merge, IdenticalContributions) {
  std::vector<Proposal3D> g;
  for (int i = 0; i < 5; ++i) g.push_back(proposal_with({{0, Vec3(0.1, 0.2, 0.3)}}, {0, i, 1, 0}));
  PipelineConfig cfg;
  cfg.merge_top_k = 5;
  const auto p = merge_group(g, 1, cfg);
  EXPECT_EQ(p.joints[0], Vec3(0.1, 0.2, 0.3));
  EXPECT_EQ(p.joint_support[0], 5);
}

TEST(Merge, OutlierRejected) {
  std::vector<Proposal3D> g;
  const std::vector<Vec3> near{Vec3(0.01, 0, 0), Vec3(-0.01, 0, 0), Vec3(0, 0.01, 0), Vec3(0, -0.01, 0)};
  for (int i = 0; i < 4; ++i) g.push_back(proposal_with({{0, near[i]}}, {0, i, 1, 0}));
  g.push_back(proposal_with({{0, Vec3(0.5, 0, 0)}}, {0, 4, 1, 0}));
  PipelineConfig cfg;
  cfg.outlier_dist_m = 0.15;
  const auto p = merge_group(g, 1, cfg);
  EXPECT_LT(p.joints[0].norm(), 0.01);
  EXPECT_EQ(p.joint_support[0], 4);
}

TEST(Merge, MatchesDirectRuleOnRandomSets) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 0.08);
  for (int trial = 0; trial < 500; ++trial) {
    const int size = 1 + static_cast<int>(rng() % 12);
    const int joints = 1 + static_cast<int>(rng() % 5);
    PipelineConfig cfg;
    cfg.merge_top_k = 1 + static_cast<int>(rng() % 6);
    cfg.enable_outlier_reject = rng() % 4 != 0;
    cfg.outlier_dist_m = 0.05 + 0.2 * std::abs(n(rng));
    std::vector<Proposal3D> g(size);
    std::vector<std::vector<Vec3>> contrib(joints);
    for (int i = 0; i < size; ++i) {
      g[i].pair = {0, i, 1, 0};
      for (int j = 0; j < joints; ++j) {
        if (rng() % 5 == 0) continue;
        Vec3 x(n(rng), n(rng), n(rng));
        if (rng() % 6 == 0) x *= 6.0;
        g[i].joints.push_back({j, x, 0.0});
        contrib[j].push_back(x);
      }
    }
    const auto person = merge_group(g, joints, cfg);
    for (int j = 0; j < joints; ++j) {
      int support = 0;
      const auto want = oracle::merge_joint(contrib[j], cfg.enable_outlier_reject, cfg.outlier_dist_m, cfg.merge_top_k,
                                            &support);
      ASSERT_EQ(static_cast<bool>(person.joint_valid[j]), want.has_value());
      if (!want) continue;
      EXPECT_LT((person.joints[j] - *want).norm(), 1e-12);
      EXPECT_EQ(person.joint_support[j], support);
    }
  }
}

// --- post-processing ---------------------------------------------------------------------

TEST(PostProcess, FillsAndDrops) {
  const auto set = builtin_joint_set("body20");
  const auto fx = fixtures::clean_scene(2, 1, 2);
  PipelineConfig cfg = fixtures::scene_config(fx);
  Person3D full = fx.scene.gt_frames[0][0];
  full.filled.assign(20, 0);
  auto out = postprocess_persons({full}, cfg, set);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(max_joint_error(out[0], full), 0.0);
  EXPECT_EQ(std::count(out[0].filled.begin(), out[0].filled.end(), 1), 0);

  Person3D missing = full;
  const int wrist = set.index_of("wrist_left"), elbow = set.index_of("elbow_left");
  missing.joint_valid[wrist] = 0;
  out = postprocess_persons({missing}, cfg, set);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].joint_valid[wrist]);
  EXPECT_TRUE(out[0].filled[wrist]);
  EXPECT_EQ(out[0].joints[wrist], full.joints[elbow]);

  Person3D sparse = full;
  for (int j = 3; j < 20; ++j) sparse.joint_valid[j] = 0;
  EXPECT_TRUE(postprocess_persons({sparse}, cfg, set).empty());

  Person3D giant = full;
  for (auto& j : giant.joints) j *= 3.0;
  EXPECT_TRUE(postprocess_persons({giant}, cfg, set).empty());

  Person3D outside = full;
  for (auto& j : outside.joints) j += Vec3(10, 0, 0);
  EXPECT_TRUE(postprocess_persons({outside}, cfg, set).empty());
}

// --- full frame ----------------------------------------------------------------------------

TEST(ProcessFrame, CleanSceneRecoversEveryone) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto fx = fixtures::clean_scene(seed);
    const auto cfg = fixtures::scene_config(fx);
    const auto r = process_frame(fx.detections.frames[0], fx.scene.cams, {}, cfg);
    ASSERT_EQ(r.persons.size(), 4u) << "seed " << seed;
    EXPECT_LT(scene_mpjpe_mm(fx.scene.gt_frames[0], r.persons), 1e-3);
    for (const auto& p : r.persons) {
      EXPECT_GE(p.group_size, cfg.min_group_size);
      EXPECT_GE(p.valid_count(), cfg.min_valid_joints);
    }
  }
}

TEST(ProcessFrame, TwoViewScene) {
  const auto s = fixtures::two_view_scene();
  const auto r = process_frame(s.frame, s.cams, {}, fixtures::two_view_config());
  EXPECT_EQ(r.stats.pairs_created, 6);
  EXPECT_EQ(r.stats.proposals_kept, 2);
  ASSERT_EQ(r.persons.size(), 2u);
  EXPECT_LT(max_set_distance(r.persons, s.truth), 1e-6);
}

TEST(ProcessFrame, DeterministicBitwise) {
  synth::SceneSpec spec;
  spec.seed = 4;
  synth::CorruptionSpec corr;
  corr.pixel_noise_sigma_px = 2.0;
  corr.false_positive_rate = 0.2;
  corr.occlusion_rate = 0.05;
  const auto fx = harness::make_fixture(spec, corr);
  const auto cfg = harness::config_for(spec);
  const auto a = process_frame(fx.detections.frames[0], fx.scene.cams, {}, cfg);
  const auto b = process_frame(fx.detections.frames[0], fx.scene.cams, {}, cfg);
  ASSERT_EQ(a.persons.size(), b.persons.size());
  for (std::size_t i = 0; i < a.persons.size(); ++i) {
    EXPECT_EQ(a.persons[i].joints, b.persons[i].joints);
    EXPECT_EQ(a.persons[i].joint_valid, b.persons[i].joint_valid);
    EXPECT_EQ(a.persons[i].joint_support, b.persons[i].joint_support);
  }
}

TEST(ProcessFrame, ViewPermutationInvariance) {
  for (double sigma : {0.0, 1.5}) {
    synth::SceneSpec spec;
    spec.seed = 21;
    synth::CorruptionSpec corr;
    corr.pixel_noise_sigma_px = sigma;
    const auto fx = harness::make_fixture(spec, corr);
    const auto cfg = harness::config_for(spec);
    const auto base = process_frame(fx.detections.frames[0], fx.scene.cams, {}, cfg);
    auto views = fx.detections.frames[0];
    auto cams = fx.scene.cams;
    std::mt19937_64 rng(1);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(views.begin(), views.end(), rng);
      std::shuffle(cams.begin(), cams.end(), rng);
      const auto perm = process_frame(views, cams, {}, cfg);
      EXPECT_LE(max_set_distance(base.persons, perm.persons), 1e-9) << "sigma " << sigma;
    }
  }
}

TEST(ProcessFrame, PrefilterToggleKeepsResult) {
  synth::SceneSpec spec;
  spec.n_frames = 2;
  spec.motion = synth::Motion::linear(1.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    spec.seed = seed;
    const auto fx = harness::make_fixture(spec, {});
    auto cfg = harness::config_for(spec);
    const auto prev = process_frame(fx.detections.frames[0], fx.scene.cams, {}, cfg).persons;
    const auto on = process_frame(fx.detections.frames[1], fx.scene.cams, prev, cfg);
    cfg.enable_pair_prefilter = false;
    const auto off = process_frame(fx.detections.frames[1], fx.scene.cams, prev, cfg);
    EXPECT_EQ(on.persons.size(), off.persons.size());
    EXPECT_LE(max_set_distance(on.persons, off.persons), 1e-9);
    EXPECT_LT(on.stats.pairs_after_filter, off.stats.pairs_after_filter);
  }
}

TEST(ProcessFrame, EmptyAndDegenerateInputs) {
  const auto fx = fixtures::clean_scene(1);
  const auto cfg = fixtures::scene_config(fx);
  FrameDetections empty_views;
  for (const auto& c : fx.scene.cams) empty_views.push_back({c.id, {}});
  const auto r = process_frame(empty_views, fx.scene.cams, {}, cfg);
  EXPECT_TRUE(r.persons.empty());
  EXPECT_FALSE(r.status);
  EXPECT_LT(r.timings.total(), 1e-2);

  const FrameDetections one_view{fx.detections.frames[0][0]};
  const auto single = process_frame(one_view, fx.scene.cams, {}, cfg);
  EXPECT_TRUE(single.persons.empty());
  ASSERT_TRUE(single.status);
  EXPECT_EQ(*single.status, ErrorCode::TooFewViews);

  auto unknown = fx.detections.frames[0];
  unknown[0].view = "nowhere";
  try {
    process_frame(unknown, fx.scene.cams, {}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CalibrationMissing);
  }
}

TEST(ProcessFrame, TimingsCoverEveryStep) {
  const auto fx = fixtures::clean_scene(2);
  const auto r = process_frame(fx.detections.frames[0], fx.scene.cams, {}, fixtures::scene_config(fx));
  for (int s = 0; s < static_cast<int>(Step::Tracking); ++s) EXPECT_GT(r.timings.seconds[s], 0.0) << kStepNames[s];
  EXPECT_EQ(r.timings[Step::Tracking], 0.0);
}

TEST(ProcessFrame, UnfilledJointsAreSupported) {
  synth::SceneSpec spec;
  spec.seed = 13;
  synth::CorruptionSpec corr;
  corr.pixel_noise_sigma_px = 1.0;
  corr.occlusion_rate = 0.2;
  const auto fx = harness::make_fixture(spec, corr);
  const auto r = process_frame(fx.detections.frames[0], fx.scene.cams, {}, harness::config_for(spec));
  ASSERT_FALSE(r.persons.empty());
  for (const auto& p : r.persons)
    for (int j = 0; j < p.joint_count(); ++j) {
      if (!p.joint_valid[j]) continue;
      if (p.filled[j])
        EXPECT_EQ(p.joint_support[j], 0);
      else
        EXPECT_GE(p.joint_support[j], 1);
    }
}

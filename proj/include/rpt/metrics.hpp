#pragma once

#include <rpt/pipeline.hpp>
#include <rpt/skeleton.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace rpt {

// A person expressed in the evaluation joint set; positions in meters.
struct EvalPerson {
  std::vector<std::optional<Vec3>> joints;
};

using EvalFrame = std::vector<EvalPerson>;

inline EvalPerson to_eval_person(const Person3D& p, std::span<const int> mapping) {
  EvalPerson e;
  e.joints.resize(mapping.size());
  for (std::size_t j = 0; j < mapping.size(); ++j) {
    const int src = mapping[j];
    if (src >= 0 && src < p.joint_count() && p.joint_valid[src]) e.joints[j] = p.joints[src];
  }
  return e;
}

inline EvalFrame to_eval_frame(std::span<const Person3D> persons, const JointSet& from, const JointSet& eval_set) {
  const auto mapping = joint_mapping(from, eval_set);
  EvalFrame f;
  f.reserve(persons.size());
  for (const auto& p : persons) f.push_back(to_eval_person(p, mapping));
  return f;
}

inline constexpr double kNoOverlapCost = 1e9;

// Mean joint error in millimeters over joints valid in both; kNoOverlapCost if none are.
inline double person_mpjpe_mm(const EvalPerson& gt, const EvalPerson& pred) {
  double sum = 0.0;
  int n = 0;
  const std::size_t count = std::min(gt.joints.size(), pred.joints.size());
  for (std::size_t j = 0; j < count; ++j) {
    if (!gt.joints[j] || !pred.joints[j]) continue;
    sum += 1000.0 * (*gt.joints[j] - *pred.joints[j]).norm();
    ++n;
  }
  return n > 0 ? sum / n : kNoOverlapCost;
}

// Minimum-cost assignment for a rows x cols matrix (potentials method).
// Returns, for every row, its column or -1. Works for either orientation.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int rows = static_cast<int>(cost.size());
  if (rows == 0) return {};
  const int cols = static_cast<int>(cost[0].size());
  if (cols == 0) return std::vector<int>(rows, -1);
  const bool transposed = rows > cols;
  const int n = transposed ? cols : rows;
  const int m = transposed ? rows : cols;
  auto c = [&](int i, int j) { return transposed ? cost[j][i] : cost[i][j]; };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(rows, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    if (transposed)
      assign[j - 1] = p[j] - 1;
    else
      assign[p[j] - 1] = j - 1;
  }
  return assign;
}

struct PersonMatch {
  int gt = 0;
  int pred = 0;
  double mpjpe_mm = 0.0;
};

// Optimal one-to-one assignment on total MPJPE; pairs above the threshold are discarded.
inline std::vector<PersonMatch> match_predictions(std::span<const EvalPerson> gt, std::span<const EvalPerson> pred,
                                                  double match_threshold_mm = 500.0) {
  std::vector<PersonMatch> out;
  if (gt.empty() || pred.empty()) return out;
  std::vector<std::vector<double>> cost(gt.size(), std::vector<double>(pred.size()));
  for (std::size_t g = 0; g < gt.size(); ++g)
    for (std::size_t p = 0; p < pred.size(); ++p) cost[g][p] = person_mpjpe_mm(gt[g], pred[p]);
  const auto assign = hungarian(cost);
  for (std::size_t g = 0; g < gt.size(); ++g) {
    const int p = assign[g];
    if (p < 0 || cost[g][p] > match_threshold_mm) continue;
    out.push_back({static_cast<int>(g), p, cost[g][p]});
  }
  return out;
}

struct EvalOptions {
  std::vector<double> pck_thresholds_mm{100.0, 500.0};
  std::vector<double> recall_thresholds_mm{100.0, 500.0};
  double match_threshold_mm = 500.0;
};

struct EvalResult {
  double pcp = 0.0;
  std::map<double, double> pck;
  double mpjpe = 0.0;
  std::map<double, double> recall;
  double invalid = 0.0;
  double f1 = 0.0;
  std::vector<double> per_joint_mpjpe;
  int gt_persons = 0;
  int pred_persons = 0;
  int matched = 0;
};

inline EvalResult evaluate(std::span<const EvalFrame> gt_frames, std::span<const EvalFrame> pred_frames,
                           const JointSet& eval_set, const EvalOptions& opt = {}) {
  if (gt_frames.size() != pred_frames.size())
    throw Error(ErrorCode::FrameMisalignment, "ground truth has " + std::to_string(gt_frames.size()) +
                                                  " frames, predictions have " + std::to_string(pred_frames.size()));
  const int nj = eval_set.joint_count();
  EvalResult r;
  double err_sum = 0.0;
  long joint_n = 0;
  std::vector<double> joint_sum(nj, 0.0);
  std::vector<long> joint_cnt(nj, 0);
  std::vector<long> pck_hits(opt.pck_thresholds_mm.size(), 0);
  std::vector<long> recall_hits(opt.recall_thresholds_mm.size(), 0);
  long recall500 = 0;
  long limbs_total = 0, limbs_ok = 0;

  for (std::size_t f = 0; f < gt_frames.size(); ++f) {
    const auto& gt = gt_frames[f];
    const auto& pred = pred_frames[f];
    r.gt_persons += static_cast<int>(gt.size());
    r.pred_persons += static_cast<int>(pred.size());
    const auto matches = match_predictions(gt, pred, opt.match_threshold_mm);
    r.matched += static_cast<int>(matches.size());
    std::vector<int> gt_to_pred(gt.size(), -1);
    for (const auto& m : matches) {
      gt_to_pred[m.gt] = m.pred;
      for (std::size_t t = 0; t < opt.recall_thresholds_mm.size(); ++t)
        if (m.mpjpe_mm < opt.recall_thresholds_mm[t]) ++recall_hits[t];
      if (m.mpjpe_mm < 500.0) ++recall500;
      const auto& g = gt[m.gt];
      const auto& p = pred[m.pred];
      for (int j = 0; j < nj && j < static_cast<int>(g.joints.size()) && j < static_cast<int>(p.joints.size()); ++j) {
        if (!g.joints[j] || !p.joints[j]) continue;
        const double e = 1000.0 * (*g.joints[j] - *p.joints[j]).norm();
        err_sum += e;
        ++joint_n;
        joint_sum[j] += e;
        ++joint_cnt[j];
        for (std::size_t t = 0; t < opt.pck_thresholds_mm.size(); ++t)
          if (e < opt.pck_thresholds_mm[t]) ++pck_hits[t];
      }
    }
    for (std::size_t gi = 0; gi < gt.size(); ++gi) {
      const auto& g = gt[gi];
      for (const Limb& limb : eval_set.limbs) {
        if (limb.a >= static_cast<int>(g.joints.size()) || limb.b >= static_cast<int>(g.joints.size())) continue;
        if (!g.joints[limb.a] || !g.joints[limb.b]) continue;
        ++limbs_total;
        if (gt_to_pred[gi] < 0) continue;
        const auto& p = pred[gt_to_pred[gi]];
        if (limb.a >= static_cast<int>(p.joints.size()) || limb.b >= static_cast<int>(p.joints.size())) continue;
        if (!p.joints[limb.a] || !p.joints[limb.b]) continue;
        const double half = 0.5 * (*g.joints[limb.a] - *g.joints[limb.b]).norm();
        if ((*p.joints[limb.a] - *g.joints[limb.a]).norm() <= half &&
            (*p.joints[limb.b] - *g.joints[limb.b]).norm() <= half)
          ++limbs_ok;
      }
    }
  }

  const bool no_gt = r.gt_persons == 0;
  auto pct = [](double num, double den, double empty) { return den > 0 ? 100.0 * num / den : empty; };
  r.pcp = pct(limbs_ok, limbs_total, no_gt ? 100.0 : 0.0);
  r.mpjpe = joint_n > 0 ? err_sum / joint_n : 0.0;
  for (std::size_t t = 0; t < opt.pck_thresholds_mm.size(); ++t)
    r.pck[opt.pck_thresholds_mm[t]] = pct(pck_hits[t], joint_n, no_gt ? 100.0 : 0.0);
  for (std::size_t t = 0; t < opt.recall_thresholds_mm.size(); ++t)
    r.recall[opt.recall_thresholds_mm[t]] = pct(recall_hits[t], r.gt_persons, 100.0);
  r.invalid = pct(r.pred_persons - r.matched, r.pred_persons, 0.0);
  const double rec = pct(recall500, r.gt_persons, 100.0);
  const double prec = 100.0 - r.invalid;
  r.f1 = (rec + prec) > 0.0 ? 2.0 * rec * prec / (rec + prec) : 0.0;
  r.per_joint_mpjpe.resize(nj);
  for (int j = 0; j < nj; ++j) r.per_joint_mpjpe[j] = joint_cnt[j] > 0 ? joint_sum[j] / joint_cnt[j] : 0.0;
  return r;
}

}  // namespace rpt

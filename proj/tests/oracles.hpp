#pragma once

// Independent reference implementations used as test oracles. Each is the most
// direct formulation available and shares no code with the library beyond the
// plain data types.

#include <rpt/geometry.hpp>
#include <rpt/pipeline.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace oracle {

using rpt::Vec2;
using rpt::Vec3;

// Pinhole projection with the radial-tangential model written out term by term.
inline Vec2 project_radtan(const Vec3& p_cam, double fx, double fy, double cx, double cy, double k1, double k2,
                           double p1, double p2, double k3) {
  const double x = p_cam.x() / p_cam.z();
  const double y = p_cam.y() / p_cam.z();
  const double r2 = x * x + y * y;
  const double r4 = r2 * r2;
  const double r6 = r4 * r2;
  const double radial = 1.0 + k1 * r2 + k2 * r4 + k3 * r6;
  const double xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
  const double yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
  return {fx * xd + cx, fy * yd + cy};
}

// Inverts the equidistant fisheye model by bisection on theta in [0, pi/2).
// Returns the undistorted normalized point.
inline Vec2 undistort_fisheye_bisect(const Vec2& pd, double k1, double k2, double k3, double k4) {
  const double rd = pd.norm();
  if (rd == 0.0) return pd;
  auto f = [&](double t) {
    const double t2 = t * t;
    return t * (1.0 + k1 * t2 + k2 * t2 * t2 + k3 * t2 * t2 * t2 + k4 * t2 * t2 * t2 * t2) - rd;
  };
  double lo = 0.0, hi = M_PI / 2 - 1e-9;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  const double theta = 0.5 * (lo + hi);
  return pd * (std::tan(theta) / rd);
}

// Point minimizing the summed squared distance to a set of lines.
// For two non-parallel lines this is the midpoint of their common perpendicular.
inline Vec3 least_squares_point(const std::vector<Vec3>& origins, const std::vector<Vec3>& dirs) {
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Vec3 b = Vec3::Zero();
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const Vec3 d = dirs[i].normalized();
    const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - d * d.transpose();
    A += P;
    b += P * origins[i];
  }
  return A.colPivHouseholderQr().solve(b);
}

// Connected components of the graph "distance <= eps" via an explicit
// adjacency matrix and repeated relabeling until stable.
inline std::vector<int> component_labels(const std::vector<Vec3>& pts, double eps) {
  const int n = static_cast<int>(pts.size());
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) adj[i][j] = (pts[i] - pts[j]).norm() <= eps;
  std::vector<int> label(n);
  std::iota(label.begin(), label.end(), 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (adj[i][j] && label[j] < label[i]) {
          label[i] = label[j];
          changed = true;
        }
  }
  return label;
}

// The merge rule for one joint, step by step with full sorts.
inline std::optional<Vec3> merge_joint(const std::vector<Vec3>& contrib, bool reject, double outlier_dist, int top_k,
                                       int* support = nullptr) {
  if (contrib.empty()) return std::nullopt;
  Vec3 mean(0, 0, 0);
  for (const auto& c : contrib) mean += c;
  mean /= static_cast<double>(contrib.size());
  std::vector<std::pair<double, int>> kept;
  for (int i = 0; i < static_cast<int>(contrib.size()); ++i) {
    const double d = (contrib[i] - mean).norm();
    if (reject && d > outlier_dist) continue;
    kept.push_back({d, i});
  }
  if (kept.empty()) return std::nullopt;
  std::sort(kept.begin(), kept.end());
  if (static_cast<int>(kept.size()) > top_k) kept.resize(top_k);
  Vec3 out(0, 0, 0);
  for (const auto& [d, i] : kept) out += contrib[i];
  if (support) *support = static_cast<int>(kept.size());
  return Vec3(out / static_cast<double>(kept.size()));
}

// Minimum total cost over all injective assignments of the smaller side.
inline double best_assignment_cost(const std::vector<std::vector<double>>& cost) {
  const int rows = static_cast<int>(cost.size());
  if (rows == 0) return 0.0;
  const int cols = static_cast<int>(cost[0].size());
  const int k = std::min(rows, cols);
  double best = std::numeric_limits<double>::infinity();
  if (rows <= cols) {
    std::vector<int> perm(cols);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      double c = 0.0;
      for (int r = 0; r < k; ++r) c += cost[r][perm[r]];
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<int> perm(rows);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      double c = 0.0;
      for (int col = 0; col < k; ++col) c += cost[perm[col]][col];
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return best;
}

}  // namespace oracle

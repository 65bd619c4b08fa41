#pragma once

#include <rpt/common.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rpt {

struct DistortionModel {
  enum class Kind { None, RadialTangential, FisheyeEquidistant };

  Kind kind = Kind::None;
  // RadialTangential: k1, k2, p1, p2, k3. FisheyeEquidistant: k1, k2, k3, k4 (fifth unused).
  std::array<double, 5> coeffs{};

  static DistortionModel none() { return {}; }
  static DistortionModel radial_tangential(double k1, double k2, double p1, double p2, double k3) {
    return {Kind::RadialTangential, {k1, k2, p1, p2, k3}};
  }
  static DistortionModel fisheye(double k1, double k2, double k3, double k4) {
    return {Kind::FisheyeEquidistant, {k1, k2, k3, k4, 0.0}};
  }

  friend bool operator==(const DistortionModel&, const DistortionModel&) = default;
};

inline std::string_view to_string(DistortionModel::Kind kind) {
  switch (kind) {
    case DistortionModel::Kind::None: return "none";
    case DistortionModel::Kind::RadialTangential: return "radial_tangential";
    case DistortionModel::Kind::FisheyeEquidistant: return "fisheye_equidistant";
  }
  return "none";
}

struct CameraCalib {
  std::string id;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation = Mat3::Identity();     // world -> camera
  Vec3 translation = Vec3::Zero();      // world -> camera, meters
  DistortionModel distortion;
  int image_width = 1;
  int image_height = 1;

  Vec3 center() const { return -rotation.transpose() * translation; }
};

// Throws InvalidCalibration when the camera violates its invariants.
inline void validate(const CameraCalib& cam) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::InvalidCalibration, "camera '" + cam.id + "': " + what);
  };
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) fail("focal lengths must be positive");
  if (cam.image_width <= 0 || cam.image_height <= 0) fail("image size must be positive");
  if (!cam.rotation.allFinite() || !cam.translation.allFinite() || !std::isfinite(cam.cx) ||
      !std::isfinite(cam.cy))
    fail("non-finite extrinsics or principal point");
  const double ortho = (cam.rotation.transpose() * cam.rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho < 1e-9)) fail("rotation is not orthonormal");
  if (!(cam.rotation.determinant() > 0.0)) fail("rotation determinant is not +1");
  for (double c : cam.distortion.coeffs)
    if (!std::isfinite(c)) fail("non-finite distortion coefficient");
}

struct Ray3 {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
};

struct Triangulation {
  Vec3 point;
  double gap = 0.0;
};

namespace detail {

inline double fisheye_theta_d(double theta, const std::array<double, 5>& k) {
  const double t2 = theta * theta;
  return theta * (1.0 + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3]))));
}

}  // namespace detail

inline constexpr int kUndistortMaxIterations = 10;
inline constexpr double kUndistortTolerance = 1e-6;
inline constexpr double kUndistortMaxResidual = 1e-3;
inline constexpr double kMinDepth = 1e-6;

// Applies lens distortion to normalized image coordinates (x/z, y/z).
inline Vec2 distort_normalized(const Vec2& p, const DistortionModel& model) {
  const auto& k = model.coeffs;
  switch (model.kind) {
    case DistortionModel::Kind::None:
      return p;
    case DistortionModel::Kind::RadialTangential: {
      const double x = p.x(), y = p.y();
      const double r2 = x * x + y * y;
      const double radial = 1.0 + r2 * (k[0] + r2 * (k[1] + r2 * k[4]));
      return {x * radial + 2.0 * k[2] * x * y + k[3] * (r2 + 2.0 * x * x),
              y * radial + k[2] * (r2 + 2.0 * y * y) + 2.0 * k[3] * x * y};
    }
    case DistortionModel::Kind::FisheyeEquidistant: {
      const double r = p.norm();
      if (r < 1e-12) return p;
      return p * (detail::fisheye_theta_d(std::atan(r), k) / r);
    }
  }
  return p;
}

// Inverts distort_normalized by fixed-point iteration. Returns nullopt when the
// residual after the iteration budget exceeds kUndistortMaxResidual.
inline std::optional<Vec2> undistort_normalized(const Vec2& pd, const DistortionModel& model) {
  const auto& k = model.coeffs;
  switch (model.kind) {
    case DistortionModel::Kind::None:
      return pd;
    case DistortionModel::Kind::RadialTangential: {
      // Newton steps on distort(p) = pd; plain substitution is too slow near the image corners.
      double x = pd.x(), y = pd.y();
      for (int it = 0; it < kUndistortMaxIterations; ++it) {
        const double r2 = x * x + y * y;
        const double radial = 1.0 + r2 * (k[0] + r2 * (k[1] + r2 * k[4]));
        const double dradial = k[0] + r2 * (2.0 * k[1] + 3.0 * r2 * k[4]);  // d radial / d r2
        const double ex = x * radial + 2.0 * k[2] * x * y + k[3] * (r2 + 2.0 * x * x) - pd.x();
        const double ey = y * radial + k[2] * (r2 + 2.0 * y * y) + 2.0 * k[3] * x * y - pd.y();
        const double jxx = radial + 2.0 * x * x * dradial + 2.0 * k[2] * y + 6.0 * k[3] * x;
        const double jxy = 2.0 * x * y * dradial + 2.0 * k[2] * x + 2.0 * k[3] * y;
        const double jyx = 2.0 * x * y * dradial + 2.0 * k[2] * x + 2.0 * k[3] * y;
        const double jyy = radial + 2.0 * y * y * dradial + 6.0 * k[2] * y + 2.0 * k[3] * x;
        const double det = jxx * jyy - jxy * jyx;
        if (!(std::abs(det) > 1e-12)) break;
        const double sx = (jyy * ex - jxy * ey) / det;
        const double sy = (jxx * ey - jyx * ex) / det;
        x -= sx;
        y -= sy;
        if (std::max(std::abs(sx), std::abs(sy)) < kUndistortTolerance) break;
      }
      const Vec2 p(x, y);
      if (!p.allFinite() || (distort_normalized(p, model) - pd).norm() > kUndistortMaxResidual)
        return std::nullopt;
      return p;
    }
    case DistortionModel::Kind::FisheyeEquidistant: {
      const double rd = pd.norm();
      if (rd < 1e-12) return pd;
      double theta = rd;
      for (int it = 0; it < kUndistortMaxIterations; ++it) {
        const double t2 = theta * theta;
        const double next = rd / (1.0 + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3]))));
        const double step = std::abs(next - theta);
        theta = next;
        if (step < kUndistortTolerance) break;
      }
      if (!std::isfinite(theta) || theta < 0.0 || theta >= 0.5 * M_PI ||
          std::abs(detail::fisheye_theta_d(theta, k) - rd) > kUndistortMaxResidual)
        return std::nullopt;
      return pd * (std::tan(theta) / rd);
    }
  }
  return pd;
}

inline Vec2 pixel_to_normalized(const Vec2& px, const CameraCalib& cam) {
  return {(px.x() - cam.cx) / cam.fx, (px.y() - cam.cy) / cam.fy};
}

inline Vec2 normalized_to_pixel(const Vec2& n, const CameraCalib& cam) {
  return {cam.fx * n.x() + cam.cx, cam.fy * n.y() + cam.cy};
}

// Full projection with distortion; nullopt when the point is not in front of the camera.
inline std::optional<Vec2> try_project(const Vec3& point, const CameraCalib& cam) {
  const Vec3 pc = cam.rotation * point + cam.translation;
  if (!(pc.z() > kMinDepth)) return std::nullopt;
  const Vec2 n(pc.x() / pc.z(), pc.y() / pc.z());
  return normalized_to_pixel(distort_normalized(n, cam.distortion), cam);
}

inline Vec2 project(const Vec3& point, const CameraCalib& cam) {
  if (!point.allFinite()) throw std::invalid_argument("project: non-finite point");
  auto px = try_project(point, cam);
  if (!px) throw Error(ErrorCode::NonPositiveDepth, "point is behind camera '" + cam.id + "'");
  return *px;
}

// Returns normalized coordinates; entries that fail to converge are nullopt.
inline std::vector<std::optional<Vec2>> undistort_points(std::span<const Vec2> points,
                                                         const CameraCalib& cam) {
  std::vector<std::optional<Vec2>> out;
  out.reserve(points.size());
  for (const Vec2& px : points)
    out.push_back(undistort_normalized(pixel_to_normalized(px, cam), cam.distortion));
  return out;
}

inline Ray3 ray_from_normalized(const Vec2& n, const CameraCalib& cam) {
  return {cam.center(), (cam.rotation.transpose() * Vec3(n.x(), n.y(), 1.0)).normalized()};
}

inline Ray3 pixel_to_ray(const Vec2& pixel, const CameraCalib& cam) {
  auto n = undistort_normalized(pixel_to_normalized(pixel, cam), cam.distortion);
  if (!n) throw Error(ErrorCode::NonConvergence, "undistortion did not converge for camera '" + cam.id + "'");
  return ray_from_normalized(*n, cam);
}

// Midpoint of the shortest segment between two half-lines (t >= 0 on both).
// Inputs are put in a canonical order first so that swapping the arguments
// gives a bitwise-identical result. nullopt for parallel directions.
inline std::optional<Triangulation> try_midpoint(const Vec3& origin_a, const Vec3& dir_a,
                                                 const Vec3& origin_b, const Vec3& dir_b) {
  const std::array<double, 6> key_a{origin_a.x(), origin_a.y(), origin_a.z(), dir_a.x(), dir_a.y(), dir_a.z()};
  const std::array<double, 6> key_b{origin_b.x(), origin_b.y(), origin_b.z(), dir_b.x(), dir_b.y(), dir_b.z()};
  const bool swap = key_b < key_a;
  const Vec3& oa = swap ? origin_b : origin_a;
  const Vec3& da = swap ? dir_b : dir_a;
  const Vec3& ob = swap ? origin_a : origin_b;
  const Vec3& db = swap ? dir_a : dir_b;

  const double b = da.dot(db);
  if (std::abs(1.0 - std::abs(b)) <= 1e-9) return std::nullopt;
  const Vec3 w = oa - ob;
  const double d = da.dot(w);
  const double e = db.dot(w);
  const double denom = 1.0 - b * b;
  double s = (b * e - d) / denom;
  double t = (e - b * d) / denom;

  if (s < 0.0 || t < 0.0) {
    // The constrained minimum lies on one of the two boundary half-lines.
    const double t1 = std::max(0.0, e);
    const double s2 = std::max(0.0, -d);
    const double dist1 = (w - t1 * db).squaredNorm();
    const double dist2 = (w + s2 * da).squaredNorm();
    if (dist1 <= dist2) {
      s = 0.0;
      t = t1;
    } else {
      s = s2;
      t = 0.0;
    }
  }
  const Vec3 pa = oa + s * da;
  const Vec3 pb = ob + t * db;
  return Triangulation{0.5 * (pa + pb), (pa - pb).norm()};
}

inline Triangulation midpoint_triangulate(const Ray3& a, const Ray3& b) {
  auto r = try_midpoint(a.origin, a.direction, b.origin, b.direction);
  if (!r) throw Error(ErrorCode::ParallelRays, "rays are parallel");
  return *r;
}

}  // namespace rpt

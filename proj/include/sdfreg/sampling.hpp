// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <sdfreg/field.hpp>
#include <sdfreg/parallel.hpp>
#include <sdfreg/point_set.hpp>
#include <sdfreg/rng.hpp>
#include <sdfreg/transform.hpp>

namespace sdfreg {

/// Raised when a sampling pass produces no surface points at all.
struct EmptySampleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// @brief Camera pose described by position, look-at target, and up hint.
struct ViewPose {
  Eigen::Vector3d position{0, 0, 1};
  Eigen::Vector3d target{0, 0, 0};
  Eigen::Vector3d up_hint{0, 0, 1};

  /// Orthonormal camera frame: columns are right, up, forward (unit).
  Eigen::Matrix3d orientation() const {
    const Eigen::Vector3d forward = (target - position).normalized();
    Eigen::Vector3d up = up_hint;
    if (std::abs(forward.dot(up.normalized())) > 1.0 - 1e-9)
      up = std::abs(forward.z()) > 0.9 ? Eigen::Vector3d(1, 0, 0)
                                       : Eigen::Vector3d(0, 0, 1);
    const Eigen::Vector3d right = forward.cross(up).normalized();
    const Eigen::Vector3d true_up = right.cross(forward);
    Eigen::Matrix3d m;
    m.col(0) = right;
    m.col(1) = true_up;
    m.col(2) = forward;
    return m;
  }
};

/// @brief Sampling parameters: surface bands for the resampler plus the
/// multi-view ray-casting layout.
struct SamplerConfig {
  // Resampler acceptance bands (absolute signed-distance thresholds).
  double omega1{0.01};  ///< source-field surface band
  double omega2{0.02};  ///< target-field surface band
  double xi{0.02};      ///< residual threshold
  double rho{0.0};      ///< perturbation radius; resolved to scene_radius/20 when 0
  std::size_t max_samples{4096};  ///< cap on a sample set, oldest evicted first

  // Multi-view layout.
  int num_views{8};
  int ray_grid_width{64};
  int ray_grid_height{64};
  double view_radius_factor{2.5};  ///< camera distance, x object radius
  double fov_margin{1.2};          ///< frustum half-width, x object radius
  double far_filter_factor{1.5};   ///< discard samples beyond this x radius
  double dedup_spacing_factor{0.01};  ///< min sample spacing, x radius
};

/// @brief n view poses around a centroid: n-1 equally spaced on a horizontal
/// ring at 30 degrees elevation plus one top-down pose. All positions lie at
/// `radius` from the centroid and look at it.
inline std::vector<ViewPose> generate_view_poses(const Eigen::Vector3d& centroid,
                                                 double radius, int n) {
  if (n < 1) throw std::invalid_argument("need at least one view");
  if (!(radius > 0.0)) throw std::invalid_argument("view radius <= 0");
  std::vector<ViewPose> poses;
  poses.reserve(static_cast<std::size_t>(n));
  const double elevation = M_PI / 6.0;
  const int ring = n - 1;
  for (int k = 0; k < ring; ++k) {
    const double azimuth = 2.0 * M_PI * k / ring;
    ViewPose pose;
    pose.position = centroid + radius * Eigen::Vector3d(
                                            std::cos(azimuth) * std::cos(elevation),
                                            std::sin(azimuth) * std::cos(elevation),
                                            std::sin(elevation));
    pose.target = centroid;
    pose.up_hint = Eigen::Vector3d(0, 0, 1);
    poses.push_back(pose);
  }
  ViewPose top;
  top.position = centroid + radius * Eigen::Vector3d(0, 0, 1);
  top.target = centroid;
  top.up_hint = Eigen::Vector3d(1, 0, 0);
  poses.push_back(top);
  return poses;
}

/// @brief Sphere tracing along origin + t*direction to the first f(x) = 0.
///
/// Steps by 0.8 x the current field value for up to 256 steps; convergence at
/// |f| <= 1e-4 x field diameter, then 8 bisection refinements against a sign
/// change when one can be bracketed. Returns the hit point, or nullopt.
inline std::optional<Eigen::Vector3d> trace_ray(const SdfField& field,
                                                const Eigen::Vector3d& origin,
                                                const Eigen::Vector3d& direction) {
  constexpr int kMaxSteps = 256;
  constexpr int kBisections = 8;
  constexpr double kStepScale = 0.8;
  const double eps = 1e-4 * field.diameter();
  const Aabb box = field.bounds();
  const double t_max =
      (origin - box.center()).norm() + 2.0 * box.bounding_radius();

  auto bisect = [&](double t_lo, double t_hi) {
    // f(t_lo) > 0 > f(t_hi)
    for (int i = 0; i < kBisections; ++i) {
      const double t_mid = 0.5 * (t_lo + t_hi);
      if (field.value(origin + t_mid * direction) > 0.0)
        t_lo = t_mid;
      else
        t_hi = t_mid;
    }
    return origin + 0.5 * (t_lo + t_hi) * direction;
  };

  double t = 0.0;
  double prev_t = 0.0;
  double prev_d = field.value(origin);
  if (std::abs(prev_d) <= eps) return origin;
  for (int step = 0; step < kMaxSteps; ++step) {
    t += kStepScale * std::abs(prev_d);
    if (t > t_max) return std::nullopt;
    const double d = field.value(origin + t * direction);
    if (prev_d > 0.0 && d < 0.0) return bisect(prev_t, t);
    if (prev_d < 0.0 && d > 0.0) return bisect(t, prev_t);
    if (std::abs(d) <= eps) {
      if (d <= 0.0) return origin + t * direction;
      // Converged from outside; try to bracket a sign change just ahead.
      double h = std::max(2.0 * d, eps);
      for (int probe = 0; probe < 8; ++probe) {
        if (field.value(origin + (t + h) * direction) < 0.0)
          return bisect(t, t + h);
        h *= 2.0;
      }
      return origin + t * direction;
    }
    prev_t = t;
    prev_d = d;
  }
  return std::nullopt;
}

namespace detail {

/// Spatial hash over a uniform grid, used for minimum-spacing checks.
class SpacingGrid {
public:
  explicit SpacingGrid(double spacing) : spacing_(spacing) {}

  bool far_enough(const Eigen::Vector3d& p) const {
    if (spacing_ <= 0.0) return true;
    const Eigen::Vector3i c = cell(p);
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const auto it = cells_.find(key(c + Eigen::Vector3i(dx, dy, dz)));
          if (it == cells_.end()) continue;
          for (const auto& q : it->second)
            if ((p - q).norm() < spacing_) return false;
        }
    return true;
  }

  void insert(const Eigen::Vector3d& p) {
    cells_[key(cell(p))].push_back(p);
  }

private:
  Eigen::Vector3i cell(const Eigen::Vector3d& p) const {
    return Eigen::Vector3i(static_cast<int>(std::floor(p.x() / spacing_)),
                           static_cast<int>(std::floor(p.y() / spacing_)),
                           static_cast<int>(std::floor(p.z() / spacing_)));
  }
  static std::int64_t key(const Eigen::Vector3i& c) {
    const std::int64_t b = 1 << 20;
    return (static_cast<std::int64_t>(c.x()) + b) +
           ((static_cast<std::int64_t>(c.y()) + b) << 21) +
           ((static_cast<std::int64_t>(c.z()) + b) << 42);
  }

  double spacing_;
  std::unordered_map<std::int64_t, std::vector<Eigen::Vector3d>> cells_;
};

}  // namespace detail

/// @brief Casts a W x H grid of rays from every view pose, merges the hits in
/// (view, row-major ray) order, filters samples far from the centroid, and
/// enforces a minimum pairwise spacing.
///
/// Normals are the normalized field gradient at each kept hit.
inline SurfacePointSet multi_view_surface_sample(
    const SdfField& field, const Eigen::Vector3d& centroid,
    double object_radius, const SamplerConfig& cfg, int workers = 1,
    const std::vector<ViewPose>* views_override = nullptr) {
  if (cfg.ray_grid_width < 2 || cfg.ray_grid_height < 2)
    throw std::invalid_argument("ray grid must be at least 2x2");
  if (!(object_radius > 0.0))
    throw std::invalid_argument("object radius <= 0");

  const std::vector<ViewPose> poses =
      views_override ? *views_override
                     : generate_view_poses(
                           centroid, cfg.view_radius_factor * object_radius,
                           cfg.num_views);
  const int w = cfg.ray_grid_width, h = cfg.ray_grid_height;
  const std::size_t rays_per_view = static_cast<std::size_t>(w) * h;

  // One slot per ray so that the merged order is independent of workers.
  std::vector<std::optional<Eigen::Vector3d>> hits(poses.size() * rays_per_view);
  parallel_for(poses.size() * static_cast<std::size_t>(h), workers,
               [&](std::size_t job) {
                 const std::size_t view = job / h;
                 const int row = static_cast<int>(job % h);
                 const ViewPose& pose = poses[view];
                 const Eigen::Matrix3d frame = pose.orientation();
                 const double dist = (pose.target - pose.position).norm();
                 const double half_tan =
                     cfg.fov_margin * object_radius / dist;
                 for (int col = 0; col < w; ++col) {
                   const double u = half_tan * (2.0 * (col + 0.5) / w - 1.0);
                   const double v = half_tan * (1.0 - 2.0 * (row + 0.5) / h);
                   const Eigen::Vector3d dir =
                       (frame.col(2) + u * frame.col(0) + v * frame.col(1))
                           .normalized();
                   hits[view * rays_per_view + row * w + col] =
                       trace_ray(field, pose.position, dir);
                 }
               });

  const double far_limit = cfg.far_filter_factor * object_radius;
  const double spacing = cfg.dedup_spacing_factor * object_radius;
  detail::SpacingGrid grid(spacing);
  SurfacePointSet set;
  for (const auto& hit : hits) {
    if (!hit) continue;
    const Eigen::Vector3d& p = *hit;
    if ((p - centroid).norm() > far_limit) continue;
    if (!grid.far_enough(p)) continue;
    grid.insert(p);
    Eigen::Vector3d n = field.gradient(p);
    const double len = n.norm();
    set.push_back(p, len > 1e-12 ? Eigen::Vector3d(n / len)
                                 : Eigen::Vector3d(0, 0, 1));
  }
  if (set.empty())
    throw EmptySampleError("multi-view sampling produced no surface points");
  return set;
}

/// One accepted-candidate record, kept so a full optimization run can be
/// audited against the acceptance predicates afterwards.
struct ResampleEvent {
  Eigen::Vector3d point;
  SimTransform transform;  ///< source-to-target transform at acceptance
  int iteration{0};
};

struct ResampleResult {
  SurfacePointSet set;
  std::vector<Eigen::Vector3d> accepted;
  std::size_t evicted{0};
};

/// @brief One resampling round: perturbs every current sample by rho * U^3
/// [-1,1] and accepts candidates that lie in both surface bands, have a small
/// residual, and keep a minimum spacing to the set accepted so far.
///
/// The result is the union of the current set with the survivors, capped at
/// cfg.max_samples with oldest samples evicted first.
inline ResampleResult mh_resample(const SurfacePointSet& current,
                                  const SdfField& source,
                                  const SdfField& target, const SimTransform& g,
                                  const SamplerConfig& cfg, Rng& rng) {
  if (current.empty())
    throw std::invalid_argument("mh_resample: empty current set");
  if (!(cfg.rho > 0.0))
    throw std::invalid_argument("mh_resample: rho must be resolved/positive");

  const double min_spacing = cfg.rho / 10.0;
  detail::SpacingGrid grid(min_spacing);
  for (const auto& p : current.points) grid.insert(p);

  ResampleResult result;
  result.set = current;
  const double inv_scale = 1.0 / g.scale;
  for (const auto& p : current.points) {
    const Eigen::Vector3d candidate = p + cfg.rho * rng.uniform_box3();
    const double s_src = source.value(candidate);
    if (std::abs(s_src) > cfg.omega1) continue;
    const double s_tgt = target.value(g.apply(candidate));
    if (std::abs(s_tgt) > cfg.omega2) continue;
    if (std::abs(s_src - s_tgt * inv_scale) > cfg.xi) continue;
    if (!grid.far_enough(candidate)) continue;
    grid.insert(candidate);
    Eigen::Vector3d n = source.gradient(candidate);
    const double len = n.norm();
    result.set.push_back(candidate, len > 1e-12 ? Eigen::Vector3d(n / len)
                                                : Eigen::Vector3d(0, 0, 1));
    result.accepted.push_back(candidate);
  }
  if (result.set.size() > cfg.max_samples) {
    result.evicted = result.set.size() - cfg.max_samples;
    result.set.points.erase(result.set.points.begin(),
                            result.set.points.begin() + result.evicted);
    if (result.set.has_normals())
      result.set.normals.erase(result.set.normals.begin(),
                               result.set.normals.begin() + result.evicted);
  }
  return result;
}

/// Seeded entry point for a single standalone resampling round.
inline ResampleResult mh_resample(const SurfacePointSet& current,
                                  const SdfField& source,
                                  const SdfField& target, const SimTransform& g,
                                  const SamplerConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return mh_resample(current, source, target, g, cfg, rng);
}

}  // namespace sdfreg

// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include <sdfreg/fpfh.hpp>
#include <sdfreg/kdtree.hpp>
#include <sdfreg/point_set.hpp>
#include <sdfreg/rng.hpp>
#include <sdfreg/transform.hpp>

namespace sdfreg {

/// @brief Parameters of the automated-initialization stage. Values given as
/// factors are multiples of the voxel size.
struct CoarseConfig {
  double voxel{0.0};  ///< 0: resolved to scene_radius / 50 by the pipeline
  double normal_radius_factor{2.0};
  double fpfh_radius_factor{5.0};
  int ransac_max_iterations{100000};
  double ransac_confidence{0.999};
  double inlier_threshold_factor{1.5};
  int icp_max_iterations{50};
  double icp_threshold_factor{2.0};
  double icp_update_eps{1e-6};
};

/// @brief Result of RANSAC alignment or ICP refinement. The transform maps
/// source points onto target points; scale is always 1 at this stage.
struct CoarseResult {
  SimTransform transform;
  std::size_t inlier_count{0};
  double inlier_rmse{0.0};
  bool converged{false};
};

/// Rigid least-squares fit (rotation + translation) mapping src[i] onto
/// tgt[i] via SVD of the cross-covariance, with reflection correction.
inline bool fit_rigid(const std::vector<Eigen::Vector3d>& src,
                      const std::vector<Eigen::Vector3d>& tgt,
                      Eigen::Matrix3d& rotation, Eigen::Vector3d& translation) {
  const std::size_t n = src.size();
  if (n < 3 || tgt.size() != n) return false;
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), ct = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cs += src[i];
    ct += tgt[i];
  }
  cs /= double(n);
  ct /= double(n);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i)
    h += (src[i] - cs) * (tgt[i] - ct).transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0)
    d(2, 2) = -1.0;
  rotation = svd.matrixV() * d * svd.matrixU().transpose();
  translation = ct - rotation * cs;
  return true;
}

namespace detail {

/// Mutual-nearest correspondences in descriptor space; invalid descriptors
/// never match.
inline std::vector<std::pair<std::size_t, std::size_t>> match_descriptors(
    const std::vector<FpfhDescriptor>& src,
    const std::vector<FpfhDescriptor>& tgt) {
  auto nearest = [](const FpfhDescriptor& query,
                    const std::vector<FpfhDescriptor>& pool) -> std::size_t {
    std::size_t best = static_cast<std::size_t>(-1);
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!pool[i].valid) continue;
      const double d = query.squared_distance(pool[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };
  std::vector<std::size_t> src_to_tgt(src.size(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < src.size(); ++i)
    if (src[i].valid) src_to_tgt[i] = nearest(src[i], tgt);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::size_t j = src_to_tgt[i];
    if (j == static_cast<std::size_t>(-1)) continue;
    if (nearest(tgt[j], src) == i) pairs.emplace_back(i, j);
  }
  return pairs;
}

}  // namespace detail

/// @brief RANSAC over descriptor-matched correspondences: 4-point rigid
/// hypotheses scored by inlier count under a distance threshold, best
/// hypothesis refit on all of its inliers. Deterministic for a given seed.
inline CoarseResult ransac_align(const SurfacePointSet& source,
                                 const SurfacePointSet& target,
                                 const std::vector<FpfhDescriptor>& src_desc,
                                 const std::vector<FpfhDescriptor>& tgt_desc,
                                 const CoarseConfig& cfg, std::uint64_t seed) {
  CoarseResult result;
  if (source.size() < 4 || target.size() < 4)
    throw std::invalid_argument("ransac_align: need at least 4 points per side");
  if (!(cfg.voxel > 0.0))
    throw std::invalid_argument("ransac_align: voxel must be resolved");

  const auto pairs = detail::match_descriptors(src_desc, tgt_desc);
  if (pairs.size() < 4) return result;  // identity, not converged

  const double threshold = cfg.inlier_threshold_factor * cfg.voxel;
  const double t2 = threshold * threshold;

  std::size_t best_inliers = 0;
  double best_rmse = std::numeric_limits<double>::infinity();
  Eigen::Matrix3d best_r = Eigen::Matrix3d::Identity();
  Eigen::Vector3d best_t = Eigen::Vector3d::Zero();

  Rng rng(seed);
  double needed = cfg.ransac_max_iterations;
  std::vector<Eigen::Vector3d> s4(4), t4(4);
  for (int it = 0; it < cfg.ransac_max_iterations && it < needed; ++it) {
    std::array<std::size_t, 4> pick{};
    bool distinct = true;
    for (int k = 0; k < 4; ++k) {
      pick[k] = rng.uniform_index(pairs.size());
      for (int m = 0; m < k; ++m)
        if (pick[m] == pick[k]) distinct = false;
    }
    if (!distinct) continue;
    for (int k = 0; k < 4; ++k) {
      s4[k] = source.points[pairs[pick[k]].first];
      t4[k] = target.points[pairs[pick[k]].second];
    }
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    if (!fit_rigid(s4, t4, r, t)) continue;
    std::size_t inliers = 0;
    double sq_sum = 0.0;
    for (const auto& [si, ti] : pairs) {
      const double d2 =
          (r * source.points[si] + t - target.points[ti]).squaredNorm();
      if (d2 <= t2) {
        ++inliers;
        sq_sum += d2;
      }
    }
    const double rmse = inliers ? std::sqrt(sq_sum / double(inliers)) : 0.0;
    if (inliers > best_inliers ||
        (inliers == best_inliers && inliers > 0 && rmse < best_rmse)) {
      best_inliers = inliers;
      best_rmse = rmse;
      best_r = r;
      best_t = t;
      // Standard confidence-based early termination.
      const double w = double(inliers) / double(pairs.size());
      const double p4 = w * w * w * w;
      if (p4 > 1e-12 && p4 < 1.0)
        needed = std::min(needed, std::log(1.0 - cfg.ransac_confidence) /
                                      std::log(1.0 - p4));
      else if (p4 >= 1.0)
        needed = 0;
    }
  }

  if (best_inliers < 4) return result;  // identity, not converged

  // Refit on all inliers of the best hypothesis.
  std::vector<Eigen::Vector3d> src_in, tgt_in;
  for (const auto& [si, ti] : pairs) {
    const double d2 =
        (best_r * source.points[si] + best_t - target.points[ti]).squaredNorm();
    if (d2 <= t2) {
      src_in.push_back(source.points[si]);
      tgt_in.push_back(target.points[ti]);
    }
  }
  Eigen::Matrix3d r = best_r;
  Eigen::Vector3d t = best_t;
  if (src_in.size() >= 3) fit_rigid(src_in, tgt_in, r, t);
  double sq_sum = 0.0;
  std::size_t inliers = 0;
  for (const auto& [si, ti] : pairs) {
    const double d2 = (r * source.points[si] + t - target.points[ti]).squaredNorm();
    if (d2 <= t2) {
      ++inliers;
      sq_sum += d2;
    }
  }
  result.transform = from_rotation(r, t, 1.0);
  result.inlier_count = inliers;
  result.inlier_rmse = inliers ? std::sqrt(sq_sum / double(inliers)) : 0.0;
  result.converged = inliers >= 4;
  return result;
}

/// @brief Point-to-point ICP with nearest-neighbor correspondences under a
/// distance threshold and SVD updates; scale stays fixed at 1.
///
/// Stops when the incremental update norm drops below cfg.icp_update_eps or
/// after cfg.icp_max_iterations. With zero correspondences at the initial
/// transform the result carries `init` unchanged and converged = false.
inline CoarseResult icp_refine(const SurfacePointSet& source,
                               const SurfacePointSet& target,
                               const SimTransform& init,
                               const CoarseConfig& cfg) {
  if (!(cfg.voxel > 0.0))
    throw std::invalid_argument("icp_refine: voxel must be resolved");
  CoarseResult result;
  result.transform = init;
  if (source.empty() || target.empty()) return result;

  const KdTree tree(target.points);
  const double threshold = cfg.icp_threshold_factor * cfg.voxel;
  const double t2 = threshold * threshold;

  Eigen::Matrix3d r = init.rotation();
  Eigen::Vector3d t = init.translation;
  bool ever_matched = false;

  std::vector<Eigen::Vector3d> src_m, tgt_m;
  for (int iter = 0; iter < cfg.icp_max_iterations; ++iter) {
    src_m.clear();
    tgt_m.clear();
    double sq_sum = 0.0;
    for (const auto& p : source.points) {
      const Eigen::Vector3d q = r * p + t;
      const auto hit = tree.nearest(q);
      if (hit.squared_distance <= t2) {
        src_m.push_back(p);
        tgt_m.push_back(target.points[hit.index]);
        sq_sum += hit.squared_distance;
      }
    }
    if (src_m.size() < 3) {
      if (!ever_matched) return result;  // init unchanged, not converged
      break;
    }
    ever_matched = true;
    result.inlier_count = src_m.size();
    result.inlier_rmse = std::sqrt(sq_sum / double(src_m.size()));

    Eigen::Matrix3d r_new;
    Eigen::Vector3d t_new;
    if (!fit_rigid(src_m, tgt_m, r_new, t_new)) break;

    // Incremental update magnitude: rotation angle plus translation shift.
    const Eigen::Matrix3d dr = r_new * r.transpose();
    const double dc = std::clamp((dr.trace() - 1.0) / 2.0, -1.0, 1.0);
    const double update =
        std::acos(dc) + (r_new * Eigen::Vector3d::Zero() + t_new -
                         (r * Eigen::Vector3d::Zero() + t))
                            .norm();
    r = r_new;
    t = t_new;
    if (update < cfg.icp_update_eps) break;
  }

  if (!ever_matched) return result;
  result.transform = from_rotation(r, t, 1.0);
  result.converged = true;
  return result;
}

/// @brief Full automated initialization: voxel downsample, FPFH, RANSAC,
/// then point-to-point ICP. Returns the rigid source-to-target estimate.
inline CoarseResult coarse_initialize(const SurfacePointSet& source,
                                      const SurfacePointSet& target,
                                      const CoarseConfig& cfg,
                                      std::uint64_t seed) {
  if (!(cfg.voxel > 0.0))
    throw std::invalid_argument("coarse_initialize: voxel must be resolved");
  const SurfacePointSet src = voxel_downsample(source, cfg.voxel);
  const SurfacePointSet tgt = voxel_downsample(target, cfg.voxel);
  if (src.size() < 4 || tgt.size() < 4) return {};
  const double fpfh_radius = cfg.fpfh_radius_factor * cfg.voxel;
  const auto src_desc = compute_fpfh(src, fpfh_radius);
  const auto tgt_desc = compute_fpfh(tgt, fpfh_radius);
  const CoarseResult ransac =
      ransac_align(src, tgt, src_desc, tgt_desc, cfg, seed);
  CoarseResult icp = icp_refine(src, tgt, ransac.transform, cfg);
  // RANSAC convergence gates the overall flag; ICP refines when it can.
  icp.converged = icp.converged && ransac.converged;
  return icp;
}

}  // namespace sdfreg

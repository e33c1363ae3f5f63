// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include <sdfreg/kdtree.hpp>
#include <sdfreg/point_set.hpp>

namespace sdfreg {

/// @brief Reduces a point set to one centroid per occupied voxel.
///
/// Normals, when present, are averaged and renormalized. Output order is the
/// first-seen order of voxels, so the result is deterministic for a given
/// input order.
inline SurfacePointSet voxel_downsample(const SurfacePointSet& set,
                                        double voxel) {
  if (!(voxel > 0.0)) throw std::invalid_argument("voxel size <= 0");
  struct Cell {
    Eigen::Vector3d point_sum{Eigen::Vector3d::Zero()};
    Eigen::Vector3d normal_sum{Eigen::Vector3d::Zero()};
    std::size_t count{0};
  };
  auto key = [&](const Eigen::Vector3d& p) {
    const std::int64_t b = 1 << 20;
    const auto ix = static_cast<std::int64_t>(std::floor(p.x() / voxel)) + b;
    const auto iy = static_cast<std::int64_t>(std::floor(p.y() / voxel)) + b;
    const auto iz = static_cast<std::int64_t>(std::floor(p.z() / voxel)) + b;
    return ix + (iy << 21) + (iz << 42);
  };
  std::unordered_map<std::int64_t, std::size_t> index;
  std::vector<Cell> cells;
  const bool with_normals = set.has_normals();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::int64_t k = key(set.points[i]);
    auto [it, inserted] = index.try_emplace(k, cells.size());
    if (inserted) cells.emplace_back();
    Cell& cell = cells[it->second];
    cell.point_sum += set.points[i];
    if (with_normals) cell.normal_sum += set.normals[i];
    ++cell.count;
  }
  SurfacePointSet out;
  out.source_field = set.source_field;
  for (const Cell& cell : cells) {
    const Eigen::Vector3d p = cell.point_sum / double(cell.count);
    if (with_normals) {
      Eigen::Vector3d n = cell.normal_sum;
      const double len = n.norm();
      out.push_back(p, len > 1e-12 ? Eigen::Vector3d(n / len)
                                   : Eigen::Vector3d(0, 0, 1));
    } else {
      out.push_back(p);
    }
  }
  return out;
}

/// @brief 33-bin Fast Point Feature Histogram (11 bins per angular feature).
/// `valid` is false for points with no neighbors inside the support radius.
struct FpfhDescriptor {
  std::array<double, 33> bins{};
  bool valid{false};

  double squared_distance(const FpfhDescriptor& other) const {
    double d = 0.0;
    for (int i = 0; i < 33; ++i) {
      const double diff = bins[i] - other.bins[i];
      d += diff * diff;
    }
    return d;
  }
};

namespace detail {

/// Darboux-frame pair features (alpha, theta, phi) between two oriented
/// points; false when the pair is degenerate.
inline bool pair_features(const Eigen::Vector3d& p1, const Eigen::Vector3d& n1,
                          const Eigen::Vector3d& p2, const Eigen::Vector3d& n2,
                          double& f_alpha, double& f_theta, double& f_phi) {
  Eigen::Vector3d dp = p2 - p1;
  const double dist = dp.norm();
  if (dist < 1e-12) return false;
  dp /= dist;
  Eigen::Vector3d ns = n1, nt = n2;
  const double angle1 = ns.dot(dp);
  const double angle2 = nt.dot(dp);
  if (std::acos(std::abs(angle1)) > std::acos(std::abs(angle2))) {
    std::swap(ns, nt);
    dp = -dp;
    f_phi = -angle2;
  } else {
    f_phi = angle1;
  }
  Eigen::Vector3d v = dp.cross(ns);
  const double v_norm = v.norm();
  if (v_norm < 1e-12) return false;
  v /= v_norm;
  const Eigen::Vector3d w = ns.cross(v);
  f_alpha = v.dot(nt);
  f_theta = std::atan2(w.dot(nt), ns.dot(nt));
  return true;
}

inline int bin11(double value, double lo, double hi) {
  const int bin = static_cast<int>(11.0 * (value - lo) / (hi - lo));
  return std::clamp(bin, 0, 10);
}

}  // namespace detail

/// @brief Standard two-pass FPFH: per-point SPFH histograms over the
/// neighborhood, then distance-weighted accumulation of neighbor SPFHs.
///
/// Each 11-bin feature block of the result is normalized to sum 1. Points
/// without neighbors get a zero, invalid descriptor.
inline std::vector<FpfhDescriptor> compute_fpfh(const SurfacePointSet& set,
                                                double radius) {
  if (!set.has_normals())
    throw std::invalid_argument("compute_fpfh: normals required");
  if (!(radius > 0.0)) throw std::invalid_argument("fpfh radius <= 0");

  const std::size_t n = set.size();
  const KdTree tree(set.points);

  std::vector<std::array<double, 33>> spfh(n);
  std::vector<std::vector<std::size_t>> neighborhoods(n);
  for (std::size_t i = 0; i < n; ++i) {
    spfh[i].fill(0.0);
    auto neighbors = tree.radius_search(set.points[i], radius);
    std::vector<std::size_t> others;
    others.reserve(neighbors.size());
    for (const std::size_t j : neighbors)
      if (j != i) others.push_back(j);
    neighborhoods[i] = std::move(others);
    const auto& nbrs = neighborhoods[i];
    if (nbrs.empty()) continue;
    const double weight = 1.0 / static_cast<double>(nbrs.size());
    for (const std::size_t j : nbrs) {
      double fa, ft, fp;
      if (!detail::pair_features(set.points[i], set.normals[i], set.points[j],
                                 set.normals[j], fa, ft, fp))
        continue;
      spfh[i][detail::bin11(fa, -1.0, 1.0)] += weight;
      spfh[i][11 + detail::bin11(ft, -M_PI, M_PI)] += weight;
      spfh[i][22 + detail::bin11(fp, -1.0, 1.0)] += weight;
    }
  }

  std::vector<FpfhDescriptor> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nbrs = neighborhoods[i];
    if (nbrs.empty()) continue;  // zero descriptor, flagged invalid
    std::array<double, 33> acc = spfh[i];
    const double k_inv = 1.0 / static_cast<double>(nbrs.size());
    for (const std::size_t j : nbrs) {
      const double dist = (set.points[i] - set.points[j]).norm();
      const double w = k_inv / dist;
      for (int bin = 0; bin < 33; ++bin) acc[bin] += w * spfh[j][bin];
    }
    for (int block = 0; block < 3; ++block) {
      double sum = 0.0;
      for (int bin = 0; bin < 11; ++bin) sum += acc[block * 11 + bin];
      if (sum > 0.0)
        for (int bin = 0; bin < 11; ++bin) acc[block * 11 + bin] /= sum;
    }
    out[i].bins = acc;
    out[i].valid = true;
  }
  return out;
}

}  // namespace sdfreg

// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include <sdfreg/field.hpp>
#include <sdfreg/rng.hpp>

namespace sdfreg {

/// @brief Trilinearly interpolated signed-distance lattice.
///
/// Values are stored as float32, x index fastest. Queries outside the bounds
/// return the lattice value at the clamped boundary point plus the Euclidean
/// distance from the query to the bounds, which keeps sphere tracing safe
/// outside the lattice.
class GridField final : public SdfField {
public:
  GridField(const Eigen::Vector3i& resolution, const Aabb& bounds,
            std::vector<float> values, std::uint64_t seed = 0,
            double noise_amplitude = 0.0)
      : res_(resolution),
        bounds_(bounds),
        values_(std::move(values)),
        seed_(seed),
        noise_amplitude_(noise_amplitude) {
    if ((res_.array() < 2).any())
      throw std::invalid_argument("grid resolution must be >= 2 per axis");
    if (!bounds_.valid())
      throw std::invalid_argument("grid bounds are degenerate");
    const std::size_t expected = static_cast<std::size_t>(res_.x()) *
                                 static_cast<std::size_t>(res_.y()) *
                                 static_cast<std::size_t>(res_.z());
    if (values_.size() != expected)
      throw std::invalid_argument("grid value count does not match resolution");
    cell_ = bounds_.extent().cwiseQuotient((res_ - Eigen::Vector3i::Ones())
                                               .cast<double>());
  }

  double value(const Eigen::Vector3d& p) const override {
    const Eigen::Vector3d clamped = p.cwiseMax(bounds_.min).cwiseMin(bounds_.max);
    const double outside = (p - clamped).norm();
    return interpolate(clamped) + outside;
  }

  Aabb bounds() const override { return bounds_; }

  const Eigen::Vector3i& resolution() const { return res_; }
  const std::vector<float>& values() const { return values_; }
  std::uint64_t seed() const { return seed_; }
  double noise_amplitude() const { return noise_amplitude_; }

  /// Length of a cell diagonal, the natural resolution limit of the lattice.
  double cell_diagonal() const { return cell_.norm(); }

  float at(int ix, int iy, int iz) const {
    return values_[static_cast<std::size_t>(ix) +
                   static_cast<std::size_t>(res_.x()) *
                       (static_cast<std::size_t>(iy) +
                        static_cast<std::size_t>(res_.y()) *
                            static_cast<std::size_t>(iz))];
  }

  /// World position of a lattice node.
  Eigen::Vector3d node_position(int ix, int iy, int iz) const {
    return bounds_.min +
           Eigen::Vector3d(ix * cell_.x(), iy * cell_.y(), iz * cell_.z());
  }

private:
  double interpolate(const Eigen::Vector3d& p) const {
    Eigen::Vector3d local = (p - bounds_.min).cwiseQuotient(cell_);
    Eigen::Vector3i i0;
    Eigen::Vector3d frac;
    for (int a = 0; a < 3; ++a) {
      const double clamped = std::clamp(local[a], 0.0, double(res_[a] - 1));
      int idx = static_cast<int>(std::floor(clamped));
      idx = std::min(idx, res_[a] - 2);
      i0[a] = idx;
      frac[a] = clamped - idx;
    }
    double result = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
      const double w = (dx ? frac.x() : 1.0 - frac.x()) *
                       (dy ? frac.y() : 1.0 - frac.y()) *
                       (dz ? frac.z() : 1.0 - frac.z());
      result += w * at(i0.x() + dx, i0.y() + dy, i0.z() + dz);
    }
    return result;
  }

  Eigen::Vector3i res_;
  Aabb bounds_;
  std::vector<float> values_;
  std::uint64_t seed_;
  double noise_amplitude_;
  Eigen::Vector3d cell_;
};

using GridPtr = std::shared_ptr<const GridField>;

/// @brief Samples `source` onto a lattice, optionally adding seeded uniform
/// noise in [-amplitude, +amplitude] per node.
///
/// Amplitude 0 gives a faithful discretization; larger amplitudes emulate
/// poorly converged fields for degradation studies.
inline GridPtr make_grid_field(const SdfField& source,
                               const Eigen::Vector3i& resolution,
                               const Aabb& bounds, double noise_amplitude = 0.0,
                               std::uint64_t seed = 0) {
  if ((resolution.array() < 2).any())
    throw std::invalid_argument("grid resolution must be >= 2 per axis");
  if (!bounds.valid())
    throw std::invalid_argument("grid bounds are degenerate");
  const Eigen::Vector3d cell = bounds.extent().cwiseQuotient(
      (resolution - Eigen::Vector3i::Ones()).cast<double>());
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(resolution.x()) * resolution.y() *
                 resolution.z());
  Rng rng(seed);
  for (int iz = 0; iz < resolution.z(); ++iz)
    for (int iy = 0; iy < resolution.y(); ++iy)
      for (int ix = 0; ix < resolution.x(); ++ix) {
        const Eigen::Vector3d p =
            bounds.min + Eigen::Vector3d(ix * cell.x(), iy * cell.y(),
                                         iz * cell.z());
        double v = source.value(p);
        if (noise_amplitude > 0.0)
          v += rng.uniform(-noise_amplitude, noise_amplitude);
        values.push_back(static_cast<float>(v));
      }
  return std::make_shared<GridField>(resolution, bounds, std::move(values),
                                     seed, noise_amplitude);
}

// ---------------------------------------------------------------------------
// Blob I/O: raw little-endian float32 lattice, x index fastest. The JSON
// sidecar header carrying resolution/bounds/seed lives with the scene files
// (see scene.hpp); these helpers handle only the binary payload.
// ---------------------------------------------------------------------------

inline void write_grid_blob(const GridField& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open grid blob for write: " + path);
  static_assert(sizeof(float) == 4);
  // Little-endian hosts write the lattice directly.
  out.write(reinterpret_cast<const char*>(grid.values().data()),
            static_cast<std::streamsize>(grid.values().size() * 4));
  if (!out) throw std::runtime_error("short write to grid blob: " + path);
}

inline std::vector<float> read_grid_blob(const std::string& path,
                                         std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open grid blob: " + path);
  std::vector<float> values(expected_count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(expected_count * 4));
  if (static_cast<std::size_t>(in.gcount()) != expected_count * 4)
    throw std::runtime_error("grid blob truncated: " + path);
  return values;
}

}  // namespace sdfreg

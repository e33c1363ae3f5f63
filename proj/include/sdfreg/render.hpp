// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include <sdfreg/field.hpp>
#include <sdfreg/parallel.hpp>
#include <sdfreg/point_set.hpp>
#include <sdfreg/sampling.hpp>

namespace sdfreg {

/// @brief Sphere-traced depth image. Depths are ray-parameter distances from
/// the camera position; misses carry `max_depth`.
struct DepthImage {
  int width{0};
  int height{0};
  double max_depth{0.0};
  std::vector<double> depths;  ///< row-major, row 0 at the top
  std::vector<std::uint8_t> hit;
  SurfacePointSet hit_points;  ///< hit positions with field-gradient normals

  double at(int row, int col) const { return depths[row * width + col]; }
  bool hit_at(int row, int col) const { return hit[row * width + col] != 0; }

  double hit_fraction() const {
    std::size_t n = 0;
    for (const auto h : hit) n += h;
    return depths.empty() ? 0.0 : double(n) / double(depths.size());
  }
};

/// @brief Renders a depth map of `field` from `view` by sphere tracing one
/// ray per pixel. Deterministic; rows may be traced in parallel.
inline DepthImage render_depth(const SdfField& field, const ViewPose& view,
                               int width, int height, double fov_half_tangent,
                               int workers = 1) {
  if (width < 16 || height < 16)
    throw std::invalid_argument("render resolution must be at least 16x16");
  DepthImage img;
  img.width = width;
  img.height = height;
  const Aabb box = field.bounds();
  img.max_depth =
      (view.position - box.center()).norm() + 2.0 * box.bounding_radius();
  img.depths.assign(static_cast<std::size_t>(width) * height, img.max_depth);
  img.hit.assign(img.depths.size(), 0);

  const Eigen::Matrix3d frame = view.orientation();
  std::vector<std::optional<Eigen::Vector3d>> hits(img.depths.size());
  parallel_for(static_cast<std::size_t>(height), workers, [&](std::size_t row) {
    for (int col = 0; col < width; ++col) {
      const double u = fov_half_tangent * (2.0 * (col + 0.5) / width - 1.0);
      const double v = fov_half_tangent * (1.0 - 2.0 * (row + 0.5) / height);
      const Eigen::Vector3d dir =
          (frame.col(2) + u * frame.col(0) + v * frame.col(1)).normalized();
      const auto hit = trace_ray(field, view.position, dir);
      if (hit) {
        const std::size_t idx = row * width + col;
        img.depths[idx] = (*hit - view.position).norm();
        img.hit[idx] = 1;
        hits[idx] = hit;
      }
    }
  });
  for (const auto& h : hits) {
    if (!h) continue;
    Eigen::Vector3d n = field.gradient(*h);
    const double len = n.norm();
    img.hit_points.push_back(*h, len > 1e-12 ? Eigen::Vector3d(n / len)
                                             : Eigen::Vector3d(0, 0, 1));
  }
  return img;
}

/// Writes a 16-bit binary PGM (P5, big-endian samples); depth is mapped
/// linearly onto [0, 65535] with max_depth at 65535.
inline void write_pgm16(const DepthImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open PGM for write: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  for (const double d : img.depths) {
    const double t = img.max_depth > 0.0 ? d / img.max_depth : 0.0;
    const auto v = static_cast<std::uint16_t>(
        std::min(65535.0, std::max(0.0, t * 65535.0 + 0.5)));
    const std::uint8_t bytes[2] = {static_cast<std::uint8_t>(v >> 8),
                                   static_cast<std::uint8_t>(v & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
  if (!out) throw std::runtime_error("short write to PGM: " + path);
}

}  // namespace sdfreg

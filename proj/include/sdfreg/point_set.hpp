// SPDX-License-Identifier: MIT
#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sdfreg {

/// Shortest round-trip decimal representation of a double, used by all text
/// writers so that emitted files are byte-stable.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// @brief Ordered set of surface samples with optional outward unit normals.
struct SurfacePointSet {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;  ///< empty, or one per point
  std::string source_field;              ///< identifier of the sampled field

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  void push_back(const Eigen::Vector3d& p) { points.push_back(p); }
  void push_back(const Eigen::Vector3d& p, const Eigen::Vector3d& n) {
    points.push_back(p);
    normals.push_back(n);
  }
};

/// Writes an ASCII PLY (x y z [nx ny nz]).
inline void write_ply(const SurfacePointSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open PLY for write: " + path);
  const bool with_normals = set.has_normals();
  out << "ply\nformat ascii 1.0\n";
  if (!set.source_field.empty())
    out << "comment source_field " << set.source_field << "\n";
  out << "element vertex " << set.points.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (with_normals)
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    const auto& p = set.points[i];
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
        << format_double(p.z());
    if (with_normals) {
      const auto& n = set.normals[i];
      out << ' ' << format_double(n.x()) << ' ' << format_double(n.y()) << ' '
          << format_double(n.z());
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("short write to PLY: " + path);
}

inline SurfacePointSet read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open PLY: " + path);
  std::string line;
  std::size_t vertex_count = 0;
  int property_count = 0;
  SurfacePointSet set;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line.rfind("element vertex", 0) == 0) {
      vertex_count = std::stoul(line.substr(15));
    } else if (line.rfind("property", 0) == 0) {
      ++property_count;
    } else if (line.rfind("comment source_field", 0) == 0) {
      set.source_field = line.substr(21);
    } else if (line == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw std::runtime_error("PLY header missing: " + path);
  if (property_count != 3 && property_count != 6)
    throw std::runtime_error("PLY must have xyz or xyz+normals: " + path);
  const bool with_normals = property_count == 6;
  set.points.reserve(vertex_count);
  if (with_normals) set.normals.reserve(vertex_count);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error("PLY truncated: " + path);
    std::istringstream ss(line);
    Eigen::Vector3d p, n;
    ss >> p.x() >> p.y() >> p.z();
    if (with_normals) ss >> n.x() >> n.y() >> n.z();
    if (!ss) throw std::runtime_error("bad PLY vertex line: " + path);
    if (with_normals)
      set.push_back(p, n);
    else
      set.push_back(p);
  }
  return set;
}

}  // namespace sdfreg

// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sdfreg {

/// Euler convention used everywhere in this library: extrinsic X-Y-Z,
/// i.e. R = Rz(yaw) * Ry(pitch) * Rx(roll) about the fixed world axes.
inline constexpr const char* kEulerConvention = "extrinsic-xyz";

inline Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

inline Eigen::Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

inline Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

/// @brief Similarity transform: translation, extrinsic X-Y-Z Euler rotation,
/// and a single positive scale factor applied to all axes.
///
/// Matrix form is the product M = T * R * S (translation, rotation, uniform
/// scale, in that order), so M maps p to scale * R * p + t.
struct SimTransform {
  Eigen::Vector3d translation{0.0, 0.0, 0.0};
  Eigen::Vector3d euler_xyz{0.0, 0.0, 0.0};  ///< (roll, pitch, yaw) in radians
  double scale{1.0};

  SimTransform() = default;
  SimTransform(const Eigen::Vector3d& t, const Eigen::Vector3d& rpy, double s)
      : translation(t), euler_xyz(rpy), scale(s) {}

  Eigen::Matrix3d rotation() const {
    return rot_z(euler_xyz.z()) * rot_y(euler_xyz.y()) * rot_x(euler_xyz.x());
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return scale * (rotation() * p) + translation;
  }

  static SimTransform identity() { return {}; }
};

/// Builds a SimTransform from a rotation matrix, translation, and scale.
/// Euler angles are recovered for the extrinsic X-Y-Z convention; the
/// resulting transform reproduces the input matrix even when the angle
/// triple itself is not unique (gimbal lock).
inline SimTransform from_rotation(const Eigen::Matrix3d& r,
                                  const Eigen::Vector3d& t, double s = 1.0) {
  if (!(s > 0.0)) throw std::invalid_argument("scale must be positive");
  // R = Rz(y)*Ry(p)*Rx(x): R(2,0) = -sin(p).
  double pitch, roll, yaw;
  const double sp = -r(2, 0);
  if (std::abs(sp) < 1.0 - 1e-12) {
    pitch = std::asin(sp);
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    // cos(pitch) ~ 0: roll and yaw are coupled; pick roll = 0.
    pitch = sp > 0 ? M_PI / 2.0 : -M_PI / 2.0;
    roll = 0.0;
    yaw = std::atan2(-r(0, 1), r(1, 1));
  }
  return SimTransform(t, Eigen::Vector3d(roll, pitch, yaw), s);
}

/// @brief 4x4 homogeneous matrix M = T * R * S.
inline Eigen::Matrix4d to_matrix(const SimTransform& g) {
  if (!(g.scale > 0.0)) throw std::invalid_argument("scale must be positive");
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = g.scale * g.rotation();
  m.topRightCorner<3, 1>() = g.translation;
  return m;
}

/// Applies g to a point: scale * R * p + t.
inline Eigen::Vector3d apply(const SimTransform& g, const Eigen::Vector3d& p) {
  return g.apply(p);
}

/// @brief Inverse similarity transform, closed form.
inline SimTransform inverse(const SimTransform& g) {
  if (!(g.scale > 0.0)) throw std::invalid_argument("scale must be positive");
  const Eigen::Matrix3d rt = g.rotation().transpose();
  const double inv_s = 1.0 / g.scale;
  return from_rotation(rt, -inv_s * (rt * g.translation), inv_s);
}

/// Composition: apply(compose(a, b), p) == apply(a, apply(b, p)).
inline SimTransform compose(const SimTransform& a, const SimTransform& b) {
  const Eigen::Matrix3d r = a.rotation() * b.rotation();
  const Eigen::Vector3d t =
      a.translation + a.scale * (a.rotation() * b.translation);
  return from_rotation(r, t, a.scale * b.scale);
}

/// @brief Pose error between two similarity transforms.
struct TransformError {
  double delta_t{0.0};  ///< Euclidean distance between translations
  double delta_r{0.0};  ///< geodesic rotation angle, radians, in [0, pi]
  double delta_s{0.0};  ///< absolute scale difference
};

inline TransformError transform_error(const SimTransform& estimate,
                                      const SimTransform& truth) {
  TransformError e;
  e.delta_t = (estimate.translation - truth.translation).norm();
  const Eigen::Matrix3d rel = estimate.rotation() * truth.rotation().transpose();
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  e.delta_r = std::acos(c);
  e.delta_s = std::abs(estimate.scale - truth.scale);
  return e;
}

}  // namespace sdfreg

// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include <sdfreg/transform.hpp>

namespace sdfreg {

/// Axis-aligned bounding box in world units.
struct Aabb {
  Eigen::Vector3d min{Eigen::Vector3d::Zero()};
  Eigen::Vector3d max{Eigen::Vector3d::Zero()};

  Eigen::Vector3d center() const { return 0.5 * (min + max); }
  Eigen::Vector3d extent() const { return max - min; }
  double diagonal() const { return (max - min).norm(); }
  /// Radius of the bounding sphere around the box center.
  double bounding_radius() const { return 0.5 * diagonal(); }

  bool valid() const {
    return (max.array() > min.array()).all() && min.allFinite() &&
           max.allFinite();
  }

  static Aabb of_corners(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    Aabb box;
    box.min = a.cwiseMin(b);
    box.max = a.cwiseMax(b);
    return box;
  }

  Aabb merged(const Aabb& other) const {
    Aabb box;
    box.min = min.cwiseMin(other.min);
    box.max = max.cwiseMax(other.max);
    return box;
  }
};

/// @brief Continuous signed distance field. Negative inside, positive
/// outside, zero on the surface.
///
/// Fields are immutable after construction; value() and gradient() are pure
/// and safe to call concurrently.
class SdfField {
public:
  virtual ~SdfField() = default;

  /// Signed distance at p, world units.
  virtual double value(const Eigen::Vector3d& p) const = 0;

  /// Spatial gradient. The default falls back to central finite differences
  /// with step fd_step(); backends with closed forms override this.
  virtual Eigen::Vector3d gradient(const Eigen::Vector3d& p) const {
    return fd_gradient(p, fd_step());
  }

  /// Conservative axis-aligned bounds enclosing the surface.
  virtual Aabb bounds() const = 0;

  double diameter() const { return bounds().diagonal(); }

  /// Finite-difference step used by gradient fallbacks: the configured value
  /// if set, otherwise 1e-4 x field diameter.
  double fd_step() const {
    return fd_step_ > 0.0 ? fd_step_ : 1e-4 * diameter();
  }
  void set_fd_step(double h) { fd_step_ = h; }

  Eigen::Vector3d fd_gradient(const Eigen::Vector3d& p, double h) const {
    Eigen::Vector3d g;
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::Vector3d lo = p, hi = p;
      lo[axis] -= h;
      hi[axis] += h;
      g[axis] = (value(hi) - value(lo)) / (2.0 * h);
    }
    return g;
  }

private:
  double fd_step_{0.0};
};

using FieldPtr = std::shared_ptr<const SdfField>;

/// Checked evaluation; rejects non-finite query points.
inline double eval(const SdfField& field, const Eigen::Vector3d& p) {
  if (!p.allFinite()) throw std::invalid_argument("eval: non-finite point");
  return field.value(p);
}

inline Eigen::Vector3d gradient(const SdfField& field,
                                const Eigen::Vector3d& p) {
  if (!p.allFinite())
    throw std::invalid_argument("gradient: non-finite point");
  return field.gradient(p);
}

// ---------------------------------------------------------------------------
// Analytic primitives
// ---------------------------------------------------------------------------

class SphereField final : public SdfField {
public:
  explicit SphereField(double radius) : radius_(radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("sphere radius <= 0");
  }

  double value(const Eigen::Vector3d& p) const override {
    return p.norm() - radius_;
  }

  Eigen::Vector3d gradient(const Eigen::Vector3d& p) const override {
    const double n = p.norm();
    if (n < 1e-300) return Eigen::Vector3d::Zero();  // medial point
    return p / n;
  }

  Aabb bounds() const override {
    return Aabb::of_corners(Eigen::Vector3d::Constant(-radius_),
                            Eigen::Vector3d::Constant(radius_));
  }

  double radius() const { return radius_; }

private:
  double radius_;
};

class BoxField final : public SdfField {
public:
  explicit BoxField(const Eigen::Vector3d& half_extents)
      : half_(half_extents) {
    if (!(half_.array() > 0.0).all())
      throw std::invalid_argument("box half extents <= 0");
  }

  double value(const Eigen::Vector3d& p) const override {
    const Eigen::Vector3d q = p.cwiseAbs() - half_;
    const Eigen::Vector3d outside = q.cwiseMax(0.0);
    return outside.norm() + std::min(q.maxCoeff(), 0.0);
  }

  Eigen::Vector3d gradient(const Eigen::Vector3d& p) const override {
    const Eigen::Vector3d q = p.cwiseAbs() - half_;
    const Eigen::Vector3d outside = q.cwiseMax(0.0);
    const double out_norm = outside.norm();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    if (out_norm > 1e-300) {
      for (int i = 0; i < 3; ++i)
        g[i] = (outside[i] / out_norm) * (p[i] < 0.0 ? -1.0 : 1.0);
      return g;
    }
    // Inside: face normal of the nearest face; ties take the lowest axis.
    int axis = 0;
    for (int i = 1; i < 3; ++i)
      if (q[i] > q[axis]) axis = i;
    g[axis] = p[axis] < 0.0 ? -1.0 : 1.0;
    return g;
  }

  Aabb bounds() const override { return Aabb::of_corners(-half_, half_); }

  const Eigen::Vector3d& half_extents() const { return half_; }

private:
  Eigen::Vector3d half_;
};

/// Capped cylinder along the z axis.
class CylinderField final : public SdfField {
public:
  CylinderField(double radius, double half_height)
      : radius_(radius), half_height_(half_height) {
    if (!(radius > 0.0) || !(half_height > 0.0))
      throw std::invalid_argument("cylinder dimensions <= 0");
  }

  double value(const Eigen::Vector3d& p) const override {
    const double dr = std::hypot(p.x(), p.y()) - radius_;
    const double dz = std::abs(p.z()) - half_height_;
    const double outside =
        std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
    return outside + std::min(std::max(dr, dz), 0.0);
  }

  Eigen::Vector3d gradient(const Eigen::Vector3d& p) const override {
    const double rad = std::hypot(p.x(), p.y());
    const double dr = rad - radius_;
    const double dz = std::abs(p.z()) - half_height_;
    Eigen::Vector3d radial(0, 0, 0);
    if (rad > 1e-300) radial = Eigen::Vector3d(p.x() / rad, p.y() / rad, 0.0);
    const Eigen::Vector3d axial(0, 0, p.z() < 0.0 ? -1.0 : 1.0);
    if (dr > 0.0 || dz > 0.0) {
      const double ox = std::max(dr, 0.0), oz = std::max(dz, 0.0);
      const double n = std::hypot(ox, oz);
      return (ox / n) * radial + (oz / n) * axial;
    }
    return dr > dz ? radial : axial;
  }

  Aabb bounds() const override {
    return Aabb::of_corners(
        Eigen::Vector3d(-radius_, -radius_, -half_height_),
        Eigen::Vector3d(radius_, radius_, half_height_));
  }

  double radius() const { return radius_; }
  double half_height() const { return half_height_; }

private:
  double radius_;
  double half_height_;
};

/// Box with rounded edges: the surface lies `rounding` outside the inner box
/// given by half_extents, so the overall extents are half_extents + rounding.
class RoundedBoxField final : public SdfField {
public:
  RoundedBoxField(const Eigen::Vector3d& half_extents, double rounding)
      : inner_(half_extents), rounding_(rounding) {
    if (!(rounding >= 0.0)) throw std::invalid_argument("rounding < 0");
  }

  double value(const Eigen::Vector3d& p) const override {
    return inner_.value(p) - rounding_;
  }

  Eigen::Vector3d gradient(const Eigen::Vector3d& p) const override {
    return inner_.gradient(p);
  }

  Aabb bounds() const override {
    Aabb b = inner_.bounds();
    b.min.array() -= rounding_;
    b.max.array() += rounding_;
    return b;
  }

  const Eigen::Vector3d& half_extents() const { return inner_.half_extents(); }
  double rounding() const { return rounding_; }

private:
  BoxField inner_;
  double rounding_;
};

// ---------------------------------------------------------------------------
// Composites
// ---------------------------------------------------------------------------

/// Union of child fields: elementwise minimum. The gradient is that of the
/// minimizing child; ties are broken by the lowest child index.
class UnionField final : public SdfField {
public:
  explicit UnionField(std::vector<FieldPtr> children)
      : children_(std::move(children)) {
    if (children_.empty()) throw std::invalid_argument("empty union");
    bounds_ = children_.front()->bounds();
    for (std::size_t i = 1; i < children_.size(); ++i)
      bounds_ = bounds_.merged(children_[i]->bounds());
  }

  double value(const Eigen::Vector3d& p) const override {
    double best = children_.front()->value(p);
    for (std::size_t i = 1; i < children_.size(); ++i)
      best = std::min(best, children_[i]->value(p));
    return best;
  }

  Eigen::Vector3d gradient(const Eigen::Vector3d& p) const override {
    std::size_t best = 0;
    double best_value = children_.front()->value(p);
    for (std::size_t i = 1; i < children_.size(); ++i) {
      const double v = children_[i]->value(p);
      if (v < best_value) {
        best_value = v;
        best = i;
      }
    }
    return children_[best]->gradient(p);
  }

  Aabb bounds() const override { return bounds_; }

  const std::vector<FieldPtr>& children() const { return children_; }

private:
  std::vector<FieldPtr> children_;
  Aabb bounds_;
};

/// @brief Child field observed through a similarity transform.
///
/// `to_child` maps query-frame points into the child frame. Reported values
/// are divided by the transform scale so they stay metric distances in the
/// query frame, and gradients are rotated back accordingly.
class PosedField final : public SdfField {
public:
  PosedField(FieldPtr child, const SimTransform& to_child)
      : child_(std::move(child)),
        to_child_(to_child),
        rot_(to_child.rotation()),
        inv_scale_(1.0 / to_child.scale) {
    if (!child_) throw std::invalid_argument("null child");
    if (!(to_child.scale > 0.0))
      throw std::invalid_argument("scale must be positive");
    // Query-frame bounds: transform the child's corner points back.
    const Aabb cb = child_->bounds();
    const SimTransform from_child = sdfreg::inverse(to_child_);
    bool first = true;
    for (int corner = 0; corner < 8; ++corner) {
      Eigen::Vector3d c(corner & 1 ? cb.max.x() : cb.min.x(),
                        corner & 2 ? cb.max.y() : cb.min.y(),
                        corner & 4 ? cb.max.z() : cb.min.z());
      const Eigen::Vector3d w = from_child.apply(c);
      if (first) {
        bounds_ = Aabb::of_corners(w, w);
        first = false;
      } else {
        bounds_ = bounds_.merged(Aabb::of_corners(w, w));
      }
    }
  }

  double value(const Eigen::Vector3d& p) const override {
    return child_->value(to_child_.scale * (rot_ * p) + to_child_.translation) *
           inv_scale_;
  }

  Eigen::Vector3d gradient(const Eigen::Vector3d& p) const override {
    const Eigen::Vector3d q =
        to_child_.scale * (rot_ * p) + to_child_.translation;
    return rot_.transpose() * child_->gradient(q);
  }

  Aabb bounds() const override { return bounds_; }

  const SimTransform& to_child() const { return to_child_; }
  const FieldPtr& child() const { return child_; }

private:
  FieldPtr child_;
  SimTransform to_child_;
  Eigen::Matrix3d rot_;
  double inv_scale_;
  Aabb bounds_;
};

// Convenience constructors.

inline FieldPtr make_sphere(double radius) {
  return std::make_shared<SphereField>(radius);
}

inline FieldPtr make_box(const Eigen::Vector3d& half_extents) {
  return std::make_shared<BoxField>(half_extents);
}

inline FieldPtr make_cylinder(double radius, double half_height) {
  return std::make_shared<CylinderField>(radius, half_height);
}

inline FieldPtr make_rounded_box(const Eigen::Vector3d& half_extents,
                                 double rounding) {
  return std::make_shared<RoundedBoxField>(half_extents, rounding);
}

inline FieldPtr make_union(std::vector<FieldPtr> children) {
  return std::make_shared<UnionField>(std::move(children));
}

/// Poses `child` so that queries in the parent frame see it through
/// `to_child` (parent -> child map).
inline FieldPtr make_posed(FieldPtr child, const SimTransform& to_child) {
  return std::make_shared<PosedField>(std::move(child), to_child);
}

/// Places `child` into the parent frame at `placement` (child -> parent map),
/// the usual way of inserting a canonical object into a scene.
inline FieldPtr make_placed(FieldPtr child, const SimTransform& placement) {
  return std::make_shared<PosedField>(std::move(child), inverse(placement));
}

}  // namespace sdfreg

// SPDX-License-Identifier: MIT
#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

#include <sdfreg/field.hpp>
#include <sdfreg/scene.hpp>

namespace sdfreg {

/// @brief Scene field with a spherical region carved out and a posed object
/// union-ed in: the editing primitive behind object substitution and
/// instance replacement.
///
/// Outside the mask ball the field equals min(scene, object) exactly. Inside
/// it the scene contribution is clamped to the (positive) distance to the
/// ball boundary, which removes whatever the scene contained there while
/// keeping sphere tracing stable.
class SubstitutionField final : public SdfField {
public:
  SubstitutionField(FieldPtr scene, FieldPtr object,
                    const Eigen::Vector3d& mask_center, double mask_radius)
      : scene_(std::move(scene)),
        object_(std::move(object)),
        center_(mask_center),
        radius_(mask_radius) {
    if (!scene_ || !object_) throw std::invalid_argument("null field");
    if (radius_ < 0.0) throw std::invalid_argument("mask radius < 0");
    bounds_ = scene_->bounds().merged(object_->bounds());
  }

  double value(const Eigen::Vector3d& p) const override {
    double scene_v = scene_->value(p);
    if (radius_ > 0.0) {
      const double ball = (p - center_).norm() - radius_;
      if (ball < 0.0) scene_v = std::max(scene_v, -ball);
    }
    return std::min(scene_v, object_->value(p));
  }

  Aabb bounds() const override { return bounds_; }

  const Eigen::Vector3d& mask_center() const { return center_; }
  double mask_radius() const { return radius_; }

private:
  FieldPtr scene_;
  FieldPtr object_;
  Eigen::Vector3d center_;
  double radius_;
  Aabb bounds_;
};

/// @brief Composite field placing a library object (the registered one, or a
/// replacement) into the scene at the registered transform.
///
/// `registered` is the scene-to-canonical transform produced by
/// registration; the object is posed with it directly. The mask ball covers
/// 1.1 x the posed object's bounding radius around its scene-frame center.
inline FieldPtr compose_substitution(const SceneSpec& scene,
                                     const ObjectLibrary& library,
                                     const std::string& object_id,
                                     const SimTransform& registered,
                                     const std::string& replacement_id = "",
                                     double mask_radius_factor = 1.1) {
  if (!library.contains(object_id))
    throw std::invalid_argument("unknown library object: " + object_id);
  const std::string insert_id =
      replacement_id.empty() ? object_id : replacement_id;
  if (!library.contains(insert_id))
    throw std::invalid_argument("unknown replacement object: " + insert_id);

  const FieldPtr scene_field = build_scene_field(scene, library);
  const LibraryObject& insert = library.at(insert_id);
  const FieldPtr posed = make_posed(insert.field, registered);

  const SimTransform placement = inverse(registered);
  const Eigen::Vector3d center = placement.apply(insert.centroid());
  const double radius =
      mask_radius_factor * insert.bounding_radius * placement.scale;
  return std::make_shared<SubstitutionField>(scene_field, posed, center,
                                             radius);
}

}  // namespace sdfreg

// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include <sdfreg/field.hpp>
#include <sdfreg/grid.hpp>
#include <sdfreg/rng.hpp>
#include <sdfreg/transform.hpp>

namespace sdfreg {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Transform and field (de)serialization
// ---------------------------------------------------------------------------

inline json transform_to_json(const SimTransform& g) {
  return json{{"translation", {g.translation.x(), g.translation.y(),
                               g.translation.z()}},
              {"euler_xyz", {g.euler_xyz.x(), g.euler_xyz.y(), g.euler_xyz.z()}},
              {"scale", g.scale},
              {"euler_convention", kEulerConvention}};
}

inline SimTransform transform_from_json(const json& j) {
  if (j.contains("euler_convention") &&
      j.at("euler_convention").get<std::string>() != kEulerConvention)
    throw std::invalid_argument("unsupported euler convention: " +
                                j.at("euler_convention").get<std::string>());
  SimTransform g;
  const auto& t = j.at("translation");
  const auto& e = j.at("euler_xyz");
  g.translation = Eigen::Vector3d(t.at(0), t.at(1), t.at(2));
  g.euler_xyz = Eigen::Vector3d(e.at(0), e.at(1), e.at(2));
  g.scale = j.at("scale").get<double>();
  if (!(g.scale > 0.0)) throw std::invalid_argument("scale must be positive");
  return g;
}

inline json grid_header_to_json(const GridField& grid,
                                const std::string& blob_name) {
  const Aabb b = grid.bounds();
  return json{{"schema_version", kSchemaVersion},
              {"resolution", {grid.resolution().x(), grid.resolution().y(),
                              grid.resolution().z()}},
              {"bounds",
               {{"min", {b.min.x(), b.min.y(), b.min.z()}},
                {"max", {b.max.x(), b.max.y(), b.max.z()}}}},
              {"seed", grid.seed()},
              {"noise_amplitude", grid.noise_amplitude()},
              {"blob", blob_name},
              {"dtype", "float32-le"},
              {"order", "x-fastest"}};
}

/// Writes header JSON and the raw lattice blob next to each other.
inline void save_grid(const GridField& grid, const std::string& header_path) {
  const std::filesystem::path hp(header_path);
  const std::string blob_name = hp.stem().string() + ".bin";
  const json header = grid_header_to_json(grid, blob_name);
  std::ofstream out(header_path);
  if (!out) throw std::runtime_error("cannot write grid header: " + header_path);
  out << header.dump(2) << "\n";
  write_grid_blob(grid, (hp.parent_path() / blob_name).string());
}

inline GridPtr load_grid(const std::string& header_path) {
  std::ifstream in(header_path);
  if (!in) throw std::runtime_error("cannot read grid header: " + header_path);
  json header;
  in >> header;
  const auto& r = header.at("resolution");
  const Eigen::Vector3i res(r.at(0).get<int>(), r.at(1).get<int>(),
                            r.at(2).get<int>());
  const auto& b = header.at("bounds");
  Aabb bounds;
  bounds.min = Eigen::Vector3d(b.at("min").at(0), b.at("min").at(1),
                               b.at("min").at(2));
  bounds.max = Eigen::Vector3d(b.at("max").at(0), b.at("max").at(1),
                               b.at("max").at(2));
  const std::filesystem::path hp(header_path);
  const std::string blob =
      (hp.parent_path() / header.at("blob").get<std::string>()).string();
  const std::size_t count = static_cast<std::size_t>(res.x()) * res.y() * res.z();
  return std::make_shared<GridField>(
      res, bounds, read_grid_blob(blob, count),
      header.value("seed", std::uint64_t{0}),
      header.value("noise_amplitude", 0.0));
}

inline json field_to_json(const SdfField& field);

inline json field_to_json(const FieldPtr& field) { return field_to_json(*field); }

inline json field_to_json(const SdfField& field) {
  if (const auto* f = dynamic_cast<const SphereField*>(&field))
    return json{{"type", "sphere"}, {"radius", f->radius()}};
  if (const auto* f = dynamic_cast<const BoxField*>(&field)) {
    const auto& h = f->half_extents();
    return json{{"type", "box"}, {"half_extents", {h.x(), h.y(), h.z()}}};
  }
  if (const auto* f = dynamic_cast<const CylinderField*>(&field))
    return json{{"type", "cylinder"},
                {"radius", f->radius()},
                {"half_height", f->half_height()}};
  if (const auto* f = dynamic_cast<const RoundedBoxField*>(&field)) {
    const auto& h = f->half_extents();
    return json{{"type", "rounded_box"},
                {"half_extents", {h.x(), h.y(), h.z()}},
                {"rounding", f->rounding()}};
  }
  if (const auto* f = dynamic_cast<const UnionField*>(&field)) {
    json children = json::array();
    for (const auto& child : f->children()) children.push_back(field_to_json(child));
    return json{{"type", "union"}, {"children", std::move(children)}};
  }
  if (const auto* f = dynamic_cast<const PosedField*>(&field)) {
    return json{{"type", "placed"},
                {"child", field_to_json(f->child())},
                {"placement", transform_to_json(inverse(f->to_child()))}};
  }
  throw std::invalid_argument("field type not serializable to JSON");
}

inline FieldPtr field_from_json(const json& j, const std::string& base_dir = ".") {
  const std::string type = j.at("type").get<std::string>();
  if (type == "sphere") return make_sphere(j.at("radius").get<double>());
  if (type == "box") {
    const auto& h = j.at("half_extents");
    return make_box(Eigen::Vector3d(h.at(0), h.at(1), h.at(2)));
  }
  if (type == "cylinder")
    return make_cylinder(j.at("radius").get<double>(),
                         j.at("half_height").get<double>());
  if (type == "rounded_box") {
    const auto& h = j.at("half_extents");
    return make_rounded_box(Eigen::Vector3d(h.at(0), h.at(1), h.at(2)),
                            j.at("rounding").get<double>());
  }
  if (type == "union") {
    std::vector<FieldPtr> children;
    for (const auto& c : j.at("children"))
      children.push_back(field_from_json(c, base_dir));
    return make_union(std::move(children));
  }
  if (type == "placed")
    return make_placed(field_from_json(j.at("child"), base_dir),
                       transform_from_json(j.at("placement")));
  if (type == "grid")
    return load_grid(
        (std::filesystem::path(base_dir) / j.at("header").get<std::string>())
            .string());
  throw std::invalid_argument("unknown field type: " + type);
}

// ---------------------------------------------------------------------------
// Object library and scene description
// ---------------------------------------------------------------------------

struct LibraryObject {
  FieldPtr field;
  double bounding_radius{0.0};

  Eigen::Vector3d centroid() const { return field->bounds().center(); }
};

/// @brief Named canonical object fields available for registration.
struct ObjectLibrary {
  std::map<std::string, LibraryObject> objects;

  const LibraryObject& at(const std::string& id) const {
    const auto it = objects.find(id);
    if (it == objects.end())
      throw std::invalid_argument("unknown library object: " + id);
    return it->second;
  }
  bool contains(const std::string& id) const { return objects.count(id) > 0; }
};

struct PlacedObject {
  std::string library_id;
  SimTransform placement;  ///< canonical -> scene map (the pose of the object)
};

/// @brief Declarative scene: a room field plus ground-truth object
/// placements. The evaluable scene field is the union of the room and the
/// placed objects, or an explicit grid stand-in when one is attached.
struct SceneSpec {
  std::string name;
  std::uint64_t seed{0};
  double scene_radius{0.0};
  FieldPtr room;
  std::vector<PlacedObject> objects;
  GridPtr grid_override;           ///< optional discretized scene field
  std::string grid_header_path;    ///< set when the override came from disk

  const PlacedObject& placed(const std::string& library_id) const {
    for (const auto& obj : objects)
      if (obj.library_id == library_id) return obj;
    throw std::invalid_argument("object not placed in scene: " + library_id);
  }
};

/// Evaluable scene field (room plus placed objects, or the grid override).
inline FieldPtr build_scene_field(const SceneSpec& scene,
                                  const ObjectLibrary& library) {
  if (scene.grid_override) return scene.grid_override;
  std::vector<FieldPtr> parts;
  parts.push_back(scene.room);
  for (const auto& obj : scene.objects)
    parts.push_back(make_placed(library.at(obj.library_id).field, obj.placement));
  return make_union(std::move(parts));
}

/// The ground-truth registration transform for a placed object: the
/// scene-to-canonical map, i.e. the inverse of the placement.
inline SimTransform ground_truth_transform(const PlacedObject& obj) {
  return inverse(obj.placement);
}

inline json scene_to_json(const SceneSpec& scene) {
  json objects = json::array();
  for (const auto& obj : scene.objects)
    objects.push_back(json{{"library_id", obj.library_id},
                           {"placement", transform_to_json(obj.placement)}});
  json j{{"schema_version", kSchemaVersion},
         {"name", scene.name},
         {"seed", scene.seed},
         {"scene_radius", scene.scene_radius},
         {"euler_convention", kEulerConvention},
         {"room", field_to_json(scene.room)},
         {"objects", std::move(objects)}};
  if (!scene.grid_header_path.empty())
    j["grid"] = json{{"header", scene.grid_header_path}};
  return j;
}

inline SceneSpec scene_from_json(const json& j, const std::string& base_dir = ".") {
  SceneSpec scene;
  scene.name = j.value("name", std::string{});
  scene.seed = j.value("seed", std::uint64_t{0});
  scene.scene_radius = j.at("scene_radius").get<double>();
  if (!(scene.scene_radius > 0.0))
    throw std::invalid_argument("scene_radius must be positive");
  scene.room = field_from_json(j.at("room"), base_dir);
  for (const auto& o : j.at("objects"))
    scene.objects.push_back(
        {o.at("library_id").get<std::string>(),
         transform_from_json(o.at("placement"))});
  if (j.contains("grid")) {
    scene.grid_header_path = j.at("grid").at("header").get<std::string>();
    scene.grid_override = load_grid(
        (std::filesystem::path(base_dir) / scene.grid_header_path).string());
  }
  return scene;
}

inline json library_to_json(const ObjectLibrary& library) {
  json objects = json::object();
  for (const auto& [id, obj] : library.objects)
    objects[id] = json{{"bounding_radius", obj.bounding_radius},
                       {"field", field_to_json(obj.field)}};
  return json{{"schema_version", kSchemaVersion}, {"objects", std::move(objects)}};
}

inline ObjectLibrary library_from_json(const json& j,
                                       const std::string& base_dir = ".") {
  ObjectLibrary library;
  for (const auto& [id, entry] : j.at("objects").items()) {
    LibraryObject obj;
    obj.field = field_from_json(entry.at("field"), base_dir);
    obj.bounding_radius = entry.contains("bounding_radius")
                              ? entry.at("bounding_radius").get<double>()
                              : obj.field->bounds().bounding_radius();
    library.objects.emplace(id, std::move(obj));
  }
  return library;
}

inline void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << j.dump(2) << "\n";
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j;
  in >> j;
  return j;
}

// ---------------------------------------------------------------------------
// Procedural object library and scenes
// ---------------------------------------------------------------------------

namespace detail {

inline FieldPtr place_part(FieldPtr part, const Eigen::Vector3d& at) {
  return make_placed(std::move(part),
                     SimTransform(at, Eigen::Vector3d::Zero(), 1.0));
}

inline FieldPtr chair(double seat_hx, double seat_hy, double seat_z,
                      double back_hz, double back_hy, double leg_r,
                      bool arms, bool rounded) {
  std::vector<FieldPtr> parts;
  const double seat_top = seat_z;
  const double seat_hz = 0.03;
  FieldPtr seat =
      rounded ? make_rounded_box(
                    Eigen::Vector3d(seat_hx - 0.02, seat_hy - 0.02, seat_hz),
                    0.02)
              : make_box(Eigen::Vector3d(seat_hx, seat_hy, seat_hz));
  parts.push_back(place_part(seat, {0, 0, seat_top - seat_hz}));
  // Back panel sits on the -x edge; the +x side is the open front.
  parts.push_back(place_part(
      make_box(Eigen::Vector3d(0.03, back_hy, back_hz)),
      {-(seat_hx - 0.03), 0, seat_top + back_hz}));
  const double leg_hh = 0.5 * (seat_top - 2.0 * seat_hz);
  for (const double sx : {-1.0, 1.0})
    for (const double sy : {-1.0, 1.0})
      parts.push_back(place_part(
          make_cylinder(leg_r, leg_hh),
          {sx * (seat_hx - 2.0 * leg_r), sy * (seat_hy - 2.0 * leg_r), leg_hh}));
  if (arms)
    for (const double sy : {-1.0, 1.0})
      parts.push_back(place_part(
          make_box(Eigen::Vector3d(seat_hx - 0.04, 0.02, 0.015)),
          {0.0, sy * (seat_hy + 0.02), seat_top + 0.16}));
  return make_union(std::move(parts));
}

inline FieldPtr table_rect(double hx, double hy, double top_z, double leg_r,
                           bool apron) {
  std::vector<FieldPtr> parts;
  const double top_hz = 0.025;
  parts.push_back(place_part(make_box(Eigen::Vector3d(hx, hy, top_hz)),
                             {0, 0, top_z - top_hz}));
  const double leg_hh = 0.5 * (top_z - 2.0 * top_hz);
  for (const double sx : {-1.0, 1.0})
    for (const double sy : {-1.0, 1.0})
      parts.push_back(place_part(
          make_cylinder(leg_r, leg_hh),
          {sx * (hx - 3.0 * leg_r), sy * (hy - 3.0 * leg_r), leg_hh}));
  if (apron)  // drawer block under one end; breaks the 180-degree symmetry
    parts.push_back(place_part(
        make_box(Eigen::Vector3d(0.16, hy - 0.06, 0.06)),
        {hx - 0.22, 0, top_z - 2.0 * top_hz - 0.06}));
  return make_union(std::move(parts));
}

inline FieldPtr table_pedestal(double top_r, double top_z) {
  std::vector<FieldPtr> parts;
  parts.push_back(
      place_part(make_cylinder(top_r, 0.02), {0, 0, top_z - 0.02}));
  const double col_hh = 0.5 * (top_z - 0.08);
  parts.push_back(place_part(make_cylinder(0.04, col_hh), {0, 0, col_hh + 0.04}));
  parts.push_back(place_part(make_cylinder(top_r * 0.7, 0.02), {0, 0, 0.02}));
  return make_union(std::move(parts));
}

}  // namespace detail

/// Builds the standard canonical object library: five chair variants and
/// three tables, all with their base plane at z = 0.
inline ObjectLibrary make_standard_library() {
  ObjectLibrary lib;
  auto add = [&lib](const std::string& id, FieldPtr field) {
    LibraryObject obj;
    obj.bounding_radius = field->bounds().bounding_radius();
    obj.field = std::move(field);
    lib.objects.emplace(id, std::move(obj));
  };
  add("chair_basic", detail::chair(0.22, 0.20, 0.42, 0.25, 0.20, 0.025, false, false));
  add("chair_tall", detail::chair(0.20, 0.19, 0.46, 0.34, 0.19, 0.022, false, false));
  add("chair_wide", detail::chair(0.30, 0.24, 0.40, 0.22, 0.24, 0.028, true, false));
  add("chair_round", detail::chair(0.23, 0.21, 0.43, 0.24, 0.17, 0.026, false, true));
  add("chair_arm", detail::chair(0.24, 0.21, 0.44, 0.28, 0.21, 0.024, true, false));
  add("table_long", detail::table_rect(0.55, 0.30, 0.70, 0.03, true));
  add("table_side", detail::table_rect(0.30, 0.22, 0.55, 0.025, false));
  add("table_end", detail::table_pedestal(0.24, 0.52));
  return lib;
}

/// @brief Scene generation parameters.
struct GenerationParams {
  int objects_in_scene{3};
  double room_half_extent{2.0};
  double gt_scale{1.0};   ///< scene-to-canonical scale; placement uses 1/gt_scale
  double max_yaw{2.0 * M_PI};
  std::vector<std::string> object_ids;  ///< empty: deterministic pick from library
};

struct GenerationResult {
  SceneSpec scene;
  ObjectLibrary library;
  std::vector<std::string> log;
};

/// @brief Deterministic synthetic scene: a room shell (floor plus two walls)
/// with library objects placed at seeded poses.
///
/// Overlapping placements are rejected and regenerated with the next
/// sub-seed; each rejection is logged.
inline GenerationResult generate_onr_like(std::uint64_t seed,
                                          const GenerationParams& params = {}) {
  if (params.objects_in_scene < 1)
    throw std::invalid_argument("need at least one object in the scene");
  if (!(params.gt_scale > 0.0))
    throw std::invalid_argument("gt_scale must be positive");
  GenerationResult result;
  result.library = make_standard_library();

  std::vector<std::string> ids = params.object_ids;
  if (ids.empty()) {
    // Deterministic default mix: alternate chairs and tables.
    const std::vector<std::string> pool{"chair_basic", "table_long",
                                        "chair_tall",  "table_side",
                                        "chair_wide",  "chair_arm",
                                        "chair_round", "table_end"};
    for (int i = 0; i < params.objects_in_scene; ++i)
      ids.push_back(pool[i % pool.size()]);
  }
  for (const auto& id : ids)
    if (!result.library.contains(id))
      throw std::invalid_argument("unknown library object: " + id);

  const double rh = params.room_half_extent;
  std::vector<FieldPtr> room_parts;
  room_parts.push_back(detail::place_part(
      make_box(Eigen::Vector3d(rh, rh, 0.05)), {0, 0, -0.05}));
  room_parts.push_back(detail::place_part(
      make_box(Eigen::Vector3d(0.05, rh, 0.6)), {-(rh + 0.05), 0, 0.6}));
  room_parts.push_back(detail::place_part(
      make_box(Eigen::Vector3d(rh, 0.05, 0.6)), {0, -(rh + 0.05), 0.6}));

  SceneSpec scene;
  scene.seed = seed;
  scene.name = "room_" + std::to_string(seed);
  scene.room = make_union(std::move(room_parts));

  const double placement_scale = 1.0 / params.gt_scale;
  Rng rng(seed);
  Rng pose_rng = rng.fork(hash_label("poses"));
  std::vector<Eigen::Vector3d> centers;
  std::vector<double> radii;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const LibraryObject& obj = result.library.at(ids[i]);
    const double scene_r = obj.bounding_radius * placement_scale;
    const double margin = std::min(0.9 * rh, rh - scene_r - 0.05);
    SimTransform placement;
    bool placed_ok = false;
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
      Rng attempt_rng =
          attempt == 0 ? pose_rng.fork(i)
                       : pose_rng.fork(hash_label("retry") + i * 64 + attempt);
      const double x = attempt_rng.uniform(-margin, margin);
      const double y = attempt_rng.uniform(-margin, margin);
      const double yaw = attempt_rng.uniform(0.0, params.max_yaw);
      placement = SimTransform({x, y, 0.0}, {0.0, 0.0, yaw}, placement_scale);
      const Eigen::Vector3d center =
          placement.apply(obj.centroid());
      bool overlaps = false;
      for (std::size_t k = 0; k < centers.size(); ++k)
        if ((centers[k] - center).norm() < 0.95 * (radii[k] + scene_r))
          overlaps = true;
      if (!overlaps) {
        centers.push_back(center);
        radii.push_back(scene_r);
        placed_ok = true;
        break;
      }
      result.log.push_back("overlap: retrying placement of " + ids[i] +
                           " (attempt " + std::to_string(attempt + 1) + ")");
    }
    if (!placed_ok)
      throw std::runtime_error("could not place object without overlap: " +
                               ids[i]);
    scene.objects.push_back({ids[i], placement});
  }

  // Declared radius: bounding sphere of the composed field's bounds.
  scene.scene_radius =
      build_scene_field(scene, result.library)->bounds().bounding_radius();
  result.scene = std::move(scene);
  return result;
}

}  // namespace sdfreg

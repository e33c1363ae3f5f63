// SPDX-License-Identifier: MIT
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include <sdfreg/coarse_init.hpp>
#include <sdfreg/grid.hpp>
#include <sdfreg/parallel.hpp>
#include <sdfreg/registration.hpp>
#include <sdfreg/sampling.hpp>
#include <sdfreg/scene.hpp>
#include <sdfreg/transform.hpp>

namespace sdfreg {

// ---------------------------------------------------------------------------
// Run configuration (sampler + coarse init + optimizer), JSON-serializable
// ---------------------------------------------------------------------------

struct RunConfig {
  SamplerConfig sampler;
  CoarseConfig coarse;
  OptimizerConfig optimizer;
  int workers{1};
  bool single_rear_view{false};  ///< scene sampled from one rear view only
};

inline json config_to_json(const RunConfig& cfg) {
  return json{
      {"sampler",
       {{"omega1", cfg.sampler.omega1},
        {"omega2", cfg.sampler.omega2},
        {"xi", cfg.sampler.xi},
        {"rho", cfg.sampler.rho},
        {"max_samples", cfg.sampler.max_samples},
        {"num_views", cfg.sampler.num_views},
        {"ray_grid_width", cfg.sampler.ray_grid_width},
        {"ray_grid_height", cfg.sampler.ray_grid_height},
        {"view_radius_factor", cfg.sampler.view_radius_factor},
        {"fov_margin", cfg.sampler.fov_margin},
        {"far_filter_factor", cfg.sampler.far_filter_factor},
        {"dedup_spacing_factor", cfg.sampler.dedup_spacing_factor}}},
      {"coarse",
       {{"voxel", cfg.coarse.voxel},
        {"normal_radius_factor", cfg.coarse.normal_radius_factor},
        {"fpfh_radius_factor", cfg.coarse.fpfh_radius_factor},
        {"ransac_max_iterations", cfg.coarse.ransac_max_iterations},
        {"ransac_confidence", cfg.coarse.ransac_confidence},
        {"inlier_threshold_factor", cfg.coarse.inlier_threshold_factor},
        {"icp_max_iterations", cfg.coarse.icp_max_iterations},
        {"icp_threshold_factor", cfg.coarse.icp_threshold_factor},
        {"icp_update_eps", cfg.coarse.icp_update_eps}}},
      {"optimizer",
       {{"lr_rotation", cfg.optimizer.lr_rotation},
        {"lr_translation", cfg.optimizer.lr_translation},
        {"lr_scale", cfg.optimizer.lr_scale},
        {"lr_kernel", cfg.optimizer.lr_kernel},
        {"max_iterations", cfg.optimizer.max_iterations},
        {"resample_period", cfg.optimizer.resample_period},
        {"early_stop_threshold", cfg.optimizer.early_stop_threshold},
        {"regularizer_weight", cfg.optimizer.regularizer_weight},
        {"use_backward", cfg.optimizer.use_backward},
        {"use_resampling", cfg.optimizer.use_resampling},
        {"kernel_p_init_factor", cfg.optimizer.kernel_p_init_factor},
        {"kernel_alpha_init", cfg.optimizer.kernel_alpha_init},
        {"kernel_p_min", cfg.optimizer.kernel_p_min},
        {"kernel_alpha_min", cfg.optimizer.kernel_alpha_min},
        {"kernel_alpha_max", cfg.optimizer.kernel_alpha_max},
        {"scale_min", cfg.optimizer.scale_min},
        {"scale_max", cfg.optimizer.scale_max},
        {"min_samples", cfg.optimizer.min_samples}}},
      {"workers", cfg.workers},
      {"single_rear_view", cfg.single_rear_view}};
}

inline RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  auto get = [](const json& src, const char* key, auto& out) {
    if (src.contains(key)) out = src.at(key).get<std::decay_t<decltype(out)>>();
  };
  if (j.contains("sampler")) {
    const json& s = j.at("sampler");
    get(s, "omega1", cfg.sampler.omega1);
    get(s, "omega2", cfg.sampler.omega2);
    get(s, "xi", cfg.sampler.xi);
    get(s, "rho", cfg.sampler.rho);
    get(s, "max_samples", cfg.sampler.max_samples);
    get(s, "num_views", cfg.sampler.num_views);
    get(s, "ray_grid_width", cfg.sampler.ray_grid_width);
    get(s, "ray_grid_height", cfg.sampler.ray_grid_height);
    get(s, "view_radius_factor", cfg.sampler.view_radius_factor);
    get(s, "fov_margin", cfg.sampler.fov_margin);
    get(s, "far_filter_factor", cfg.sampler.far_filter_factor);
    get(s, "dedup_spacing_factor", cfg.sampler.dedup_spacing_factor);
  }
  if (j.contains("coarse")) {
    const json& c = j.at("coarse");
    get(c, "voxel", cfg.coarse.voxel);
    get(c, "normal_radius_factor", cfg.coarse.normal_radius_factor);
    get(c, "fpfh_radius_factor", cfg.coarse.fpfh_radius_factor);
    get(c, "ransac_max_iterations", cfg.coarse.ransac_max_iterations);
    get(c, "ransac_confidence", cfg.coarse.ransac_confidence);
    get(c, "inlier_threshold_factor", cfg.coarse.inlier_threshold_factor);
    get(c, "icp_max_iterations", cfg.coarse.icp_max_iterations);
    get(c, "icp_threshold_factor", cfg.coarse.icp_threshold_factor);
    get(c, "icp_update_eps", cfg.coarse.icp_update_eps);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    get(o, "lr_rotation", cfg.optimizer.lr_rotation);
    get(o, "lr_translation", cfg.optimizer.lr_translation);
    get(o, "lr_scale", cfg.optimizer.lr_scale);
    get(o, "lr_kernel", cfg.optimizer.lr_kernel);
    get(o, "max_iterations", cfg.optimizer.max_iterations);
    get(o, "resample_period", cfg.optimizer.resample_period);
    get(o, "early_stop_threshold", cfg.optimizer.early_stop_threshold);
    get(o, "regularizer_weight", cfg.optimizer.regularizer_weight);
    get(o, "use_backward", cfg.optimizer.use_backward);
    get(o, "use_resampling", cfg.optimizer.use_resampling);
    get(o, "kernel_p_init_factor", cfg.optimizer.kernel_p_init_factor);
    get(o, "kernel_alpha_init", cfg.optimizer.kernel_alpha_init);
    get(o, "kernel_p_min", cfg.optimizer.kernel_p_min);
    get(o, "kernel_alpha_min", cfg.optimizer.kernel_alpha_min);
    get(o, "kernel_alpha_max", cfg.optimizer.kernel_alpha_max);
    get(o, "scale_min", cfg.optimizer.scale_min);
    get(o, "scale_max", cfg.optimizer.scale_max);
    get(o, "min_samples", cfg.optimizer.min_samples);
  }
  get(j, "workers", cfg.workers);
  get(j, "single_rear_view", cfg.single_rear_view);
  return cfg;
}

// ---------------------------------------------------------------------------
// Single pipeline run
// ---------------------------------------------------------------------------

struct RunResult {
  std::string scene_name;
  std::string object_id;
  std::string variant;  ///< ablation label, empty for plain runs
  std::uint64_t seed{0};
  SimTransform estimate;
  SimTransform ground_truth;
  TransformError error;
  bool converged{false};
  bool coarse_converged{false};
  bool early_stopped{false};
  int iterations{0};
  double wall_time_ms{0.0};  ///< excluded from canonical reports
  CoarseResult coarse;
  OptimizeResult optimize;
};

/// @brief Full registration pipeline for one (scene, object, seed) cell:
/// multi-view sampling of both fields, automated coarse initialization, and
/// the robust bidirectional optimization, scored against the ground truth.
inline RunResult run_registration(const SceneSpec& scene,
                                  const ObjectLibrary& library,
                                  const std::string& object_id, RunConfig cfg,
                                  std::uint64_t seed) {
  const auto t_start = std::chrono::steady_clock::now();
  RunResult result;
  result.scene_name = scene.name;
  result.object_id = object_id;
  result.seed = seed;

  const PlacedObject& placed = scene.placed(object_id);
  const LibraryObject& object = library.at(object_id);
  result.ground_truth = ground_truth_transform(placed);

  const FieldPtr scene_field = build_scene_field(scene, library);
  const FieldPtr object_field = object.field;

  // Detection stand-in: ground-truth centroid and bounding radius.
  const Eigen::Vector3d canonical_centroid = object.centroid();
  const Eigen::Vector3d scene_centroid = placed.placement.apply(canonical_centroid);
  const double scene_obj_radius = object.bounding_radius * placed.placement.scale;

  if (cfg.sampler.rho <= 0.0) cfg.sampler.rho = scene.scene_radius / 20.0;
  if (cfg.coarse.voxel <= 0.0) cfg.coarse.voxel = scene.scene_radius / 50.0;

  Rng rng(seed);
  const std::uint64_t coarse_seed = rng.fork(hash_label("coarse")).next_u64();
  const std::uint64_t opt_seed = rng.fork(hash_label("optimize")).next_u64();

  SurfacePointSet samples_scene;
  if (cfg.single_rear_view) {
    // One challenging view from behind the object (canonical -x side).
    const Eigen::Vector3d back_dir =
        (placed.placement.rotation() * Eigen::Vector3d(-1, 0, 0)).normalized();
    const double elevation = M_PI / 6.0;
    const double view_radius = cfg.sampler.view_radius_factor * scene_obj_radius;
    ViewPose rear;
    rear.position =
        scene_centroid +
        view_radius * (std::cos(elevation) * back_dir +
                       std::sin(elevation) * Eigen::Vector3d(0, 0, 1));
    rear.target = scene_centroid;
    rear.up_hint = Eigen::Vector3d(0, 0, 1);
    const std::vector<ViewPose> single{rear};
    samples_scene = multi_view_surface_sample(*scene_field, scene_centroid,
                                              scene_obj_radius, cfg.sampler,
                                              cfg.workers, &single);
  } else {
    samples_scene = multi_view_surface_sample(*scene_field, scene_centroid,
                                              scene_obj_radius, cfg.sampler,
                                              cfg.workers);
  }
  const SurfacePointSet samples_object = multi_view_surface_sample(
      *object_field, canonical_centroid, object.bounding_radius, cfg.sampler,
      cfg.workers);

  result.coarse =
      coarse_initialize(samples_scene, samples_object, cfg.coarse, coarse_seed);
  result.coarse_converged = result.coarse.converged;
  SimTransform init = result.coarse.transform;
  if (!result.coarse_converged) {
    // Fallback: identity rotation/scale with a centroid-matching offset.
    init = SimTransform(canonical_centroid - scene_centroid,
                        Eigen::Vector3d::Zero(), 1.0);
  }

  OptimizeOptions opts;
  opts.ground_truth = &result.ground_truth;
  opts.scene_radius = scene.scene_radius;
  result.optimize =
      optimize(*scene_field, *object_field, init, samples_scene, samples_object,
               cfg.optimizer, cfg.sampler, opt_seed, opts);

  result.estimate = result.optimize.transform;
  result.converged = result.optimize.converged;
  result.early_stopped = result.optimize.early_stopped;
  result.iterations = result.optimize.iterations;
  result.error = transform_error(result.estimate, result.ground_truth);
  result.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                t_start)
          .count();
  return result;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct AggregateRow {
  std::string scene_name;
  std::string object_id;
  std::string variant;
  std::size_t seed_count{0};
  std::size_t converged_count{0};
  double rmse_delta_t{0.0};
  double rmse_delta_r{0.0};
  double rmse_delta_s{0.0};
  double median_delta_t{0.0};
  double median_delta_r{0.0};
};

/// @brief Per-seed rows plus aggregates derived exactly from them.
struct ExperimentReport {
  std::vector<RunResult> rows;

  std::vector<AggregateRow> aggregates() const {
    std::vector<AggregateRow> out;
    auto find = [&out](const RunResult& row) -> AggregateRow& {
      for (auto& agg : out)
        if (agg.scene_name == row.scene_name &&
            agg.object_id == row.object_id && agg.variant == row.variant)
          return agg;
      AggregateRow agg;
      agg.scene_name = row.scene_name;
      agg.object_id = row.object_id;
      agg.variant = row.variant;
      out.push_back(agg);
      return out.back();
    };
    for (const auto& row : rows) {
      AggregateRow& agg = find(row);
      ++agg.seed_count;
      if (row.converged) ++agg.converged_count;
      agg.rmse_delta_t += row.error.delta_t * row.error.delta_t;
      agg.rmse_delta_r += row.error.delta_r * row.error.delta_r;
      agg.rmse_delta_s += row.error.delta_s * row.error.delta_s;
    }
    for (auto& agg : out) {
      const double n = static_cast<double>(agg.seed_count);
      agg.rmse_delta_t = std::sqrt(agg.rmse_delta_t / n);
      agg.rmse_delta_r = std::sqrt(agg.rmse_delta_r / n);
      agg.rmse_delta_s = std::sqrt(agg.rmse_delta_s / n);
    }
    // Medians need the grouped samples.
    for (auto& agg : out) {
      std::vector<double> dts, drs;
      for (const auto& row : rows)
        if (agg.scene_name == row.scene_name &&
            agg.object_id == row.object_id && agg.variant == row.variant) {
          dts.push_back(row.error.delta_t);
          drs.push_back(row.error.delta_r);
        }
      auto median = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
      };
      agg.median_delta_t = median(dts);
      agg.median_delta_r = median(drs);
    }
    return out;
  }
};

inline json run_result_to_json(const RunResult& row) {
  return json{{"scene", row.scene_name},
              {"object", row.object_id},
              {"variant", row.variant},
              {"seed", row.seed},
              {"delta_t", row.error.delta_t},
              {"delta_r", row.error.delta_r},
              {"delta_s", row.error.delta_s},
              {"converged", row.converged},
              {"coarse_converged", row.coarse_converged},
              {"early_stopped", row.early_stopped},
              {"iterations", row.iterations},
              {"estimate", transform_to_json(row.estimate)},
              {"ground_truth", transform_to_json(row.ground_truth)}};
}

/// Canonical report JSON. Deliberately excludes wall-clock timings so that
/// reruns with identical seeds are byte-identical; timings go to a separate
/// CSV (write_timings_csv).
inline json report_to_json(const ExperimentReport& report,
                           const RunConfig& cfg) {
  json rows = json::array();
  for (const auto& row : report.rows) rows.push_back(run_result_to_json(row));
  json aggregates = json::array();
  for (const auto& agg : report.aggregates())
    aggregates.push_back(json{{"scene", agg.scene_name},
                              {"object", agg.object_id},
                              {"variant", agg.variant},
                              {"seed_count", agg.seed_count},
                              {"converged_count", agg.converged_count},
                              {"rmse_delta_t", agg.rmse_delta_t},
                              {"rmse_delta_r", agg.rmse_delta_r},
                              {"rmse_delta_s", agg.rmse_delta_s},
                              {"median_delta_t", agg.median_delta_t},
                              {"median_delta_r", agg.median_delta_r}});
  return json{{"schema_version", kSchemaVersion},
              {"config", config_to_json(cfg)},
              {"rows", std::move(rows)},
              {"aggregates", std::move(aggregates)}};
}

inline void write_timings_csv(const ExperimentReport& report,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open CSV for write: " + path);
  out << "scene,object,variant,seed,wall_time_ms\n";
  for (const auto& row : report.rows)
    out << row.scene_name << ',' << row.object_id << ',' << row.variant << ','
        << row.seed << ',' << format_double(row.wall_time_ms) << '\n';
}

/// @brief Runs every (object, seed) cell of a benchmark. Cells execute in
/// parallel across cfg.workers; the report order is independent of the
/// worker count.
inline ExperimentReport run_bench(const SceneSpec& scene,
                                  const ObjectLibrary& library,
                                  const std::vector<std::string>& object_ids,
                                  const std::vector<std::uint64_t>& seeds,
                                  const RunConfig& cfg) {
  ExperimentReport report;
  report.rows.resize(object_ids.size() * seeds.size());
  RunConfig cell_cfg = cfg;
  cell_cfg.workers = 1;  // parallelism lives at the cell level
  parallel_for(report.rows.size(), cfg.workers, [&](std::size_t cell) {
    const std::string& object = object_ids[cell / seeds.size()];
    const std::uint64_t seed = seeds[cell % seeds.size()];
    report.rows[cell] = run_registration(scene, library, object, cell_cfg, seed);
    report.rows[cell].optimize.diagnostics = {};  // drop bulky audit data
  });
  return report;
}

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

/// @brief Matched-pair studies. Every suite varies exactly one factor while
/// scene, object, and seeds stay fixed within a pair.
///
/// Suites: "bidirectional" (with/without the backward term),
/// "regularizer-weight" (w in {0, 0.1, 1, 10}), "single-vs-multi-view"
/// (one rear view vs the default ring), "grid-degradation" (scene field
/// discretized at decreasing fidelity).
inline ExperimentReport run_ablation(const std::string& suite,
                                     const RunConfig& cfg,
                                     std::uint64_t base_seed,
                                     int num_seeds,
                                     const std::string& object_id = "chair_basic") {
  struct Variant {
    std::string label;
    RunConfig cfg;
    GridPtr scene_grid;  // optional scene-field override
  };

  ExperimentReport report;
  for (int i = 0; i < num_seeds; ++i) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    GenerationParams params;
    params.object_ids = {object_id, "table_side"};
    const GenerationResult gen = generate_onr_like(seed, params);

    std::vector<Variant> variants;
    if (suite == "bidirectional") {
      Variant with{"bidirectional", cfg, nullptr};
      with.cfg.optimizer.use_backward = true;
      Variant without{"forward-only", cfg, nullptr};
      without.cfg.optimizer.use_backward = false;
      variants = {with, without};
    } else if (suite == "regularizer-weight") {
      for (const double w : {0.0, 0.1, 1.0, 10.0}) {
        Variant v{"w=" + format_double(w), cfg, nullptr};
        v.cfg.optimizer.regularizer_weight = w;
        variants.push_back(v);
      }
    } else if (suite == "single-vs-multi-view") {
      Variant multi{"multi-view", cfg, nullptr};
      multi.cfg.single_rear_view = false;
      Variant single{"single-view", cfg, nullptr};
      single.cfg.single_rear_view = true;
      variants = {multi, single};
    } else if (suite == "grid-degradation") {
      const FieldPtr composite = build_scene_field(gen.scene, gen.library);
      Aabb bounds = composite->bounds();
      const Eigen::Vector3d pad = 0.05 * bounds.extent();
      bounds.min -= pad;
      bounds.max += pad;
      variants.push_back({"composite", cfg, nullptr});
      variants.push_back(
          {"grid128-clean", cfg,
           make_grid_field(*composite, {128, 128, 128}, bounds, 0.0, seed)});
      variants.push_back(
          {"grid32-clean", cfg,
           make_grid_field(*composite, {32, 32, 32}, bounds, 0.0, seed)});
      variants.push_back(
          {"grid32-noisy", cfg,
           make_grid_field(*composite, {32, 32, 32}, bounds, 0.05, seed)});
    } else {
      throw std::invalid_argument("unknown ablation suite: " + suite);
    }

    for (const auto& variant : variants) {
      SceneSpec scene = gen.scene;
      scene.grid_override = variant.scene_grid;
      RunResult row =
          run_registration(scene, gen.library, object_id, variant.cfg, seed);
      row.variant = variant.label;
      row.optimize.diagnostics = {};
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace sdfreg

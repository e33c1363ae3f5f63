// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include <sdfreg/field.hpp>
#include <sdfreg/kdtree.hpp>
#include <sdfreg/point_set.hpp>
#include <sdfreg/robust_kernel.hpp>
#include <sdfreg/sampling.hpp>
#include <sdfreg/transform.hpp>

namespace sdfreg {

/// Parameter layout of the registration problem:
/// (tx, ty, tz, roll, pitch, yaw, scale, kernel p, kernel alpha).
using ParamVector = Eigen::Matrix<double, 9, 1>;

/// @brief Gradient-descent settings. Learning rates are per parameter group.
struct OptimizerConfig {
  double lr_rotation{0.02};
  double lr_translation{0.01};
  double lr_scale{0.01};
  double lr_kernel{0.005};
  int max_iterations{200};
  int resample_period{10};
  double early_stop_threshold{5e-4};  ///< on the mean forward residual
  double regularizer_weight{1.0};
  bool use_backward{true};
  bool use_resampling{true};
  double kernel_p_init_factor{0.1};  ///< p starts at this x scene radius
  double kernel_alpha_init{1.0};
  double kernel_p_min{1e-4};
  double kernel_alpha_min{-10.0};
  double kernel_alpha_max{2.0};
  double scale_min{1e-3};
  double scale_max{1e3};
  std::size_t min_samples{10};
};

/// @brief Mutable registration state: the current transform estimate, the
/// learnable kernel, and the two evolving sample sets.
struct RegistrationState {
  SimTransform transform;
  RobustKernelParams kernel;
  SurfacePointSet samples_a;  ///< from the source (scene) field
  SurfacePointSet samples_b;  ///< from the target (object) field
  int iteration{0};
  std::vector<double> loss_history;
};

// ---------------------------------------------------------------------------
// Residuals (scale-corrected so both terms are metric in the query frame)
// ---------------------------------------------------------------------------

/// |S_src(x) - S_tgt(g x) / s|: difference between the source field value at
/// x and the scale-corrected target value at the transformed point.
inline double residual_forward(const Eigen::Vector3d& x, const SdfField& src,
                               const SdfField& tgt, const SimTransform& g) {
  return std::abs(src.value(x) - tgt.value(g.apply(x)) / g.scale);
}

/// Symmetric form for samples of the target field, using the inverse
/// transform with the reciprocal scale correction.
inline double residual_backward(const Eigen::Vector3d& x, const SdfField& tgt,
                                const SdfField& src, const SimTransform& g) {
  return residual_forward(x, tgt, src, inverse(g));
}

/// @brief Mean over a in A of the squared distance from a to the nearest
/// transformed target sample g(b).
///
/// Nearest neighbors are found in the target frame (similarity transforms
/// preserve nearest-neighbor identity); the returned distances are computed
/// in the query frame.
inline double regularizer(const SurfacePointSet& a, const SurfacePointSet& b,
                          const SimTransform& g) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("regularizer: empty sample set");
  const KdTree tree(b.points);
  const SimTransform ginv = inverse(g);
  double sum = 0.0;
  for (const auto& pa : a.points) {
    const auto hit = tree.nearest(ginv.apply(pa));
    sum += (pa - g.apply(b.points[hit.index])).squaredNorm();
  }
  return sum / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Loss evaluation
// ---------------------------------------------------------------------------

struct LossBreakdown {
  double total{0.0};
  double forward{0.0};
  double backward{0.0};
  double regularizer{0.0};
  double mean_forward_residual{0.0};
  double mean_backward_residual{0.0};
};

namespace detail {

inline std::array<Eigen::Matrix3d, 3> rotation_derivatives(
    const Eigen::Vector3d& euler_xyz) {
  const double cr = std::cos(euler_xyz.x()), sr = std::sin(euler_xyz.x());
  const double cp = std::cos(euler_xyz.y()), sp = std::sin(euler_xyz.y());
  const double cy = std::cos(euler_xyz.z()), sy = std::sin(euler_xyz.z());
  Eigen::Matrix3d rx = rot_x(euler_xyz.x()), ry = rot_y(euler_xyz.y()),
                  rz = rot_z(euler_xyz.z());
  Eigen::Matrix3d drx, dry, drz;
  drx << 0, 0, 0, 0, -sr, -cr, 0, cr, -sr;
  dry << -sp, 0, cp, 0, 0, 0, -cp, 0, -sp;
  drz << -sy, -cy, 0, cy, -sy, 0, 0, 0, 0;
  return {rz * ry * drx, rz * dry * rx, drz * ry * rx};
}

}  // namespace detail

/// @brief Shared machinery for loss and gradient evaluation over fixed
/// sample sets. Source values at the samples and the target-frame search
/// tree are cached; they do not depend on the transform.
class LossEvaluator {
public:
  LossEvaluator(const SdfField& source, const SdfField& target,
                const OptimizerConfig& cfg)
      : source_(source), target_(target), cfg_(cfg) {}

  void set_samples(const SurfacePointSet& a, const SurfacePointSet& b) {
    a_ = &a;
    b_ = &b;
    src_values_.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      src_values_[i] = source_.value(a.points[i]);
    tgt_values_.resize(b.size());
    for (std::size_t j = 0; j < b.size(); ++j)
      tgt_values_[j] = target_.value(b.points[j]);
    tree_b_ = KdTree(b.points);
  }

  /// Evaluates the bidirectional loss; fills `grad` when non-null.
  LossBreakdown evaluate(const SimTransform& g, const RobustKernelParams& k,
                         ParamVector* grad) const {
    if (!a_ || !b_) throw std::logic_error("LossEvaluator: samples not set");
    LossBreakdown out;
    ParamVector acc = ParamVector::Zero();
    const Eigen::Matrix3d rot = g.rotation();
    const auto drot = detail::rotation_derivatives(g.euler_xyz);
    const double s = g.scale;
    const SimTransform ginv = inverse(g);

    // Forward term: samples of the source field pushed through g.
    const double inv_na = 1.0 / static_cast<double>(a_->size());
    for (std::size_t i = 0; i < a_->size(); ++i) {
      const Eigen::Vector3d& x = a_->points[i];
      const Eigen::Vector3d y = s * (rot * x) + g.translation;
      const double tv = target_.value(y);
      const double d = src_values_[i] - tv / s;
      const double r = std::abs(d);
      out.forward += kernel(r, k) * inv_na;
      out.mean_forward_residual += r * inv_na;
      if (grad) {
        const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        const double kd = kernel_dr(r, k) * sign * inv_na;
        const Eigen::Vector3d tg = target_.gradient(y);
        acc.segment<3>(0) += kd * (-tg / s);
        for (int ax = 0; ax < 3; ++ax)
          acc[3 + ax] += kd * (-tg.dot(drot[ax] * x));
        acc[6] += kd * (-(tg.dot(rot * x) / s - tv / (s * s)));
        acc[7] += kernel_dp(r, k) * inv_na;
        acc[8] += kernel_dalpha(r, k) * inv_na;
      }
    }

    // Backward term: samples of the target field pulled through g^-1.
    if (cfg_.use_backward) {
      const double inv_nb = 1.0 / static_cast<double>(b_->size());
      for (std::size_t j = 0; j < b_->size(); ++j) {
        const Eigen::Vector3d& x = b_->points[j];
        const Eigen::Vector3d y = ginv.apply(x);
        const double sv = source_.value(y);
        const double d = tgt_values_[j] - s * sv;
        const double r = std::abs(d);
        out.backward += kernel(r, k) * inv_nb;
        out.mean_backward_residual += r * inv_nb;
        if (grad) {
          const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
          const double kd = kernel_dr(r, k) * sign * inv_nb;
          const Eigen::Vector3d sg = source_.gradient(y);
          const Eigen::Vector3d xt = x - g.translation;
          acc.segment<3>(0) += kd * (rot * sg);
          for (int ax = 0; ax < 3; ++ax)
            acc[3 + ax] += kd * (-xt.dot(drot[ax] * sg));
          acc[6] += kd * (-sv + sg.dot(y));
          acc[7] += kernel_dp(r, k) * inv_nb;
          acc[8] += kernel_dalpha(r, k) * inv_nb;
        }
      }
    }

    // Regularizer: nearest-neighbor correspondences held fixed per step.
    if (cfg_.regularizer_weight != 0.0) {
      const double w = cfg_.regularizer_weight * inv_na;
      for (std::size_t i = 0; i < a_->size(); ++i) {
        const Eigen::Vector3d& pa = a_->points[i];
        const auto hit = tree_b_.nearest(ginv.apply(pa));
        const Eigen::Vector3d& pb = b_->points[hit.index];
        const Eigen::Vector3d diff = pa - (s * (rot * pb) + g.translation);
        out.regularizer += diff.squaredNorm() * inv_na;
        if (grad) {
          acc.segment<3>(0) += w * (-2.0 * diff);
          for (int ax = 0; ax < 3; ++ax)
            acc[3 + ax] += w * (-2.0 * diff.dot(s * (drot[ax] * pb)));
          acc[6] += w * (-2.0 * diff.dot(rot * pb));
        }
      }
    }

    out.total = out.forward + out.backward +
                cfg_.regularizer_weight * out.regularizer;
    if (grad) *grad = acc;
    return out;
  }

private:
  const SdfField& source_;
  const SdfField& target_;
  OptimizerConfig cfg_;
  const SurfacePointSet* a_{nullptr};
  const SurfacePointSet* b_{nullptr};
  std::vector<double> src_values_;
  std::vector<double> tgt_values_;
  KdTree tree_b_;
};

/// Bidirectional robust loss at the state's transform and kernel.
inline LossBreakdown total_loss(const RegistrationState& state,
                                const SdfField& source, const SdfField& target,
                                const OptimizerConfig& cfg) {
  LossEvaluator eval(source, target, cfg);
  eval.set_samples(state.samples_a, state.samples_b);
  return eval.evaluate(state.transform, state.kernel, nullptr);
}

/// Analytic gradient of the loss in the 9-parameter layout.
inline ParamVector loss_gradient(const RegistrationState& state,
                                 const SdfField& source, const SdfField& target,
                                 const OptimizerConfig& cfg,
                                 LossBreakdown* breakdown = nullptr) {
  LossEvaluator eval(source, target, cfg);
  eval.set_samples(state.samples_a, state.samples_b);
  ParamVector grad;
  const LossBreakdown b = eval.evaluate(state.transform, state.kernel, &grad);
  if (breakdown) *breakdown = b;
  return grad;
}

// ---------------------------------------------------------------------------
// Optimization loop
// ---------------------------------------------------------------------------

struct IterationRecord {
  int iteration{0};
  LossBreakdown loss;
  double scale{1.0};
  double kernel_p{0.0};
  double kernel_alpha{0.0};
  std::optional<TransformError> error_vs_truth;
};

struct OptimizeDiagnostics {
  std::vector<IterationRecord> history;
  SurfacePointSet initial_a;
  SurfacePointSet initial_b;
  std::vector<ResampleEvent> accepted_a;  ///< audit log with g at acceptance
  std::vector<ResampleEvent> accepted_b;  ///< audit log with g^-1 at acceptance
};

struct OptimizeResult {
  SimTransform transform;
  RobustKernelParams kernel;
  bool converged{false};
  bool early_stopped{false};
  bool aborted{false};
  std::string abort_reason;
  int iterations{0};
  std::vector<double> loss_history;
  SurfacePointSet final_a;
  SurfacePointSet final_b;
  OptimizeDiagnostics diagnostics;
};

struct OptimizeOptions {
  const SimTransform* ground_truth{nullptr};  ///< enables error columns
  double scene_radius{0.0};  ///< 0: derived from the source field bounds
  bool keep_audit_log{true};
};

/// @brief Per-parameter-rate gradient descent over the 9 registration
/// parameters with periodic resampling of both sample sets and early
/// stopping on the mean forward residual.
inline OptimizeResult optimize(const SdfField& source, const SdfField& target,
                               const SimTransform& init,
                               const SurfacePointSet& initial_a,
                               const SurfacePointSet& initial_b,
                               const OptimizerConfig& cfg,
                               SamplerConfig sampler, std::uint64_t seed,
                               const OptimizeOptions& opts = {}) {
  OptimizeResult result;
  result.transform = init;

  const double scene_radius = opts.scene_radius > 0.0
                                  ? opts.scene_radius
                                  : source.bounds().bounding_radius();
  if (sampler.rho <= 0.0) sampler.rho = scene_radius / 20.0;

  result.kernel.p = std::max(cfg.kernel_p_init_factor * scene_radius,
                             cfg.kernel_p_min);
  result.kernel.alpha = cfg.kernel_alpha_init;

  SurfacePointSet a = initial_a, b = initial_b;
  if (a.size() < cfg.min_samples || b.size() < cfg.min_samples) {
    result.aborted = true;
    result.abort_reason = "initial sample sets below minimum size";
    result.final_a = std::move(a);
    result.final_b = std::move(b);
    return result;
  }
  result.diagnostics.initial_a = a;
  result.diagnostics.initial_b = b;

  LossEvaluator eval(source, target, cfg);
  eval.set_samples(a, b);

  Rng rng(seed);
  Rng rng_a = rng.fork(hash_label("resample-a"));
  Rng rng_b = rng.fork(hash_label("resample-b"));

  SimTransform g = init;
  RobustKernelParams kernel = result.kernel;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    if (cfg.use_resampling && iter > 0 && iter % cfg.resample_period == 0) {
      const SimTransform ginv = inverse(g);
      auto ra = mh_resample(a, source, target, g, sampler, rng_a);
      auto rb = mh_resample(b, target, source, ginv, sampler, rng_b);
      a = std::move(ra.set);
      b = std::move(rb.set);
      if (opts.keep_audit_log) {
        for (const auto& p : ra.accepted)
          result.diagnostics.accepted_a.push_back({p, g, iter});
        for (const auto& p : rb.accepted)
          result.diagnostics.accepted_b.push_back({p, ginv, iter});
      }
      if (a.size() < cfg.min_samples || b.size() < cfg.min_samples) {
        result.aborted = true;
        result.abort_reason = "sample sets depleted";
        break;
      }
      eval.set_samples(a, b);
    }

    ParamVector grad;
    const LossBreakdown loss = eval.evaluate(g, kernel, &grad);
    if (!std::isfinite(loss.total) || !grad.allFinite()) {
      result.aborted = true;
      result.abort_reason = "non-finite loss or gradient";
      break;
    }

    result.loss_history.push_back(loss.total);
    IterationRecord rec;
    rec.iteration = iter;
    rec.loss = loss;
    rec.scale = g.scale;
    rec.kernel_p = kernel.p;
    rec.kernel_alpha = kernel.alpha;
    if (opts.ground_truth)
      rec.error_vs_truth = transform_error(g, *opts.ground_truth);
    result.diagnostics.history.push_back(rec);
    result.iterations = iter + 1;

    if (loss.mean_forward_residual <= cfg.early_stop_threshold) {
      result.early_stopped = true;
      break;
    }

    g.translation -= cfg.lr_translation * grad.segment<3>(0);
    g.euler_xyz -= cfg.lr_rotation * grad.segment<3>(3);
    g.scale = std::clamp(g.scale - cfg.lr_scale * grad[6], cfg.scale_min,
                         cfg.scale_max);
    kernel.p = std::max(kernel.p - cfg.lr_kernel * grad[7], cfg.kernel_p_min);
    kernel.alpha = std::clamp(kernel.alpha - cfg.lr_kernel * grad[8],
                              cfg.kernel_alpha_min, cfg.kernel_alpha_max);
  }

  result.transform = g;
  result.kernel = kernel;
  result.converged = !result.aborted;
  result.final_a = std::move(a);
  result.final_b = std::move(b);
  return result;
}

/// Writes the per-iteration diagnostics stream as CSV.
inline void write_diagnostics_csv(const OptimizeResult& result,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open CSV for write: " + path);
  out << "iteration,loss,mean_fwd_residual,mean_bwd_residual,regularizer,"
         "delta_t,delta_r,delta_s,p,alpha,scale\n";
  for (const auto& rec : result.diagnostics.history) {
    out << rec.iteration << ',' << format_double(rec.loss.total) << ','
        << format_double(rec.loss.mean_forward_residual) << ','
        << format_double(rec.loss.mean_backward_residual) << ','
        << format_double(rec.loss.regularizer) << ',';
    if (rec.error_vs_truth) {
      out << format_double(rec.error_vs_truth->delta_t) << ','
          << format_double(rec.error_vs_truth->delta_r) << ','
          << format_double(rec.error_vs_truth->delta_s) << ',';
    } else {
      out << ",,,";
    }
    out << format_double(rec.kernel_p) << ',' << format_double(rec.kernel_alpha)
        << ',' << format_double(rec.scale) << '\n';
  }
}

}  // namespace sdfreg

#include "hmrf_icp/icp.hpp"

#include <chrono>
#include <numeric>

#include "hmrf_icp/nn_index.hpp"
#include "hmrf_icp/rigid_fit.hpp"

namespace hmrf_icp {

void IcpConfig::validate() const {
  if (max_icp_iters < 1) throw InputError("ICP iteration cap must be >= 1");
  if (!(trans_eps > 0) || !(rot_eps > 0)) throw InputError("convergence thresholds must be positive");
  hmrf_icp::validate(strategy);
}

std::pair<double, double> step_magnitudes(const RigidTransform& step) {
  return {step.translation().norm(), rotation_angle(step.rotation())};
}

namespace {

double mean_selected(const Correspondences& corr, const InlierSelection& sel) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (!sel.mask[i]) continue;
    sum += corr.distances[i];
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

IcpResult icp_register(const StructuredCloud& free, const FixedCloud& fixed, const RigidTransform& t_init,
                       const IcpConfig& config) {
  config.validate();
  if (free.valid.size() != free.points.size() || free.points.size() != std::size_t(free.width) * free.height)
    throw ConfigError("free cloud lattice is inconsistent");
  if (free.valid_count() < kMinInliers) throw InputError("free cloud needs at least 3 valid points");

  const auto started = std::chrono::steady_clock::now();
  IcpResult result;
  result.transform = t_init;
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  const NNIndex index(fixed);
  RejectionStrategy rule = config.strategy;
  if (auto* dyn = std::get_if<strategy::Dynamic>(&rule); dyn && !dyn->d_param)
    dyn->d_param = kDynamicSpacingMultiple * median_nn_spacing(fixed.points);
  // A zero-spacing fixed cloud (all duplicates) gives no usable scale.
  if (auto* dyn = std::get_if<strategy::Dynamic>(&rule); dyn && !(*dyn->d_param > 0))
    dyn->d_param = std::numeric_limits<double>::min();

  StructuredCloud moving = apply_transform(t_init, free);
  Correspondences corr = batch_nearest(index, moving);

  const auto* hmrf = std::get_if<strategy::Hmrf>(&rule);
  std::optional<MeanField> field;
  MixtureParams theta;
  if (hmrf) {
    auto [f, th] = init_field(corr, std::make_shared<const Lattice>(moving), hmrf->config);
    EmResult em = run_em(corr, std::move(f), th, hmrf->config, hmrf->config.em_iters_initial);
    result.initial_em_iterations = em.iterations;
    field = std::move(em.field);
    theta = em.theta;
  }

  for (int it = 1; it <= config.max_icp_iters; ++it) {
    IterationRecord rec;
    InlierSelection sel;
    if (hmrf) {
      EmResult em = run_em(corr, std::move(*field), theta, hmrf->config, hmrf->config.em_iters_per_icp);
      rec.em_iterations = em.iterations;
      field = std::move(em.field);
      theta = em.theta;
      sel = hmrf_select(*field);
      result.field = field;
    } else {
      sel = select_baseline(rule, corr);
    }
    rec.inlier_count = sel.count();
    rec.mean_inlier_residual = mean_selected(corr, sel);

    RigidTransform step;
    try {
      step = fit_rigid(moving, fixed, corr, sel);
    } catch (const Error& e) {
      result.elapsed_seconds = elapsed();
      throw RegistrationFailure(std::string("registration failed at iteration ") + std::to_string(it) + ": " +
                                    e.what(),
                                std::move(result));
    }

    rec.step = step;
    std::tie(rec.step_translation, rec.step_rotation) = step_magnitudes(step);
    result.transform = compose(step, result.transform);
    moving = apply_transform(step, moving);
    corr = batch_nearest(index, moving);

    result.trace.push_back(rec);
    result.iterations = it;
    if (config.observer) config.observer(it, rec, field ? &*field : nullptr);
    if (rec.step_translation < config.trans_eps && rec.step_rotation < config.rot_eps) {
      result.converged = true;
      break;
    }
  }

  result.elapsed_seconds = elapsed();
  return result;
}

}  // namespace hmrf_icp

#include "hmrf_icp/benchmark.hpp"

#include <algorithm>
#include <random>

#include "hmrf_icp/errors.hpp"

namespace hmrf_icp {

const StrategyOutcome* BenchmarkRecord::find(const std::string& strategy) const {
  for (const auto& o : outcomes)
    if (o.strategy == strategy) return &o;
  return nullptr;
}

namespace {

StrategyOutcome summarize(const std::string& name, const IcpResult& r, const RigidTransform& gt, bool failed) {
  StrategyOutcome out;
  out.strategy = name;
  out.t_err = translation_error(r.transform, gt);
  out.r_err = rotation_error(r.transform, gt);
  out.iterations = r.iterations;
  out.elapsed_seconds = r.elapsed_seconds;
  out.converged = r.converged;
  out.failed = failed;
  out.initial_em_iterations = r.initial_em_iterations;
  for (const auto& rec : r.trace) out.max_em_iterations_per_step = std::max(out.max_em_iterations_per_step, rec.em_iterations);
  return out;
}

}  // namespace

std::vector<BenchmarkRecord> run_benchmark(const std::vector<ScenePair>& scenes,
                                           const std::vector<RejectionStrategy>& strategies,
                                           const std::vector<Eigen::Vector3d>& axes, double angle,
                                           const IcpConfig& base) {
  if (scenes.empty() || strategies.empty() || axes.empty())
    throw InputError("benchmark needs at least one scene, strategy and axis");

  std::vector<BenchmarkRecord> records;
  records.reserve(scenes.size() * axes.size());
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const ScenePair& scene = scenes[s];
    const Point3 centroid = scene.gt.apply(scene.free.centroid());
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const RigidTransform t_init = perturb_pose(scene.gt, axes[a], angle, centroid);
      BenchmarkRecord rec{s, a, scene.overlap, {}};
      for (const auto& strat : strategies) {
        IcpConfig config = base;
        config.strategy = strat;
        const std::string name = strategy_name(strat);
        try {
          rec.outcomes.push_back(summarize(name, icp_register(scene.free, scene.fixed, t_init, config), scene.gt, false));
        } catch (const RegistrationFailure& e) {
          rec.outcomes.push_back(summarize(name, e.partial(), scene.gt, true));
        }
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::vector<std::pair<SceneParams, std::uint64_t>> stratified_scene_params(int per_decile, int first_decile,
                                                                           std::uint64_t seed,
                                                                           const SceneParams& base) {
  if (per_decile < 1 || first_decile < 0 || first_decile > 9) throw InputError("invalid stratification");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<SceneParams, std::uint64_t>> out;
  for (int d = first_decile; d < 10; ++d) {
    for (int i = 0; i < per_decile; ++i) {
      SceneParams p = base;
      p.target_overlap = std::clamp((d + unit(rng)) / 10.0, 0.05, 1.0);
      out.emplace_back(p, rng());
    }
  }
  return out;
}

}  // namespace hmrf_icp

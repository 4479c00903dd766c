#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "hmrf_icp/errors.hpp"
#include "hmrf_icp/geometry.hpp"
#include "hmrf_icp/hmrf_em.hpp"
#include "hmrf_icp/rejection.hpp"

namespace hmrf_icp {

struct IterationRecord {
  RigidTransform step;
  double step_translation = 0.0;
  double step_rotation = 0.0;
  std::size_t inlier_count = 0;
  double mean_inlier_residual = 0.0;
  // EM iterations spent before this step's fit (0 for baselines).
  int em_iterations = 0;
};

struct IcpConfig {
  int max_icp_iters = 50;
  double trans_eps = 1e-5;
  double rot_eps = 1e-5;
  RejectionStrategy strategy = strategy::Hmrf{};

  // Called after each ICP iteration with the field used to select inliers
  // (null for baseline strategies).
  std::function<void(int iteration, const IterationRecord&, const MeanField*)> observer;

  void validate() const;
};

struct IcpResult {
  RigidTransform transform;  // free -> fixed, including t_init
  int iterations = 0;
  bool converged = false;
  double elapsed_seconds = 0.0;
  int initial_em_iterations = 0;
  std::vector<IterationRecord> trace;
  // Last field used for selection (HMRF only).
  std::optional<MeanField> field;
};

/// Registration could not continue. Carries the state reached so far.
class RegistrationFailure : public Error {
 public:
  RegistrationFailure(const std::string& what, IcpResult partial)
      : Error(what), partial_(std::move(partial)) {}

  const IcpResult& partial() const noexcept { return partial_; }

 private:
  IcpResult partial_;
};

/// (||t||, rotation angle) of a step.
std::pair<double, double> step_magnitudes(const RigidTransform& step);

/// Point-to-point ICP with the configured outlier rejection.
///
/// The index over `fixed` is built once. For the HMRF strategy the field is
/// initialized from the first correspondences and relaxed for up to
/// em_iters_initial iterations; each ICP iteration then runs up to
/// em_iters_per_icp further iterations on the current residuals before
/// fitting. Iteration stops when both step magnitudes fall below their
/// thresholds or after max_icp_iters.
IcpResult icp_register(const StructuredCloud& free, const FixedCloud& fixed, const RigidTransform& t_init,
                       const IcpConfig& config);

}  // namespace hmrf_icp

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "hmrf_icp/geometry.hpp"
#include "hmrf_icp/nn_index.hpp"
#include "hmrf_icp/rigid_fit.hpp"

namespace hmrf_icp {

/// 4-connected neighborhood over the valid pixels of a lattice. Slots number
/// the valid pixels in increasing pixel order, matching Correspondences.
class Lattice {
 public:
  static constexpr std::int32_t kNone = -1;

  Lattice(int width, int height, const std::vector<std::uint8_t>& valid);
  explicit Lattice(const StructuredCloud& cloud) : Lattice(cloud.width, cloud.height, cloud.valid) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return pixel_of_slot_.size(); }
  std::size_t pixel(std::size_t slot) const { return pixel_of_slot_[slot]; }
  /// Slot of a pixel, or kNone when the pixel is invalid.
  std::int32_t slot(std::size_t pixel) const { return slot_of_pixel_[pixel]; }
  /// Up, down, left, right; kNone where the neighbor is off-grid or invalid.
  const std::array<std::int32_t, 4>& neighbors(std::size_t slot) const { return neighbors_[slot]; }

 private:
  int width_;
  int height_;
  std::vector<std::int32_t> slot_of_pixel_;
  std::vector<std::size_t> pixel_of_slot_;
  std::vector<std::array<std::int32_t, 4>> neighbors_;
};

/// Mean field z~ in [-1, +1], one value per lattice slot.
struct MeanField {
  std::shared_ptr<const Lattice> lattice;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Gaussian residual model for inliers (+1) and outliers (-1).
struct MixtureParams {
  double mu_in = 0.0;
  double sigma_in = 1.0;
  double mu_out = 0.0;
  double sigma_out = 1.0;
};

inline constexpr double kSigmaFloor = 1e-6;

struct HmrfConfig {
  double beta = 2.0;
  double init_outlier_frac = 0.1;
  int em_iters_initial = 600;
  int em_iters_per_icp = 20;

  void validate() const;
};

struct LocalPrior {
  double p_plus;
  double p_minus;
};

/// Sum of z~ over the up/down/left/right neighbors of `slot`; missing
/// neighbors contribute 0.
double neighbor_sum(const MeanField& field, std::size_t slot);

/// Mean-field conditional P(z_i = +-1 | beta, z~) for neighbor sum `s`.
LocalPrior local_prior(double s, double beta);

/// Initial field: the ceil(frac * n) largest residuals are outliers (ties
/// resolved toward lower pixel index), everything else is an inlier. The
/// mixture starts at the mean and population std of each set.
/// Throws InputError for fewer than 10 correspondences.
std::pair<MeanField, MixtureParams> init_field(const Correspondences& corr, std::shared_ptr<const Lattice> lattice,
                                               const HmrfConfig& config);

/// Simultaneous update z~_i <- tanh(beta s_i + (L+(y_i) - L-(y_i)) / 2) with
/// L_z(y) = -log sigma_z - (y - mu_z)^2 / (2 sigma_z^2). Every s_i reads the
/// input field. Outputs are clamped into the open interval (-1, 1).
MeanField e_step(const MeanField& field, const MixtureParams& theta, const Correspondences& corr, double beta);

/// Weighted moments with weights (1 +- z~_i) / 2. A component whose total
/// weight is below 1e-12 keeps its parameters from `previous`.
MixtureParams m_step(const MeanField& field, const Correspondences& corr, const MixtureParams& previous);

struct EmResult {
  MeanField field;
  MixtureParams theta;
  int iterations = 0;
  bool converged = false;
};

/// Alternates M-step and E-step until no sign differs from the previous
/// field or from the field two iterations back, or until max_iters. When an
/// M-step leaves mu_in > mu_out the components and the field are swapped so
/// inliers stay the closer component.
EmResult run_em(const Correspondences& corr, MeanField field, MixtureParams theta, const HmrfConfig& config,
                int max_iters);

/// Inlier iff z~_i > 0.
InlierSelection hmrf_select(const MeanField& field);

}  // namespace hmrf_icp

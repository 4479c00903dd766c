#include "hmrf_icp/hmrf_em.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "hmrf_icp/errors.hpp"

namespace hmrf_icp {

namespace {

// Largest double below 1; tanh saturates to exactly +-1 beyond |x| ~ 19.
const double kFieldBound = std::nextafter(1.0, 0.0);

double log_emission(double y, double mu, double sigma) {
  const double r = (y - mu) / sigma;
  return -std::log(sigma) - 0.5 * r * r;
}

bool same_signs(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if ((a[i] > 0) != (b[i] > 0)) return false;
  return true;
}

void check_aligned(const MeanField& field, const Correspondences& corr) {
  if (field.values.size() != corr.size()) throw ConfigError("mean field is not aligned with the correspondences");
}

}  // namespace

Lattice::Lattice(int width, int height, const std::vector<std::uint8_t>& valid)
    : width_(width), height_(height), slot_of_pixel_(valid.size(), kNone) {
  if (width < 0 || height < 0 || valid.size() != std::size_t(width) * std::size_t(height))
    throw ConfigError("validity mask does not match the lattice dimensions");

  for (std::size_t p = 0; p < valid.size(); ++p) {
    if (!valid[p]) continue;
    slot_of_pixel_[p] = static_cast<std::int32_t>(pixel_of_slot_.size());
    pixel_of_slot_.push_back(p);
  }

  neighbors_.resize(pixel_of_slot_.size());
  for (std::size_t s = 0; s < pixel_of_slot_.size(); ++s) {
    const std::size_t p = pixel_of_slot_[s];
    const int u = static_cast<int>(p % width);
    const int v = static_cast<int>(p / width);
    auto at = [&](int uu, int vv) -> std::int32_t {
      if (uu < 0 || vv < 0 || uu >= width || vv >= height) return kNone;
      return slot_of_pixel_[std::size_t(vv) * width + uu];
    };
    neighbors_[s] = {at(u, v - 1), at(u, v + 1), at(u - 1, v), at(u + 1, v)};
  }
}

void HmrfConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InputError("beta must be a finite value >= 0");
  if (!(init_outlier_frac > 0.0 && init_outlier_frac < 1.0))
    throw InputError("initial outlier fraction must be in (0, 1)");
  if (em_iters_initial < 1 || em_iters_per_icp < 1) throw InputError("EM iteration caps must be >= 1");
}

double neighbor_sum(const MeanField& field, std::size_t slot) {
  double s = 0.0;
  for (std::int32_t n : field.lattice->neighbors(slot))
    if (n != Lattice::kNone) s += field.values[static_cast<std::size_t>(n)];
  return s;
}

LocalPrior local_prior(double s, double beta) {
  const double x = 2.0 * beta * s;
  return {1.0 / (1.0 + std::exp(-x)), 1.0 / (1.0 + std::exp(x))};
}

std::pair<MeanField, MixtureParams> init_field(const Correspondences& corr, std::shared_ptr<const Lattice> lattice,
                                               const HmrfConfig& config) {
  config.validate();
  const std::size_t n = corr.size();
  if (n < 10) throw InputError("HMRF initialization needs at least 10 correspondences");
  if (!lattice || lattice->size() != n) throw ConfigError("lattice is not aligned with the correspondences");

  auto outliers = static_cast<std::size_t>(std::ceil(config.init_outlier_frac * static_cast<double>(n) - 1e-9));
  outliers = std::clamp<std::size_t>(outliers, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return corr.distances[a] > corr.distances[b]; });

  MeanField field{std::move(lattice), std::vector<double>(n, 1.0)};
  for (std::size_t i = 0; i < outliers; ++i) field.values[order[i]] = -1.0;

  double sum_in = 0, sum_out = 0;
  for (std::size_t i = 0; i < n; ++i) (field.values[i] > 0 ? sum_in : sum_out) += corr.distances[i];
  const double n_out = static_cast<double>(outliers);
  const double n_in = static_cast<double>(n - outliers);
  const double mu_in = sum_in / n_in;
  const double mu_out = sum_out / n_out;
  double ss_in = 0, ss_out = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = corr.distances[i];
    if (field.values[i] > 0)
      ss_in += (y - mu_in) * (y - mu_in);
    else
      ss_out += (y - mu_out) * (y - mu_out);
  }

  MixtureParams theta;
  theta.mu_in = mu_in;
  theta.sigma_in = std::max(std::sqrt(ss_in / n_in), kSigmaFloor);
  theta.mu_out = mu_out;
  theta.sigma_out = std::max(std::sqrt(ss_out / n_out), kSigmaFloor);
  return {std::move(field), theta};
}

MeanField e_step(const MeanField& field, const MixtureParams& theta, const Correspondences& corr, double beta) {
  check_aligned(field, corr);
  MeanField next{field.lattice, std::vector<double>(field.size())};
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double y = corr.distances[i];
    const double emission = 0.5 * (log_emission(y, theta.mu_in, theta.sigma_in) -
                                   log_emission(y, theta.mu_out, theta.sigma_out));
    const double z = std::tanh(beta * neighbor_sum(field, i) + emission);
    next.values[i] = std::clamp(z, -kFieldBound, kFieldBound);
  }
  return next;
}

MixtureParams m_step(const MeanField& field, const Correspondences& corr, const MixtureParams& previous) {
  check_aligned(field, corr);
  double w_in = 0, w_out = 0, wy_in = 0, wy_out = 0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double a = 0.5 * (1.0 + field.values[i]);
    const double b = 0.5 * (1.0 - field.values[i]);
    w_in += a;
    w_out += b;
    wy_in += a * corr.distances[i];
    wy_out += b * corr.distances[i];
  }

  MixtureParams theta = previous;
  const bool has_in = w_in >= 1e-12;
  const bool has_out = w_out >= 1e-12;
  if (has_in) theta.mu_in = wy_in / w_in;
  if (has_out) theta.mu_out = wy_out / w_out;

  double var_in = 0, var_out = 0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double y = corr.distances[i];
    var_in += 0.5 * (1.0 + field.values[i]) * (y - theta.mu_in) * (y - theta.mu_in);
    var_out += 0.5 * (1.0 - field.values[i]) * (y - theta.mu_out) * (y - theta.mu_out);
  }
  if (has_in) theta.sigma_in = std::max(std::sqrt(var_in / w_in), kSigmaFloor);
  if (has_out) theta.sigma_out = std::max(std::sqrt(var_out / w_out), kSigmaFloor);
  return theta;
}

EmResult run_em(const Correspondences& corr, MeanField field, MixtureParams theta, const HmrfConfig& config,
                int max_iters) {
  check_aligned(field, corr);
  if (max_iters < 1) throw InputError("EM iteration cap must be >= 1");

  EmResult result;
  std::optional<std::vector<double>> before_previous;
  for (int it = 1; it <= max_iters; ++it) {
    theta = m_step(field, corr, theta);
    if (theta.mu_in > theta.mu_out) {
      std::swap(theta.mu_in, theta.mu_out);
      std::swap(theta.sigma_in, theta.sigma_out);
      for (double& z : field.values) z = -z;
      if (before_previous)
        for (double& z : *before_previous) z = -z;
    }

    MeanField next = e_step(field, theta, corr, config.beta);
    const bool settled = same_signs(next.values, field.values) ||
                         (before_previous && same_signs(next.values, *before_previous));
    before_previous = std::move(field.values);
    field = std::move(next);
    result.iterations = it;
    if (settled) {
      result.converged = true;
      break;
    }
  }
  result.field = std::move(field);
  result.theta = theta;
  return result;
}

InlierSelection hmrf_select(const MeanField& field) {
  InlierSelection sel;
  sel.mask.resize(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) sel.mask[i] = field.values[i] > 0;
  return sel;
}

}  // namespace hmrf_icp

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "hmrf_icp/hmrf_em.hpp"
#include "hmrf_icp/nn_index.hpp"
#include "hmrf_icp/rigid_fit.hpp"

namespace hmrf_icp {

namespace strategy {

struct All {};

struct Percent {
  double fraction = 0.9;
};

struct Sigma {
  double k = 2.5;
};

struct X84 {
  double k = 5.2;
};

struct Dynamic {
  // Unset means 10x the fixed cloud's median nearest-neighbor spacing.
  std::optional<double> d_param;
};

struct Hmrf {
  HmrfConfig config;
};

}  // namespace strategy

using RejectionStrategy =
    std::variant<strategy::All, strategy::Percent, strategy::Sigma, strategy::X84, strategy::Dynamic, strategy::Hmrf>;

inline constexpr double kDynamicSpacingMultiple = 10.0;

/// Throws InputError when a parameter is out of range.
void validate(const RejectionStrategy& s);

/// Column prefix used in result tables: all, pct, sigma, x84, dynamic, hmrf.
std::string strategy_name(const RejectionStrategy& s);
/// Accepts the CLI spellings (all, percent, sigma, x84, dynamic, hmrf) and
/// the column prefixes. Returns default-parameterized strategies.
std::optional<RejectionStrategy> parse_strategy(std::string_view name);

/// The six strategies with their default parameters, in table column order.
std::vector<RejectionStrategy> default_strategies();

InlierSelection reject_all(const Correspondences& corr);
/// Keeps max(3, floor(fraction n)) smallest residuals, ties by pixel order.
InlierSelection reject_percent(const Correspondences& corr, double fraction);
/// Keeps Y_i < mean + k std (population); keeps all when std is 0.
InlierSelection reject_sigma(const Correspondences& corr, double k);
/// Keeps Y_i < median + k MAD; with MAD 0 keeps Y_i <= median.
InlierSelection reject_x84(const Correspondences& corr, double k);
/// Tiered threshold on mean/std against the distance parameter d:
/// mean < d: mean + 3 std; < 3d: mean + 2 std; < 6d: mean + std; else median.
InlierSelection reject_dynamic(const Correspondences& corr, double d_param);

/// Applies a baseline strategy and tops the result up to kMinInliers with
/// the smallest remaining residuals. Hmrf is not a baseline and throws
/// InputError; the Dynamic parameter must already be resolved.
InlierSelection select_baseline(const RejectionStrategy& s, const Correspondences& corr);

/// Median of a copy of `values` (mean of the middle pair for even sizes).
double median(std::vector<double> values);

}  // namespace hmrf_icp

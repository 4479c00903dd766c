#include "hmrf_icp/rejection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hmrf_icp/errors.hpp"

namespace hmrf_icp {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

struct Moments {
  double mean;
  double stddev;
};

Moments moments(const std::vector<double>& y) {
  double sum = 0.0;
  for (double v : y) sum += v;
  const double mean = sum / static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(y.size()))};
}

InlierSelection below(const Correspondences& corr, double threshold) {
  InlierSelection sel;
  sel.mask.resize(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) sel.mask[i] = corr.distances[i] < threshold;
  return sel;
}

InlierSelection keep_everything(const Correspondences& corr) {
  return InlierSelection{std::vector<bool>(corr.size(), true)};
}

// Correspondence positions sorted by residual, stable in pixel order.
std::vector<std::size_t> residual_order(const Correspondences& corr) {
  std::vector<std::size_t> order(corr.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return corr.distances[a] < corr.distances[b]; });
  return order;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

void validate(const RejectionStrategy& s) {
  std::visit(Overloaded{
                 [](const strategy::All&) {},
                 [](const strategy::Percent& p) {
                   if (!(p.fraction > 0.0 && p.fraction <= 1.0)) throw InputError("percent fraction must be in (0, 1]");
                 },
                 [](const strategy::Sigma& p) {
                   if (!(p.k > 0.0)) throw InputError("sigma multiplier must be positive");
                 },
                 [](const strategy::X84& p) {
                   if (!(p.k > 0.0)) throw InputError("X84 multiplier must be positive");
                 },
                 [](const strategy::Dynamic& p) {
                   if (p.d_param && !(*p.d_param > 0.0)) throw InputError("dynamic distance parameter must be positive");
                 },
                 [](const strategy::Hmrf& p) { p.config.validate(); },
             },
             s);
}

std::string strategy_name(const RejectionStrategy& s) {
  return std::visit(Overloaded{
                        [](const strategy::All&) { return "all"; },
                        [](const strategy::Percent&) { return "pct"; },
                        [](const strategy::Sigma&) { return "sigma"; },
                        [](const strategy::X84&) { return "x84"; },
                        [](const strategy::Dynamic&) { return "dynamic"; },
                        [](const strategy::Hmrf&) { return "hmrf"; },
                    },
                    s);
}

std::optional<RejectionStrategy> parse_strategy(std::string_view name) {
  if (name == "all") return strategy::All{};
  if (name == "percent" || name == "pct") return strategy::Percent{};
  if (name == "sigma") return strategy::Sigma{};
  if (name == "x84" || name == "X84") return strategy::X84{};
  if (name == "dynamic") return strategy::Dynamic{};
  if (name == "hmrf") return strategy::Hmrf{};
  return std::nullopt;
}

std::vector<RejectionStrategy> default_strategies() {
  return {strategy::All{}, strategy::Percent{}, strategy::Sigma{}, strategy::X84{}, strategy::Dynamic{},
          strategy::Hmrf{}};
}

InlierSelection reject_all(const Correspondences& corr) { return keep_everything(corr); }

InlierSelection reject_percent(const Correspondences& corr, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("percent fraction must be in (0, 1]");
  const std::size_t n = corr.size();
  // The epsilon absorbs representation error such as 0.9 * 10 = 8.999...
  const auto scaled = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  const std::size_t keep = std::min(n, std::max(kMinInliers, scaled));

  const std::vector<std::size_t> order = residual_order(corr);
  InlierSelection sel;
  sel.mask.assign(n, false);
  for (std::size_t i = 0; i < keep; ++i) sel.mask[order[i]] = true;
  return sel;
}

InlierSelection reject_sigma(const Correspondences& corr, double k) {
  if (corr.empty()) return {};
  const Moments m = moments(corr.distances);
  if (m.stddev == 0.0) return keep_everything(corr);
  return below(corr, m.mean + k * m.stddev);
}

InlierSelection reject_x84(const Correspondences& corr, double k) {
  if (corr.empty()) return {};
  const double med = median(corr.distances);
  std::vector<double> deviation(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) deviation[i] = std::abs(corr.distances[i] - med);
  const double mad = median(std::move(deviation));
  if (mad == 0.0) {
    InlierSelection sel;
    sel.mask.resize(corr.size());
    for (std::size_t i = 0; i < corr.size(); ++i) sel.mask[i] = corr.distances[i] <= med;
    return sel;
  }
  return below(corr, med + k * mad);
}

InlierSelection reject_dynamic(const Correspondences& corr, double d_param) {
  if (!(d_param > 0.0)) throw InputError("dynamic distance parameter must be positive");
  if (corr.empty()) return {};
  const Moments m = moments(corr.distances);
  if (m.stddev == 0.0) return keep_everything(corr);
  if (m.mean < d_param) return below(corr, m.mean + 3.0 * m.stddev);
  if (m.mean < 3.0 * d_param) return below(corr, m.mean + 2.0 * m.stddev);
  if (m.mean < 6.0 * d_param) return below(corr, m.mean + m.stddev);
  return below(corr, median(corr.distances));
}

InlierSelection select_baseline(const RejectionStrategy& s, const Correspondences& corr) {
  InlierSelection sel = std::visit(
      Overloaded{
          [&](const strategy::All&) { return reject_all(corr); },
          [&](const strategy::Percent& p) { return reject_percent(corr, p.fraction); },
          [&](const strategy::Sigma& p) { return reject_sigma(corr, p.k); },
          [&](const strategy::X84& p) { return reject_x84(corr, p.k); },
          [&](const strategy::Dynamic& p) -> InlierSelection {
            if (!p.d_param) throw InputError("dynamic distance parameter has not been resolved");
            return reject_dynamic(corr, *p.d_param);
          },
          [](const strategy::Hmrf&) -> InlierSelection {
            throw InputError("HMRF selection is driven by the EM field, not a residual rule");
          },
      },
      s);

  std::size_t kept = sel.count();
  if (kept >= kMinInliers) return sel;
  for (std::size_t i : residual_order(corr)) {
    if (kept >= kMinInliers) break;
    if (!sel.mask[i]) {
      sel.mask[i] = true;
      ++kept;
    }
  }
  return sel;
}

}  // namespace hmrf_icp

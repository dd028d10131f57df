#include "gtring/perf_model.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <utility>

#include "gtring/errors.hpp"

namespace gtring {

MessageCounts message_counts(std::uint64_t s) {
  if (s < 1) throw DomainError("message_counts: ring size must be >= 1");
  return {s - 1, s - 1, s * (s - 1), s - 1};
}

double effective_bandwidth(double msg_bytes, double s, double n_meas, double elapsed) {
  if (!(elapsed > 0)) throw DomainError("effective_bandwidth: elapsed must be > 0");
  return msg_bytes * s * n_meas / elapsed;
}

void to_json(nlohmann::json& j, const LinearFit& fit) {
  j = nlohmann::json{{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}};
}

LinearFit fit_linear(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("fit_linear: x and y differ in length");
  if (std::set<double>(x.begin(), x.end()).size() < 2) {
    throw DomainError("fit_linear: need at least two distinct x values");
  }
  const auto n = static_cast<double>(x.size());
  double mx = 0;
  double my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0;
  double sxy = 0;
  double syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0) {
    fit.r_squared = 1.0;
  } else {
    double ss_res = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - (fit.slope * x[i] + fit.intercept);
      ss_res += r * r;
    }
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return fit;
}

LinearFit fit_linear(std::span<const SweepPoint> points) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& p : points) {
    x.push_back(p.s);
    y.push_back(p.elapsed_s);
  }
  return fit_linear(x, y);
}

StepLoad slowest_step(std::uint32_t s, std::uint32_t world_size, std::uint32_t lanes, Direction direction,
                      double msg_bytes, const SimLinkConfig& link) {
  link.validate();
  if (s < 1) throw DomainError("slowest_step: ring size must be >= 1");
  if (world_size == 0) world_size = s;
  if (world_size % s != 0) throw DomainError("slowest_step: ring size must divide the world size");

  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> pair_load;
  std::map<int, std::uint32_t> nic_load;
  if (s > 1) {
    for (std::uint32_t base = 0; base < world_size; base += s) {
      for (std::uint32_t t = 0; t < lanes; ++t) {
        const bool backward = direction == Direction::kAlternate && t % 2 == 1;
        for (std::uint32_t i = 0; i < s; ++i) {
          const std::uint32_t src = base + i;
          const std::uint32_t dst = base + (backward ? (i + s - 1) % s : (i + 1) % s);
          const int a = static_cast<int>(src);
          const int b = static_cast<int>(dst);
          if (link.link_class(a, b) == LinkClass::kIntraNode) {
            ++pair_load[{src, dst}];
          } else {
            ++nic_load[link.node_of(a)];
            ++nic_load[link.node_of(b)];
          }
        }
      }
    }
  }

  StepLoad best;
  auto consider = [&](LinkClass cls, std::uint32_t load) {
    const double step = link.latency_s + load * msg_bytes / link.bandwidth(cls);
    if (best.load == 0 || step > best.step_s) best = {cls, load, step};
  };
  for (const auto& [pair, load] : pair_load) consider(LinkClass::kIntraNode, load);
  for (const auto& [node, load] : nic_load) consider(LinkClass::kNic, load);
  return best;
}

double predict_elapsed(std::uint32_t s, std::uint64_t n_meas, double msg_bytes, const SimLinkConfig& link,
                       std::uint32_t lanes, Direction direction, std::uint32_t world_size) {
  if (s <= 1) return 0.0;
  const StepLoad step = slowest_step(s, world_size, lanes, direction, msg_bytes, link);
  return static_cast<double>(n_meas) * static_cast<double>(s - 1) * step.step_s;
}

double utilization_factor(std::uint32_t s, const SimLinkConfig& link, std::uint32_t lanes, Direction direction,
                          std::uint32_t world_size) {
  const StepLoad step = slowest_step(s, world_size, lanes, direction, 1.0, link);
  return step.load == 0 ? 1.0 : 1.0 / step.load;
}

}  // namespace gtring

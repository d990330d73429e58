#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <random>
#include <vector>

#include "forkline/sched/topology.hpp"

namespace forkline {

/// Steal-target distribution for one worker.
///
/// Victim j is chosen with probability proportional to 1 / (n * r^2), where r
/// is its topological distance and n the number of cores at that same distance,
/// so each distance shell as a whole carries weight 1 / r^2.
class victim_table {
 public:
  victim_table() = default;

  static auto build(topology const& topo, std::size_t self) -> victim_table {
    victim_table t;
    std::size_t const p = topo.size();
    if (p < 2) {
      return t; // nobody to steal from
    }
    std::map<int, std::size_t> shell; // distance -> number of cores at it
    for (std::size_t j = 0; j < p; ++j) {
      if (j != self) {
        ++shell[topo.distance(self, j)];
      }
    }
    std::vector<double> weight;
    for (std::size_t j = 0; j < p; ++j) {
      if (j == self) {
        continue;
      }
      double const r = topo.distance(self, j);
      t.victims_.push_back(j);
      weight.push_back(1.0 / (static_cast<double>(shell[topo.distance(self, j)]) * r * r));
    }
    double total = 0;
    for (double w : weight) {
      total += w;
    }
    double acc = 0;
    for (double w : weight) {
      t.prob_.push_back(w / total);
      acc += w / total;
      t.cdf_.push_back(acc);
    }
    t.cdf_.back() = 1.0;
    t.self_ = self;
    return t;
  }

  [[nodiscard]] auto empty() const noexcept -> bool { return victims_.empty(); }
  [[nodiscard]] auto size() const noexcept -> std::size_t { return victims_.size(); }
  [[nodiscard]] auto victims() const noexcept -> std::vector<std::size_t> const& { return victims_; }

  /// Probability that `worker` is selected; zero for the owner itself.
  [[nodiscard]] auto probability(std::size_t worker) const -> double {
    auto it = std::find(victims_.begin(), victims_.end(), worker);
    return it == victims_.end() ? 0.0 : prob_[static_cast<std::size_t>(it - victims_.begin())];
  }

  /// Draw a victim. Precondition: !empty().
  template <typename URBG>
  auto select(URBG& rng) const -> std::size_t {
    if (victims_.size() == 1) {
      return victims_.front();
    }
    double const u = std::generate_canonical<double, 53>(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    auto idx = std::min(static_cast<std::size_t>(it - cdf_.begin()), victims_.size() - 1);
    return victims_[idx];
  }

 private:
  std::size_t self_ = 0;
  std::vector<std::size_t> victims_;
  std::vector<double> prob_;
  std::vector<double> cdf_;
};

} // namespace forkline

// Copyright 2026 The bfperf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Polynomial-time evaluation of poly-symmetric systems on the profile grid.

#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "bfperf/common.hpp"
#include "bfperf/exact.hpp"
#include "bfperf/grid.hpp"
#include "bfperf/rank.hpp"

namespace bfperf {

// Identical traffic within each part.
struct GridWorkload {
  std::vector<int> sizes;
  std::vector<double> load;     // traffic intensity of every queue in part k
  std::vector<double> arrival;  // arrival rate of every queue in part k

  static GridWorkload from_intensity(std::vector<int> sizes, std::vector<double> load) {
    auto arrival = load;
    return GridWorkload{std::move(sizes), std::move(load), std::move(arrival)};
  }

  std::size_t parts() const { return sizes.size(); }
  double mean_size(std::size_t k) const { return load[k] / arrival[k]; }

  void validate(const GridShape& shape) const {
    if (sizes != shape.sizes()) {
      throw InvalidArgument("workload part sizes " + format_profile(sizes) +
                            " do not match grid " + format_profile(shape.sizes()));
    }
    if (load.size() != sizes.size() || arrival.size() != sizes.size()) {
      throw InvalidArgument("workload needs one load and arrival rate per part");
    }
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (!(load[k] > 0.0) || !(arrival[k] > 0.0) || !std::isfinite(load[k])) {
        throw InvalidArgument("part " + std::to_string(k + 1) +
                              ": load and arrival rate must be positive");
      }
    }
  }

  // Per-queue workload for the contiguous partition.
  Workload expand() const {
    Workload w;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      for (int q = 0; q < sizes[k]; ++q) {
        w.lambda.push_back(arrival[k]);
        w.sigma.push_back(mean_size(k));
      }
    }
    return w;
  }
};

struct PolysymOptions {
  // Denominators use capacity_scale * h(a) - sum_k a_k load_k.
  double capacity_scale = 1.0;
  // A shell whose largest unnormalized value leaves [1/t, t] is rescaled.
  double renormalize_threshold = 1e200;
  unsigned threads = 1;
};

class GridSolution {
 public:
  GridSolution(GridShape shape, std::vector<double> pi, std::vector<double> cond_l,
               double log_pi0)
      : shape_(std::move(shape)), pi_(std::move(pi)), cond_l_(std::move(cond_l)),
        log_pi0_(log_pi0) {
    totals_.assign(shape_.parts(), 0.0);
    for (std::size_t k = 0; k < shape_.parts(); ++k) {
      for (std::size_t idx = 0; idx < pi_.size(); ++idx) {
        totals_[k] += pi_[idx] * cond_l_[k * pi_.size() + idx];
      }
    }
  }

  const GridShape& shape() const { return shape_; }
  std::size_t parts() const { return shape_.parts(); }
  double pi(std::size_t idx) const { return pi_[idx]; }
  double pi(const std::vector<int>& a) const { return pi_[shape_.index(a)]; }
  const std::vector<double>& pi() const { return pi_; }
  // L_k(a)
  double conditional_l(std::size_t k, std::size_t idx) const {
    return cond_l_[k * pi_.size() + idx];
  }
  double pi_l(std::size_t k, std::size_t idx) const {
    return pi_[idx] * conditional_l(k, idx);
  }
  // L_k, the mean number of jobs summed over the queues of part k.
  double total_l(std::size_t k) const { return totals_[k]; }
  const std::vector<double>& total_l() const { return totals_; }
  double log_pi0() const { return log_pi0_; }

 private:
  GridShape shape_;
  std::vector<double> pi_;
  std::vector<double> cond_l_;
  std::vector<double> totals_;
  double log_pi0_;
};

struct GridStability {
  double margin = 0.0;  // min over a != 0 of scale*h(a) - a.load
  std::vector<int> argmin;
  double scale_ref = 0.0;  // scale * h(n)
  bool stable() const { return margin > kBoundaryMargin * scale_ref; }
};

inline GridStability grid_stability(const CardinalityRank& h, const GridWorkload& w,
                                    double capacity_scale = 1.0) {
  const auto& shape = h.shape();
  w.validate(shape);
  GridStability s;
  s.margin = std::numeric_limits<double>::infinity();
  s.scale_ref = capacity_scale * h.at(shape.size() - 1);
  std::size_t best = 0;
  for (std::size_t idx = 1; idx < shape.size(); ++idx) {
    double load = 0.0;
    for (std::size_t k = 0; k < shape.parts(); ++k) load += shape.component(idx, k) * w.load[k];
    double m = capacity_scale * h.at(idx) - load;
    if (m < s.margin) {
      s.margin = m;
      best = idx;
    }
  }
  s.argmin = shape.profile(best);
  return s;
}

inline GridSolution solve_polysym(const CardinalityRank& h, const GridWorkload& w,
                                  const PolysymOptions& opt = {}) {
  const GridShape& shape = h.shape();
  auto stab = grid_stability(h, w, opt.capacity_scale);
  if (!stab.stable()) {
    throw GridUnstableError("unstable on the profile grid at a=" +
                                format_profile(stab.argmin) + ": margin " +
                                format_double(stab.margin),
                            stab.argmin, stab.margin);
  }
  const std::size_t size = shape.size();
  const std::size_t parts = shape.parts();
  const auto shells = shape.shells();

  std::vector<int> comp(parts * size);
  std::vector<double> denom(size, 0.0);
  for (std::size_t idx = 0; idx < size; ++idx) {
    double load = 0.0;
    for (std::size_t k = 0; k < parts; ++k) {
      comp[idx * parts + k] = shape.component(idx, k);
      load += comp[idx * parts + k] * w.load[k];
    }
    denom[idx] = opt.capacity_scale * h.at(idx) - load;
  }

  // Stored values of shell s are the true unnormalized values divided by
  // exp(shell_log[s]); `shrink[s]` = exp(shell_log[s-1] - shell_log[s]).
  std::vector<double> pi(size, 0.0);
  std::vector<double> shell_log(shells.size(), 0.0);
  std::vector<double> shrink(shells.size(), 1.0);
  pi[0] = 1.0;
  for (std::size_t s = 1; s < shells.size(); ++s) {
    double peak = 0.0;
    for (std::size_t idx : shells[s]) {
      double num = 0.0;
      for (std::size_t k = 0; k < parts; ++k) {
        int ak = comp[idx * parts + k];
        if (ak == 0) continue;
        num += (shape.size_of(k) - ak + 1) * w.load[k] * pi[idx - shape.stride(k)];
      }
      pi[idx] = num / denom[idx];
      peak = std::max(peak, pi[idx]);
    }
    shell_log[s] = shell_log[s - 1];
    if (peak > 0.0 && (peak > opt.renormalize_threshold ||
                       peak < 1.0 / opt.renormalize_threshold)) {
      for (std::size_t idx : shells[s]) pi[idx] /= peak;
      shell_log[s] += std::log(peak);
      shrink[s] = 1.0 / peak;
    }
    if (!std::isfinite(peak)) {
      throw RangeError("unnormalized grid probability overflowed in shell " +
                       std::to_string(s) + "; enable renormalization");
    }
  }

  // Conditional means via the stored products pi(a) L_k(a).
  std::vector<double> cond(parts * size, 0.0);
  parallel_for(parts, opt.threads, [&](std::size_t k) {
    std::vector<double> prod(size, 0.0);
    for (std::size_t s = 1; s < shells.size(); ++s) {
      for (std::size_t idx : shells[s]) {
        int ak = comp[idx * parts + k];
        if (ak == 0) continue;
        double carried = (shape.size_of(k) - ak + 1) * w.load[k] * pi[idx - shape.stride(k)];
        for (std::size_t l = 0; l < parts; ++l) {
          int al = comp[idx * parts + l];
          if (al == 0) continue;
          std::size_t prev = idx - shape.stride(l);
          carried += (shape.size_of(l) - al + 1) * w.load[l] * prod[prev];
        }
        prod[idx] = (ak * w.load[k] * pi[idx] + carried * shrink[s]) / denom[idx];
        cond[k * size + idx] = pi[idx] > 0.0 ? prod[idx] / pi[idx] : 0.0;
      }
    }
  });

  double log_z = -INFINITY;
  for (std::size_t s = 0; s < shells.size(); ++s) {
    double sum = 0.0;
    for (std::size_t idx : shells[s]) sum += pi[idx];
    if (sum > 0.0) log_z = log_add(log_z, shell_log[s] + std::log(sum));
  }
  for (std::size_t s = 0; s < shells.size(); ++s) {
    double f = std::exp(shell_log[s] - log_z);
    for (std::size_t idx : shells[s]) pi[idx] *= f;
  }
  return GridSolution(shape, std::move(pi), std::move(cond), -log_z);
}

// Cardinality rank of an access tree: users of part k have access rate r_k,
// everybody shares one link of capacity C.
inline CardinalityRank access_tree_rank(const std::vector<int>& sizes,
                                        const std::vector<double>& rates,
                                        double shared_capacity) {
  if (rates.size() != sizes.size()) throw InvalidArgument("one access rate per part");
  for (double r : rates) {
    if (!(r > 0.0)) throw InvalidArgument("access rates must be positive");
  }
  if (!(shared_capacity > 0.0)) throw InvalidArgument("shared capacity must be positive");
  return CardinalityRank::from_function(sizes, [&](const std::vector<int>& a) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * rates[k];
    return std::min(s, shared_capacity);
  });
}

// The same access network as an explicit tree (one link per user plus the
// shared link), users numbered part by part.
inline TreeTopology access_tree_topology(const std::vector<int>& sizes,
                                         const std::vector<double>& rates,
                                         double shared_capacity) {
  TreeTopology t;
  int next = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    for (int q = 0; q < sizes[k]; ++q) t.links.push_back({singleton(next++), rates[k]});
  }
  t.n = next;
  t.links.push_back({full_set(next), shared_capacity});
  return t;
}

// gamma_k = load_k / P{a given queue of part k is active}, with the
// per-subset probability pi(a) / prod_l C(n_l, a_l) and the count
// C(n_k - 1, a_k) prod_{l != k} C(n_l, a_l) of subsets avoiding that queue.
inline std::vector<double> access_tree_throughput(const GridSolution& g,
                                                  const GridWorkload& w) {
  const auto& shape = g.shape();
  w.validate(shape);
  std::vector<double> gamma(shape.parts());
  for (std::size_t k = 0; k < shape.parts(); ++k) {
    const int nk = shape.size_of(k);
    double idle = 0.0;
    for (std::size_t idx = 0; idx < shape.size(); ++idx) {
      if (g.pi(idx) <= 0.0) continue;
      auto a = shape.profile(idx);
      if (a[k] >= nk) continue;
      double log_count = log_binomial(nk - 1, a[k]);
      double log_subsets = 0.0;
      for (std::size_t l = 0; l < shape.parts(); ++l) {
        log_subsets += log_binomial(shape.size_of(l), a[l]);
        if (l != k) log_count += log_binomial(shape.size_of(l), a[l]);
      }
      idle += std::exp(log_count - log_subsets + std::log(g.pi(idx)));
    }
    double busy = 1.0 - idle;
    if (!(busy > 0.0)) {
      throw ConsistencyError("part " + std::to_string(k + 1) +
                             " has zero activity probability");
    }
    gamma[k] = w.load[k] / busy;
  }
  return gamma;
}

// Cluster of d1*d2 unit servers where each of the d2 classes of part 1 owns
// a row of d1 servers and each of the d1 classes of part 2 a column of d2.
inline CardinalityRank grid_cluster_rank(int d1, int d2) {
  if (d1 < 1 || d2 < 1) throw InvalidArgument("grid cluster degrees must be >= 1");
  return CardinalityRank::from_function({d2, d1}, [&](const std::vector<int>& a) {
    return static_cast<double>(a[0] * d1 + a[1] * d2 - a[0] * a[1]);
  });
}

inline ClusterAssignment grid_cluster_assignment(int d1, int d2) {
  ClusterAssignment c;
  c.n = d1 + d2;
  c.m = d1 * d2;
  c.server_capacity.assign(c.m, 1.0);
  for (int i = 0; i < d2; ++i) {
    std::vector<int> s;
    for (int j = 0; j < d1; ++j) s.push_back(i * d1 + j);
    c.assign.push_back(s);
  }
  for (int i = 0; i < d1; ++i) {
    std::vector<int> s;
    for (int j = 0; j < d2; ++j) s.push_back(i + j * d1);
    c.assign.push_back(s);
  }
  return c;
}

// delta_k = L_k / (n_k lambda_k)
inline std::vector<double> mean_delay(const GridSolution& g, const GridWorkload& w) {
  w.validate(g.shape());
  std::vector<double> d(g.parts());
  for (std::size_t k = 0; k < g.parts(); ++k) {
    d[k] = g.total_l(k) / (g.shape().size_of(k) * w.arrival[k]);
  }
  return d;
}

struct EquivalenceReport {
  double max_abs_pi = 0.0;
  double max_rel_pi = 0.0;
  double max_abs_pi_l = 0.0;
  double max_rel_pi_l = 0.0;
  double max_rel() const { return std::max(max_rel_pi, max_rel_pi_l); }
};

inline constexpr int kExpandLimit = 14;

// Solves the expanded per-queue system with the subset recursion, aggregates
// it by profile and compares against the grid solution.
inline EquivalenceReport expand_and_check(const CardinalityRank& h, const GridWorkload& w) {
  require_size(h.shape().total_queues(), kExpandLimit, "expand_and_check");
  const auto& shape = h.shape();
  auto grid = solve_polysym(h, w);
  auto part = Partition::contiguous(shape.sizes());
  auto exact = solve_exact(h.expand(part), w.expand());

  std::vector<double> agg_pi(shape.size(), 0.0);
  std::vector<double> agg_l(shape.size() * shape.parts(), 0.0);
  for (Subset a = 0; a < exact.subsets(); ++a) {
    std::size_t idx = shape.index(part.profile(a));
    agg_pi[idx] += exact.pi(a);
    for (int i = 0; i < part.n(); ++i) {
      agg_l[part.part_of(i) * shape.size() + idx] += exact.pi_l(i, a);
    }
  }
  auto rel = [](double x, double y) {
    double s = std::max({std::abs(x), std::abs(y), 1e-300});
    return std::abs(x - y) / s;
  };
  EquivalenceReport rep;
  for (std::size_t idx = 0; idx < shape.size(); ++idx) {
    rep.max_abs_pi = std::max(rep.max_abs_pi, std::abs(agg_pi[idx] - grid.pi(idx)));
    rep.max_rel_pi = std::max(rep.max_rel_pi, rel(agg_pi[idx], grid.pi(idx)));
    for (std::size_t k = 0; k < shape.parts(); ++k) {
      double x = agg_l[k * shape.size() + idx], y = grid.pi_l(k, idx);
      rep.max_abs_pi_l = std::max(rep.max_abs_pi_l, std::abs(x - y));
      rep.max_rel_pi_l = std::max(rep.max_rel_pi_l, rel(x, y));
    }
  }
  return rep;
}

// CSV: a1..aK,pi,L1..LK (L_k is the conditional mean L_k(a)).
inline void write_grid_csv(std::ostream& os, const GridSolution& g) {
  const auto& shape = g.shape();
  for (std::size_t k = 0; k < shape.parts(); ++k) os << "a" << k + 1 << ",";
  os << "pi";
  for (std::size_t k = 0; k < shape.parts(); ++k) os << ",L" << k + 1;
  os << "\n";
  for (std::size_t idx = 0; idx < shape.size(); ++idx) {
    for (std::size_t k = 0; k < shape.parts(); ++k) os << shape.component(idx, k) << ",";
    os << format_double(g.pi(idx));
    for (std::size_t k = 0; k < shape.parts(); ++k) {
      os << "," << format_double(g.conditional_l(k, idx));
    }
    os << "\n";
  }
}

}  // namespace bfperf

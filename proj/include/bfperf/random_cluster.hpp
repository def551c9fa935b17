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

// Clusters whose classes pick their servers uniformly at random: sampling,
// the mean rank over assignments and empirical concentration around it.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <vector>

#include "bfperf/common.hpp"
#include "bfperf/grid.hpp"
#include "bfperf/rank.hpp"

namespace bfperf {

struct ServerGroup {
  int count = 0;
  double capacity = 1.0;
};

// Classes are numbered part by part; every class of part k draws d_k
// distinct servers.
struct RandomAssignmentSpec {
  int m = 0;
  std::vector<ServerGroup> groups;
  std::vector<int> part_sizes;
  std::vector<int> degrees;
  std::uint64_t seed = 0;

  int n() const { return std::accumulate(part_sizes.begin(), part_sizes.end(), 0); }
  std::size_t parts() const { return part_sizes.size(); }

  void validate() const {
    if (m < 1) throw InvalidArgument("random cluster needs at least one server");
    long total = 0;
    for (const auto& g : groups) {
      if (g.count < 1) throw InvalidArgument("server group sizes must be positive");
      if (!(g.capacity >= 0.0) || !std::isfinite(g.capacity)) {
        throw InvalidArgument("server group capacities must be finite and nonnegative");
      }
      total += g.count;
    }
    if (total != m) {
      throw InvalidArgument("server groups hold " + std::to_string(total) +
                            " servers, expected m=" + std::to_string(m));
    }
    if (part_sizes.empty() || degrees.size() != part_sizes.size()) {
      throw InvalidArgument("need one degree per part");
    }
    for (std::size_t k = 0; k < parts(); ++k) {
      if (part_sizes[k] < 1) throw InvalidArgument("part sizes must be positive");
      if (degrees[k] < 1 || degrees[k] > m) {
        throw InvalidArgument("degree of part " + std::to_string(k + 1) +
                              " must lie in [1, m]");
      }
    }
  }

  std::vector<double> server_capacities() const {
    std::vector<double> c;
    c.reserve(m);
    for (const auto& g : groups) c.insert(c.end(), g.count, g.capacity);
    return c;
  }

  // xi, the mean server capacity.
  double mean_capacity() const {
    double s = 0.0;
    for (const auto& g : groups) s += g.count * g.capacity;
    return s / m;
  }

  // m unit servers, K equal parts.
  static RandomAssignmentSpec uniform(int m, std::vector<int> part_sizes,
                                      std::vector<int> degrees, std::uint64_t seed = 0) {
    RandomAssignmentSpec s{m, {{m, 1.0}}, std::move(part_sizes), std::move(degrees), seed};
    s.validate();
    return s;
  }
};

// splitmix64 finalizer, used to derive independent per-trial seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
  return mix_seed(seed + trial);
}

namespace detail {

// Partial Fisher-Yates: the first d entries of `perm` become a uniform
// d-subset. Uniform whatever order `perm` starts in.
inline void draw_subset(std::vector<int>& perm, int d, std::mt19937_64& rng,
                        std::vector<int>& out) {
  const int m = static_cast<int>(perm.size());
  out.resize(d);
  for (int j = 0; j < d; ++j) {
    std::uniform_int_distribution<int> pick(j, m - 1);
    std::swap(perm[j], perm[pick(rng)]);
    out[j] = perm[j];
  }
}

}  // namespace detail

inline ClusterAssignment sample_assignment(const RandomAssignmentSpec& spec,
                                           std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<int> perm(spec.m);
  std::iota(perm.begin(), perm.end(), 0);
  ClusterAssignment c;
  c.n = spec.n();
  c.m = spec.m;
  c.server_capacity = spec.server_capacities();
  c.assign.reserve(c.n);
  for (std::size_t k = 0; k < spec.parts(); ++k) {
    for (int q = 0; q < spec.part_sizes[k]; ++q) {
      std::vector<int> servers;
      detail::draw_subset(perm, spec.degrees[k], rng, servers);
      c.assign.push_back(std::move(servers));
    }
  }
  return c;
}

// p_a = 1 - prod_k (1 - d_k/m)^{a_k}, the probability that a given server
// is reached by a set of classes with profile a.
inline double cover_probability(const RandomAssignmentSpec& spec, const std::vector<int>& a) {
  double log_miss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == 0) continue;
    if (spec.degrees[k] == spec.m) return 1.0;
    log_miss += a[k] * std::log1p(-static_cast<double>(spec.degrees[k]) / spec.m);
  }
  return -std::expm1(log_miss);
}

inline double mean_rank(const RandomAssignmentSpec& spec, const std::vector<int>& a) {
  spec.validate();
  if (a.size() != spec.parts()) throw InvalidArgument("profile needs one entry per part");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] < 0 || a[k] > spec.part_sizes[k]) {
      throw InvalidArgument("profile " + format_profile(a) + " outside the grid");
    }
  }
  return spec.mean_capacity() * spec.m * cover_probability(spec, a);
}

// The mean rank over assignments as a cardinality rank on the whole grid.
inline CardinalityRank mean_rank_function(const RandomAssignmentSpec& spec) {
  spec.validate();
  const double scale = spec.mean_capacity() * spec.m;
  return CardinalityRank::from_function(
      spec.part_sizes, [&](const std::vector<int>& a) { return scale * cover_probability(spec, a); });
}

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long trials = 0;

  bool covers(double v) const { return ci_low <= v && v <= ci_high; }
};

inline constexpr double kZ99 = 2.5758293035489004;

// Mean of M(A) for the set A made of the first a_k classes of each part,
// with a normal-approximation 99% interval. Only the classes of A are drawn.
inline MeanEstimate empirical_mean_rank(const RandomAssignmentSpec& spec,
                                        const std::vector<int>& a, long trials,
                                        std::uint64_t seed, unsigned threads = 1) {
  mean_rank(spec, a);  // validates spec and profile
  if (trials < 100) throw InvalidArgument("empirical_mean_rank needs at least 100 trials");
  const auto caps = spec.server_capacities();
  std::vector<double> values(trials);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    std::mt19937_64 rng(trial_seed(seed, t));
    std::vector<int> perm(spec.m), servers;
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<unsigned char> mark(spec.m, 0);
    for (std::size_t k = 0; k < a.size(); ++k) {
      for (int q = 0; q < a[k]; ++q) {
        detail::draw_subset(perm, spec.degrees[k], rng, servers);
        for (int s : servers) mark[s] = 1;
      }
    }
    double total = 0.0;
    for (int s = 0; s < spec.m; ++s) {
      if (mark[s]) total += caps[s];
    }
    values[t] = total;
  });

  MeanEstimate e;
  e.trials = trials;
  double mean = 0.0, m2 = 0.0;
  for (long t = 0; t < trials; ++t) {
    double d = values[t] - mean;
    mean += d / (t + 1);
    m2 += d * (values[t] - mean);
  }
  e.mean = mean;
  e.std_error = std::sqrt(m2 / (trials - 1) / trials);
  e.ci_low = mean - kZ99 * e.std_error;
  e.ci_high = mean + kZ99 * e.std_error;
  return e;
}

struct ConcentrationReport {
  int n = 0;  // largest part size
  double epsilon = 0.0;
  GridShape shape;
  std::vector<unsigned char> in_band;     // per trial
  std::vector<double> worst_trial;        // per trial, max |M/mu - 1|
  std::vector<double> worst_profile;      // per grid point, over trials

  double probability() const {
    if (in_band.empty()) return 0.0;
    double hits = 0.0;
    for (auto b : in_band) hits += b;
    return hits / static_cast<double>(in_band.size());
  }
  double worst_deviation() const {
    double w = 0.0;
    for (double v : worst_trial) w = std::max(w, v);
    return w;
  }
};

inline constexpr int kConcentrationServers = 5000;
inline constexpr int kConcentrationClasses = 500;

// Per trial, draws one assignment and compares M(A) with the mean rank on
// every profile. Each random ordering of the classes of every part gives one
// representative per profile (the first a_k classes of part k); all of them
// are scored at once from the histogram of first-cover positions. Profiles
// with a single class are checked for every class. Sampling representatives
// under-estimates the failure probability of the full band.
inline ConcentrationReport concentration_experiment(const RandomAssignmentSpec& spec,
                                                    double epsilon, long trials,
                                                    int subsets_per_profile,
                                                    std::uint64_t seed,
                                                    unsigned threads = 1) {
  spec.validate();
  const int largest = *std::max_element(spec.part_sizes.begin(), spec.part_sizes.end());
  if (spec.m > kConcentrationServers || largest > kConcentrationClasses) {
    throw SizeLimitError(
        "concentration_experiment is limited to m <= 5000 and parts of at most 500 classes");
  }
  if (subsets_per_profile < 1) throw InvalidArgument("subsets_per_profile must be >= 1");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (trials < 1) throw InvalidArgument("trials must be positive");

  ConcentrationReport rep;
  rep.n = largest;
  rep.epsilon = epsilon;
  rep.shape = GridShape(spec.part_sizes);
  const auto mean = mean_rank_function(spec);
  const GridShape& shape = rep.shape;
  const std::size_t parts = spec.parts();
  const auto caps = spec.server_capacities();
  const double total_capacity = std::accumulate(caps.begin(), caps.end(), 0.0);
  std::vector<int> first_class(parts, 0);
  for (std::size_t k = 1; k < parts; ++k) {
    first_class[k] = first_class[k - 1] + spec.part_sizes[k - 1];
  }

  rep.in_band.assign(trials, 0);
  rep.worst_trial.assign(trials, 0.0);
  std::vector<std::vector<double>> per_trial_profile(trials);

  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    const auto c = sample_assignment(spec, trial_seed(seed, t));
    std::mt19937_64 rng(mix_seed(trial_seed(seed, t) ^ 0x5bd1e995ULL));
    std::vector<double> worst(shape.size(), 0.0);
    bool ok = true;
    auto score = [&](std::size_t idx, double m_value) {
      double mu = mean.at(idx);
      if (idx == 0) return;
      double dev = std::abs(m_value / mu - 1.0);
      worst[idx] = std::max(worst[idx], dev);
      if (!approx_le((1.0 - epsilon) * mu, m_value) || !approx_le(m_value, (1.0 + epsilon) * mu)) {
        ok = false;
      }
    };

    // Single classes, every one of them.
    for (std::size_t k = 0; k < parts; ++k) {
      std::size_t idx = shape.stride(k);
      for (int q = 0; q < spec.part_sizes[k]; ++q) {
        double v = 0.0;
        for (int s : c.assign[first_class[k] + q]) v += caps[s];
        score(idx, v);
      }
    }

    std::vector<double> hist(shape.size());
    std::vector<int> order;
    std::vector<std::vector<int>> first_cover(parts, std::vector<int>(spec.m));
    for (int rep_i = 0; rep_i < subsets_per_profile; ++rep_i) {
      for (std::size_t k = 0; k < parts; ++k) {
        const int nk = spec.part_sizes[k];
        order.resize(nk);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        auto& fc = first_cover[k];
        std::fill(fc.begin(), fc.end(), nk);
        for (int pos = 0; pos < nk; ++pos) {
          for (int s : c.assign[first_class[k] + order[pos]]) fc[s] = std::min(fc[s], pos);
        }
      }
      // Server s is missed by profile a iff first_cover_k(s) >= a_k for all k,
      // so the missed capacity is a suffix sum of the histogram.
      std::fill(hist.begin(), hist.end(), 0.0);
      for (int s = 0; s < spec.m; ++s) {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < parts; ++k) idx += first_cover[k][s] * shape.stride(k);
        hist[idx] += caps[s];
      }
      for (std::size_t k = 0; k < parts; ++k) {
        for (std::size_t idx = shape.size(); idx-- > 0;) {
          if (shape.component(idx, k) < shape.size_of(k)) hist[idx] += hist[idx + shape.stride(k)];
        }
      }
      for (std::size_t idx = 1; idx < shape.size(); ++idx) {
        score(idx, total_capacity - hist[idx]);
      }
    }
    rep.in_band[t] = ok ? 1 : 0;
    rep.worst_trial[t] = *std::max_element(worst.begin(), worst.end());
    per_trial_profile[t] = std::move(worst);
  });

  rep.worst_profile.assign(shape.size(), 0.0);
  for (const auto& w : per_trial_profile) {
    for (std::size_t idx = 0; idx < w.size(); ++idx) {
      rep.worst_profile[idx] = std::max(rep.worst_profile[idx], w[idx]);
    }
  }
  return rep;
}

// Two parts of n classes each, m = ceil(ratio * n) unit servers and degrees
// ceil(coeff * log n).
inline RandomAssignmentSpec log_degree_spec(int n, double ratio, double coeff = 4.0) {
  int m = static_cast<int>(std::ceil(ratio * n));
  int d = static_cast<int>(std::ceil(coeff * std::log(static_cast<double>(n))));
  return RandomAssignmentSpec::uniform(m, {n, n}, {d, d});
}

// CSV: trial,n,epsilon,in_band,worst_rel_dev
inline void write_concentration_csv(std::ostream& os, const ConcentrationReport& r) {
  os << "trial,n,epsilon,in_band,worst_rel_dev\n";
  for (std::size_t t = 0; t < r.in_band.size(); ++t) {
    os << t << "," << r.n << "," << format_double(r.epsilon) << ","
       << static_cast<int>(r.in_band[t]) << "," << format_double(r.worst_trial[t]) << "\n";
  }
}

// H[p||q] for Bernoulli laws.
inline double kl_divergence(double p, double q) {
  if (!(p > 0.0 && p < 1.0) || !(q > 0.0 && q < 1.0)) {
    throw InvalidArgument("kl_divergence needs p and q in (0, 1)");
  }
  return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

}  // namespace bfperf

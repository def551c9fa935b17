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

// Independent verification backends: the balance function, a truncated
// state-space solve and an event-driven simulator.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <unordered_map>
#include <vector>

#include "bfperf/common.hpp"
#include "bfperf/exact.hpp"
#include "bfperf/rank.hpp"

namespace bfperf {

using State = std::vector<int>;

struct StateHash {
  std::size_t operator()(const State& x) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (int v : x) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

inline Subset active_set(const State& x) {
  Subset a = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0) a |= singleton(static_cast<int>(i));
  }
  return a;
}

// Memoized log Phi(x) for balanced fairness in the polymatroid of `r`.
// Not synchronized: confine one cache to one worker.
class BalanceCache {
 public:
  explicit BalanceCache(RankFunction r) : r_(std::move(r)) {
    if (r_.n() <= 20) table_ = r_.tabulate();
    memo_.emplace(State(r_.n(), 0), 0.0);
  }

  const RankFunction& rank() const { return r_; }
  std::size_t size() const { return memo_.size(); }

  double log_phi(const State& x) {
    if (static_cast<int>(x.size()) != r_.n()) throw InvalidArgument("state size mismatch");
    for (int v : x) {
      if (v < 0) throw InvalidArgument("negative state component");
    }
    return lookup(x);
  }

  double phi(const State& x) { return std::exp(log_phi(x)); }

  // Relative residual of Phi(x) mu(I(x)) = sum_{i in I(x)} Phi(x - e_i).
  double residual(const State& x) {
    Subset a = active_set(x);
    if (a == 0) return std::abs(log_phi(x));
    double lhs_log = log_phi(x) + std::log(mu(a));
    double rhs_log = -INFINITY;
    State y = x;
    for (int i = 0; i < r_.n(); ++i) {
      if (!contains(a, i)) continue;
      --y[i];
      rhs_log = log_add(rhs_log, log_phi(y));
      ++y[i];
    }
    return std::abs(std::expm1(lhs_log - rhs_log));
  }

 private:
  double mu(Subset a) const { return table_.empty() ? r_(a) : table_[a]; }

  double lookup(const State& x) {
    auto it = memo_.find(x);
    if (it != memo_.end()) return it->second;
    Subset a = active_set(x);
    double cap = mu(a);
    if (!(cap > 0.0)) {
      throw InvalidArgument("rank of active set " + format_subset(a) +
                            " is zero; balance function undefined");
    }
    double acc = -INFINITY;
    State y = x;
    for (int i = 0; i < r_.n(); ++i) {
      if (!contains(a, i)) continue;
      --y[i];
      acc = log_add(acc, lookup(y));
      ++y[i];
    }
    double v = acc - std::log(cap);
    memo_.emplace(x, v);
    return v;
  }

  RankFunction r_;
  std::vector<double> table_;
  std::unordered_map<State, double, StateHash> memo_;
};

inline double balance(const RankFunction& r, const State& x) {
  BalanceCache cache(r);
  return cache.log_phi(x);
}

// phi_i(x) = Phi(x - e_i) / Phi(x) on active queues.
inline std::vector<double> service_rates(BalanceCache& cache, const State& x) {
  std::vector<double> rates(x.size(), 0.0);
  double here = cache.log_phi(x);
  State y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0) continue;
    --y[i];
    rates[i] = std::exp(cache.log_phi(y) - here);
    ++y[i];
  }
  return rates;
}

inline std::vector<double> service_rates(const RankFunction& r, const State& x) {
  if (active_set(x) == 0) throw InvalidArgument("service rates need a nonzero state");
  BalanceCache cache(r);
  return service_rates(cache, x);
}

// ---------------------------------------------------------------------------
// Truncated state space

inline constexpr int kTruncatedLimit = 4;
inline constexpr double kTailTolerance = 1e-8;

namespace detail {

// Colex rank of a composition of |x| into n parts (stars and bars).
class CompositionRanker {
 public:
  CompositionRanker(int n, int max_level) : n_(n) {
    int rows = max_level + n + 1;
    binom_.assign(static_cast<std::size_t>(rows) * (n + 1), 0);
    for (int a = 0; a < rows; ++a) {
      for (int b = 0; b <= n && b <= a; ++b) {
        at(a, b) = (b == 0 || b == a) ? 1 : at(a - 1, b - 1) + at(a - 1, b);
      }
    }
  }
  std::uint64_t count(int level) const { return n_ == 1 ? 1 : at(level + n_ - 1, n_ - 1); }
  std::uint64_t rank(const State& x) const {
    std::uint64_t r = 0;
    int prefix = 0;
    for (int j = 0; j + 1 < n_; ++j) {
      prefix += x[j];
      r += at(prefix + j, j + 1);
    }
    return r;
  }

 private:
  std::uint64_t& at(int a, int b) { return binom_[static_cast<std::size_t>(a) * (n_ + 1) + b]; }
  std::uint64_t at(int a, int b) const {
    return binom_[static_cast<std::size_t>(a) * (n_ + 1) + b];
  }
  int n_;
  std::vector<std::uint64_t> binom_;
};

template <typename F>
void for_each_composition(int n, int level, State& x, int pos, int left, F&& f) {
  if (pos == n - 1) {
    x[pos] = left;
    f(x);
    return;
  }
  for (int v = 0; v <= left; ++v) {
    x[pos] = v;
    for_each_composition(n, level, x, pos + 1, left - v, f);
  }
}

}  // namespace detail

// pi(x) proportional to Phi(x) rho^x over |x| <= N, with subset aggregates.
class TruncatedSolution {
 public:
  int n() const { return n_; }
  int truncation() const { return truncation_; }
  double tail_mass() const { return tail_; }
  double pi(Subset a) const { return pi_set_[a]; }
  double pi_l(int i, Subset a) const { return pi_l_[static_cast<std::size_t>(i) * pi_set_.size() + a]; }
  double conditional_l(int i, Subset a) const {
    return contains(a, i) ? pi_l(i, a) / pi_set_[a] : 0.0;
  }
  double total_l(int i) const { return totals_[i]; }
  std::size_t states() const { return states_; }
  // Normalized probability of a state with |x| <= N.
  double probability(const State& x) const {
    int level = 0;
    for (int v : x) level += v;
    if (level > truncation_) return 0.0;
    return levels_[level][ranker_->rank(x)];
  }

 private:
  friend TruncatedSolution stationary_truncated(const RankFunction&, const Workload&, int,
                                                double);
  int n_ = 0;
  int truncation_ = 0;
  double tail_ = 0.0;
  std::size_t states_ = 0;
  std::vector<double> pi_set_;
  std::vector<double> pi_l_;
  std::vector<double> totals_;
  std::vector<std::vector<double>> levels_;
  std::shared_ptr<const detail::CompositionRanker> ranker_;
};

inline TruncatedSolution stationary_truncated(const RankFunction& r, const Workload& w,
                                              int truncation,
                                              double tail_tolerance = kTailTolerance) {
  require_size(r.n(), kTruncatedLimit, "stationary_truncated");
  require_stable(stability_margin(r, w));
  if (truncation < 1) throw InvalidArgument("truncation level must be positive");
  const int n = r.n();
  const auto mu = r.tabulate();
  const auto rho = w.intensities();

  TruncatedSolution out;
  out.n_ = n;
  out.truncation_ = truncation;
  auto ranker = std::make_shared<detail::CompositionRanker>(n, truncation);
  out.ranker_ = ranker;
  out.levels_.resize(truncation + 1);
  out.levels_[0] = {1.0};
  const std::size_t subsets = std::size_t{1} << n;
  out.pi_set_.assign(subsets, 0.0);
  out.pi_l_.assign(subsets * n, 0.0);
  out.pi_set_[0] = 1.0;

  State x(n, 0);
  for (int level = 1; level <= truncation; ++level) {
    auto& cur = out.levels_[level];
    const auto& prev = out.levels_[level - 1];
    cur.assign(ranker->count(level), 0.0);
    detail::for_each_composition(n, level, x, 0, level, [&](const State& s) {
      Subset a = active_set(s);
      double num = 0.0;
      State y = s;
      for (int i = 0; i < n; ++i) {
        if (s[i] == 0) continue;
        --y[i];
        num += rho[i] * prev[ranker->rank(y)];
        ++y[i];
      }
      double p = num / mu[a];
      cur[ranker->rank(s)] = p;
      out.pi_set_[a] += p;
      for (int i = 0; i < n; ++i) out.pi_l_[i * subsets + a] += s[i] * p;
    });
  }

  double z = 0.0, tail = 0.0;
  for (double v : out.pi_set_) z += v;
  for (double v : out.levels_[truncation]) tail += v;
  for (auto& lvl : out.levels_) {
    out.states_ += lvl.size();
    for (double& v : lvl) v /= z;
  }
  for (double& v : out.pi_set_) v /= z;
  for (double& v : out.pi_l_) v /= z;
  out.tail_ = tail / z;
  out.totals_.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (Subset a = 0; a < subsets; ++a) out.totals_[i] += out.pi_l_[i * subsets + a];
  }
  if (out.tail_ > tail_tolerance) {
    throw RangeError("truncation N=" + std::to_string(truncation) + " leaves tail mass " +
                     format_double(out.tail_) + "; increase N");
  }
  return out;
}

// Doubles N from `start` until the tail at level N is below tolerance.
inline TruncatedSolution stationary_truncated_auto(const RankFunction& r, const Workload& w,
                                                   int start = 32, int max_level = 4096,
                                                   double tail_tolerance = kTailTolerance) {
  for (int level = start;; level *= 2) {
    try {
      return stationary_truncated(r, w, level, tail_tolerance);
    } catch (const RangeError&) {
      if (level * 2 > max_level) throw;
    }
  }
}

// ---------------------------------------------------------------------------
// Discrete-event simulation

enum class SizeDistribution { kExponential, kHyperexponential };

struct SimOptions {
  SizeDistribution distribution = SizeDistribution::kExponential;
  std::uint64_t events = 1'000'000;
  double warmup_fraction = 0.2;
  int batches = 20;
  std::uint64_t seed = 1;
  int count_cap = 100'000;  // total jobs beyond which the run is declared divergent
  double cv = 2.0;          // coefficient of variation of the hyperexponential
};

struct SimEstimate {
  std::vector<double> mean;    // time-average number of jobs per queue
  std::vector<double> std_error;  // batch-means standard error
  std::uint64_t events = 0;
  double horizon = 0.0;        // simulated time after warmup
  bool diverged = false;
};

// Two-phase hyperexponential with balanced means: phase p is chosen with
// probability prob[p] and has rate rate[p] / sigma.
struct HyperexpPhases {
  double prob[2];
  double rate[2];
};

inline HyperexpPhases balanced_hyperexponential(double cv) {
  double c2 = cv * cv;
  double p1 = 0.5 * (1.0 + std::sqrt((c2 - 1.0) / (c2 + 1.0)));
  return {{p1, 1.0 - p1}, {2.0 * p1, 2.0 * (1.0 - p1)}};
}

// Each queue serves its jobs in egalitarian processor sharing at total rate
// phi_i(x); job sizes are exponential or hyperexponential with mean sigma_i.
inline SimEstimate simulate(const RankFunction& r, const Workload& w, const SimOptions& opt) {
  w.validate(r.n());
  require_stable(stability_margin(r, w));
  if (opt.batches < 2) throw InvalidArgument("need at least two batches");
  const int n = r.n();
  const int phases = opt.distribution == SizeDistribution::kExponential ? 1 : 2;
  HyperexpPhases hp = opt.distribution == SizeDistribution::kExponential
                          ? HyperexpPhases{{1.0, 0.0}, {1.0, 0.0}}
                          : balanced_hyperexponential(opt.cv);

  BalanceCache cache(r);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  State x(n, 0);
  std::vector<int> by_phase(static_cast<std::size_t>(n) * phases, 0);
  std::vector<double> rates(n, 0.0);
  std::vector<double> event_rate;
  event_rate.reserve(n * (phases + 1));

  const std::uint64_t warmup = static_cast<std::uint64_t>(opt.warmup_fraction * opt.events);
  const std::uint64_t measured = opt.events - warmup;
  const std::uint64_t per_batch = std::max<std::uint64_t>(1, measured / opt.batches);
  std::vector<double> batch_area(static_cast<std::size_t>(opt.batches) * n, 0.0);
  std::vector<double> batch_time(opt.batches, 0.0);

  SimEstimate est;
  est.mean.assign(n, 0.0);
  est.std_error.assign(n, 0.0);
  int total_jobs = 0;

  for (std::uint64_t ev = 0; ev < opt.events; ++ev) {
    if (total_jobs > 0) {
      rates = service_rates(cache, x);
    } else {
      std::fill(rates.begin(), rates.end(), 0.0);
    }
    event_rate.clear();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      event_rate.push_back(w.lambda[i]);
      total += w.lambda[i];
      for (int p = 0; p < phases; ++p) {
        double v = 0.0;
        int y = by_phase[i * phases + p];
        if (y > 0) v = y * (rates[i] / x[i]) * hp.rate[p] / w.sigma[i];
        event_rate.push_back(v);
        total += v;
      }
    }
    // Expected holding time in place of a sampled one: same time averages,
    // lower variance.
    double hold = 1.0 / total;
    if (ev >= warmup) {
      std::uint64_t b = std::min<std::uint64_t>((ev - warmup) / per_batch, opt.batches - 1);
      batch_time[b] += hold;
      for (int i = 0; i < n; ++i) batch_area[b * n + i] += x[i] * hold;
      est.horizon += hold;
      ++est.events;
    }
    double u = unif(rng) * total;
    std::size_t pick = 0;
    for (; pick + 1 < event_rate.size(); ++pick) {
      if (u < event_rate[pick]) break;
      u -= event_rate[pick];
    }
    int queue = static_cast<int>(pick / (phases + 1));
    int slot = static_cast<int>(pick % (phases + 1));
    if (slot == 0) {
      int p = (phases == 2 && unif(rng) >= hp.prob[0]) ? 1 : 0;
      ++by_phase[queue * phases + p];
      ++x[queue];
      ++total_jobs;
    } else {
      --by_phase[queue * phases + slot - 1];
      --x[queue];
      --total_jobs;
    }
    if (total_jobs > opt.count_cap) {
      est.diverged = true;
      break;
    }
  }

  int used = 0;
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
  for (int b = 0; b < opt.batches; ++b) {
    if (!(batch_time[b] > 0.0)) continue;
    ++used;
    for (int i = 0; i < n; ++i) {
      double m = batch_area[b * n + i] / batch_time[b];
      sum[i] += m;
      sum_sq[i] += m * m;
    }
  }
  for (int i = 0; i < n; ++i) {
    double area = 0.0;
    for (int b = 0; b < opt.batches; ++b) area += batch_area[b * n + i];
    est.mean[i] = est.horizon > 0.0 ? area / est.horizon : 0.0;
    if (used >= 2) {
      double mean = sum[i] / used;
      double var = std::max(0.0, (sum_sq[i] - used * mean * mean) / (used - 1));
      est.std_error[i] = std::sqrt(var / used);
    }
  }
  return est;
}

// CSV: queue,mean,stderr,events,horizon
inline void write_sim_csv(std::ostream& os, const SimEstimate& e) {
  os << "queue,mean,stderr,events,horizon\n";
  for (std::size_t i = 0; i < e.mean.size(); ++i) {
    os << i + 1 << "," << format_double(e.mean[i]) << "," << format_double(e.std_error[i])
       << "," << e.events << "," << format_double(e.horizon) << "\n";
  }
}

}  // namespace bfperf

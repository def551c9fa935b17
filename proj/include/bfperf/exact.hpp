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

// Exact performance of balanced fairness in a polymatroid capacity set via
// the recursions over subsets of active queues.

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "bfperf/common.hpp"
#include "bfperf/rank.hpp"

namespace bfperf {

inline constexpr int kExactLimit = 20;
inline constexpr double kOverflowGuard = 1e280;
inline constexpr double kBoundaryMargin = 1e-9;

struct Workload {
  std::vector<double> lambda;  // arrival rate per queue
  std::vector<double> sigma;   // mean job size per queue

  static Workload from_intensity(std::vector<double> rho) {
    std::vector<double> ones(rho.size(), 1.0);
    return Workload{std::move(rho), std::move(ones)};
  }

  int n() const { return static_cast<int>(lambda.size()); }
  double rho(int i) const { return lambda[i] * sigma[i]; }
  std::vector<double> intensities() const {
    std::vector<double> r(lambda.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = lambda[i] * sigma[i];
    return r;
  }
  double load(Subset a) const {
    double s = 0.0;
    for (int i = 0; i < n(); ++i) {
      if (contains(a, i)) s += rho(i);
    }
    return s;
  }

  void validate(int expected_n) const {
    if (lambda.size() != sigma.size()) {
      throw InvalidArgument("lambda and sigma must have the same length");
    }
    if (n() != expected_n) {
      throw InvalidArgument("workload lists " + std::to_string(n()) +
                            " queues, model has " + std::to_string(expected_n));
    }
    for (int i = 0; i < n(); ++i) {
      if (!(lambda[i] > 0.0) || !(sigma[i] > 0.0) || !std::isfinite(rho(i))) {
        throw InvalidArgument("queue " + std::to_string(i + 1) +
                              ": arrival rate and mean size must be positive");
      }
    }
  }
};

struct StabilityReport {
  double margin = 0.0;  // min over nonempty A of mu(A) - rho(A)
  Subset argmin = 0;
  double full_rank = 0.0;  // mu(I), the scale for the boundary cutoff

  bool stable() const { return margin > kBoundaryMargin * full_rank; }
};

inline StabilityReport stability_margin(const RankFunction& r, const Workload& w) {
  w.validate(r.n());
  require_size(r.n(), kExchangeLimit, "stability_margin");
  StabilityReport rep;
  rep.margin = std::numeric_limits<double>::infinity();
  const Subset all = full_set(r.n());
  rep.full_rank = r(all);
  const auto rho = w.intensities();
  for (Subset a = 1; a <= all; ++a) {
    double load = 0.0;
    for (int i = 0; i < r.n(); ++i) {
      if (contains(a, i)) load += rho[i];
    }
    double m = r(a) - load;
    if (m <= rep.margin) {  // ties go to the later, larger subset
      rep.margin = m;
      rep.argmin = a;
    }
  }
  return rep;
}

inline void require_stable(const StabilityReport& s) {
  if (!s.stable()) {
    throw UnstableError("unstable: mu" + format_subset(s.argmin) +
                            " - rho" + format_subset(s.argmin) + " = " +
                            format_double(s.margin) + " is not positive",
                        s.argmin, s.margin);
  }
}

// pi(A) and the products pi(A) L_i(A), indexed by bitmask.
class SetSolution {
 public:
  SetSolution(int n, std::vector<double> pi, std::vector<double> pi_l)
      : n_(n), pi_(std::move(pi)), pi_l_(std::move(pi_l)) {
    totals_.assign(n_, 0.0);
    for (int i = 0; i < n_; ++i) {
      for (Subset a = 0; a < pi_.size(); ++a) totals_[i] += pi_l_[slot(i, a)];
    }
  }

  int n() const { return n_; }
  std::size_t subsets() const { return pi_.size(); }
  double pi(Subset a) const { return pi_[a]; }
  const std::vector<double>& pi() const { return pi_; }
  // pi(A) L_i(A)
  double pi_l(int i, Subset a) const { return pi_l_[slot(i, a)]; }
  // L_i(A) = E[X_i | I(X) = A]
  double conditional_l(int i, Subset a) const {
    if (!contains(a, i)) return 0.0;
    return pi_l_[slot(i, a)] / pi_[a];
  }
  double total_l(int i) const { return totals_[i]; }
  const std::vector<double>& total_l() const { return totals_; }
  double active_probability(int i) const {
    double p = 0.0;
    for (Subset a = 0; a < pi_.size(); ++a) {
      if (contains(a, i)) p += pi_[a];
    }
    return p;
  }

 private:
  std::size_t slot(int i, Subset a) const {
    return static_cast<std::size_t>(i) * pi_.size() + a;
  }
  int n_;
  std::vector<double> pi_;
  std::vector<double> pi_l_;
  std::vector<double> totals_;
};

inline SetSolution solve_exact(const RankFunction& r, const Workload& w,
                               unsigned threads = 1) {
  require_size(r.n(), kExactLimit, "solve_exact");
  require_stable(stability_margin(r, w));
  const int n = r.n();
  const std::size_t count = std::size_t{1} << n;
  const auto mu = r.tabulate();
  const auto rho = w.intensities();

  std::vector<double> denom(count, 0.0);
  for (Subset a = 1; a < count; ++a) {
    double load = 0.0;
    for (int i = 0; i < n; ++i) {
      if (contains(a, i)) load += rho[i];
    }
    denom[a] = mu[a] - load;
  }

  // Increasing numeric order visits every strict subset of A before A.
  std::vector<double> pi(count, 0.0);
  pi[0] = 1.0;
  for (Subset a = 1; a < count; ++a) {
    double num = 0.0;
    for (int i = 0; i < n; ++i) {
      if (contains(a, i)) num += rho[i] * pi[a & ~singleton(i)];
    }
    pi[a] = num / denom[a];
    if (!(pi[a] <= kOverflowGuard)) {
      throw RangeError("unnormalized probability of " + format_subset(a) +
                       " exceeds 1e280");
    }
  }

  std::vector<double> pi_l(count * n, 0.0);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t qi) {
    const int i = static_cast<int>(qi);
    double* row = pi_l.data() + qi * count;
    for (Subset a = 1; a < count; ++a) {
      if (!contains(a, i)) continue;
      Subset without_i = a & ~singleton(i);
      double num = rho[i] * pi[without_i] + rho[i] * pi[a];
      for (int j = 0; j < n; ++j) {
        if (j != i && contains(a, j)) num += rho[j] * row[a & ~singleton(j)];
      }
      row[a] = num / denom[a];
    }
  });

  double z = 0.0;
  for (double v : pi) z += v;
  for (double& v : pi) v /= z;
  for (double& v : pi_l) v /= z;
  return SetSolution(n, std::move(pi), std::move(pi_l));
}

struct QueueMetrics {
  double mean_jobs = 0.0;           // L_i
  double delay = 0.0;               // L_i / lambda_i
  double active_probability = 0.0;  // P{X_i > 0}
  double throughput = 0.0;          // rho_i / P{X_i > 0}
};

inline std::vector<QueueMetrics> metrics(const SetSolution& s, const Workload& w) {
  w.validate(s.n());
  std::vector<QueueMetrics> out(s.n());
  for (int i = 0; i < s.n(); ++i) {
    auto& q = out[i];
    q.mean_jobs = s.total_l(i);
    q.delay = q.mean_jobs / w.lambda[i];
    q.active_probability = s.active_probability(i);
    if (!(q.active_probability > 0.0)) {
      throw ConsistencyError("queue " + std::to_string(i + 1) +
                             " is never active despite positive load");
    }
    q.throughput = w.rho(i) / q.active_probability;
  }
  return out;
}

// CSV: bitmask,subset,pi
inline void write_subset_csv(std::ostream& os, const SetSolution& s) {
  os << "bitmask,subset,pi\n";
  for (Subset a = 0; a < s.subsets(); ++a) {
    os << a << ",\"" << format_subset(a) << "\"," << format_double(s.pi(a)) << "\n";
  }
}

// CSV: queue,L,delay,throughput,active_probability
inline void write_queue_csv(std::ostream& os, const std::vector<QueueMetrics>& m) {
  os << "queue,L,delay,throughput,active_probability\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << i + 1 << "," << format_double(m[i].mean_jobs) << ","
       << format_double(m[i].delay) << "," << format_double(m[i].throughput) << ","
       << format_double(m[i].active_probability) << "\n";
  }
}

}  // namespace bfperf

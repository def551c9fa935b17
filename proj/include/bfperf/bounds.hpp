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

// Stochastic bounds for capacity sets squeezed between (1-eps)C and
// (1+eps)C, and their use on access trees and randomized clusters.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bfperf/common.hpp"
#include "bfperf/exact.hpp"
#include "bfperf/polysym.hpp"
#include "bfperf/rank.hpp"

namespace bfperf {

inline RankFunction scale_rank(const RankFunction& r, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw InvalidArgument("scale factor must be positive");
  }
  return r.scaled(factor);
}

inline CardinalityRank scale_rank(const CardinalityRank& h, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw InvalidArgument("scale factor must be positive");
  }
  return h.scaled(factor);
}

// Bounds on one metric per queue or part. The minus system has capacity
// (1-eps)C, the plus system (1+eps)C.
struct SandwichResult {
  double epsilon = 0.0;
  double log_pi0_minus = 0.0;
  double log_pi0_plus = 0.0;
  std::vector<double> lower;
  std::vector<double> upper;

  // pi_-(0) / pi_+(0), at most 1.
  double ratio() const { return std::exp(log_pi0_minus - log_pi0_plus); }
};

namespace detail {

inline void check_epsilon(double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw InvalidArgument("epsilon must lie in [0, 1)");
}

}  // namespace detail

// Mean number of jobs per queue.
inline SandwichResult sandwich_L(const RankFunction& reference, double eps, const Workload& w,
                                 unsigned threads = 1) {
  detail::check_epsilon(eps);
  auto minus = solve_exact(scale_rank(reference, 1.0 - eps), w, threads);
  auto plus = solve_exact(scale_rank(reference, 1.0 + eps), w, threads);
  SandwichResult s;
  s.epsilon = eps;
  s.log_pi0_minus = std::log(minus.pi(0));
  s.log_pi0_plus = std::log(plus.pi(0));
  const double ratio = s.ratio();
  for (int i = 0; i < reference.n(); ++i) {
    s.lower.push_back(ratio * plus.total_l(i));
    s.upper.push_back(minus.total_l(i) / ratio);
  }
  return s;
}

// Mean number of jobs summed over the queues of each part.
inline SandwichResult sandwich_L(const CardinalityRank& reference, double eps,
                                 const GridWorkload& w, unsigned threads = 1) {
  detail::check_epsilon(eps);
  PolysymOptions opt;
  opt.threads = threads;
  opt.capacity_scale = 1.0 - eps;
  auto minus = solve_polysym(reference, w, opt);
  opt.capacity_scale = 1.0 + eps;
  auto plus = solve_polysym(reference, w, opt);
  SandwichResult s;
  s.epsilon = eps;
  s.log_pi0_minus = minus.log_pi0();
  s.log_pi0_plus = plus.log_pi0();
  const double ratio = s.ratio();
  for (std::size_t k = 0; k < reference.shape().parts(); ++k) {
    s.lower.push_back(ratio * plus.total_l(k));
    s.upper.push_back(minus.total_l(k) / ratio);
  }
  return s;
}

// Throughput bounds for users of an access tree whose access rates lie in
// [(1-eps) r_k, (1+eps) r_k] and whose shared link lies in
// [(1-eps) C, (1+eps) C]: ratio * gamma_- <= gamma_i <= gamma_+ / ratio.
inline SandwichResult tree_access_bounds(const std::vector<double>& rates, double shared_capacity,
                                         double eps, const GridWorkload& w,
                                         unsigned threads = 1) {
  detail::check_epsilon(eps);
  if (rates.size() != w.sizes.size()) throw InvalidArgument("one access rate per part");
  double total = 0.0;
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (!(w.load[k] < (1.0 - eps) * rates[k])) {
      throw InvalidArgument("part " + std::to_string(k + 1) + ": load " +
                            format_double(w.load[k]) + " is not below (1-eps) r_k = " +
                            format_double((1.0 - eps) * rates[k]));
    }
    total += w.sizes[k] * w.load[k];
  }
  if (!(total < (1.0 - eps) * shared_capacity)) {
    throw InvalidArgument("total load " + format_double(total) +
                          " is not below (1-eps) C = " +
                          format_double((1.0 - eps) * shared_capacity));
  }
  auto h = access_tree_rank(w.sizes, rates, shared_capacity);
  PolysymOptions opt;
  opt.threads = threads;
  opt.capacity_scale = 1.0 - eps;
  auto minus = solve_polysym(h, w, opt);
  opt.capacity_scale = 1.0 + eps;
  auto plus = solve_polysym(h, w, opt);
  auto gm = access_tree_throughput(minus, w);
  auto gp = access_tree_throughput(plus, w);
  SandwichResult s;
  s.epsilon = eps;
  s.log_pi0_minus = minus.log_pi0();
  s.log_pi0_plus = plus.log_pi0();
  const double ratio = s.ratio();
  for (std::size_t k = 0; k < gm.size(); ++k) {
    s.lower.push_back(ratio * gm[k]);
    s.upper.push_back(gp[k] / ratio);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Randomized cluster: the mean capacity set and its delay bounds.

// h(a) = m (1 - prod_k (1 - d_k/m)^{a_k}) for m unit servers.
inline CardinalityRank mean_cluster_rank(int m, const std::vector<int>& sizes,
                                         const std::vector<int>& degrees) {
  if (m < 1) throw InvalidArgument("server count must be positive");
  if (degrees.size() != sizes.size()) throw InvalidArgument("one degree per part");
  for (int d : degrees) {
    if (d < 1 || d > m) throw InvalidArgument("degrees must lie in [1, m]");
  }
  return CardinalityRank::from_function(sizes, [&](const std::vector<int>& a) {
    double log_miss = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k] == 0) continue;
      if (degrees[k] == m) return static_cast<double>(m);
      log_miss += a[k] * std::log1p(-static_cast<double>(degrees[k]) / m);
    }
    return -m * std::expm1(log_miss);
  });
}

// Loads proportional to the degrees with the full profile saturated:
// load_k = d_k / sum(d) * h(n, ..., n) / n. Parts must have equal size n.
inline std::vector<double> boundary_load(const CardinalityRank& h,
                                         const std::vector<int>& degrees) {
  const auto& sizes = h.sizes();
  for (int s : sizes) {
    if (s != sizes.front()) throw InvalidArgument("boundary load needs equal part sizes");
  }
  double dsum = 0.0;
  for (int d : degrees) dsum += d;
  const double full = h.at(h.shape().size() - 1);
  std::vector<double> load;
  for (int d : degrees) load.push_back(d / dsum * full / sizes.front());
  return load;
}

// min over a != 0 of h(a) - a.load, and where it is reached.
inline GridStability boundary_margin(const CardinalityRank& h, const std::vector<double>& load) {
  GridWorkload w = GridWorkload::from_intensity(h.sizes(), load);
  return grid_stability(h, w, 1.0);
}

struct CurvePoint {
  double alpha = 0.0;
  double epsilon = 0.0;
  int part = 0;  // 0-based
  double log_delay_lower = 0.0;
  double log_delay_upper = 0.0;
  double log_pi0_ratio = 0.0;  // log(pi_-(0) / pi_+(0))

  // Mean service rate per job is the inverse delay (unit mean sizes).
  double lower_rate() const { return std::exp(-log_delay_upper); }
  double upper_rate() const { return std::exp(-log_delay_lower); }
  double log_lower_rate() const { return -log_delay_upper; }
  double log_upper_rate() const { return -log_delay_lower; }
};

struct ClusterBoundsSetup {
  int m = 10000;
  int n = 1000;
  std::vector<int> degrees{20, 40};
};

// 50 points evenly spaced in [0.02, 1 - eps - 0.02].
inline std::vector<double> default_alpha_grid(double eps, int points = 50) {
  std::vector<double> g;
  const double lo = 0.02, hi = 1.0 - eps - 0.02;
  for (int i = 0; i < points; ++i) g.push_back(lo + (hi - lo) * i / (points - 1));
  return g;
}

// Delay bounds for the randomized cluster, for each alpha in `alphas`:
//   lower = ((1+eps)/alpha) (pi_-(0)/pi_+(0)) L_{k,+} / (n load_k)
//   upper = ((1-eps)/alpha) (pi_+(0)/pi_-(0)) L_{k,-} / (n load_k)
// where pi_+- and L_{k,+-} solve the grid recursion with denominators
// ((1 +- eps)/alpha) h(a) - a.load.
inline std::vector<CurvePoint> random_cluster_bounds(const ClusterBoundsSetup& setup, double eps,
                                                     const std::vector<double>& alphas,
                                                     unsigned threads = 1) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0 - eps)) {
      throw InvalidArgument("alpha " + format_double(a) + " outside (0, 1 - eps) = (0, " +
                            format_double(1.0 - eps) + ")");
    }
  }
  std::vector<int> sizes(setup.degrees.size(), setup.n);
  const auto h = mean_cluster_rank(setup.m, sizes, setup.degrees);
  const auto load = boundary_load(h, setup.degrees);
  GridWorkload w = GridWorkload::from_intensity(sizes, load);
  const std::size_t parts = sizes.size();

  std::vector<CurvePoint> out(alphas.size() * parts);
  // Each alpha runs single-threaded; parallelism is across alphas.
  parallel_for(alphas.size(), threads, [&](std::size_t i) {
    const double alpha = alphas[i];
    PolysymOptions opt;
    opt.capacity_scale = (1.0 - eps) / alpha;
    auto minus = solve_polysym(h, w, opt);
    opt.capacity_scale = (1.0 + eps) / alpha;
    auto plus = solve_polysym(h, w, opt);
    const double log_ratio = minus.log_pi0() - plus.log_pi0();
    for (std::size_t k = 0; k < parts; ++k) {
      CurvePoint& p = out[i * parts + k];
      p.alpha = alpha;
      p.epsilon = eps;
      p.part = static_cast<int>(k);
      p.log_pi0_ratio = log_ratio;
      const double scale = std::log(setup.n * load[k]);
      p.log_delay_lower = std::log((1.0 + eps) / alpha) + log_ratio +
                          std::log(plus.total_l(k)) - scale;
      p.log_delay_upper = std::log((1.0 - eps) / alpha) - log_ratio +
                          std::log(minus.total_l(k)) - scale;
    }
  });
  return out;
}

// CSV: alpha,epsilon,part,lower_rate,upper_rate,log_lower_rate,log_upper_rate
inline void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& pts) {
  os << "alpha,epsilon,part,lower_rate,upper_rate,log_lower_rate,log_upper_rate\n";
  for (const auto& p : pts) {
    os << format_double(p.alpha) << "," << format_double(p.epsilon) << "," << p.part + 1
       << "," << format_double(p.lower_rate()) << "," << format_double(p.upper_rate()) << ","
       << format_double(p.log_lower_rate()) << "," << format_double(p.log_upper_rate())
       << "\n";
  }
}

// Self-contained SVG: mean service rate per job (log10 axis) against alpha,
// one lower/upper pair of lines per (epsilon, part).
inline void write_curve_svg(std::ostream& os, const std::vector<CurvePoint>& pts) {
  const double width = 720, height = 480, left = 70, right = 160, top = 30, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  double amin = 1.0, amax = 0.0, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& p : pts) {
    amin = std::min(amin, p.alpha);
    amax = std::max(amax, p.alpha);
    for (double v : {p.log_lower_rate(), p.log_upper_rate()}) {
      ymin = std::min(ymin, v / std::log(10.0));
      ymax = std::max(ymax, v / std::log(10.0));
    }
  }
  if (pts.empty()) amin = 0, amax = 1, ymin = 0, ymax = 1;
  if (amax <= amin) amax = amin + 1;
  ymin = std::floor(ymin);
  ymax = std::max(std::ceil(ymax), ymin + 1);
  auto px = [&](double a) { return left + (a - amin) / (amax - amin) * pw; };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  std::vector<std::pair<double, int>> series;
  for (const auto& p : pts) {
    std::pair<double, int> key{p.epsilon, p.part};
    if (std::find(series.begin(), series.end(), key) == series.end()) series.push_back(key);
  }
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  int ticks = static_cast<int>(ymax - ymin);
  int step = std::max(1, ticks / 8);
  for (int t = 0; t <= ticks; t += step) {
    double y = ymin + t;
    os << "<line x1=\"" << left - 4 << "\" y1=\"" << py(y) << "\" x2=\"" << left << "\" y2=\""
       << py(y) << "\" stroke=\"black\"/>";
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">1e"
       << static_cast<int>(y) << "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    double a = amin + (amax - amin) * t / 4;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", a);
    os << "<text x=\"" << px(a) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
       << buf << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10
     << "\" text-anchor=\"middle\">alpha</text>\n";
  os << "<text transform=\"translate(16," << top + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">mean service rate per job</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = colors[si % 6];
    for (int side = 0; side < 2; ++side) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
         << (side == 0 ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
      for (const auto& p : pts) {
        if (p.epsilon != series[si].first || p.part != series[si].second) continue;
        double y = (side == 0 ? p.log_lower_rate() : p.log_upper_rate()) / std::log(10.0);
        os << px(p.alpha) << "," << py(y) << " ";
      }
      os << "\"/>\n";
    }
    char label[64];
    std::snprintf(label, sizeof label, "eps=%g, part %d", series[si].first,
                  series[si].second + 1);
    double ly = top + 16 + 18 * si;
    os << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\""
       << left + pw + 30 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"/>";
    os << "<text x=\"" << left + pw + 34 << "\" y=\"" << ly << "\">" << label << "</text>\n";
  }
  os << "<text x=\"" << left + pw + 10 << "\" y=\"" << top + 24 + 18 * series.size()
     << "\">dashed: lower</text>\n";
  os << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Random polymatroids between (1-eps) mu and (1+eps) mu.

struct IntermediateStats {
  long attempts = 0;
  long rejections = 0;
  double rejection_rate() const {
    return attempts ? static_cast<double>(rejections) / attempts : 0.0;
  }
};

namespace detail {

// Subsets are filled by increasing cardinality. Each value is drawn
// uniformly from the band intersected with the interval allowed by the
// already fixed smaller subsets: at least max_k v(A-k) and at most
// min_{i<j} v(A-i) + v(A-j) - v(A-i-j). False on an empty interval.
inline bool draw_per_subset(const std::vector<double>& mu, int n, double eps,
                            const std::vector<std::vector<Subset>>& by_size,
                            std::mt19937_64& rng, std::vector<double>& v) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::fill(v.begin(), v.end(), 0.0);
  for (int c = 1; c <= n; ++c) {
    for (Subset a : by_size[c]) {
      double lo = (1.0 - eps) * mu[a], hi = (1.0 + eps) * mu[a];
      for (int i = 0; i < n; ++i) {
        if (!contains(a, i)) continue;
        lo = std::max(lo, v[a & ~singleton(i)]);
        for (int j = i + 1; j < n; ++j) {
          if (!contains(a, j)) continue;
          Subset ai = a & ~singleton(i), aj = a & ~singleton(j);
          hi = std::min(hi, v[ai] + v[aj] - v[ai & aj]);
        }
      }
      if (lo > hi) return false;
      v[a] = lo + (hi - lo) * unit(rng);
    }
  }
  return true;
}

// v = (1-eps) mu + 2 eps nu with nu a random convex mixture of polymatroids
// dominated by mu: restrictions mu(A & S) and truncations min(mu(A), c).
inline void draw_mixture(const std::vector<double>& mu, int n, double eps, std::mt19937_64& rng,
                         std::vector<double>& v) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> gamma1(1.0);
  const Subset all = full_set(n);
  const int parts = 4;
  std::vector<double> theta(parts);
  double total = 0.0;
  for (auto& t : theta) total += (t = gamma1(rng));
  std::fill(v.begin(), v.end(), 0.0);
  for (int j = 0; j < parts; ++j) {
    const double w = theta[j] / total;
    if (j % 2 == 0) {
      Subset keep = 0;
      for (int i = 0; i < n; ++i) {
        if (unit(rng) < 0.7) keep |= singleton(i);
      }
      for (Subset a = 0; a <= all; ++a) v[a] += w * mu[a & keep];
    } else {
      const double cap = mu[all] * unit(rng);
      for (Subset a = 0; a <= all; ++a) v[a] += w * std::min(mu[a], cap);
    }
  }
  for (Subset a = 0; a <= all; ++a) v[a] = (1.0 - eps) * mu[a] + 2.0 * eps * v[a];
}

inline bool in_band(const std::vector<double>& mu, const std::vector<double>& v, double eps) {
  for (std::size_t a = 0; a < mu.size(); ++a) {
    if (!approx_le((1.0 - eps) * mu[a], v[a]) || !approx_le(v[a], (1.0 + eps) * mu[a])) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// A random polymatroid rank inside the band. The per-subset draw is tried
// first; once `per_subset_tries` of those are rejected the mixture draw
// takes over, which is a polymatroid by construction. Every candidate is
// checked against the band and the axioms and counted as a rejection if
// it fails. Returns nothing after `max_attempts` rejections.
inline std::optional<RankFunction> random_intermediate_rank(const RankFunction& reference,
                                                           double eps, std::mt19937_64& rng,
                                                           IntermediateStats* stats = nullptr,
                                                           int max_attempts = 1000,
                                                           int per_subset_tries = 20) {
  detail::check_epsilon(eps);
  const int n = reference.n();
  require_size(n, kValidationLimit, "random_intermediate_rank");
  const auto mu = reference.tabulate();
  std::vector<std::vector<Subset>> by_size(n + 1);
  for (Subset a = 0; a < mu.size(); ++a) by_size[cardinality(a)].push_back(a);
  std::vector<double> v(mu.size(), 0.0);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    if (stats) ++stats->attempts;
    bool ok;
    if (attempt < per_subset_tries) {
      ok = detail::draw_per_subset(mu, n, eps, by_size, rng, v);
    } else {
      detail::draw_mixture(mu, n, eps, rng, v);
      ok = true;
    }
    if (ok && detail::in_band(mu, v, eps)) {
      auto r = RankFunction::from_table(n, v);
      if (validate_polymatroid(r).valid()) return r;
    }
    if (stats) ++stats->rejections;
  }
  return std::nullopt;
}

}  // namespace bfperf

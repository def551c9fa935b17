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

// Polymatroid rank functions: construction from tree networks and server
// clusters, axiom validation, exchangeability and poly-symmetry.

#pragma once

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bfperf/common.hpp"
#include "bfperf/grid.hpp"

namespace bfperf {

inline constexpr int kValidationLimit = 16;
inline constexpr int kExchangeLimit = 24;

// A set function mu on subsets of {0..n-1}. Immutable and cheap to copy; the
// evaluator is shared.
class RankFunction {
 public:
  using Evaluator = std::function<double(Subset)>;

  RankFunction() = default;
  RankFunction(int n, Evaluator eval)
      : n_(n), eval_(std::make_shared<const Evaluator>(std::move(eval))) {
    if (n < 1 || n > kMaxIndices) {
      throw InvalidArgument("queue count must lie in [1, 64], got " +
                            std::to_string(n));
    }
  }

  // Values indexed by bitmask; table.size() must be 2^n.
  static RankFunction from_table(int n, std::vector<double> table) {
    require_size(n, 30, "rank table");
    if (table.size() != (std::size_t{1} << n)) {
      throw InvalidArgument("rank table needs 2^n entries");
    }
    auto shared = std::make_shared<const std::vector<double>>(std::move(table));
    return RankFunction(n, [shared](Subset a) { return (*shared)[a]; });
  }

  static RankFunction modular(std::vector<double> weights) {
    int n = static_cast<int>(weights.size());
    return RankFunction(n, [w = std::move(weights)](Subset a) {
      double s = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (contains(a, static_cast<int>(i))) s += w[i];
      }
      return s;
    });
  }

  int n() const { return n_; }
  double operator()(Subset a) const { return (*eval_)(a); }

  std::vector<double> tabulate() const {
    require_size(n_, 30, "rank tabulation");
    std::vector<double> t(std::size_t{1} << n_);
    for (Subset a = 0; a < t.size(); ++a) t[a] = (*this)(a);
    return t;
  }

  // Pointwise (f * mu).
  RankFunction scaled(double f) const {
    auto inner = eval_;
    return RankFunction(n_, [inner, f](Subset a) { return f * (*inner)(a); });
  }

 private:
  int n_ = 0;
  std::shared_ptr<const Evaluator> eval_;
};

// ---------------------------------------------------------------------------
// Axiom validation

enum class Axiom { kNormalization, kMonotonicity, kSubmodularity };

inline const char* axiom_name(Axiom a) {
  switch (a) {
    case Axiom::kNormalization: return "normalization";
    case Axiom::kMonotonicity: return "monotonicity";
    case Axiom::kSubmodularity: return "submodularity";
  }
  return "?";
}

struct Violation {
  Axiom axiom;
  Subset first = 0;   // witness A
  Subset second = 0;  // witness B
  double lhs = 0.0;
  double rhs = 0.0;
  std::size_t count = 0;  // total violations of this axiom
};

struct ValidationReport {
  int n = 0;
  std::vector<Violation> violations;  // at most one entry per axiom

  bool valid() const { return violations.empty(); }
  const Violation* find(Axiom a) const {
    for (const auto& v : violations) {
      if (v.axiom == a) return &v;
    }
    return nullptr;
  }
  std::string describe() const {
    if (valid()) return "valid polymatroid rank (n=" + std::to_string(n) + ")";
    std::ostringstream os;
    for (const auto& v : violations) {
      os << axiom_name(v.axiom) << " violated " << v.count << "x; witness "
         << format_subset(v.first) << ", " << format_subset(v.second) << " ("
         << format_double(v.lhs) << " vs " << format_double(v.rhs) << ")\n";
    }
    return os.str();
  }
};

// Exhaustive check of the three rank axioms. Monotonicity and submodularity
// are checked in their local forms (single-element growth and the
// diminishing-returns square A, A+i, A+j, A+i+j), which are equivalent to the
// global statements; witnesses are reported as the pair (A+i, A+j) for
// submodularity and (A, A+i) for monotonicity.
inline ValidationReport validate_polymatroid(const RankFunction& r) {
  require_size(r.n(), kValidationLimit, "validate_polymatroid");
  const int n = r.n();
  const auto mu = r.tabulate();
  ValidationReport report{n, {}};
  auto record = [&](Axiom ax, Subset a, Subset b, double lhs, double rhs) {
    for (auto& v : report.violations) {
      if (v.axiom == ax) {
        ++v.count;
        return;
      }
    }
    report.violations.push_back({ax, a, b, lhs, rhs, 1});
  };

  if (!approx_equal(mu[0], 0.0)) record(Axiom::kNormalization, 0, 0, mu[0], 0.0);
  for (Subset a = 0; a < mu.size(); ++a) {
    for (int i = 0; i < n; ++i) {
      if (contains(a, i)) continue;
      Subset ai = a | singleton(i);
      if (!approx_le(mu[a], mu[ai])) record(Axiom::kMonotonicity, a, ai, mu[a], mu[ai]);
      for (int j = i + 1; j < n; ++j) {
        if (contains(a, j)) continue;
        Subset aj = a | singleton(j);
        double lhs = mu[ai] + mu[aj];
        double rhs = mu[ai | aj] + mu[a];
        if (!approx_le(rhs, lhs)) record(Axiom::kSubmodularity, ai, aj, lhs, rhs);
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Tree data networks

struct Link {
  Subset users = 0;
  double capacity = 0.0;
};

struct TreeTopology {
  int n = 0;
  std::vector<Link> links;
};

// Result of putting a tree into canonical form: laminarity checked, the full
// user set present, and links whose capacity never binds removed.
struct NormalizedTree {
  int n = 0;
  std::vector<Link> links;       // retained links, children before parents
  std::vector<int> parent;       // index into links, -1 for top level
  bool root_inserted = false;
  double inserted_root_capacity = 0.0;
  std::vector<Link> pruned;      // non-constraining links that were removed

  std::string describe() const {
    std::ostringstream os;
    os << "tree: n=" << n << ", " << links.size() << " constraining links";
    if (root_inserted) {
      os << "; root link inserted with capacity "
         << format_double(inserted_root_capacity);
    }
    if (!pruned.empty()) os << "; pruned " << pruned.size() << " non-constraining";
    return os.str();
  }
};

namespace detail {

// Parent of each link = smallest strict superset; assumes links sorted by
// ascending cardinality and laminar.
inline std::vector<int> laminar_parents(const std::vector<Link>& links) {
  std::vector<int> parent(links.size(), -1);
  for (std::size_t i = 0; i < links.size(); ++i) {
    for (std::size_t j = i + 1; j < links.size(); ++j) {
      if ((links[i].users & ~links[j].users) == 0 && links[i].users != links[j].users) {
        parent[i] = static_cast<int>(j);
        break;
      }
    }
  }
  return parent;
}

// Bottom-up min(C_L, sum of children) over the laminar forest. `links` must
// be sorted children-first with `parent` consistent.
inline double tree_eval(const std::vector<Link>& links,
                        const std::vector<int>& parent, Subset a,
                        std::vector<double>& child_sum,
                        std::vector<Subset>& child_cover) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = links.size();
  child_sum.assign(m, 0.0);
  child_cover.assign(m, 0);
  double top = 0.0;
  Subset top_cover = 0;
  for (std::size_t l = 0; l < m; ++l) {
    Subset here = a & links[l].users;
    double val = 0.0;
    if (here != 0) {
      double cover = (here & ~child_cover[l]) == 0 ? child_sum[l] : inf;
      val = std::min(links[l].capacity, cover);
    }
    if (parent[l] >= 0) {
      child_sum[parent[l]] += val;
      child_cover[parent[l]] |= links[l].users;
    } else {
      top += val;
      top_cover |= links[l].users;
    }
  }
  return (a & ~top_cover) == 0 ? top : inf;
}

}  // namespace detail

inline NormalizedTree normalize_tree(const TreeTopology& t) {
  if (t.n < 1 || t.n > kMaxIndices) throw InvalidArgument("tree needs 1..64 users");
  const Subset all = full_set(t.n);
  std::vector<Link> links;
  for (const auto& l : t.links) {
    if (l.users == 0 || (l.users & ~all) != 0) {
      throw StructureError("link " + format_subset(l.users) +
                           " is empty or names a user outside 1.." +
                           std::to_string(t.n));
    }
    if (!(l.capacity > 0.0) || !std::isfinite(l.capacity)) {
      throw StructureError("link " + format_subset(l.users) +
                           " must have a positive finite capacity");
    }
    // Parallel links over the same users: only the smallest capacity binds.
    bool merged = false;
    for (auto& e : links) {
      if (e.users == l.users) {
        e.capacity = std::min(e.capacity, l.capacity);
        merged = true;
      }
    }
    if (!merged) links.push_back(l);
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    for (std::size_t j = i + 1; j < links.size(); ++j) {
      Subset x = links[i].users, y = links[j].users;
      if ((x & y) != 0 && (x & ~y) != 0 && (y & ~x) != 0) {
        throw StructureError("links " + format_subset(x) + " and " +
                             format_subset(y) + " cross (family is not laminar)");
      }
    }
  }
  std::stable_sort(links.begin(), links.end(), [](const Link& x, const Link& y) {
    return cardinality(x.users) < cardinality(y.users);
  });

  NormalizedTree out;
  out.n = t.n;
  bool has_root = !links.empty() && links.back().users == all;
  if (!has_root) {
    auto parent = detail::laminar_parents(links);
    double sum = 0.0;
    for (std::size_t l = 0; l < links.size(); ++l) {
      if (parent[l] < 0) sum += links[l].capacity;
    }
    if (!(sum > 0.0)) {
      throw StructureError("tree has no links; cannot infer the root capacity");
    }
    links.push_back({all, sum});
    out.root_inserted = true;
    out.inserted_root_capacity = sum;
  }

  // A link is non-constraining when its descendants already cap it.
  auto parent = detail::laminar_parents(links);
  std::vector<double> sum;
  std::vector<Subset> cover;
  std::vector<bool> keep(links.size(), true);
  for (std::size_t l = 0; l < links.size(); ++l) {
    std::vector<Link> below;
    for (std::size_t c = 0; c < l; ++c) {
      if ((links[c].users & ~links[l].users) == 0) below.push_back(links[c]);
    }
    if (below.empty()) continue;
    auto bp = detail::laminar_parents(below);
    double by_children = detail::tree_eval(below, bp, links[l].users, sum, cover);
    if (by_children <= links[l].capacity) {
      keep[l] = false;
      out.pruned.push_back(links[l]);
    }
  }
  for (std::size_t l = 0; l < links.size(); ++l) {
    if (keep[l]) out.links.push_back(links[l]);
  }
  out.parent = detail::laminar_parents(out.links);
  return out;
}

// mu(A) = minimum total capacity of disjoint links covering A, evaluated by
// a bottom-up pass over the laminar tree.
inline RankFunction tree_rank(const NormalizedTree& tree) {
  auto shared = std::make_shared<const NormalizedTree>(tree);
  return RankFunction(tree.n, [shared](Subset a) {
    thread_local std::vector<double> sum;
    thread_local std::vector<Subset> cover;
    return detail::tree_eval(shared->links, shared->parent, a, sum, cover);
  });
}

inline RankFunction tree_rank(const TreeTopology& t) {
  return tree_rank(normalize_tree(t));
}

// ---------------------------------------------------------------------------
// Computer clusters

struct ClusterAssignment {
  int n = 0;
  int m = 0;
  std::vector<double> server_capacity;   // size m
  std::vector<std::vector<int>> assign;  // per class, 0-based server ids

  void validate() const {
    if (n < 1) throw InvalidArgument("cluster needs at least one class");
    if (m < 1) throw InvalidArgument("cluster needs at least one server");
    if (static_cast<int>(server_capacity.size()) != m) {
      throw InvalidArgument("server_capacity must list one rate per server");
    }
    for (double c : server_capacity) {
      if (!(c >= 0.0) || !std::isfinite(c)) {
        throw InvalidArgument("server capacities must be finite and nonnegative");
      }
    }
    if (static_cast<int>(assign.size()) != n) {
      throw InvalidArgument("assignment must list a server set per class");
    }
    for (int i = 0; i < n; ++i) {
      if (assign[i].empty()) {
        throw InvalidArgument("class " + std::to_string(i + 1) + " has no server");
      }
      for (int s : assign[i]) {
        if (s < 0 || s >= m) {
          throw InvalidArgument("class " + std::to_string(i + 1) +
                                " names server " + std::to_string(s + 1) +
                                " outside 1.." + std::to_string(m));
        }
      }
    }
  }
};

// Total capacity of the servers reachable from `classes`.
inline double cluster_union_capacity(const ClusterAssignment& c, Subset classes,
                                     std::vector<unsigned char>& mark) {
  mark.assign(c.m, 0);
  double total = 0.0;
  for (int i = 0; i < c.n; ++i) {
    if (!contains(classes, i)) continue;
    for (int s : c.assign[i]) {
      if (!mark[s]) {
        mark[s] = 1;
        total += c.server_capacity[s];
      }
    }
  }
  return total;
}

inline RankFunction cluster_rank(const ClusterAssignment& c) {
  c.validate();
  auto shared = std::make_shared<const ClusterAssignment>(c);
  return RankFunction(c.n, [shared](Subset a) {
    thread_local std::vector<unsigned char> mark;
    return cluster_union_capacity(*shared, a, mark);
  });
}

// ---------------------------------------------------------------------------
// Exchangeability and poly-symmetry

class Partition {
 public:
  Partition() = default;
  // Parts are normalized: members sorted, parts ordered by smallest member.
  Partition(int n, std::vector<std::vector<int>> parts) : n_(n), parts_(std::move(parts)) {
    if (n < 1 || n > kMaxIndices) throw InvalidArgument("partition needs 1..64 indices");
    std::vector<int> seen(n, 0);
    for (auto& p : parts_) {
      if (p.empty()) throw InvalidArgument("partition parts must be nonempty");
      std::sort(p.begin(), p.end());
      for (int i : p) {
        if (i < 0 || i >= n) {
          throw InvalidArgument("partition index " + std::to_string(i + 1) +
                                " outside 1.." + std::to_string(n));
        }
        if (seen[i]++) {
          throw InvalidArgument("index " + std::to_string(i + 1) +
                                " appears in two parts");
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      if (!seen[i]) {
        throw InvalidArgument("index " + std::to_string(i + 1) +
                              " is not covered by the partition");
      }
    }
    std::sort(parts_.begin(), parts_.end(),
              [](const auto& x, const auto& y) { return x.front() < y.front(); });
    part_of_.assign(n, 0);
    masks_.assign(parts_.size(), 0);
    for (std::size_t k = 0; k < parts_.size(); ++k) {
      for (int i : parts_[k]) {
        part_of_[i] = static_cast<int>(k);
        masks_[k] |= singleton(i);
      }
    }
  }

  // Parts {0..n_1-1}, {n_1..n_1+n_2-1}, ... in the given order. Unlike the
  // general constructor this keeps the order of `sizes` even if it is not
  // sorted by smallest member (it always is, for contiguous blocks).
  static Partition contiguous(const std::vector<int>& sizes) {
    std::vector<std::vector<int>> parts;
    int next = 0;
    for (int s : sizes) {
      if (s < 1) throw InvalidArgument("part sizes must be positive");
      std::vector<int> p(s);
      std::iota(p.begin(), p.end(), next);
      next += s;
      parts.push_back(std::move(p));
    }
    return Partition(next, std::move(parts));
  }

  int n() const { return n_; }
  std::size_t parts() const { return parts_.size(); }
  const std::vector<int>& part(std::size_t k) const { return parts_[k]; }
  const std::vector<std::vector<int>>& all_parts() const { return parts_; }
  int part_of(int i) const { return part_of_[i]; }
  Subset mask(std::size_t k) const { return masks_[k]; }
  std::vector<int> sizes() const {
    std::vector<int> s;
    for (const auto& p : parts_) s.push_back(static_cast<int>(p.size()));
    return s;
  }
  // |A|_Sigma
  std::vector<int> profile(Subset a) const {
    std::vector<int> v(parts_.size());
    for (std::size_t k = 0; k < parts_.size(); ++k) v[k] = cardinality(a & masks_[k]);
    return v;
  }
  GridShape shape() const { return GridShape(sizes()); }

  std::string describe() const {
    std::string out = "(";
    for (std::size_t k = 0; k < parts_.size(); ++k) {
      if (k) out += ",";
      out += format_subset(masks_[k]);
    }
    return out + ")";
  }

  bool operator==(const Partition& o) const { return n_ == o.n_ && parts_ == o.parts_; }

 private:
  int n_ = 0;
  std::vector<std::vector<int>> parts_;
  std::vector<int> part_of_;
  std::vector<Subset> masks_;
};

// Witness A (subset of I \ {i,j}) breaking exchangeability, if any.
inline std::optional<Subset> exchangeability_witness(const RankFunction& r, int i, int j) {
  if (i == j) throw InvalidArgument("exchangeability needs two distinct indices");
  if (i < 0 || j < 0 || i >= r.n() || j >= r.n()) {
    throw InvalidArgument("index out of range");
  }
  require_size(r.n(), kExchangeLimit, "exchangeable");
  const Subset rest = full_set(r.n()) & ~singleton(i) & ~singleton(j);
  // Enumerate all submasks of `rest`, smallest first so singleton mismatches
  // surface immediately.
  Subset a = 0;
  while (true) {
    if (!approx_equal(r(a | singleton(i)), r(a | singleton(j)))) return a;
    if (a == rest) break;
    a = (a - rest) & rest;
  }
  return std::nullopt;
}

inline bool exchangeable(const RankFunction& r, int i, int j) {
  return !exchangeability_witness(r, i, j).has_value();
}

// Quotient of the index set by the exchangeability relation.
inline Partition exchangeability_partition(const RankFunction& r) {
  require_size(r.n(), kExchangeLimit, "exchangeability_partition");
  std::vector<std::vector<int>> parts;
  for (int i = 0; i < r.n(); ++i) {
    bool placed = false;
    for (auto& p : parts) {
      if (exchangeable(r, p.front(), i)) {
        p.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) parts.push_back({i});
  }
  return Partition(r.n(), std::move(parts));
}

// h on the profile grid prod_k {0..n_k}.
class CardinalityRank {
 public:
  CardinalityRank() = default;
  CardinalityRank(GridShape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
      throw InvalidArgument("cardinality rank needs one value per grid point");
    }
  }

  template <typename F>
  static CardinalityRank from_function(const std::vector<int>& sizes, F&& f) {
    GridShape shape(sizes);
    std::vector<double> v(shape.size());
    for (std::size_t idx = 0; idx < v.size(); ++idx) v[idx] = f(shape.profile(idx));
    return CardinalityRank(std::move(shape), std::move(v));
  }

  const GridShape& shape() const { return shape_; }
  const std::vector<int>& sizes() const { return shape_.sizes(); }
  double at(std::size_t idx) const { return values_[idx]; }
  double operator()(const std::vector<int>& a) const { return values_[shape_.index(a)]; }
  const std::vector<double>& values() const { return values_; }

  CardinalityRank scaled(double f) const {
    auto v = values_;
    for (auto& x : v) x *= f;
    return CardinalityRank(shape_, std::move(v));
  }

  // mu(A) = h(|A|_Sigma) for the contiguous partition of the grid's sizes.
  RankFunction expand() const { return expand(Partition::contiguous(sizes())); }
  RankFunction expand(const Partition& p) const {
    if (p.sizes() != sizes()) throw InvalidArgument("partition does not match grid sizes");
    auto self = std::make_shared<const CardinalityRank>(*this);
    auto part = std::make_shared<const Partition>(p);
    return RankFunction(p.n(), [self, part](Subset a) {
      std::size_t idx = 0;
      for (std::size_t k = 0; k < part->parts(); ++k) {
        idx += static_cast<std::size_t>(cardinality(a & part->mask(k))) *
               self->shape().stride(k);
      }
      return self->at(idx);
    });
  }

  // Checks h(0)=0 and componentwise monotonicity; when the expanded set
  // function is small enough, also submodularity. Returns problems found.
  std::vector<std::string> check() const {
    std::vector<std::string> problems;
    if (!approx_equal(values_[0], 0.0)) problems.push_back("h(0) != 0");
    for (std::size_t idx = 0; idx < values_.size(); ++idx) {
      if (!(values_[idx] >= 0.0)) {
        problems.push_back("h" + format_profile(shape_.profile(idx)) + " < 0");
      }
      for (std::size_t k = 0; k < shape_.parts(); ++k) {
        if (shape_.component(idx, k) < shape_.size_of(k) &&
            !approx_le(values_[idx], values_[idx + shape_.stride(k)])) {
          problems.push_back("h decreases from " + format_profile(shape_.profile(idx)) +
                             " along part " + std::to_string(k + 1));
        }
      }
    }
    if (shape_.total_queues() <= kValidationLimit) {
      auto rep = validate_polymatroid(expand());
      if (const auto* v = rep.find(Axiom::kSubmodularity)) {
        problems.push_back("induced set function is not submodular: witness " +
                           format_subset(v->first) + ", " + format_subset(v->second));
      }
    }
    return problems;
  }

 private:
  GridShape shape_;
  std::vector<double> values_;
};

inline CardinalityRank cardinality_rank_from(const RankFunction& r, const Partition& p) {
  if (p.n() != r.n()) throw InvalidArgument("partition size differs from rank size");
  require_size(r.n(), kExchangeLimit, "cardinality_rank_from");
  GridShape shape = p.shape();
  std::vector<double> h(shape.size(), 0.0);
  std::vector<Subset> rep(shape.size(), 0);
  std::vector<char> set(shape.size(), 0);
  const Subset all = full_set(r.n());
  for (Subset a = 0;; ++a) {
    std::size_t idx = shape.index(p.profile(a));
    double v = r(a);
    if (!set[idx]) {
      h[idx] = v;
      rep[idx] = a;
      set[idx] = 1;
    } else if (!approx_equal(h[idx], v)) {
      throw NotPolySymmetric("not poly-symmetric w.r.t. partition " + p.describe() +
                                 ": mu" + format_subset(rep[idx]) + "=" +
                                 format_double(h[idx]) + " but mu" +
                                 format_subset(a) + "=" + format_double(v),
                             rep[idx], a);
    }
    if (a == all) break;
  }
  return CardinalityRank(std::move(shape), std::move(h));
}

// Cardinality rank of a tree network computed directly on the profile grid:
// f(a) = C_L when a link has profile a, otherwise the cheapest split
// f(b) + f(c) with b + c = a; then h(a) = min over b >= a of f(b).
inline CardinalityRank tree_cardinality_rank(const NormalizedTree& tree, const Partition& p) {
  if (p.n() != tree.n) throw InvalidArgument("partition size differs from tree size");
  GridShape shape = p.shape();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> f(shape.size(), inf);
  std::vector<char> pinned(shape.size(), 0);
  std::vector<Subset> owner(shape.size(), 0);
  f[0] = 0.0;
  pinned[0] = 1;
  for (const auto& l : tree.links) {
    std::size_t idx = shape.index(p.profile(l.users));
    if (pinned[idx] && idx != 0) {
      if (!approx_equal(f[idx], l.capacity)) {
        throw NotPolySymmetric("ambiguous profile " + format_profile(shape.profile(idx)) +
                                   ": links " + format_subset(owner[idx]) + " and " +
                                   format_subset(l.users) + " have different capacities",
                               owner[idx], l.users);
      }
      continue;
    }
    f[idx] = l.capacity;
    pinned[idx] = 1;
    owner[idx] = l.users;
  }

  const std::size_t parts = shape.parts();
  std::vector<int> b(parts);
  for (const auto& shell : shape.shells()) {
    for (std::size_t idx : shell) {
      if (pinned[idx]) continue;
      auto a = shape.profile(idx);
      // Enumerate proper sub-profiles b of a (b != 0, b != a).
      std::fill(b.begin(), b.end(), 0);
      double best = inf;
      while (true) {
        std::size_t k = parts;
        while (k-- > 0) {
          if (b[k] < a[k]) {
            ++b[k];
            break;
          }
          b[k] = 0;
        }
        if (k == static_cast<std::size_t>(-1)) break;
        std::size_t bi = shape.index(b);
        if (bi == idx) continue;
        double v = f[bi] + f[idx - bi];
        best = std::min(best, v);
      }
      f[idx] = best;
    }
  }
  // Suffix minimum along each axis.
  for (std::size_t k = 0; k < parts; ++k) {
    for (std::size_t idx = shape.size(); idx-- > 0;) {
      if (shape.component(idx, k) < shape.size_of(k)) {
        f[idx] = std::min(f[idx], f[idx + shape.stride(k)]);
      }
    }
  }
  return CardinalityRank(std::move(shape), std::move(f));
}

inline CardinalityRank tree_cardinality_rank(const TreeTopology& t, const Partition& p) {
  return tree_cardinality_rank(normalize_tree(t), p);
}

}  // namespace bfperf

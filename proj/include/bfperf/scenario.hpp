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

// Scenario files: a line-oriented format with [model], [workload] and
// [solver] sections of `key = value` pairs. See README.md for the schema.

#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bfperf/bounds.hpp"
#include "bfperf/common.hpp"
#include "bfperf/exact.hpp"
#include "bfperf/oracle.hpp"
#include "bfperf/polysym.hpp"
#include "bfperf/random_cluster.hpp"
#include "bfperf/rank.hpp"

namespace bfperf {

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, std::string field)
      : Error("parse", what), line_(line), field_(std::move(field)) {}
  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

// Axiom violations of a rank read from a scenario.
class InvalidRankError : public Error {
 public:
  InvalidRankError(const std::string& what, Subset first, Subset second)
      : Error("invalid_polymatroid", what), first_(first), second_(second) {}
  Subset first() const noexcept { return first_; }
  Subset second() const noexcept { return second_; }

 private:
  Subset first_;
  Subset second_;
};

// ---------------------------------------------------------------------------
// Raw document

struct ScenarioEntry {
  std::string key;
  std::string value;
  int line = 0;
  mutable bool used = false;
};

class ScenarioSection {
 public:
  ScenarioSection() = default;
  ScenarioSection(std::string name, int line) : name_(std::move(name)), line_(line) {}

  const std::string& name() const { return name_; }
  int line() const { return line_; }
  void add(ScenarioEntry e) { entries_.push_back(std::move(e)); }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  const ScenarioEntry* find(const std::string& key) const {
    const ScenarioEntry* hit = nullptr;
    for (const auto& e : entries_) {
      if (e.key != key) continue;
      if (hit) {
        throw ParseError("line " + std::to_string(e.line) + ": duplicate key '" + key +
                             "' in [" + name_ + "]",
                         e.line, name_ + "." + key);
      }
      hit = &e;
    }
    if (hit) hit->used = true;
    return hit;
  }

  // Repeatable keys such as `link`, `class` and `part`.
  std::vector<const ScenarioEntry*> all(const std::string& key) const {
    std::vector<const ScenarioEntry*> out;
    for (const auto& e : entries_) {
      if (e.key == key) {
        e.used = true;
        out.push_back(&e);
      }
    }
    return out;
  }

  const ScenarioEntry& require(const std::string& key) const {
    const auto* e = find(key);
    if (!e) {
      throw ParseError("line " + std::to_string(line_) + ": [" + name_ +
                           "] is missing required key '" + key + "'",
                       line_, name_ + "." + key);
    }
    return *e;
  }

  void reject_unused() const {
    for (const auto& e : entries_) {
      if (!e.used) {
        throw ParseError("line " + std::to_string(e.line) + ": unknown key '" + e.key +
                             "' in [" + name_ + "]",
                         e.line, name_ + "." + e.key);
      }
    }
  }

 private:
  std::string name_;
  int line_ = 0;
  std::vector<ScenarioEntry> entries_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

inline ParseError field_error(const ScenarioEntry& e, const std::string& section,
                              const std::string& msg) {
  return ParseError("line " + std::to_string(e.line) + ", field " + section + "." + e.key +
                        ": " + msg,
                    e.line, section + "." + e.key);
}

inline double to_double(const std::string& tok, const ScenarioEntry& e,
                        const std::string& section) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw field_error(e, section, "'" + tok + "' is not a number");
  }
}

inline long long to_integer(const std::string& tok, const ScenarioEntry& e,
                            const std::string& section) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw field_error(e, section, "'" + tok + "' is not an integer");
  }
}

}  // namespace detail

class ScenarioDocument {
 public:
  static ScenarioDocument parse(const std::string& text) {
    ScenarioDocument doc;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    ScenarioSection* current = nullptr;
    while (std::getline(is, raw)) {
      ++line;
      std::string s = raw.substr(0, raw.find('#'));
      s = detail::trim(s);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') {
          throw ParseError("line " + std::to_string(line) + ": unterminated section header",
                           line, "");
        }
        std::string name = detail::trim(s.substr(1, s.size() - 2));
        if (name != "model" && name != "workload" && name != "solver") {
          throw ParseError("line " + std::to_string(line) + ": unknown section [" + name +
                               "] (expected model, workload or solver)",
                           line, name);
        }
        if (doc.sections_.count(name)) {
          throw ParseError("line " + std::to_string(line) + ": section [" + name +
                               "] appears twice",
                           line, name);
        }
        current = &doc.sections_[name];
        *current = ScenarioSection(name, line);
        continue;
      }
      std::size_t eq = s.find('=');
      if (eq == std::string::npos) {
        throw ParseError("line " + std::to_string(line) + ": expected 'key = value'", line, "");
      }
      if (!current) {
        throw ParseError("line " + std::to_string(line) + ": key outside of any section",
                         line, "");
      }
      std::string key = detail::trim(s.substr(0, eq));
      std::string value = detail::trim(s.substr(eq + 1));
      if (key.empty()) {
        throw ParseError("line " + std::to_string(line) + ": empty key", line, current->name());
      }
      current->add({key, value, line});
    }
    return doc;
  }

  static ScenarioDocument load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot read scenario file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& name) const { return sections_.count(name) > 0; }
  const ScenarioSection& section(const std::string& name) const {
    auto it = sections_.find(name);
    if (it == sections_.end()) {
      throw ParseError("missing section [" + name + "]", 0, name);
    }
    return it->second;
  }
  void reject_unused() const {
    for (const auto& [name, s] : sections_) s.reject_unused();
  }

 private:
  std::map<std::string, ScenarioSection> sections_;
};

// Typed accessors with field diagnostics.
class FieldReader {
 public:
  explicit FieldReader(const ScenarioSection& s) : s_(s) {}

  bool has(const std::string& key) const { return s_.has(key); }

  double number(const std::string& key) const {
    const auto& e = s_.require(key);
    return detail::to_double(e.value, e, s_.name());
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  long long integer(const std::string& key) const {
    const auto& e = s_.require(key);
    return detail::to_integer(e.value, e, s_.name());
  }
  long long integer(const std::string& key, long long fallback) const {
    return has(key) ? integer(key) : fallback;
  }
  std::string text(const std::string& key) const { return s_.require(key).value; }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }
  std::vector<double> numbers(const std::string& key) const {
    const auto& e = s_.require(key);
    std::vector<double> out;
    for (const auto& tok : detail::split(e.value, ',')) {
      out.push_back(detail::to_double(tok, e, s_.name()));
    }
    return out;
  }
  std::vector<int> integers(const std::string& key) const {
    const auto& e = s_.require(key);
    return integers_of(e, e.value);
  }
  std::vector<int> integers_of(const ScenarioEntry& e, const std::string& value) const {
    std::vector<int> out;
    for (const auto& tok : detail::split(value, ',')) {
      out.push_back(static_cast<int>(detail::to_integer(tok, e, s_.name())));
    }
    return out;
  }
  ParseError error(const std::string& key, const std::string& msg) const {
    const auto* e = s_.find(key);
    if (e) return detail::field_error(*e, s_.name(), msg);
    return ParseError("line " + std::to_string(s_.line()) + ", field " + s_.name() + "." + key +
                          ": " + msg,
                      s_.line(), s_.name() + "." + key);
  }
  const ScenarioSection& section() const { return s_; }

 private:
  const ScenarioSection& s_;
};

// ---------------------------------------------------------------------------
// Typed scenario

enum class ModelKind { kExplicitRank, kTree, kCluster, kCardinalityRank, kRandomCluster };
enum class Method { kExact, kPolysym, kBounds, kSimulate, kConcentration, kTruncated, kMeanRank };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kExplicitRank: return "explicit-rank";
    case ModelKind::kTree: return "tree";
    case ModelKind::kCluster: return "cluster";
    case ModelKind::kCardinalityRank: return "cardinality-rank";
    case ModelKind::kRandomCluster: return "random-cluster";
  }
  return "?";
}

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kExact: return "exact";
    case Method::kPolysym: return "polysym";
    case Method::kBounds: return "bounds";
    case Method::kSimulate: return "simulate";
    case Method::kConcentration: return "concentration";
    case Method::kTruncated: return "truncated";
    case Method::kMeanRank: return "mean-rank";
  }
  return "?";
}

struct SolverSettings {
  Method method = Method::kExact;
  std::vector<double> epsilons;
  std::vector<double> alphas;  // empty: default grid per epsilon
  long long trials = 200;
  int subsets_per_profile = 8;
  std::uint64_t seed = 1;
  int truncation = 0;  // 0: automatic
  SimOptions sim;
  std::vector<int> profile;
  std::optional<Partition> partition;
};

struct Scenario {
  ModelKind kind = ModelKind::kExplicitRank;
  int n = 0;
  std::optional<RankFunction> rank;
  std::optional<NormalizedTree> tree;
  std::optional<ClusterAssignment> cluster;
  std::optional<CardinalityRank> card;
  std::string card_source;
  std::vector<double> access_rates;
  double access_capacity = 0.0;
  std::optional<RandomAssignmentSpec> random;
  std::optional<Workload> workload;
  std::optional<GridWorkload> grid_workload;
  SolverSettings solver;

  bool set_indexed() const {
    return kind == ModelKind::kExplicitRank || kind == ModelKind::kTree ||
           kind == ModelKind::kCluster;
  }
};

namespace detail {

inline Subset parse_subset(const FieldReader& r, const ScenarioEntry& e, const std::string& text,
                           int n) {
  Subset a = 0;
  for (int i : r.integers_of(e, text)) {
    if (i < 1 || i > n) {
      throw field_error(e, r.section().name(),
                        "index " + std::to_string(i) + " outside 1.." + std::to_string(n));
    }
    a |= singleton(i - 1);
  }
  return a;
}

// "1,2 : 1.5" -> ({1,2}, 1.5)
inline std::pair<Subset, double> parse_valued_subset(const FieldReader& r, const ScenarioEntry& e,
                                                     int n) {
  auto colon = e.value.find(':');
  if (colon == std::string::npos) {
    throw field_error(e, r.section().name(), "expected '<indices> : <value>'");
  }
  Subset a = parse_subset(r, e, trim(e.value.substr(0, colon)), n);
  double v = to_double(trim(e.value.substr(colon + 1)), e, r.section().name());
  return {a, v};
}

inline std::optional<Partition> read_partition(const FieldReader& r, int n) {
  auto parts = r.section().all("part");
  if (parts.empty()) return std::nullopt;
  std::vector<std::vector<int>> p;
  for (const auto* e : parts) {
    std::vector<int> members;
    for (int i : r.integers_of(*e, e->value)) {
      if (i < 1 || i > n) {
        throw field_error(*e, r.section().name(),
                          "index " + std::to_string(i) + " outside 1.." + std::to_string(n));
      }
      members.push_back(i - 1);
    }
    p.push_back(std::move(members));
  }
  try {
    return Partition(n, std::move(p));
  } catch (const InvalidArgument& ex) {
    throw field_error(*parts.front(), r.section().name(), ex.what());
  }
}

inline void read_model(const ScenarioSection& sec, Scenario& sc) {
  FieldReader r(sec);
  const std::string kind = r.text("kind");
  if (kind == "explicit-rank") {
    sc.kind = ModelKind::kExplicitRank;
    sc.n = static_cast<int>(r.integer("n"));
    if (sc.n < 1 || sc.n > kExactLimit) throw r.error("n", "must lie in 1..20");
    std::vector<double> table(std::size_t{1} << sc.n, 0.0);
    if (r.has("table")) {
      auto t = r.numbers("table");
      if (t.size() != table.size()) {
        throw r.error("table", "expected 2^n = " + std::to_string(table.size()) +
                                   " values in bitmask order, got " + std::to_string(t.size()));
      }
      table = t;
    } else {
      auto values = sec.all("value");
      std::vector<char> seen(table.size(), 0);
      seen[0] = 1;
      for (const auto* e : values) {
        auto [a, v] = parse_valued_subset(r, *e, sc.n);
        if (a == 0) throw field_error(*e, sec.name(), "the empty set is fixed at 0");
        if (seen[a]) throw field_error(*e, sec.name(), "subset " + format_subset(a) + " given twice");
        seen[a] = 1;
        table[a] = v;
      }
      for (Subset a = 1; a < table.size(); ++a) {
        if (!seen[a]) {
          throw r.error("value", "no value for subset " + format_subset(a) +
                                     " (give every nonempty subset or use 'table')");
        }
      }
    }
    sc.rank = RankFunction::from_table(sc.n, std::move(table));
  } else if (kind == "tree") {
    sc.kind = ModelKind::kTree;
    sc.n = static_cast<int>(r.integer("n"));
    if (sc.n < 1 || sc.n > kMaxIndices) throw r.error("n", "must lie in 1..64");
    TreeTopology t{sc.n, {}};
    auto links = sec.all("link");
    if (links.empty()) throw r.error("link", "a tree needs at least one link");
    for (const auto* e : links) {
      auto [a, c] = parse_valued_subset(r, *e, sc.n);
      t.links.push_back({a, c});
    }
    sc.tree = normalize_tree(t);
    sc.rank = tree_rank(*sc.tree);
  } else if (kind == "cluster") {
    sc.kind = ModelKind::kCluster;
    ClusterAssignment c;
    c.m = static_cast<int>(r.integer("m"));
    c.server_capacity =
        r.has("server_capacity") ? r.numbers("server_capacity") : std::vector<double>(c.m, 1.0);
    for (const auto* e : sec.all("class")) {
      std::vector<int> servers;
      for (int s : r.integers_of(*e, e->value)) servers.push_back(s - 1);
      c.assign.push_back(std::move(servers));
    }
    c.n = static_cast<int>(c.assign.size());
    if (r.has("n") && r.integer("n") != c.n) {
      throw r.error("n", "declares " + std::to_string(r.integer("n")) + " classes but " +
                             std::to_string(c.n) + " 'class' lines are given");
    }
    if (c.n > kMaxIndices) throw r.error("class", "at most 64 classes");
    c.validate();
    sc.n = c.n;
    sc.cluster = c;
    sc.rank = cluster_rank(c);
  } else if (kind == "cardinality-rank") {
    sc.kind = ModelKind::kCardinalityRank;
    sc.card_source = r.text("source");
    if (sc.card_source == "table") {
      auto sizes = r.integers("sizes");
      auto values = r.numbers("values");
      GridShape shape(sizes);
      if (values.size() != shape.size()) {
        throw r.error("values", "expected " + std::to_string(shape.size()) +
                                    " grid values (last part fastest), got " +
                                    std::to_string(values.size()));
      }
      sc.card = CardinalityRank(shape, values);
    } else if (sc.card_source == "access-tree") {
      auto sizes = r.integers("sizes");
      sc.access_rates = r.numbers("rates");
      sc.access_capacity = r.number("capacity");
      if (sc.access_rates.size() != sizes.size()) throw r.error("rates", "one rate per part");
      sc.card = access_tree_rank(sizes, sc.access_rates, sc.access_capacity);
    } else if (sc.card_source == "grid-cluster") {
      sc.card = grid_cluster_rank(static_cast<int>(r.integer("d1")),
                                  static_cast<int>(r.integer("d2")));
    } else if (sc.card_source == "tree") {
      int n = static_cast<int>(r.integer("n"));
      if (n < 1 || n > kMaxIndices) throw r.error("n", "must lie in 1..64");
      TreeTopology t{n, {}};
      for (const auto* e : sec.all("link")) {
        auto [a, c] = parse_valued_subset(r, *e, n);
        t.links.push_back({a, c});
      }
      auto p = read_partition(r, n);
      if (!p) throw r.error("part", "a tree cardinality rank needs 'part' lines");
      sc.tree = normalize_tree(t);
      sc.card = tree_cardinality_rank(*sc.tree, *p);
    } else {
      throw r.error("source", "unknown source '" + sc.card_source +
                                  "' (table, access-tree, grid-cluster, tree)");
    }
    auto problems = sc.card->check();
    if (!problems.empty()) {
      throw InvalidRankError("cardinality rank is invalid: " + problems.front(), 0, 0);
    }
    sc.n = sc.card->shape().total_queues();
  } else if (kind == "random-cluster") {
    sc.kind = ModelKind::kRandomCluster;
    RandomAssignmentSpec spec;
    spec.m = static_cast<int>(r.integer("m"));
    spec.part_sizes = r.integers("sizes");
    spec.degrees = r.integers("degrees");
    if (r.has("groups")) {
      const auto& e = sec.require("groups");
      for (const auto& tok : split(e.value, ',')) {
        auto colon = tok.find(':');
        if (colon == std::string::npos) {
          throw field_error(e, sec.name(), "expected '<count>:<capacity>' entries");
        }
        spec.groups.push_back(
            {static_cast<int>(to_integer(trim(tok.substr(0, colon)), e, sec.name())),
             to_double(trim(tok.substr(colon + 1)), e, sec.name())});
      }
    } else {
      spec.groups = {{spec.m, 1.0}};
    }
    spec.validate();
    sc.random = spec;
    sc.n = spec.n();
  } else {
    throw r.error("kind", "unknown model kind '" + kind +
                              "' (explicit-rank, tree, cluster, cardinality-rank, random-cluster)");
  }
}

inline void read_workload(const ScenarioSection& sec, Scenario& sc) {
  FieldReader r(sec);
  if (sc.kind == ModelKind::kRandomCluster && r.has("alpha")) {
    // alpha times the boundary load of the mean capacity set.
    double alpha = r.number("alpha");
    const auto& spec = *sc.random;
    auto h = mean_rank_function(spec);
    auto load = boundary_load(h, spec.degrees);
    for (auto& v : load) v *= alpha;
    sc.grid_workload = GridWorkload::from_intensity(spec.part_sizes, load);
    return;
  }
  const bool per_part = !sc.set_indexed();
  const std::size_t expected =
      per_part ? (sc.card ? sc.card->shape().parts() : sc.random->parts())
               : static_cast<std::size_t>(sc.n);
  std::vector<double> lambda, sigma;
  if (r.has("intensity")) {
    lambda = r.numbers("intensity");
    sigma.assign(lambda.size(), 1.0);
    if (r.has("arrival") || r.has("size")) {
      throw r.error("intensity", "give either 'intensity' or 'arrival' and 'size'");
    }
  } else {
    lambda = r.numbers("arrival");
    sigma = r.has("size") ? r.numbers("size") : std::vector<double>(lambda.size(), 1.0);
  }
  const std::string what = per_part ? "part" : "queue";
  if (lambda.size() != expected) {
    throw r.error(r.has("intensity") ? "intensity" : "arrival",
                  "expected one value per " + what + " (" + std::to_string(expected) + "), got " +
                      std::to_string(lambda.size()));
  }
  if (sigma.size() != expected) {
    throw r.error("size", "expected one value per " + what + " (" + std::to_string(expected) + ")");
  }
  for (std::size_t i = 0; i < expected; ++i) {
    if (!(lambda[i] > 0.0) || !(sigma[i] > 0.0)) {
      throw r.error(r.has("intensity") ? "intensity" : "arrival",
                    "rates and sizes must be positive");
    }
  }
  if (per_part) {
    GridWorkload w;
    w.sizes = sc.card ? sc.card->sizes() : sc.random->part_sizes;
    w.arrival = lambda;
    for (std::size_t k = 0; k < expected; ++k) w.load.push_back(lambda[k] * sigma[k]);
    sc.grid_workload = w;
  } else {
    sc.workload = Workload{lambda, sigma};
  }
}

inline Method parse_method(const FieldReader& r) {
  const std::string m = r.text("method", "exact");
  if (m == "exact") return Method::kExact;
  if (m == "polysym") return Method::kPolysym;
  if (m == "bounds") return Method::kBounds;
  if (m == "simulate") return Method::kSimulate;
  if (m == "concentration") return Method::kConcentration;
  if (m == "truncated") return Method::kTruncated;
  if (m == "mean-rank") return Method::kMeanRank;
  throw r.error("method", "unknown method '" + m +
                              "' (exact, polysym, bounds, simulate, concentration, truncated, "
                              "mean-rank)");
}

inline void read_solver(const ScenarioSection& sec, Scenario& sc) {
  FieldReader r(sec);
  auto& s = sc.solver;
  s.method = parse_method(r);
  if (r.has("epsilon")) s.epsilons = r.numbers("epsilon");
  if (r.has("alpha")) s.alphas = r.numbers("alpha");
  if (r.has("alpha_range")) {
    auto range = r.numbers("alpha_range");
    int points = static_cast<int>(r.integer("alpha_points", 50));
    if (range.size() != 2 || !(range[0] < range[1]) || points < 2) {
      throw r.error("alpha_range", "expected 'lo, hi' with lo < hi and alpha_points >= 2");
    }
    for (int i = 0; i < points; ++i) {
      s.alphas.push_back(range[0] + (range[1] - range[0]) * i / (points - 1));
    }
  }
  s.trials = r.integer("trials", s.trials);
  s.subsets_per_profile = static_cast<int>(r.integer("subsets_per_profile", 8));
  if (r.has("seed")) s.seed = static_cast<std::uint64_t>(r.integer("seed"));
  s.truncation = static_cast<int>(r.integer("truncation", 0));
  s.sim.events = static_cast<std::uint64_t>(r.integer("events", 1'000'000));
  s.sim.batches = static_cast<int>(r.integer("batches", 20));
  s.sim.warmup_fraction = r.number("warmup", 0.2);
  s.sim.cv = r.number("cv", 2.0);
  const std::string dist = r.text("distribution", "exponential");
  if (dist == "exponential") {
    s.sim.distribution = SizeDistribution::kExponential;
  } else if (dist == "hyperexponential") {
    s.sim.distribution = SizeDistribution::kHyperexponential;
  } else {
    throw r.error("distribution", "expected exponential or hyperexponential");
  }
  if (r.has("profile")) s.profile = r.integers("profile");
  if (sc.set_indexed()) s.partition = read_partition(r, sc.n);
}

inline void check_combination(const Scenario& sc, const FieldReader& solver) {
  const Method m = sc.solver.method;
  auto bad = [&](const std::string& why) {
    return solver.error("method", std::string("method '") + method_name(m) + "' " + why);
  };
  const bool needs_workload = m == Method::kExact || m == Method::kPolysym ||
                              m == Method::kSimulate || m == Method::kTruncated ||
                              (m == Method::kBounds && sc.kind != ModelKind::kRandomCluster);
  if (needs_workload && !sc.workload && !sc.grid_workload) {
    throw ParseError("missing section [workload] required by method '" +
                         std::string(method_name(m)) + "'",
                     0, "workload");
  }
  switch (m) {
    case Method::kExact:
      if (sc.kind == ModelKind::kRandomCluster) throw bad("needs an explicit capacity set");
      if (sc.n > kExactLimit) throw bad("is limited to 20 queues");
      break;
    case Method::kPolysym:
      if (sc.kind == ModelKind::kRandomCluster && !sc.grid_workload) throw bad("needs a workload");
      break;
    case Method::kSimulate:
    case Method::kTruncated:
      if (!sc.set_indexed() && sc.kind != ModelKind::kCardinalityRank) {
        throw bad("needs an explicit capacity set");
      }
      break;
    case Method::kBounds:
      if (sc.solver.epsilons.empty()) throw solver.error("epsilon", "bounds need 'epsilon'");
      break;
    case Method::kConcentration:
      if (sc.kind != ModelKind::kRandomCluster) throw bad("needs a random-cluster model");
      if (sc.solver.epsilons.size() != 1) throw solver.error("epsilon", "give one epsilon");
      break;
    case Method::kMeanRank:
      if (sc.kind != ModelKind::kRandomCluster) throw bad("needs a random-cluster model");
      if (sc.solver.profile.empty()) throw solver.error("profile", "mean-rank needs 'profile'");
      break;
  }
}

}  // namespace detail

inline Scenario read_scenario(const ScenarioDocument& doc) {
  Scenario sc;
  detail::read_model(doc.section("model"), sc);
  if (doc.has("workload")) detail::read_workload(doc.section("workload"), sc);
  static const ScenarioSection empty_solver("solver", 0);
  const ScenarioSection& solver = doc.has("solver") ? doc.section("solver") : empty_solver;
  detail::read_solver(solver, sc);
  // A bare model is enough for validation; run_scenario repeats the check.
  if (doc.has("solver") || doc.has("workload")) detail::check_combination(sc, FieldReader(solver));
  doc.reject_unused();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  return read_scenario(ScenarioDocument::load(path));
}

// ---------------------------------------------------------------------------
// Validation and execution

struct RunOptions {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool svg = false;
};

// Output files by name, plus the summary text (also written as summary.txt).
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;
  std::string summary;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string model_line(const Scenario& sc) {
  std::ostringstream os;
  os << "model: " << model_kind_name(sc.kind);
  if (sc.kind == ModelKind::kCardinalityRank) {
    os << " (" << sc.card_source << "), sizes " << format_profile(sc.card->sizes())
       << ", K=" << sc.card->shape().parts();
  } else if (sc.kind == ModelKind::kRandomCluster) {
    os << ", m=" << sc.random->m << ", sizes " << format_profile(sc.random->part_sizes)
       << ", degrees " << format_profile(sc.random->degrees);
  }
  os << ", n=" << sc.n << "\n";
  if (sc.tree) os << sc.tree->describe() << "\n";
  return os.str();
}

// The rank a set-indexed method runs on; cardinality ranks are expanded.
inline RankFunction set_rank(const Scenario& sc) {
  if (sc.rank) return *sc.rank;
  require_size(sc.n, kExactLimit, "expanding a cardinality rank");
  return sc.card->expand();
}

inline Workload set_workload(const Scenario& sc) {
  if (sc.workload) return *sc.workload;
  return sc.grid_workload->expand();
}

inline void require_polymatroid(const RankFunction& r) {
  if (r.n() > kValidationLimit) return;
  auto rep = validate_polymatroid(r);
  if (!rep.valid()) {
    const auto& v = rep.violations.front();
    throw InvalidRankError("not a polymatroid rank: " + rep.describe(), v.first, v.second);
  }
}

// Cardinality rank and grid workload for a poly-symmetric set model.
inline std::pair<CardinalityRank, GridWorkload> grid_view(const Scenario& sc,
                                                          std::string& partition_note) {
  if (sc.card) return {*sc.card, *sc.grid_workload};
  if (sc.kind == ModelKind::kRandomCluster) {
    return {mean_rank_function(*sc.random), *sc.grid_workload};
  }
  Partition p = sc.solver.partition ? *sc.solver.partition : exchangeability_partition(*sc.rank);
  partition_note = "partition: " + p.describe() + "\n";
  // Every queue of a part must carry the same traffic.
  auto h = cardinality_rank_from(*sc.rank, p);
  GridWorkload w;
  w.sizes = p.sizes();
  const auto& wl = *sc.workload;
  for (std::size_t k = 0; k < p.parts(); ++k) {
    const auto& members = p.part(k);
    int first = members.front();
    for (int i : members) {
      if (!approx_equal(wl.lambda[i], wl.lambda[first]) ||
          !approx_equal(wl.sigma[i], wl.sigma[first])) {
        throw InvalidArgument("queues " + std::to_string(first + 1) + " and " +
                              std::to_string(i + 1) + " share a part but not a workload");
      }
    }
    w.arrival.push_back(wl.lambda[first]);
    w.load.push_back(wl.lambda[first] * wl.sigma[first]);
  }
  return {h, w};
}

}  // namespace detail

// Static checks only: axioms when n <= 16, tree normalization, stability.
inline std::string validate_scenario(const Scenario& sc) {
  std::ostringstream os;
  os << detail::model_line(sc);
  if (sc.set_indexed()) {
    const auto& r = *sc.rank;
    if (r.n() <= kValidationLimit) {
      detail::require_polymatroid(r);
      os << "polymatroid axioms: ok\n";
    } else {
      os << "polymatroid axioms: skipped (n > " << kValidationLimit << ")\n";
    }
    if (r.n() <= kExchangeLimit) {
      auto p = exchangeability_partition(r);
      os << "exchangeability partition: " << p.describe() << " (K=" << p.parts() << ")\n";
    }
    if (sc.workload && r.n() <= kExchangeLimit) {
      auto st = stability_margin(r, *sc.workload);
      require_stable(st);
      os << "stability margin: " << detail::fmt(st.margin) << " at "
         << format_subset(st.argmin) << "\n";
    }
  } else if (sc.card) {
    os << "cardinality rank checks: ok\n";
    if (sc.grid_workload) {
      auto st = grid_stability(*sc.card, *sc.grid_workload);
      if (!st.stable()) {
        throw GridUnstableError("unstable on the profile grid at a=" + format_profile(st.argmin) +
                                    ": margin " + format_double(st.margin),
                                st.argmin, st.margin);
      }
      os << "stability margin: " << detail::fmt(st.margin) << " at "
         << format_profile(st.argmin) << "\n";
    }
  } else {
    auto h = mean_rank_function(*sc.random);
    os << "mean capacity h(n) = " << detail::fmt(h.at(h.shape().size() - 1)) << "\n";
    if (sc.grid_workload) {
      auto st = grid_stability(h, *sc.grid_workload);
      if (!st.stable()) {
        throw GridUnstableError("unstable on the profile grid at a=" + format_profile(st.argmin) +
                                    ": margin " + format_double(st.margin),
                                st.argmin, st.margin);
      }
      os << "stability margin: " << detail::fmt(st.margin) << " at "
         << format_profile(st.argmin) << "\n";
    }
  }
  os << "ok\n";
  return os.str();
}

inline Artifacts run_scenario(const Scenario& sc, const RunOptions& opt = {}) {
  static const ScenarioSection no_solver("solver", 0);
  detail::check_combination(sc, FieldReader(no_solver));
  Artifacts out;
  std::ostringstream sum;
  sum << detail::model_line(sc);
  sum << "method: " << method_name(sc.solver.method) << "\n";
  const std::uint64_t seed = opt.seed ? *opt.seed : sc.solver.seed;
  auto add = [&](const std::string& name, const std::string& body) {
    out.files.emplace_back(name, body);
  };
  if (sc.rank) detail::require_polymatroid(*sc.rank);

  switch (sc.solver.method) {
    case Method::kExact: {
      auto r = detail::set_rank(sc);
      auto w = detail::set_workload(sc);
      auto s = solve_exact(r, w, opt.threads);
      auto m = metrics(s, w);
      sum << "pi(empty) = " << detail::fmt(s.pi(0)) << "\n";
      sum << "queue  L  delay  throughput  P(active)\n";
      for (std::size_t i = 0; i < m.size(); ++i) {
        sum << i + 1 << "  " << detail::fmt(m[i].mean_jobs) << "  " << detail::fmt(m[i].delay)
            << "  " << detail::fmt(m[i].throughput) << "  "
            << detail::fmt(m[i].active_probability) << "\n";
      }
      std::ostringstream a, b;
      write_subset_csv(a, s);
      write_queue_csv(b, m);
      add("subsets.csv", a.str());
      add("queues.csv", b.str());
      break;
    }
    case Method::kTruncated: {
      auto r = detail::set_rank(sc);
      auto w = detail::set_workload(sc);
      auto t = sc.solver.truncation > 0 ? stationary_truncated(r, w, sc.solver.truncation)
                                        : stationary_truncated_auto(r, w);
      sum << "truncation N = " << t.truncation() << ", tail mass " << detail::fmt(t.tail_mass())
          << "\n";
      sum << "pi(empty) = " << detail::fmt(t.pi(0)) << "\n";
      std::ostringstream a;
      a << "queue,L\n";
      sum << "queue  L\n";
      for (int i = 0; i < r.n(); ++i) {
        sum << i + 1 << "  " << detail::fmt(t.total_l(i)) << "\n";
        a << i + 1 << "," << format_double(t.total_l(i)) << "\n";
      }
      add("queues.csv", a.str());
      break;
    }
    case Method::kPolysym: {
      std::string note;
      auto [h, w] = detail::grid_view(sc, note);
      sum << note;
      PolysymOptions po;
      po.threads = opt.threads;
      auto g = solve_polysym(h, w, po);
      auto delay = mean_delay(g, w);
      std::vector<double> gamma;
      if (sc.card_source == "access-tree") gamma = access_tree_throughput(g, w);
      sum << "pi(0) = " << detail::fmt(g.pi(0)) << "\n";
      sum << "part  size  L  delay" << (gamma.empty() ? "" : "  throughput") << "\n";
      std::ostringstream a, b;
      b << "part,size,L,delay" << (gamma.empty() ? "" : ",throughput") << "\n";
      for (std::size_t k = 0; k < g.parts(); ++k) {
        sum << k + 1 << "  " << g.shape().size_of(k) << "  " << detail::fmt(g.total_l(k)) << "  "
            << detail::fmt(delay[k]);
        b << k + 1 << "," << g.shape().size_of(k) << "," << format_double(g.total_l(k)) << ","
          << format_double(delay[k]);
        if (!gamma.empty()) {
          sum << "  " << detail::fmt(gamma[k]);
          b << "," << format_double(gamma[k]);
        }
        sum << "\n";
        b << "\n";
      }
      write_grid_csv(a, g);
      add("grid.csv", a.str());
      add("parts.csv", b.str());
      break;
    }
    case Method::kBounds: {
      if (sc.kind == ModelKind::kRandomCluster) {
        const auto& spec = *sc.random;
        for (int s : spec.part_sizes) {
          if (s != spec.part_sizes.front()) {
            throw InvalidArgument("cluster bounds need parts of equal size");
          }
        }
        if (spec.groups.size() != 1 || spec.groups.front().capacity != 1.0) {
          throw InvalidArgument("cluster bounds assume unit-capacity servers");
        }
        ClusterBoundsSetup setup{spec.m, spec.part_sizes.front(), spec.degrees};
        std::vector<CurvePoint> pts;
        for (double eps : sc.solver.epsilons) {
          auto alphas = sc.solver.alphas.empty() ? default_alpha_grid(eps) : sc.solver.alphas;
          auto p = random_cluster_bounds(setup, eps, alphas, opt.threads);
          pts.insert(pts.end(), p.begin(), p.end());
        }
        sum << "epsilon  alpha  part  lower_rate  upper_rate\n";
        for (const auto& p : pts) {
          sum << detail::fmt(p.epsilon) << "  " << detail::fmt(p.alpha) << "  " << p.part + 1
              << "  " << detail::fmt(p.lower_rate()) << "  " << detail::fmt(p.upper_rate())
              << "\n";
        }
        std::ostringstream a;
        write_curve_csv(a, pts);
        add("curve.csv", a.str());
        if (opt.svg) {
          std::ostringstream s;
          write_curve_svg(s, pts);
          add("curve.svg", s.str());
        }
        break;
      }
      std::ostringstream a;
      const bool access = sc.card_source == "access-tree";
      const bool grid = !sc.set_indexed();
      a << (grid ? "part" : "queue") << ",epsilon,metric,lower,upper,pi0_ratio\n";
      sum << (grid ? "part" : "queue") << "  epsilon  metric  lower  upper\n";
      for (double eps : sc.solver.epsilons) {
        SandwichResult res;
        std::string metric = "L";
        if (access) {
          res = tree_access_bounds(sc.access_rates, sc.access_capacity, eps, *sc.grid_workload,
                                   opt.threads);
          metric = "throughput";
        } else if (grid) {
          std::string note;
          auto [h, w] = detail::grid_view(sc, note);
          res = sandwich_L(h, eps, w, opt.threads);
        } else {
          res = sandwich_L(*sc.rank, eps, *sc.workload, opt.threads);
        }
        for (std::size_t i = 0; i < res.lower.size(); ++i) {
          sum << i + 1 << "  " << detail::fmt(eps) << "  " << metric << "  "
              << detail::fmt(res.lower[i]) << "  " << detail::fmt(res.upper[i]) << "\n";
          a << i + 1 << "," << format_double(eps) << "," << metric << ","
            << format_double(res.lower[i]) << "," << format_double(res.upper[i]) << ","
            << format_double(res.ratio()) << "\n";
        }
      }
      add("bounds.csv", a.str());
      break;
    }
    case Method::kSimulate: {
      auto r = detail::set_rank(sc);
      auto w = detail::set_workload(sc);
      SimOptions so = sc.solver.sim;
      so.seed = seed;
      auto e = simulate(r, w, so);
      sum << "events " << e.events << ", horizon " << detail::fmt(e.horizon)
          << (e.diverged ? ", DIVERGED (job count cap exceeded)" : "") << "\n";
      sum << "queue  L  stderr\n";
      for (std::size_t i = 0; i < e.mean.size(); ++i) {
        sum << i + 1 << "  " << detail::fmt(e.mean[i]) << "  " << detail::fmt(e.std_error[i])
            << "\n";
      }
      std::ostringstream a;
      write_sim_csv(a, e);
      add("simulation.csv", a.str());
      break;
    }
    case Method::kConcentration: {
      auto rep = concentration_experiment(*sc.random, sc.solver.epsilons.front(),
                                          sc.solver.trials, sc.solver.subsets_per_profile, seed,
                                          opt.threads);
      sum << "trials " << rep.in_band.size() << ", in-band probability "
          << detail::fmt(rep.probability()) << ", worst relative deviation "
          << detail::fmt(rep.worst_deviation()) << "\n";
      std::ostringstream a;
      write_concentration_csv(a, rep);
      add("concentration.csv", a.str());
      break;
    }
    case Method::kMeanRank: {
      const auto& a = sc.solver.profile;
      double formula = mean_rank(*sc.random, a);
      auto est = empirical_mean_rank(*sc.random, a, sc.solver.trials, seed, opt.threads);
      sum << "profile " << format_profile(a) << ": mean rank " << detail::fmt(formula)
          << ", empirical " << detail::fmt(est.mean) << " +- " << detail::fmt(est.std_error)
          << " (99% CI [" << detail::fmt(est.ci_low) << ", " << detail::fmt(est.ci_high) << "]"
          << (est.covers(formula) ? ", covers" : ", MISSES") << ")\n";
      std::ostringstream c;
      c << "profile,mean_rank,empirical_mean,std_error,ci_low,ci_high,trials\n";
      c << "\"" << format_profile(a) << "\"," << format_double(formula) << ","
        << format_double(est.mean) << "," << format_double(est.std_error) << ","
        << format_double(est.ci_low) << "," << format_double(est.ci_high) << "," << est.trials
        << "\n";
      add("mean_rank.csv", c.str());
      break;
    }
  }
  out.summary = sum.str();
  out.files.emplace_back("summary.txt", out.summary);
  return out;
}

}  // namespace bfperf

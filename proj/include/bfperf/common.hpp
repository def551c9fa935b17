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

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bfperf {

// A subset of queue indices {0..63} encoded as a bitmask.
using Subset = std::uint64_t;

inline constexpr int kMaxIndices = 64;

inline int cardinality(Subset a) { return std::popcount(a); }
inline bool contains(Subset a, int i) { return (a >> i) & 1u; }
inline Subset singleton(int i) { return Subset{1} << i; }
inline Subset full_set(int n) {
  return n >= 64 ? ~Subset{0} : (Subset{1} << n) - 1;
}

// Renders a subset with 1-based labels, e.g. "{1,3}".
inline std::string format_subset(Subset a) {
  std::string out = "{";
  bool first = true;
  for (int i = 0; i < kMaxIndices; ++i) {
    if (!contains(a, i)) continue;
    if (!first) out += ",";
    out += std::to_string(i + 1);
    first = false;
  }
  return out + "}";
}

// Relative 1e-9 with an absolute floor of 1e-12.
inline constexpr double kRelTol = 1e-9;
inline constexpr double kAbsTol = 1e-12;

inline bool approx_equal(double x, double y, double rel = kRelTol,
                         double abs = kAbsTol) {
  return std::abs(x - y) <= std::max(abs, rel * std::max(std::abs(x), std::abs(y)));
}

// x <= y up to tolerance.
inline bool approx_le(double x, double y, double rel = kRelTol,
                      double abs = kAbsTol) {
  return x <= y || approx_equal(x, y, rel, abs);
}

// Error hierarchy. Every error carries a stable machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class SizeLimitError : public Error {
 public:
  explicit SizeLimitError(const std::string& what) : Error("size_limit", what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error("invalid_argument", what) {}
};

class StructureError : public Error {
 public:
  explicit StructureError(const std::string& what) : Error("structure", what) {}
};

class NotPolySymmetric : public Error {
 public:
  NotPolySymmetric(const std::string& what, Subset first, Subset second)
      : Error("not_poly_symmetric", what), first_(first), second_(second) {}
  Subset first() const noexcept { return first_; }
  Subset second() const noexcept { return second_; }

 private:
  Subset first_;
  Subset second_;
};

// Instability of a set-indexed system; `witness` is the violating subset.
class UnstableError : public Error {
 public:
  UnstableError(const std::string& what, Subset witness, double margin)
      : Error("unstable", what), witness_(witness), margin_(margin) {}
  Subset witness() const noexcept { return witness_; }
  double margin() const noexcept { return margin_; }

 private:
  Subset witness_;
  double margin_;
};

// Instability of a grid-indexed system; `profile` is the violating vector.
class GridUnstableError : public Error {
 public:
  GridUnstableError(const std::string& what, std::vector<int> profile,
                    double margin)
      : Error("unstable", what), profile_(std::move(profile)), margin_(margin) {}
  const std::vector<int>& profile() const noexcept { return profile_; }
  double margin() const noexcept { return margin_; }

 private:
  std::vector<int> profile_;
  double margin_;
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error("range", what) {}
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what)
      : Error("internal_consistency", what) {}
};

inline void require_size(int n, int limit, const char* what) {
  if (n > limit) {
    std::ostringstream os;
    os << what << ": n=" << n << " too large for exhaustive evaluation (limit "
       << limit << ")";
    throw SizeLimitError(os.str());
  }
}

// 17 significant digits, locale-independent; used by every CSV writer.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_profile(const std::vector<int>& a) {
  std::string out = "(";
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(a[k]);
  }
  return out + ")";
}

// log(exp(x) + exp(y)) without overflow.
inline double log_add(double x, double y) {
  if (x == -INFINITY) return y;
  if (y == -INFINITY) return x;
  double hi = std::max(x, y);
  return hi + std::log1p(std::exp(std::min(x, y) - hi));
}

inline double log_binomial(int n, int k) {
  if (k < 0 || k > n) return -INFINITY;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// processed exactly once; results must be written to per-index slots.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(threads);
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) body(i);
      } catch (...) {
        failures[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace bfperf

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

#include <cstddef>
#include <numeric>
#include <vector>

#include "bfperf/common.hpp"

namespace bfperf {

// The profile grid prod_k {0..n_k}, flattened with the last component
// varying fastest.
class GridShape {
 public:
  GridShape() = default;
  explicit GridShape(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty()) throw InvalidArgument("grid needs at least one part");
    strides_.assign(sizes_.size(), 1);
    std::size_t total = 1;
    for (std::size_t k = sizes_.size(); k-- > 0;) {
      if (sizes_[k] < 0) throw InvalidArgument("negative part size");
      strides_[k] = total;
      total *= static_cast<std::size_t>(sizes_[k]) + 1;
      if (total > (std::size_t{1} << 32)) {
        throw SizeLimitError("profile grid exceeds 2^32 points");
      }
    }
    size_ = total;
  }

  std::size_t parts() const { return sizes_.size(); }
  const std::vector<int>& sizes() const { return sizes_; }
  int size_of(std::size_t k) const { return sizes_[k]; }
  std::size_t size() const { return size_; }
  std::size_t stride(std::size_t k) const { return strides_[k]; }
  int total_queues() const {
    return std::accumulate(sizes_.begin(), sizes_.end(), 0);
  }

  std::size_t index(const std::vector<int>& a) const {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < sizes_.size(); ++k) {
      idx += static_cast<std::size_t>(a[k]) * strides_[k];
    }
    return idx;
  }

  std::vector<int> profile(std::size_t idx) const {
    std::vector<int> a(sizes_.size());
    for (std::size_t k = 0; k < sizes_.size(); ++k) {
      a[k] = static_cast<int>(idx / strides_[k]);
      idx %= strides_[k];
    }
    return a;
  }

  int component(std::size_t idx, std::size_t k) const {
    return static_cast<int>((idx / strides_[k]) % (sizes_[k] + 1));
  }

  bool contains(const std::vector<int>& a) const {
    if (a.size() != sizes_.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k] < 0 || a[k] > sizes_[k]) return false;
    }
    return true;
  }

  // Grid indices grouped by total count a_1 + ... + a_K, each shell in
  // increasing flat-index order.
  std::vector<std::vector<std::size_t>> shells() const {
    std::vector<std::vector<std::size_t>> out(total_queues() + 1);
    std::vector<int> a(sizes_.size(), 0);
    int total = 0;
    for (std::size_t idx = 0; idx < size_; ++idx) {
      out[total].push_back(idx);
      // Odometer increment keeps `total` in sync with the flat index.
      for (std::size_t k = sizes_.size(); k-- > 0;) {
        if (a[k] < sizes_[k]) {
          ++a[k];
          ++total;
          break;
        }
        total -= a[k];
        a[k] = 0;
      }
    }
    return out;
  }

  bool operator==(const GridShape& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

}  // namespace bfperf

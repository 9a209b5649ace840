// Copyright 2026 the nnsp authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "core/types.hpp"

namespace nnsp {

/// Totally symmetric rank-4 tensor over n indices, stored as the unique
/// sorted quadruples i <= j <= k <= l in lexicographic order.
class SymTensor4 {
 public:
  SymTensor4() = default;
  explicit SymTensor4(int n) : n_(n) {
    build_offsets();
    values_.assign(count(), 0.0);
  }

  int n() const { return n_; }
  std::size_t count() const {
    // combinations with repetition: C(n+3, 4)
    std::size_t m = (std::size_t)n_;
    return m * (m + 1) * (m + 2) * (m + 3) / 24;
  }

  std::size_t rank(int i, int j, int k, int l) const {
    sort4(i, j, k, l);
    return off4_[i] + off3_[j] - off3_[i] + off2_[k] - off2_[j] + (std::size_t)(l - k);
  }

  double operator()(int i, int j, int k, int l) const { return values_[rank(i, j, k, l)]; }
  double& at_sorted(std::size_t r) { return values_[r]; }
  double at_sorted(std::size_t r) const { return values_[r]; }

  const std::vector<double>& data() const { return values_; }
  std::vector<double>& data() { return values_; }

  /// Visits every sorted quadruple (i <= j <= k <= l) in storage order.
  template <typename F>
  void for_each(F&& f) const {
    std::size_t r = 0;
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j)
        for (int k = j; k < n_; ++k)
          for (int l = k; l < n_; ++l) f(i, j, k, l, values_[r++]);
  }

  static void sort4(int& a, int& b, int& c, int& d) {
    auto sw = [](int& x, int& y) { if (x > y) std::swap(x, y); };
    sw(a, b); sw(c, d); sw(a, c); sw(b, d); sw(b, c);
  }

 private:
  void build_offsets() {
    // off4_[i]: rank of the first quad starting at i; likewise for the
    // 3- and 2-index tails, measured from index 0.
    off4_.assign(n_ + 1, 0);
    off3_.assign(n_ + 1, 0);
    off2_.assign(n_ + 1, 0);
    auto h1 = [&](int i) { return (std::size_t)(n_ - i); };
    auto h2 = [&](int i) { std::size_t m = n_ - i; return m * (m + 1) / 2; };
    auto h3 = [&](int i) { std::size_t m = n_ - i; return m * (m + 1) * (m + 2) / 6; };
    for (int i = 0; i < n_; ++i) {
      off4_[i + 1] = off4_[i] + h3(i);
      off3_[i + 1] = off3_[i] + h2(i);
      off2_[i + 1] = off2_[i] + h1(i);
    }
  }

  int n_ = 0;
  std::vector<double> values_;
  std::vector<std::size_t> off4_, off3_, off2_;
};

/// Number of distinct permutations of the multiset {i, j, k, l}.
inline int quad_multiplicity(int i, int j, int k, int l) {
  SymTensor4::sort4(i, j, k, l);
  if (i == l) return 1;
  if (i == k || j == l) return 4;                 // aaab / abbb
  if (i == j && k == l) return 6;                 // aabb
  if (i == j || j == k || k == l) return 12;      // aabc
  return 24;
}

/// Distinct permutations of a sorted quadruple, written into `out`; returns
/// the count.  Used when contracting a symmetric tensor against a weight
/// that is not itself symmetric in all four slots.
inline int quad_permutations(int i, int j, int k, int l, std::array<std::array<int, 4>, 24>& out) {
  std::array<int, 4> v{i, j, k, l};
  int cnt = 0;
  // v is sorted; std::next_permutation enumerates distinct multiset perms
  do {
    out[cnt++] = v;
  } while (std::next_permutation(v.begin(), v.end()));
  return cnt;
}

inline int triple_permutations(int i, int j, int k, std::array<std::array<int, 3>, 6>& out) {
  std::array<int, 3> v{i, j, k};
  int cnt = 0;
  do {
    out[cnt++] = v;
  } while (std::next_permutation(v.begin(), v.end()));
  return cnt;
}

}  // namespace nnsp

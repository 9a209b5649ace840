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

#include <cmath>
#include <cstdint>

namespace nnsp {

// Counter-based RNG.  A stream is keyed by up to four 64-bit words
// (e.g. master seed, chain seed, epoch, layer); draws within a stream come
// from iterating splitmix64.  Output is identical across platforms and
// independent of scheduling, which is what makes multi-seed runs and
// checkpoint resume reproducible.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t mix_key(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(uint64_t k0, uint64_t k1 = 0, uint64_t k2 = 0, uint64_t k3 = 0) {
    state_ = mix_key(mix_key(mix_key(k0, k1), k2), k3);
    have_cached_ = false;
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in (0, 1]; never returns 0 so it is safe inside log().
  double uniform() {
    return (next_u64() >> 11) * (1.0 / 9007199254740992.0) + (0.5 / 9007199254740992.0);
  }

  // Uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * (uniform() - 0.5 / 9007199254740992.0); }

  // Standard normal via Box-Muller (explicit, so draws are platform-exact).
  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n)
  uint64_t below(uint64_t n) { return next_u64() % n; }

 private:
  uint64_t state_;
  double cached_;
  bool have_cached_;
};

}  // namespace nnsp

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

#include "core/cumulants.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "core/gauss_hermite.hpp"
#include "core/rng.hpp"

namespace nnsp {

std::complex<double> relu_G(int s) {
  static const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
  if (s == 0) return {inv_sqrt_2pi, 0.0};
  if (s == 1) return {0.0, -0.5};
  if (s % 2 == 1) return {0.0, 0.0};  // odd s >= 3
  int k = (s - 2) / 2;                // s = 2k + 2
  double v = inv_sqrt_2pi;
  for (int t = 1; t <= k; ++t) {
    // (2k)! / (2^k k!) = (2k-1)!! accumulated incrementally
    v *= (2.0 * t - 1.0);
  }
  if (k % 2 == 1) v = -v;
  return {v, 0.0};
}

double quadratic_V(const Eigen::Matrix4d& L) {
  auto l = [&](int a, int b) { return L(a - 1, b - 1); };
  double t2 = l(1, 1) * l(3, 3) * l(2, 4) * l(2, 4) + l(1, 1) * l(4, 4) * l(2, 3) * l(2, 3) +
              l(2, 2) * l(3, 3) * l(1, 4) * l(1, 4) + l(2, 2) * l(4, 4) * l(1, 3) * l(1, 3);
  double t4 = l(1, 3) * l(1, 3) * l(2, 4) * l(2, 4) + l(1, 4) * l(1, 4) * l(2, 3) * l(2, 3);
  double t8 = l(1, 1) * l(2, 3) * l(3, 4) * l(2, 4) + l(2, 2) * l(3, 4) * l(1, 4) * l(1, 3) +
              l(3, 3) * l(1, 2) * l(1, 4) * l(2, 4) + l(4, 4) * l(1, 2) * l(1, 3) * l(2, 3);
  double t16 = l(1, 2) * l(1, 3) * l(2, 4) * l(3, 4) + l(1, 2) * l(1, 4) * l(2, 3) * l(3, 4) +
               l(1, 3) * l(1, 4) * l(2, 3) * l(2, 4);
  return 2.0 * t2 + 4.0 * t4 + 8.0 * t8 + 16.0 * t16;
}

double quadratic_V_pairing(const Eigen::Matrix4d& L, const std::array<int, 4>& p) {
  Eigen::Matrix4d P;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) P(a, b) = L(p[a], p[b]);
  return quadratic_V(P);
}

namespace {

struct SeriesTerm {
  int e[6];       // exponents of L12 L13 L14 L23 L24 L34
  double coeff;   // real part of A (imaginary part is zero term by term)
};

const std::vector<SeriesTerm>& relu_series_terms(int t_max) {
  static std::map<int, std::vector<SeriesTerm>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(t_max);
  if (it != cache.end()) return it->second;

  std::vector<double> fact(t_max + 1, 1.0);
  for (int i = 1; i <= t_max; ++i) fact[i] = fact[i - 1] * i;

  // Per-point factor: the i attached to the odd-order G cancels against the
  // expansion measure, leaving the real Hermite coefficient c_s s! (equal to
  // |G_1| = 1/2 at s = 1 and to G_s itself at even s).
  auto g = [](int s) { return (s == 1) ? 0.5 : relu_G(s).real(); };

  std::vector<SeriesTerm> terms;
  for (int l = 0; l <= t_max; ++l)
    for (int m = 0; m + l <= t_max; ++m)
      for (int n = 0; n + m + l <= t_max; ++n)
        for (int p = 0; p + n + m + l <= t_max; ++p)
          for (int q = 0; q + p + n + m + l <= t_max; ++q)
            for (int r = 0; r + q + p + n + m + l <= t_max; ++r) {
              double gp = g(l + m + n) * g(l + p + q) * g(m + p + r) * g(n + q + r);
              if (gp == 0.0) continue;
              double A = gp / (fact[l] * fact[m] * fact[n] * fact[p] * fact[q] * fact[r]);
              terms.push_back({{l, m, n, p, q, r}, A});
            }
  return cache.emplace(t_max, std::move(terms)).first->second;
}

}  // namespace

double relu_mu4_series(const Eigen::Matrix4d& L4, const SeriesTruncation& trunc) {
  trunc.validate();
  for (int a = 0; a < 4; ++a)
    if (std::abs(L4(a, a) - 1.0) > 1e-9)
      throw Error("relu_mu4_series: diagonal must be 1 (normalize the block first)");
  const double off[6] = {L4(0, 1), L4(0, 2), L4(0, 3), L4(1, 2), L4(1, 3), L4(2, 3)};
  static const int pair_of[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (int t = 0; t < 6; ++t)
    if (std::abs(off[t]) >= trunc.offdiag_threshold)
      throw NonConvergentError(pair_of[t][0], pair_of[t][1], off[t]);

  // power tables up to t_max
  double pw[6][32];
  for (int t = 0; t < 6; ++t) {
    pw[t][0] = 1.0;
    for (int e = 1; e <= trunc.t_max && e < 32; ++e) pw[t][e] = pw[t][e - 1] * off[t];
  }
  double acc = 0.0;
  for (const auto& term : relu_series_terms(trunc.t_max)) {
    acc += term.coeff * pw[0][term.e[0]] * pw[1][term.e[1]] * pw[2][term.e[2]] *
           pw[3][term.e[3]] * pw[4][term.e[4]] * pw[5][term.e[5]];
  }
  return acc;
}

double assemble_U_quadratic(const Eigen::Matrix4d& L4, double sa2) {
  double v = quadratic_V_pairing(L4, {0, 1, 2, 3}) + quadratic_V_pairing(L4, {0, 2, 1, 3}) +
             quadratic_V_pairing(L4, {0, 3, 1, 2});
  return sa2 * sa2 * v;
}

double assemble_U_relu(const Eigen::Matrix4d& L4, double sa2, const SeriesTruncation& trunc) {
  // Normalize to unit diagonal; ReLU is positively homogeneous so the fourth
  // moment picks up the product of the four standard deviations.
  Eigen::Vector4d s;
  for (int a = 0; a < 4; ++a) {
    if (!(L4(a, a) > 0.0)) throw Error("assemble_U_relu: non-positive diagonal");
    s(a) = std::sqrt(L4(a, a));
  }
  Eigen::Matrix4d R;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) R(a, b) = L4(a, b) / (s(a) * s(b));
  double mu4 = relu_mu4_series(R, trunc) * s(0) * s(1) * s(2) * s(3);
  double p01 = relu_kernel_entry(L4(0, 0), L4(1, 1), L4(0, 1), 1.0);
  double p23 = relu_kernel_entry(L4(2, 2), L4(3, 3), L4(2, 3), 1.0);
  double p02 = relu_kernel_entry(L4(0, 0), L4(2, 2), L4(0, 2), 1.0);
  double p13 = relu_kernel_entry(L4(1, 1), L4(3, 3), L4(1, 3), 1.0);
  double p03 = relu_kernel_entry(L4(0, 0), L4(3, 3), L4(0, 3), 1.0);
  double p12 = relu_kernel_entry(L4(1, 1), L4(2, 2), L4(1, 2), 1.0);
  return sa2 * sa2 * (3.0 * mu4 - p01 * p23 - p02 * p13 - p03 * p12);
}

namespace {

inline double act_of(Activation act, double z) {
  switch (act) {
    case Activation::Linear: return z;
    case Activation::Quadratic: return z * z;
    case Activation::Relu: return z > 0.0 ? z : 0.0;
  }
  return 0.0;
}

// Factor of a (possibly indefinite-by-rounding) 4x4 covariance: eigenvalues
// below the clip are raised to zero.
Eigen::Matrix4d factor_cov4(const Eigen::Matrix4d& cov, long* clip_warnings) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(cov);
  Eigen::Vector4d ev = es.eigenvalues();
  for (int i = 0; i < 4; ++i) {
    if (ev(i) < 0.0) {
      if (ev(i) < -1e-12 * std::max(1.0, std::abs(ev(3))) && clip_warnings) ++(*clip_warnings);
      ev(i) = 0.0;
    }
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

}  // namespace

McEstimate mc_fourth_cumulant_from_block(Activation act, const Eigen::Matrix4d& L4, double sa2,
                                         long samples, uint64_t seed) {
  if (samples < 100000) throw Error("mc_fourth_cumulant: need at least 1e5 samples");
  Eigen::Matrix4d A = factor_cov4(L4, nullptr);
  const int n_blocks = 50;
  // per-block means of the seven raw moments: m4 and the six pair moments
  std::vector<std::array<double, 7>> block(n_blocks, {0, 0, 0, 0, 0, 0, 0});
  long per_block = samples / n_blocks;
  for (int b = 0; b < n_blocks; ++b) {
    Rng rng(seed, (uint64_t)b, 0x6d63u);
    std::array<double, 7> acc{};
    for (long s = 0; s < per_block; ++s) {
      Eigen::Vector4d z(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
      Eigen::Vector4d h = A * z;
      double f0 = act_of(act, h(0)), f1 = act_of(act, h(1));
      double f2 = act_of(act, h(2)), f3 = act_of(act, h(3));
      acc[0] += f0 * f1 * f2 * f3;
      acc[1] += f0 * f1;
      acc[2] += f2 * f3;
      acc[3] += f0 * f2;
      acc[4] += f1 * f3;
      acc[5] += f0 * f3;
      acc[6] += f1 * f2;
    }
    for (int t = 0; t < 7; ++t) block[b][t] = acc[t] / (double)per_block;
  }
  auto u_of = [sa2](const std::array<double, 7>& m) {
    return sa2 * sa2 * (3.0 * m[0] - m[1] * m[2] - m[3] * m[4] - m[5] * m[6]);
  };
  std::array<double, 7> total{};
  for (int b = 0; b < n_blocks; ++b)
    for (int t = 0; t < 7; ++t) total[t] += block[b][t];
  std::array<double, 7> mean{};
  for (int t = 0; t < 7; ++t) mean[t] = total[t] / n_blocks;
  double full = u_of(mean);
  // jackknife over blocks
  double jk_mean = 0.0;
  std::vector<double> jk(n_blocks);
  for (int b = 0; b < n_blocks; ++b) {
    std::array<double, 7> loo;
    for (int t = 0; t < 7; ++t) loo[t] = (total[t] - block[b][t]) / (n_blocks - 1);
    jk[b] = u_of(loo);
    jk_mean += jk[b];
  }
  jk_mean /= n_blocks;
  double var = 0.0;
  for (int b = 0; b < n_blocks; ++b) var += (jk[b] - jk_mean) * (jk[b] - jk_mean);
  var *= (double)(n_blocks - 1) / n_blocks;
  return {full, std::sqrt(var)};
}

McEstimate mc_fourth_cumulant(const NetworkSpec& spec, const InputSet& four_points, long samples,
                              uint64_t seed) {
  spec.validate();
  if (four_points.n() != 4) throw DimensionError("mc_fourth_cumulant: need exactly 4 points");
  std::vector<KernelMatrix> layers = deep_kernel_recursion(spec, four_points, 64);
  const Matrix& pre = layers[spec.depth - 1].values;  // last hidden pre-activation kernel
  Eigen::Matrix4d L4 = pre;
  return mc_fourth_cumulant_from_block(spec.activation, L4, spec.readout_var, samples, seed);
}

double quad_expectation4(Activation act, const Eigen::Matrix4d& cov, int quad_order,
                         long* clip_warnings) {
  if (quad_order < 8) throw Error("quad_expectation4: quad_order must be >= 8");
  Eigen::Matrix4d A = factor_cov4(cov, clip_warnings);
  GaussHermite gh(quad_order);
  double acc = 0.0;
  Eigen::Vector4d z;
  for (int i = 0; i < quad_order; ++i) {
    z(0) = gh.nodes[i];
    for (int j = 0; j < quad_order; ++j) {
      z(1) = gh.nodes[j];
      double wij = gh.weights[i] * gh.weights[j];
      for (int k = 0; k < quad_order; ++k) {
        z(2) = gh.nodes[k];
        double wijk = wij * gh.weights[k];
        for (int l = 0; l < quad_order; ++l) {
          z(3) = gh.nodes[l];
          Eigen::Vector4d h = A * z;
          acc += wijk * gh.weights[l] * act_of(act, h(0)) * act_of(act, h(1)) *
                 act_of(act, h(2)) * act_of(act, h(3));
        }
      }
    }
  }
  return acc;
}

double deep_U_entry(Activation act, const Eigen::Matrix4d& cov_below, double scale2, int quad_order,
                    long* clip_warnings) {
  double mu4 = quad_expectation4(act, cov_below, quad_order, clip_warnings);
  auto pair = [&](int a, int b) {
    return pair_expectation_quadrature(act, cov_below(a, a), cov_below(b, b), cov_below(a, b),
                                       quad_order);
  };
  double p = pair(0, 1) * pair(2, 3) + pair(0, 2) * pair(1, 3) + pair(0, 3) * pair(1, 2);
  return scale2 * scale2 * (3.0 * mu4 - p);
}

SymTensor4 deep_U_recursion(const NetworkSpec& spec, const InputSet& inputs, int quad_order) {
  spec.validate();
  std::vector<KernelMatrix> layers = deep_kernel_recursion(spec, inputs, std::max(quad_order, 8));
  const Matrix& pre = layers[spec.depth - 1].values;
  const int n = (int)inputs.n();
  SymTensor4 U(n);
  std::size_t r = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int k = j; k < n; ++k)
        for (int l = k; l < n; ++l) {
          Eigen::Matrix4d cov;
          const int idx[4] = {i, j, k, l};
          for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) cov(a, b) = pre(idx[a], idx[b]);
          U.at_sorted(r++) = deep_U_entry(spec.activation, cov, spec.readout_var, quad_order);
        }
  return U;
}

// ---------------------------------------------------------------------------

TwoLayerUProvider::TwoLayerUProvider(Matrix L_combined, Activation act, double sa2,
                                     SeriesTruncation trunc, RepeatedIndexPolicy policy,
                                     long mc_fallback_samples, uint64_t mc_seed)
    : L_(std::move(L_combined)),
      act_(act),
      sa2_(sa2),
      trunc_(trunc),
      policy_(policy),
      mc_samples_(mc_fallback_samples),
      mc_seed_(mc_seed) {
  if (L_.rows() != L_.cols()) throw DimensionError("TwoLayerUProvider: kernel must be square");
  trunc_.validate();
}

double TwoLayerUProvider::entry(int a, int b, int c, int d) const {
  Eigen::Matrix4d L4;
  const int idx[4] = {a, b, c, d};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) L4(i, j) = L_(idx[i], idx[j]);
  switch (act_) {
    case Activation::Quadratic:
      return assemble_U_quadratic(L4, sa2_);
    case Activation::Linear: {
      // Wick: mu4 = sum of the three pairings, so 3*mu4 - pairs = 2*pairs
      double p = L4(0, 1) * L4(2, 3) + L4(0, 2) * L4(1, 3) + L4(0, 3) * L4(1, 2);
      return 2.0 * sa2_ * sa2_ * p;
    }
    case Activation::Relu:
      try {
        return assemble_U_relu(L4, sa2_, trunc_);
      } catch (const NonConvergentError&) {
        if (policy_ == RepeatedIndexPolicy::Drop) return 0.0;
        ++mc_fallbacks_;
        int s[4] = {a, b, c, d};
        SymTensor4::sort4(s[0], s[1], s[2], s[3]);
        uint64_t key = mix_key(mix_key((uint64_t)s[0] << 32 | (uint64_t)s[1],
                                       (uint64_t)s[2] << 32 | (uint64_t)s[3]),
                               mc_seed_);
        return mc_fourth_cumulant_from_block(act_, L4, sa2_, mc_samples_, key).estimate;
      }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

CumulantSlices::CumulantSlices(std::shared_ptr<const UProvider> provider, int n_train, int n_test,
                               int materialize_cap)
    : provider_(std::move(provider)), n_train_(n_train), n_test_(n_test) {
  if (provider_->size() != n_train + n_test)
    throw DimensionError("CumulantSlices: provider size must be n_train + n_test");
  materialized_ = n_train <= materialize_cap;
  if (materialized_) {
    train_ = SymTensor4(n_train);
    std::size_t r = 0;
    for (int i = 0; i < n_train; ++i)
      for (int j = i; j < n_train; ++j)
        for (int k = j; k < n_train; ++k)
          for (int l = k; l < n_train; ++l) train_.at_sorted(r++) = provider_->entry(i, j, k, l);
  }
}

double CumulantSlices::u_train(int i, int j, int k, int l) const {
  if (materialized_) return train_(i, j, k, l);
  return provider_->entry(i, j, k, l);
}

double CumulantSlices::u_star(int t, int i, int j, int k) const {
  return provider_->entry(n_train_ + t, i, j, k);
}

double CumulantSlices::u_star_star(int t, int i, int j) const {
  int s = n_train_ + t;
  return provider_->entry(s, s, i, j);
}

const SymTensor4& CumulantSlices::train_tensor() const {
  if (!materialized_)
    throw Error("CumulantSlices: train tensor not materialized (cap exceeded; use streaming)");
  return train_;
}

}  // namespace nnsp

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

#include <complex>
#include <memory>

#include "core/kernels.hpp"
#include "core/sym_tensor.hpp"
#include "core/types.hpp"

namespace nnsp {

// Fourth cumulant of the network-output prior, stored in the O(1) scale
// convention: the 1/N factor is applied downstream when corrections are
// combined with the GP baseline.

struct SeriesTruncation {
  int t_max = 8;                    // max total order l+m+n+p+q+r
  double offdiag_threshold = 0.6;   // |L_ab| at or above this is flagged non-convergent

  void validate() const {
    if (t_max < 0) throw Error("SeriesTruncation: t_max must be >= 0");
    if (!(offdiag_threshold < 1.0)) throw Error("SeriesTruncation: threshold must be < 1");
  }
};

/// G_s for ReLU: G_0 = 1/sqrt(2 pi), G_1 = -i/2, zero for odd s >= 3,
/// G_{2k+2} = (-1)^k (2k)! / (sqrt(2 pi) 2^k k!).
std::complex<double> relu_G(int s);

/// Connected pair-moment V_{(1,2),(3,4)} for phi(z) = z^2 on a 4x4
/// pre-activation kernel block (the 2/4/8/16-weighted polynomial).
double quadratic_V(const Eigen::Matrix4d& L4);

/// V for an arbitrary pairing, by permuting the block so that the requested
/// pairing becomes ((1,2),(3,4)).  `p` lists the four indices in pairing
/// order, e.g. {0,2,1,3} for V_{(1,3),(2,4)}.
double quadratic_V_pairing(const Eigen::Matrix4d& L4, const std::array<int, 4>& p);

/// Fourth moment <phi_1 phi_2 phi_3 phi_4> for ReLU on a unit-diagonal 4x4
/// block, as the truncated six-index power series in the off-diagonals.
/// Throws NonConvergentError when any |off-diagonal| >= trunc threshold.
double relu_mu4_series(const Eigen::Matrix4d& L4, const SeriesTruncation& trunc);

/// O(1)-convention fourth cumulant entry for a 2-layer network given the
/// pre-activation kernel block: U = sa2^2 * (V_(12)(34) + V_(13)(24) + V_(14)(23)).
double assemble_U_quadratic(const Eigen::Matrix4d& L4, double sa2);
double assemble_U_relu(const Eigen::Matrix4d& L4, double sa2, const SeriesTruncation& trunc);

/// Monte Carlo oracle: samples the pre-activation Gaussian of the last
/// hidden layer and estimates the O(1) fourth cumulant of the output with a
/// jackknife standard error.  Exact for 2-layer networks (the first-layer
/// pre-activations are exactly Gaussian); leading order for deeper ones.
struct McEstimate {
  double estimate;
  double std_error;
};
McEstimate mc_fourth_cumulant(const NetworkSpec& spec, const InputSet& four_points, long samples,
                              uint64_t seed);

/// MC estimate from an explicit 4x4 pre-activation covariance (shared code
/// path; used directly by tests).
McEstimate mc_fourth_cumulant_from_block(Activation act, const Eigen::Matrix4d& L4, double sa2,
                                         long samples, uint64_t seed);

/// Gaussian 4-point expectation E[phi(h1)..phi(h4)] by tensorized
/// Gauss-Hermite quadrature after an eigenvalue-clipped factorization of the
/// 4x4 covariance.
double quad_expectation4(Activation act, const Eigen::Matrix4d& cov, int quad_order,
                         long* clip_warnings = nullptr);

/// Layer map for U: given the kernel of the layer below (with U below = 0),
/// returns the O(1) fourth cumulant of the next layer's output,
/// scale2 = variance of the outgoing weights (readout for the last layer).
double deep_U_entry(Activation act, const Eigen::Matrix4d& cov_below, double scale2, int quad_order,
                    long* clip_warnings = nullptr);

/// Full fourth-cumulant tensor over an input set by the quadrature layer
/// map.  Only practical for small n; larger sets should go through
/// CumulantSlices with the closed-form providers.
SymTensor4 deep_U_recursion(const NetworkSpec& spec, const InputSet& inputs, int quad_order);

// ---------------------------------------------------------------------------
// Entry providers over a combined train+test index set

enum class RepeatedIndexPolicy { McFallback, Drop };

/// Evaluates U entries for arbitrary indices into a combined point set.
class UProvider {
 public:
  virtual ~UProvider() = default;
  virtual double entry(int a, int b, int c, int d) const = 0;
  virtual int size() const = 0;
};

/// Closed-form/series provider for 2-layer networks, backed by the
/// pre-activation (linear) kernel over all points.
class TwoLayerUProvider : public UProvider {
 public:
  TwoLayerUProvider(Matrix L_combined, Activation act, double sa2, SeriesTruncation trunc = {},
                    RepeatedIndexPolicy policy = RepeatedIndexPolicy::McFallback,
                    long mc_fallback_samples = 200000, uint64_t mc_seed = 1234);

  double entry(int a, int b, int c, int d) const override;
  int size() const override { return (int)L_.rows(); }
  long mc_fallback_count() const { return mc_fallbacks_; }

 private:
  Matrix L_;
  Activation act_;
  double sa2_;
  SeriesTruncation trunc_;
  RepeatedIndexPolicy policy_;
  long mc_samples_;
  uint64_t mc_seed_;
  mutable long mc_fallbacks_ = 0;
};

/// Provider backed by a fully materialized tensor over the combined point
/// set (used with deep_U_recursion for deep nets on small point sets).
class MaterializedUProvider : public UProvider {
 public:
  explicit MaterializedUProvider(SymTensor4 tensor) : tensor_(std::move(tensor)) {}
  double entry(int a, int b, int c, int d) const override { return tensor_(a, b, c, d); }
  int size() const override { return tensor_.n(); }

 private:
  SymTensor4 tensor_;
};

/// Provider that scales another provider's entries (U is homogeneous of
/// degree 2 in sa2; this is mostly for linearity tests).
class ScaledUProvider : public UProvider {
 public:
  ScaledUProvider(std::shared_ptr<const UProvider> base, double factor)
      : base_(std::move(base)), factor_(factor) {}
  double entry(int a, int b, int c, int d) const override {
    return factor_ * base_->entry(a, b, c, d);
  }
  int size() const override { return base_->size(); }

 private:
  std::shared_ptr<const UProvider> base_;
  double factor_;
};

inline constexpr int kDefaultMaterializeCap = 150;

/// The three tensor slices needed by the finite-width correction formulas:
/// U over train quadruples, U* = U(test, train^3), U** = U(test, test, train^2).
/// Below the materialization cap the train block is stored; above it every
/// contraction streams through the provider.
class CumulantSlices {
 public:
  CumulantSlices(std::shared_ptr<const UProvider> provider, int n_train, int n_test,
                 int materialize_cap = kDefaultMaterializeCap);

  int n_train() const { return n_train_; }
  int n_test() const { return n_test_; }
  bool materialized() const { return materialized_; }
  const UProvider& provider() const { return *provider_; }

  // indices: train in [0, n_train), test slot t in [0, n_test)
  double u_train(int i, int j, int k, int l) const;
  double u_star(int t, int i, int j, int k) const;        // U(x_t*, x_i, x_j, x_k)
  double u_star_star(int t, int i, int j) const;          // U(x_t*, x_t*, x_i, x_j)

  const SymTensor4& train_tensor() const;

 private:
  std::shared_ptr<const UProvider> provider_;
  int n_train_, n_test_;
  bool materialized_;
  SymTensor4 train_;
};

}  // namespace nnsp

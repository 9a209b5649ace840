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

#include <functional>

#include "core/rng.hpp"
#include "core/types.hpp"

namespace nnsp {

using KernelFn = std::function<double(const Eigen::Ref<const Vector>&,
                                      const Eigen::Ref<const Vector>&)>;
using ScalarFn = std::function<double(const Eigen::Ref<const Vector>&)>;
using SamplerFn = std::function<Vector(Rng&)>;
using QuadPointFn = std::function<double(const Eigen::Ref<const Vector>&,
                                         const Eigen::Ref<const Vector>&,
                                         const Eigen::Ref<const Vector>&,
                                         const Eigen::Ref<const Vector>&)>;

/// Uniform measure on the sphere of the given radius (Gaussian draw,
/// normalize, scale).
SamplerFn sphere_sampler(long d, double radius);

/// Sample-based spectral decomposition of a kernel under a measure:
/// eigendecomposition of (1/M) K_MM, with out-of-sample extension
///   psi_i(x) = sum_s ext_coeff(s, i) K(x, x_s).
/// Retained eigenfunctions are orthonormal under the empirical measure.
struct SpectralModel {
  Matrix sample_points;  // M x d
  KernelFn kernel;
  SamplerFn sampler;     // the measure; kept for fresh MC nodes downstream
  uint64_t seed = 0;
  Vector eigenvalues;    // retained, descending
  Matrix psi_samples;    // M x r
  Matrix ext_coeff;      // M x r

  long sample_count() const { return sample_points.rows(); }
  int rank() const { return (int)eigenvalues.size(); }

  Vector eval_psi(const Eigen::Ref<const Vector>& x) const;
};

inline constexpr int kDefaultSpectrumSamples = 2048;
inline constexpr double kDefaultRankCut = 1e-6;
inline constexpr int kDefaultMcNodes = 4096;

SpectralModel build_spectrum(KernelFn kernel, SamplerFn sampler, long d, int M, uint64_t seed,
                             double rank_cut = kDefaultRankCut);

/// lambda_i / (lambda_i + sigma2 / n), one per retained mode.
Vector filter_factors(const SpectralModel& model, double n, double sigma2);

/// Cached EK predictor for one target at one (n, sigma2): the projection of
/// the target onto the retained modes, filtered.
struct EkPredictor {
  const SpectralModel* model;
  Vector filter;
  Vector coeff;  // filter .* <psi_i, g>_mu

  double mean(const Eigen::Ref<const Vector>& x) const;
};

EkPredictor make_ek_predictor(const SpectralModel& model, const ScalarFn& g, double n,
                              double sigma2);

double ek_mean(const SpectralModel& model, const ScalarFn& g, double n, double sigma2,
               const Eigen::Ref<const Vector>& x_star);

/// g(x) - EK prediction of g at x.
double discrepancy(const SpectralModel& model, const ScalarFn& g, double n, double sigma2,
                   const Eigen::Ref<const Vector>& x);

/// O(1)-scale EK finite-width correction to the mean.  The two bracketed
/// terms are evaluated by MC over fresh measure samples grouped into
/// triples; mc_nodes counts the samples drawn.
double ek_fwc_mean(const SpectralModel& model, const QuadPointFn& U, const ScalarFn& g, double n,
                   double sigma2, const Eigen::Ref<const Vector>& x_star,
                   int mc_nodes = kDefaultMcNodes, uint64_t node_seed = 777);

/// Same quantity, evaluated without Monte Carlo noise.  Valid when every
/// slot section of U lies in the span of the kernel sections (finite-rank
/// kernels with polynomial features, e.g. the quadratic activation): U is
/// interpolated from its values on an anchor grid and all integrals reduce
/// to exact sums over the model's sample measure.  The MC estimator above
/// cannot resolve the large-n decay of this quantity: the n^2 / sigma^4
/// bracket amplifies its per-triple noise into an n-independent floor.
double ek_fwc_mean_span(const SpectralModel& model, const QuadPointFn& U, const ScalarFn& g,
                        double n, double sigma2, const Eigen::Ref<const Vector>& x_star,
                        int anchors = 24, uint64_t anchor_seed = 31);

}  // namespace nnsp

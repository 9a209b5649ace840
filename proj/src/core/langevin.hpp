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

#include <string>
#include <vector>

#include "core/slope_fit.hpp"
#include "core/types.hpp"

namespace nnsp {

/// Fully connected net with a scalar linear readout and no biases.
/// widths = [d, N_1, ..., N_depth]; W[l] maps layer l to layer l+1, the last
/// entry is the 1 x N_depth readout.
struct MLP {
  std::vector<long> widths;
  Activation act = Activation::Quadratic;
  std::vector<Matrix> W;

  int depth() const { return (int)widths.size() - 1; }
  long n_params() const;
  void validate() const;

  double forward(const Eigen::Ref<const Vector>& x) const;
  Vector forward_batch(const Matrix& X) const;  // one input per row
};

/// Weights drawn from the prior: W_l entries ~ N(0, weight_var[l] / fan_in),
/// readout ~ N(0, readout_var / N_depth).
MLP mlp_from_prior(const NetworkSpec& spec, long d, long width, uint64_t master_seed,
                   uint64_t chain_seed);

struct TrainProtocol {
  double dt = 1e-3;
  double temperature = 0.4;
  std::vector<double> gamma;  // per layer including readout (depth + 1 entries)
  long n_epochs = 0;
  long burn_in = 0;
  long thinning = 100;
  std::vector<uint64_t> seeds = {0};

  void validate() const;
  double sigma2() const { return temperature / 2.0; }
};

/// Hyperparameter map: T = 2 sigma2, gamma_l = T * fan_in / varsigma2_l, so
/// that the stationary prior matches the NetworkSpec variances.
TrainProtocol protocol_for_posterior(const NetworkSpec& spec, long d, long width, double sigma2,
                                     double dt, long n_epochs, long burn_in,
                                     std::vector<uint64_t> seeds);

/// Per-weight prior variances implied by a protocol (round-trip of the map).
std::vector<double> implied_weight_vars(const TrainProtocol& protocol);

/// Total squared error sum_a (y_a - f(x_a))^2 and its gradient by
/// reverse-mode accumulation; returns the loss.
double loss_and_grad(const MLP& mlp, const Matrix& X, const Vector& y, std::vector<Matrix>& grad);

/// One full-batch update: dW = -(gamma W + grad) dt + sqrt(2 T dt) xi.
/// Noise streams are keyed by (master, chain, epoch, layer), so the update
/// is a pure function of those counters.
void langevin_step(MLP& mlp, const TrainProtocol& protocol, const std::vector<Matrix>& grad,
                   uint64_t master_seed, uint64_t chain_seed, long epoch);

/// Everything a chain needs to resume bit-exactly (the RNG is counter-based,
/// so weights + epoch + accumulators suffice).
struct ChainState {
  MLP mlp;
  uint64_t chain_seed = 0;
  long epoch = 0;
  Vector probe_sum;                  // running sums past burn-in
  long probe_count = 0;
  std::vector<std::vector<double>> series;  // thinned outputs, one vector per probe
  std::vector<double> loss_series;   // thinned train loss

  void save(const std::string& path) const;
  static ChainState load(const std::string& path);
};

/// Advisory stability number: dt * (max gamma + crude curvature estimate);
/// values above 0.1 tend to diverge.
double stability_indicator(const MLP& mlp, const TrainProtocol& protocol, const Matrix& X);

/// Advances one chain to `until_epoch` (exclusive), accumulating probe
/// outputs past burn_in and thinned series.  Throws DivergenceError on
/// non-finite weights.
void advance_chain(ChainState& state, const TrainProtocol& protocol, const Matrix& X,
                   const Vector& y, const Matrix& probes, uint64_t master_seed, long until_epoch);

struct ChainResult {
  Vector probe_means;                    // pooled over seeds
  std::vector<Vector> per_seed_means;
  std::vector<Matrix> per_seed_series;   // kept x probes per seed
  std::vector<double> final_loss;
  double stability = 0.0;                // indicator at init
  bool stability_warning = false;
  bool burn_in_ok = true;                // advisory 5% check on the loss tail
};

ChainResult run_chain(const NetworkSpec& spec, long width, const TrainProtocol& protocol,
                      const Matrix& X, const Vector& y, const Matrix& probes,
                      uint64_t master_seed);

// ---------------------------------------------------------------------------
// Chain diagnostics

struct AcfResult {
  std::vector<double> acf;  // rho_0 .. rho_max_lag
  double tau = 1.0;         // integrated autocorrelation time
  int window = 0;           // self-consistent cutoff (5 tau)
};

/// Biased ACF estimator with self-consistent windowing.  Requires
/// series length >= 10 * max_lag; throws on zero variance.
AcfResult autocorrelation(const std::vector<double>& series, int max_lag);

struct ErgodicityResult {
  std::vector<double> block_sizes;
  std::vector<double> variances;  // empirical variance of the mean at that run length
  SlopeFit fit;                   // log-log slope; -1 under ergodicity
};

/// Block-variance ergodicity diagnostic on F (seeds x epochs): variance of
/// single-seed block means of length l, divided by n_seeds, against l.
ErgodicityResult ergodicity_check(const Matrix& F, int min_blocks = 8);

}  // namespace nnsp

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

#include "core/cumulants.hpp"
#include "core/kernels.hpp"
#include "core/types.hpp"

namespace nnsp {

/// Factorization of the regularized train kernel Kt = K + (sigma2 + jitter) I.
/// The explicit inverse is kept because the finite-width contractions need
/// individual entries of it, not just solves.
struct TrainSolve {
  Matrix kt_inv;        // (K + sigma2 I)^-1, jitter included
  Vector y_tilde;       // kt_inv * y
  Vector y;
  double sigma2 = 0.0;
  double jitter_used = 0.0;

  long m() const { return kt_inv.rows(); }
};

/// Cholesky with jitter escalation: starts at kDefaultJitterScale times the
/// max diagonal and multiplies by 10 until the factorization succeeds, up to
/// 1e-6 * mean diagonal.  Throws FactorizationError past the cap.
TrainSolve solve_train(const KernelMatrix& K, const Vector& y, double sigma2);

struct Posterior {
  Vector mean;
  Vector variance;
};

/// GP posterior over test points.  `k_cross` is m x t (train rows, test
/// columns), `k_star_diag` holds K(x*, x*) per test point.
Posterior gp_posterior(const TrainSolve& ts, const Matrix& k_cross, const Vector& k_star_diag);

/// O(1)-scale finite-width corrections; divide by the width when combining.
/// `variance` is only filled when requested (the quartic contraction it
/// needs is the expensive part in streaming mode).
struct FwcCorrection {
  Vector mean;
  Vector variance;
  bool has_variance = false;
};

FwcCorrection fwc_correct(const TrainSolve& ts, const CumulantSlices& slices,
                          const Matrix& k_cross, const Vector& gp_mean, bool want_variance);

/// gp + fwc / width.  The O(1/N) truncation does not guarantee positive
/// combined variances; negatives are reported unmodified and counted in
/// `negative_count` when given.
Posterior combine_posterior(const Posterior& gp, const FwcCorrection& fwc, double width,
                            long* negative_count = nullptr);

/// Bayes test loss: mean over test points of (mean - y)^2 + variance.
double expected_test_loss(const Posterior& post, const Vector& y_test);

}  // namespace nnsp

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

#include "core/gp_inference.hpp"

#include <cmath>

namespace nnsp {

TrainSolve solve_train(const KernelMatrix& K, const Vector& y, double sigma2) {
  if (K.values.rows() != K.values.cols()) throw DimensionError("solve_train: kernel not square");
  if (K.values.rows() != y.size()) throw DimensionError("solve_train: y size mismatch");
  if (sigma2 < 0.0) throw Error("solve_train: sigma2 must be non-negative");
  const long m = K.values.rows();
  double max_diag = K.values.diagonal().maxCoeff();
  double jitter = kDefaultJitterScale * std::max(max_diag, 1.0);
  double cap = 1e-6 * K.values.trace() / (double)m;
  Eigen::LLT<Matrix> llt;
  for (;;) {
    Matrix kt = K.values;
    kt.diagonal().array() += sigma2 + jitter;
    llt.compute(kt);
    if (llt.info() == Eigen::Success) break;
    jitter *= 10.0;
    if (jitter > cap)
      throw FactorizationError("solve_train: Cholesky failed at jitter cap " +
                               std::to_string(cap));
  }
  TrainSolve ts;
  ts.kt_inv = llt.solve(Matrix::Identity(m, m));
  ts.y_tilde = ts.kt_inv * y;
  ts.y = y;
  ts.sigma2 = sigma2;
  ts.jitter_used = jitter;
  return ts;
}

Posterior gp_posterior(const TrainSolve& ts, const Matrix& k_cross, const Vector& k_star_diag) {
  if (k_cross.rows() != ts.m()) throw DimensionError("gp_posterior: k_cross rows != n_train");
  if (k_cross.cols() != k_star_diag.size())
    throw DimensionError("gp_posterior: k_cross cols != n_test");
  Posterior p;
  p.mean = k_cross.transpose() * ts.y_tilde;
  Matrix bc = ts.kt_inv * k_cross;
  p.variance = k_star_diag - (k_cross.array() * bc.array()).colwise().sum().matrix().transpose();
  return p;
}

namespace {

inline int mult3(int i, int j, int k) {
  if (i == j && j == k) return 1;
  if (i == j || j == k || i == k) return 3;
  return 6;
}

}  // namespace

FwcCorrection fwc_correct(const TrainSolve& ts, const CumulantSlices& slices,
                          const Matrix& k_cross, const Vector& gp_mean, bool want_variance) {
  const int n = (int)ts.m();
  const int t_count = (int)k_cross.cols();
  if (slices.n_train() != n) throw DimensionError("fwc_correct: slice/train size mismatch");
  if (slices.n_test() != t_count) throw DimensionError("fwc_correct: slice/test count mismatch");
  if (gp_mean.size() != t_count) throw DimensionError("fwc_correct: gp_mean size mismatch");

  const Matrix& B = ts.kt_inv;
  const Vector& yt = ts.y_tilde;
  auto W = [&](int i, int j, int k) {
    return yt(i) * yt(j) * yt(k) - (B(i, j) * yt(k) + B(i, k) * yt(j) + B(j, k) * yt(i));
  };
  auto M = [&](int i, int j) { return yt(i) * yt(j) - B(i, j); };

  // c_t = Kt^-1 k*_t, one column per test point
  Matrix C = B * k_cross;

  // Test-independent pass over the train tensor:
  //   b[beta] = sum_{123} U_{1 2 3 beta} W_{123}   (all four slots summed freely)
  // Done once per posterior; makes the per-test mean contraction cubic.
  Vector b = Vector::Zero(n);
  auto quad_pass = [&](int i, int j, int k, int l, double u) {
    // leave-one-out over the distinct values of the sorted quadruple
    int q[4] = {i, j, k, l};
    for (int s = 0; s < 4; ++s) {
      if (s > 0 && q[s] == q[s - 1]) continue;
      int r[3];
      for (int t = 0, w = 0; t < 4; ++t)
        if (t != s) r[w++] = q[t];
      b(q[s]) += u * mult3(r[0], r[1], r[2]) * W(r[0], r[1], r[2]);
    }
  };
  if (slices.materialized()) {
    slices.train_tensor().for_each(quad_pass);
  } else {
    const UProvider& up = slices.provider();
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        for (int k = j; k < n; ++k)
          for (int l = k; l < n; ++l) quad_pass(i, j, k, l, up.entry(i, j, k, l));
  }

  FwcCorrection out;
  out.mean.resize(t_count);
  if (want_variance) {
    out.variance.resize(t_count);
    out.has_variance = true;
  }

  for (int t = 0; t < t_count; ++t) {
    Vector c = C.col(t);

    double s1 = 0.0;  // sum_{123} U*_{t,123} W_{123}
    double t2 = 0.0;  // sum_{b12} U*_{t,b12} c_b M_{12}
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        for (int k = j; k < n; ++k) {
          double us = slices.u_star(t, i, j, k);
          if (us == 0.0) continue;
          int m3 = mult3(i, j, k);
          s1 += us * m3 * W(i, j, k);
          if (want_variance)
            t2 += us * m3 * (c(i) * M(j, k) + c(j) * M(i, k) + c(k) * M(i, j)) / 3.0;
        }
    out.mean(t) = (s1 - b.dot(c)) / 6.0;

    if (!want_variance) continue;

    double t1 = 0.0;  // sum_{12} U**_{t,12} M_{12}
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double uss = slices.u_star_star(t, i, j);
        t1 += uss * (i == j ? 1.0 : 2.0) * M(i, j);
      }

    // t3 = sum_{ab12} U_{ab12} c_a c_b M_{12}; contract against the
    // symmetrized weight so the sorted-quad storage can be walked once.
    double t3 = 0.0;
    auto t3_pass = [&](int i, int j, int k, int l, double u) {
      if (u == 0.0) return;
      double sw = c(i) * c(j) * M(k, l) + c(i) * c(k) * M(j, l) + c(i) * c(l) * M(j, k) +
                  c(j) * c(k) * M(i, l) + c(j) * c(l) * M(i, k) + c(k) * c(l) * M(i, j);
      t3 += u * quad_multiplicity(i, j, k, l) * sw / 6.0;
    };
    if (slices.materialized()) {
      slices.train_tensor().for_each(t3_pass);
    } else {
      const UProvider& up = slices.provider();
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
          for (int k = j; k < n; ++k)
            for (int l = k; l < n; ++l) t3_pass(i, j, k, l, up.entry(i, j, k, l));
    }

    double second_moment = 0.5 * (t1 - 2.0 * t2 + t3);
    out.variance(t) = second_moment - 2.0 * gp_mean(t) * out.mean(t);
  }
  return out;
}

Posterior combine_posterior(const Posterior& gp, const FwcCorrection& fwc, double width,
                            long* negative_count) {
  if (!(width > 0.0)) throw Error("combine_posterior: width must be positive");
  Posterior p;
  p.mean = gp.mean + fwc.mean / width;
  if (fwc.has_variance) {
    p.variance = gp.variance + fwc.variance / width;
    // The 1/N truncation does not guarantee positivity; negatives are
    // reported as-is and only counted.
    if (negative_count) {
      for (long t = 0; t < p.variance.size(); ++t)
        if (p.variance(t) < 0.0) ++(*negative_count);
    }
  } else {
    p.variance = gp.variance;
  }
  return p;
}

double expected_test_loss(const Posterior& post, const Vector& y_test) {
  if (post.mean.size() != y_test.size())
    throw DimensionError("expected_test_loss: size mismatch");
  double acc = 0.0;
  for (long t = 0; t < y_test.size(); ++t) {
    double d = post.mean(t) - y_test(t);
    acc += d * d + post.variance(t);
  }
  return acc / (double)y_test.size();
}

}  // namespace nnsp

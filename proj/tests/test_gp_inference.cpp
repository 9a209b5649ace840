#include <cmath>
#include <memory>

#include "core/cumulants.hpp"
#include "core/gp_inference.hpp"
#include "core/kernels.hpp"
#include "core/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace nnsp;

namespace {

struct System {
  Matrix points;        // (n + t) x d, train rows first
  KernelMatrix K;       // train block of the output kernel
  Matrix k_cross;       // n x t
  Vector k_star_diag;   // t
  Vector y;
  std::shared_ptr<TwoLayerUProvider> provider;
  TrainSolve ts;
  Posterior gp;
};

System make_system(int n, int t, int d, Activation act, double sigma2, uint64_t seed) {
  Rng rng(seed);
  System s;
  s.points = Matrix(n + t, d);
  for (int i = 0; i < n + t; ++i)
    for (int j = 0; j < d; ++j) s.points(i, j) = rng.gaussian();
  InputSet all;
  all.points = s.points;
  double sw2 = 1.0, sa2 = 0.8;
  KernelMatrix L = linear_kernel(all, sw2);
  NetworkSpec spec;
  spec.depth = 1;
  spec.activation = act;
  spec.weight_var = {sw2};
  spec.readout_var = sa2;
  KernelMatrix Kall = nngp_kernel(spec, all);
  s.K.values = Kall.values.topLeftCorner(n, n);
  s.k_cross = Kall.values.topRightCorner(n, t);
  s.k_star_diag = Kall.values.diagonal().tail(t);
  s.y = Vector(n);
  for (int i = 0; i < n; ++i) s.y(i) = rng.gaussian();
  s.provider = std::make_shared<TwoLayerUProvider>(L.values, act, sa2);
  s.ts = solve_train(s.K, s.y, sigma2);
  s.gp = gp_posterior(s.ts, s.k_cross, s.k_star_diag);
  return s;
}

}  // namespace

TEST_CASE("solve_train produces a genuine inverse and y_tilde") {
  System s = make_system(8, 1, 4, Activation::Quadratic, 0.05, 3);
  Matrix kt = s.K.values;
  kt.diagonal().array() += s.ts.sigma2 + s.ts.jitter_used;
  CHECK((s.ts.kt_inv * kt - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((s.ts.y_tilde - s.ts.kt_inv * s.y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gp_posterior matches an independent dense solve") {
  System s = make_system(12, 4, 5, Activation::Relu, 0.02, 4);
  Posterior ref = oracle::reference_gp(s.K.values, s.y, 0.02, s.ts.jitter_used, s.k_cross,
                                       s.k_star_diag);
  CHECK((s.gp.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s.gp.variance - ref.variance).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("jitter escalates on a rank-deficient kernel at zero noise") {
  Rng rng(5);
  InputSet set;
  set.points = Matrix(6, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) set.points(i, j) = rng.gaussian();
  set.points.row(5) = set.points.row(4);  // exact duplicate
  KernelMatrix K = linear_kernel(set, 1.0);
  Vector y = Vector::Ones(6);
  TrainSolve ts = solve_train(K, y, 0.0);
  CHECK(ts.jitter_used > 0.0);
  CHECK(ts.y_tilde.allFinite());
}

TEST_CASE("factorization failure surfaces as an error") {
  KernelMatrix K;
  K.values = -Matrix::Identity(4, 4);
  Vector y = Vector::Ones(4);
  CHECK_THROWS_AS(solve_train(K, y, 0.0), FactorizationError);
}

TEST_CASE("fwc mean and variance match the naive nested-loop oracle") {
  for (auto [act, n, seed] : {std::tuple{Activation::Quadratic, 3, 6u},
                              std::tuple{Activation::Quadratic, 5, 7u},
                              std::tuple{Activation::Linear, 6, 8u}}) {
    System s = make_system(n, 2, 3, act, 0.1, seed);
    CumulantSlices slices(s.provider, n, 2);
    FwcCorrection fwc = fwc_correct(s.ts, slices, s.k_cross, s.gp.mean, true);
    oracle::NaiveFwc ref = oracle::naive_fwc(s.ts, *s.provider, 2, s.k_cross, s.gp.mean);
    CAPTURE((int)act);
    CAPTURE(n);
    double scale = ref.mean.cwiseAbs().maxCoeff() + 1.0;
    CHECK((fwc.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-10 * scale);
    double vscale = ref.variance.cwiseAbs().maxCoeff() + 1.0;
    REQUIRE(fwc.has_variance);
    CHECK((fwc.variance - ref.variance).cwiseAbs().maxCoeff() < 1e-10 * vscale);
  }
}

TEST_CASE("fwc vanishes when U or y vanish") {
  System s = make_system(5, 2, 3, Activation::Quadratic, 0.1, 9);

  auto zero = std::make_shared<ScaledUProvider>(s.provider, 0.0);
  CumulantSlices zslices(zero, 5, 2);
  FwcCorrection fz = fwc_correct(s.ts, zslices, s.k_cross, s.gp.mean, true);
  CHECK(fz.mean.cwiseAbs().maxCoeff() == 0.0);

  TrainSolve ts0 = solve_train(s.K, Vector::Zero(5), 0.1);
  Posterior gp0 = gp_posterior(ts0, s.k_cross, s.k_star_diag);
  CumulantSlices slices(s.provider, 5, 2);
  FwcCorrection fy = fwc_correct(ts0, slices, s.k_cross, gp0.mean, false);
  CHECK(fy.mean.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("fwc mean is exactly linear in U") {
  System s = make_system(6, 3, 4, Activation::Quadratic, 0.05, 10);
  CumulantSlices slices(s.provider, 6, 3);
  FwcCorrection base = fwc_correct(s.ts, slices, s.k_cross, s.gp.mean, true);
  auto scaled = std::make_shared<ScaledUProvider>(s.provider, 2.5);
  CumulantSlices sslices(scaled, 6, 3);
  FwcCorrection big = fwc_correct(s.ts, sslices, s.k_cross, s.gp.mean, true);
  CHECK((big.mean - 2.5 * base.mean).cwiseAbs().maxCoeff() <
        1e-12 * (base.mean.cwiseAbs().maxCoeff() + 1.0));
  CHECK((big.variance - 2.5 * base.variance).cwiseAbs().maxCoeff() <
        1e-11 * (base.variance.cwiseAbs().maxCoeff() + 1.0));
}

TEST_CASE("fwc mean splits into cubic and linear parts in y") {
  System s = make_system(6, 2, 4, Activation::Quadratic, 0.05, 11);
  CumulantSlices slices(s.provider, 6, 2);
  auto fwc_mean_at = [&](double c) {
    TrainSolve ts = solve_train(s.K, Vector(c * s.y), 0.05);
    Posterior gp = gp_posterior(ts, s.k_cross, s.k_star_diag);
    return fwc_correct(ts, slices, s.k_cross, gp.mean, false).mean;
  };
  Vector f1 = fwc_mean_at(1.0), f2 = fwc_mean_at(2.0), f3 = fwc_mean_at(3.0);
  Vector A = (f2 - 2.0 * f1) / 6.0;
  Vector B = f1 - A;
  Vector predict3 = 27.0 * A + 3.0 * B;
  CHECK((f3 - predict3).cwiseAbs().maxCoeff() < 1e-8 * (f3.cwiseAbs().maxCoeff() + 1e-12));
}

TEST_CASE("predictions are invariant under permuting the train set") {
  int n = 6, t = 2, d = 3;
  System s = make_system(n, t, d, Activation::Quadratic, 0.07, 12);
  std::vector<int> perm = {4, 2, 0, 5, 1, 3};

  Matrix pp(n + t, d);
  Vector py(n);
  for (int i = 0; i < n; ++i) {
    pp.row(i) = s.points.row(perm[i]);
    py(i) = s.y(perm[i]);
  }
  pp.bottomRows(t) = s.points.bottomRows(t);

  InputSet all;
  all.points = pp;
  KernelMatrix L = linear_kernel(all, 1.0);
  NetworkSpec spec;
  spec.depth = 1;
  spec.activation = Activation::Quadratic;
  spec.weight_var = {1.0};
  spec.readout_var = 0.8;
  KernelMatrix Kall = nngp_kernel(spec, all);
  KernelMatrix K;
  K.values = Kall.values.topLeftCorner(n, n);
  Matrix k_cross = Kall.values.topRightCorner(n, t);
  Vector k_star_diag = Kall.values.diagonal().tail(t);

  TrainSolve ts = solve_train(K, py, 0.07);
  Posterior gp = gp_posterior(ts, k_cross, k_star_diag);
  auto provider = std::make_shared<TwoLayerUProvider>(L.values, Activation::Quadratic, 0.8);
  CumulantSlices slices(provider, n, t);
  FwcCorrection fwc = fwc_correct(ts, slices, k_cross, gp.mean, true);

  CumulantSlices oslices(s.provider, n, t);
  FwcCorrection ofwc = fwc_correct(s.ts, oslices, s.k_cross, s.gp.mean, true);
  CHECK((gp.mean - s.gp.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((gp.variance - s.gp.variance).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((fwc.mean - ofwc.mean).cwiseAbs().maxCoeff() <
        1e-9 * (ofwc.mean.cwiseAbs().maxCoeff() + 1.0));
  CHECK((fwc.variance - ofwc.variance).cwiseAbs().maxCoeff() <
        1e-9 * (ofwc.variance.cwiseAbs().maxCoeff() + 1.0));
}

TEST_CASE("streaming and materialized contractions agree") {
  System s = make_system(10, 3, 4, Activation::Quadratic, 0.05, 13);
  CumulantSlices mat(s.provider, 10, 3, /*materialize_cap=*/64);
  CumulantSlices stream(s.provider, 10, 3, /*materialize_cap=*/0);
  REQUIRE(mat.materialized());
  REQUIRE(!stream.materialized());
  FwcCorrection a = fwc_correct(s.ts, mat, s.k_cross, s.gp.mean, true);
  FwcCorrection b = fwc_correct(s.ts, stream, s.k_cross, s.gp.mean, true);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-12 * (a.mean.cwiseAbs().maxCoeff() + 1.0));
  CHECK((a.variance - b.variance).cwiseAbs().maxCoeff() <
        1e-12 * (a.variance.cwiseAbs().maxCoeff() + 1.0));
}

TEST_CASE("combined posterior limits and negative-variance accounting") {
  System s = make_system(5, 2, 3, Activation::Quadratic, 0.1, 14);
  CumulantSlices slices(s.provider, 5, 2);
  FwcCorrection fwc = fwc_correct(s.ts, slices, s.k_cross, s.gp.mean, true);

  Posterior huge = combine_posterior(s.gp, fwc, 1e9);
  for (int t = 0; t < 2; ++t)
    CHECK(std::abs(huge.mean(t) - s.gp.mean(t)) < 1e-6 * std::abs(fwc.mean(t)) + 1e-15);

  Posterior unit = combine_posterior(s.gp, fwc, 1.0);
  CHECK(unit.mean(0) == doctest::Approx(s.gp.mean(0) + fwc.mean(0)).epsilon(1e-14));

  FwcCorrection bad = fwc;
  bad.variance.setConstant(-10.0 * (s.gp.variance.maxCoeff() + 1.0));
  long negatives = 0;
  Posterior combined = combine_posterior(s.gp, bad, 1.0, &negatives);
  CHECK(negatives == 2);
  CHECK(combined.variance(0) == doctest::Approx(s.gp.variance(0) + bad.variance(0)));
}

TEST_CASE("expected test loss decomposes into bias and variance") {
  Posterior post;
  post.mean = Vector::Constant(3, 2.0);
  post.variance = Vector::Constant(3, 0.5);
  Vector y = Vector::Constant(3, 1.0);
  CHECK(expected_test_loss(post, y) == doctest::Approx(1.0 + 0.5));
}

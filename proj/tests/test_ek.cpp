#include <cmath>

#include "core/cumulants.hpp"
#include "core/equivalent_kernel.hpp"
#include "core/kernels.hpp"
#include "core/rng.hpp"
#include "core/slope_fit.hpp"
#include "doctest.h"

using namespace nnsp;

namespace {

// linear kernel on the sphere of radius sqrt(d): Mercer modes are the
// coordinates x_i, all with eigenvalue sw2 / d
SpectralModel linear_model(long d, double sw2, int M, uint64_t seed) {
  KernelFn kernel = [sw2, d](const Eigen::Ref<const Vector>& a,
                             const Eigen::Ref<const Vector>& b) {
    return sw2 / (double)d * a.dot(b);
  };
  return build_spectrum(kernel, sphere_sampler(d, std::sqrt((double)d)), d, M, seed);
}

}  // namespace

TEST_CASE("sphere sampler hits the sphere") {
  Rng rng(1);
  SamplerFn sampler = sphere_sampler(5, std::sqrt(5.0));
  for (int i = 0; i < 20; ++i) {
    Vector x = sampler(rng);
    REQUIRE(x.size() == 5);
    CHECK(x.norm() == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
  }
}

TEST_CASE("spectrum of the linear kernel: rank, eigenvalues, orthonormality") {
  long d = 4;
  double sw2 = 1.2;
  SpectralModel model = linear_model(d, sw2, 2048, 17);
  REQUIRE(model.rank() == d);
  for (int i = 0; i < model.rank(); ++i)
    CHECK(model.eigenvalues(i) == doctest::Approx(sw2 / (double)d).epsilon(0.15));
  Matrix gram = model.psi_samples.transpose() * model.psi_samples / (double)model.sample_count();
  CHECK((gram - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("Nystrom extension reproduces the sample eigenfunctions") {
  SpectralModel model = linear_model(3, 1.0, 512, 18);
  for (int s : {0, 17, 333, 511}) {
    Vector psi = model.eval_psi(model.sample_points.row(s));
    CHECK((psi.transpose() - model.psi_samples.row(s)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("Mercer reconstruction is exact for a finite-rank kernel") {
  long d = 3;
  double sw2 = 0.9;
  SpectralModel model = linear_model(d, sw2, 1024, 19);
  Rng rng(20);
  SamplerFn sampler = sphere_sampler(d, std::sqrt((double)d));
  for (int trial = 0; trial < 10; ++trial) {
    Vector x = sampler(rng), y = sampler(rng);
    Vector px = model.eval_psi(x), py = model.eval_psi(y);
    double recon = (px.array() * py.array() * model.eigenvalues.array()).sum();
    double exact = sw2 / (double)d * x.dot(y);
    CHECK(recon == doctest::Approx(exact).epsilon(1e-6));
  }
}

TEST_CASE("filter factors grow monotonically with n and saturate at 1") {
  SpectralModel model = linear_model(4, 1.0, 512, 21);
  double sigma2 = 0.3;
  Vector prev = filter_factors(model, 8.0, sigma2);
  for (double n : {32.0, 128.0, 1024.0}) {
    Vector f = filter_factors(model, n, sigma2);
    for (int i = 0; i < f.size(); ++i) {
      CHECK(f(i) > prev(i));
      CHECK(f(i) < 1.0);
      CHECK(f(i) == doctest::Approx(model.eigenvalues(i) /
                                    (model.eigenvalues(i) + sigma2 / n)).epsilon(1e-12));
    }
    prev = f;
  }
}

TEST_CASE("EK mean of a single-mode target is the filtered mode") {
  long d = 4;
  SpectralModel model = linear_model(d, 1.0, 4096, 22);
  ScalarFn g = [](const Eigen::Ref<const Vector>& x) { return x(0); };
  double n = 64.0, sigma2 = 0.2;
  double lambda = 1.0 / (double)d;
  double filter = lambda / (lambda + sigma2 / n);
  Vector x_star = Vector::Zero(d);
  x_star(0) = 2.0;
  CHECK(ek_mean(model, g, n, sigma2, x_star) == doctest::Approx(filter * 2.0).epsilon(0.05));
  CHECK(discrepancy(model, g, n, sigma2, x_star) ==
        doctest::Approx((1.0 - filter) * 2.0).epsilon(0.1));
}

TEST_CASE("EK mean is additive in the target") {
  SpectralModel model = linear_model(3, 1.0, 512, 23);
  ScalarFn g1 = [](const Eigen::Ref<const Vector>& x) { return x(0); };
  ScalarFn g2 = [](const Eigen::Ref<const Vector>& x) { return 0.7 * x(1) - x(2); };
  ScalarFn g12 = [&](const Eigen::Ref<const Vector>& x) { return g1(x) + g2(x); };
  Rng rng(24);
  SamplerFn sampler = sphere_sampler(3, std::sqrt(3.0));
  for (int trial = 0; trial < 5; ++trial) {
    Vector x = sampler(rng);
    double sum = ek_mean(model, g1, 50.0, 0.1, x) + ek_mean(model, g2, 50.0, 0.1, x);
    CHECK(ek_mean(model, g12, 50.0, 0.1, x) == doctest::Approx(sum).epsilon(1e-10));
  }
}

TEST_CASE("EK finite-width correction: zero U gives zero") {
  SpectralModel model = linear_model(3, 1.0, 256, 25);
  QuadPointFn zero = [](const Eigen::Ref<const Vector>&, const Eigen::Ref<const Vector>&,
                        const Eigen::Ref<const Vector>&,
                        const Eigen::Ref<const Vector>&) { return 0.0; };
  ScalarFn g = [](const Eigen::Ref<const Vector>& x) { return x(0) * x(1); };
  Vector x_star = Vector::Zero(3);
  x_star(0) = std::sqrt(3.0);
  CHECK(ek_fwc_mean(model, zero, g, 64.0, 0.1, x_star, 512) == 0.0);
}

TEST_CASE("EK finite-width correction is linear in U") {
  SpectralModel model = linear_model(3, 1.0, 256, 26);
  QuadPointFn U = [](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                     const Eigen::Ref<const Vector>& c, const Eigen::Ref<const Vector>& e) {
    double ab = a.dot(b) / 3.0, ce = c.dot(e) / 3.0;
    double ac = a.dot(c) / 3.0, be = b.dot(e) / 3.0;
    double ae = a.dot(e) / 3.0, bc = b.dot(c) / 3.0;
    return 2.0 * (ab * ce + ac * be + ae * bc);
  };
  QuadPointFn U3 = [&U](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                        const Eigen::Ref<const Vector>& c,
                        const Eigen::Ref<const Vector>& e) { return 3.0 * U(a, b, c, e); };
  ScalarFn g = [](const Eigen::Ref<const Vector>& x) { return x(0); };
  Vector x_star = Vector::Zero(3);
  x_star(2) = std::sqrt(3.0);
  double base = ek_fwc_mean(model, U, g, 64.0, 0.1, x_star, 384);
  double scaled = ek_fwc_mean(model, U3, g, 64.0, 0.1, x_star, 384);
  CHECK(scaled == doctest::Approx(3.0 * base).epsilon(1e-10));
}

TEST_CASE("EK finite-width correction splits into cubic and linear parts in g") {
  SpectralModel model = linear_model(3, 1.0, 256, 27);
  QuadPointFn U = [](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                     const Eigen::Ref<const Vector>& c, const Eigen::Ref<const Vector>& e) {
    double ab = a.dot(b) / 3.0, ce = c.dot(e) / 3.0;
    double ac = a.dot(c) / 3.0, be = b.dot(e) / 3.0;
    double ae = a.dot(e) / 3.0, bc = b.dot(c) / 3.0;
    return 2.0 * (ab * ce + ac * be + ae * bc);
  };
  Vector x_star = Vector::Zero(3);
  x_star(1) = std::sqrt(3.0);
  auto at = [&](double c) {
    ScalarFn g = [c](const Eigen::Ref<const Vector>& x) { return c * (x(0) + 0.3 * x(1)); };
    return ek_fwc_mean(model, U, g, 64.0, 0.1, x_star, 384);
  };
  double f1 = at(1.0), f2 = at(2.0), f3 = at(3.0);
  double A = (f2 - 2.0 * f1) / 6.0;
  double B = f1 - A;
  CHECK(f3 == doctest::Approx(27.0 * A + 3.0 * B).epsilon(1e-8));
}

namespace {

// dense evaluation of the bracket for a separable U = phi x phi x phi x phi,
// carried against the model's sample measure; independent of the anchor
// interpolation used by ek_fwc_mean_span
double separable_oracle(const SpectralModel& model, const ScalarFn& phi, const ScalarFn& g,
                        double n, double sigma2, const Eigen::Ref<const Vector>& x_star) {
  const long M = model.sample_count();
  Vector f = filter_factors(model, n, sigma2);
  EkPredictor pred = make_ek_predictor(model, g, n, sigma2);
  Vector phis(M), dg(M);
  for (long s = 0; s < M; ++s) {
    phis(s) = phi(model.sample_points.row(s).transpose());
    dg(s) = g(model.sample_points.row(s).transpose()) -
            pred.coeff.dot(model.psi_samples.row(s).transpose());
  }
  Vector proj = model.psi_samples.transpose() * phis / (double)M;  // <psi_i, phi>
  double dphi_star = phi(x_star) - f.cwiseProduct(proj).dot(model.eval_psi(x_star));
  double phi_dg = phis.dot(dg) / (double)M;
  double phi2 = phis.squaredNorm() / (double)M;
  double phi_h_phi = f.cwiseProduct(proj).dot(proj);
  double s3 = dphi_star * phi_dg * phi_dg * phi_dg;
  double s1 = dphi_star * (phi2 - phi_h_phi) * phi_dg;
  return (std::pow(n, 3) / std::pow(sigma2, 3) * s3 - 3.0 * n * n / (sigma2 * sigma2) * s1) / 6.0;
}

}  // namespace

TEST_CASE("span-exact EK correction matches the dense separable oracle") {
  SpectralModel model = linear_model(3, 1.0, 256, 28);
  ScalarFn phi1 = [](const Eigen::Ref<const Vector>& x) { return x(0) + 0.5 * x(1); };
  ScalarFn phi2 = [](const Eigen::Ref<const Vector>& x) { return 0.8 * x(2) - 0.3 * x(0); };
  QuadPointFn U = [&](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                      const Eigen::Ref<const Vector>& c, const Eigen::Ref<const Vector>& e) {
    return phi1(a) * phi1(b) * phi1(c) * phi1(e) + phi2(a) * phi2(b) * phi2(c) * phi2(e);
  };
  ScalarFn g = [](const Eigen::Ref<const Vector>& x) { return x(0) - 0.4 * x(2); };
  Rng rng(29);
  SamplerFn sampler = sphere_sampler(3, std::sqrt(3.0));
  for (double n : {16.0, 128.0}) {
    Vector x_star = sampler(rng);
    double expect = separable_oracle(model, phi1, g, n, 0.1, x_star) +
                    separable_oracle(model, phi2, g, n, 0.1, x_star);
    double got = ek_fwc_mean_span(model, U, g, n, 0.1, x_star, 16);
    CHECK(got == doctest::Approx(expect).epsilon(1e-8));
  }
}

TEST_CASE("span-exact EK correction: zero U, linearity, cubic-plus-linear in g") {
  SpectralModel model = linear_model(3, 1.0, 256, 30);
  QuadPointFn zero = [](const Eigen::Ref<const Vector>&, const Eigen::Ref<const Vector>&,
                        const Eigen::Ref<const Vector>&,
                        const Eigen::Ref<const Vector>&) { return 0.0; };
  QuadPointFn U = [](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                     const Eigen::Ref<const Vector>& c, const Eigen::Ref<const Vector>& e) {
    double ab = a.dot(b) / 3.0, ce = c.dot(e) / 3.0;
    double ac = a.dot(c) / 3.0, be = b.dot(e) / 3.0;
    double ae = a.dot(e) / 3.0, bc = b.dot(c) / 3.0;
    return 2.0 * (ab * ce + ac * be + ae * bc);
  };
  QuadPointFn U3 = [&U](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                        const Eigen::Ref<const Vector>& c,
                        const Eigen::Ref<const Vector>& e) { return 3.0 * U(a, b, c, e); };
  ScalarFn g = [](const Eigen::Ref<const Vector>& x) { return x(0) + 0.3 * x(1); };
  Vector x_star = Vector::Zero(3);
  x_star(1) = std::sqrt(3.0);
  CHECK(ek_fwc_mean_span(model, zero, g, 64.0, 0.1, x_star, 16) == 0.0);
  double base = ek_fwc_mean_span(model, U, g, 64.0, 0.1, x_star, 16);
  double scaled = ek_fwc_mean_span(model, U3, g, 64.0, 0.1, x_star, 16);
  CHECK(scaled == doctest::Approx(3.0 * base).epsilon(1e-10));
  auto at = [&](double c) {
    ScalarFn gc = [c](const Eigen::Ref<const Vector>& x) { return c * (x(0) + 0.3 * x(1)); };
    return ek_fwc_mean_span(model, U, gc, 64.0, 0.1, x_star, 16);
  };
  double f1 = at(1.0), f2 = at(2.0), f3 = at(3.0);
  double A = (f2 - 2.0 * f1) / 6.0;
  double B = f1 - A;
  CHECK(f3 == doctest::Approx(27.0 * A + 3.0 * B).epsilon(1e-8));
}

TEST_CASE("EK correction of a learnable single-mode target decays as 1/n") {
  long d = 3;
  double sw2 = 1.0, sa2 = 1.0, sigma2 = 0.2;
  KernelFn kernel = [=](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    double s = sw2 / (double)d;
    return quadratic_kernel_entry(s * a.dot(a), s * b.dot(b), s * a.dot(b), sa2);
  };
  SpectralModel model = build_spectrum(kernel, sphere_sampler(d, std::sqrt((double)d)), d, 512, 31);
  ScalarFn g = [&model](const Eigen::Ref<const Vector>& x) { return model.eval_psi(x)(1); };
  QuadPointFn U = [=](const Eigen::Ref<const Vector>& x1, const Eigen::Ref<const Vector>& x2,
                      const Eigen::Ref<const Vector>& x3, const Eigen::Ref<const Vector>& x4) {
    double s = sw2 / (double)d;
    Eigen::Matrix4d L4;
    const Eigen::Ref<const Vector>* p[4] = {&x1, &x2, &x3, &x4};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b <= a; ++b) {
        L4(a, b) = s * p[a]->dot(*p[b]);
        L4(b, a) = L4(a, b);
      }
    return assemble_U_quadratic(L4, sa2);
  };
  Rng rng(32);
  Vector x_star = sphere_sampler(d, std::sqrt((double)d))(rng);
  std::vector<double> ns = {64.0, 128.0, 256.0, 512.0, 1024.0}, amps;
  for (double n : ns) amps.push_back(std::abs(ek_fwc_mean_span(model, U, g, n, sigma2, x_star)));
  SlopeFit fit = loglog_fit(ns, amps);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(0.3));
}

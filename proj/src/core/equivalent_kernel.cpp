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

#include "core/equivalent_kernel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

namespace nnsp {

SamplerFn sphere_sampler(long d, double radius) {
  if (d < 1) throw DimensionError("sphere_sampler: d must be >= 1");
  return [d, radius](Rng& rng) {
    Vector x(d);
    for (long i = 0; i < d; ++i) x(i) = rng.gaussian();
    double nrm = x.norm();
    while (nrm < 1e-12) {  // astronomically unlikely, but keep it total
      for (long i = 0; i < d; ++i) x(i) = rng.gaussian();
      nrm = x.norm();
    }
    return Vector((radius / nrm) * x);
  };
}

Vector SpectralModel::eval_psi(const Eigen::Ref<const Vector>& x) const {
  const long M = sample_count();
  Vector kx(M);
  for (long s = 0; s < M; ++s) kx(s) = kernel(x, sample_points.row(s).transpose());
  return ext_coeff.transpose() * kx;
}

SpectralModel build_spectrum(KernelFn kernel, SamplerFn sampler, long d, int M, uint64_t seed,
                             double rank_cut) {
  if (M < 256) throw Error("build_spectrum: M must be >= 256");
  SpectralModel model;
  model.kernel = kernel;
  model.sampler = sampler;
  model.seed = seed;
  model.sample_points.resize(M, d);
  for (int s = 0; s < M; ++s) {
    Rng rng(seed, (uint64_t)s, 0x5350u);
    model.sample_points.row(s) = sampler(rng).transpose();
  }

  Matrix kmm(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j <= i; ++j) {
      double v = kernel(model.sample_points.row(i).transpose(),
                        model.sample_points.row(j).transpose());
      kmm(i, j) = v;
      kmm(j, i) = v;
    }

  Eigen::SelfAdjointEigenSolver<Matrix> es(kmm / (double)M);
  Vector ev = es.eigenvalues();  // ascending
  double ev_max = ev(M - 1);
  if (ev_max <= 0.0) throw Error("build_spectrum: kernel has no positive spectrum");
  if (ev(0) < -1e-8 * ev_max)
    throw Error("build_spectrum: kernel not PSD (eigenvalue " + std::to_string(ev(0)) + ")");

  int r = 0;
  for (int i = 0; i < M; ++i)
    if (ev(i) > rank_cut * ev_max) ++r;

  model.eigenvalues.resize(r);
  model.psi_samples.resize(M, r);
  model.ext_coeff.resize(M, r);
  double sqrt_m = std::sqrt((double)M);
  for (int k = 0; k < r; ++k) {
    int src = M - 1 - k;  // descending order
    double lam = ev(src);
    model.eigenvalues(k) = lam;
    Vector v = es.eigenvectors().col(src);  // unit norm
    model.psi_samples.col(k) = sqrt_m * v;
    // psi_k(x) = (1 / (lam * M)) sum_s K(x, x_s) v_s * sqrt(M)
    model.ext_coeff.col(k) = v / (lam * sqrt_m);
  }
  return model;
}

Vector filter_factors(const SpectralModel& model, double n, double sigma2) {
  if (!(n >= 1.0)) throw Error("filter_factors: n must be >= 1");
  return (model.eigenvalues.array() / (model.eigenvalues.array() + sigma2 / n)).matrix();
}

EkPredictor make_ek_predictor(const SpectralModel& model, const ScalarFn& g, double n,
                              double sigma2) {
  const long M = model.sample_count();
  Vector gs(M);
  for (long s = 0; s < M; ++s) gs(s) = g(model.sample_points.row(s).transpose());
  Vector proj = model.psi_samples.transpose() * gs / (double)M;
  EkPredictor p;
  p.model = &model;
  p.filter = filter_factors(model, n, sigma2);
  p.coeff = p.filter.cwiseProduct(proj);
  return p;
}

double EkPredictor::mean(const Eigen::Ref<const Vector>& x) const {
  return coeff.dot(model->eval_psi(x));
}

double ek_mean(const SpectralModel& model, const ScalarFn& g, double n, double sigma2,
               const Eigen::Ref<const Vector>& x_star) {
  return make_ek_predictor(model, g, n, sigma2).mean(x_star);
}

double discrepancy(const SpectralModel& model, const ScalarFn& g, double n, double sigma2,
                   const Eigen::Ref<const Vector>& x) {
  return g(x) - ek_mean(model, g, n, sigma2, x);
}

double ek_fwc_mean(const SpectralModel& model, const QuadPointFn& U, const ScalarFn& g, double n,
                   double sigma2, const Eigen::Ref<const Vector>& x_star, int mc_nodes,
                   uint64_t node_seed) {
  if (mc_nodes < 3) throw Error("ek_fwc_mean: mc_nodes must be >= 3");
  const long M = model.sample_count();
  const long J = mc_nodes / 3;

  EkPredictor pred = make_ek_predictor(model, g, n, sigma2);

  // fresh integration nodes, independent of the spectrum samples
  Matrix nodes(3 * J, model.sample_points.cols());
  for (long s = 0; s < 3 * J; ++s) {
    Rng rng(model.seed, node_seed, (uint64_t)s, 0x454bu);
    nodes.row(s) = model.sampler(rng).transpose();
  }

  // discrepancy of the target and the retained-mode features at the nodes
  Vector dg(3 * J);
  Matrix psi_nodes(3 * J, model.rank());
  for (long s = 0; s < 3 * J; ++s) {
    Vector psi = model.eval_psi(nodes.row(s).transpose());
    psi_nodes.row(s) = psi.transpose();
    dg(s) = g(nodes.row(s).transpose()) - pred.coeff.dot(psi);
  }

  // EK smoother weights against x*: h(x*, x_s) over the spectrum samples,
  // used to form the first-slot discrepancy of U.
  Vector fpsi_star = pred.filter.cwiseProduct(model.eval_psi(x_star));
  Vector h_star = model.psi_samples * fpsi_star / (double)M;

  auto u_tilde = [&](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                     const Eigen::Ref<const Vector>& c) {
    double acc = 0.0;
    for (long s = 0; s < M; ++s)
      acc += h_star(s) * U(model.sample_points.row(s).transpose(), a, b, c);
    return U(x_star, a, b, c) - acc;
  };

  double term_a = 0.0, term_b = 0.0;
  for (long t = 0; t < J; ++t) {
    auto a = nodes.row(3 * t).transpose();
    auto b = nodes.row(3 * t + 1).transpose();
    auto c = nodes.row(3 * t + 2).transpose();
    double u0 = u_tilde(a, b, c);
    term_a += u0 * dg(3 * t) * dg(3 * t + 1) * dg(3 * t + 2);
    // delta-tilde contracted over U's second and third slots: the diagonal
    // (Dirac) part uses the coincident pair (a, a), the smoother part uses
    // h(a, b) on the same triple.
    double u1 = u_tilde(a, a, c);
    double h_ab = pred.filter.cwiseProduct(psi_nodes.row(3 * t).transpose())
                      .dot(psi_nodes.row(3 * t + 1).transpose());
    term_b += (u1 - h_ab * u0) * dg(3 * t + 2);
  }
  term_a /= (double)J;
  term_b /= (double)J;

  double s2 = sigma2;
  return (std::pow(n, 3) / std::pow(s2, 3) * term_a - 3.0 * n * n / (s2 * s2) * term_b) / 6.0;
}

double ek_fwc_mean_span(const SpectralModel& model, const QuadPointFn& U, const ScalarFn& g,
                        double n, double sigma2, const Eigen::Ref<const Vector>& x_star,
                        int anchors, uint64_t anchor_seed) {
  if (anchors < 4) throw Error("ek_fwc_mean_span: need at least 4 anchors");
  const long M = model.sample_count();
  const long P = anchors;
  const int R = model.rank();

  Matrix Y(P, model.sample_points.cols());
  for (long p = 0; p < P; ++p) {
    Rng rng(model.seed, anchor_seed, (uint64_t)p, 0x616eu);
    Y.row(p) = model.sampler(rng).transpose();
  }

  // RKHS Gram of the anchor sections; its pseudo-inverse turns anchor values
  // of any span function into interpolation coefficients
  Matrix kpp(P, P);
  for (long p = 0; p < P; ++p)
    for (long q = 0; q <= p; ++q) {
      double v = model.kernel(Y.row(p).transpose(), Y.row(q).transpose());
      kpp(p, q) = v;
      kpp(q, p) = v;
    }
  Eigen::SelfAdjointEigenSolver<Matrix> es(kpp);
  double ev_max = es.eigenvalues().maxCoeff();
  Vector inv = Vector::Zero(P);
  for (long p = 0; p < P; ++p)
    if (es.eigenvalues()(p) > 1e-12 * ev_max) inv(p) = 1.0 / es.eigenvalues()(p);
  Matrix kinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();

  // U on the anchor grid, then the interpolation coefficients W = kinv^{x4} U4
  std::vector<double> w((std::size_t)(P * P * P * P));
  for (long p = 0; p < P; ++p)
    for (long q = 0; q <= p; ++q)
      for (long r = 0; r <= q; ++r)
        for (long t = 0; t <= r; ++t) {
          double v = U(Y.row(p).transpose(), Y.row(q).transpose(), Y.row(r).transpose(),
                       Y.row(t).transpose());
          long idx[4] = {p, q, r, t};
          std::sort(idx, idx + 4);
          do {
            w[(std::size_t)(((idx[0] * P + idx[1]) * P + idx[2]) * P + idx[3])] = v;
          } while (std::next_permutation(idx, idx + 4));
        }
  auto mode_product = [&](int axis) {
    std::vector<double> out((std::size_t)(P * P * P * P), 0.0);
    long stride = 1;
    for (int a = 3; a > axis; --a) stride *= P;
    long outer = P * P * P;
    for (long o = 0; o < outer; ++o) {
      long base = (o / stride) * stride * P + (o % stride);
      for (long i = 0; i < P; ++i) {
        double acc = 0.0;
        for (long j = 0; j < P; ++j) acc += kinv(i, j) * w[(std::size_t)(base + j * stride)];
        out[(std::size_t)(base + i * stride)] = acc;
      }
    }
    w.swap(out);
  };
  for (int axis = 0; axis < 4; ++axis) mode_product(axis);

  Vector f = filter_factors(model, n, sigma2);
  Matrix psi_y(P, R);
  for (long p = 0; p < P; ++p) psi_y.row(p) = model.eval_psi(Y.row(p).transpose()).transpose();
  Vector psi_star = model.eval_psi(x_star);

  // slot-1 discrepancy of each anchor section at x_star; the Nystrom
  // identity <psi_i, k(., y)> = lambda_i psi_i(y) makes this exact
  Vector v(P);
  for (long p = 0; p < P; ++p) {
    double sm = 0.0;
    for (int i = 0; i < R; ++i)
      sm += f(i) * model.eigenvalues(i) * psi_star(i) * psi_y(p, i);
    v(p) = model.kernel(x_star, Y.row(p).transpose()) - sm;
  }

  // target discrepancy on the sample measure and its anchor-section moments
  EkPredictor pred = make_ek_predictor(model, g, n, sigma2);
  Vector dg(M);
  for (long s = 0; s < M; ++s)
    dg(s) = g(model.sample_points.row(s).transpose()) -
            pred.coeff.dot(model.psi_samples.row(s).transpose());
  Matrix ks(M, P);
  for (long s = 0; s < M; ++s)
    for (long p = 0; p < P; ++p)
      ks(s, p) = model.kernel(model.sample_points.row(s).transpose(), Y.row(p).transpose());
  Vector a = ks.transpose() * dg / (double)M;

  // (2,3) contraction: Dirac part minus smoother part
  Matrix dirac = ks.transpose() * ks / (double)M;
  Matrix smooth = psi_y *
                  (f.array() * model.eigenvalues.array() * model.eigenvalues.array())
                      .matrix()
                      .asDiagonal() *
                  psi_y.transpose();
  Matrix c23 = dirac - smooth;

  // contract W against v (slot 1), then the two bracket terms
  double s3 = 0.0, s1 = 0.0;
  for (long q = 0; q < P; ++q)
    for (long r = 0; r < P; ++r) {
      double aq = a(q), ar = a(r);
      for (long t = 0; t < P; ++t) {
        double wv = 0.0;
        for (long p = 0; p < P; ++p)
          wv += v(p) * w[(std::size_t)(((p * P + q) * P + r) * P + t)];
        s3 += wv * aq * ar * a(t);
        s1 += wv * c23(q, r) * a(t);
      }
    }

  double s2 = sigma2;
  return (std::pow(n, 3) / std::pow(s2, 3) * s3 - 3.0 * n * n / (s2 * s2) * s1) / 6.0;
}

}  // namespace nnsp

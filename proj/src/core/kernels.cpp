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

#include "core/kernels.hpp"

#include <cmath>

#include "core/gauss_hermite.hpp"

namespace nnsp {

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "quadratic") return Activation::Quadratic;
  if (s == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + s + "' (expected linear, quadratic or relu)");
}

KernelMatrix linear_kernel(const InputSet& inputs, double sw2) {
  inputs.validate();
  if (!(sw2 > 0.0)) throw Error("linear_kernel: sw2 must be positive");
  KernelMatrix K;
  K.values = (sw2 / (double)inputs.d()) * (inputs.points * inputs.points.transpose());
  K.values = 0.5 * (K.values + K.values.transpose().eval());  // kill rounding asymmetry
  return K;
}

Matrix linear_kernel_cross(const InputSet& a, const InputSet& b, double sw2) {
  if (a.d() != b.d()) throw DimensionError("linear_kernel_cross: input dimensions differ");
  return (sw2 / (double)a.d()) * (a.points * b.points.transpose());
}

double quadratic_kernel_entry(double laa, double lbb, double lab, double sa2) {
  return sa2 * (laa * lbb + 2.0 * lab * lab);
}

KernelMatrix quadratic_kernel(const KernelMatrix& L, double sa2) {
  const long m = L.size();
  KernelMatrix K;
  K.values.resize(m, m);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j <= i; ++j) {
      double v = quadratic_kernel_entry(L.values(i, i), L.values(j, j), L.values(i, j), sa2);
      K.values(i, j) = v;
      K.values(j, i) = v;
    }
  return K;
}

double relu_kernel_entry(double laa, double lbb, double lab, double sa2) {
  if (!(laa > 0.0) || !(lbb > 0.0))
    throw Error("relu_kernel: zero (or negative) diagonal entry");
  double denom = std::sqrt(laa * lbb);
  double c = lab / denom;
  if (c > 1.0 - kArccosClampEps) c = 1.0 - kArccosClampEps;
  if (c < -1.0 + kArccosClampEps) c = -1.0 + kArccosClampEps;
  double theta = std::acos(c);
  return sa2 * denom / (2.0 * M_PI) * (std::sin(theta) + (M_PI - theta) * std::cos(theta));
}

KernelMatrix relu_kernel(const KernelMatrix& L, double sa2) {
  const long m = L.size();
  KernelMatrix K;
  K.values.resize(m, m);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j <= i; ++j) {
      double v = relu_kernel_entry(L.values(i, i), L.values(j, j), L.values(i, j), sa2);
      K.values(i, j) = v;
      K.values(j, i) = v;
    }
  return K;
}

namespace {

inline double apply_act(Activation act, double z) {
  switch (act) {
    case Activation::Linear: return z;
    case Activation::Quadratic: return z * z;
    case Activation::Relu: return z > 0.0 ? z : 0.0;
  }
  return 0.0;
}

}  // namespace

double pair_expectation_quadrature(Activation act, double caa, double cbb, double cab,
                                   int quad_order, long* clamp_warnings) {
  if (quad_order < 8) throw Error("pair_expectation_quadrature: quad_order must be >= 8");
  double sa = std::sqrt(std::max(caa, 0.0));
  double sb = std::sqrt(std::max(cbb, 0.0));
  if (sa == 0.0 || sb == 0.0) return 0.0;
  double rho = cab / (sa * sb);
  const double eps = 1e-12;
  if (rho > 1.0 - eps || rho < -1.0 + eps) {
    if (clamp_warnings) ++(*clamp_warnings);
    rho = rho > 0.0 ? 1.0 - eps : -1.0 + eps;
  }
  static thread_local int cached_order = -1;
  static thread_local GaussHermite* gh = nullptr;
  if (cached_order != quad_order) {
    delete gh;
    gh = new GaussHermite(quad_order);
    cached_order = quad_order;
  }
  // h_a = sa * z1, h_b = sb * (rho z1 + sqrt(1-rho^2) z2)
  double s = std::sqrt(1.0 - rho * rho);
  double acc = 0.0;
  for (int i = 0; i < quad_order; ++i) {
    double z1 = gh->nodes[i];
    double fa = apply_act(act, sa * z1);
    if (fa == 0.0 && act == Activation::Relu) continue;
    double inner = 0.0;
    for (int j = 0; j < quad_order; ++j) {
      double hb = sb * (rho * z1 + s * gh->nodes[j]);
      inner += gh->weights[j] * apply_act(act, hb);
    }
    acc += gh->weights[i] * fa * inner;
  }
  return acc;
}

std::vector<KernelMatrix> deep_kernel_recursion(const NetworkSpec& spec, const InputSet& inputs,
                                                int quad_order, long* clamp_warnings) {
  spec.validate();
  if (quad_order < 8) throw Error("deep_kernel_recursion: quad_order must be >= 8");
  std::vector<KernelMatrix> layers;
  KernelMatrix K = linear_kernel(inputs, spec.weight_var[0]);
  K.values.array() += spec.bias_var_at(0);
  layers.push_back(K);
  const long m = K.size();
  for (int l = 1; l <= spec.depth; ++l) {
    double var_next = (l < spec.depth) ? spec.weight_var[l] : spec.readout_var;
    double bias_next = (l < spec.depth) ? spec.bias_var_at(l) : 0.0;
    const Matrix& prev = layers.back().values;
    KernelMatrix next;
    next.values.resize(m, m);
    for (long i = 0; i < m; ++i)
      for (long j = 0; j <= i; ++j) {
        double v = var_next * pair_expectation_quadrature(spec.activation, prev(i, i), prev(j, j),
                                                          prev(i, j), quad_order, clamp_warnings) +
                   bias_next;
        next.values(i, j) = v;
        next.values(j, i) = v;
      }
    layers.push_back(next);
  }
  return layers;
}

KernelMatrix nngp_kernel(const NetworkSpec& spec, const InputSet& inputs, int quad_order) {
  spec.validate();
  if (spec.depth == 1 && spec.bias_var_at(0) == 0.0) {
    KernelMatrix L = linear_kernel(inputs, spec.weight_var[0]);
    switch (spec.activation) {
      case Activation::Linear: {
        KernelMatrix K = L;
        K.values *= spec.readout_var;
        return K;
      }
      case Activation::Quadratic: return quadratic_kernel(L, spec.readout_var);
      case Activation::Relu: return relu_kernel(L, spec.readout_var);
    }
  }
  return deep_kernel_recursion(spec, inputs, quad_order).back();
}

double nngp_kernel_entry(const NetworkSpec& spec, const Eigen::Ref<const Vector>& x,
                         const Eigen::Ref<const Vector>& y, long d) {
  if (spec.depth != 1 || spec.bias_var_at(0) != 0.0)
    throw Error("nngp_kernel_entry: pointwise evaluation implemented for depth-1, bias-free nets");
  double sw2 = spec.weight_var[0];
  double lxx = sw2 * x.squaredNorm() / (double)d;
  double lyy = sw2 * y.squaredNorm() / (double)d;
  double lxy = sw2 * x.dot(y) / (double)d;
  switch (spec.activation) {
    case Activation::Linear: return spec.readout_var * lxy;
    case Activation::Quadratic: return quadratic_kernel_entry(lxx, lyy, lxy, spec.readout_var);
    case Activation::Relu: return relu_kernel_entry(lxx, lyy, lxy, spec.readout_var);
  }
  return 0.0;
}

}  // namespace nnsp

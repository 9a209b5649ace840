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

#include "core/types.hpp"

namespace nnsp {

inline constexpr double kDefaultJitterScale = 1e-10;  // times max diagonal
inline constexpr double kArccosClampEps = 1e-12;

/// First-layer kernel L_ab = sw2 * (x_a . x_b) / d.  Exact Gram matrix of
/// the scaled inputs, so PSD by construction.
KernelMatrix linear_kernel(const InputSet& inputs, double sw2);

/// Cross-kernel block between two input sets (same formula, rows from `a`,
/// columns from `b`).
Matrix linear_kernel_cross(const InputSet& a, const InputSet& b, double sw2);

/// Kernel of one hidden layer with phi(z) = z^2 on pre-activation kernel L:
///   K_ab = sa2 * (L_aa * L_bb + 2 * L_ab^2)
KernelMatrix quadratic_kernel(const KernelMatrix& L, double sa2);
double quadratic_kernel_entry(double laa, double lbb, double lab, double sa2);

/// Arc-cosine kernel of one hidden ReLU layer:
///   K_ab = sa2 * sqrt(L_aa L_bb) / (2 pi) * (sin t + (pi - t) cos t),
///   t = arccos( L_ab / sqrt(L_aa L_bb) )
/// The arccos argument is clamped to [-1, 1].  Throws on a zero diagonal.
KernelMatrix relu_kernel(const KernelMatrix& L, double sa2);
double relu_kernel_entry(double laa, double lbb, double lab, double sa2);

/// One-dimensional Gaussian pair expectation E[phi(h_a) phi(h_b)] where
/// (h_a, h_b) ~ N(0, [[caa, cab], [cab, cbb]]), by 2D Gauss-Hermite
/// quadrature.  Correlations outside (-1, 1) are clamped;
/// `clamp_warnings`, when given, counts how often that happened.
double pair_expectation_quadrature(Activation act, double caa, double cbb, double cab,
                                   int quad_order, long* clamp_warnings = nullptr);

/// Layer-by-layer NNGP kernel recursion at leading (Gaussian) order.
/// Returns one kernel per layer: K[0] is the first-layer (linear) kernel
/// plus bias, K[l] for l >= 1 applies the activation map by quadrature.
/// The last hidden layer's activation map scaled by readout_var is appended,
/// so the final entry is the output kernel.
std::vector<KernelMatrix> deep_kernel_recursion(const NetworkSpec& spec, const InputSet& inputs,
                                                int quad_order, long* clamp_warnings = nullptr);

/// Output (NNGP) kernel of the network: convenience wrapper returning the
/// last element of deep_kernel_recursion, with exact closed forms used for
/// the depth-1 quadratic/ReLU/linear cases.
KernelMatrix nngp_kernel(const NetworkSpec& spec, const InputSet& inputs, int quad_order = 40);

/// Output-kernel entry for two arbitrary points (depth-1 closed forms only;
/// used by the EK module which needs pointwise kernel evaluation).
double nngp_kernel_entry(const NetworkSpec& spec, const Eigen::Ref<const Vector>& x,
                         const Eigen::Ref<const Vector>& y, long d);

}  // namespace nnsp

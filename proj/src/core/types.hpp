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

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnsp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
  using Error::Error;
};

// Series expansion cannot represent the requested entry; carries the
// offending kernel entry so callers can fall back to the MC path.
struct NonConvergentError : Error {
  int i, j;
  double value;
  NonConvergentError(int i_, int j_, double v)
      : Error("fourth-moment series non-convergent at pair (" +
              std::to_string(i_) + "," + std::to_string(j_) +
              "), |L| = " + std::to_string(v)),
        i(i_), j(j_), value(v) {}
};

struct FactorizationError : Error {
  using Error::Error;
};

// Langevin chain produced a non-finite weight; usually means dt too large.
struct DivergenceError : Error {
  long epoch;
  DivergenceError(long epoch_, const std::string& what)
      : Error("chain diverged at epoch " + std::to_string(epoch_) + ": " + what),
        epoch(epoch_) {}
};

struct ConfigError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types

enum class Activation { Linear, Quadratic, Relu };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Quadratic: return "quadratic";
    case Activation::Relu: return "relu";
  }
  return "?";
}

Activation activation_from_string(const std::string& s);

/// A set of input points, one per row.  When `normalized` is set every row
/// is expected to lie on the sphere of radius `sphere_radius`.
struct InputSet {
  Matrix points;         // n x d
  double sphere_radius = 0.0;
  bool normalized = false;

  long n() const { return points.rows(); }
  long d() const { return points.cols(); }

  void validate() const {
    if (points.rows() < 1 || points.cols() < 1)
      throw DimensionError("InputSet requires n >= 1 and d >= 1");
    if (normalized) {
      for (long i = 0; i < points.rows(); ++i) {
        double r = points.row(i).norm();
        if (std::abs(r - sphere_radius) > 1e-9)
          throw Error("InputSet row " + std::to_string(i) +
                      " not on sphere: |x| = " + std::to_string(r));
      }
    }
  }
};

/// Symmetric Gram matrix.  `jitter` is what gets added to the diagonal when
/// the matrix is factorized, not something baked into `values`.
struct KernelMatrix {
  Matrix values;
  double jitter = 0.0;

  long size() const { return values.rows(); }

  bool is_symmetric(double tol_scale = 1e-12) const {
    double m = values.cwiseAbs().maxCoeff();
    return (values - values.transpose()).cwiseAbs().maxCoeff() <= tol_scale * std::max(m, 1.0);
  }

  // Smallest eigenvalue >= -tol * max diagonal.
  bool is_psd(double tol = 1e-8) const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(values, Eigen::EigenvaluesOnly);
    double max_diag = values.diagonal().maxCoeff();
    return es.eigenvalues().minCoeff() >= -tol * std::max(max_diag, 1.0);
  }
};

/// Fully connected network shape and prior variances.  Variances are the
/// scaled ones (varsigma convention): the per-weight variance of layer l is
/// weight_var[l] / fan_in.
struct NetworkSpec {
  int depth = 1;  // number of hidden layers
  Activation activation = Activation::Relu;
  std::vector<double> weight_var;  // size depth, first entry feeds off the input
  double readout_var = 1.0;
  std::vector<double> bias_var;    // size depth; empty means all zero

  void validate() const {
    if (depth < 1) throw Error("NetworkSpec: depth must be >= 1");
    if ((int)weight_var.size() != depth)
      throw DimensionError("NetworkSpec: weight_var size must equal depth");
    for (double v : weight_var)
      if (!(v > 0.0) || !std::isfinite(v)) throw Error("NetworkSpec: weight_var must be positive finite");
    if (!(readout_var > 0.0) || !std::isfinite(readout_var))
      throw Error("NetworkSpec: readout_var must be positive finite");
    if (!bias_var.empty() && (int)bias_var.size() != depth)
      throw DimensionError("NetworkSpec: bias_var size must equal depth (or be empty)");
    for (double v : bias_var)
      if (v < 0.0 || !std::isfinite(v)) throw Error("NetworkSpec: bias_var must be non-negative");
  }

  double bias_var_at(int layer) const {
    return bias_var.empty() ? 0.0 : bias_var.at(layer);
  }
};

}  // namespace nnsp

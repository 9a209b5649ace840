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

/// Quadratic teacher y(x) = x^T A x with A_ij ~ N(0,1) fixed per seed, and
/// inputs uniform on the sphere of radius sqrt(d).  When normalization is
/// requested, targets are divided by the train-set standard deviation and
/// the factor is recorded in `scale`.
struct Dataset {
  Matrix A;  // d x d
  InputSet train, test;
  Vector y_train, y_test;
  double scale = 1.0;

  double target(const Eigen::Ref<const Vector>& x) const {
    return x.dot(A * x) / scale;
  }
};

Dataset gen_quadratic_dataset(long d, long n_train, long n_test, uint64_t seed,
                              bool normalize_target = false);

/// Fresh input draws on the same sphere (used for dataset-averaged checks).
InputSet sphere_inputs(long d, long n, uint64_t seed, uint64_t stream);

}  // namespace nnsp

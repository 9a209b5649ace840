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
#include <cmath>
#include <vector>

namespace nnsp {

// Gauss-Hermite rule in the probabilist convention:
//   E[f(z)] for z ~ N(0,1)  ==  sum_i weight[i] * f(node[i])
// Nodes/weights come from the Golub-Welsch eigenproblem of the Jacobi matrix
// for the physicists' weight e^{-x^2}, then rescaled by sqrt(2) and 1/sqrt(pi).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussHermite(int order) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
    for (int i = 1; i < order; ++i) {
      double b = std::sqrt(i / 2.0);
      J(i, i - 1) = b;
      J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes.resize(order);
    weights.resize(order);
    for (int i = 0; i < order; ++i) {
      nodes[i] = es.eigenvalues()(i) * std::sqrt(2.0);
      double v0 = es.eigenvectors()(0, i);
      // first-component-squared times mu0 = sqrt(pi), then divided by
      // sqrt(pi) to land in the probabilist normalization
      weights[i] = v0 * v0;
    }
  }
};

}  // namespace nnsp

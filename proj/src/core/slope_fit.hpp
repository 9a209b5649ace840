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

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // bootstrap standard error
  int points = 0;
};

/// Ordinary least squares of y against x.
SlopeFit ols_fit(const std::vector<double>& x, const std::vector<double>& y);

/// OLS on (log10 x, log10 y) with a bootstrap standard error on the slope.
/// Non-positive values are rejected.
SlopeFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y,
                    int bootstrap = 200, uint64_t seed = 42);

}  // namespace nnsp

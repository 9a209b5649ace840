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

#include "core/slope_fit.hpp"

#include <cmath>

#include "core/rng.hpp"

namespace nnsp {

SlopeFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("ols_fit: size mismatch");
  const int n = (int)x.size();
  if (n < 2) throw Error("ols_fit: need at least 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) throw Error("ols_fit: degenerate abscissae");
  SlopeFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  f.points = n;
  return f;
}

SlopeFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, int bootstrap,
                    uint64_t seed) {
  if (x.size() != y.size()) throw DimensionError("loglog_fit: size mismatch");
  std::vector<double> lx, ly;
  lx.reserve(x.size());
  ly.reserve(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw Error("loglog_fit: values must be positive for log axes");
    lx.push_back(std::log10(x[i]));
    ly.push_back(std::log10(y[i]));
  }
  SlopeFit f = ols_fit(lx, ly);
  if (bootstrap > 0 && lx.size() > 2) {
    const int n = (int)lx.size();
    double mean = 0.0, m2 = 0.0;
    int kept = 0;
    for (int b = 0; b < bootstrap; ++b) {
      Rng rng(seed, (uint64_t)b, 0xb007u);
      std::vector<double> bx(n), by(n);
      for (int i = 0; i < n; ++i) {
        int j = (int)rng.below((uint64_t)n);
        bx[i] = lx[j];
        by[i] = ly[j];
      }
      double s;
      try {
        s = ols_fit(bx, by).slope;
      } catch (const Error&) {
        continue;  // resample collapsed onto one abscissa
      }
      ++kept;
      double d = s - mean;
      mean += d / kept;
      m2 += d * (s - mean);
    }
    if (kept > 1) f.slope_se = std::sqrt(m2 / (kept - 1));
  }
  return f;
}

}  // namespace nnsp

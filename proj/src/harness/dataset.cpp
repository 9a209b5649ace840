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

#include "harness/dataset.hpp"

#include <cmath>

#include "core/rng.hpp"

namespace nnsp {

InputSet sphere_inputs(long d, long n, uint64_t seed, uint64_t stream) {
  InputSet set;
  set.points.resize(n, d);
  double radius = std::sqrt((double)d);
  for (long i = 0; i < n; ++i) {
    Rng rng(seed, stream, (uint64_t)i, 0x5048u);
    Vector x(d);
    double nrm = 0.0;
    do {
      for (long j = 0; j < d; ++j) x(j) = rng.gaussian();
      nrm = x.norm();
    } while (nrm < 1e-12);
    set.points.row(i) = (radius / nrm) * x.transpose();
  }
  set.sphere_radius = radius;
  set.normalized = true;
  return set;
}

Dataset gen_quadratic_dataset(long d, long n_train, long n_test, uint64_t seed,
                              bool normalize_target) {
  if (d < 2) throw DimensionError("gen_quadratic_dataset: d must be >= 2");
  Dataset ds;
  ds.A.resize(d, d);
  {
    Rng rng(seed, 0xAAu);
    for (long i = 0; i < d; ++i)
      for (long j = 0; j < d; ++j) ds.A(i, j) = rng.gaussian();
  }
  ds.train = sphere_inputs(d, n_train, seed, 1);
  ds.test = sphere_inputs(d, n_test, seed, 2);
  auto raw = [&](const Eigen::Ref<const Vector>& x) { return x.dot(ds.A * x); };
  ds.y_train.resize(n_train);
  for (long i = 0; i < n_train; ++i) ds.y_train(i) = raw(ds.train.points.row(i).transpose());
  ds.y_test.resize(n_test);
  for (long i = 0; i < n_test; ++i) ds.y_test(i) = raw(ds.test.points.row(i).transpose());
  if (normalize_target) {
    double mean = ds.y_train.mean();
    double sd = std::sqrt((ds.y_train.array() - mean).square().mean());
    if (sd > 0.0) {
      ds.scale = sd;
      ds.y_train /= sd;
      ds.y_test /= sd;
    }
  }
  return ds;
}

}  // namespace nnsp

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

#include <string>
#include <vector>

#include "core/gp_inference.hpp"
#include "core/langevin.hpp"
#include "core/slope_fit.hpp"
#include "harness/config.hpp"
#include "harness/dataset.hpp"

namespace nnsp {

/// All config keys any experiment understands; unknown keys are rejected
/// with a nearest-match suggestion.
std::vector<std::string> known_config_keys();

/// Writes manifest.txt (config hash, canonical config, RNG scheme note).
void write_manifest(const Config& cfg, const std::string& out_dir,
                    const std::string& experiment);

NetworkSpec spec_from_config(const Config& cfg);

/// GP posterior and O(1) finite-width corrections for a dataset, built from
/// the network's kernels and fourth cumulant.  Depth-1 nets use the
/// closed-form providers; deeper nets require the combined point count to
/// stay under the materialization cap.
struct InferenceResult {
  Posterior gp;
  FwcCorrection fwc;
  double jitter_used = 0.0;
  bool streamed = false;
};
InferenceResult run_inference(const NetworkSpec& spec, const Dataset& ds, double sigma2,
                              bool want_variance, int materialize_cap = kDefaultMaterializeCap);

// ---------------------------------------------------------------------------
// Experiments.  Each writes CSV + manifest into out_dir and returns its
// headline numbers for the caller (CLI, acceptance tests).

struct WidthSweepRow {
  long width = 0;
  double dt = 0.0;
  double gp_dnn_mse = 0.0, gp_dnn_mse_debiased = 0.0;
  double fwc_dnn_mse = 0.0, fwc_dnn_mse_debiased = 0.0;
  double dnn_target_mse = 0.0;
  double bias = 0.0;
  bool diverged = false;
};
struct WidthSweepResult {
  std::vector<WidthSweepRow> rows;
  SlopeFit gp_dnn_slope;            // over the largest-width half, debiased column
  double fwc_over_gp_at_largest = 0.0;  // fwc_dnn / gp_dnn at max width
  bool crossover_seen = false;          // some width where fwc >= gp
};
WidthSweepResult run_width_sweep(const Config& cfg, const std::string& out_dir);

struct NSweepRow {
  long n = 0;
  double fu_abs_mean = 0.0;
  double gp_rmse = 0.0;
  bool streamed = false;
};
struct NSweepResult {
  std::vector<NSweepRow> rows;
  SlopeFit fu_slope, gp_slope;  // over the largest decade of n
};
NSweepResult run_n_sweep(const Config& cfg, const std::string& out_dir);

struct EkCheckResult {
  double rel_rmse = 0.0;   // EK mean vs dataset-averaged GP posterior
  Vector filters;          // factors at the configured n
  double fwc_slope = 0.0;  // log-log slope of |ek_fwc_mean| vs n
};
EkCheckResult run_ek_check(const Config& cfg, const std::string& out_dir);

struct ErgodicityRunResult {
  ErgodicityResult diag;
  double tau = 0.0;  // integrated autocorrelation time of the pooled series
};
ErgodicityRunResult run_ergodicity(const Config& cfg, const std::string& out_dir);

/// Single fwc-predict: posterior CSV with one row per test point.
InferenceResult run_single_predict(const Config& cfg, const std::string& out_dir);

/// `kernel` subcommand: NNGP kernel of the configured net over the dataset.
void run_kernel_dump(const Config& cfg, const std::string& out_dir);

/// `cumulant` subcommand: U over the train points (materialized; small n).
void run_cumulant_dump(const Config& cfg, const std::string& out_dir);

/// `train` subcommand: one width, chains + probe means CSV and checkpoint.
ChainResult run_train(const Config& cfg, const std::string& out_dir);

}  // namespace nnsp

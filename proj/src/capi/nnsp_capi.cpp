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

#include "nnsp.h"

#include <cstdio>
#include <cstring>
#include <string>

#include "harness/experiments.hpp"

namespace {

using namespace nnsp;

void fill_err(char* buf, int len, const std::string& msg) {
  if (!buf || len <= 0) return;
  std::snprintf(buf, (std::size_t)len, "%s", msg.c_str());
}

int code_of(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DimensionError*>(&e))
    return NNSP_ERR_INVALID;
  if (dynamic_cast<const FactorizationError*>(&e) ||
      dynamic_cast<const NonConvergentError*>(&e) || dynamic_cast<const DivergenceError*>(&e))
    return NNSP_ERR_NUMERIC;
  return NNSP_ERR_NUMERIC;
}

NetworkSpec make_spec(const char* activation, int depth, double weight_var, double readout_var) {
  NetworkSpec spec;
  spec.depth = depth;
  spec.activation = activation_from_string(activation ? activation : "");
  spec.weight_var.assign((std::size_t)depth, weight_var);
  spec.readout_var = readout_var;
  spec.validate();
  return spec;
}

}  // namespace

extern "C" {

struct nnsp_config {
  Config cfg;
};

const char* nnsp_version(void) { return "nnsp 1.0.0"; }

nnsp_config* nnsp_config_create(void) { return new nnsp_config{}; }

nnsp_config* nnsp_config_load(const char* path, char* errbuf, int errlen) {
  if (!path) {
    fill_err(errbuf, errlen, "nnsp_config_load: path is NULL");
    return nullptr;
  }
  try {
    auto* h = new nnsp_config{};
    h->cfg = Config::parse_file(path);
    h->cfg.check_keys(known_config_keys());
    return h;
  } catch (const std::exception& e) {
    fill_err(errbuf, errlen, e.what());
    return nullptr;
  }
}

int nnsp_config_set(nnsp_config* cfg, const char* key, const char* value, char* errbuf,
                    int errlen) {
  if (!cfg || !key || !value) {
    fill_err(errbuf, errlen, "nnsp_config_set: NULL argument");
    return NNSP_ERR_INVALID;
  }
  try {
    Config probe = cfg->cfg;
    probe.set(key, value);
    probe.check_keys(known_config_keys());
    cfg->cfg = probe;
    return NNSP_OK;
  } catch (const std::exception& e) {
    fill_err(errbuf, errlen, e.what());
    return NNSP_ERR_INVALID;
  }
}

void nnsp_config_free(nnsp_config* cfg) { delete cfg; }

int nnsp_run(nnsp_config* cfg, const char* experiment, const char* out_dir, char* summary,
             int summary_len, char* errbuf, int errlen) {
  if (!cfg || !experiment || !out_dir) {
    fill_err(errbuf, errlen, "nnsp_run: NULL argument");
    return NNSP_ERR_INVALID;
  }
  std::string kind = experiment;
  try {
    char line[256] = {0};
    if (kind == "sweep-width") {
      WidthSweepResult r = run_width_sweep(cfg->cfg, out_dir);
      std::snprintf(line, sizeof(line),
                    "gp-dnn slope %.3f +- %.3f; fwc/gp at largest width %.4g",
                    r.gp_dnn_slope.slope, r.gp_dnn_slope.slope_se, r.fwc_over_gp_at_largest);
    } else if (kind == "sweep-n") {
      NSweepResult r = run_n_sweep(cfg->cfg, out_dir);
      std::snprintf(line, sizeof(line), "|fU| slope %.3f; gp rmse slope %.3f",
                    r.fu_slope.slope, r.gp_slope.slope);
    } else if (kind == "ek") {
      EkCheckResult r = run_ek_check(cfg->cfg, out_dir);
      std::snprintf(line, sizeof(line), "ek vs avg-gp rel rmse %.4g; ek-fwc slope %.3f",
                    r.rel_rmse, r.fwc_slope);
    } else if (kind == "ergodicity") {
      ErgodicityRunResult r = run_ergodicity(cfg->cfg, out_dir);
      std::snprintf(line, sizeof(line), "block-variance slope %.3f (tau %.2f)",
                    r.diag.fit.slope, r.tau);
    } else if (kind == "fwc-predict") {
      InferenceResult r = run_single_predict(cfg->cfg, out_dir);
      std::snprintf(line, sizeof(line), "wrote posterior.csv (jitter %.3g%s)", r.jitter_used,
                    r.streamed ? ", streamed" : "");
    } else if (kind == "train") {
      ChainResult r = run_train(cfg->cfg, out_dir);
      std::snprintf(line, sizeof(line), "final train loss %.4g%s",
                    r.final_loss.empty() ? 0.0 : r.final_loss.back(),
                    r.stability_warning ? " (stability warning)" : "");
    } else if (kind == "kernel") {
      run_kernel_dump(cfg->cfg, out_dir);
      std::snprintf(line, sizeof(line), "wrote kernel.bin");
    } else if (kind == "cumulant") {
      run_cumulant_dump(cfg->cfg, out_dir);
      std::snprintf(line, sizeof(line), "wrote u4.bin");
    } else {
      fill_err(errbuf, errlen, "unknown experiment '" + kind + "'");
      return NNSP_ERR_INVALID;
    }
    if (summary && summary_len > 0) std::snprintf(summary, (std::size_t)summary_len, "%s", line);
    return NNSP_OK;
  } catch (const ConfigError& e) {
    fill_err(errbuf, errlen, e.what());
    return NNSP_ERR_INVALID;
  } catch (const std::exception& e) {
    fill_err(errbuf, errlen, e.what());
    return code_of(e);
  }
}

int nnsp_nngp_kernel(const char* activation, int depth, double weight_var, double readout_var,
                     const double* x, long n, long d, double* k_out, char* errbuf, int errlen) {
  if (!x || !k_out || n < 1 || d < 1) {
    fill_err(errbuf, errlen, "nnsp_nngp_kernel: bad arguments");
    return NNSP_ERR_INVALID;
  }
  try {
    NetworkSpec spec = make_spec(activation, depth, weight_var, readout_var);
    InputSet inputs;
    inputs.points = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                   Eigen::RowMajor>>(x, n, d);
    KernelMatrix K = nngp_kernel(spec, inputs);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        k_out, n, n) = K.values;
    return NNSP_OK;
  } catch (const std::exception& e) {
    fill_err(errbuf, errlen, e.what());
    return code_of(e);
  }
}

int nnsp_gp_fwc_predict(const char* activation, double weight_var, double readout_var,
                        const double* x_train, long n_train, const double* x_test, long n_test,
                        long d, const double* y_train, double sigma2, double width,
                        double* mean_out, double* var_out, char* errbuf, int errlen) {
  if (!x_train || !x_test || !y_train || !mean_out || !var_out || n_train < 1 || n_test < 1 ||
      d < 1) {
    fill_err(errbuf, errlen, "nnsp_gp_fwc_predict: bad arguments");
    return NNSP_ERR_INVALID;
  }
  try {
    NetworkSpec spec = make_spec(activation, 1, weight_var, readout_var);
    Dataset ds;
    ds.train.points = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                     Eigen::RowMajor>>(x_train, n_train, d);
    ds.test.points = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                    Eigen::RowMajor>>(x_test, n_test, d);
    ds.y_train = Eigen::Map<const Vector>(y_train, n_train);
    ds.y_test = Vector::Zero(n_test);
    InferenceResult inf = run_inference(spec, ds, sigma2, true);
    Posterior post = (width > 0.0) ? combine_posterior(inf.gp, inf.fwc, width) : inf.gp;
    Eigen::Map<Vector>(mean_out, n_test) = post.mean;
    Eigen::Map<Vector>(var_out, n_test) = post.variance;
    return NNSP_OK;
  } catch (const std::exception& e) {
    fill_err(errbuf, errlen, e.what());
    return code_of(e);
  }
}

int nnsp_fourth_cumulant(const char* activation, double weight_var, double readout_var,
                         const double* x4, long d, double* u_out, char* errbuf, int errlen) {
  if (!x4 || !u_out || d < 1) {
    fill_err(errbuf, errlen, "nnsp_fourth_cumulant: bad arguments");
    return NNSP_ERR_INVALID;
  }
  try {
    NetworkSpec spec = make_spec(activation, 1, weight_var, readout_var);
    Matrix pts = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(x4, 4, d);
    InputSet set;
    set.points = pts;
    KernelMatrix L = linear_kernel(set, spec.weight_var[0]);
    TwoLayerUProvider provider(L.values, spec.activation, spec.readout_var);
    *u_out = provider.entry(0, 1, 2, 3);
    return NNSP_OK;
  } catch (const std::exception& e) {
    fill_err(errbuf, errlen, e.what());
    return code_of(e);
  }
}

}  // extern "C"

/* Copyright 2026 the nnsp authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the nnsp library: NNGP kernels, fourth-cumulant driven
 * finite-width corrections to GP posteriors, Langevin training experiments.
 *
 * All functions return an error code; human-readable details are copied
 * into the caller's error buffer (always NUL terminated, may be truncated).
 * Matrices are row-major double arrays.
 */

#ifndef NNSP_H_
#define NNSP_H_

#ifdef __cplusplus
extern "C" {
#endif

#define NNSP_OK 0
#define NNSP_ERR_INVALID 1 /* bad arguments or configuration */
#define NNSP_ERR_NUMERIC 2 /* factorization failure, divergence, non-convergence */
#define NNSP_ERR_IO 3      /* filesystem problems */

const char* nnsp_version(void);

/* ------------------------------------------------------------------ */
/* Configuration handle: key-value settings in `section.key` form.    */

typedef struct nnsp_config nnsp_config;

nnsp_config* nnsp_config_create(void);
/* Returns NULL on parse failure and fills errbuf. */
nnsp_config* nnsp_config_load(const char* path, char* errbuf, int errlen);
int nnsp_config_set(nnsp_config* cfg, const char* key, const char* value, char* errbuf,
                    int errlen);
void nnsp_config_free(nnsp_config* cfg);

/* Runs one experiment (kernel, cumulant, fwc-predict, train, sweep-width,
 * sweep-n, ek, ergodicity); writes CSV/manifest outputs into out_dir and a
 * one-line human-readable summary into summary. */
int nnsp_run(nnsp_config* cfg, const char* experiment, const char* out_dir, char* summary,
             int summary_len, char* errbuf, int errlen);

/* ------------------------------------------------------------------ */
/* Array-level entry points (no handle needed).                       */

/* NNGP kernel of a depth-`depth` network over n points of dimension d;
 * k_out must hold n*n doubles. */
int nnsp_nngp_kernel(const char* activation, int depth, double weight_var, double readout_var,
                     const double* x, long n, long d, double* k_out, char* errbuf, int errlen);

/* GP posterior with the 1/width finite-width correction for a depth-1
 * network.  mean_out/var_out must hold n_test doubles each.  Pass width <= 0
 * for the pure GP limit. */
int nnsp_gp_fwc_predict(const char* activation, double weight_var, double readout_var,
                        const double* x_train, long n_train, const double* x_test, long n_test,
                        long d, const double* y_train, double sigma2, double width,
                        double* mean_out, double* var_out, char* errbuf, int errlen);

/* O(1)-scale fourth cumulant U(x1,x2,x3,x4) of a depth-1 network; the four
 * points are rows of x4 (4 x d, row-major). */
int nnsp_fourth_cumulant(const char* activation, double weight_var, double readout_var,
                         const double* x4, long d, double* u_out, char* errbuf, int errlen);

#ifdef __cplusplus
}
#endif

#endif /* NNSP_H_ */

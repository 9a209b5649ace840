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

#include "core/langevin.hpp"

#include <cmath>
#include <fstream>

#include "core/io.hpp"
#include "core/rng.hpp"

namespace nnsp {

namespace {

inline double act_of(Activation act, double z) {
  switch (act) {
    case Activation::Linear: return z;
    case Activation::Quadratic: return z * z;
    case Activation::Relu: return z > 0.0 ? z : 0.0;
  }
  return 0.0;
}

inline double act_prime(Activation act, double z) {
  switch (act) {
    case Activation::Linear: return 1.0;
    case Activation::Quadratic: return 2.0 * z;
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

Matrix apply_act(Activation act, const Matrix& z) {
  return z.unaryExpr([act](double v) { return act_of(act, v); });
}

}  // namespace

long MLP::n_params() const {
  long p = 0;
  for (const auto& m : W) p += m.size();
  return p;
}

void MLP::validate() const {
  if (widths.size() < 2) throw DimensionError("MLP: need at least input and one hidden layer");
  if ((int)W.size() != depth() + 1) throw DimensionError("MLP: weight count mismatch");
  for (int l = 0; l < depth(); ++l) {
    if (W[l].rows() != widths[l + 1] || W[l].cols() != widths[l])
      throw DimensionError("MLP: layer " + std::to_string(l) + " shape mismatch");
  }
  if (W.back().rows() != 1 || W.back().cols() != widths.back())
    throw DimensionError("MLP: readout shape mismatch");
}

double MLP::forward(const Eigen::Ref<const Vector>& x) const {
  Vector h = x;
  for (int l = 0; l < depth(); ++l) {
    Vector z = W[l] * h;
    h = z.unaryExpr([this](double v) { return act_of(act, v); });
  }
  return (W.back() * h)(0);
}

Vector MLP::forward_batch(const Matrix& X) const {
  Matrix h = X;  // n x d
  for (int l = 0; l < depth(); ++l) h = apply_act(act, h * W[l].transpose());
  return h * W.back().transpose();
}

MLP mlp_from_prior(const NetworkSpec& spec, long d, long width, uint64_t master_seed,
                   uint64_t chain_seed) {
  spec.validate();
  MLP mlp;
  mlp.act = spec.activation;
  mlp.widths.push_back(d);
  for (int l = 0; l < spec.depth; ++l) mlp.widths.push_back(width);
  mlp.W.resize(spec.depth + 1);
  for (int l = 0; l <= spec.depth; ++l) {
    long fan_in = mlp.widths[l];
    long rows = (l < spec.depth) ? mlp.widths[l + 1] : 1;
    double var = ((l < spec.depth) ? spec.weight_var[l] : spec.readout_var) / (double)fan_in;
    double sd = std::sqrt(var);
    Rng rng(master_seed, chain_seed, 0x1417u, (uint64_t)l);
    mlp.W[l].resize(rows, fan_in);
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < fan_in; ++j) mlp.W[l](i, j) = sd * rng.gaussian();
  }
  return mlp;
}

void TrainProtocol::validate() const {
  if (!(dt > 0.0)) throw Error("TrainProtocol: dt must be positive");
  if (temperature < 0.0) throw Error("TrainProtocol: temperature must be non-negative");
  if (gamma.empty()) throw Error("TrainProtocol: gamma per layer required");
  for (double g : gamma)
    if (g < 0.0) throw Error("TrainProtocol: gamma must be non-negative");
  if (n_epochs < 1) throw Error("TrainProtocol: n_epochs must be >= 1");
  if (burn_in < 0 || burn_in >= n_epochs)
    throw Error("TrainProtocol: burn_in must lie in [0, n_epochs)");
  if (thinning < 1) throw Error("TrainProtocol: thinning must be >= 1");
  if (seeds.empty()) throw Error("TrainProtocol: at least one seed required");
}

TrainProtocol protocol_for_posterior(const NetworkSpec& spec, long d, long width, double sigma2,
                                     double dt, long n_epochs, long burn_in,
                                     std::vector<uint64_t> seeds) {
  spec.validate();
  TrainProtocol p;
  p.dt = dt;
  p.temperature = 2.0 * sigma2;
  p.n_epochs = n_epochs;
  p.burn_in = burn_in;
  p.seeds = std::move(seeds);
  long fan_in = d;
  for (int l = 0; l < spec.depth; ++l) {
    p.gamma.push_back(p.temperature * (double)fan_in / spec.weight_var[l]);
    fan_in = width;
  }
  p.gamma.push_back(p.temperature * (double)fan_in / spec.readout_var);
  p.validate();
  return p;
}

std::vector<double> implied_weight_vars(const TrainProtocol& protocol) {
  std::vector<double> vars;
  for (double g : protocol.gamma) {
    if (!(g > 0.0)) throw Error("implied_weight_vars: gamma must be positive for the map");
    vars.push_back(protocol.temperature / g);
  }
  return vars;
}

double loss_and_grad(const MLP& mlp, const Matrix& X, const Vector& y, std::vector<Matrix>& grad) {
  if (X.rows() < 1) throw DimensionError("loss_and_grad: empty dataset");
  if (X.rows() != y.size()) throw DimensionError("loss_and_grad: X/y size mismatch");
  const int L = mlp.depth();
  grad.resize(L + 1);

  // forward, keeping pre-activations
  std::vector<Matrix> z(L), h(L + 1);
  h[0] = X;
  for (int l = 0; l < L; ++l) {
    z[l] = h[l] * mlp.W[l].transpose();
    h[l + 1] = apply_act(mlp.act, z[l]);
  }
  Vector f = h[L] * mlp.W.back().transpose();
  Vector e = 2.0 * (f - y);  // dLoss/df, total (not mean) square error
  double loss = 0.25 * e.squaredNorm();

  grad[L] = e.transpose() * h[L];  // 1 x N
  Matrix delta;                    // n x widths[l+1]
  for (int l = L - 1; l >= 0; --l) {
    Matrix upstream;
    if (l == L - 1) {
      upstream = e * mlp.W.back();  // n x N
    } else {
      upstream = delta * mlp.W[l + 1];
    }
    delta = upstream.cwiseProduct(
        z[l].unaryExpr([&mlp](double v) { return act_prime(mlp.act, v); }));
    grad[l] = delta.transpose() * h[l];
  }
  return loss;
}

void langevin_step(MLP& mlp, const TrainProtocol& protocol, const std::vector<Matrix>& grad,
                   uint64_t master_seed, uint64_t chain_seed, long epoch) {
  const double dt = protocol.dt;
  const double noise_sd = std::sqrt(2.0 * protocol.temperature * dt);
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    Matrix& w = mlp.W[l];
    w.noalias() -= dt * (protocol.gamma[l] * w + grad[l]);
    if (noise_sd > 0.0) {
      Rng rng(master_seed, chain_seed, (uint64_t)epoch, (uint64_t)l);
      for (long i = 0; i < w.rows(); ++i)
        for (long j = 0; j < w.cols(); ++j) w(i, j) += noise_sd * rng.gaussian();
    }
  }
}

double stability_indicator(const MLP& mlp, const TrainProtocol& protocol, const Matrix& X) {
  // crude curvature estimate: the readout-weight diagonal of the Hessian of
  // the total square loss is 2 sum_a h_i(x_a)^2
  Matrix h = X;
  for (int l = 0; l < mlp.depth(); ++l) h = apply_act(mlp.act, h * mlp.W[l].transpose());
  double curv = 2.0 * h.array().square().colwise().sum().maxCoeff();
  double gmax = 0.0;
  for (double g : protocol.gamma) gmax = std::max(gmax, g);
  return protocol.dt * (gmax + curv);
}

void advance_chain(ChainState& state, const TrainProtocol& protocol, const Matrix& X,
                   const Vector& y, const Matrix& probes, uint64_t master_seed, long until_epoch) {
  protocol.validate();
  state.mlp.validate();
  const long n_probes = probes.rows();
  if (state.probe_sum.size() != n_probes) {
    state.probe_sum = Vector::Zero(n_probes);
    state.series.assign((std::size_t)n_probes, {});
  }
  std::vector<Matrix> grad;
  for (long epoch = state.epoch; epoch < until_epoch; ++epoch) {
    double loss = loss_and_grad(state.mlp, X, y, grad);
    if (!std::isfinite(loss)) throw DivergenceError(epoch, "non-finite train loss");
    langevin_step(state.mlp, protocol, grad, master_seed, state.chain_seed, epoch);
    if (epoch % 64 == 0) {
      for (const auto& w : state.mlp.W)
        if (!w.allFinite()) throw DivergenceError(epoch, "non-finite weight");
    }
    long next = epoch + 1;
    if (next > protocol.burn_in) {
      Vector out = state.mlp.forward_batch(probes);
      state.probe_sum += out;
      ++state.probe_count;
      if ((next - protocol.burn_in) % protocol.thinning == 0) {
        for (long p = 0; p < n_probes; ++p) state.series[(std::size_t)p].push_back(out(p));
        state.loss_series.push_back(loss);
      }
    }
  }
  state.epoch = until_epoch;
}

void ChainState::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  os.write("NNSPCHK1", 8);
  Matrix meta(1, 6);
  meta << (double)chain_seed, (double)epoch, (double)probe_count, (double)mlp.W.size(),
      (double)(int)mlp.act, (double)loss_series.size();
  write_matrix(os, meta);
  Matrix widths(1, (long)mlp.widths.size());
  for (std::size_t i = 0; i < mlp.widths.size(); ++i) widths(0, (long)i) = (double)mlp.widths[i];
  write_matrix(os, widths);
  for (const auto& w : mlp.W) write_matrix(os, w);
  write_matrix(os, probe_sum.size() ? Matrix(probe_sum.transpose()) : Matrix(1, 0));
  Matrix s((long)series.size(), series.empty() ? 0 : (long)series[0].size());
  for (long p = 0; p < s.rows(); ++p)
    for (long t = 0; t < s.cols(); ++t) s(p, t) = series[(std::size_t)p][(std::size_t)t];
  write_matrix(os, s);
  Matrix ls(1, (long)loss_series.size());
  for (std::size_t i = 0; i < loss_series.size(); ++i) ls(0, (long)i) = loss_series[i];
  write_matrix(os, ls);
}

ChainState ChainState::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open for reading: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != "NNSPCHK1") throw Error("bad checkpoint magic");
  ChainState st;
  Matrix meta = read_matrix(is);
  st.chain_seed = (uint64_t)meta(0, 0);
  st.epoch = (long)meta(0, 1);
  st.probe_count = (long)meta(0, 2);
  long n_layers = (long)meta(0, 3);
  st.mlp.act = (Activation)(int)meta(0, 4);
  Matrix widths = read_matrix(is);
  for (long i = 0; i < widths.cols(); ++i) st.mlp.widths.push_back((long)widths(0, i));
  for (long l = 0; l < n_layers; ++l) st.mlp.W.push_back(read_matrix(is));
  Matrix ps = read_matrix(is);
  st.probe_sum = ps.row(0).transpose();
  Matrix s = read_matrix(is);
  st.series.resize((std::size_t)s.rows());
  for (long p = 0; p < s.rows(); ++p)
    for (long t = 0; t < s.cols(); ++t) st.series[(std::size_t)p].push_back(s(p, t));
  Matrix ls = read_matrix(is);
  for (long i = 0; i < ls.cols(); ++i) st.loss_series.push_back(ls(0, i));
  st.mlp.validate();
  return st;
}

ChainResult run_chain(const NetworkSpec& spec, long width, const TrainProtocol& protocol,
                      const Matrix& X, const Vector& y, const Matrix& probes,
                      uint64_t master_seed) {
  protocol.validate();
  ChainResult result;
  const long n_probes = probes.rows();
  result.probe_means = Vector::Zero(n_probes);
  for (uint64_t seed : protocol.seeds) {
    ChainState st;
    st.chain_seed = seed;
    st.mlp = mlp_from_prior(spec, X.cols(), width, master_seed, seed);
    if (seed == protocol.seeds.front()) {
      result.stability = stability_indicator(st.mlp, protocol, X);
      result.stability_warning = result.stability > 0.1;
    }
    advance_chain(st, protocol, X, y, probes, master_seed, protocol.n_epochs);
    Vector mean = st.probe_sum / (double)st.probe_count;
    result.per_seed_means.push_back(mean);
    result.probe_means += mean;
    Matrix series((long)(st.series.empty() ? 0 : st.series[0].size()), n_probes);
    for (long p = 0; p < n_probes; ++p)
      for (long t = 0; t < series.rows(); ++t) series(t, p) = st.series[(std::size_t)p][(std::size_t)t];
    result.per_seed_series.push_back(std::move(series));
    result.final_loss.push_back(st.loss_series.empty() ? 0.0 : st.loss_series.back());
    // advisory burn-in check: loss right after burn-in vs tail mean
    if (st.loss_series.size() >= 10) {
      std::size_t tail = st.loss_series.size() / 10;
      double tail_mean = 0.0;
      for (std::size_t i = st.loss_series.size() - tail; i < st.loss_series.size(); ++i)
        tail_mean += st.loss_series[i];
      tail_mean /= (double)tail;
      if (tail_mean > 0.0 && std::abs(st.loss_series.front() - tail_mean) > 0.05 * tail_mean)
        result.burn_in_ok = false;
    }
  }
  result.probe_means /= (double)protocol.seeds.size();
  return result;
}

AcfResult autocorrelation(const std::vector<double>& series, int max_lag) {
  const long L = (long)series.size();
  if (max_lag < 1) throw Error("autocorrelation: max_lag must be >= 1");
  if (L < 10L * max_lag)
    throw Error("autocorrelation: series length must be >= 10 * max_lag");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= (double)L;
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= (double)L;
  if (c0 <= 0.0) throw Error("autocorrelation: zero-variance series");
  AcfResult r;
  r.acf.resize((std::size_t)max_lag + 1);
  r.acf[0] = 1.0;
  for (int k = 1; k <= max_lag; ++k) {
    double c = 0.0;
    for (long t = 0; t + k < L; ++t) c += (series[(std::size_t)t] - mean) * (series[(std::size_t)(t + k)] - mean);
    r.acf[(std::size_t)k] = c / ((double)L * c0);  // biased estimator
  }
  // self-consistent window: smallest W with W >= 5 * tau(W)
  double tau = 1.0;
  int window = max_lag;
  for (int w = 1; w <= max_lag; ++w) {
    tau = 1.0;
    for (int k = 1; k <= w; ++k) tau += 2.0 * r.acf[(std::size_t)k];
    if ((double)w >= 5.0 * tau) {
      window = w;
      break;
    }
  }
  r.tau = std::max(tau, 1e-12);
  r.window = window;
  return r;
}

ErgodicityResult ergodicity_check(const Matrix& F, int min_blocks) {
  const long seeds = F.rows();
  const long epochs = F.cols();
  if (seeds < 1 || epochs < 2 * min_blocks)
    throw Error("ergodicity_check: need at least " + std::to_string(2 * min_blocks) +
                " epochs per seed");
  ErgodicityResult r;
  for (long bs = 1; epochs / bs >= min_blocks; bs *= 2) {
    // variance across single-seed block means, then /seeds for the pooled
    // estimator of the run-mean variance
    double sum = 0.0, sum2 = 0.0;
    long cnt = 0;
    for (long s = 0; s < seeds; ++s) {
      long nb = epochs / bs;
      for (long b = 0; b < nb; ++b) {
        double m = F.row(s).segment(b * bs, bs).mean();
        sum += m;
        sum2 += m * m;
        ++cnt;
      }
    }
    double mean = sum / (double)cnt;
    double var = (sum2 / (double)cnt - mean * mean) * (double)cnt / (double)(cnt - 1);
    r.block_sizes.push_back((double)bs);
    r.variances.push_back(var / (double)seeds);
  }
  if (r.block_sizes.size() < 3) throw Error("ergodicity_check: not enough block sizes");
  r.fit = loglog_fit(r.block_sizes, r.variances);
  return r;
}

}  // namespace nnsp

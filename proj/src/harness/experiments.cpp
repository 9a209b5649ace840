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

#include "harness/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "core/equivalent_kernel.hpp"
#include "core/io.hpp"
#include "harness/svg_plot.hpp"

namespace nnsp {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory: " + dir);
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string fmt(double v) { return format_double(v); }

std::vector<uint64_t> seed_list(long count, uint64_t base) {
  std::vector<uint64_t> seeds;
  for (long i = 0; i < count; ++i) seeds.push_back(base + (uint64_t)i);
  return seeds;
}

bool quick_mode(const Config& cfg) { return cfg.get_string("run.mode", "quick") != "full"; }

}  // namespace

std::vector<std::string> known_config_keys() {
  return {
      "run.mode",
      "run.master_seed",
      "dataset.d",
      "dataset.n_train",
      "dataset.n_test",
      "dataset.seed",
      "dataset.normalize",
      "network.depth",
      "network.activation",
      "network.weight_var",
      "network.readout_var",
      "network.width",
      "posterior.sigma2",
      "posterior.materialize_cap",
      "train.dt",
      "train.dt_target",
      "train.epochs",
      "train.burn_in",
      "train.thinning",
      "train.n_seeds",
      "train.min_time",
      "sweep.widths",
      "sweep.n_values",
      "sweep.draws",
      "sweep.n_test",
      "ek.samples",
      "ek.rank_cut",
      "ek.mc_nodes",
      "ek.n",
      "ek.draws",
      "ek.n_test",
      "ek.fwc_samples",
      "ek.fwc_anchors",
      "ergodicity.width",
      "ergodicity.epochs",
      "ergodicity.burn_in",
      "ergodicity.thinning",
      "ergodicity.n_seeds",
      "output.dir",
  };
}

void write_manifest(const Config& cfg, const std::string& out_dir, const std::string& experiment) {
  ensure_dir(out_dir);
  std::ofstream os(join(out_dir, "manifest.txt"), std::ios::binary);
  if (!os) throw Error("cannot write manifest in " + out_dir);
  char hex[32];
  snprintf(hex, sizeof(hex), "%016llx", (unsigned long long)cfg.hash());
  os << "experiment = " << experiment << "\n";
  os << "config_hash = " << hex << "\n";
  os << "format = csv-rfc4180, binary NNSPMAT1/NNSPT4v1 little-endian f64\n";
  os << "rng = counter-based splitmix64 streams keyed by (seed, stream, counter, tag)\n";
  os << "--- config ---\n";
  os << cfg.canonical();
}

NetworkSpec spec_from_config(const Config& cfg) {
  NetworkSpec spec;
  spec.depth = (int)cfg.get_long("network.depth", 1);
  spec.activation = activation_from_string(cfg.get_string("network.activation", "quadratic"));
  double wv = cfg.get_double("network.weight_var", 1.0);
  spec.weight_var.assign((std::size_t)spec.depth, wv);
  spec.readout_var = cfg.get_double("network.readout_var", 1.0);
  spec.validate();
  return spec;
}

InferenceResult run_inference(const NetworkSpec& spec, const Dataset& ds, double sigma2,
                              bool want_variance, int materialize_cap) {
  const long n = ds.train.n();
  const long t = ds.test.n();
  InputSet combined;
  combined.points.resize(n + t, ds.train.d());
  combined.points.topRows(n) = ds.train.points;
  combined.points.bottomRows(t) = ds.test.points;

  Matrix K_comb;
  std::shared_ptr<const UProvider> provider;
  if (spec.depth == 1) {
    KernelMatrix L = linear_kernel(combined, spec.weight_var[0]);
    switch (spec.activation) {
      case Activation::Linear: K_comb = spec.readout_var * L.values; break;
      case Activation::Quadratic: K_comb = quadratic_kernel(L, spec.readout_var).values; break;
      case Activation::Relu: K_comb = relu_kernel(L, spec.readout_var).values; break;
    }
    provider = std::make_shared<TwoLayerUProvider>(L.values, spec.activation, spec.readout_var);
  } else {
    if (n + t > materialize_cap)
      throw Error("run_inference: deep nets need n_train + n_test <= materialization cap");
    K_comb = deep_kernel_recursion(spec, combined, 40).back().values;
    provider = std::make_shared<MaterializedUProvider>(deep_U_recursion(spec, combined, 24));
  }

  KernelMatrix K_train;
  K_train.values = K_comb.topLeftCorner(n, n);
  Matrix k_cross = K_comb.topRightCorner(n, t);
  Vector k_star_diag = K_comb.bottomRightCorner(t, t).diagonal();

  TrainSolve ts = solve_train(K_train, ds.y_train, sigma2);
  InferenceResult result;
  result.gp = gp_posterior(ts, k_cross, k_star_diag);
  CumulantSlices slices(provider, (int)n, (int)t, materialize_cap);
  result.fwc = fwc_correct(ts, slices, k_cross, result.gp.mean, want_variance);
  result.jitter_used = ts.jitter_used;
  result.streamed = !slices.materialized();
  return result;
}

// ---------------------------------------------------------------------------

WidthSweepResult run_width_sweep(const Config& cfg, const std::string& out_dir) {
  cfg.check_keys(known_config_keys());
  ensure_dir(out_dir);
  const bool quick = quick_mode(cfg);

  const long d = cfg.get_long("dataset.d", quick ? 8 : 16);
  const long n_train = cfg.get_long("dataset.n_train", quick ? 48 : 110);
  const long n_test = cfg.get_long("dataset.n_test", 16);
  const uint64_t data_seed = cfg.get_u64("dataset.seed", 1);
  const uint64_t master = cfg.get_u64("run.master_seed", 7);
  // sigma2 = 1 speeds up mixing (the prior-restoring rates scale with the
  // temperature) and, measured against the dt-matched chains, leaves the
  // smallest fitted width already on the asymptotic 1/N^2 law
  const double sigma2 = cfg.get_double("posterior.sigma2", 1.0);
  NetworkSpec spec = spec_from_config(cfg);

  // the largest width must keep the 1/N^2 discrepancy above the seed-sampling
  // noise floor of the pooled chain mean, which caps the quick grid at 256
  std::vector<double> width_list = cfg.get_list(
      "sweep.widths", quick ? std::vector<double>{32, 64, 128, 256}
                            : std::vector<double>{128, 256, 512, 1024, 2048});
  if (width_list.size() < 4) throw Error("run_width_sweep: need at least 4 widths");
  const long epochs = cfg.get_long("train.epochs", quick ? 120000 : 2000000);
  const long burn_in = cfg.get_long("train.burn_in", epochs / 6);
  const long thinning = cfg.get_long("train.thinning", 100);
  const long n_seeds = cfg.get_long("train.n_seeds", 8);
  const double dt_target = cfg.get_double("train.dt_target", 0.05);
  const double dt_cap = cfg.get_double("train.dt", 1e-3);

  // raw quadratic targets are far above the prior function scale and push the
  // chains out of the perturbative regime; normalize by default
  Dataset ds = gen_quadratic_dataset(d, n_train, n_test, data_seed,
                                     cfg.get_bool("dataset.normalize", true));

  // GP and the O(1) corrections are width independent; compute once.
  InferenceResult inf = run_inference(spec, ds, sigma2, true);

  WidthSweepResult result;
  for (double wv : width_list) {
    const long N = (long)wv;
    WidthSweepRow row;
    row.width = N;

    TrainProtocol proto = protocol_for_posterior(spec, d, N, sigma2, dt_cap, epochs, burn_in,
                                                 seed_list(n_seeds, 100));
    proto.thinning = thinning;
    {
      // deterministic per-width step size from the stability indicator of a
      // prior draw
      MLP pilot = mlp_from_prior(spec, d, N, master, proto.seeds.front());
      double indicator = stability_indicator(pilot, proto, ds.train.points) / proto.dt;
      proto.dt = std::min(dt_cap, dt_target / indicator);
    }
    row.dt = proto.dt;
    // dt shrinks with width while the slow-mode correlation time is fixed, so
    // hold the integration time per seed at least at min_time or the pooled
    // mean at the stiff widths drowns in sampling noise
    const double min_time = cfg.get_double("train.min_time", quick ? 2.0 : 0.0);
    if (min_time > 0.0 && proto.dt * (double)epochs < min_time) {
      proto.n_epochs = (long)std::ceil(min_time / proto.dt);
      proto.burn_in = cfg.has("train.burn_in") ? burn_in : proto.n_epochs / 6;
    }

    ChainResult chains;
    try {
      chains = run_chain(spec, N, proto, ds.train.points, ds.y_train, ds.test.points, master);
    } catch (const DivergenceError&) {
      row.diverged = true;
      result.rows.push_back(row);
      continue;
    }

    const Vector& f_dnn = chains.probe_means;
    double norm = f_dnn.squaredNorm() / (double)n_test;
    if (norm <= 0.0) norm = 1.0;

    // sampling variance of the pooled mean, estimated across seeds
    double bias = 0.0;
    if (n_seeds > 1) {
      for (long t = 0; t < n_test; ++t) {
        double var = 0.0;
        for (const auto& m : chains.per_seed_means) {
          double dvt = m(t) - f_dnn(t);
          var += dvt * dvt;
        }
        bias += var / (double)((n_seeds - 1) * n_seeds);
      }
      bias /= (double)n_test * norm;
    }
    row.bias = bias;

    Posterior combined = combine_posterior(inf.gp, inf.fwc, (double)N);
    row.gp_dnn_mse = (f_dnn - inf.gp.mean).squaredNorm() / (double)n_test / norm;
    row.fwc_dnn_mse = (f_dnn - combined.mean).squaredNorm() / (double)n_test / norm;
    row.dnn_target_mse = (f_dnn - ds.y_test).squaredNorm() / (double)n_test / norm;
    row.gp_dnn_mse_debiased = std::max(row.gp_dnn_mse - bias, 1e-16);
    row.fwc_dnn_mse_debiased = std::max(row.fwc_dnn_mse - bias, 1e-16);
    result.rows.push_back(row);
  }

  // slope over the largest-width half of the non-diverged rows
  std::vector<double> xs, ys;
  std::vector<const WidthSweepRow*> ok;
  for (const auto& r : result.rows)
    if (!r.diverged) ok.push_back(&r);
  for (std::size_t i = ok.size() / 2 > 0 ? ok.size() - ok.size() / 2 - 1 : 0; i < ok.size(); ++i) {
    xs.push_back((double)ok[i]->width);
    ys.push_back(ok[i]->gp_dnn_mse_debiased);
  }
  if (xs.size() >= 2) result.gp_dnn_slope = loglog_fit(xs, ys);
  if (!ok.empty()) {
    const WidthSweepRow* last = ok.back();
    result.fwc_over_gp_at_largest =
        last->fwc_dnn_mse_debiased / std::max(last->gp_dnn_mse_debiased, 1e-300);
    for (const auto* r : ok)
      if (r->fwc_dnn_mse_debiased >= r->gp_dnn_mse_debiased) result.crossover_seen = true;
  }

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : result.rows)
    rows.push_back({std::to_string(r.width), fmt(r.dt), fmt(r.gp_dnn_mse),
                    fmt(r.gp_dnn_mse_debiased), fmt(r.fwc_dnn_mse), fmt(r.fwc_dnn_mse_debiased),
                    fmt(r.dnn_target_mse), fmt(r.bias), r.diverged ? "1" : "0"});
  write_csv(join(out_dir, "width_sweep.csv"),
            {"width", "dt", "gp_dnn_mse", "gp_dnn_mse_debiased", "fwc_dnn_mse",
             "fwc_dnn_mse_debiased", "dnn_target_mse", "bias", "diverged"},
            rows);
  write_csv(join(out_dir, "width_sweep_fit.csv"),
            {"quantity", "slope", "slope_se", "points"},
            {{"gp_dnn_mse_debiased", fmt(result.gp_dnn_slope.slope),
              fmt(result.gp_dnn_slope.slope_se), std::to_string(result.gp_dnn_slope.points)}});
  {
    PlotSeries gp{"gp-dnn", {}, {}}, fw{"fwc-dnn", {}, {}};
    for (const auto& r : result.rows) {
      if (r.diverged) continue;
      gp.x.push_back((double)r.width);
      gp.y.push_back(r.gp_dnn_mse_debiased);
      fw.x.push_back((double)r.width);
      fw.y.push_back(r.fwc_dnn_mse_debiased);
    }
    write_loglog_svg(join(out_dir, "width_sweep.svg"), "relative MSE vs width", "N", "MSE",
                     {gp, fw},
                     {{result.gp_dnn_slope.slope, result.gp_dnn_slope.intercept}});
  }
  write_manifest(cfg, out_dir, "sweep-width");
  return result;
}

NSweepResult run_n_sweep(const Config& cfg, const std::string& out_dir) {
  cfg.check_keys(known_config_keys());
  ensure_dir(out_dir);
  const bool quick = quick_mode(cfg);

  // d = 4 keeps the learnable parameter count d(d+1)/2 well below the n grid,
  // so the largest decade sits in the asymptotic 1/n tail
  const long d = cfg.get_long("dataset.d", 4);
  const long n_test = cfg.get_long("sweep.n_test", 100);
  const long draws = cfg.get_long("sweep.draws", quick ? 2 : 8);
  const uint64_t data_seed = cfg.get_u64("dataset.seed", 1);
  const double sigma2 = cfg.get_double("posterior.sigma2", 0.2);
  const int cap = (int)cfg.get_long("posterior.materialize_cap", kDefaultMaterializeCap);
  NetworkSpec spec = spec_from_config(cfg);

  std::vector<double> n_list = cfg.get_list(
      "sweep.n_values", quick ? std::vector<double>{16, 32, 64, 128, 256}
                              : std::vector<double>{16, 32, 64, 128, 256, 512});
  double n_max = 0.0;
  for (double v : n_list) n_max = std::max(n_max, v);

  NSweepResult result;
  for (double nv : n_list) {
    const long n = (long)nv;
    NSweepRow row;
    row.n = n;
    double fu_sum = 0.0, rmse_sum = 0.0;
    for (long draw = 0; draw < draws; ++draw) {
      Dataset ds = gen_quadratic_dataset(d, n, n_test, data_seed, true);
      // redraw the train inputs per draw, keeping the target and test set
      if (draw > 0) {
        ds.train = sphere_inputs(d, n, data_seed, 1000 + (uint64_t)draw);
        for (long i = 0; i < n; ++i)
          ds.y_train(i) = ds.target(ds.train.points.row(i).transpose());
      }
      InferenceResult inf = run_inference(spec, ds, sigma2, false, cap);
      row.streamed = row.streamed || inf.streamed;
      fu_sum += inf.fwc.mean.cwiseAbs().mean();
      rmse_sum += std::sqrt((inf.gp.mean - ds.y_test).squaredNorm() / (double)n_test);
    }
    row.fu_abs_mean = fu_sum / (double)draws;
    row.gp_rmse = rmse_sum / (double)draws;
    result.rows.push_back(row);
  }

  std::vector<double> xs, fu, rm;
  for (const auto& r : result.rows) {
    if ((double)r.n < n_max / 10.0) continue;  // largest decade only
    xs.push_back((double)r.n);
    fu.push_back(r.fu_abs_mean);
    rm.push_back(r.gp_rmse);
  }
  result.fu_slope = loglog_fit(xs, fu);
  result.gp_slope = loglog_fit(xs, rm);

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : result.rows)
    rows.push_back({std::to_string(r.n), fmt(r.fu_abs_mean), fmt(r.gp_rmse),
                    r.streamed ? "1" : "0"});
  write_csv(join(out_dir, "n_sweep.csv"), {"n", "fu_abs_mean", "gp_rmse", "streamed"}, rows);
  write_csv(join(out_dir, "n_sweep_fit.csv"), {"quantity", "slope", "slope_se", "points"},
            {{"fu_abs_mean", fmt(result.fu_slope.slope), fmt(result.fu_slope.slope_se),
              std::to_string(result.fu_slope.points)},
             {"gp_rmse", fmt(result.gp_slope.slope), fmt(result.gp_slope.slope_se),
              std::to_string(result.gp_slope.points)}});
  {
    PlotSeries a{"|fU| mean", {}, {}}, b{"gp rmse", {}, {}};
    for (const auto& r : result.rows) {
      a.x.push_back((double)r.n);
      a.y.push_back(r.fu_abs_mean);
      b.x.push_back((double)r.n);
      b.y.push_back(r.gp_rmse);
    }
    write_loglog_svg(join(out_dir, "n_sweep.svg"), "FWC and GP error vs n", "n", "value", {a, b},
                     {{result.fu_slope.slope, result.fu_slope.intercept},
                      {result.gp_slope.slope, result.gp_slope.intercept}});
  }
  write_manifest(cfg, out_dir, "sweep-n");
  return result;
}

EkCheckResult run_ek_check(const Config& cfg, const std::string& out_dir) {
  cfg.check_keys(known_config_keys());
  ensure_dir(out_dir);
  const bool quick = quick_mode(cfg);

  const long d = cfg.get_long("dataset.d", 4);
  const long n = cfg.get_long("ek.n", 512);
  const long draws = cfg.get_long("ek.draws", 20);
  const long n_test = cfg.get_long("ek.n_test", 100);
  const int M = (int)cfg.get_long("ek.samples", quick ? 1024 : kDefaultSpectrumSamples);
  const double rank_cut = cfg.get_double("ek.rank_cut", kDefaultRankCut);
  const double sigma2 = cfg.get_double("posterior.sigma2", 0.2);
  const uint64_t data_seed = cfg.get_u64("dataset.seed", 1);
  NetworkSpec spec = spec_from_config(cfg);
  if (spec.depth != 1) throw Error("run_ek_check: depth-1 networks only");

  Dataset ds = gen_quadratic_dataset(d, n, n_test, data_seed, true);
  ScalarFn g = [&ds](const Eigen::Ref<const Vector>& x) { return ds.target(x); };
  KernelFn kfn = [&spec, d](const Eigen::Ref<const Vector>& a,
                            const Eigen::Ref<const Vector>& b) {
    return nngp_kernel_entry(spec, a, b, d);
  };
  SpectralModel model =
      build_spectrum(kfn, sphere_sampler(d, std::sqrt((double)d)), d, M, data_seed + 17, rank_cut);
  EkPredictor pred = make_ek_predictor(model, g, (double)n, sigma2);

  // dataset-averaged GP posterior at the fixed test points
  Vector avg_gp = Vector::Zero(n_test);
  for (long draw = 0; draw < draws; ++draw) {
    Dataset dd = ds;
    dd.train = sphere_inputs(d, n, data_seed, 2000 + (uint64_t)draw);
    for (long i = 0; i < n; ++i) dd.y_train(i) = dd.target(dd.train.points.row(i).transpose());
    InputSet combined;
    combined.points.resize(n + n_test, d);
    combined.points.topRows(n) = dd.train.points;
    combined.points.bottomRows(n_test) = dd.test.points;
    KernelMatrix L = linear_kernel(combined, spec.weight_var[0]);
    Matrix K = quadratic_kernel(L, spec.readout_var).values;
    if (spec.activation == Activation::Relu) K = relu_kernel(L, spec.readout_var).values;
    else if (spec.activation == Activation::Linear) K = spec.readout_var * L.values;
    KernelMatrix K_train;
    K_train.values = K.topLeftCorner(n, n);
    TrainSolve ts = solve_train(K_train, dd.y_train, sigma2);
    avg_gp += gp_posterior(ts, K.topRightCorner(n, n_test),
                           K.bottomRightCorner(n_test, n_test).diagonal())
                  .mean;
  }
  avg_gp /= (double)draws;

  Vector ek(n_test);
  for (long t = 0; t < n_test; ++t) ek(t) = pred.mean(ds.test.points.row(t).transpose());

  EkCheckResult result;
  result.filters = pred.filter;
  double num = (ek - avg_gp).squaredNorm();
  double den = avg_gp.squaredNorm();
  result.rel_rmse = std::sqrt(num / std::max(den, 1e-300));

  // n-scaling of the EK finite-width correction at a few test points; the
  // quadratic-activation U has polynomial slot sections, so the span-exact
  // evaluator applies and the 1/n decay is not buried under MC noise
  {
    const int fwc_M = (int)cfg.get_long("ek.fwc_samples", 512);
    const int fwc_anchors = (int)cfg.get_long("ek.fwc_anchors", 24);
    SpectralModel small = build_spectrum(kfn, sphere_sampler(d, std::sqrt((double)d)), d,
                                         std::max(fwc_M, 256), data_seed + 23, rank_cut);
    QuadPointFn ufn = [&spec, d](const Eigen::Ref<const Vector>& x1,
                                 const Eigen::Ref<const Vector>& x2,
                                 const Eigen::Ref<const Vector>& x3,
                                 const Eigen::Ref<const Vector>& x4) {
      double sw = spec.weight_var[0] / (double)d;
      Eigen::Matrix4d L4;
      const Eigen::Ref<const Vector>* p[4] = {&x1, &x2, &x3, &x4};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b <= a; ++b) {
          L4(a, b) = sw * p[a]->dot(*p[b]);
          L4(b, a) = L4(a, b);
        }
      return assemble_U_quadratic(L4, spec.readout_var);
    };
    std::vector<double> ns = {64, 128, 256, 512, 1024};
    std::vector<double> amps;
    std::vector<std::vector<std::string>> fwc_rows;
    for (double nn : ns) {
      double amp = 0.0;
      const long probes = std::min<long>(4, n_test);
      for (long t = 0; t < probes; ++t)
        amp += std::abs(ek_fwc_mean_span(small, ufn, g, nn, sigma2,
                                         ds.test.points.row(t).transpose(), fwc_anchors));
      amp /= (double)probes;
      amps.push_back(amp);
      fwc_rows.push_back({fmt(nn), fmt(amp)});
    }
    result.fwc_slope = loglog_fit(ns, amps).slope;
    write_csv(join(out_dir, "ek_fwc_scaling.csv"), {"n", "ek_fwc_abs_mean"}, fwc_rows);
  }

  std::vector<std::vector<std::string>> spec_rows;
  for (int i = 0; i < model.rank(); ++i)
    spec_rows.push_back({std::to_string(i), fmt(model.eigenvalues(i)), fmt(result.filters(i))});
  write_csv(join(out_dir, "ek_spectrum.csv"), {"mode", "lambda", "filter"}, spec_rows);
  std::vector<std::vector<std::string>> pred_rows;
  for (long t = 0; t < n_test; ++t)
    pred_rows.push_back({std::to_string(t), fmt(ek(t)), fmt(avg_gp(t)),
                         fmt(ds.y_test(t))});
  write_csv(join(out_dir, "ek_predictions.csv"), {"id", "ek_mean", "avg_gp_mean", "target"},
            pred_rows);
  write_manifest(cfg, out_dir, "ek");
  return result;
}

ErgodicityRunResult run_ergodicity(const Config& cfg, const std::string& out_dir) {
  cfg.check_keys(known_config_keys());
  ensure_dir(out_dir);

  // The slowest output mode decays at the bare prior-restoring rate of the
  // first layer, T d / sw2, so the thinned series only decorrelates if
  // thinning * dt clears that timescale. The defaults below pick a small hot
  // relu net where that happens within a run of a couple of minutes.
  Config local = cfg;
  if (!cfg.has("network.activation")) local.set("network.activation", "relu");
  const long d = local.get_long("dataset.d", 16);
  const long n_train = local.get_long("dataset.n_train", 32);
  const long width = local.get_long("ergodicity.width", 64);
  const long epochs = local.get_long("ergodicity.epochs", 110000);
  const long burn_in = local.get_long("ergodicity.burn_in", 4000);
  const long thinning = local.get_long("ergodicity.thinning", 50);
  const long n_seeds = local.get_long("ergodicity.n_seeds", 8);
  const double sigma2 = local.get_double("posterior.sigma2", 1.0);
  const uint64_t master = local.get_u64("run.master_seed", 7);
  NetworkSpec spec = spec_from_config(local);

  Dataset ds = gen_quadratic_dataset(d, n_train, 4, local.get_u64("dataset.seed", 1), true);
  TrainProtocol proto = protocol_for_posterior(spec, d, width, sigma2, 1e-3, epochs, burn_in,
                                               seed_list(n_seeds, 300));
  proto.thinning = thinning;
  {
    MLP pilot = mlp_from_prior(spec, d, width, master, proto.seeds.front());
    double indicator = stability_indicator(pilot, proto, ds.train.points) / proto.dt;
    // relu readout curvature is far less coherent than the quadratic one, so
    // the indicator underestimates the top eigenvalue less and a larger
    // target still leaves a ~3x stability margin
    proto.dt = std::min(proto.dt, local.get_double("train.dt_target", 0.2) / indicator);
  }
  ChainResult chains =
      run_chain(spec, width, proto, ds.train.points, ds.y_train, ds.test.points, master);

  const long seeds = (long)chains.per_seed_series.size();
  const long kept = chains.per_seed_series.front().rows();
  const long n_probes = chains.per_seed_series.front().cols();

  // average the block-variance curves over probe points before fitting;
  // a single probe leaves the largest blocks too noisy
  ErgodicityRunResult result;
  std::vector<double> avg;
  for (long p = 0; p < n_probes; ++p) {
    Matrix F(seeds, kept);
    for (long s = 0; s < seeds; ++s) F.row(s) = chains.per_seed_series[(std::size_t)s].col(p).transpose();
    ErgodicityResult one = ergodicity_check(F);
    if (avg.empty()) {
      avg.assign(one.variances.size(), 0.0);
      result.diag.block_sizes = one.block_sizes;
    }
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += one.variances[i] / (double)n_probes;
  }
  result.diag.variances = avg;
  result.diag.fit = loglog_fit(result.diag.block_sizes, result.diag.variances);
  {
    std::vector<double> series(kept);
    for (long t = 0; t < kept; ++t)
      series[(std::size_t)t] = chains.per_seed_series.front()(t, 0);
    result.tau = autocorrelation(series, (int)(kept / 10)).tau;
  }

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < result.diag.block_sizes.size(); ++i)
    rows.push_back({fmt(result.diag.block_sizes[i]), fmt(result.diag.variances[i])});
  write_csv(join(out_dir, "ergodicity.csv"), {"block_size", "variance_of_mean"}, rows);
  write_csv(join(out_dir, "ergodicity_fit.csv"), {"slope", "slope_se", "tau"},
            {{fmt(result.diag.fit.slope), fmt(result.diag.fit.slope_se), fmt(result.tau)}});
  {
    PlotSeries s{"var of mean", result.diag.block_sizes, result.diag.variances};
    write_loglog_svg(join(out_dir, "ergodicity.svg"), "block variance", "block size", "variance",
                     {s}, {{result.diag.fit.slope, result.diag.fit.intercept}});
  }
  write_manifest(cfg, out_dir, "ergodicity");
  return result;
}

InferenceResult run_single_predict(const Config& cfg, const std::string& out_dir) {
  cfg.check_keys(known_config_keys());
  ensure_dir(out_dir);
  const long d = cfg.get_long("dataset.d", 8);
  const long n_train = cfg.get_long("dataset.n_train", 64);
  const long n_test = cfg.get_long("dataset.n_test", 16);
  const double sigma2 = cfg.get_double("posterior.sigma2", 0.2);
  const double width = (double)cfg.get_long("network.width", 512);
  NetworkSpec spec = spec_from_config(cfg);
  Dataset ds = gen_quadratic_dataset(d, n_train, n_test, cfg.get_u64("dataset.seed", 1),
                                     cfg.get_bool("dataset.normalize", false));
  InferenceResult inf = run_inference(spec, ds, sigma2, true,
                                      (int)cfg.get_long("posterior.materialize_cap",
                                                        kDefaultMaterializeCap));
  Posterior combined = combine_posterior(inf.gp, inf.fwc, width);
  std::vector<std::vector<std::string>> rows;
  for (long t = 0; t < n_test; ++t)
    rows.push_back({std::to_string(t), fmt(inf.gp.mean(t)), fmt(inf.gp.variance(t)),
                    fmt(inf.fwc.mean(t)), fmt(inf.fwc.variance(t)), fmt(combined.mean(t)),
                    fmt(combined.variance(t)), fmt(ds.y_test(t))});
  write_csv(join(out_dir, "posterior.csv"),
            {"id", "gp_mean", "gp_var", "fwc_mean", "fwc_var", "combined_mean", "combined_var",
             "target"},
            rows);
  write_manifest(cfg, out_dir, "fwc-predict");
  return inf;
}

void run_kernel_dump(const Config& cfg, const std::string& out_dir) {
  cfg.check_keys(known_config_keys());
  ensure_dir(out_dir);
  const long d = cfg.get_long("dataset.d", 8);
  const long n_train = cfg.get_long("dataset.n_train", 64);
  NetworkSpec spec = spec_from_config(cfg);
  Dataset ds = gen_quadratic_dataset(d, n_train, 1, cfg.get_u64("dataset.seed", 1), false);
  KernelMatrix K = nngp_kernel(spec, ds.train);
  save_matrix(join(out_dir, "kernel.bin"), K.values);
  if (n_train <= 128) {
    std::vector<std::string> header;
    for (long j = 0; j < n_train; ++j) header.push_back("k" + std::to_string(j));
    std::vector<std::vector<std::string>> rows;
    for (long i = 0; i < n_train; ++i) {
      std::vector<std::string> row;
      for (long j = 0; j < n_train; ++j) row.push_back(fmt(K.values(i, j)));
      rows.push_back(row);
    }
    write_csv(join(out_dir, "kernel.csv"), header, rows);
  }
  write_manifest(cfg, out_dir, "kernel");
}

void run_cumulant_dump(const Config& cfg, const std::string& out_dir) {
  cfg.check_keys(known_config_keys());
  ensure_dir(out_dir);
  const long d = cfg.get_long("dataset.d", 8);
  const long n_train = cfg.get_long("dataset.n_train", 16);
  const int cap = (int)cfg.get_long("posterior.materialize_cap", kDefaultMaterializeCap);
  if (n_train > cap) throw Error("cumulant dump: n_train above materialization cap");
  NetworkSpec spec = spec_from_config(cfg);
  Dataset ds = gen_quadratic_dataset(d, n_train, 1, cfg.get_u64("dataset.seed", 1), false);

  SymTensor4 U((int)n_train);
  if (spec.depth == 1) {
    KernelMatrix L = linear_kernel(ds.train, spec.weight_var[0]);
    TwoLayerUProvider provider(L.values, spec.activation, spec.readout_var);
    std::size_t r = 0;
    for (int i = 0; i < n_train; ++i)
      for (int j = i; j < (int)n_train; ++j)
        for (int k = j; k < (int)n_train; ++k)
          for (int l = k; l < (int)n_train; ++l) U.at_sorted(r++) = provider.entry(i, j, k, l);
  } else {
    U = deep_U_recursion(spec, ds.train, 24);
  }
  {
    std::ofstream os(join(out_dir, "u4.bin"), std::ios::binary);
    if (!os) throw Error("cannot write u4.bin");
    write_tensor(os, U);
  }
  write_manifest(cfg, out_dir, "cumulant");
}

ChainResult run_train(const Config& cfg, const std::string& out_dir) {
  cfg.check_keys(known_config_keys());
  ensure_dir(out_dir);
  const long d = cfg.get_long("dataset.d", 8);
  const long n_train = cfg.get_long("dataset.n_train", 48);
  const long n_test = cfg.get_long("dataset.n_test", 8);
  const long width = cfg.get_long("network.width", 256);
  const double sigma2 = cfg.get_double("posterior.sigma2", 0.2);
  const long epochs = cfg.get_long("train.epochs", 50000);
  const long burn_in = cfg.get_long("train.burn_in", epochs / 6);
  const uint64_t master = cfg.get_u64("run.master_seed", 7);
  NetworkSpec spec = spec_from_config(cfg);
  Dataset ds = gen_quadratic_dataset(d, n_train, n_test, cfg.get_u64("dataset.seed", 1), false);
  TrainProtocol proto = protocol_for_posterior(
      spec, d, width, sigma2, cfg.get_double("train.dt", 1e-3), epochs, burn_in,
      seed_list(cfg.get_long("train.n_seeds", 4), 100));
  proto.thinning = cfg.get_long("train.thinning", 100);
  {
    MLP pilot = mlp_from_prior(spec, d, width, master, proto.seeds.front());
    double indicator = stability_indicator(pilot, proto, ds.train.points) / proto.dt;
    proto.dt = std::min(proto.dt, cfg.get_double("train.dt_target", 0.05) / indicator);
  }
  ChainResult chains =
      run_chain(spec, width, proto, ds.train.points, ds.y_train, ds.test.points, master);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t s = 0; s < chains.per_seed_series.size(); ++s) {
    const Matrix& ser = chains.per_seed_series[s];
    for (long t = 0; t < ser.rows(); ++t)
      for (long p = 0; p < ser.cols(); ++p)
        rows.push_back({std::to_string(burn_in + (t + 1) * proto.thinning), std::to_string(p),
                        fmt(ser(t, p)), std::to_string(proto.seeds[s])});
  }
  write_csv(join(out_dir, "probe_series.csv"), {"epoch", "probe_id", "value", "seed"}, rows);
  std::vector<std::vector<std::string>> mrows;
  for (long p = 0; p < n_test; ++p)
    mrows.push_back({std::to_string(p), fmt(chains.probe_means(p)), fmt(ds.y_test(p))});
  write_csv(join(out_dir, "probe_means.csv"), {"probe_id", "mean_output", "target"}, mrows);

  // save a resumable checkpoint of the first seed's chain
  {
    ChainState st;
    st.chain_seed = proto.seeds.front();
    st.mlp = mlp_from_prior(spec, d, width, master, st.chain_seed);
    advance_chain(st, proto, ds.train.points, ds.y_train, ds.test.points, master,
                  std::min<long>(proto.n_epochs, burn_in + 1000));
    st.save(join(out_dir, "chain_state.bin"));
  }
  write_manifest(cfg, out_dir, "train");
  return chains;
}

}  // namespace nnsp

#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "core/kernels.hpp"
#include "core/langevin.hpp"
#include "core/rng.hpp"
#include "doctest.h"

using namespace nnsp;

namespace {

Matrix random_matrix(long r, long c, Rng& rng) {
  Matrix m(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) m(i, j) = rng.gaussian();
  return m;
}

MLP tiny_mlp(Activation act, std::vector<long> widths, uint64_t seed) {
  MLP mlp;
  mlp.widths = std::move(widths);
  mlp.act = act;
  Rng rng(seed);
  for (int l = 0; l < mlp.depth(); ++l)
    mlp.W.push_back(0.3 * random_matrix(mlp.widths[(std::size_t)l + 1],
                                        mlp.widths[(std::size_t)l], rng));
  mlp.W.push_back(0.3 * random_matrix(1, mlp.widths.back(), rng));
  return mlp;
}

double sample_se(const std::vector<double>& block_means) {
  double m = std::accumulate(block_means.begin(), block_means.end(), 0.0) /
             (double)block_means.size();
  double v = 0.0;
  for (double b : block_means) v += (b - m) * (b - m);
  v /= (double)(block_means.size() - 1);
  return std::sqrt(v / (double)block_means.size());
}

}  // namespace

TEST_CASE("prior draws match the NNGP output variance") {
  NetworkSpec spec;
  spec.depth = 1;
  spec.activation = Activation::Quadratic;
  spec.weight_var = {1.0};
  spec.readout_var = 0.8;
  long d = 4, width = 30;
  Rng rng(1);
  Vector x(d);
  for (long j = 0; j < d; ++j) x(j) = rng.gaussian();
  InputSet set;
  set.points = x.transpose();
  double k_star = nngp_kernel(spec, set).values(0, 0);
  double sum2 = 0.0;
  int draws = 4000;
  for (int c = 0; c < draws; ++c) {
    MLP mlp = mlp_from_prior(spec, d, width, 99, (uint64_t)c);
    double f = mlp.forward(x);
    sum2 += f * f;
  }
  // second moment of the output is width-exact, so only MC error remains
  double second = sum2 / draws;
  CHECK(std::abs(second - k_star) < 6.0 * k_star * std::sqrt(2.0 / (double)draws) * 2.0);
}

TEST_CASE("hyperparameter map round-trips the prior variances") {
  NetworkSpec spec;
  spec.depth = 2;
  spec.activation = Activation::Relu;
  spec.weight_var = {1.5, 0.9};
  spec.readout_var = 0.7;
  TrainProtocol protocol = protocol_for_posterior(spec, 6, 40, 0.2, 1e-3, 1000, 100, {0});
  CHECK(protocol.temperature == doctest::Approx(0.4));
  CHECK(protocol.sigma2() == doctest::Approx(0.2));
  // per-weight variances: T / gamma_l = varsigma_l^2 / fan_in
  std::vector<double> vars = implied_weight_vars(protocol);
  REQUIRE(vars.size() == 3);
  CHECK(vars[0] == doctest::Approx(1.5 / 6.0).epsilon(1e-12));
  CHECK(vars[1] == doctest::Approx(0.9 / 40.0).epsilon(1e-12));
  CHECK(vars[2] == doctest::Approx(0.7 / 40.0).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(2);
  for (Activation act : {Activation::Linear, Activation::Quadratic, Activation::Relu}) {
    MLP mlp = tiny_mlp(act, {3, 4, 2}, 5 + (uint64_t)(int)act);
    Matrix X = random_matrix(5, 3, rng);
    Vector y(5);
    for (int i = 0; i < 5; ++i) y(i) = rng.gaussian();
    std::vector<Matrix> grad;
    double loss = loss_and_grad(mlp, X, y, grad);
    CHECK(loss > 0.0);
    REQUIRE(grad.size() == mlp.W.size());
    double h = 1e-6;
    for (std::size_t l = 0; l < mlp.W.size(); ++l) {
      for (long i = 0; i < mlp.W[l].rows(); ++i)
        for (long j = 0; j < mlp.W[l].cols(); ++j) {
          MLP plus = mlp, minus = mlp;
          plus.W[l](i, j) += h;
          minus.W[l](i, j) -= h;
          std::vector<Matrix> scratch;
          double fd = (loss_and_grad(plus, X, y, scratch) -
                       loss_and_grad(minus, X, y, scratch)) / (2.0 * h);
          double scale = std::abs(fd) + std::abs(grad[l](i, j)) + 1e-4;
          CAPTURE((int)act);
          CHECK(std::abs(grad[l](i, j) - fd) / scale < 1e-5);
        }
    }
  }
}

TEST_CASE("zero-temperature chain solves the decayed quadratic problem") {
  // hand-driven 1-parameter problem: loss a (w - b)^2 per weight
  MLP mlp;
  mlp.widths = {1, 1};
  mlp.act = Activation::Linear;
  mlp.W = {Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, -2.0)};
  TrainProtocol protocol;
  protocol.dt = 0.01;
  protocol.temperature = 0.0;
  protocol.gamma = {1.0, 1.0};
  double a = 0.5, b = 2.0;
  for (long epoch = 0; epoch < 5000; ++epoch) {
    std::vector<Matrix> grad = {2.0 * a * (mlp.W[0].array() - b).matrix(),
                                2.0 * a * (mlp.W[1].array() - b).matrix()};
    langevin_step(mlp, protocol, grad, 7, 0, epoch);
  }
  double w_star = 2.0 * a * b / (protocol.gamma[0] + 2.0 * a);
  CHECK(mlp.W[0](0, 0) == doctest::Approx(w_star).epsilon(1e-8));
  CHECK(mlp.W[1](0, 0) == doctest::Approx(w_star).epsilon(1e-8));
}

TEST_CASE("chain on a quadratic problem reaches the OU stationary variance") {
  MLP mlp;
  mlp.widths = {1, 1};
  mlp.act = Activation::Linear;
  mlp.W = {Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  TrainProtocol protocol;
  protocol.dt = 0.01;
  protocol.temperature = 0.4;
  protocol.gamma = {1.0, 1.0};
  double a = 0.5;
  double rho = 1.0 - (protocol.gamma[0] + 2.0 * a) * protocol.dt;
  double var_exact = 2.0 * protocol.temperature * protocol.dt / (1.0 - rho * rho);

  long burn = 20000, epochs = 320000, block = 10000;
  std::vector<double> blocks;
  double acc = 0.0;
  long count = 0;
  for (long epoch = 0; epoch < epochs; ++epoch) {
    std::vector<Matrix> grad = {2.0 * a * mlp.W[0], 2.0 * a * mlp.W[1]};
    langevin_step(mlp, protocol, grad, 11, 0, epoch);
    if (epoch >= burn) {
      acc += 0.5 * (mlp.W[0](0, 0) * mlp.W[0](0, 0) + mlp.W[1](0, 0) * mlp.W[1](0, 0));
      if (++count == block) {
        blocks.push_back(acc / (double)block);
        acc = 0.0;
        count = 0;
      }
    }
  }
  double est = std::accumulate(blocks.begin(), blocks.end(), 0.0) / (double)blocks.size();
  double se = sample_se(blocks);
  CAPTURE(est);
  CAPTURE(var_exact);
  CAPTURE(se);
  CHECK(std::abs(est - var_exact) < 4.0 * se);
}

TEST_CASE("no-data stationary weight variance matches T over gamma") {
  NetworkSpec spec;
  spec.depth = 1;
  spec.activation = Activation::Quadratic;
  spec.weight_var = {1.3};
  spec.readout_var = 0.6;
  long d = 3, width = 40;
  // dt small enough that the gamma dt / 2 discretization bias is far below
  // the Monte Carlo error even for the stiff readout layer
  TrainProtocol protocol = protocol_for_posterior(spec, d, width, 0.2, 5e-4, 100000, 2000, {0});
  // zero input and target: the gradient vanishes identically and the chain
  // samples the pure decay + noise process, whose stationary law is the prior
  Matrix X = Matrix::Zero(1, d);
  Vector y = Vector::Zero(1);
  Matrix probes = Matrix::Zero(1, d);
  ChainState st;
  st.chain_seed = 3;
  st.mlp = mlp_from_prior(spec, d, width, 21, 3);

  std::vector<double> ratio0_blocks, ratio1_blocks;
  long spacing = 800;
  double r0 = 0.0, r1 = 0.0;
  int acc = 0, per_block = 12;
  for (long upto = 4000; upto <= protocol.n_epochs; upto += spacing) {
    advance_chain(st, protocol, X, y, probes, 21, upto);
    r0 += st.mlp.W[0].array().square().mean() * (double)d / spec.weight_var[0];
    r1 += st.mlp.W[1].array().square().mean() * (double)width / spec.readout_var;
    if (++acc == per_block) {
      ratio0_blocks.push_back(r0 / per_block);
      ratio1_blocks.push_back(r1 / per_block);
      r0 = r1 = 0.0;
      acc = 0;
    }
  }
  for (auto* blocks : {&ratio0_blocks, &ratio1_blocks}) {
    double est = std::accumulate(blocks->begin(), blocks->end(), 0.0) / (double)blocks->size();
    double se = sample_se(*blocks);
    CAPTURE(est);
    CAPTURE(se);
    CHECK(std::abs(est - 1.0) < 4.0 * se + 0.01);
  }
}

TEST_CASE("langevin noise is a pure function of the counters") {
  MLP a = tiny_mlp(Activation::Quadratic, {3, 4, 2}, 31);
  MLP b = a;
  TrainProtocol protocol;
  protocol.dt = 1e-3;
  protocol.temperature = 0.3;
  protocol.gamma = {0.5, 0.5, 0.5};
  std::vector<Matrix> zero_grad;
  for (const auto& w : a.W) zero_grad.push_back(Matrix::Zero(w.rows(), w.cols()));
  langevin_step(a, protocol, zero_grad, 5, 9, 1000);
  langevin_step(b, protocol, zero_grad, 5, 9, 1000);
  for (std::size_t l = 0; l < a.W.size(); ++l)
    CHECK((a.W[l] - b.W[l]).cwiseAbs().maxCoeff() == 0.0);
  // a different epoch must give different noise
  langevin_step(b, protocol, zero_grad, 5, 9, 1001);
  CHECK((a.W[0] - b.W[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("pure random walk accumulates 2 T dt per step") {
  MLP mlp;
  mlp.widths = {1, 200};
  mlp.act = Activation::Linear;
  mlp.W = {Matrix::Zero(200, 1), Matrix::Zero(1, 200)};
  TrainProtocol protocol;
  protocol.dt = 1e-3;
  protocol.temperature = 0.5;
  protocol.gamma = {0.0, 0.0};
  std::vector<Matrix> zero_grad = {Matrix::Zero(200, 1), Matrix::Zero(1, 200)};
  long steps = 50;
  for (long epoch = 0; epoch < steps; ++epoch)
    langevin_step(mlp, protocol, zero_grad, 17, 0, epoch);
  double expect = 2.0 * protocol.temperature * protocol.dt * (double)steps;
  for (int l = 0; l < 2; ++l) {
    double est = mlp.W[(std::size_t)l].array().square().mean();
    CHECK(std::abs(est - expect) < 5.0 * expect * std::sqrt(2.0 / 200.0));
  }
}

TEST_CASE("diverging step size is detected") {
  NetworkSpec spec;
  spec.depth = 1;
  spec.activation = Activation::Quadratic;
  spec.weight_var = {1.0};
  spec.readout_var = 1.0;
  Rng rng(4);
  Matrix X = random_matrix(8, 3, rng);
  Vector y(8);
  for (int i = 0; i < 8; ++i) y(i) = rng.gaussian();
  TrainProtocol protocol = protocol_for_posterior(spec, 3, 64, 0.2, 50.0, 3000, 100, {0});
  ChainState st;
  st.chain_seed = 1;
  st.mlp = mlp_from_prior(spec, 3, 64, 5, 1);
  CHECK(stability_indicator(st.mlp, protocol, X) > 0.1);
  CHECK_THROWS_AS(advance_chain(st, protocol, X, y, Matrix::Zero(1, 3), 5, 3000),
                  DivergenceError);
}

TEST_CASE("checkpoint save/load resumes bit-exactly") {
  NetworkSpec spec;
  spec.depth = 1;
  spec.activation = Activation::Quadratic;
  spec.weight_var = {1.0};
  spec.readout_var = 0.8;
  Rng rng(6);
  long d = 3;
  Matrix X = random_matrix(6, d, rng);
  Vector y(6);
  for (int i = 0; i < 6; ++i) y(i) = rng.gaussian();
  Matrix probes = random_matrix(2, d, rng);
  TrainProtocol protocol = protocol_for_posterior(spec, d, 32, 0.2, 1e-3, 800, 100, {0});

  ChainState direct;
  direct.chain_seed = 2;
  direct.mlp = mlp_from_prior(spec, d, 32, 8, 2);
  advance_chain(direct, protocol, X, y, probes, 8, 800);

  ChainState half;
  half.chain_seed = 2;
  half.mlp = mlp_from_prior(spec, d, 32, 8, 2);
  advance_chain(half, protocol, X, y, probes, 8, 400);
  std::string path = "checkpoint_test.bin";
  half.save(path);
  ChainState resumed = ChainState::load(path);
  std::remove(path.c_str());
  CHECK(resumed.epoch == 400);
  advance_chain(resumed, protocol, X, y, probes, 8, 800);

  for (std::size_t l = 0; l < direct.mlp.W.size(); ++l)
    CHECK((direct.mlp.W[l] - resumed.mlp.W[l]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(direct.probe_count == resumed.probe_count);
  CHECK((direct.probe_sum - resumed.probe_sum).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(direct.series[0].size() == resumed.series[0].size());
  for (std::size_t i = 0; i < direct.series[0].size(); ++i)
    CHECK(direct.series[0][i] == resumed.series[0][i]);
}

TEST_CASE("autocorrelation time: white noise and AR(1)") {
  Rng rng(7);
  std::vector<double> white(40000);
  for (double& v : white) v = rng.gaussian();
  AcfResult w = autocorrelation(white, 200);
  CHECK(w.tau > 0.8);
  CHECK(w.tau < 1.2);

  double rho = 0.9;
  std::vector<double> ar(200000);
  double x = 0.0;
  for (double& v : ar) {
    x = rho * x + rng.gaussian();
    v = x;
  }
  AcfResult r = autocorrelation(ar, 2000);
  double tau_true = (1.0 + rho) / (1.0 - rho);  // 19
  CHECK(std::abs(r.tau - tau_true) / tau_true < 0.15);

  CHECK_THROWS(autocorrelation(std::vector<double>(100, 1.0), 5));
  CHECK_THROWS(autocorrelation(white, 100000));
}

TEST_CASE("block-variance diagnostic: ergodic series scale as 1/length") {
  Rng rng(8);
  int seeds = 8;
  long epochs = 32768;
  Matrix F(seeds, epochs);
  for (int s = 0; s < seeds; ++s)
    for (long t = 0; t < epochs; ++t) F(s, t) = rng.gaussian();
  ErgodicityResult r = ergodicity_check(F);
  CAPTURE(r.fit.slope);
  CHECK(std::abs(r.fit.slope + 1.0) < 0.1);

  // mild correlation only bends the smallest blocks; the slope stays near -1
  double rho = 0.5;
  for (int s = 0; s < seeds; ++s) {
    double x = 0.0;
    for (long t = 0; t < epochs; ++t) {
      x = rho * x + rng.gaussian();
      F(s, t) = x;
    }
  }
  ErgodicityResult rc = ergodicity_check(F);
  CAPTURE(rc.fit.slope);
  CHECK(std::abs(rc.fit.slope + 1.0) < 0.25);
}

TEST_CASE("block-variance diagnostic flags broken ergodicity") {
  Rng rng(9);
  int seeds = 8;
  long epochs = 32768;
  Matrix F(seeds, epochs);
  for (int s = 0; s < seeds; ++s) {
    // per-seed offsets never average out within a chain
    double offset = 3.0 * rng.gaussian();
    for (long t = 0; t < epochs; ++t) F(s, t) = offset + 0.3 * rng.gaussian();
  }
  ErgodicityResult r = ergodicity_check(F);
  CAPTURE(r.fit.slope);
  CHECK(r.fit.slope > -0.5);
}

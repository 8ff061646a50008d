#include <cmath>
#include <random>

#include <catch_amalgamated.hpp>

#include "sstempo/errors.hpp"
#include "sstempo/nn.hpp"
#include "support.hpp"

using namespace sstempo;
using namespace sstempo::nn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Mat<double> random_input(int len, int batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mat<double> x(len, batch);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = u(rng);
  }
  return x;
}

/// Biases nudged off zero so every ReLU path is exercised.
ModelParams<double> tiny_model(std::uint64_t seed) {
  ModelParams<double> p = init_params<double>(ModelConfig::with_width(2, 16), seed);
  std::mt19937_64 rng(seed + 99);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (std::size_t i = 1; i < p.size(); i += 2) {
    for (Eigen::Index r = 0; r < p.tensors[i].rows(); ++r) p.tensors[i](r, 0) = u(rng);
  }
  return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

}  // namespace

TEST_CASE("architecture shapes", "[nn]") {
  const ModelConfig cfg = ModelConfig::with_width(64);
  CHECK(cfg.encoder_lengths() == std::vector<int>{128, 64, 32, 16, 8, 4, 2});
  CHECK(cfg.encoder_channels() == std::vector<int>{1, 64, 128, 256, 512, 512, 512});
  CHECK(cfg.decoder_channels() == std::vector<int>{512, 512, 512, 512, 256, 128, 64});
  CHECK(cfg.flat_size() == 1024);
  const ModelParams<float> p = init_params<float>(cfg, 1);
  CHECK(p.size() == 2 * (6 + 2 + 1 + 6 + 1));
  CHECK(p.names.front() == "enc0.w");
  CHECK(p.names.back() == "proj.b");
  const ModelConfig odd = ModelConfig::with_width(2, 16);
  CHECK(odd.encoder_lengths() == std::vector<int>{16, 8, 4, 2, 1, 1, 1});
}

TEST_CASE("invalid architectures are configuration errors", "[nn]") {
  ModelConfig cfg = ModelConfig::with_width(4);
  cfg.decoder.channel_mults.pop_back();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ModelConfig::with_width(4);
  cfg.encoder.head_units = {48, 2};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(ModelConfig::with_width(0).validate(), ConfigError);
}

TEST_CASE("He-uniform initialization", "[nn]") {
  const ModelParams<double> p = init_params<double>(ModelConfig::with_width(64), 5);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i % 2 == 1) {
      REQUIRE(p.tensors[i].isZero());
      continue;
    }
    const double limit = std::sqrt(6.0 / p.fan_in(i));
    REQUIRE(p.tensors[i].cwiseAbs().maxCoeff() <= limit);
    if (p.tensors[i].size() >= 20000) {
      const double var = p.tensors[i].array().square().mean();
      CHECK_THAT(var, WithinRel(2.0 / p.fan_in(i), 0.05));
    }
  }
  CHECK(p.fan_in(0) == 3);
  const ModelParams<double> q = init_params<double>(ModelConfig::with_width(64), 5);
  CHECK(p.tensors[6] == q.tensors[6]);
  CHECK(init_params<double>(ModelConfig::with_width(64), 6).tensors[6] != p.tensors[6]);
}

TEST_CASE("zero parameters give t = 0.5", "[nn]") {
  ModelParams<double> p = init_params<double>(ModelConfig::with_width(4), 1);
  p.set_zero();
  const Mat<double> t = encode(p, random_input(128, 5, 2));
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(t(0, i) == 0.5);
}

TEST_CASE("encoder output is strictly inside (0, 1)", "[nn]") {
  ModelParams<double> p = init_params<double>(ModelConfig::with_width(4), 3);
  for (double scale : {1.0, 100.0, -100.0}) {
    const Mat<double> t = encode(p, Mat<double>(scale * random_input(128, 8, 4)));
    CHECK(t.minCoeff() > 0.0);
    CHECK(t.maxCoeff() < 1.0);
  }
}

TEST_CASE("batched forward matches single-sample forward", "[nn]") {
  const ModelParams<double> p = tiny_model(8);
  const Mat<double> x = random_input(16, 4, 9);
  const ForwardCache<double> cache = forward(p, x);
  REQUIRE(cache.xhat.rows() == 16);
  REQUIRE(cache.xhat.cols() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double t = encoder_forward<double>(p, x.col(i));
    CHECK(t == cache.t(0, i));
    const Vec<double> xh = decoder_forward<double>(p, t);
    CHECK((xh - cache.xhat.col(i)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("non-finite input is a data error", "[nn]") {
  const ModelParams<double> p = tiny_model(1);
  Mat<double> x = random_input(16, 2, 1);
  x(3, 1) = std::nan("");
  CHECK_THROWS_AS(encode(p, x), DataError);
  CHECK_THROWS_AS(encode(p, random_input(15, 2, 1)), ContractError);
}

TEST_CASE("decoder derivative with respect to t", "[nn]") {
  const ModelParams<double> p = tiny_model(21);
  const double h = 1e-4;
  for (double t : {0.2, 0.5, 0.8}) {
    const Vec<double> num = (decoder_forward(p, t + h) - decoder_forward(p, t - h)) / (2 * h);
    const Vec<double> lo = (decoder_forward(p, t) - decoder_forward(p, t - h)) / h;
    const Vec<double> hi = (decoder_forward(p, t + h) - decoder_forward(p, t)) / h;
    // Piecewise linear in t: one-sided slopes agree with the central one away from kinks.
    for (Eigen::Index i = 0; i < num.size(); ++i) {
      if (std::abs(lo(i) - hi(i)) < 1e-9) CHECK(rel_err(num(i), lo(i)) < 1e-4);
    }
  }
}

TEST_CASE("backpropagation matches central differences", "[nn]") {
  const ModelParams<double> p = tiny_model(3);
  const Mat<double> x = random_input(16, 3, 4);
  const Mat<double> cx = random_input(16, 3, 5);
  const Mat<double> ct = random_input(1, 3, 6);
  // L = sum(cx .* xhat) + sum(ct .* t)
  auto loss = [&](const ModelParams<double>& q) {
    const ForwardCache<double> c = forward(q, x);
    return (cx.array() * c.xhat.array()).sum() + (ct.array() * c.t.array()).sum();
  };
  ModelParams<double> g = p.zeros_like();
  backward(p, forward(p, x), cx, ct, g);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (Eigen::Index j = 0; j < p.tensors[i].size(); ++j) {
      ModelParams<double> a = p;
      ModelParams<double> b = p;
      a.tensors[i].data()[j] += h;
      b.tensors[i].data()[j] -= h;
      const double num = (loss(a) - loss(b)) / (2 * h);
      worst = std::max(worst, rel_err(num, g.tensors[i].data()[j]));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("backward accumulates and validates shapes", "[nn]") {
  const ModelParams<double> p = tiny_model(2);
  const Mat<double> x = random_input(16, 2, 3);
  const ForwardCache<double> c = forward(p, x);
  const Mat<double> dx = Mat<double>::Ones(16, 2);
  const Mat<double> dt = Mat<double>::Ones(1, 2);
  ModelParams<double> once = p.zeros_like();
  backward(p, c, dx, dt, once);
  ModelParams<double> twice = p.zeros_like();
  backward(p, c, dx, dt, twice);
  backward(p, c, dx, dt, twice);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK((twice.tensors[i] - 2.0 * once.tensors[i]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(backward(p, c, Mat<double>(Mat<double>::Ones(16, 3)), dt, once), ContractError);
  ModelParams<double> wrong = init_params<double>(ModelConfig::with_width(4, 16), 1).zeros_like();
  CHECK_THROWS_AS(backward(p, c, dx, dt, wrong), ContractError);
}

TEST_CASE("first Adam step moves each weight by lr against its gradient", "[nn]") {
  ModelParams<double> p = tiny_model(4);
  const ModelParams<double> before = p;
  ModelParams<double> g = p.zeros_like();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& t : g.tensors) {
    for (Eigen::Index j = 0; j < t.size(); ++j) t.data()[j] = n(rng);
  }
  AdamState<double> s = AdamState<double>::for_params(p);
  adam_step(p, g, s);
  CHECK(s.step == 1);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (Eigen::Index j = 0; j < p.tensors[i].size(); ++j) {
      const double gj = g.tensors[i].data()[j];
      const double expected = before.tensors[i].data()[j] - 1e-4 * gj / (std::abs(gj) + 1e-8);
      REQUIRE_THAT(p.tensors[i].data()[j], WithinAbs(expected, 1e-15));
    }
  }
}

TEST_CASE("Adam second step uses bias-corrected moments", "[nn]") {
  ModelParams<double> p = tiny_model(4);
  ModelParams<double> g = p.zeros_like();
  g.tensors[0](0, 0) = 1.0;
  AdamState<double> s = AdamState<double>::for_params(p);
  adam_step(p, g, s);
  const double w1 = p.tensors[0](0, 0);
  g.tensors[0](0, 0) = 3.0;
  adam_step(p, g, s);
  const double m = (0.9 * 0.1 * 1.0 + 0.1 * 3.0) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 1.0 + 0.001 * 9.0) / (1 - 0.999 * 0.999);
  CHECK_THAT(p.tensors[0](0, 0), WithinAbs(w1 - 1e-4 * m / (std::sqrt(v) + 1e-8), 1e-15));
  CHECK(p.tensors[1](0, 0) == tiny_model(4).tensors[1](0, 0));
}

TEST_CASE("float and double models agree", "[nn]") {
  const ModelParams<double> pd = init_params<double>(ModelConfig::with_width(4), 12);
  const ModelParams<float> pf = pd.cast<float>();
  const Mat<double> x = random_input(128, 3, 1);
  const Mat<double> td = encode(pd, x);
  const Mat<float> tf = encode(pf, Mat<float>(x.cast<float>()));
  for (Eigen::Index i = 0; i < 3; ++i) CHECK_THAT(tf(0, i), WithinAbs(td(0, i), 1e-5));
}

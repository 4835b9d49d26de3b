#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "din/image.hpp"
#include "din/task_ggx.hpp"
#include "doctest.h"

TEST_CASE("ggx_reference") {
  for (double h : {0.0, 0.3, 0.77, 1.0}) CHECK(din::ggx_reference(h, 1.0) == doctest::Approx(1.0 / std::numbers::pi));
  CHECK(din::ggx_reference(0.0, 0.5) == doctest::Approx(0.019894).epsilon(1e-4));
  CHECK(din::ggx_reference(1.0, 0.5) == doctest::Approx(5.0930).epsilon(1e-4));
  CHECK_THROWS_AS(din::ggx_reference(0.5, 0.0), din::ArgumentError);
  CHECK_THROWS_AS(din::ggx_reference(1.5, 0.5), din::ArgumentError);

  SUBCASE("monotone in h_z below unit roughness") {
    for (double a : {0.001, 0.05, 0.3, 0.9}) {
      double prev = -1.0;
      for (int i = 0; i <= 200; ++i) {
        const double d = din::ggx_reference(i / 200.0, a);
        CHECK(d > prev);
        prev = d;
      }
    }
  }
  SUBCASE("normalised over the hemisphere") {
    // Integral of D(h) h_z over the hemisphere is 1; h_z = cos(theta).
    for (double a : {0.2, 0.5, 1.0}) {
      const int n = 200000;
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        const double mu = (i + 0.5) / n;
        sum += din::ggx_reference(mu, a) * mu;
      }
      CHECK(2.0 * std::numbers::pi * sum / n == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
}

TEST_CASE("sample_ggx_inputs") {
  din::Rng rng(1);
  const auto s = din::sample_ggx_inputs(rng, 1000000);
  double m2 = 0.0;
  std::vector<double> alphas;
  alphas.reserve(s.size());
  for (const auto& x : s) {
    m2 += x.h_z * x.h_z;
    CHECK_FALSE((x.alpha < 1e-3 || x.alpha > 1.0));
    alphas.push_back(x.alpha);
  }
  CHECK(std::abs(m2 / 1e6 - 0.5) <= 0.01);
  std::nth_element(alphas.begin(), alphas.begin() + 500000, alphas.end());
  CHECK(alphas[500000] < 0.5);
  CHECK(s[12345].d == din::ggx_reference(s[12345].h_z, s[12345].alpha));
}

TEST_CASE("normalizer and psnr") {
  std::vector<din::GgxSample> s(101);
  for (int i = 0; i <= 100; ++i) s[static_cast<std::size_t>(i)].d = i;
  CHECK(din::ggx_normalizer(s) == 99.0);

  const auto net = din::make_ggx_network(16, 8);
  din::Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    CHECK(din::ggx_network(net, din::uniform01(rng), 1e-3 + din::uniform01(rng) * 0.999) == doctest::Approx(0.5));
  }
  std::vector<din::GgxSample> half(10);
  for (auto& x : half) {
    x.h_z = 0.5;
    x.alpha = 0.5;
    x.d = 0.5;
  }
  CHECK(din::ggx_psnr(net, half, 1.0) == din::kPsnrIdentical);
  CHECK_THROWS_AS(din::ggx_psnr(net, half, 0.0), din::ArgumentError);
  CHECK_THROWS_AS(din::ggx_normalizer({}), din::ArgumentError);
}

TEST_CASE("short GGX training improves across checkpoints") {
  din::GgxTaskConfig cfg;
  cfg.train.steps = 3000;
  cfg.train.batch_size = 512;
  cfg.checkpoints = {30, 100, 300, 1000, 3000};
  cfg.holdout = 20000;
  const auto model = din::train_ggx(cfg);
  REQUIRE(model.checkpoints.size() == 5);
  for (std::size_t i = 1; i < model.checkpoints.size(); ++i) {
    CHECK(model.checkpoints[i].step > model.checkpoints[i - 1].step);
    CHECK(model.checkpoints[i].psnr > model.checkpoints[i - 1].psnr);
  }
  din::Rng rng(9);
  const auto hold = din::sample_ggx_inputs(rng, 20000);
  const double psnr = din::ggx_psnr(model.net, hold, din::ggx_normalizer(hold));
  CHECK(psnr > 25.0);
  // the returned network outputs D directly
  CHECK(din::ggx_network(model.net, 0.2, 0.8) == doctest::Approx(din::ggx_reference(0.2, 0.8)).epsilon(0.2));
}

// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "vrae/error.hpp"
#include "vrae/numerics.hpp"

using namespace vrae;

namespace {

// tanh(x) = (e^{2x} - 1) / (e^{2x} + 1) with e^{2x} summed as a long-double
// Taylor series, independent of std::tanh.
long double tanh_series(long double x) {
  long double term = 1.0L, sum = 1.0L;
  for (int k = 1; k < 60; ++k) {
    term *= 2.0L * x / k;
    sum += term;
  }
  return (sum - 1.0L) / (sum + 1.0L);
}

}  // namespace

TEST_CASE("matvec examples") {
  CHECK(matvec(Mat::identity(3), Vec{1, 2, 3}) == Vec{1, 2, 3});
  CHECK(matvec(Mat(2, 3), Vec{5, 5, 5}) == Vec{0, 0});
  CHECK(matvec(Mat::from_rows({{1, 2}, {3, 4}}), Vec{1, 1}) == Vec{3, 7});
}

TEST_CASE("matvec rejects mismatched shapes and names them") {
  try {
    matvec(Mat(2, 3), Vec{1, 2});
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("length 2") != std::string::npos);
  }
}

TEST_CASE("matvec is linear") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.below(7), cols = 1 + rng.below(7);
    Mat m(rows, cols);
    for (auto& x : m.data) x = rng.uniform() * 4 - 2;
    Vec u(cols), v(cols), mix(cols);
    const double a = rng.uniform() * 6 - 3, b = rng.uniform() * 6 - 3;
    for (std::size_t i = 0; i < cols; ++i) {
      u[i] = rng.uniform() * 2 - 1;
      v[i] = rng.uniform() * 2 - 1;
      mix[i] = a * u[i] + b * v[i];
    }
    const Vec lhs = matvec(m, mix), mu = matvec(m, u), mv = matvec(m, v);
    for (std::size_t r = 0; r < rows; ++r) {
      const double rhs = a * mu[r] + b * mv[r];
      const double scale = std::max({std::abs(lhs[r]), std::abs(rhs), 1.0});
      CHECK(std::abs(lhs[r] - rhs) / scale < 1e-12);
    }
  }
}

TEST_CASE("transposed and outer kernels agree with explicit loops") {
  const Mat m = Mat::from_rows({{1, 2, 3}, {4, 5, 6}});
  Vec out{10, 20, 30};
  matvec_transposed_add(m, Vec{1, -1}, out);
  CHECK(out == Vec{7, 17, 27});
  Mat acc(2, 3);
  outer_add(acc, Vec{1, 2}, Vec{3, 4, 5});
  CHECK(acc == Mat::from_rows({{3, 4, 5}, {6, 8, 10}}));
  CHECK_THROWS_AS(outer_add(acc, Vec{1}, Vec{1, 2, 3}), DimensionError);
}

TEST_CASE("activation values at the origin") {
  CHECK(activate(Vec{0.0}, Activation::kTanh)[0] == 0.0);
  CHECK(derivative_from_output(Vec{0.0}, Activation::kTanh)[0] == 1.0);
  CHECK(activate(Vec{0.0}, Activation::kSigmoid)[0] == 0.5);
  CHECK(derivative_from_output(Vec{0.5}, Activation::kSigmoid)[0] == 0.25);
}

TEST_CASE("tanh(1) matches an extended-precision series") {
  const double oracle = static_cast<double>(tanh_series(1.0L));
  CHECK(std::abs(activate(Vec{1.0}, Activation::kTanh)[0] - oracle) < 1e-12);
}

TEST_CASE("derivative_from_output matches central differences") {
  Rng rng(3);
  const double step = 1e-5;
  for (auto kind : {Activation::kTanh, Activation::kSigmoid}) {
    for (int i = 0; i < 100; ++i) {
      const double x = rng.uniform() * 6 - 3;
      const double y = activate(Vec{x}, kind)[0];
      const double analytic = derivative_from_output(Vec{y}, kind)[0];
      const double numeric =
          (activate(Vec{x + step}, kind)[0] - activate(Vec{x - step}, kind)[0]) / (2 * step);
      CHECK(std::abs(analytic - numeric) / std::abs(analytic) < 1e-7);
    }
  }
}

TEST_CASE("sigmoid and softplus are stable in the tails") {
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) == 0.0);
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("gaussian source is seed deterministic") {
  GaussSource a(42), b(42), c(43);
  const Vec va = draw_standard_normal(a, 1000);
  CHECK(va == draw_standard_normal(b, 1000));
  CHECK(va != draw_standard_normal(c, 1000));
}

TEST_CASE("gaussian state save and restore reproduces the stream") {
  GaussSource src(9);
  draw_standard_normal(src, 3);  // odd count leaves a cached spare
  const auto saved = src.state();
  CHECK(saved.has_spare);
  const Vec first = draw_standard_normal(src, 10);
  GaussSource other(0);
  other.set_state(saved);
  CHECK(draw_standard_normal(other, 10) == first);
}

TEST_CASE("gaussian moments over 1e6 draws") {
  GaussSource src(2024);
  const Vec draws = draw_standard_normal(src, 1'000'000);
  double mean = 0.0;
  for (double x : draws) mean += x;
  mean /= draws.size();
  double var = 0.0;
  for (double x : draws) var += (x - mean) * (x - mean);
  var /= draws.size() - 1;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("gaussian draws pass Kolmogorov-Smirnov at 0.001") {
  GaussSource src(77);
  Vec draws = draw_standard_normal(src, 100'000);
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double cdf = 0.5 * std::erfc(-draws[i] / std::sqrt(2.0));
    stat = std::max({stat, (i + 1) / n - cdf, cdf - i / n});
  }
  // Asymptotic critical value c(0.001) = sqrt(-ln(0.0005)/2).
  const double critical = std::sqrt(-std::log(0.0005) / 2.0) / std::sqrt(n);
  CHECK(stat < critical);
}

TEST_CASE("rng below stays in range") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
  CHECK_THROWS_AS(rng.below(0), ConfigError);
}

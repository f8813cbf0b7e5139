// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vrae {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Mat identity(std::size_t n);
  static Mat from_rows(const std::vector<std::vector<double>>& rows);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::string shape() const;

  friend bool operator==(const Mat&, const Mat&) = default;
};

Vec matvec(const Mat& m, std::span<const double> v);

// Accumulating kernels used by the forward and backward passes. None of them
// allocate; shapes are checked.
void matvec_add(const Mat& m, std::span<const double> v, std::span<double> out);
void matvec_transposed_add(const Mat& m, std::span<const double> v, std::span<double> out);
void outer_add(Mat& m, std::span<const double> left, std::span<const double> right);
void axpy(double a, std::span<const double> x, std::span<double> y);

double dot(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

enum class Activation { kTanh, kSigmoid };

double sigmoid(double x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);

Vec activate(std::span<const double> x, Activation kind);
/// Derivative expressed through the activation's output y.
Vec derivative_from_output(std::span<const double> y, Activation kind);

/// xoshiro256** seeded through splitmix64. Portable and bit-exact.
class Rng {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound) by rejection (bound > 0).
  std::uint64_t below(std::uint64_t bound);

  const State& state() const { return state_; }
  void set_state(const State& s) { state_ = s; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  State state_{};
};

/// Standard-normal draws via the Marsaglia polar method over Rng; the second
/// variate of each accepted pair is cached.
class GaussSource {
 public:
  struct State {
    Rng::State rng{};
    bool has_spare = false;
    double spare = 0.0;
    friend bool operator==(const State&, const State&) = default;
  };

  explicit GaussSource(std::uint64_t seed = 0) : rng_(seed) {}

  double next();

  State state() const { return {rng_.state(), has_spare_, spare_}; }
  void set_state(const State& s);

 private:
  Rng rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Vec draw_standard_normal(GaussSource& src, std::size_t n);

}  // namespace vrae

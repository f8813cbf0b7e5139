// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/numerics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "vrae/error.hpp"

namespace vrae {

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::from_rows(const std::vector<std::vector<double>>& rows) {
  Mat m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < m.rows; ++r) {
    if (rows[r].size() != m.cols) throw DimensionError("ragged rows in Mat::from_rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

std::string Mat::shape() const { return fmt::format("{}x{}", rows, cols); }

Vec matvec(const Mat& m, std::span<const double> v) {
  if (m.cols != v.size()) {
    throw DimensionError(fmt::format("matvec: matrix {} times vector of length {}", m.shape(), v.size()));
  }
  Vec out(m.rows, 0.0);
  matvec_add(m, v, out);
  return out;
}

void matvec_add(const Mat& m, std::span<const double> v, std::span<double> out) {
  if (m.cols != v.size() || m.rows != out.size()) {
    throw DimensionError(fmt::format("matvec_add: matrix {} with input {} and output {}", m.shape(),
                                     v.size(), out.size()));
  }
  const double* w = m.data.data();
  const double* x = v.data();
  const std::size_t blocked = m.cols - m.cols % 4;
  for (std::size_t r = 0; r < m.rows; ++r, w += m.cols) {
    // Four independent partial sums; fixed order, so results stay deterministic.
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t c = 0; c < blocked; c += 4) {
      a0 += w[c] * x[c];
      a1 += w[c + 1] * x[c + 1];
      a2 += w[c + 2] * x[c + 2];
      a3 += w[c + 3] * x[c + 3];
    }
    for (std::size_t c = blocked; c < m.cols; ++c) a0 += w[c] * x[c];
    out[r] += (a0 + a1) + (a2 + a3);
  }
}

void matvec_transposed_add(const Mat& m, std::span<const double> v, std::span<double> out) {
  if (m.rows != v.size() || m.cols != out.size()) {
    throw DimensionError(fmt::format("matvec_transposed_add: matrix {} with input {} and output {}",
                                     m.shape(), v.size(), out.size()));
  }
  const double* w = m.data.data();
  for (std::size_t r = 0; r < m.rows; ++r, w += m.cols) {
    const double s = v[r];
    if (s == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += s * w[c];
  }
}

void outer_add(Mat& m, std::span<const double> left, std::span<const double> right) {
  if (m.rows != left.size() || m.cols != right.size()) {
    throw DimensionError(fmt::format("outer_add: matrix {} with outer product {}x{}", m.shape(),
                                     left.size(), right.size()));
  }
  double* w = m.data.data();
  for (std::size_t r = 0; r < m.rows; ++r, w += m.cols) {
    const double s = left[r];
    if (s == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) w[c] += s * right[c];
  }
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) {
    throw DimensionError(fmt::format("axpy: lengths {} and {}", x.size(), y.size()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError(fmt::format("dot: lengths {} and {}", a.size(), b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

Vec activate(std::span<const double> x, Activation kind) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = kind == Activation::kTanh ? std::tanh(x[i]) : sigmoid(x[i]);
  }
  return y;
}

Vec derivative_from_output(std::span<const double> y, Activation kind) {
  Vec d(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    d[i] = kind == Activation::kTanh ? 1.0 - y[i] * y[i] : y[i] * (1.0 - y[i]);
  }
  return d;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  for (auto& word : state_) word = splitmix64(seed);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw ConfigError("Rng::below: bound must be positive");
  // Reject the top partial block so every residue is equally likely.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

double GaussSource::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * rng_.uniform() - 1.0;
    v = 2.0 * rng_.uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

void GaussSource::set_state(const State& s) {
  rng_.set_state(s.rng);
  has_spare_ = s.has_spare;
  spare_ = s.spare;
}

Vec draw_standard_normal(GaussSource& src, std::size_t n) {
  Vec out(n);
  for (auto& x : out) x = src.next();
  return out;
}

}  // namespace vrae

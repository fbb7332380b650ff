// Copyright 2026 The qadagrad Authors. All Rights Reserved.
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
// =============================================================================

/*!
 * \file data.hpp
 * \brief Sparse binary datasets and the logistic loss.
 */
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qadagrad/error.hpp"

namespace qadagrad {

struct Feature {
  std::uint32_t index = 0;
  double value = 0.0;
  friend bool operator==(const Feature&, const Feature&) = default;
};

struct SparseExample {
  std::vector<Feature> features;  // strictly increasing index
  int label = 1;                  // -1 or +1

  double dot(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& f : features) s += x[f.index] * f.value;
    return s;
  }

  friend bool operator==(const SparseExample&, const SparseExample&) = default;
};

struct Dataset {
  std::vector<SparseExample> examples;
  std::size_t dim = 0;
  std::string name;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  double max_abs_feature() const {
    double m = 0.0;
    for (const auto& e : examples) {
      for (const auto& f : e.features) m = std::max(m, std::abs(f.value));
    }
    return m;
  }
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

namespace detail {

// log(1 + exp(-m))
inline double softplus_neg(double m) {
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// 1 / (1 + exp(m))
inline double sigmoid_neg(double m) {
  if (m >= 0.0) {
    double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

template <typename Access>
LossGrad logistic_loss_grad_impl(std::span<const double> x, std::size_t count, Access&& at) {
  if (count == 0) throw Error("empty batch");
  LossGrad out;
  out.grad.assign(x.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t n = 0; n < count; ++n) {
    const SparseExample& e = at(n);
    double y = e.label;
    double m = y * e.dot(x);
    out.loss += softplus_neg(m);
    double coeff = -y * sigmoid_neg(m) * inv;
    for (const auto& f : e.features) out.grad[f.index] += coeff * f.value;
  }
  out.loss *= inv;
  return out;
}

template <typename Access>
double logistic_loss_impl(std::span<const double> x, std::size_t count, Access&& at) {
  if (count == 0) throw Error("empty batch");
  double loss = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    const SparseExample& e = at(n);
    loss += softplus_neg(e.label * e.dot(x));
  }
  return loss / static_cast<double>(count);
}

}  // namespace detail

/// Mean logistic loss and its dense gradient over a batch. The l1 term is
/// never part of this gradient.
inline LossGrad logistic_loss_grad(std::span<const double> x, std::span<const SparseExample> batch) {
  return detail::logistic_loss_grad_impl(x, batch.size(),
                                         [&](std::size_t n) -> const SparseExample& { return batch[n]; });
}

inline LossGrad logistic_loss_grad(std::span<const double> x, const Dataset& data,
                                   std::span<const std::size_t> indices) {
  return detail::logistic_loss_grad_impl(
      x, indices.size(), [&](std::size_t n) -> const SparseExample& { return data.examples[indices[n]]; });
}

inline double logistic_loss(std::span<const double> x, const Dataset& data,
                            std::span<const std::size_t> indices) {
  return detail::logistic_loss_impl(
      x, indices.size(), [&](std::size_t n) -> const SparseExample& { return data.examples[indices[n]]; });
}

inline double logistic_loss(std::span<const double> x, std::span<const SparseExample> batch) {
  return detail::logistic_loss_impl(x, batch.size(),
                                    [&](std::size_t n) -> const SparseExample& { return batch[n]; });
}

/// Percentage of examples with sign(<x, z>) == y; a zero margin predicts +1.
inline double evaluate(std::span<const double> x, const Dataset& test) {
  if (test.empty()) throw Error("empty evaluation set");
  std::size_t correct = 0;
  for (const auto& e : test.examples) {
    int predicted = e.dot(x) >= 0.0 ? 1 : -1;
    correct += (predicted == e.label);
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------
// LIBSVM text format: "<label> <index>:<value> ...", 1-based indices.

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses LIBSVM text. Labels > 0 map to +1, all others (0, -1) to -1.
/// The dimension is max(min_dim, largest index).
inline Dataset parse_libsvm(std::istream& in, std::string name, std::size_t min_dim = 0) {
  Dataset data;
  data.name = std::move(name);
  data.dim = min_dim;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw Error(data.name + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view rest(line);
    if (auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);
    rest = detail::trim(rest);
    if (rest.empty()) continue;

    SparseExample ex;
    auto next_token = [&]() {
      auto end = rest.find_first_of(" \t");
      std::string_view tok = rest.substr(0, end);
      rest = end == std::string_view::npos ? std::string_view{} : detail::trim(rest.substr(end));
      return tok;
    };
    double label = 0.0;
    if (!detail::parse_number(next_token(), label) || !std::isfinite(label)) fail("bad label");
    ex.label = label > 0.0 ? 1 : -1;

    while (!rest.empty()) {
      std::string_view tok = next_token();
      auto colon = tok.find(':');
      if (colon == std::string_view::npos) fail("expected index:value, got '" + std::string(tok) + "'");
      std::uint64_t index = 0;
      double value = 0.0;
      if (!detail::parse_number(tok.substr(0, colon), index) || index == 0 || index > UINT32_MAX) {
        fail("bad feature index '" + std::string(tok.substr(0, colon)) + "'");
      }
      if (!detail::parse_number(tok.substr(colon + 1), value) || !std::isfinite(value)) {
        fail("bad feature value '" + std::string(tok.substr(colon + 1)) + "'");
      }
      auto idx = static_cast<std::uint32_t>(index - 1);
      if (!ex.features.empty() && idx <= ex.features.back().index) fail("feature indices not increasing");
      ex.features.push_back({idx, value});
      data.dim = std::max<std::size_t>(data.dim, idx + 1);
    }
    data.examples.push_back(std::move(ex));
  }
  if (data.examples.empty()) throw Error(data.name + ": no examples");
  return data;
}

inline Dataset load_libsvm(const std::string& path, std::size_t min_dim = 0) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_libsvm(in, path, min_dim);
}

inline void write_libsvm(std::ostream& out, const Dataset& data) {
  char buf[64];
  for (const auto& e : data.examples) {
    out << (e.label > 0 ? "+1" : "-1");
    for (const auto& f : e.features) {
      auto res = std::to_chars(buf, buf + sizeof(buf), f.value);
      out << ' ' << (f.index + 1) << ':' << std::string_view(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

inline void save_libsvm(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_libsvm(out, data);
  if (!out) throw Error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthSpec {
  std::size_t n = 1000;
  std::size_t dim = 100;
  std::size_t k_true = 10;
  double noise = 0.0;
  double density = 0.1;
  std::uint64_t seed = 1;
  bool normalize = false;  // scale every row to unit L2 norm after labeling
};

struct SynthResult {
  Dataset data;
  std::vector<double> x_true;
};

/// x_true has k_true coordinates set to +-1. Each example draws every feature
/// independently with probability `density`, values N(0, 1). Labels are
/// sign(<x_true, z> + noise * eps). With k_true > 0, examples that touch no
/// support coordinate are redrawn, so noiseless data is strictly separated by
/// x_true. With k_true = 0 every label is a fair coin.
inline SynthResult synth_sparse_dataset(const SynthSpec& spec) {
  if (spec.dim == 0 || spec.n == 0) throw Error("synthetic dataset needs n > 0 and d > 0");
  if (spec.k_true > spec.dim) throw Error("k_true exceeds dimension");
  if (!(spec.density > 0.0 && spec.density <= 1.0)) throw Error("density must be in (0, 1]");
  if (!(spec.noise >= 0.0)) throw Error("noise must be non-negative");

  std::mt19937_64 rng(spec.seed);
  SynthResult out;
  out.x_true.assign(spec.dim, 0.0);
  {
    std::vector<std::uint32_t> perm(spec.dim);
    for (std::size_t i = 0; i < spec.dim; ++i) perm[i] = static_cast<std::uint32_t>(i);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < spec.k_true; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, spec.dim - 1);
      std::swap(perm[i], perm[pick(rng)]);
      out.x_true[perm[i]] = coin(rng) ? 1.0 : -1.0;
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::geometric_distribution<std::size_t> gap(spec.density);
  std::bernoulli_distribution coin(0.5);
  Dataset& data = out.data;
  data.dim = spec.dim;
  data.examples.reserve(spec.n);
  std::ostringstream name;
  name << "synth(n=" << spec.n << ",d=" << spec.dim << ",k=" << spec.k_true << ",noise=" << spec.noise
       << ",seed=" << spec.seed << (spec.normalize ? ",normalize=1" : "") << ")";
  data.name = name.str();
  for (std::size_t n = 0; n < spec.n; ++n) {
    SparseExample ex;
    double margin = 0.0;
    do {
      ex.features.clear();
      std::size_t idx = gap(rng);
      while (idx < spec.dim) {
        ex.features.push_back({static_cast<std::uint32_t>(idx), gauss(rng)});
        idx += 1 + gap(rng);
      }
      margin = ex.dot(out.x_true);
    } while (spec.k_true > 0 && margin == 0.0);
    if (spec.k_true == 0) {
      ex.label = coin(rng) ? 1 : -1;
    } else {
      if (spec.noise > 0.0) margin += spec.noise * gauss(rng);
      ex.label = margin >= 0.0 ? 1 : -1;
    }
    if (spec.normalize) {
      double norm = 0.0;
      for (const auto& f : ex.features) norm += f.value * f.value;
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (auto& f : ex.features) f.value /= norm;
      }
    }
    data.examples.push_back(std::move(ex));
  }
  return out;
}

/// Moves the last `test_count` examples into a separate set.
inline std::pair<Dataset, Dataset> split_tail(Dataset data, std::size_t test_count) {
  if (test_count >= data.size()) throw Error("test split leaves no training data");
  Dataset test;
  test.dim = data.dim;
  test.name = data.name + "[test]";
  test.examples.assign(std::make_move_iterator(data.examples.end() - static_cast<std::ptrdiff_t>(test_count)),
                       std::make_move_iterator(data.examples.end()));
  data.examples.resize(data.size() - test_count);
  return {std::move(data), std::move(test)};
}

}  // namespace qadagrad

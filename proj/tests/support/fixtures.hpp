// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "relubound/network.hpp"
#include "relubound/sampling.hpp"

namespace fixtures {

using relubound::Activation;
using relubound::Layer;
using relubound::Matrix;
using relubound::Network;
using relubound::PerturbationSet;
using relubound::Vector;

inline std::string data_path(const std::string& name) { return std::string(RELUBOUND_DATA_DIR) + "/" + name; }

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline Network toy_network(double output_shift = 0.0) {
  std::vector<Layer> layers;
  layers.push_back({mat({{2, 1}, {-3, 4}}), Vector::Zero(2), Activation::Relu});
  layers.push_back({mat({{4, -2}, {2, 1}}), Vector::Zero(2), Activation::Relu});
  layers.push_back({mat({{-2, 1}}), vec({output_shift}), Activation::Identity});
  return Network(std::move(layers));
}

inline PerturbationSet toy_region() { return PerturbationSet::linf_ball(vec({0, 1}), 2.0); }

inline Network identity_network() {
  std::vector<Layer> layers;
  layers.push_back({mat({{1}}), Vector::Zero(1), Activation::Identity});
  return Network(std::move(layers));
}

// Dense random ReLU net with standard-normal weights scaled by 1/sqrt(fan-in).
inline Network random_network(std::mt19937_64& gen, const std::vector<int>& widths, double bias_scale = 0.5) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Layer> layers;
  for (std::size_t i = 1; i < widths.size(); ++i) {
    Layer l;
    l.weights = Matrix(widths[i], widths[i - 1]);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        l.weights(r, c) = normal(gen) / std::sqrt(static_cast<double>(widths[i - 1]));
      }
    }
    l.bias = Vector(widths[i]);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = bias_scale * normal(gen);
    l.activation = i + 1 == widths.size() ? Activation::Identity : Activation::Relu;
    layers.push_back(std::move(l));
  }
  return Network(std::move(layers));
}

inline Vector uniform_point(std::mt19937_64& gen, const PerturbationSet& region) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(region.dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x(i) = region.lower()(i) + (region.upper()(i) - region.lower()(i)) * u(gen);
  }
  return x;
}

// Plain nested-loop evaluation, independent of the library's Eigen path.
inline std::vector<double> reference_forward(const Network& net, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (const Layer& l : net.layers()) {
    std::vector<double> z(static_cast<std::size_t>(l.weights.rows()), 0.0);
    for (std::size_t r = 0; r < z.size(); ++r) {
      double acc = l.bias(static_cast<Eigen::Index>(r));
      for (std::size_t c = 0; c < h.size(); ++c) {
        acc += l.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * h[c];
      }
      z[r] = l.activation == Activation::Relu ? (acc > 0.0 ? acc : 0.0) : acc;
    }
    h = std::move(z);
  }
  return h;
}

// Summary of a raw sample keeping `retain` order statistics per side.
inline relubound::SampleSummary summarize(std::vector<double> values, std::size_t retain) {
  const std::size_t n = values.size();
  const std::size_t k = std::min(retain, n);
  std::vector<double> head(values), tail(values);
  std::partial_sort(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(k), head.end());
  head.resize(k);
  std::partial_sort(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(k), tail.end(), std::greater<>());
  tail.resize(k);
  return relubound::SampleSummary(std::move(head), std::move(tail), n);
}

}  // namespace fixtures

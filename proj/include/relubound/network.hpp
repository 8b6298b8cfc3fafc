// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace relubound {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { Relu, Identity };

struct Layer {
  Matrix weights;  // rows = output neurons
  Vector bias;
  Activation activation = Activation::Relu;
};

// Sign condition on one hidden pre-activation. `layer` indexes hidden layers
// from 0.
enum class ReluPhase { Active, Inactive };

struct SplitConstraint {
  std::size_t layer = 0;
  std::size_t neuron = 0;
  ReluPhase phase = ReluPhase::Active;

  bool operator==(const SplitConstraint&) const = default;
};

class Network {
 public:
  // Validates chaining, finiteness, and that every hidden layer is ReLU and
  // the last layer is Identity. Multi-output nets are allowed here; bounding
  // and verification require a single output (see require_single_output).
  explicit Network(std::vector<Layer> layers);

  static Network from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().weights.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers_.back().weights.rows()); }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_hidden_layers() const { return layers_.size() - 1; }
  std::size_t hidden_neuron_count() const;
  std::size_t hidden_width(std::size_t hidden_layer) const {
    return static_cast<std::size_t>(layers_[hidden_layer].weights.rows());
  }

  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }

  void require_single_output() const;

  Vector evaluate(const Vector& x) const;  // all outputs
  double forward(const Vector& x) const;   // single-output nets
  Vector gradient(const Vector& x) const;  // subgradient, ReLU'(0) = 0

  // Pre-activation values of every hidden layer followed by the output layer.
  std::vector<Vector> pre_activations(const Vector& x) const;

  // Batched evaluation; columns are points. Returns the output rows.
  Matrix evaluate_batch(const Matrix& xs) const;

  // Same network with `offset` added to every output bias.
  Network with_output_offset(double offset) const;

 private:
  void check_input(const Vector& x) const;

  std::vector<Layer> layers_;
};

Network load_network(const std::filesystem::path& path);

// One single-output net per competitor class c != target, computing
// f_target - f_c. The property "target is the strict argmax" holds iff every
// returned net is positive.
std::vector<Network> encode_margin(const Network& net, std::size_t target_class);

class PerturbationSet {
 public:
  static PerturbationSet linf_ball(const Vector& x0, double epsilon);
  // Ball intersected with per-coordinate [clip_lo, clip_hi].
  static PerturbationSet linf_ball(const Vector& x0, double epsilon, const Vector& clip_lo,
                                   const Vector& clip_hi);
  static PerturbationSet box(const Vector& lower, const Vector& upper);

  static PerturbationSet from_json(const nlohmann::json& doc);

  std::size_t dim() const { return static_cast<std::size_t>(lower_.size()); }
  const Vector& x0() const { return x0_; }
  double epsilon() const { return epsilon_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Vector center() const { return 0.5 * (lower_ + upper_); }
  Vector radius() const { return 0.5 * (upper_ - lower_); }

  bool contains(const Vector& x, double tol = 0.0) const;
  Vector project(const Vector& x) const;

  nlohmann::json to_json() const;

 private:
  PerturbationSet(Vector x0, double epsilon, Vector lower, Vector upper);

  Vector x0_;
  double epsilon_ = 0.0;
  Vector lower_;
  Vector upper_;
};

PerturbationSet load_property(const std::filesystem::path& path);

}  // namespace relubound

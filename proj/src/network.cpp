// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include "relubound/network.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "relubound/error.hpp"

namespace relubound {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Parse: return "parse";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::UnsupportedActivation: return "unsupported-activation";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::RejectionBudgetExceeded: return "rejection-budget-exceeded";
    case ErrorCode::DegenerateTail: return "degenerate-tail";
    case ErrorCode::TooManyUnstable: return "too-many-unstable";
    case ErrorCode::LpFailure: return "lp-failure";
    case ErrorCode::Unsplittable: return "unsplittable";
  }
  return "unknown";
}

namespace {

std::string dims(Eigen::Index r, Eigen::Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

Matrix matrix_from_json(const nlohmann::json& rows, std::size_t layer_index) {
  if (!rows.is_array() || rows.empty()) {
    throw Error(ErrorCode::Parse,
                "layer " + std::to_string(layer_index) + ": weights must be a non-empty array of rows");
  }
  const std::size_t n_rows = rows.size();
  std::size_t n_cols = 0;
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (!rows[r].is_array() || rows[r].empty()) {
      throw Error(ErrorCode::Parse, "layer " + std::to_string(layer_index) + ": weight row " +
                                        std::to_string(r) + " is not a non-empty array");
    }
    if (r == 0) n_cols = rows[r].size();
    if (rows[r].size() != n_cols) {
      throw Error(ErrorCode::DimensionMismatch,
                  "layer " + std::to_string(layer_index) + ": ragged weight matrix");
    }
  }
  Matrix w(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      const auto& v = rows[r][c];
      if (!v.is_number()) {
        throw Error(ErrorCode::Parse, "layer " + std::to_string(layer_index) + ": non-numeric weight");
      }
      w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v.get<double>();
    }
  }
  return w;
}

Vector vector_from_json(const nlohmann::json& arr, const std::string& what) {
  if (!arr.is_array()) throw Error(ErrorCode::Parse, what + " must be an array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw Error(ErrorCode::Parse, what + " contains a non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

nlohmann::json vector_to_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Parse, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

}  // namespace

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::InvalidArgument, "network has no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const std::string tag = "layer " + std::to_string(i);
    if (l.weights.rows() == 0 || l.weights.cols() == 0) {
      throw Error(ErrorCode::DimensionMismatch, tag + ": empty weight matrix");
    }
    if (l.bias.size() != l.weights.rows()) {
      throw Error(ErrorCode::DimensionMismatch, tag + ": bias has " + std::to_string(l.bias.size()) +
                                                    " entries, weights are " +
                                                    dims(l.weights.rows(), l.weights.cols()));
    }
    if (i > 0 && l.weights.cols() != layers_[i - 1].weights.rows()) {
      throw Error(ErrorCode::DimensionMismatch,
                  tag + ": weights are " + dims(l.weights.rows(), l.weights.cols()) +
                      " but previous layer has " + std::to_string(layers_[i - 1].weights.rows()) +
                      " outputs");
    }
    if (!l.weights.allFinite() || !l.bias.allFinite()) {
      throw Error(ErrorCode::NonFinite, tag + ": non-finite weight or bias");
    }
    const bool last = i + 1 == layers_.size();
    if (last && l.activation != Activation::Identity) {
      throw Error(ErrorCode::UnsupportedActivation, "final layer must be linear");
    }
    if (!last && l.activation != Activation::Relu) {
      throw Error(ErrorCode::UnsupportedActivation, tag + ": hidden layers must be relu");
    }
  }
}

Network Network::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array()) {
    throw Error(ErrorCode::Parse, "model must be an object with a \"layers\" array");
  }
  std::vector<Layer> layers;
  const auto& arr = doc["layers"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& entry = arr[i];
    if (!entry.is_object() || !entry.contains("weights")) {
      throw Error(ErrorCode::Parse, "layer " + std::to_string(i) + ": missing \"weights\"");
    }
    Layer layer;
    layer.weights = matrix_from_json(entry["weights"], i);
    if (entry.contains("bias")) {
      layer.bias = vector_from_json(entry["bias"], "layer " + std::to_string(i) + " bias");
    } else {
      layer.bias = Vector::Zero(layer.weights.rows());
    }
    const std::string act = entry.value("activation", i + 1 == arr.size() ? "linear" : "relu");
    if (act == "relu") {
      layer.activation = Activation::Relu;
    } else if (act == "linear" || act == "identity") {
      layer.activation = Activation::Identity;
    } else {
      throw Error(ErrorCode::UnsupportedActivation,
                  "layer " + std::to_string(i) + ": unsupported activation \"" + act + "\"");
    }
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

nlohmann::json Network::to_json() const {
  nlohmann::json doc;
  doc["layers"] = nlohmann::json::array();
  for (const Layer& l : layers_) {
    nlohmann::json entry;
    entry["weights"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      entry["weights"].push_back(vector_to_json(l.weights.row(r).transpose()));
    }
    entry["bias"] = vector_to_json(l.bias);
    entry["activation"] = l.activation == Activation::Relu ? "relu" : "linear";
    doc["layers"].push_back(std::move(entry));
  }
  return doc;
}

std::size_t Network::hidden_neuron_count() const {
  std::size_t m = 0;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) m += static_cast<std::size_t>(layers_[i].weights.rows());
  return m;
}

void Network::require_single_output() const {
  if (output_dim() != 1) {
    throw Error(ErrorCode::InvalidArgument,
                "expected a single-output network, got " + std::to_string(output_dim()) +
                    " outputs (use encode_margin)");
  }
}

void Network::check_input(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input has dimension " + std::to_string(x.size()) +
                                                  ", network expects " + std::to_string(input_dim()));
  }
}

Vector Network::evaluate(const Vector& x) const {
  check_input(x);
  Vector h = x;
  for (const Layer& l : layers_) {
    Vector z = l.weights * h + l.bias;
    if (l.activation == Activation::Relu) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

double Network::forward(const Vector& x) const {
  require_single_output();
  return evaluate(x)(0);
}

std::vector<Vector> Network::pre_activations(const Vector& x) const {
  check_input(x);
  std::vector<Vector> out;
  out.reserve(layers_.size());
  Vector h = x;
  for (const Layer& l : layers_) {
    Vector z = l.weights * h + l.bias;
    out.push_back(z);
    h = l.activation == Activation::Relu ? Vector(z.cwiseMax(0.0)) : z;
  }
  return out;
}

Vector Network::gradient(const Vector& x) const {
  require_single_output();
  const auto pre = pre_activations(x);
  // Backward accumulation of d f / d h for each layer input.
  Eigen::RowVectorXd g = Eigen::RowVectorXd::Ones(1);
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Layer& l = layers_[i];
    if (l.activation == Activation::Relu) {
      for (Eigen::Index j = 0; j < g.size(); ++j) {
        if (!(pre[i](j) > 0.0)) g(j) = 0.0;
      }
    }
    g = g * l.weights;
  }
  return g.transpose();
}

Matrix Network::evaluate_batch(const Matrix& xs) const {
  if (static_cast<std::size_t>(xs.rows()) != input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "batch rows do not match input dimension");
  }
  Matrix h = xs;
  for (const Layer& l : layers_) {
    Matrix z = l.weights * h;
    z.colwise() += l.bias;
    if (l.activation == Activation::Relu) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

Network Network::with_output_offset(double offset) const {
  std::vector<Layer> copy = layers_;
  copy.back().bias.array() += offset;
  return Network(std::move(copy));
}

Network load_network(const std::filesystem::path& path) {
  return Network::from_json(read_json_file(path));
}

std::vector<Network> encode_margin(const Network& net, std::size_t target_class) {
  const std::size_t k = net.output_dim();
  if (k < 2) {
    throw Error(ErrorCode::InvalidArgument, "margin encoding needs at least two outputs");
  }
  if (target_class >= k) {
    throw Error(ErrorCode::InvalidArgument, "target class " + std::to_string(target_class) +
                                                " out of range for " + std::to_string(k) + " outputs");
  }
  // Fold (e_target - e_c)^T into the last affine layer instead of appending a
  // layer, which keeps the net in the ReLU*/Identity shape.
  std::vector<Network> out;
  const Layer& last = net.layers().back();
  const auto t = static_cast<Eigen::Index>(target_class);
  for (std::size_t c = 0; c < k; ++c) {
    if (c == target_class) continue;
    const auto ci = static_cast<Eigen::Index>(c);
    std::vector<Layer> layers = net.layers();
    Layer& fold = layers.back();
    fold.weights = (last.weights.row(t) - last.weights.row(ci)).eval();
    fold.bias = Vector::Constant(1, last.bias(t) - last.bias(ci));
    out.emplace_back(std::move(layers));
  }
  return out;
}

PerturbationSet::PerturbationSet(Vector x0, double epsilon, Vector lower, Vector upper)
    : x0_(std::move(x0)), epsilon_(epsilon), lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty perturbation region");
  if (lower_.size() != upper_.size() || x0_.size() != lower_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "region bounds have inconsistent dimensions");
  }
  if (!lower_.allFinite() || !upper_.allFinite() || !x0_.allFinite() || !std::isfinite(epsilon_)) {
    throw Error(ErrorCode::NonFinite, "region has non-finite bounds");
  }
  if ((lower_.array() > upper_.array()).any()) {
    throw Error(ErrorCode::InvalidArgument, "region lower bound exceeds upper bound");
  }
}

PerturbationSet PerturbationSet::linf_ball(const Vector& x0, double epsilon) {
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  return PerturbationSet(x0, epsilon, x0.array() - epsilon, x0.array() + epsilon);
}

PerturbationSet PerturbationSet::linf_ball(const Vector& x0, double epsilon, const Vector& clip_lo,
                                           const Vector& clip_hi) {
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  if (clip_lo.size() != x0.size() || clip_hi.size() != x0.size()) {
    throw Error(ErrorCode::DimensionMismatch, "clip bounds do not match x0");
  }
  Vector lo = (x0.array() - epsilon).max(clip_lo.array());
  Vector hi = (x0.array() + epsilon).min(clip_hi.array());
  return PerturbationSet(x0, epsilon, std::move(lo), std::move(hi));
}

PerturbationSet PerturbationSet::box(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size()) throw Error(ErrorCode::DimensionMismatch, "box bounds differ in size");
  Vector c = 0.5 * (lower + upper);
  const double eps = lower.size() ? 0.5 * (upper - lower).maxCoeff() : 0.0;
  return PerturbationSet(std::move(c), eps, lower, upper);
}

PerturbationSet PerturbationSet::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("x0") || !doc.contains("epsilon")) {
    throw Error(ErrorCode::Parse, "property must contain \"x0\" and \"epsilon\"");
  }
  Vector x0 = vector_from_json(doc["x0"], "x0");
  if (!doc["epsilon"].is_number()) throw Error(ErrorCode::Parse, "epsilon must be a number");
  const double eps = doc["epsilon"].get<double>();
  if (doc.contains("clip") && !doc["clip"].is_null()) {
    const auto& clip = doc["clip"];
    if (!clip.is_array() || clip.size() != static_cast<std::size_t>(x0.size())) {
      throw Error(ErrorCode::DimensionMismatch, "clip must have one [lo, hi] pair per input");
    }
    Vector lo(x0.size()), hi(x0.size());
    for (std::size_t i = 0; i < clip.size(); ++i) {
      const auto& pair = clip[i];
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
        throw Error(ErrorCode::Parse, "clip entries must be [lo, hi] number pairs");
      }
      lo(static_cast<Eigen::Index>(i)) = pair[0].get<double>();
      hi(static_cast<Eigen::Index>(i)) = pair[1].get<double>();
    }
    return linf_ball(x0, eps, lo, hi);
  }
  return linf_ball(x0, eps);
}

bool PerturbationSet::contains(const Vector& x, double tol) const {
  if (x.size() != lower_.size()) return false;
  return ((x.array() >= lower_.array() - tol) && (x.array() <= upper_.array() + tol)).all();
}

Vector PerturbationSet::project(const Vector& x) const {
  return x.cwiseMax(lower_).cwiseMin(upper_);
}

nlohmann::json PerturbationSet::to_json() const {
  nlohmann::json doc;
  doc["x0"] = vector_to_json(x0_);
  doc["epsilon"] = epsilon_;
  doc["lower"] = vector_to_json(lower_);
  doc["upper"] = vector_to_json(upper_);
  return doc;
}

PerturbationSet load_property(const std::filesystem::path& path) {
  return PerturbationSet::from_json(read_json_file(path));
}

}  // namespace relubound

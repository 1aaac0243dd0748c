#ifndef A4LAB_MLP_HPP
#define A4LAB_MLP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "a4lab/error.hpp"
#include "a4lab/forest.hpp"

namespace a4lab {

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Fully connected network with rectifier hidden layers and a single sigmoid
/// output giving the probability of the ad class. Evaluation-mode only:
/// dropout is applied by the trainer, never by the forward pass here.
class SurrogateMlp {
 public:
  SurrogateMlp() = default;

  /// He-initialized network with the given hidden widths.
  SurrogateMlp(std::size_t input_width, const std::vector<std::size_t>& hidden, std::uint64_t seed,
               double dropout = 0.1)
      : dropout_(dropout) {
    std::mt19937_64 rng(seed);
    std::size_t fan_in = input_width;
    std::vector<std::size_t> widths = hidden;
    widths.push_back(1);
    for (std::size_t w : widths) {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      DenseLayer layer{Eigen::MatrixXd(w, fan_in), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(w))};
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
      layers_.push_back(std::move(layer));
      fan_in = w;
    }
  }

  explicit SurrogateMlp(std::vector<DenseLayer> layers, double dropout = 0.1)
      : layers_(std::move(layers)), dropout_(dropout) {
    if (layers_.empty()) throw Error(Errc::malformed, "network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].bias.size() != layers_[l].weights.rows())
        throw Error(Errc::malformed, "bias length differs from layer width");
      if (l > 0 && layers_[l].weights.cols() != layers_[l - 1].weights.rows())
        throw Error(Errc::malformed, "consecutive layer shapes do not chain");
    }
    if (layers_.back().weights.rows() != 1) throw Error(Errc::malformed, "output layer must have one unit");
  }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }
  double dropout() const noexcept { return dropout_; }

  std::size_t input_width() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weights.cols());
  }

  std::vector<std::size_t> hidden_widths() const {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) out.push_back(static_cast<std::size_t>(layers_[l].weights.rows()));
    return out;
  }

  double logit(std::span<const double> x) const {
    check_width(x.size());
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::VectorXd z = layers_[l].weights * a + layers_[l].bias;
      a = l + 1 < layers_.size() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    return a(0);
  }

  double predict_ad_probability(std::span<const double> x) const { return sigmoid(logit(x)); }

  Prediction predict(std::span<const double> x) const {
    double p = predict_ad_probability(x);
    return {p > 0.5 ? Label::ad : Label::non_ad, p};
  }

  /// Binary cross-entropy of the prediction against `target`.
  double loss(std::span<const double> x, Label target) const { return bce_with_logit(logit(x), target); }

  /// dL/dx of the binary cross-entropy, by reverse-mode differentiation.
  std::vector<double> input_gradient(std::span<const double> x, Label target) const {
    check_width(x.size());
    std::vector<Eigen::VectorXd> pre;
    pre.reserve(layers_.size());
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      pre.push_back(layers_[l].weights * a + layers_[l].bias);
      if (l + 1 < layers_.size()) a = pre.back().cwiseMax(0.0);
    }
    double y = target == Label::ad ? 1.0 : 0.0;
    Eigen::VectorXd g(1);
    g(0) = sigmoid(pre.back()(0)) - y;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (l + 1 < layers_.size()) g = g.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix());
      g = layers_[l].weights.transpose() * g;
    }
    return {g.data(), g.data() + g.size()};
  }

  static double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
  }

  static double bce_with_logit(double z, Label target) {
    double y = target == Label::ad ? 1.0 : 0.0;
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }

 private:
  void check_width(std::size_t n) const {
    if (n != input_width())
      throw Error(Errc::dimension_mismatch,
                  "input width " + std::to_string(n) + " != network width " + std::to_string(input_width()));
  }

  std::vector<DenseLayer> layers_;
  double dropout_ = 0.1;
};

struct SurrogateConfig {
  std::vector<std::size_t> hidden = {1024, 512, 128};
  double dropout = 0.1;
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 40;
  std::size_t patience = 8;
  double holdout_fraction = 0.15;
  std::uint64_t seed = 1;
};

struct SurrogateTraining {
  SurrogateMlp model;
  double holdout_agreement = 0.0;
  std::size_t epochs = 0;
  bool diverged = false;
};

inline double agreement_rate(const SurrogateMlp& model, const LabeledMatrix& data) {
  if (data.rows() == 0) return 0.0;
  std::size_t same = 0;
  for (std::size_t r = 0; r < data.rows(); ++r)
    if (model.predict(data.row(r)).label == data.labels[r]) ++same;
  return static_cast<double>(same) / static_cast<double>(data.rows());
}

/// Mini-batch gradient descent with a fixed learning rate on binary
/// cross-entropy. `data` holds normalized inputs labelled by the target model.
/// Keeps the weights with the best agreement on an internal held-out split and
/// stops after `patience` epochs without improvement.
inline SurrogateTraining train_surrogate(const LabeledMatrix& data, const SurrogateConfig& config = {}) {
  if (data.rows() < 2) throw Error(Errc::empty_corpus, "surrogate needs at least two samples");
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  auto holdout_n = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(data.rows())));
  holdout_n = std::min(holdout_n, data.rows() - 1);

  LabeledMatrix holdout;
  holdout.width = data.width;
  for (std::size_t i = 0; i < holdout_n; ++i) holdout.push_back(data.row(order[i]), data.labels[order[i]]);
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(holdout_n), order.end());
  if (holdout.rows() == 0) {
    for (std::size_t r : train) holdout.push_back(data.row(r), data.labels[r]);
  }

  SurrogateTraining result{SurrogateMlp(data.width, config.hidden, config.seed ^ 0x5eedULL, config.dropout)};
  SurrogateMlp& net = result.model;
  auto& layers = net.mutable_layers();
  const std::size_t depth = layers.size();
  const double keep = 1.0 - config.dropout;

  SurrogateMlp best = net;
  double best_agreement = agreement_rate(net, holdout);
  std::size_t stale = 0;
  std::bernoulli_distribution keep_unit(keep);

  std::vector<Eigen::MatrixXd> pre(depth), act(depth + 1), mask(depth);
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t start = 0; start < train.size(); start += config.batch_size) {
      std::size_t b = std::min(config.batch_size, train.size() - start);
      Eigen::MatrixXd x(static_cast<Eigen::Index>(data.width), static_cast<Eigen::Index>(b));
      Eigen::RowVectorXd y(static_cast<Eigen::Index>(b));
      for (std::size_t i = 0; i < b; ++i) {
        auto row = data.row(train[start + i]);
        x.col(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
        y(static_cast<Eigen::Index>(i)) = data.labels[train[start + i]] == Label::ad ? 1.0 : 0.0;
      }
      act[0] = std::move(x);
      for (std::size_t l = 0; l < depth; ++l) {
        pre[l] = (layers[l].weights * act[l]).colwise() + layers[l].bias;
        if (l + 1 < depth) {
          mask[l] = Eigen::MatrixXd(pre[l].rows(), pre[l].cols());
          for (Eigen::Index k = 0; k < mask[l].size(); ++k) mask[l].data()[k] = keep_unit(rng) ? 1.0 / keep : 0.0;
          act[l + 1] = pre[l].cwiseMax(0.0).cwiseProduct(mask[l]);
        }
      }
      Eigen::MatrixXd delta = pre[depth - 1].unaryExpr([](double z) { return SurrogateMlp::sigmoid(z); });
      delta.row(0) -= y;
      delta /= static_cast<double>(b);
      for (std::size_t l = depth; l-- > 0;) {
        Eigen::MatrixXd grad_w = delta * act[l].transpose();
        Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (l > 0) {
          Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
          delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix()).cwiseProduct(mask[l - 1]);
        }
        layers[l].weights -= config.learning_rate * grad_w;
        layers[l].bias -= config.learning_rate * grad_b;
      }
    }
    result.epochs = epoch + 1;
    if (!layers.back().weights.allFinite()) {
      result.diverged = true;
      break;
    }
    double agreement = agreement_rate(net, holdout);
    if (agreement > best_agreement) {
      best_agreement = agreement;
      best = net;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  result.model = std::move(best);
  result.holdout_agreement = best_agreement;
  return result;
}

inline nlohmann::json mlp_to_json(const SurrogateMlp& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.push_back(layer.weights(r, c));
    std::vector<double> b(layer.bias.data(), layer.bias.data() + layer.bias.size());
    layers.push_back({{"rows", layer.weights.rows()}, {"cols", layer.weights.cols()}, {"weights", w}, {"bias", b}});
  }
  return {{"type", "surrogate_mlp"},
          {"input_width", model.input_width()},
          {"hidden", model.hidden_widths()},
          {"dropout", model.dropout()},
          {"layers", layers}};
}

inline SurrogateMlp mlp_from_json(const nlohmann::json& j) {
  try {
    if (j.at("type").get<std::string>() != "surrogate_mlp")
      throw Error(Errc::schema_mismatch, "document is not a surrogate network");
    std::vector<DenseLayer> layers;
    for (const auto& l : j.at("layers")) {
      auto rows = l.at("rows").get<Eigen::Index>();
      auto cols = l.at("cols").get<Eigen::Index>();
      auto w = l.at("weights").get<std::vector<double>>();
      auto b = l.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
        throw Error(Errc::malformed, "layer arrays do not match the declared shape");
      DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      for (Eigen::Index r = 0; r < rows; ++r) layer.bias(r) = b[static_cast<std::size_t>(r)];
      layers.push_back(std::move(layer));
    }
    return SurrogateMlp(std::move(layers), j.value("dropout", 0.1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, e.what());
  }
}

}  // namespace a4lab

#endif  // A4LAB_MLP_HPP

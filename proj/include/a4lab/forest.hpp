#ifndef A4LAB_FOREST_HPP
#define A4LAB_FOREST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "a4lab/error.hpp"

namespace a4lab {

enum class Label { non_ad = 0, ad = 1 };

inline std::string_view to_string(Label l) { return l == Label::ad ? "ad" : "non_ad"; }

inline Label parse_label(std::string_view s) {
  if (s == "ad") return Label::ad;
  if (s == "non_ad") return Label::non_ad;
  throw Error(Errc::malformed, "unknown label '" + std::string(s) + "'");
}

/// `probability` is the estimated probability of the ad class.
struct Prediction {
  Label label = Label::non_ad;
  double probability = 0.0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Dense row-major design matrix with one label per row.
struct LabeledMatrix {
  std::size_t width = 0;
  std::vector<double> data;
  std::vector<Label> labels;

  std::size_t rows() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * width, width}; }

  void push_back(std::span<const double> x, Label y) {
    if (width == 0 && labels.empty()) width = x.size();
    if (x.size() != width) throw Error(Errc::dimension_mismatch, "row width differs from matrix width");
    data.insert(data.end(), x.begin(), x.end());
    labels.push_back(y);
  }
};

/// Shannon entropy in bits of the empirical distribution given by `counts`.
inline double entropy(std::span<const std::size_t> counts) {
  std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total == 0) throw std::invalid_argument("entropy of all-zero counts is undefined");
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

namespace detail {

inline double entropy2(std::size_t ad, std::size_t non_ad) {
  const std::size_t counts[2] = {ad, non_ad};
  return entropy(counts);
}

}  // namespace detail

/// Binary decision tree over dense feature rows. A node with feature < 0 is a
/// leaf; otherwise rows with x[feature] <= threshold go left.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double prob_ad = 0.0;

    bool leaf() const noexcept { return feature < 0; }
  };

  DecisionTree() = default;

  DecisionTree(std::vector<Node> nodes, std::size_t width) : nodes_(std::move(nodes)), width_(width) {
    if (nodes_.empty()) throw Error(Errc::malformed, "tree has no nodes");
    for (const auto& n : nodes_) {
      if (n.leaf()) {
        if (!(n.prob_ad >= 0.0 && n.prob_ad <= 1.0)) throw Error(Errc::malformed, "leaf probability outside [0,1]");
        continue;
      }
      auto count = static_cast<int>(nodes_.size());
      if (static_cast<std::size_t>(n.feature) >= width_ || n.left <= 0 || n.right <= 0 || n.left >= count ||
          n.right >= count)
        throw Error(Errc::malformed, "tree node references an invalid feature or child");
    }
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t width() const noexcept { return width_; }

  /// Index of the leaf reached by x.
  std::size_t leaf_index(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].leaf()) {
      const Node& n = nodes_[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return i;
  }

  double predict_ad_probability(std::span<const double> x) const { return nodes_[leaf_index(x)].prob_ad; }

  std::size_t depth() const {
    std::vector<std::pair<std::size_t, std::size_t>> stack = {{0, 0}};
    std::size_t best = 0;
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes_[i].leaf()) {
        stack.emplace_back(static_cast<std::size_t>(nodes_[i].left), d + 1);
        stack.emplace_back(static_cast<std::size_t>(nodes_[i].right), d + 1);
      }
    }
    return best;
  }

 private:
  std::vector<Node> nodes_;
  std::size_t width_ = 0;
};

class RandomForest {
 public:
  RandomForest() = default;

  explicit RandomForest(std::vector<DecisionTree> trees) : trees_(std::move(trees)) {
    if (trees_.empty()) throw Error(Errc::malformed, "forest needs at least one tree");
    for (const auto& t : trees_)
      if (t.width() != trees_.front().width()) throw Error(Errc::malformed, "trees disagree on input width");
  }

  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  std::size_t width() const noexcept { return trees_.empty() ? 0 : trees_.front().width(); }

  /// Mean leaf probability over trees; the label is ad only when that mean is
  /// strictly above one half. Per-tree values are summed in sorted order so
  /// that the result does not depend on tree order.
  Prediction predict(std::span<const double> x) const {
    if (x.size() != width())
      throw Error(Errc::dimension_mismatch,
                  "input width " + std::to_string(x.size()) + " != model width " + std::to_string(width()));
    std::vector<double> votes;
    votes.reserve(trees_.size());
    for (const auto& t : trees_) votes.push_back(t.predict_ad_probability(x));
    std::sort(votes.begin(), votes.end());
    double sum = 0.0;
    for (double v : votes) sum += v;
    double p = sum / static_cast<double>(trees_.size());
    return {p > 0.5 ? Label::ad : Label::non_ad, p};
  }

 private:
  std::vector<DecisionTree> trees_;
};

inline Prediction rf_predict(const RandomForest& model, std::span<const double> x) { return model.predict(x); }

struct ForestConfig {
  std::size_t trees = 100;
  std::uint64_t seed = 1;
  std::size_t max_features = 0;  // 0 selects ceil(sqrt(width))
  bool bootstrap = true;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const LabeledMatrix& data, std::size_t mtry, std::mt19937_64& rng)
      : data_(data), mtry_(mtry), rng_(rng) {}

  DecisionTree build(std::vector<std::size_t> rows) {
    nodes_.clear();
    nodes_.push_back({});
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> work;
    work.emplace_back(0, std::move(rows));
    while (!work.empty()) {
      auto [index, members] = std::move(work.back());
      work.pop_back();
      std::size_t ads = count_ads(members);
      nodes_[index].prob_ad = static_cast<double>(ads) / static_cast<double>(members.size());
      if (ads == 0 || ads == members.size()) continue;
      auto split = best_split(members, ads);
      if (!split) continue;
      std::vector<std::size_t> left, right;
      for (std::size_t r : members)
        (data_.row(r)[split->feature] <= split->threshold ? left : right).push_back(r);
      auto l = static_cast<int>(nodes_.size());
      nodes_.push_back({});
      nodes_.push_back({});
      nodes_[index].feature = static_cast<int>(split->feature);
      nodes_[index].threshold = split->threshold;
      nodes_[index].left = l;
      nodes_[index].right = l + 1;
      work.emplace_back(static_cast<std::size_t>(l), std::move(left));
      work.emplace_back(static_cast<std::size_t>(l + 1), std::move(right));
    }
    return DecisionTree(std::move(nodes_), data_.width);
  }

 private:
  struct Split {
    std::size_t feature;
    double threshold;
  };

  std::size_t count_ads(const std::vector<std::size_t>& rows) const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [&](std::size_t r) { return data_.labels[r] == Label::ad; }));
  }

  // Draws features in random order until `mtry` non-constant ones have been
  // evaluated (or all are exhausted) and keeps the highest-gain threshold.
  std::optional<Split> best_split(const std::vector<std::size_t>& members, std::size_t ads) {
    std::vector<std::size_t> features(data_.width);
    std::iota(features.begin(), features.end(), std::size_t{0});
    std::shuffle(features.begin(), features.end(), rng_);

    const std::size_t n = members.size();
    const double parent_h = entropy2(ads, n - ads);
    std::optional<Split> best;
    double best_gain = -1.0;
    std::size_t visited = 0;
    std::vector<std::pair<double, bool>> column(n);
    for (std::size_t f : features) {
      if (visited >= mtry_) break;
      for (std::size_t i = 0; i < n; ++i)
        column[i] = {data_.row(members[i])[f], data_.labels[members[i]] == Label::ad};
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (column.front().first == column.back().first) continue;
      ++visited;
      std::size_t left_ads = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        if (column[i].second) ++left_ads;
        if (column[i].first == column[i + 1].first) continue;
        std::size_t nl = i + 1, nr = n - nl;
        std::size_t right_ads = ads - left_ads;
        double h = (static_cast<double>(nl) * entropy2(left_ads, nl - left_ads) +
                    static_cast<double>(nr) * entropy2(right_ads, nr - right_ads)) /
                   static_cast<double>(n);
        double gain = parent_h - h;
        if (gain > best_gain) {
          best_gain = gain;
          double mid = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
          // Guard against the midpoint rounding onto the upper value.
          if (!(mid < column[i + 1].first)) mid = column[i].first;
          best = Split{f, mid};
        }
      }
    }
    return best;
  }

  const LabeledMatrix& data_;
  std::size_t mtry_;
  std::mt19937_64& rng_;
  std::vector<DecisionTree::Node> nodes_;
};

}  // namespace detail

/// Bagged entropy-split trees grown without a depth limit.
inline RandomForest train_forest(const LabeledMatrix& data, const ForestConfig& config = {}) {
  if (data.rows() == 0) throw Error(Errc::empty_corpus, "cannot train a forest on no data");
  bool has_ad = std::find(data.labels.begin(), data.labels.end(), Label::ad) != data.labels.end();
  bool has_non_ad = std::find(data.labels.begin(), data.labels.end(), Label::non_ad) != data.labels.end();
  if (!has_ad || !has_non_ad) throw Error(Errc::single_class, "training data must contain both classes");
  if (config.trees == 0) throw Error(Errc::invalid_config, "forest needs at least one tree");

  std::size_t mtry = config.max_features > 0
                         ? config.max_features
                         : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(data.width))));
  std::vector<DecisionTree> trees;
  trees.reserve(config.trees);
  for (std::size_t t = 0; t < config.trees; ++t) {
    std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ULL + t);
    std::vector<std::size_t> rows(data.rows());
    if (config.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, data.rows() - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    detail::TreeBuilder builder(data, mtry, rng);
    trees.push_back(builder.build(std::move(rows)));
  }
  return RandomForest(std::move(trees));
}

inline double accuracy(const RandomForest& forest, const LabeledMatrix& data) {
  if (data.rows() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.rows(); ++r)
    if (forest.predict(data.row(r)).label == data.labels[r]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.rows());
}

inline nlohmann::json forest_to_json(const RandomForest& forest) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : forest.trees()) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold, prob;
    for (const auto& n : t.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      prob.push_back(n.prob_ad);
    }
    trees.push_back(
        {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"prob_ad", prob}});
  }
  return {{"type", "random_forest"}, {"width", forest.width()}, {"trees", trees}};
}

inline RandomForest forest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("type").get<std::string>() != "random_forest")
      throw Error(Errc::schema_mismatch, "document is not a random forest");
    auto width = j.at("width").get<std::size_t>();
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) {
      auto feature = t.at("feature").get<std::vector<int>>();
      auto threshold = t.at("threshold").get<std::vector<double>>();
      auto left = t.at("left").get<std::vector<int>>();
      auto right = t.at("right").get<std::vector<int>>();
      auto prob = t.at("prob_ad").get<std::vector<double>>();
      std::size_t n = feature.size();
      if (threshold.size() != n || left.size() != n || right.size() != n || prob.size() != n)
        throw Error(Errc::malformed, "tree arrays differ in length");
      std::vector<DecisionTree::Node> nodes(n);
      for (std::size_t i = 0; i < n; ++i) nodes[i] = {feature[i], threshold[i], left[i], right[i], prob[i]};
      trees.emplace_back(std::move(nodes), width);
    }
    return RandomForest(std::move(trees));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, e.what());
  }
}

}  // namespace a4lab

#endif  // A4LAB_FOREST_HPP

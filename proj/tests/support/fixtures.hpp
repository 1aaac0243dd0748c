// Shared graph builders, handcrafted models and generators for the suites.
#ifndef A4LAB_TESTS_FIXTURES_HPP
#define A4LAB_TESTS_FIXTURES_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "a4lab/attack.hpp"
#include "a4lab/features.hpp"
#include "a4lab/forest.hpp"
#include "a4lab/mlp.hpp"
#include "a4lab/page_graph.hpp"

namespace a4lab::fixtures {

inline PageNode element(NodeId id, std::string tag = "div") {
  return PageNode{id, NodeKind::element, std::move(tag), std::nullopt, false};
}

inline PageNode request(NodeId id, const std::string& url, std::string tag = "script") {
  return PageNode{id, NodeKind::request, std::move(tag), Url::from_markup(url), false};
}

inline PageNode root() { return PageNode{0, NodeKind::root, std::nullopt, std::nullopt, false}; }

inline PageEdge structure(NodeId from, NodeId to) { return PageEdge{from, to, EdgeKind::structure}; }

/// root -> e1 -> ... -> e(n-2) -> request, n >= 2.
inline PageGraph chain(std::size_t n, const std::string& url = "http://cdn.y.org/lib.js",
                       const std::string& domain = "x.com") {
  std::vector<PageNode> nodes = {root()};
  std::vector<PageEdge> edges;
  for (NodeId i = 1; i + 1 < n; ++i) nodes.push_back(element(i));
  nodes.push_back(request(static_cast<NodeId>(n - 1), url));
  for (NodeId i = 1; i < n; ++i) edges.push_back(structure(i - 1, i));
  return PageGraph(nodes, edges, static_cast<NodeId>(n - 1), domain);
}

/// root -> element -> request.
inline PageGraph three_node(const std::string& url, const std::string& domain = "example.org") {
  return PageGraph({root(), element(1), request(2, url, "script")}, {structure(0, 1), structure(1, 2)}, 2, domain);
}

/// Root hub with four element leaves and the request as a fifth child.
inline PageGraph star() {
  std::vector<PageNode> nodes = {root()};
  std::vector<PageEdge> edges;
  for (NodeId i = 1; i <= 4; ++i) {
    nodes.push_back(element(i));
    edges.push_back(structure(0, i));
  }
  nodes.push_back(request(5, "http://cdn.y.org/a.png", "img"));
  edges.push_back(structure(0, 5));
  return PageGraph(nodes, edges, 5, "x.com");
}

/// Random valid graph: a random structure tree plus a few non-structure edges.
inline PageGraph random_graph(std::mt19937_64& rng, std::size_t n) {
  std::vector<PageNode> nodes = {root()};
  std::vector<PageEdge> edges;
  std::uniform_int_distribution<int> coin(0, 3);
  NodeId request_id = static_cast<NodeId>(n - 1);
  for (NodeId i = 1; i < n; ++i) {
    if (i == request_id)
      nodes.push_back(request(i, "http://ads.t.net/p?x=1;y=2", "img"));
    else if (coin(rng) == 0)
      nodes.push_back(PageNode{i, NodeKind::script, std::string("script"), std::nullopt, false});
    else
      nodes.push_back(element(i));
    std::uniform_int_distribution<NodeId> parent(0, i - 1);
    edges.push_back(structure(parent(rng), i));
  }
  std::uniform_int_distribution<NodeId> any(0, static_cast<NodeId>(n - 1));
  for (std::size_t k = 0; k < n / 3; ++k) {
    NodeId a = any(rng), b = any(rng);
    if (a != b) edges.push_back(PageEdge{a, b, coin(rng) < 2 ? EdgeKind::creates : EdgeKind::initiates});
  }
  return PageGraph(nodes, edges, request_id, "site.com");
}

/// Stats with min 0 and the given maxima on numeric columns, [0, 1] elsewhere.
inline NormalizationStats stats_with_max(const std::vector<std::pair<std::size_t, double>>& maxima) {
  NormalizationStats s{std::vector<double>(col::width, 0.0), std::vector<double>(col::width, 1.0)};
  for (const auto& [c, m] : maxima) s.max[c] = m;
  return s;
}

/// Logistic model without hidden layers: logit = bias + w . x.
inline SurrogateMlp linear_surrogate(const std::vector<std::pair<std::size_t, double>>& weights, double bias) {
  DenseLayer layer{Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(col::width)), Eigen::VectorXd::Constant(1, bias)};
  for (const auto& [c, w] : weights) layer.weights(0, static_cast<Eigen::Index>(c)) = w;
  return SurrogateMlp({layer});
}

using TreeNode = DecisionTree::Node;

inline TreeNode split(std::size_t feature, double threshold, int left, int right) {
  return TreeNode{static_cast<int>(feature), threshold, left, right, 0.0};
}

inline TreeNode leaf(double prob_ad) { return TreeNode{-1, 0.0, -1, -1, prob_ad}; }

inline RandomForest single_tree(std::vector<TreeNode> nodes) {
  return RandomForest({DecisionTree(std::move(nodes), col::width)});
}

/// Everything an attack needs, owned in one place.
struct Bench {
  FeatureSchema schema = default_schema();
  UrlPatterns patterns;
  NormalizationStats stats;
  RandomForest target;
  SurrogateMlp surrogate;
  PageGraph graph;

  AttackContext context() const { return {schema, patterns, stats, target, surrogate}; }
};

/// Page whose forest wants more nodes, but only if the average degree
/// connectivity stays low. Iteration 1 adds one node (not enough), iteration 2
/// adds two: distributed insertion keeps the connectivity at 3.07, centralized
/// pushes it to 3.74.
///
///   root(0) -> e1(1) -> e2(2) -> request(4)
///                    -> e3(3)
inline Bench side_effect_bench() {
  PageGraph g({root(), element(1), element(2), element(3), request(4, "http://cdn.y.org/lib.js")},
              {structure(0, 1), structure(1, 2), structure(1, 3), structure(2, 4)}, 4, "x.com");
  RandomForest forest = single_tree({split(col::node_count, 6.5, 1, 2), leaf(1.0),
                                     split(col::degree_connectivity, 3.4, 3, 4), leaf(0.0), leaf(1.0)});
  return Bench{default_schema(),
               UrlPatterns{},
               stats_with_max({{col::node_count, 10.0}, {col::url_length, 100.0}, {col::edge_count, 10.0},
                               {col::degree_connectivity, 5.0}}),
               std::move(forest),
               linear_surrogate({{col::node_count, -10.0}}, 5.5),
               std::move(g)};
}

/// Page whose forest decision hinges on the ad-keyword flag alone.
inline Bench keyword_bench() {
  RandomForest forest = single_tree({split(col::ad_keyword, 0.5, 1, 2), leaf(0.0), leaf(1.0)});
  return Bench{default_schema(),
               UrlPatterns{},
               stats_with_max({{col::node_count, 50.0}, {col::url_length, 200.0}}),
               std::move(forest),
               linear_surrogate({{col::ad_keyword, 10.0}}, -5.0),
               three_node("http://srv.t.net/ads/x.js?z=1", "example.org")};
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Arbitrary raw-space vector: columns may be negative, fractional or out of
/// their domain.
inline FeatureVector random_vector(std::mt19937_64& rng, double scale = 50.0) {
  FeatureVector v(col::width);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = uniform(rng, -0.5, 1.5) * (i < col::resource_type ? scale : 1.0);
  return v;
}

/// A schema-valid raw vector, as extraction would produce.
inline FeatureVector random_valid_vector(std::mt19937_64& rng, const FeatureSchema& schema) {
  FeatureVector v(col::width);
  std::uniform_int_distribution<int> count(0, 200);
  std::uniform_int_distribution<int> bit(0, 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Column& c = schema.column(i);
    if (c.kind == FeatureKind::numeric_integer) v[i] = count(rng);
    else if (c.kind == FeatureKind::numeric_real) v[i] = uniform(rng, 0.0, 10.0);
    else if (c.kind == FeatureKind::binary) v[i] = bit(rng);
  }
  std::uniform_int_distribution<std::size_t> type(0, resource_types().size() - 1);
  v[col::resource_type + type(rng)] = 1.0;
  return v;
}

}  // namespace a4lab::fixtures

#endif  // A4LAB_TESTS_FIXTURES_HPP

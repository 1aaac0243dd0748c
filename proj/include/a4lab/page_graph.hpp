#ifndef A4LAB_PAGE_GRAPH_HPP
#define A4LAB_PAGE_GRAPH_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "a4lab/error.hpp"
#include "a4lab/url.hpp"

namespace a4lab {

using NodeId = std::int64_t;

enum class NodeKind { root, element, script, request };
enum class EdgeKind { structure, creates, initiates };

inline std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::root: return "root";
    case NodeKind::element: return "element";
    case NodeKind::script: return "script";
    case NodeKind::request: return "request";
  }
  return "?";
}

inline std::string_view to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::structure: return "structure";
    case EdgeKind::creates: return "creates";
    case EdgeKind::initiates: return "initiates";
  }
  return "?";
}

struct PageNode {
  NodeId id = 0;
  NodeKind kind = NodeKind::element;
  std::optional<std::string> tag;
  std::optional<Url> url;  // present iff kind == request
  bool hidden = false;

  friend bool operator==(const PageNode&, const PageNode&) = default;
};

struct PageEdge {
  NodeId from = 0;
  NodeId to = 0;
  EdgeKind kind = EdgeKind::structure;

  friend bool operator==(const PageEdge&, const PageEdge&) = default;
  friend bool operator<(const PageEdge& a, const PageEdge& b) {
    return std::tie(a.from, a.to, a.kind) < std::tie(b.from, b.to, b.kind);
  }
};

enum class MapBackVariant { centralized, distributed };

inline std::string_view to_string(MapBackVariant v) {
  return v == MapBackVariant::centralized ? "centralized" : "distributed";
}

/// How perturbation nodes are attached to the page.
struct MapBackStrategy {
  MapBackVariant variant = MapBackVariant::centralized;
  std::uint64_t anchor_seed = 0;

  friend bool operator==(const MapBackStrategy&, const MapBackStrategy&) = default;
};

/// Load graph of one page with the request under classification designated.
/// Immutable: nodes are kept sorted by id and edges by (from, to, kind), and
/// the constructor rejects anything that violates the graph invariants.
class PageGraph {
 public:
  PageGraph(std::vector<PageNode> nodes, std::vector<PageEdge> edges, NodeId request_id,
            std::string page_domain = {})
      : nodes_(std::move(nodes)),
        edges_(std::move(edges)),
        request_id_(request_id),
        page_domain_(std::move(page_domain)) {
    std::sort(nodes_.begin(), nodes_.end(), [](const PageNode& a, const PageNode& b) { return a.id < b.id; });
    std::sort(edges_.begin(), edges_.end());
    validate();
  }

  const std::vector<PageNode>& nodes() const noexcept { return nodes_; }
  const std::vector<PageEdge>& edges() const noexcept { return edges_; }
  NodeId request_id() const noexcept { return request_id_; }
  const std::string& page_domain() const noexcept { return page_domain_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Position of `id` in nodes(), if present.
  std::optional<std::size_t> index_of(NodeId id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                               [](const PageNode& n, NodeId v) { return n.id < v; });
    if (it == nodes_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - nodes_.begin());
  }

  const PageNode& node(NodeId id) const {
    auto idx = index_of(id);
    if (!idx) throw Error(Errc::invalid_node, "unknown node id " + std::to_string(id));
    return nodes_[*idx];
  }

  const PageNode& request() const { return node(request_id_); }

  NodeId max_id() const { return nodes_.empty() ? 0 : nodes_.back().id; }

  /// Structure parent of a node; nullopt for the root.
  std::optional<NodeId> structure_parent(NodeId id) const {
    for (const auto& e : edges_)
      if (e.kind == EdgeKind::structure && e.to == id) return e.from;
    return std::nullopt;
  }

  std::size_t structure_child_count(NodeId id) const {
    return static_cast<std::size_t>(std::count_if(edges_.begin(), edges_.end(), [&](const PageEdge& e) {
      return e.kind == EdgeKind::structure && e.from == id;
    }));
  }

  /// Copy of this graph whose request node carries a different URL.
  PageGraph with_request_url(Url url) const {
    auto nodes = nodes_;
    nodes[*index_of(request_id_)].url = std::move(url);
    return PageGraph(std::move(nodes), edges_, request_id_, page_domain_);
  }

  friend bool operator==(const PageGraph&, const PageGraph&) = default;

 private:
  void validate() const {
    std::size_t roots = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (i > 0 && nodes_[i - 1].id == n.id)
        throw Error(Errc::duplicate_id, "node id " + std::to_string(n.id) + " appears twice");
      if (n.kind == NodeKind::root) ++roots;
      if ((n.kind == NodeKind::request) != n.url.has_value())
        throw Error(Errc::invalid_node, "node " + std::to_string(n.id) + ": url must be present iff kind is request");
    }
    auto req = index_of(request_id_);
    if (!req || nodes_[*req].kind != NodeKind::request)
      throw Error(Errc::missing_request, "request_id " + std::to_string(request_id_) + " is not a request node");
    if (roots != 1) throw Error(Errc::invalid_structure, "graph must have exactly one root node");

    std::vector<int> parents(nodes_.size(), 0);
    std::vector<std::size_t> parent_of(nodes_.size(), 0);
    for (const auto& e : edges_) {
      auto from = index_of(e.from);
      auto to = index_of(e.to);
      if (!from || !to)
        throw Error(Errc::dangling_edge,
                    "edge " + std::to_string(e.from) + "->" + std::to_string(e.to) + " references an unknown node");
      if (*from == *to) throw Error(Errc::invalid_structure, "self-loop on node " + std::to_string(e.from));
      if (e.kind == EdgeKind::structure) {
        ++parents[*to];
        parent_of[*to] = *from;
      }
    }
    // Structure edges must form a spanning tree rooted at the root node.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      int expected = nodes_[i].kind == NodeKind::root ? 0 : 1;
      if (parents[i] != expected)
        throw Error(Errc::invalid_structure,
                    "node " + std::to_string(nodes_[i].id) + " has " + std::to_string(parents[i]) + " structure parents");
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      std::size_t cur = i;
      for (std::size_t steps = 0; nodes_[cur].kind != NodeKind::root; ++steps) {
        if (steps > nodes_.size())
          throw Error(Errc::invalid_structure, "structure cycle through node " + std::to_string(nodes_[i].id));
        cur = parent_of[cur];
      }
    }
  }

  std::vector<PageNode> nodes_;
  std::vector<PageEdge> edges_;
  NodeId request_id_ = 0;
  std::string page_domain_;
};

/// Graph-level mean of every node's mean neighbour degree, on the undirected
/// multigraph given by `edges` over vertices [0, vertex_count). A neighbour is
/// counted once per incident edge; isolated vertices contribute 0.
inline double average_degree_connectivity(std::size_t vertex_count,
                                          std::span<const std::pair<std::size_t, std::size_t>> edges) {
  if (vertex_count == 0) return 0.0;
  std::vector<std::size_t> degree(vertex_count, 0);
  for (const auto& [a, b] : edges) {
    ++degree[a];
    ++degree[b];
  }
  std::vector<std::size_t> neighbour_sum(vertex_count, 0);
  for (const auto& [a, b] : edges) {
    neighbour_sum[a] += degree[b];
    neighbour_sum[b] += degree[a];
  }
  double total = 0.0;
  for (std::size_t v = 0; v < vertex_count; ++v)
    if (degree[v] > 0) total += static_cast<double>(neighbour_sum[v]) / static_cast<double>(degree[v]);
  return total / static_cast<double>(vertex_count);
}

inline std::vector<std::pair<std::size_t, std::size_t>> undirected_edges(const PageGraph& graph) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(graph.edges().size());
  for (const auto& e : graph.edges()) out.emplace_back(*graph.index_of(e.from), *graph.index_of(e.to));
  return out;
}

/// All edge kinds count, direction is ignored.
inline double average_degree_connectivity(const PageGraph& graph) {
  auto edges = undirected_edges(graph);
  return average_degree_connectivity(graph.node_count(), edges);
}

/// Original (non-hidden) element nodes, ascending by id. Perturbation nodes
/// never serve as anchors.
inline std::vector<NodeId> eligible_anchors(const PageGraph& graph) {
  std::vector<NodeId> out;
  for (const auto& n : graph.nodes())
    if (n.kind == NodeKind::element && !n.hidden) out.push_back(n.id);
  return out;
}

/// Adds `count` hidden elements as structure children of existing elements.
/// Centralized attaches all of them to one anchor; distributed walks the
/// anchors round-robin. Both start at anchor `anchor_seed mod #anchors`.
inline PageGraph insert_perturbation_nodes(const PageGraph& graph, std::size_t count, MapBackStrategy strategy) {
  if (count == 0) return graph;
  auto anchors = eligible_anchors(graph);
  if (anchors.empty()) throw Error(Errc::no_anchor, "graph has no element node to attach perturbation nodes to");

  auto nodes = graph.nodes();
  auto edges = graph.edges();
  nodes.reserve(nodes.size() + count);
  edges.reserve(edges.size() + count);
  std::size_t start = static_cast<std::size_t>(strategy.anchor_seed % anchors.size());
  NodeId next = graph.max_id() + 1;
  for (std::size_t k = 0; k < count; ++k) {
    NodeId anchor = strategy.variant == MapBackVariant::centralized ? anchors[start]
                                                                    : anchors[(start + k) % anchors.size()];
    nodes.push_back(PageNode{next, NodeKind::element, std::string("span"), std::nullopt, true});
    edges.push_back(PageEdge{anchor, next, EdgeKind::structure});
    ++next;
  }
  return PageGraph(std::move(nodes), std::move(edges), graph.request_id(), graph.page_domain());
}

}  // namespace a4lab

#endif  // A4LAB_PAGE_GRAPH_HPP

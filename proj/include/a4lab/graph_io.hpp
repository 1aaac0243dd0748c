#ifndef A4LAB_GRAPH_IO_HPP
#define A4LAB_GRAPH_IO_HPP

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "a4lab/error.hpp"
#include "a4lab/page_graph.hpp"

namespace a4lab {

namespace detail {

inline NodeKind parse_node_kind(std::string_view s) {
  if (s == "root") return NodeKind::root;
  if (s == "element") return NodeKind::element;
  if (s == "script") return NodeKind::script;
  if (s == "request") return NodeKind::request;
  throw Error(Errc::malformed, "unknown node kind '" + std::string(s) + "'");
}

inline EdgeKind parse_edge_kind(std::string_view s) {
  if (s == "structure") return EdgeKind::structure;
  if (s == "creates") return EdgeKind::creates;
  if (s == "initiates") return EdgeKind::initiates;
  throw Error(Errc::malformed, "unknown edge kind '" + std::string(s) + "'");
}

}  // namespace detail

inline nlohmann::json graph_to_json(const PageGraph& graph) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : graph.nodes()) {
    nlohmann::json j = {{"id", n.id}, {"kind", to_string(n.kind)}, {"hidden", n.hidden}};
    if (n.tag) j["tag"] = *n.tag;
    if (n.url) j["url"] = n.url->markup_form();
    nodes.push_back(std::move(j));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : graph.edges())
    edges.push_back({{"from", e.from}, {"to", e.to}, {"kind", to_string(e.kind)}});
  nlohmann::json out = {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}, {"request_id", graph.request_id()}};
  if (!graph.page_domain().empty()) out["page_domain"] = graph.page_domain();
  return out;
}

/// Builds a graph from its JSON document. Format errors raise Errc::malformed;
/// invariant violations raise the specific code from PageGraph validation.
inline PageGraph graph_from_json(const nlohmann::json& doc) {
  std::vector<PageNode> nodes;
  std::vector<PageEdge> edges;
  NodeId request_id = 0;
  std::string page_domain;
  try {
    if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges"))
      throw Error(Errc::malformed, "graph document needs 'nodes' and 'edges'");
    for (const auto& j : doc.at("nodes")) {
      PageNode n;
      n.id = j.at("id").get<NodeId>();
      n.kind = detail::parse_node_kind(j.at("kind").get<std::string>());
      n.hidden = j.value("hidden", false);
      if (j.contains("tag")) n.tag = j.at("tag").get<std::string>();
      if (j.contains("url")) n.url = Url::from_markup(j.at("url").get<std::string>());
      nodes.push_back(std::move(n));
    }
    for (const auto& j : doc.at("edges"))
      edges.push_back(PageEdge{j.at("from").get<NodeId>(), j.at("to").get<NodeId>(),
                               detail::parse_edge_kind(j.at("kind").get<std::string>())});
    if (!doc.contains("request_id")) throw Error(Errc::missing_request, "graph document has no request_id");
    request_id = doc.at("request_id").get<NodeId>();
    page_domain = doc.value("page_domain", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, e.what());
  }
  return PageGraph(std::move(nodes), std::move(edges), request_id, std::move(page_domain));
}

/// Canonical serialization: nodes by id, edges by (from, to).
inline std::string save_graph(const PageGraph& graph) { return graph_to_json(graph).dump(); }

inline PageGraph load_graph(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, e.what());
  }
  return graph_from_json(doc);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::missing_file, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline PageGraph load_graph_file(const std::string& path) { return load_graph(read_file(path)); }

}  // namespace a4lab

#endif  // A4LAB_GRAPH_IO_HPP

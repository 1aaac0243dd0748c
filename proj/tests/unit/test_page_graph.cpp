#include <algorithm>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "a4lab/graph_io.hpp"
#include "a4lab/page_graph.hpp"
#include "a4lab/url.hpp"
#include "fixtures.hpp"

using namespace a4lab;
namespace fx = a4lab::fixtures;

namespace {

std::map<NodeId, std::size_t> degrees(const PageGraph& g) {
  std::map<NodeId, std::size_t> d;
  for (const auto& n : g.nodes()) d[n.id] = 0;
  for (const auto& e : g.edges()) {
    ++d[e.from];
    ++d[e.to];
  }
  return d;
}

const std::vector<std::string> kAds = {"ads"};

}  // namespace

// --- Url -------------------------------------------------------------------

TEST(Url, ReencodeHidesKeywordKeepsDecoded) {
  Url u = Url::from_markup("http://x.com/ads/b.js");
  Url r = reencode_url_keywords(u, kAds);
  EXPECT_NE(r.markup_form().find("&#x61;&#x64;&#x73;"), std::string::npos);
  EXPECT_EQ(r.decoded_form(), "http://x.com/ads/b.js");
  EXPECT_EQ(decode_entities(r.markup_form()), u.decoded_form());
}

TEST(Url, ReencodeWithoutKeywordIsIdentity) {
  Url u = Url::from_markup("http://x.com/static/b.js");
  EXPECT_EQ(reencode_url_keywords(u, kAds), u);
}

TEST(Url, ReencodeEveryOccurrence) {
  Url u = Url::from_markup("http://x.com/ads/ads.js");
  EXPECT_EQ(ascii_match_count(u.markup_form(), kAds), 2u);
  Url r = reencode_url_keywords(u, kAds);
  EXPECT_EQ(ascii_match_count(r.markup_form(), kAds), 0u);
  EXPECT_EQ(r.decoded_form(), u.decoded_form());
}

TEST(Url, AppendUnusedQueryKeepsPairs) {
  Url u = Url::from_markup("http://x.com/a?b=1");
  Url p = append_unused_query(u, "zz");
  auto pairs = p.query_pairs();
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].key, "b");
  EXPECT_EQ(pairs[0].value, "1");
  EXPECT_EQ(pairs[1].key, kPadKey);
  EXPECT_EQ(pairs[1].value, "zz");
  EXPECT_TRUE(equivalent_up_to_padding(u, p));
}

TEST(Url, EmptyPayloadCostsOverheadOnly) {
  Url u = Url::from_markup("http://x.com/a?b=1");
  EXPECT_EQ(append_unused_query(u, "").decoded_form().size(), u.decoded_form().size() + kPadOverhead);
  Url bare = Url::from_markup("http://x.com/a");
  EXPECT_EQ(append_unused_query(bare, "").decoded_form().size(), bare.decoded_form().size() + kPadOverhead);
}

TEST(Url, LongPayloadLength) {
  Url u = Url::from_markup("http://x.com/a?b=1");
  std::string payload(1000, '7');
  Url p = append_unused_query(u, payload);
  // Measured independently of the constant: the growth of an empty payload.
  std::size_t overhead = append_unused_query(u, "").decoded_form().size() - u.decoded_form().size();
  EXPECT_EQ(p.decoded_form().size(), u.decoded_form().size() + 1000 + overhead);
}

TEST(Url, AppendGoesBeforeFragment) {
  Url u = Url::from_markup("http://x.com/a?b=1#top");
  Url p = append_unused_query(u, "9");
  EXPECT_EQ(p.decoded_form(), "http://x.com/a?b=1&qz=9#top");
  EXPECT_TRUE(equivalent_up_to_padding(u, p));
}

TEST(Url, UnsafePayloadRejected) {
  Url u = Url::from_markup("http://x.com/a");
  EXPECT_THROW(append_unused_query(u, "a&b"), std::invalid_argument);
  EXPECT_THROW(append_unused_query(u, "a=b"), std::invalid_argument);
}

TEST(Url, EquivalenceRejectsPathChange) {
  Url u = Url::from_markup("http://x.com/a?b=1");
  EXPECT_FALSE(equivalent_up_to_padding(u, Url::from_markup("http://x.com/c?b=1")));
  EXPECT_FALSE(equivalent_up_to_padding(u, Url::from_markup("http://x.com/a?b=2")));
  EXPECT_FALSE(equivalent_up_to_padding(u, Url::from_markup("http://x.com/a?b=1&k=v")));
}

TEST(UrlProperty, ReencodeAndPadPreserveSemantics) {
  std::mt19937_64 rng(11);
  const std::string alphabet = "abdsx/.?=&;0123456789";
  const std::vector<std::string> keys = {"ad", "ads", ";", "&", "x.com"};
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 30);
  for (int t = 0; t < 2000; ++t) {
    std::string tail;
    for (std::size_t n = len(rng); n > 0; --n) tail.push_back(alphabet[pick(rng)]);
    Url u = Url::from_decoded("http://x.com/" + tail);
    ASSERT_EQ(decode_entities(u.markup_form()), u.decoded_form());

    Url r = reencode_url_keywords(u, keys);
    ASSERT_EQ(r.decoded_form(), u.decoded_form()) << u.markup_form();
    ASSERT_EQ(ascii_match_count(r.markup_form(), keys), 0u) << r.markup_form();

    Url p = append_unused_query(r, std::to_string(t));
    ASSERT_TRUE(equivalent_up_to_padding(u, p)) << u.decoded_form() << " vs " << p.decoded_form();
    auto before = u.query_pairs();
    auto after = p.query_pairs();
    ASSERT_GE(after.size(), before.size());
    ASSERT_TRUE(std::equal(before.begin(), before.end(), after.begin()));
  }
}

// --- average degree connectivity -------------------------------------------

TEST(DegreeConnectivity, SingleNode) {
  EXPECT_EQ(average_degree_connectivity(1, {}), 0.0);
}

TEST(DegreeConnectivity, Path) {
  std::vector<std::pair<std::size_t, std::size_t>> e = {{0, 1}, {1, 2}};
  EXPECT_DOUBLE_EQ(average_degree_connectivity(3, e), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(average_degree_connectivity(fx::chain(3)), 5.0 / 3.0);
}

TEST(DegreeConnectivity, Star) {
  std::vector<std::pair<std::size_t, std::size_t>> e = {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  EXPECT_DOUBLE_EQ(average_degree_connectivity(5, e), 3.4);
}

TEST(DegreeConnectivity, SingleRequestGraph) {
  PageGraph g({fx::root(), fx::request(1, "http://a.b/c")}, {fx::structure(0, 1)}, 1);
  EXPECT_DOUBLE_EQ(average_degree_connectivity(g), 1.0);
}

// --- perturbation nodes -----------------------------------------------------

TEST(Insert, ChainCentralized) {
  PageGraph g = fx::chain(5);
  PageGraph h = insert_perturbation_nodes(g, 3, {MapBackVariant::centralized, 0});
  EXPECT_EQ(h.node_count(), 8u);
  NodeId anchor = eligible_anchors(g).front();
  EXPECT_EQ(h.structure_child_count(anchor), g.structure_child_count(anchor) + 3);
  for (const auto& n : h.nodes())
    if (!g.index_of(n.id)) {
      EXPECT_TRUE(n.hidden);
      EXPECT_EQ(n.kind, NodeKind::element);
    }
}

TEST(Insert, ZeroCountIsIdentity) {
  PageGraph g = fx::chain(5);
  EXPECT_EQ(insert_perturbation_nodes(g, 0, {MapBackVariant::centralized, 3}), g);
  EXPECT_EQ(insert_perturbation_nodes(g, 0, {MapBackVariant::distributed, 3}), g);
}

TEST(Insert, StarDistributed) {
  PageGraph g = fx::star();
  PageGraph h = insert_perturbation_nodes(g, 4, {MapBackVariant::distributed, 0});
  for (NodeId leaf = 1; leaf <= 4; ++leaf) EXPECT_EQ(h.structure_child_count(leaf), 1u) << leaf;
  EXPECT_EQ(degrees(h).at(0), degrees(g).at(0));
}

TEST(Insert, AnchorSeedRotatesStart) {
  PageGraph g = fx::star();
  PageGraph h = insert_perturbation_nodes(g, 2, {MapBackVariant::centralized, 6});  // 6 mod 4 = 2 -> id 3
  EXPECT_EQ(h.structure_child_count(3), 2u);
}

TEST(Insert, NoAnchorRejected) {
  PageGraph g({fx::root(), fx::request(1, "http://a.b/c")}, {fx::structure(0, 1)}, 1);
  try {
    insert_perturbation_nodes(g, 1, {});
    FAIL() << "expected no_anchor";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::no_anchor);
  }
}

TEST(InsertProperty, CountsEdgesAndDegrees) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> size(3, 30), count(0, 12);
  std::uniform_int_distribution<std::uint64_t> seed(0, 100);
  for (int t = 0; t < 500; ++t) {
    PageGraph g = fx::random_graph(rng, size(rng));
    if (eligible_anchors(g).empty()) continue;
    std::size_t c = count(rng);
    for (auto variant : {MapBackVariant::centralized, MapBackVariant::distributed}) {
      PageGraph h = insert_perturbation_nodes(g, c, {variant, seed(rng)});
      ASSERT_EQ(h.node_count(), g.node_count() + c);
      for (const auto& e : g.edges()) ASSERT_TRUE(std::binary_search(h.edges().begin(), h.edges().end(), e));
      for (const auto& n : g.nodes()) ASSERT_EQ(h.node(n.id), n);

      auto before = degrees(g), after = degrees(h);
      std::size_t max_before = 0, max_after = 0;
      for (const auto& [id, d] : before) max_before = std::max(max_before, d);
      for (const auto& [id, d] : after) max_after = std::max(max_after, d);
      if (variant == MapBackVariant::centralized && c > 0 && c >= max_before) ASSERT_GT(max_after, max_before);
      if (variant == MapBackVariant::distributed && c <= eligible_anchors(g).size())
        for (const auto& [id, d] : before) ASSERT_LE(after.at(id), d + 1);
    }
  }
}

// --- graph files ------------------------------------------------------------

TEST(GraphIo, RoundTrip) {
  std::mt19937_64 rng(3);
  PageGraph g = fx::random_graph(rng, 10);
  std::string bytes = save_graph(g);
  PageGraph back = load_graph(bytes);
  EXPECT_EQ(back, g);
  EXPECT_EQ(save_graph(back), bytes);
}

TEST(GraphIo, EntityMarkupSurvives) {
  PageGraph g = fx::three_node("http://x.com/&#x61;ds.js");
  PageGraph back = load_graph(save_graph(g));
  EXPECT_EQ(back.request().url->markup_form(), "http://x.com/&#x61;ds.js");
  EXPECT_EQ(back.request().url->decoded_form(), "http://x.com/ads.js");
}

namespace {

Errc load_error(const std::string& text) {
  try {
    load_graph(text);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc{};
}

}  // namespace

TEST(GraphIo, DistinctErrors) {
  EXPECT_EQ(load_error("{not json"), Errc::malformed);
  EXPECT_EQ(load_error(R"({"nodes":[{"id":0,"kind":"root"},{"id":1,"kind":"request","url":"http://a/b"}],
    "edges":[{"from":0,"to":1,"kind":"structure"},{"from":1,"to":9,"kind":"creates"}],"request_id":1})"),
            Errc::dangling_edge);
  EXPECT_EQ(load_error(R"({"nodes":[{"id":0,"kind":"root"},{"id":1,"kind":"element"}],
    "edges":[{"from":0,"to":1,"kind":"structure"}],"request_id":1})"),
            Errc::missing_request);
  EXPECT_EQ(load_error(R"({"nodes":[{"id":0,"kind":"root"}],"edges":[]})"), Errc::missing_request);
  EXPECT_EQ(load_error(R"({"nodes":[{"id":0,"kind":"root"},{"id":0,"kind":"element"}],"edges":[],"request_id":0})"),
            Errc::duplicate_id);
}

TEST(GraphIo, StructureMustBeATree) {
  EXPECT_THROW(PageGraph({fx::root(), fx::element(1), fx::request(2, "http://a/b")}, {fx::structure(0, 2)}, 2),
               Error);
  EXPECT_THROW(PageGraph({fx::root(), fx::element(1), fx::request(2, "http://a/b")},
                         {fx::structure(0, 2), fx::structure(0, 1), fx::structure(2, 1)}, 2),
               Error);
}

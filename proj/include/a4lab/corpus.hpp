#ifndef A4LAB_CORPUS_HPP
#define A4LAB_CORPUS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "a4lab/error.hpp"
#include "a4lab/features.hpp"
#include "a4lab/forest.hpp"
#include "a4lab/graph_io.hpp"
#include "a4lab/page_graph.hpp"
#include "a4lab/url.hpp"

namespace a4lab {

/// Knobs of the synthetic page generator. Probabilities are per request.
struct CorpusSpec {
  std::size_t pages = 500;
  std::size_t min_elements = 10;
  std::size_t max_elements = 70;
  std::size_t min_requests = 4;
  std::size_t max_requests = 16;
  double ad_fraction = 0.35;
  // Half of the pages are ad-heavy (ad rate ad_fraction * (1 + page_skew),
  // fewer elements, script hubs); the rest carry ad_fraction * (1 - page_skew).
  double page_skew = 0.7;

  // Ad planting.
  double ad_keyword_prob = 0.7;
  double ad_query_prob = 0.9;
  double ad_semicolon_prob = 0.3;
  double ad_dimension_prob = 0.3;
  double ad_referrer_prob = 0.15;  // page domain echoed in an ad URL
  double ad_script_prob = 0.6;     // initiated by a script
  double ad_depth_bias = 0.7;      // placed among the deepest elements
  double ad_length_mean = 100.0;
  double ad_length_sd = 25.0;

  // Background traffic.
  double benign_keyword_prob = 0.03;
  double benign_query_prob = 0.35;
  double benign_semicolon_prob = 0.02;
  double benign_dimension_prob = 0.01;
  double benign_first_party_prob = 0.6;
  double benign_script_prob = 0.25;
  double benign_long_prob = 0.3;  // long asset paths
  double benign_short_mean = 45.0;
  double benign_short_sd = 12.0;
  double benign_long_mean = 170.0;
  double benign_long_sd = 20.0;

  double label_noise = 0.02;
  double test_fraction = 0.2;
  std::uint64_t seed = 7;

  void validate() const {
    if (pages == 0) throw Error(Errc::invalid_config, "corpus needs at least one page");
    if (min_elements < 1 || min_elements > max_elements)
      throw Error(Errc::invalid_config, "element range must satisfy 1 <= min <= max");
    if (min_requests < 1 || min_requests > max_requests)
      throw Error(Errc::invalid_config, "request range must satisfy 1 <= min <= max");
    if (ad_fraction * (1.0 + page_skew) > 1.0)
      throw Error(Errc::invalid_config, "ad_fraction * (1 + page_skew) must not exceed 1");
    for (double p : {ad_fraction, page_skew, ad_keyword_prob, ad_query_prob, ad_semicolon_prob, ad_dimension_prob,
                     ad_referrer_prob, ad_script_prob, ad_depth_bias, benign_keyword_prob, benign_query_prob,
                     benign_semicolon_prob, benign_dimension_prob, benign_first_party_prob, benign_script_prob,
                     benign_long_prob, label_noise, test_fraction})
      if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_config, "probabilities must lie in [0, 1]");
    for (double v : {ad_length_mean, ad_length_sd, benign_short_mean, benign_short_sd, benign_long_mean,
                     benign_long_sd})
      if (!(v >= 0.0)) throw Error(Errc::invalid_config, "length parameters must be non-negative");
  }
};

/// Overrides CorpusSpec fields from a flat JSON object keyed by field name.
inline CorpusSpec corpus_spec_from_json(const nlohmann::json& j, CorpusSpec spec = {}) {
  if (!j.is_object()) throw Error(Errc::invalid_config, "corpus configuration must be a flat object");
  const std::map<std::string, double CorpusSpec::*> reals = {
      {"ad_fraction", &CorpusSpec::ad_fraction},
      {"page_skew", &CorpusSpec::page_skew},
      {"ad_keyword_prob", &CorpusSpec::ad_keyword_prob},
      {"ad_query_prob", &CorpusSpec::ad_query_prob},
      {"ad_semicolon_prob", &CorpusSpec::ad_semicolon_prob},
      {"ad_dimension_prob", &CorpusSpec::ad_dimension_prob},
      {"ad_referrer_prob", &CorpusSpec::ad_referrer_prob},
      {"ad_script_prob", &CorpusSpec::ad_script_prob},
      {"ad_depth_bias", &CorpusSpec::ad_depth_bias},
      {"ad_length_mean", &CorpusSpec::ad_length_mean},
      {"ad_length_sd", &CorpusSpec::ad_length_sd},
      {"benign_keyword_prob", &CorpusSpec::benign_keyword_prob},
      {"benign_query_prob", &CorpusSpec::benign_query_prob},
      {"benign_semicolon_prob", &CorpusSpec::benign_semicolon_prob},
      {"benign_dimension_prob", &CorpusSpec::benign_dimension_prob},
      {"benign_first_party_prob", &CorpusSpec::benign_first_party_prob},
      {"benign_script_prob", &CorpusSpec::benign_script_prob},
      {"benign_long_prob", &CorpusSpec::benign_long_prob},
      {"benign_short_mean", &CorpusSpec::benign_short_mean},
      {"benign_short_sd", &CorpusSpec::benign_short_sd},
      {"benign_long_mean", &CorpusSpec::benign_long_mean},
      {"benign_long_sd", &CorpusSpec::benign_long_sd},
      {"label_noise", &CorpusSpec::label_noise},
      {"test_fraction", &CorpusSpec::test_fraction}};
  const std::map<std::string, std::size_t CorpusSpec::*> counts = {{"pages", &CorpusSpec::pages},
                                                                  {"min_elements", &CorpusSpec::min_elements},
                                                                  {"max_elements", &CorpusSpec::max_elements},
                                                                  {"min_requests", &CorpusSpec::min_requests},
                                                                  {"max_requests", &CorpusSpec::max_requests}};
  try {
    for (const auto& [key, value] : j.items()) {
      if (auto r = reals.find(key); r != reals.end()) spec.*(r->second) = value.get<double>();
      else if (auto c = counts.find(key); c != counts.end()) spec.*(c->second) = value.get<std::size_t>();
      else if (key == "seed") spec.seed = value.get<std::uint64_t>();
      else throw Error(Errc::invalid_config, "unknown corpus configuration key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  spec.validate();
  return spec;
}

enum class Split { train, test };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct Sample {
  std::size_t page_id = 0;
  NodeId request_id = 0;
  Label label = Label::non_ad;
  Split split = Split::train;
  std::string graph_file;  // relative to the corpus directory
  PageGraph graph;
  FeatureVector features;
};

struct Corpus {
  std::vector<Sample> samples;

  LabeledMatrix matrix(Split split) const {
    LabeledMatrix m{col::width, {}, {}};
    for (const auto& s : samples)
      if (s.split == split) m.push_back(s.features.span(), s.label);
    return m;
  }
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Vocabulary is chosen so that no word contains a default ad pattern.
inline const std::vector<std::string> kSiteWords = {"news", "shop", "blog", "wiki", "forum", "travel", "sports",
                                                    "music", "games", "photo", "recipe", "movie", "weather",
                                                    "health", "finance", "school", "garden", "city", "tech"};
inline const std::vector<std::string> kPathWords = {"static", "assets", "img", "css", "js", "media", "content",
                                                    "lib", "app", "main", "theme", "fonts", "images", "files",
                                                    "public", "styles", "scripts", "core", "site", "page",
                                                    "home", "video", "user", "menu", "nav", "icons", "build",
                                                    "dist", "common", "vendor", "release", "cache"};
inline const std::vector<std::string> kStems = {"main", "app", "style", "logo", "hero", "photo", "thumb",
                                                "icon", "bundle", "common", "site", "theme", "index", "cover",
                                                "avatar", "chart", "map", "menu", "home", "post", "gallery"};
inline const std::vector<std::string> kCdnHosts = {"cdn.statichost.net", "fonts.webfonts.org",
                                                   "api.mapservice.com", "js.libhost.com", "img.photocdn.net",
                                                   "video.streamsvc.net", "static.cloudfront.example"};
inline const std::vector<std::string> kAdHosts = {"srv.mediaexchange.net", "cdn.promonetwork.com",
                                                  "bid.exchangehub.io", "stats.metricsnet.com",
                                                  "click.partnernet.org", "serve.campaignhub.net",
                                                  "img.creativecdn.net"};
inline const std::vector<std::string> kAdKeywordSegments = {"ads", "ad", "banner", "track", "pixel", "sponsor",
                                                            "advert", "adserver"};
inline const std::vector<std::string> kAdParams = {"cid", "pid", "uid", "cb", "zone", "slot", "pos", "cat",
                                                   "ord", "ts", "cr", "pl"};
inline const std::vector<std::string> kBenignParams = {"v", "ver", "lang", "w", "h", "q", "rev"};
inline const std::vector<std::string> kDimensions = {"300x250", "728x90", "160x600", "468x60", "970x250"};
inline const std::vector<std::string> kElementTags = {"div", "section", "article", "ul", "li", "p",
                                                      "a", "span", "nav", "footer", "figure"};

class PageBuilder {
 public:
  PageBuilder(const CorpusSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}

  struct Page {
    std::string domain;
    std::vector<PageNode> nodes;
    std::vector<PageEdge> edges;
    std::vector<std::pair<NodeId, Label>> requests;
  };

  Page build() {
    Page page;
    page.domain = pick(kSiteWords) + std::to_string(uniform(1, 99)) + pick({".com", ".org", ".net"});
    domain_ = page.domain;
    add(page, NodeKind::root, std::nullopt, std::nullopt);
    NodeId html = add(page, NodeKind::element, "html", 0);
    NodeId head = add(page, NodeKind::element, "head", html);
    NodeId body = add(page, NodeKind::element, "body", html);
    std::vector<NodeId> elements = {body};
    std::vector<std::size_t> depth = {2};

    const bool heavy = bernoulli(0.5);
    const double ad_rate = spec_.ad_fraction * (heavy ? 1.0 + spec_.page_skew : 1.0 - spec_.page_skew);
    const std::size_t mid = (spec_.min_elements + spec_.max_elements) / 2;
    auto n_elements = heavy ? uniform(spec_.min_elements, mid) : uniform(mid, spec_.max_elements);
    for (std::size_t i = 0; i < n_elements; ++i) {
      std::size_t p = uniform(0, elements.size() - 1);
      elements.push_back(add(page, NodeKind::element, pick(kElementTags), elements[p]));
      depth.push_back(depth[p] + 1);
    }
    std::vector<NodeId> scripts;
    auto n_scripts = heavy ? uniform(3, 8) : uniform(1, 3);
    for (std::size_t i = 0; i < n_scripts; ++i) {
      NodeId parent = bernoulli(0.5) ? head : elements[uniform(0, elements.size() - 1)];
      scripts.push_back(add(page, NodeKind::script, "script", parent));
      auto created = heavy ? uniform(1, 5) : uniform(0, 1);
      for (std::size_t k = 0; k < created; ++k)
        page.edges.push_back({scripts.back(), elements[uniform(0, elements.size() - 1)], EdgeKind::creates});
    }

    std::vector<std::size_t> by_depth(elements.size());
    for (std::size_t i = 0; i < by_depth.size(); ++i) by_depth[i] = i;
    std::stable_sort(by_depth.begin(), by_depth.end(), [&](auto a, auto b) { return depth[a] > depth[b]; });
    const std::size_t deep = std::max<std::size_t>(1, by_depth.size() / 3);

    auto n_requests = uniform(spec_.min_requests, spec_.max_requests);
    for (std::size_t r = 0; r < n_requests; ++r) {
      bool ad = bernoulli(ad_rate);
      std::string tag = ad ? weighted({{"img", 0.35}, {"script", 0.25}, {"iframe", 0.3}, {"xhr", 0.1}})
                           : weighted({{"img", 0.3}, {"script", 0.3}, {"link", 0.2}, {"xhr", 0.1}, {"font", 0.1}});
      NodeId parent;
      if (tag == "link") parent = head;
      else if (ad && bernoulli(spec_.ad_depth_bias)) parent = elements[by_depth[uniform(0, deep - 1)]];
      else parent = elements[uniform(0, elements.size() - 1)];

      std::string decoded = ad ? ad_url(tag) : benign_url(tag);
      NodeId id = add(page, NodeKind::request, tag, parent, Url::from_decoded(decoded));
      if (bernoulli(ad ? spec_.ad_script_prob : spec_.benign_script_prob))
        page.edges.push_back({scripts[uniform(0, scripts.size() - 1)], id, EdgeKind::initiates});
      if (tag == "iframe") {
        auto inner = uniform(1, 3);
        for (std::size_t k = 0; k < inner; ++k) add(page, NodeKind::element, "div", id);
      }
      Label label = ad ? Label::ad : Label::non_ad;
      if (bernoulli(spec_.label_noise)) label = label == Label::ad ? Label::non_ad : Label::ad;
      page.requests.emplace_back(id, label);
    }
    return page;
  }

 private:
  NodeId add(Page& page, NodeKind kind, std::optional<std::string> tag, std::optional<NodeId> parent,
             std::optional<Url> url = std::nullopt) {
    auto id = static_cast<NodeId>(page.nodes.size());
    page.nodes.push_back(PageNode{id, kind, std::move(tag), std::move(url), false});
    if (parent) page.edges.push_back({*parent, id, EdgeKind::structure});
    return id;
  }

  std::size_t uniform(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(rng_); }
  double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng_); }
  std::string pick(const std::vector<std::string>& v) { return v[uniform(0, v.size() - 1)]; }
  std::string weighted(const std::vector<std::pair<std::string, double>>& options) {
    std::vector<double> w;
    for (const auto& o : options) w.push_back(o.second);
    return options[std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng_)].first;
  }
  std::string digits(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<char>('0' + uniform(0, 9));
    return s;
  }
  std::string word_value() { return bernoulli(0.5) ? digits(uniform(1, 8)) : pick(kStems) + digits(uniform(0, 2)); }

  static std::string extension(const std::string& tag) {
    if (tag == "img") return ".png";
    if (tag == "script") return ".js";
    if (tag == "link") return ".css";
    if (tag == "iframe") return ".html";
    if (tag == "font") return ".woff2";
    return "";
  }

  std::string ad_url(const std::string& tag) {
    std::string url = "https://" + pick(kAdHosts) + "/";
    std::vector<std::string> segments = {pick(kPathWords)};
    if (bernoulli(spec_.ad_keyword_prob)) segments.insert(segments.begin() + uniform(0, 1), pick(kAdKeywordSegments));
    if (bernoulli(spec_.ad_dimension_prob)) segments.push_back(pick(kDimensions));
    for (const auto& s : segments) url += s + "/";
    url += pick(kStems) + extension(tag);
    if (bernoulli(spec_.ad_semicolon_prob)) url += ";ord=" + digits(uniform(4, 10));
    auto target = static_cast<std::size_t>(std::max(20.0, normal(spec_.ad_length_mean, spec_.ad_length_sd)));
    if (bernoulli(spec_.ad_query_prob)) {
      std::vector<std::string> pairs;
      if (bernoulli(spec_.ad_referrer_prob)) pairs.push_back("ref=" + domain_);
      std::size_t len = url.size() + 1;
      do {
        pairs.push_back(pick(kAdParams) + "=" + word_value());
        len += pairs.back().size() + 1;
      } while (len < target);
      url += "?";
      for (std::size_t i = 0; i < pairs.size(); ++i) url += (i ? "&" : "") + pairs[i];
    } else if (bernoulli(spec_.ad_referrer_prob)) {
      url = "https://" + domain_ + "/" + url.substr(url.find('/', 8) + 1);
    }
    return url;
  }

  std::string benign_url(const std::string& tag) {
    bool first_party = bernoulli(spec_.benign_first_party_prob);
    std::string url = "https://" + (first_party ? pick({"www.", "static.", "cdn.", ""}) + domain_ : pick(kCdnHosts)) + "/";
    bool long_path = bernoulli(spec_.benign_long_prob);
    double mean = long_path ? spec_.benign_long_mean : spec_.benign_short_mean;
    double sd = long_path ? spec_.benign_long_sd : spec_.benign_short_sd;
    auto target = static_cast<std::size_t>(std::max(20.0, normal(mean, sd)));
    if (bernoulli(spec_.benign_keyword_prob)) url += pick(kAdKeywordSegments) + "/";
    if (bernoulli(spec_.benign_dimension_prob)) url += pick(kDimensions) + "/";
    std::string file = pick(kStems) + (bernoulli(0.3) ? "-" + digits(uniform(1, 6)) : "") + extension(tag);
    do {
      url += pick(kPathWords) + "/";
    } while (url.size() + file.size() < target && bernoulli(long_path ? 0.95 : 0.6));
    url += file;
    if (bernoulli(spec_.benign_semicolon_prob)) url += ";jsessionid=" + digits(uniform(6, 12));
    if (bernoulli(spec_.benign_query_prob)) url += "?" + pick(kBenignParams) + "=" + digits(uniform(1, 4));
    return url;
  }

  const CorpusSpec& spec_;
  std::mt19937_64 rng_;
  std::string domain_;
};

}  // namespace detail

inline std::string graph_file_name(std::size_t page_id, NodeId request_id) {
  return "graphs/p" + std::to_string(page_id) + "_r" + std::to_string(request_id) + ".json";
}

/// Generates the corpus in memory. Every page draws from its own generator
/// seeded from the master seed, and pages are assigned to the train or test
/// split as a whole.
inline Corpus generate_corpus(const CorpusSpec& spec, const UrlPatterns& patterns = {}) {
  spec.validate();
  std::vector<std::size_t> order(spec.pages);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 split_rng(detail::mix_seed(spec.seed, ~0ULL));
  std::shuffle(order.begin(), order.end(), split_rng);
  auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(spec.pages)));
  std::vector<Split> split(spec.pages, Split::train);
  for (std::size_t i = 0; i < n_test; ++i) split[order[i]] = Split::test;

  Corpus corpus;
  for (std::size_t p = 0; p < spec.pages; ++p) {
    detail::PageBuilder builder(spec, detail::mix_seed(spec.seed, p));
    auto page = builder.build();
    for (const auto& [request_id, label] : page.requests) {
      PageGraph graph(page.nodes, page.edges, request_id, page.domain);
      auto features = extract_features(graph, patterns);
      corpus.samples.push_back(
          Sample{p, request_id, label, split[p], graph_file_name(p, request_id), std::move(graph), std::move(features)});
    }
  }
  return corpus;
}

inline nlohmann::json sample_record(const Sample& s) {
  return {{"page_id", s.page_id},   {"request_id", s.request_id},   {"label", to_string(s.label)},
          {"graph_file", s.graph_file}, {"features", s.features.values}, {"split", to_string(s.split)}};
}

/// Writes dataset.jsonl, schema.json and one graph file per sample.
inline void write_corpus(const Corpus& corpus, const std::filesystem::path& dir, const FeatureSchema& schema) {
  std::filesystem::create_directories(dir / "graphs");
  std::string lines;
  for (const auto& s : corpus.samples) {
    lines += sample_record(s).dump() + "\n";
    write_file((dir / s.graph_file).string(), save_graph(s.graph) + "\n");
  }
  write_file((dir / "dataset.jsonl").string(), lines);
  write_file((dir / "schema.json").string(), schema_to_json(schema).dump(2) + "\n");
}

/// Reads a corpus directory back, checking that its schema matches `schema`.
inline Corpus read_corpus(const std::filesystem::path& dir, const FeatureSchema& schema) {
  nlohmann::json stored;
  try {
    stored = nlohmann::json::parse(read_file((dir / "schema.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, e.what());
  }
  if (stored != schema_to_json(schema)) throw Error(Errc::schema_mismatch, "corpus schema differs from this build");

  Corpus corpus;
  std::string text = read_file((dir / "dataset.jsonl").string());
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      FeatureVector features(j.at("features").get<std::vector<double>>());
      if (features.size() != schema.width())
        throw Error(Errc::schema_mismatch, "feature vector width differs from the schema");
      auto file = j.at("graph_file").get<std::string>();
      Sample s{j.at("page_id").get<std::size_t>(),
               j.at("request_id").get<NodeId>(),
               parse_label(j.at("label").get<std::string>()),
               j.value("split", std::string("train")) == "test" ? Split::test : Split::train,
               file,
               load_graph_file((dir / file).string()),
               std::move(features)};
      corpus.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::malformed, e.what());
    }
  }
  if (corpus.samples.empty()) throw Error(Errc::empty_corpus, "dataset.jsonl has no records");
  return corpus;
}

}  // namespace a4lab

#endif  // A4LAB_CORPUS_HPP

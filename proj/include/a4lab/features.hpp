#ifndef A4LAB_FEATURES_HPP
#define A4LAB_FEATURES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "a4lab/error.hpp"
#include "a4lab/page_graph.hpp"
#include "a4lab/url.hpp"

namespace a4lab {

enum class FeatureKind { numeric_integer, numeric_real, binary, categorical };

inline std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::numeric_integer: return "numeric_integer";
    case FeatureKind::numeric_real: return "numeric_real";
    case FeatureKind::binary: return "binary";
    case FeatureKind::categorical: return "categorical";
  }
  return "?";
}

/// Constraint-set membership of a feature, as a bit mask.
struct ConstraintSets {
  static constexpr unsigned integer = 1u << 0;
  static constexpr unsigned binary = 1u << 1;
  static constexpr unsigned count_based = 1u << 2;
  static constexpr unsigned url_based = 1u << 3;
  static constexpr unsigned numeric = 1u << 4;
};

struct FeatureDef {
  std::string name;
  FeatureKind kind = FeatureKind::numeric_real;
  std::vector<std::string> categories;  // only for categorical
  bool perturbable = false;
  unsigned sets = 0;

  std::size_t arity() const { return kind == FeatureKind::categorical ? categories.size() : 1; }
  bool in(unsigned set) const { return (sets & set) != 0; }
};

/// One column of the one-hot expanded vector.
struct Column {
  std::string name;
  std::size_t def = 0;
  FeatureKind kind = FeatureKind::numeric_real;
  bool perturbable = false;
  unsigned sets = 0;

  bool in(unsigned set) const { return (sets & set) != 0; }
  bool numeric() const { return kind == FeatureKind::numeric_integer || kind == FeatureKind::numeric_real; }
  bool integer() const { return kind == FeatureKind::numeric_integer; }
  bool binary_like() const { return kind == FeatureKind::binary || kind == FeatureKind::categorical; }
};

struct OneHotGroup {
  std::size_t begin = 0;
  std::size_t end = 0;
};

class FeatureSchema {
 public:
  explicit FeatureSchema(std::vector<FeatureDef> defs) : defs_(std::move(defs)) {
    for (std::size_t d = 0; d < defs_.size(); ++d) {
      const auto& def = defs_[d];
      if (def.perturbable && !def.in(ConstraintSets::count_based) && !def.in(ConstraintSets::url_based))
        throw Error(Errc::schema_mismatch, def.name + ": perturbable features need a count- or URL-based set");
      if (def.in(ConstraintSets::binary) && def.in(ConstraintSets::integer))
        throw Error(Errc::schema_mismatch, def.name + ": binary and integer sets are exclusive");
      offsets_.push_back(columns_.size());
      if (def.kind == FeatureKind::categorical) {
        if (def.categories.size() < 2) throw Error(Errc::schema_mismatch, def.name + ": categorical arity < 2");
        groups_.push_back({columns_.size(), columns_.size() + def.categories.size()});
        for (const auto& c : def.categories)
          columns_.push_back({def.name + "=" + c, d, def.kind, def.perturbable, def.sets});
      } else {
        columns_.push_back({def.name, d, def.kind, def.perturbable, def.sets});
      }
    }
  }

  const std::vector<FeatureDef>& defs() const noexcept { return defs_; }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  const std::vector<OneHotGroup>& one_hot_groups() const noexcept { return groups_; }
  std::size_t width() const noexcept { return columns_.size(); }
  std::size_t offset(std::size_t def) const { return offsets_.at(def); }

  std::size_t index_of(std::string_view column_name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].name == column_name) return i;
    throw Error(Errc::schema_mismatch, "no column named " + std::string(column_name));
  }

  std::size_t perturbable_count() const {
    return static_cast<std::size_t>(
        std::count_if(defs_.begin(), defs_.end(), [](const FeatureDef& d) { return d.perturbable; }));
  }

 private:
  std::vector<FeatureDef> defs_;
  std::vector<Column> columns_;
  std::vector<std::size_t> offsets_;
  std::vector<OneHotGroup> groups_;
};

/// Column positions of the default schema.
namespace col {
inline constexpr std::size_t node_count = 0;
inline constexpr std::size_t ad_keyword = 1;
inline constexpr std::size_t special_char = 2;
inline constexpr std::size_t semicolon = 3;
inline constexpr std::size_t base_domain = 4;
inline constexpr std::size_t ad_dimension = 5;
inline constexpr std::size_t url_length = 6;
inline constexpr std::size_t edge_count = 7;
inline constexpr std::size_t degree_connectivity = 8;
inline constexpr std::size_t request_in_degree = 9;
inline constexpr std::size_t request_out_degree = 10;
inline constexpr std::size_t request_depth = 11;
inline constexpr std::size_t parent_child_count = 12;
inline constexpr std::size_t resource_type = 13;  // 6 one-hot columns
inline constexpr std::size_t third_party = 19;
inline constexpr std::size_t width = 20;
}  // namespace col

inline const std::vector<std::string>& resource_types() {
  static const std::vector<std::string> kTypes = {"image", "script", "iframe", "stylesheet", "xhr", "other"};
  return kTypes;
}

/// The seven perturbable seed features, six inter-dependent structural
/// features, the request's resource type and its third-party flag.
inline FeatureSchema default_schema() {
  using S = ConstraintSets;
  using K = FeatureKind;
  std::vector<FeatureDef> defs = {
      {"node_count", K::numeric_integer, {}, true, S::integer | S::count_based | S::numeric},
      {"ad_keyword", K::binary, {}, true, S::binary | S::url_based},
      {"special_char", K::binary, {}, true, S::binary | S::url_based},
      {"semicolon", K::binary, {}, true, S::binary | S::url_based},
      {"base_domain", K::binary, {}, true, S::binary | S::url_based},
      {"ad_dimension", K::binary, {}, true, S::binary | S::url_based},
      {"url_length", K::numeric_integer, {}, true, S::integer | S::count_based | S::numeric},
      {"edge_count", K::numeric_integer, {}, false, S::integer | S::numeric},
      {"average_degree_connectivity", K::numeric_real, {}, false, S::numeric},
      {"request_in_degree", K::numeric_integer, {}, false, S::integer | S::numeric},
      {"request_out_degree", K::numeric_integer, {}, false, S::integer | S::numeric},
      {"request_depth", K::numeric_integer, {}, false, S::integer | S::numeric},
      {"parent_child_count", K::numeric_integer, {}, false, S::integer | S::numeric},
      {"resource_type", K::categorical, resource_types(), false, 0},
      {"third_party", K::binary, {}, false, S::binary},
  };
  return FeatureSchema(std::move(defs));
}

inline nlohmann::json schema_to_json(const FeatureSchema& schema) {
  static constexpr std::pair<unsigned, const char*> kSets[] = {
      {ConstraintSets::integer, "S_integer"},         {ConstraintSets::binary, "S_binary"},
      {ConstraintSets::count_based, "S_count_based"}, {ConstraintSets::url_based, "S_url_based"},
      {ConstraintSets::numeric, "S_numeric"}};
  nlohmann::json defs = nlohmann::json::array();
  for (const auto& d : schema.defs()) {
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& [bit, name] : kSets)
      if (d.in(bit)) sets.push_back(name);
    nlohmann::json j = {{"name", d.name},
                        {"kind", to_string(d.kind)},
                        {"arity", d.arity()},
                        {"perturbable", d.perturbable},
                        {"constraint_sets", sets}};
    if (!d.categories.empty()) j["categories"] = d.categories;
    defs.push_back(std::move(j));
  }
  nlohmann::json columns = nlohmann::json::array();
  for (const auto& c : schema.columns()) columns.push_back(c.name);
  return {{"features", defs}, {"columns", columns}, {"width", schema.width()}};
}

/// Raw and normalized vectors share a layout but live in different units.
struct RawSpace {};
struct NormalizedSpace {};

template <class Space>
struct FeatureArray {
  std::vector<double> values;

  FeatureArray() = default;
  explicit FeatureArray(std::vector<double> v) : values(std::move(v)) {}
  explicit FeatureArray(std::size_t n, double fill = 0.0) : values(n, fill) {}

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> span() const noexcept { return values; }

  friend bool operator==(const FeatureArray&, const FeatureArray&) = default;
};

using FeatureVector = FeatureArray<RawSpace>;
using NormalizedVector = FeatureArray<NormalizedSpace>;

/// Keyword lists behind the URL flags. The defaults are documented constants
/// and may be overridden.
struct UrlPatterns {
  std::vector<std::string> ad_keywords = {"ad", "ads", "advert", "banner", "sponsor", "track", "doubleclick", "pixel"};
  std::vector<std::string> special_chars = {"&", "=", "?"};
  std::vector<std::string> semicolons = {";"};
  std::vector<std::string> ad_dimensions = {"300x250", "728x90", "160x600", "468x60", "120x600", "970x250"};

  /// Patterns detected by a URL flag column (the base-domain flag depends on
  /// the page being loaded).
  std::vector<std::string> for_column(std::size_t column, const std::string& page_domain) const {
    switch (column) {
      case col::ad_keyword: return ad_keywords;
      case col::special_char: return special_chars;
      case col::semicolon: return semicolons;
      case col::ad_dimension: return ad_dimensions;
      case col::base_domain:
        return page_domain.empty() ? std::vector<std::string>{} : std::vector<std::string>{page_domain};
      default: return {};
    }
  }
};

inline constexpr std::size_t kUrlFlagColumns[] = {col::ad_keyword, col::special_char, col::semicolon,
                                                  col::base_domain, col::ad_dimension};

inline std::size_t resource_type_index(const std::optional<std::string>& tag) {
  if (!tag) return 5;
  const std::string& t = *tag;
  if (t == "img" || t == "image") return 0;
  if (t == "script") return 1;
  if (t == "iframe") return 2;
  if (t == "link" || t == "stylesheet") return 3;
  if (t == "xhr" || t == "fetch") return 4;
  return 5;
}

/// URL flags are computed on the markup through an ASCII matcher; the length
/// is measured on the decoded request.
inline FeatureVector extract_features(const PageGraph& graph, const UrlPatterns& patterns = {}) {
  FeatureVector x(col::width);
  const PageNode& request = graph.request();
  const Url& url = *request.url;
  const std::string view = ascii_view(url.markup_form());
  auto flag = [&](std::size_t column) {
    auto list = patterns.for_column(column, graph.page_domain());
    bool hit = std::any_of(list.begin(), list.end(),
                           [&](const std::string& k) { return !k.empty() && view.find(k) != std::string::npos; });
    return hit ? 1.0 : 0.0;
  };

  x[col::node_count] = static_cast<double>(graph.node_count());
  for (std::size_t c : kUrlFlagColumns) x[c] = flag(c);
  x[col::url_length] = static_cast<double>(url.decoded_form().size());
  x[col::edge_count] = static_cast<double>(graph.edges().size());
  x[col::degree_connectivity] = average_degree_connectivity(graph);

  std::size_t in = 0, out = 0;
  for (const auto& e : graph.edges()) {
    if (e.to == request.id) ++in;
    if (e.from == request.id) ++out;
  }
  x[col::request_in_degree] = static_cast<double>(in);
  x[col::request_out_degree] = static_cast<double>(out);

  std::size_t depth = 0;
  NodeId cur = request.id;
  while (auto parent = graph.structure_parent(cur)) {
    ++depth;
    cur = *parent;
  }
  x[col::request_depth] = static_cast<double>(depth);
  auto parent = graph.structure_parent(request.id);
  x[col::parent_child_count] = parent ? static_cast<double>(graph.structure_child_count(*parent)) : 0.0;

  x[col::resource_type + resource_type_index(request.tag)] = 1.0;
  x[col::third_party] = host_in_domain(url.host(), graph.page_domain()) ? 0.0 : 1.0;
  return x;
}

/// Per-column extrema over the training corpus.
struct NormalizationStats {
  std::vector<double> min;
  std::vector<double> max;

  double range(std::size_t i) const { return max[i] - min[i]; }
  std::size_t size() const noexcept { return min.size(); }
  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

inline NormalizationStats compute_normalization_stats(std::span<const FeatureVector> corpus) {
  if (corpus.empty()) throw Error(Errc::empty_corpus, "cannot compute normalization stats of an empty corpus");
  NormalizationStats stats{corpus.front().values, corpus.front().values};
  for (const auto& v : corpus) {
    if (v.size() != stats.size()) throw Error(Errc::dimension_mismatch, "corpus vectors differ in width");
    for (std::size_t i = 0; i < v.size(); ++i) {
      stats.min[i] = std::min(stats.min[i], v[i]);
      stats.max[i] = std::max(stats.max[i], v[i]);
    }
  }
  return stats;
}

/// Numeric columns map through (x - min) / range clamped to [0, 1]; binary and
/// one-hot columns pass through unchanged.
inline NormalizedVector normalize(const FeatureVector& x, const NormalizationStats& stats, const FeatureSchema& schema) {
  if (x.size() != schema.width() || stats.size() != schema.width())
    throw Error(Errc::dimension_mismatch, "vector, stats and schema widths differ");
  NormalizedVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!schema.column(i).numeric()) {
      out[i] = x[i];
      continue;
    }
    double r = stats.range(i);
    out[i] = r > 0.0 ? std::clamp((x[i] - stats.min[i]) / r, 0.0, 1.0) : 0.0;
  }
  return out;
}

inline FeatureVector denormalize(const NormalizedVector& v, const NormalizationStats& stats,
                                 const FeatureSchema& schema) {
  if (v.size() != schema.width() || stats.size() != schema.width())
    throw Error(Errc::dimension_mismatch, "vector, stats and schema widths differ");
  FeatureVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = schema.column(i).numeric() ? stats.min[i] + v[i] * stats.range(i) : v[i];
  return out;
}

inline nlohmann::json stats_to_json(const NormalizationStats& s) { return {{"min", s.min}, {"max", s.max}}; }

inline NormalizationStats stats_from_json(const nlohmann::json& j) {
  try {
    NormalizationStats s{j.at("min").get<std::vector<double>>(), j.at("max").get<std::vector<double>>()};
    if (s.min.size() != s.max.size()) throw Error(Errc::schema_mismatch, "stats min/max widths differ");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, e.what());
  }
}

}  // namespace a4lab

#endif  // A4LAB_FEATURES_HPP

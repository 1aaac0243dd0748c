#ifndef A4LAB_ATTACK_HPP
#define A4LAB_ATTACK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "a4lab/error.hpp"
#include "a4lab/features.hpp"
#include "a4lab/forest.hpp"
#include "a4lab/mlp.hpp"
#include "a4lab/page_graph.hpp"
#include "a4lab/url.hpp"

namespace a4lab {

struct AttackConfig {
  std::size_t max_iter = 20;
  double step_size = 0.07;
  double eps_global = 0.3;
  double eps_local = 0.8;
  std::size_t enforcement_interval = 15;
  std::vector<MapBackStrategy> strategies = {{MapBackVariant::centralized, 0}, {MapBackVariant::distributed, 0}};
  // Multiplies the step size after every failed iteration (capped at
  // eps_global).
  double step_enlargement = 1.5;
  // Within an iteration, stop stepping once the surrogate scores the search
  // point below the iteration's threshold: 0.5, divided by step_enlargement
  // after every failed iteration.
  bool stop_on_crossing = true;
  std::uint64_t seed = 0;  // pad payload characters

  void validate() const {
    if (!(step_size > 0.0) || !(eps_global > 0.0) || !(eps_local > 0.0))
      throw Error(Errc::invalid_config, "step size and thresholds must be positive");
    if (!(step_enlargement >= 1.0)) throw Error(Errc::invalid_config, "step_enlargement must be at least 1");
    if (enforcement_interval < 1) throw Error(Errc::invalid_config, "enforcement_interval must be at least 1");
    if (strategies.empty()) throw Error(Errc::invalid_config, "at least one map-back strategy is required");
  }
};

inline std::vector<MapBackStrategy> parse_strategies(std::string_view s, std::uint64_t anchor_seed = 0) {
  if (s == "both")
    return {{MapBackVariant::centralized, anchor_seed}, {MapBackVariant::distributed, anchor_seed}};
  if (s == "centralized") return {{MapBackVariant::centralized, anchor_seed}};
  if (s == "distributed") return {{MapBackVariant::distributed, anchor_seed}};
  throw Error(Errc::invalid_config, "unknown strategy set '" + std::string(s) + "'");
}

/// Reads a flat key/value JSON object whose keys mirror AttackConfig fields.
/// Unknown keys are rejected.
inline AttackConfig attack_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_config, "attack configuration must be a flat object");
  AttackConfig c;
  std::string strategies = "both";
  std::uint64_t anchor_seed = 0;
  try {
    for (const auto& [key, value] : j.items()) {
      if (value.is_structured()) throw Error(Errc::invalid_config, "value of '" + key + "' must be a scalar");
      if (key == "max_iter") c.max_iter = value.get<std::size_t>();
      else if (key == "step_size") c.step_size = value.get<double>();
      else if (key == "eps_global") c.eps_global = value.get<double>();
      else if (key == "eps_local") c.eps_local = value.get<double>();
      else if (key == "enforcement_interval") c.enforcement_interval = value.get<std::size_t>();
      else if (key == "step_enlargement") c.step_enlargement = value.get<double>();
      else if (key == "stop_on_crossing") c.stop_on_crossing = value.get<bool>();
      else if (key == "strategies") strategies = value.get<std::string>();
      else if (key == "anchor_seed") anchor_seed = value.get<std::uint64_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw Error(Errc::invalid_config, "unknown attack configuration key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  c.strategies = parse_strategies(strategies, anchor_seed);
  c.validate();
  return c;
}

inline nlohmann::json attack_config_to_json(const AttackConfig& c) {
  std::string strategies = c.strategies.size() == 2 ? "both" : std::string(to_string(c.strategies.front().variant));
  return {{"max_iter", c.max_iter},
          {"step_size", c.step_size},
          {"eps_global", c.eps_global},
          {"eps_local", c.eps_local},
          {"enforcement_interval", c.enforcement_interval},
          {"step_enlargement", c.step_enlargement},
          {"stop_on_crossing", c.stop_on_crossing},
          {"strategies", strategies},
          {"anchor_seed", c.strategies.front().anchor_seed},
          {"seed", c.seed}};
}

/// Everything an attack reads but never modifies.
struct AttackContext {
  const FeatureSchema& schema;
  const UrlPatterns& patterns;
  const NormalizationStats& stats;
  const RandomForest& target;
  const SurrogateMlp& surrogate;
};

// ---------------------------------------------------------------------------
// Feature-space operations

/// Signed step -alpha * sign(g) that lowers the surrogate's loss towards the
/// non-ad label; zero on columns that may not be perturbed.
inline std::vector<double> signed_step(std::span<const double> grad, double alpha, const FeatureSchema& schema) {
  std::vector<double> step(grad.size(), 0.0);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!schema.column(i).perturbable) continue;
    if (grad[i] > 0.0) step[i] = -alpha;
    else if (grad[i] < 0.0) step[i] = alpha;
  }
  return step;
}

/// One signed-gradient step in normalized space. `grad` is the gradient of
/// the surrogate loss against the non-ad label.
inline NormalizedVector gradient_step(const NormalizedVector& x, std::span<const double> grad, double alpha,
                                      const FeatureSchema& schema) {
  if (grad.size() != x.size()) throw Error(Errc::dimension_mismatch, "gradient and point differ in width");
  auto step = signed_step(grad, alpha, schema);
  NormalizedVector out = x;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += step[i];
  return out;
}

/// Per-sample clipping radius in raw units: min(eps_g * range, eps_l * x).
inline double localized_bound(double original, double range, double eps_global, double eps_local) {
  return std::max(0.0, std::min(eps_global * range, eps_local * original));
}

/// Clamps every perturbable numeric column into the localized ball around
/// the original value. Integer columns use the largest whole radius inside
/// the bound so that later rounding cannot leave the ball.
inline FeatureVector clip_localized(const FeatureVector& x_pert, const FeatureVector& x_input,
                                    const NormalizationStats& stats, const FeatureSchema& schema, double eps_global,
                                    double eps_local) {
  FeatureVector out = x_pert;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Column& c = schema.column(i);
    if (!c.perturbable || !c.in(ConstraintSets::numeric)) continue;
    double b = localized_bound(x_input[i], stats.range(i), eps_global, eps_local);
    if (c.integer()) b = std::floor(b + 1e-9);
    out[i] = std::clamp(out[i], x_input[i] - b, x_input[i] + b);
  }
  return out;
}

/// Projects onto the domains of definition: integers are rounded and floored
/// at zero, binaries go to the nearer of {0, 1} (0 on a tie), one-hot groups
/// keep only their arg-max (lowest index on a tie).
inline FeatureVector enforce_validity(const FeatureVector& x, const FeatureSchema& schema) {
  FeatureVector out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Column& c = schema.column(i);
    if (c.kind == FeatureKind::numeric_integer) out[i] = std::max(0.0, std::round(out[i]));
    else if (c.kind == FeatureKind::binary) out[i] = std::abs(out[i]) <= std::abs(out[i] - 1.0) ? 0.0 : 1.0;
  }
  for (const auto& g : schema.one_hot_groups()) {
    std::size_t best = g.begin;
    for (std::size_t i = g.begin + 1; i < g.end; ++i)
      if (out[i] > out[best]) best = i;
    for (std::size_t i = g.begin; i < g.end; ++i) out[i] = i == best ? 1.0 : 0.0;
  }
  return out;
}

/// Non-decreasing principle for count-based columns. URL-based flags keep
/// their value here; they are realized later through re-encoding or unused
/// query insertion.
inline FeatureVector enforce_functionality(const FeatureVector& x, const FeatureVector& x_input,
                                           const FeatureSchema& schema) {
  FeatureVector out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (schema.column(i).in(ConstraintSets::count_based)) out[i] = std::max(x_input[i], out[i]);
  return out;
}

inline FeatureVector project_feature_space(const FeatureVector& x, const FeatureVector& x_input,
                                           const NormalizationStats& stats, const FeatureSchema& schema,
                                           const AttackConfig& config) {
  auto clipped = clip_localized(x, x_input, stats, schema, config.eps_global, config.eps_local);
  return enforce_functionality(enforce_validity(clipped, schema), x_input, schema);
}

/// Size of a perturbation: the largest absolute numeric offset, with binary
/// and categorical changes counted separately.
struct CustomNorm {
  double numeric_max = 0.0;
  std::size_t flips = 0;

  friend bool operator==(const CustomNorm&, const CustomNorm&) = default;
};

inline CustomNorm custom_norm(std::span<const double> delta, const FeatureSchema& schema) {
  CustomNorm n;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (schema.column(i).in(ConstraintSets::numeric))
      n.numeric_max = std::max(n.numeric_max, std::abs(delta[i]));
    else if (delta[i] != 0.0)
      ++n.flips;
  }
  return n;
}

/// Normalized offsets on the perturbable columns only.
inline std::vector<double> controlled_delta(const FeatureVector& x_input, const FeatureVector& x_final,
                                            const NormalizationStats& stats, const FeatureSchema& schema) {
  std::vector<double> delta(x_input.size(), 0.0);
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const Column& c = schema.column(i);
    if (!c.perturbable) continue;
    double d = x_final[i] - x_input[i];
    if (c.numeric()) d = stats.range(i) > 0.0 ? d / stats.range(i) : 0.0;
    delta[i] = d;
  }
  return delta;
}

// ---------------------------------------------------------------------------
// Application space

struct UrlAction {
  enum class Kind { reencode, insert, pad };
  Kind kind = Kind::reencode;
  std::size_t column = 0;
  std::vector<std::string> patterns;  // reencode: patterns hidden; insert/pad: the payload

  friend bool operator==(const UrlAction&, const UrlAction&) = default;
};

inline std::string_view to_string(UrlAction::Kind k) {
  switch (k) {
    case UrlAction::Kind::reencode: return "reencode";
    case UrlAction::Kind::insert: return "insert";
    case UrlAction::Kind::pad: return "pad";
  }
  return "?";
}

/// Actions implied by moving from x_input to x_target: a flag going 1 -> 0 is
/// realized by entity re-encoding, 0 -> 1 by an unused query carrying the
/// pattern, and a longer URL by a pad query.
inline std::vector<UrlAction> plan_url_actions(const FeatureVector& x_input, const FeatureVector& x_target,
                                               const std::string& page_domain, const UrlPatterns& patterns) {
  std::vector<UrlAction> actions;
  for (std::size_t c : kUrlFlagColumns) {
    if (x_input[c] == x_target[c]) continue;
    auto list = patterns.for_column(c, page_domain);
    if (x_target[c] < 0.5)
      actions.push_back({UrlAction::Kind::reencode, c, list});
    else
      actions.push_back({UrlAction::Kind::insert, c, list.empty() ? list : std::vector<std::string>{list.front()}});
  }
  if (x_target[col::url_length] > x_input[col::url_length]) {
    auto extra = static_cast<std::size_t>(x_target[col::url_length] - x_input[col::url_length]);
    actions.push_back({UrlAction::Kind::pad, col::url_length, {std::to_string(extra)}});
  }
  return actions;
}

namespace detail {

inline std::string insertion_payload(std::size_t column, const std::vector<std::string>& list) {
  // The pair separators already contribute '?', '&' or '='.
  if (column == col::special_char) return {};
  for (const auto& p : list)
    if (is_url_safe_payload(p)) return p;
  return {};
}

inline std::string random_digits(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, 9);
  std::string s(n, '0');
  for (auto& ch : s) ch = static_cast<char>('0' + d(rng));
  return s;
}

}  // namespace detail

struct RealizedUrl {
  Url url;
  std::vector<UrlAction> actions;
  std::vector<std::size_t> reverted;  // columns whose target could not be realized
};

/// Rewrites the request URL so that an ASCII matcher over its markup sees the
/// target flags and its decoded length reaches the target length, while the
/// decoded request changes only by appended unused query pairs.
inline RealizedUrl realize_url(const Url& original, const FeatureVector& x_target, const std::string& page_domain,
                               const UrlPatterns& patterns, std::uint64_t seed) {
  RealizedUrl out{original, {}, {}};
  std::mt19937_64 rng(seed);

  std::vector<std::pair<std::size_t, std::string>> payloads;
  for (std::size_t c : kUrlFlagColumns) {
    if (x_target[c] < 0.5) continue;
    auto list = patterns.for_column(c, page_domain);
    if (list.empty() || ascii_contains_any(original.markup_form(), list)) continue;
    payloads.emplace_back(c, detail::insertion_payload(c, list));
  }

  auto target_len = static_cast<std::size_t>(std::max(0.0, x_target[col::url_length]));
  std::size_t len = original.decoded_form().size();
  for (const auto& [c, p] : payloads) len += kPadOverhead + p.size();
  if (target_len > len) {
    std::size_t need = target_len - len;
    if (need >= kPadOverhead)
      payloads.emplace_back(col::url_length, detail::random_digits(need - kPadOverhead, rng));
    else if (!payloads.empty())
      payloads.back().second += detail::random_digits(need, rng);
  }

  for (const auto& [c, p] : payloads) {
    out.url = append_unused_query(out.url, p);
    out.actions.push_back({c == col::url_length ? UrlAction::Kind::pad : UrlAction::Kind::insert, c, {p}});
  }

  for (std::size_t c : kUrlFlagColumns) {
    if (x_target[c] >= 0.5) continue;
    auto list = patterns.for_column(c, page_domain);
    if (list.empty() || !ascii_contains_any(out.url.markup_form(), list)) continue;
    out.url = reencode_url_keywords(out.url, list);
    out.actions.push_back({UrlAction::Kind::reencode, c, list});
  }

  for (std::size_t c : kUrlFlagColumns) {
    auto list = patterns.for_column(c, page_domain);
    bool present = !list.empty() && ascii_contains_any(out.url.markup_form(), list);
    if (present != (x_target[c] >= 0.5)) out.reverted.push_back(c);
  }
  if (out.url.decoded_form().size() != target_len) out.reverted.push_back(col::url_length);
  return out;
}

/// A concrete page realizing a feature-space target under one strategy.
struct Candidate {
  MapBackStrategy strategy;
  PageGraph graph;
  std::vector<UrlAction> url_actions;
  std::vector<std::size_t> reverted;
  std::size_t node_add_count = 0;
};

/// Applies the target to the page once per strategy: the URL rewrite is
/// shared, the node insertions differ.
inline std::vector<Candidate> map_back(const PageGraph& graph, const FeatureVector& x_input,
                                       const FeatureVector& x_target, std::span<const MapBackStrategy> strategies,
                                       const UrlPatterns& patterns, std::uint64_t seed = 0) {
  auto realized = realize_url(*graph.request().url, x_target, graph.page_domain(), patterns, seed);
  PageGraph rewritten = graph.with_request_url(realized.url);
  double wanted = std::round(x_target[col::node_count] - x_input[col::node_count]);
  auto add = static_cast<std::size_t>(std::max(0.0, wanted));

  std::vector<Candidate> out;
  out.reserve(strategies.size());
  for (const auto& s : strategies) {
    Candidate c{s, rewritten, realized.actions, realized.reverted, add};
    try {
      c.graph = insert_perturbation_nodes(rewritten, add, s);
    } catch (const Error& e) {
      if (e.code() != Errc::no_anchor) throw;
      c.node_add_count = 0;
      c.reverted.push_back(col::node_count);
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Search

enum class AttackKind { a4, strong, weak };
enum class AttackStatus { success, fail, not_applicable };

inline std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::a4: return "a4";
    case AttackKind::strong: return "strong";
    case AttackKind::weak: return "weak";
  }
  return "?";
}

inline AttackKind parse_attack_kind(std::string_view s) {
  if (s == "a4") return AttackKind::a4;
  if (s == "strong") return AttackKind::strong;
  if (s == "weak") return AttackKind::weak;
  throw Error(Errc::invalid_config, "unknown attack '" + std::string(s) + "'");
}

inline std::string_view to_string(AttackStatus s) {
  switch (s) {
    case AttackStatus::success: return "success";
    case AttackStatus::fail: return "fail";
    case AttackStatus::not_applicable: return "not_applicable";
  }
  return "?";
}

struct Perturbation {
  std::vector<double> delta;  // normalized, perturbable columns only
  std::vector<UrlAction> url_actions;
  std::size_t node_add_count = 0;
};

struct AttackOutcome {
  AttackKind attack = AttackKind::a4;
  AttackStatus status = AttackStatus::fail;
  std::size_t iterations_used = 0;
  std::vector<MapBackVariant> strategies_succeeded;
  FeatureVector original_vector;
  FeatureVector final_vector;
  std::optional<PageGraph> perturbed_graph;
  Perturbation perturbation;
  CustomNorm norm;
  std::vector<std::size_t> reverted_columns;
  double target_probability_before = 0.0;
  double target_probability_after = 0.0;
  bool evades_target = false;  // target says non-ad, actionable or not
  bool actionable = false;
};

/// Checks that an outcome is usable as a real page: (i) valid feature vector,
/// (ii) URL semantics preserved, (iii) original nodes and edges intact,
/// (iv) re-extraction reproduces the final vector, (v) numeric offsets within
/// the localized bounds and non-decreasing.
inline bool validate_actionability(const PageGraph& original, const AttackOutcome& outcome, const AttackContext& ctx,
                                   const AttackConfig& config) {
  const auto& x = outcome.final_vector;
  const auto& x0 = outcome.original_vector;
  if (x.size() != ctx.schema.width() || x0.size() != ctx.schema.width()) return false;
  if (!outcome.perturbed_graph) return false;
  const PageGraph& g = *outcome.perturbed_graph;

  // (i)
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Column& c = ctx.schema.column(i);
    if (!std::isfinite(x[i])) return false;
    if (c.integer() && (x[i] < 0.0 || x[i] != std::round(x[i]))) return false;
    if (c.binary_like() && x[i] != 0.0 && x[i] != 1.0) return false;
  }
  for (const auto& grp : ctx.schema.one_hot_groups()) {
    double sum = 0.0;
    for (std::size_t i = grp.begin; i < grp.end; ++i) sum += x[i];
    if (sum != 1.0) return false;
  }

  // (ii)
  if (g.request_id() != original.request_id() || g.page_domain() != original.page_domain()) return false;
  if (!equivalent_up_to_padding(*original.request().url, *g.request().url)) return false;

  // (iii)
  for (const auto& n : original.nodes()) {
    auto idx = g.index_of(n.id);
    if (!idx) return false;
    const PageNode& m = g.nodes()[*idx];
    if (m.kind != n.kind || m.tag != n.tag || m.hidden != n.hidden) return false;
    if (n.kind != NodeKind::request && m.url != n.url) return false;
  }
  for (const auto& e : original.edges())
    if (!std::binary_search(g.edges().begin(), g.edges().end(), e)) return false;
  for (const auto& n : g.nodes())
    if (!original.index_of(n.id) && !(n.hidden && n.kind == NodeKind::element)) return false;

  // (iv)
  if (extract_features(g, ctx.patterns) != x) return false;

  // (v)
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Column& c = ctx.schema.column(i);
    if (!c.perturbable || !c.in(ConstraintSets::numeric)) continue;
    double b = localized_bound(x0[i], ctx.stats.range(i), config.eps_global, config.eps_local);
    if (std::abs(x[i] - x0[i]) > b + 1e-9) return false;
    if (c.in(ConstraintSets::count_based) && x[i] < x0[i]) return false;
  }
  return true;
}

/// Observation hook: called for every candidate page the search verifies.
struct CandidateEvent {
  const PageGraph& original;
  std::size_t iteration;
  const Candidate& candidate;
  const FeatureVector& reextracted;
  bool target_non_ad;
  bool actionable;
};
using CandidateObserver = std::function<void(const CandidateEvent&)>;

namespace detail {

inline std::vector<double> step_scale(const NormalizationStats& stats, const FeatureSchema& schema) {
  std::vector<double> scale(schema.width(), 1.0);
  for (std::size_t i = 0; i < scale.size(); ++i)
    if (schema.column(i).numeric()) scale[i] = stats.range(i);
  return scale;
}

inline void finish_outcome(AttackOutcome& out, const Candidate& c, FeatureVector final_vector,
                           const AttackContext& ctx) {
  out.final_vector = std::move(final_vector);
  out.perturbed_graph = c.graph;
  out.perturbation.delta = controlled_delta(out.original_vector, out.final_vector, ctx.stats, ctx.schema);
  out.perturbation.url_actions = c.url_actions;
  out.perturbation.node_add_count = c.node_add_count;
  out.norm = custom_norm(out.perturbation.delta, ctx.schema);
  out.reverted_columns = c.reverted;
  auto p = ctx.target.predict(out.final_vector.span());
  out.target_probability_after = p.probability;
  out.evades_target = p.label == Label::non_ad;
}

inline AttackOutcome search(AttackKind kind, const AttackContext& ctx, const PageGraph& graph,
                            const AttackConfig& config, const CandidateObserver& observer) {
  config.validate();
  AttackOutcome out;
  out.attack = kind;
  out.original_vector = extract_features(graph, ctx.patterns);
  out.final_vector = out.original_vector;
  auto before = ctx.target.predict(out.original_vector.span());
  out.target_probability_before = before.probability;
  out.target_probability_after = before.probability;
  if (before.label != Label::ad) {
    out.status = AttackStatus::not_applicable;
    out.perturbed_graph = graph;
    return out;
  }

  const FeatureVector& x_in = out.original_vector;
  const auto scale = step_scale(ctx.stats, ctx.schema);
  auto surrogate_p = [&](const FeatureVector& v) {
    return ctx.surrogate.predict_ad_probability(normalize(v, ctx.stats, ctx.schema).span());
  };

  FeatureVector z = x_in;
  double alpha = config.step_size;
  double threshold = 0.5;
  out.status = AttackStatus::fail;
  out.perturbed_graph = graph;

  for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
    out.iterations_used = iter;
    for (std::size_t s = 0; s < config.enforcement_interval; ++s) {
      auto grad = ctx.surrogate.input_gradient(normalize(z, ctx.stats, ctx.schema).span(), Label::non_ad);
      auto step = signed_step(grad, alpha, ctx.schema);
      for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] += step[i] * scale[i];
        if (ctx.schema.column(i).binary_like()) z[i] = std::clamp(z[i], 0.0, 1.0);
      }
      z = clip_localized(z, x_in, ctx.stats, ctx.schema, config.eps_global, config.eps_local);
      if (config.stop_on_crossing && surrogate_p(z) < threshold) break;
    }
    // Constraints are enforced once per interval.
    FeatureVector target = project_feature_space(z, x_in, ctx.stats, ctx.schema, config);

    auto candidates = map_back(graph, x_in, target, config.strategies, ctx.patterns, config.seed + iter);
    std::optional<std::size_t> first_success;
    std::vector<MapBackVariant> succeeded;
    std::size_t best = 0;
    double best_p = 2.0;
    std::vector<FeatureVector> reextracted;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      reextracted.push_back(extract_features(candidates[k].graph, ctx.patterns));
      AttackOutcome probe = out;
      finish_outcome(probe, candidates[k], reextracted.back(), ctx);
      bool actionable = validate_actionability(graph, probe, ctx, config);
      if (observer) observer({graph, iter, candidates[k], reextracted.back(), probe.evades_target, actionable});
      if (probe.evades_target && actionable) {
        succeeded.push_back(candidates[k].strategy.variant);
        if (!first_success) first_success = k;
      }
      double p = surrogate_p(reextracted.back());
      if (p < best_p) {
        best_p = p;
        best = k;
      }
    }
    if (first_success) {
      finish_outcome(out, candidates[*first_success], reextracted[*first_success], ctx);
      out.status = AttackStatus::success;
      out.actionable = true;
      out.strategies_succeeded = std::move(succeeded);
      return out;
    }
    finish_outcome(out, candidates[best], reextracted[best], ctx);
    out.actionable = validate_actionability(graph, out, ctx, config);
    // Feedback: continue from the re-extracted page, with a larger step.
    z = reextracted[best];
    alpha = std::min(alpha * config.step_enlargement, config.eps_global);
    threshold /= config.step_enlargement;
  }
  return out;
}

}  // namespace detail

/// Iterative constrained search: gradient steps on the surrogate, clipping and
/// projections in feature space, map-back under every strategy, re-extraction
/// and verification on the target.
inline AttackOutcome run_attack(const AttackContext& ctx, const PageGraph& graph, const AttackConfig& config = {},
                                const CandidateObserver& observer = {}) {
  return detail::search(AttackKind::a4, ctx, graph, config, observer);
}

/// A single iteration of the full search.
inline AttackOutcome run_strong_baseline(const AttackContext& ctx, const PageGraph& graph,
                                         const AttackConfig& config = {}, const CandidateObserver& observer = {}) {
  AttackConfig one = config;
  one.max_iter = std::min<std::size_t>(1, config.max_iter);
  return detail::search(AttackKind::strong, ctx, graph, one, observer);
}

/// Plain PGD in normalized space: every column moves, only the global
/// epsilon ball and the [0, 1] box are enforced, and nothing is mapped back
/// to the page. The raw result is then judged like any other outcome.
inline AttackOutcome run_weak_baseline(const AttackContext& ctx, const PageGraph& graph,
                                       const AttackConfig& config = {}) {
  config.validate();
  AttackOutcome out;
  out.attack = AttackKind::weak;
  out.original_vector = extract_features(graph, ctx.patterns);
  out.final_vector = out.original_vector;
  out.perturbed_graph = graph;
  auto before = ctx.target.predict(out.original_vector.span());
  out.target_probability_before = before.probability;
  out.target_probability_after = before.probability;
  if (before.label != Label::ad) {
    out.status = AttackStatus::not_applicable;
    return out;
  }

  const NormalizedVector start = normalize(out.original_vector, ctx.stats, ctx.schema);
  NormalizedVector x = start;
  const std::size_t steps = config.max_iter * config.enforcement_interval;
  for (std::size_t t = 0; t < steps; ++t) {
    auto grad = ctx.surrogate.input_gradient(x.span(), Label::non_ad);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (grad[i] > 0.0) x[i] -= config.step_size;
      else if (grad[i] < 0.0) x[i] += config.step_size;
      x[i] = std::clamp(x[i], start[i] - config.eps_global, start[i] + config.eps_global);
      x[i] = std::clamp(x[i], 0.0, 1.0);
    }
  }
  out.iterations_used = config.max_iter;
  out.final_vector = denormalize(x, ctx.stats, ctx.schema);
  out.perturbation.delta = controlled_delta(out.original_vector, out.final_vector, ctx.stats, ctx.schema);
  out.norm = custom_norm(out.perturbation.delta, ctx.schema);
  auto after = ctx.target.predict(out.final_vector.span());
  out.target_probability_after = after.probability;
  out.evades_target = after.label == Label::non_ad;
  out.actionable = validate_actionability(graph, out, ctx, config);
  out.status = out.evades_target && out.actionable ? AttackStatus::success : AttackStatus::fail;
  return out;
}

inline AttackOutcome run(AttackKind kind, const AttackContext& ctx, const PageGraph& graph, const AttackConfig& config,
                         const CandidateObserver& observer = {}) {
  switch (kind) {
    case AttackKind::a4: return run_attack(ctx, graph, config, observer);
    case AttackKind::strong: return run_strong_baseline(ctx, graph, config, observer);
    case AttackKind::weak: return run_weak_baseline(ctx, graph, config);
  }
  throw Error(Errc::invalid_config, "unknown attack kind");
}

}  // namespace a4lab

#endif  // A4LAB_ATTACK_HPP

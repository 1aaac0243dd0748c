#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "a4lab/attack.hpp"
#include "fixtures.hpp"

using namespace a4lab;
namespace fx = a4lab::fixtures;

namespace {

const FeatureSchema& schema() {
  static const FeatureSchema s = default_schema();
  return s;
}

bool same_outcome(const AttackOutcome& a, const AttackOutcome& b) {
  return a.status == b.status && a.iterations_used == b.iterations_used &&
         a.strategies_succeeded == b.strategies_succeeded && a.final_vector == b.final_vector &&
         a.perturbed_graph == b.perturbed_graph && a.norm == b.norm && a.actionable == b.actionable;
}

}  // namespace

// --- gradient step -----------------------------------------------------------

TEST(GradientStep, ZeroAlphaIsIdentity) {
  NormalizedVector x(col::width, 0.4);
  std::vector<double> g(col::width, 3.0);
  EXPECT_EQ(gradient_step(x, g, 0.0, schema()), x);
}

TEST(GradientStep, SignAndMask) {
  NormalizedVector x(col::width, 0.5);
  std::vector<double> g(col::width, 1.0);
  g[col::edge_count] = 1e9;
  auto y = gradient_step(x, g, 0.07, schema());
  for (std::size_t i = 0; i < col::width; ++i) {
    if (schema().column(i).perturbable)
      EXPECT_DOUBLE_EQ(y[i], 0.5 - 0.07) << i;  // descends the loss towards non-ad
    else
      EXPECT_EQ(y[i], 0.5) << i;
  }
  g.assign(col::width, -2.0);
  EXPECT_DOUBLE_EQ(gradient_step(x, g, 0.07, schema())[col::url_length], 0.57);
  EXPECT_THROW(gradient_step(x, std::vector<double>(3, 1.0), 0.07, schema()), Error);
}

// --- clipping -------------------------------------------------------------------

TEST(Clip, BoundArithmetic) {
  EXPECT_DOUBLE_EQ(localized_bound(100, 1000, 0.3, 0.8), 80.0);
  EXPECT_DOUBLE_EQ(localized_bound(1000, 100, 0.3, 0.8), 30.0);
  EXPECT_EQ(localized_bound(0, 100, 0.3, 0.8), 0.0);
}

TEST(Clip, ClampsToBall) {
  auto stats = fx::stats_with_max({{col::node_count, 1000.0}, {col::url_length, 100.0}, {col::edge_count, 10.0}});
  FeatureVector x0(col::width);
  x0[col::node_count] = 100;
  x0[col::url_length] = 0;
  x0[col::edge_count] = 4;
  FeatureVector x = x0;
  x[col::node_count] = 500;
  x[col::url_length] = 50;
  x[col::edge_count] = 9;
  auto y = clip_localized(x, x0, stats, schema(), 0.3, 0.8);
  EXPECT_EQ(y[col::node_count], 180.0);
  EXPECT_EQ(y[col::url_length], 0.0);  // frozen: local bound 0
  EXPECT_EQ(y[col::edge_count], 9.0);   // not perturbable
  x[col::node_count] = -500;
  EXPECT_EQ(clip_localized(x, x0, stats, schema(), 0.3, 0.8)[col::node_count], 20.0);
}

TEST(ClipProperty, WithinBound) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 2000; ++t) {
    NormalizationStats stats{std::vector<double>(col::width, 0.0), std::vector<double>(col::width, 0.0)};
    for (std::size_t i = 0; i < col::width; ++i) stats.max[i] = fx::uniform(rng, 0.0, 500.0);
    auto x0 = fx::random_valid_vector(rng, schema());
    auto x = fx::random_vector(rng, 400.0);
    auto y = clip_localized(x, x0, stats, schema(), 0.3, 0.8);
    for (std::size_t i = 0; i < col::width; ++i) {
      const Column& c = schema().column(i);
      if (!c.perturbable || !c.numeric()) {
        ASSERT_EQ(y[i], x[i]);
        continue;
      }
      double b = std::min(0.3 * stats.range(i), 0.8 * x0[i]);
      ASSERT_LE(std::abs(y[i] - x0[i]), b + 1e-9);
    }
  }
}

// --- projections -------------------------------------------------------------

TEST(Validity, Examples) {
  FeatureVector x(col::width);
  x[col::node_count] = -0.3;
  x[col::url_length] = 7.6;
  x[col::ad_keyword] = 0.3;
  x[col::special_char] = 0.7;
  x[col::semicolon] = 0.5;
  x[col::degree_connectivity] = 2.25;
  x[col::resource_type + 0] = 0.2;
  x[col::resource_type + 1] = 0.9;
  x[col::resource_type + 2] = 0.4;
  auto y = enforce_validity(x, schema());
  EXPECT_EQ(y[col::node_count], 0.0);
  EXPECT_EQ(y[col::url_length], 8.0);
  EXPECT_EQ(y[col::ad_keyword], 0.0);
  EXPECT_EQ(y[col::special_char], 1.0);
  EXPECT_EQ(y[col::semicolon], 0.0);  // tie goes to 0
  EXPECT_EQ(y[col::degree_connectivity], 2.25);
  EXPECT_EQ(y[col::resource_type + 0], 0.0);
  EXPECT_EQ(y[col::resource_type + 1], 1.0);
  EXPECT_EQ(y[col::resource_type + 2], 0.0);

  FeatureVector tie(col::width);
  tie[col::resource_type + 2] = 0.6;
  tie[col::resource_type + 4] = 0.6;
  auto z = enforce_validity(tie, schema());
  EXPECT_EQ(z[col::resource_type + 2], 1.0);
  EXPECT_EQ(z[col::resource_type + 4], 0.0);
}

TEST(Functionality, Examples) {
  FeatureVector x0(col::width);
  x0[col::node_count] = 40;
  x0[col::url_length] = 60;
  x0[col::ad_keyword] = 1;
  FeatureVector x = x0;
  x[col::node_count] = 35;
  x[col::url_length] = 75;
  x[col::ad_keyword] = 0;
  auto y = enforce_functionality(x, x0, schema());
  EXPECT_EQ(y[col::node_count], 40.0);
  EXPECT_EQ(y[col::url_length], 75.0);
  EXPECT_EQ(y[col::ad_keyword], 0.0);
}

TEST(Functionality, SemicolonFlipPlansReencoding) {
  PageGraph g = fx::three_node("http://x.com/p?a=1;b=2", "example.org");
  UrlPatterns patterns;
  auto x0 = extract_features(g, patterns);
  ASSERT_EQ(x0[col::semicolon], 1.0);
  auto target = x0;
  target[col::semicolon] = 0.0;
  target = enforce_functionality(target, x0, schema());
  auto actions = plan_url_actions(x0, target, g.page_domain(), patterns);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0].kind, UrlAction::Kind::reencode);
  EXPECT_EQ(actions[0].column, col::semicolon);

  std::vector<MapBackStrategy> one = {{}};
  auto cands = map_back(g, x0, target, one, patterns);
  const Url& u = *cands[0].graph.request().url;
  EXPECT_EQ(u.decoded_form(), g.request().url->decoded_form());
  EXPECT_TRUE(equivalent_up_to_padding(*g.request().url, u));
  EXPECT_EQ(extract_features(cands[0].graph, patterns), target);
}

TEST(ProjectionProperty, IdempotentAndConsistent) {
  std::mt19937_64 rng(99);
  AttackConfig cfg;
  for (int t = 0; t < 3000; ++t) {
    NormalizationStats stats{std::vector<double>(col::width, 0.0), std::vector<double>(col::width, 0.0)};
    for (std::size_t i = 0; i < col::width; ++i) stats.max[i] = fx::uniform(rng, 0.0, 300.0);
    auto x0 = fx::random_valid_vector(rng, schema());
    auto x = fx::random_vector(rng, 300.0);

    auto v = enforce_validity(x, schema());
    ASSERT_EQ(enforce_validity(v, schema()), v);
    auto f = enforce_functionality(x, x0, schema());
    ASSERT_EQ(enforce_functionality(f, x0, schema()), f);

    auto p = project_feature_space(x, x0, stats, schema(), cfg);
    ASSERT_EQ(enforce_validity(p, schema()), p);
    ASSERT_EQ(enforce_functionality(p, x0, schema()), p);
    ASSERT_GE(p[col::node_count], x0[col::node_count]);
    ASSERT_GE(p[col::url_length], x0[col::url_length]);
    for (std::size_t i = 0; i < col::width; ++i) {
      const Column& c = schema().column(i);
      if (c.perturbable && c.numeric())
        ASSERT_LE(std::abs(p[i] - x0[i]), localized_bound(x0[i], stats.range(i), 0.3, 0.8) + 1e-9);
    }
  }
}

// --- custom norm ---------------------------------------------------------------

TEST(CustomNorm, Examples) {
  std::vector<double> d(col::width, 0.0);
  EXPECT_EQ(custom_norm(d, schema()), (CustomNorm{0.0, 0}));
  d[col::node_count] = 0.1;
  d[col::url_length] = -0.25;
  EXPECT_EQ(custom_norm(d, schema()), (CustomNorm{0.25, 0}));
  d.assign(col::width, 0.0);
  d[col::ad_keyword] = -1;
  d[col::node_count] = 0.05;
  EXPECT_EQ(custom_norm(d, schema()), (CustomNorm{0.05, 1}));
}

// --- map-back ------------------------------------------------------------------

TEST(MapBack, NodeAdditionPerStrategy) {
  PageGraph g = fx::chain(6);
  auto x0 = extract_features(g);
  auto target = x0;
  target[col::node_count] += 5;
  AttackConfig cfg;
  auto cands = map_back(g, x0, target, cfg.strategies, UrlPatterns{});
  ASSERT_EQ(cands.size(), 2u);
  EXPECT_EQ(cands[0].strategy.variant, MapBackVariant::centralized);
  EXPECT_EQ(cands[1].strategy.variant, MapBackVariant::distributed);
  for (const auto& c : cands) {
    EXPECT_EQ(c.graph.node_count(), g.node_count() + 5);
    EXPECT_EQ(c.node_add_count, 5u);
    EXPECT_TRUE(c.reverted.empty());
  }
  EXPECT_NE(cands[0].graph, cands[1].graph);
}

TEST(MapBack, LengthPadding) {
  PageGraph g = fx::chain(4, "http://cdn.y.org/lib.js?v=2");
  auto x0 = extract_features(g);
  auto target = x0;
  target[col::url_length] += 40;
  AttackConfig cfg;
  auto cands = map_back(g, x0, target, cfg.strategies, UrlPatterns{});
  for (const auto& c : cands) {
    const Url& u = *c.graph.request().url;
    EXPECT_EQ(u.decoded_form().size(), g.request().url->decoded_form().size() + 40);
    EXPECT_TRUE(equivalent_up_to_padding(*g.request().url, u));
    EXPECT_EQ(extract_features(c.graph), target);
  }
}

TEST(MapBack, ShortPaddingFoldsIntoInsertion) {
  // Two extra characters cannot carry a pad pair of their own.
  PageGraph g = fx::three_node("http://cdn.y.org/lib.js", "example.org");
  auto x0 = extract_features(g);
  auto target = x0;
  target[col::semicolon] = 1;
  target[col::url_length] += 4 + 1 + 2;
  std::vector<MapBackStrategy> one = {{}};
  auto c = map_back(g, x0, target, one, UrlPatterns{}).front();
  EXPECT_TRUE(c.reverted.empty());
  EXPECT_EQ(extract_features(c.graph), target);
}

TEST(MapBack, NoChangeIsIdentity) {
  PageGraph g = fx::chain(5);
  auto x0 = extract_features(g);
  AttackConfig cfg;
  for (const auto& c : map_back(g, x0, x0, cfg.strategies, UrlPatterns{})) {
    EXPECT_EQ(c.graph, g);
    EXPECT_TRUE(c.url_actions.empty());
  }
}

TEST(MapBack, InfeasibleCoordinatesAreReverted) {
  // Page domain unknown: the base-domain flag has no pattern to insert.
  PageGraph g = fx::three_node("http://cdn.y.org/lib.js", "");
  auto x0 = extract_features(g);
  auto target = x0;
  target[col::base_domain] = 1;
  std::vector<MapBackStrategy> one = {{}};
  auto c = map_back(g, x0, target, one, UrlPatterns{}).front();
  EXPECT_EQ(c.reverted, std::vector<std::size_t>{col::base_domain});
  EXPECT_EQ(extract_features(c.graph)[col::base_domain], 0.0);
}

TEST(MapBackProperty, RealizedUrlsStayEquivalent) {
  std::mt19937_64 rng(31);
  UrlPatterns patterns;
  const std::vector<std::string> urls = {"http://ads.t.net/b/300x250.gif?cid=4;s=1", "http://cdn.site.com/app.js",
                                         "http://x.org/track/p?u=site.com&z=1#f", "http://srv.a.io/pixel"};
  std::uniform_int_distribution<int> bit(0, 1), extra(0, 60);
  for (int t = 0; t < 1000; ++t) {
    PageGraph g = fx::three_node(urls[static_cast<std::size_t>(t) % urls.size()], "site.com");
    auto x0 = extract_features(g, patterns);
    auto target = x0;
    for (std::size_t c : kUrlFlagColumns) target[c] = bit(rng);
    target[col::url_length] += extra(rng);
    auto r = realize_url(*g.request().url, target, g.page_domain(), patterns, static_cast<std::uint64_t>(t));
    ASSERT_TRUE(equivalent_up_to_padding(*g.request().url, r.url)) << r.url.markup_form();
    auto y = extract_features(g.with_request_url(r.url), patterns);
    for (std::size_t c : kUrlFlagColumns)
      if (std::find(r.reverted.begin(), r.reverted.end(), c) == r.reverted.end()) ASSERT_EQ(y[c], target[c]) << c;
    if (std::find(r.reverted.begin(), r.reverted.end(), col::url_length) == r.reverted.end())
      ASSERT_EQ(y[col::url_length], target[col::url_length]);
  }
}

// --- search --------------------------------------------------------------------

TEST(Attack, FlagFlipSucceedsInOneIteration) {
  auto b = fx::keyword_bench();
  auto ctx = b.context();
  auto out = run_attack(ctx, b.graph);
  ASSERT_EQ(out.status, AttackStatus::success);
  EXPECT_EQ(out.iterations_used, 1u);
  EXPECT_EQ(out.strategies_succeeded,
            (std::vector<MapBackVariant>{MapBackVariant::centralized, MapBackVariant::distributed}));
  EXPECT_EQ(out.final_vector[col::ad_keyword], 0.0);
  EXPECT_EQ(out.norm.flips, 1u);
  EXPECT_TRUE(validate_actionability(b.graph, out, ctx, AttackConfig{}));
  EXPECT_EQ(out.perturbed_graph->request().url->decoded_form(), b.graph.request().url->decoded_form());
}

TEST(Attack, SideEffectSeparatesStrategies) {
  auto b = fx::side_effect_bench();
  auto ctx = b.context();
  std::vector<std::pair<std::size_t, bool>> seen;
  auto out = run_attack(ctx, b.graph, AttackConfig{}, [&](const CandidateEvent& e) {
    seen.emplace_back(e.iteration, e.target_non_ad && e.actionable);
  });
  ASSERT_EQ(out.status, AttackStatus::success);
  EXPECT_EQ(out.iterations_used, 2u);
  EXPECT_EQ(out.strategies_succeeded, std::vector<MapBackVariant>{MapBackVariant::distributed});
  EXPECT_EQ(out.perturbation.node_add_count, 2u);
  EXPECT_EQ(seen.size(), 4u);
  EXPECT_NEAR(extract_features(*out.perturbed_graph)[col::degree_connectivity], 21.5 / 7.0, 1e-12);

  auto strong = run_strong_baseline(ctx, b.graph);
  EXPECT_EQ(strong.status, AttackStatus::fail);
  EXPECT_EQ(strong.iterations_used, 1u);
}

TEST(Attack, ZeroBudgetFails) {
  auto b = fx::keyword_bench();
  auto ctx = b.context();
  AttackConfig cfg;
  cfg.max_iter = 0;
  auto out = run_attack(ctx, b.graph, cfg);
  EXPECT_EQ(out.status, AttackStatus::fail);
  EXPECT_EQ(out.iterations_used, 0u);
}

TEST(Attack, NonAdInputIsNotApplicable) {
  auto b = fx::keyword_bench();
  PageGraph clean = fx::three_node("http://srv.t.net/lib/x.js", "example.org");
  auto ctx = b.context();
  EXPECT_EQ(run_attack(ctx, clean).status, AttackStatus::not_applicable);
  EXPECT_EQ(run_weak_baseline(ctx, clean).status, AttackStatus::not_applicable);
}

TEST(Attack, StrongEqualsA4WhenOneIterationSuffices) {
  auto b = fx::keyword_bench();
  auto ctx = b.context();
  auto a4 = run_attack(ctx, b.graph);
  ASSERT_EQ(a4.iterations_used, 1u);
  auto strong = run_strong_baseline(ctx, b.graph);
  EXPECT_EQ(strong.attack, AttackKind::strong);
  EXPECT_TRUE(same_outcome(a4, strong));
}

TEST(Attack, WeakBaselineRejectedByValidator) {
  auto b = fx::keyword_bench();
  auto ctx = b.context();
  auto out = run_weak_baseline(ctx, b.graph);
  EXPECT_DOUBLE_EQ(out.final_vector[col::ad_keyword], 0.7);  // the eps ball stops it short of the split
  EXPECT_FALSE(out.actionable);
  EXPECT_EQ(out.status, AttackStatus::fail);
  bool fractional = false;
  for (std::size_t i = 0; i < col::width; ++i) {
    double v = out.final_vector[i];
    if (schema().column(i).binary_like() && v != 0.0 && v != 1.0) fractional = true;
  }
  EXPECT_TRUE(fractional);
}

TEST(Attack, InvalidConfigRejected) {
  auto b = fx::keyword_bench();
  auto ctx = b.context();
  AttackConfig cfg;
  cfg.enforcement_interval = 0;
  EXPECT_THROW(run_attack(ctx, b.graph, cfg), Error);
  cfg = {};
  cfg.strategies.clear();
  EXPECT_THROW(run_attack(ctx, b.graph, cfg), Error);
}

// --- validator -----------------------------------------------------------------

TEST(Validator, RejectsBrokenOutcomes) {
  auto b = fx::keyword_bench();
  auto ctx = b.context();
  AttackConfig cfg;
  auto good = run_attack(ctx, b.graph, cfg);
  ASSERT_TRUE(validate_actionability(b.graph, good, ctx, cfg));

  auto fractional = good;
  fractional.final_vector[col::semicolon] = 0.4;
  EXPECT_FALSE(validate_actionability(b.graph, fractional, ctx, cfg));

  auto moved = good;
  moved.perturbed_graph = b.graph.with_request_url(Url::from_markup("http://srv.t.net/elsewhere/x.js?z=1"));
  moved.final_vector = extract_features(*moved.perturbed_graph);
  EXPECT_FALSE(validate_actionability(b.graph, moved, ctx, cfg));

  auto stale = good;
  stale.final_vector[col::degree_connectivity] += 0.5;
  EXPECT_FALSE(validate_actionability(b.graph, stale, ctx, cfg));

  auto too_far = good;
  too_far.perturbed_graph = insert_perturbation_nodes(*good.perturbed_graph, 30, {});
  too_far.final_vector = extract_features(*too_far.perturbed_graph);
  EXPECT_FALSE(validate_actionability(b.graph, too_far, ctx, cfg));

  auto dropped = good;
  dropped.perturbed_graph.reset();
  EXPECT_FALSE(validate_actionability(b.graph, dropped, ctx, cfg));
}

// --- configuration -----------------------------------------------------------

TEST(AttackConfigJson, RoundTripAndRejection) {
  AttackConfig c;
  c.max_iter = 7;
  c.step_size = 0.05;
  c.strategies = parse_strategies("distributed", 3);
  auto back = attack_config_from_json(attack_config_to_json(c));
  EXPECT_EQ(back.max_iter, 7u);
  EXPECT_EQ(back.step_size, 0.05);
  EXPECT_EQ(back.strategies, c.strategies);
  EXPECT_THROW(attack_config_from_json({{"nonsense", 1}}), Error);
  EXPECT_THROW(attack_config_from_json({{"eps_global", -1.0}}), Error);
  EXPECT_THROW(parse_strategies("all"), Error);
}

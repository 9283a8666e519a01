#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "psychfm/error.hpp"
#include "psychfm/features.hpp"
#include "psychfm/rng.hpp"

using namespace psychfm;

namespace {

ChoiceProblem sure3_vs_long_shot() {
  ChoiceProblem p;
  p.game_id = 1;
  p.ha = 3;
  p.p_ha = 1;
  p.la = 3;
  p.hb = 32;
  p.p_hb = 0.1;
  p.lot_val = 0;
  p.lot_num = 1;
  return p;
}

// Random problem drawn from the valid parameter space.
ChoiceProblem random_problem(rng::Engine& e, double lo = -20, double hi = 20) {
  auto val = [&] { return std::round(lo + (hi - lo) * rng::uniform01(e)); };
  ChoiceProblem p;
  p.game_id = 1;
  p.ha = val();
  p.la = val();
  p.p_ha = std::round(100 * rng::uniform01(e)) / 100;
  p.hb = val();
  p.p_hb = std::round(100 * rng::uniform01(e)) / 100;
  p.lot_val = val();
  const int shape = static_cast<int>(rng::below(e, 4));
  p.lot_shape = static_cast<LotShape>(shape);
  if (p.lot_shape == LotShape::None) p.lot_num = 1;
  else if (p.lot_shape == LotShape::Symm) p.lot_num = 3 + 2 * static_cast<int>(rng::below(e, 3));
  else p.lot_num = 2 + static_cast<int>(rng::below(e, 6));
  p.corr = static_cast<Corr>(static_cast<int>(rng::below(e, 3)) - 1);
  p.amb = rng::below(e, 4) == 0 ? 1 : 0;
  return p;
}

ChoiceProblem shifted(ChoiceProblem p, double c) {
  p.ha += c;
  p.la += c;
  p.hb += c;
  p.lot_val += c;
  return p;
}

}  // namespace

TEST_CASE("encode_onehot") {
  const auto x = encode_onehot(0, 0, 240, 210);
  CHECK(x.length == 450);
  CHECK(x.active == std::vector<std::uint32_t>{0, 240});
  CHECK(encode_onehot(239, 209, 240, 210).active == std::vector<std::uint32_t>{239, 449});
  CHECK_THROWS_AS(encode_onehot(240, 0, 240, 210), ValidationError);
  CHECK_THROWS_AS(encode_onehot(0, -1, 240, 210), ValidationError);
}

TEST_CASE("property: one-hot encoding is injective with two active indices") {
  std::set<std::vector<std::uint32_t>> seen;
  for (int s = 0; s < 12; ++s)
    for (int g = 0; g < 9; ++g) {
      const auto x = encode_onehot(s, g, 12, 9);
      CHECK(x.active.size() == 2);
      CHECK(x.active[0] < x.active[1]);
      CHECK(x.active[1] < x.length);
      CHECK(seen.insert(x.active).second);
    }
}

TEST_CASE("IdentityIndex maps raw ids in ascending order") {
  const std::vector<RatePoint> pts{{30, 7, 0, 25}, {10, 9, 0, 25}, {20, 7, 0, 25}};
  const IdentityIndex idx(pts);
  CHECK(idx.n_subjects() == 3);
  CHECK(idx.n_games() == 2);
  CHECK(idx.encode({10, 7}).active == std::vector<std::uint32_t>{0, 3});
  CHECK(idx.encode({30, 9}).active == std::vector<std::uint32_t>{2, 4});
  CHECK_THROWS_AS(idx.encode({11, 7}), ValidationError);
}

TEST_CASE("naive_features") {
  const auto p = sure3_vs_long_shot();
  const auto n = naive_features(expand_gamble_a(p), expand_gamble_b(p));
  CHECK(n.d_ev == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(n.d_min == -3);
  CHECK(n.d_max == 29);
  CHECK(n.d_sd == doctest::Approx(9.6).epsilon(1e-12));
  const auto same = naive_features(expand_gamble_b(p), expand_gamble_b(p));
  CHECK(same.d_ev == 0);
  CHECK(same.d_sd == 0);
  CHECK(same.d_min == 0);
  CHECK(same.d_max == 0);
}

TEST_CASE("psych_features on a sure 3 vs 32 with p=0.1") {
  const auto f = psych_features(sure3_vs_long_shot());
  CHECK(f.d_ev == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(f.p_better_fb == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(f.p_better_o == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(f.d_sign_ev == doctest::Approx(-0.9).epsilon(1e-12));
  CHECK(f.d_uni_ev == doctest::Approx(13.0).epsilon(1e-12));
  CHECK(f.p_better_u == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f.sign_max == 1);
  CHECK(f.ratio_min == 0);
  CHECK(f.dom == 0);
  CHECK(f.feedback_code == 0);
  CHECK(f.lot_shape_code == 0);
}

TEST_CASE("spot values agree with direct enumeration") {
  const auto p = sure3_vs_long_shot();
  const auto a = expand_gamble_a(p), b = expand_gamble_b(p);
  const auto f = psych_features(p);
  CHECK(std::abs(f.p_better_fb - oracle::p_b_better(a, b, Corr::None)) < 1e-12);
  // uniform over distinct outcomes: B = {0, 32} each 1/2, so B > 3 half the time
  const auto bu = OutcomeDistribution::from({{0, 0.5}, {32, 0.5}});
  CHECK(std::abs(f.p_better_u - oracle::p_b_better(a, bu, Corr::None)) < 1e-12);
  const auto as = OutcomeDistribution::from({{1, 1.0}});
  const auto bs = OutcomeDistribution::from({{0, 0.9}, {1, 0.1}});
  CHECK(std::abs(f.d_sign_ev - (bs.mean() - as.mean())) < 1e-12);
}

TEST_CASE("lotShapeCode") {
  auto p = sure3_vs_long_shot();
  p.lot_num = 3;
  p.lot_shape = LotShape::RSkew;
  CHECK(psych_features(p).lot_shape_code == 1);
  p.lot_shape = LotShape::LSkew;
  CHECK(psych_features(p).lot_shape_code == -1);
  p.lot_shape = LotShape::Symm;
  CHECK(psych_features(p).lot_shape_code == 0);
}

TEST_CASE("objective view under ambiguity") {
  auto p = sure3_vs_long_shot();
  p.amb = 1;
  const auto view = objective_view_b(p);
  REQUIRE(view.size() == 1);
  CHECK(view[0].value == 0);
  const auto f = psych_features(p);
  CHECK(f.d_ev_o == doctest::Approx(-3.0));
  CHECK(f.d_ev_fb == doctest::Approx(0.2));
  CHECK(f.p_better_o == 0);
  CHECK(f.p_better_fb == doctest::Approx(0.1));
}

TEST_CASE("dominance") {
  const auto a = OutcomeDistribution::from({{1, 0.5}, {4, 0.5}});
  const auto b = a.shifted(1);
  CHECK(dominance(a, b) == 1);
  CHECK(dominance(b, a) == -1);
  CHECK(dominance(a, a) == 0);
  const auto wide = OutcomeDistribution::from({{0, 0.5}, {10, 0.5}});
  const auto narrow = OutcomeDistribution::from({{5, 1.0}});
  CHECK(dominance(wide, narrow) == 0);
  // B strictly above A on every pair: comonotone pBetter is 1
  for (auto corr : {Corr::Negative, Corr::None, Corr::Positive})
    CHECK(prob_b_better(a, a.shifted(10), corr) == doctest::Approx(1.0));
  CHECK(prob_b_better(a, b, Corr::Positive) == doctest::Approx(1.0));
}

TEST_CASE("ratio_min") {
  CHECK(ratio_min(0, 0) == 0);
  CHECK(ratio_min(3, 0) == 0);
  CHECK(ratio_min(2, 4) == 0.5);
  CHECK(ratio_min(4, 2) == 0.5);
  CHECK(ratio_min(-2, 4) == -0.5);
  CHECK(ratio_min(-4, -4) == 1);
}

TEST_CASE("property: feature ranges hold on a fuzzed corpus") {
  rng::Engine e(31337);
  for (int i = 0; i < 2000; ++i) {
    const auto p = random_problem(e);
    const auto f = psych_features(p);
    for (double v : f.values()) CHECK(std::isfinite(v));
    for (double v : {f.p_better_o, f.p_better_fb, f.p_better_u, f.p_better_s_o, f.p_better_s_fb}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(std::abs(f.ratio_min) <= 1.0);
    CHECK((f.dom == -1 || f.dom == 0 || f.dom == 1));
    CHECK((f.sign_max == -1 || f.sign_max == 0 || f.sign_max == 1));
    if (p.amb == 0) {
      CHECK(f.d_ev_o == f.d_ev_fb);
      CHECK(f.d_ev_o == f.d_ev);
    }
  }
}

TEST_CASE("property: pBetter_fb equals joint enumeration") {
  rng::Engine e(4);
  for (int i = 0; i < 500; ++i) {
    const auto p = random_problem(e);
    const auto f = psych_features(p);
    CHECK(std::abs(f.p_better_fb -
                   oracle::p_b_better(expand_gamble_a(p), expand_gamble_b(p), p.corr)) < 1e-12);
  }
}

TEST_CASE("property: a common positive shift leaves pBetter, Dom and differences unchanged") {
  // Outcomes kept strictly positive so the sign transforms are unaffected.
  rng::Engine e(99);
  for (int i = 0; i < 500; ++i) {
    const auto p = random_problem(e, 1, 40);
    if (expand_gamble_a(p).min() <= 0 || expand_gamble_b(p).min() <= 0) continue;
    const double c = 1 + std::round(50 * rng::uniform01(e));
    const auto f = psych_features(p), g = psych_features(shifted(p, c));
    CHECK(g.p_better_o == doctest::Approx(f.p_better_o).epsilon(1e-12));
    CHECK(g.p_better_fb == doctest::Approx(f.p_better_fb).epsilon(1e-12));
    CHECK(g.p_better_u == doctest::Approx(f.p_better_u).epsilon(1e-12));
    CHECK(g.p_better_s_o == doctest::Approx(f.p_better_s_o).epsilon(1e-12));
    CHECK(g.p_better_s_fb == doctest::Approx(f.p_better_s_fb).epsilon(1e-12));
    CHECK(g.dom == f.dom);
    for (auto [x, y] : {std::pair{f.d_ev, g.d_ev}, {f.d_sd, g.d_sd}, {f.d_min, g.d_min},
                        {f.d_max, g.d_max}, {f.d_ev_o, g.d_ev_o}, {f.d_ev_fb, g.d_ev_fb},
                        {f.d_uni_ev, g.d_uni_ev}, {f.d_sign_ev, g.d_sign_ev}})
      CHECK(std::abs(x - y) < 1e-9);
  }
}

TEST_CASE("PsychFeatureVector values round trip") {
  const auto f = psych_features(sure3_vs_long_shot());
  const auto v = f.values();
  CHECK(PsychFeatureVector::from_values(v).values() == v);
  CHECK(feature_names().size() == 27);
  CHECK(feature_names()[0] == "Ha");
  CHECK(feature_names()[26] == "Dom");
}

TEST_CASE("Standardizer") {
  SUBCASE("column {1, 3} maps to {-1, +1}") {
    const std::vector<std::vector<double>> rows{{1.0, 5.0}, {3.0, 5.0}};
    const auto s = Standardizer::fit(rows);
    CHECK(s.apply(rows[0]) == std::vector<double>{-1.0, 0.0});
    CHECK(s.apply(rows[1]) == std::vector<double>{1.0, 0.0});
    CHECK(s.scale()[1] == 1.0);
  }
  SUBCASE("single row gives zeros") {
    const std::vector<std::vector<double>> rows{{4.0, -2.0, 7.5}};
    const auto z = Standardizer::fit(rows).apply(rows[0]);
    for (double v : z) CHECK(v == 0.0);
  }
  SUBCASE("unseen rows use training statistics") {
    const std::vector<std::vector<double>> rows{{1.0}, {3.0}};
    const auto s = Standardizer::fit(rows);
    const std::vector<double> fresh{11.0};
    CHECK(s.apply(fresh)[0] == 9.0);
  }
  SUBCASE("empty fit is rejected") {
    CHECK_THROWS_AS(Standardizer::fit(std::span<const std::vector<double>>{}), ValidationError);
  }
  SUBCASE("serialization round trip is exact") {
    const std::vector<std::vector<double>> rows{{0.1, 1e-7}, {0.7, -3.3}, {1.0 / 3, 2.0}};
    const auto s = Standardizer::fit(rows);
    const auto t = Standardizer::deserialize(s.serialize());
    CHECK(t.mean() == s.mean());
    CHECK(t.scale() == s.scale());
    CHECK_THROWS_AS(Standardizer::deserialize("garbage\n"), FormatError);
  }
}

TEST_CASE("property: standardized training columns have mean 0 and variance 1") {
  rng::Engine e(8);
  std::vector<PsychFeatureVector> rows;
  for (int i = 0; i < 200; ++i) rows.push_back(psych_features(random_problem(e)));
  const auto s = fit_standardizer(rows);
  std::vector<double> sum(kFeatureCount, 0.0), sq(kFeatureCount, 0.0);
  for (const auto& r : rows) {
    const auto z = apply_standardizer(s, r);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      sum[j] += z[j];
      sq[j] += z[j] * z[j];
    }
  }
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    CAPTURE(feature_names()[j]);
    const double mean = sum[j] / rows.size();
    CHECK(std::abs(mean) < 1e-9);
    const double var = sq[j] / rows.size() - mean * mean;
    // constant columns (feedbackCode) collapse to 0
    if (s.scale()[j] == 1.0 && var < 1e-12) continue;
    CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("feature CSV round trip") {
  std::vector<FeatureRow> rows{{{1, 1}, psych_features(sure3_vs_long_shot())}};
  auto p = sure3_vs_long_shot();
  p.game_id = 2;
  p.amb = 1;
  rows.push_back({{1, 2}, psych_features(p)});
  const auto back = parse_feature_csv(format_feature_csv(rows));
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].key == rows[i].key);
    CHECK(back[i].features.values() == rows[i].features.values());
  }
  CHECK_THROWS_AS(parse_feature_csv("SubjID,GameID,Ha\n1,1,3\n"), SchemaError);
}

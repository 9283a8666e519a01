#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "psychfm/error.hpp"
#include "psychfm/fm.hpp"
#include "psychfm/io.hpp"
#include "psychfm/linear.hpp"
#include "psychfm/rng.hpp"

using namespace psychfm;

namespace {

FmModel random_model(rng::Engine& e, std::size_t n, std::size_t k, double scale = 1.0) {
  std::vector<double> w(n), v(n * k);
  for (auto& x : w) x = scale * rng::normal(e);
  for (auto& x : v) x = scale * rng::normal(e);
  return FmModel(scale * rng::normal(e), w, v, k);
}

SparseVector random_input(rng::Engine& e, std::size_t n) {
  SparseVector x;
  x.length = n;
  for (std::uint32_t i = 0; i < n; ++i)
    if (rng::below(e, 2) == 1) x.active.push_back(i);
  return x;
}

// Subjects x games grid with one-hot inputs and a planted low-rank target.
std::vector<FmExample> grid_data(int subjects, int games, std::uint64_t seed,
                                 bool skip_diagonal = false) {
  rng::Engine e(seed);
  std::vector<double> a(subjects), b(games), u(subjects), g(games);
  for (auto& x : a) x = 0.2 * rng::normal(e);
  for (auto& x : b) x = 0.2 * rng::normal(e);
  for (auto& x : u) x = 0.3 * rng::normal(e);
  for (auto& x : g) x = 0.3 * rng::normal(e);
  std::vector<FmExample> out;
  for (int s = 0; s < subjects; ++s)
    for (int j = 0; j < games; ++j) {
      if (skip_diagonal && s == j) continue;
      out.push_back({encode_onehot(s, j, subjects, games), 0.5 + a[s] + b[j] + u[s] * g[j]});
    }
  return out;
}

double train_mse(const FmModel& m, const std::vector<FmExample>& data) {
  double s = 0;
  for (const auto& ex : data) {
    const double r = m.predict(ex.x) - ex.y;
    s += r * r;
  }
  return s / data.size();
}

std::vector<double> flatten(const FmModel& m) {
  std::vector<double> t{m.w0()};
  t.insert(t.end(), m.w().begin(), m.w().end());
  t.insert(t.end(), m.v_data().begin(), m.v_data().end());
  return t;
}

FmModel unflatten(const std::vector<double>& t, std::size_t n, std::size_t k) {
  std::vector<double> w(t.begin() + 1, t.begin() + 1 + n);
  std::vector<double> v(t.begin() + 1 + n, t.end());
  return FmModel(t[0], w, v, k);
}

}  // namespace

TEST_CASE("fm_predict worked example") {
  const FmModel m(0.0, {0.1, 0.2}, {0.1, 0.2, 0.3, -0.1}, 2);
  SparseVector x{2, {0, 1}};
  CHECK(fm_predict(m, x) == doctest::Approx(0.31).epsilon(1e-14));
  CHECK(oracle::fm_naive(m, x) == doctest::Approx(0.31).epsilon(1e-14));
}

TEST_CASE("bias-only model predicts its bias everywhere") {
  const FmModel m(0.42, std::vector<double>(5, 0.0), std::vector<double>(15, 0.0), 3);
  rng::Engine e(1);
  for (int i = 0; i < 20; ++i) CHECK(fm_predict(m, random_input(e, 5)) == 0.42);
}

TEST_CASE("fm_predict rejects dimension mismatch") {
  const FmModel m(3, 2);
  CHECK_THROWS_AS(fm_predict(m, SparseVector{4, {0}}), ValidationError);
  CHECK_THROWS_AS(fm_predict(m, SparseVector{3, {3}}), ValidationError);
}

TEST_CASE("property: factored prediction equals the pairwise loop") {
  rng::Engine e(2718);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng::below(e, 20), k = 1 + rng::below(e, 5);
    const auto m = random_model(e, n, k);
    const auto x = random_input(e, n);
    worst = std::max(worst, std::abs(fm_predict(m, x) - oracle::fm_naive(m, x)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("property: k=1 with V=0 is a linear model") {
  rng::Engine e(5);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng::below(e, 12);
    std::vector<double> w(n);
    for (auto& x : w) x = rng::normal(e);
    const double b = rng::normal(e);
    const FmModel fm(b, w, std::vector<double>(n, 0.0), 1);
    const LinearModel lin{b, w};
    const auto x = random_input(e, n);
    std::vector<double> dense(n, 0.0);
    for (auto j : x.active) dense[j] = 1.0;
    CHECK(fm_predict(fm, x) == doctest::Approx(linear_predict(lin, dense)).epsilon(1e-14));
  }
}

TEST_CASE("SGD gradient matches central finite differences") {
  rng::Engine e(12);
  const std::size_t n = 4, k = 2;
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_model(e, n, k, 0.7);
    FmExample ex{trial % 2 == 0 ? SparseVector{n, {0, 1, 2, 3}} : random_input(e, n),
                 rng::normal(e)};
    const double rw = 0.05, rv = 0.1;
    const auto analytic = fm_sgd_gradient(m, ex, rw, rv);
    const auto numeric = oracle::finite_difference(
        [&](const std::vector<double>& t) { return fm_sgd_loss(unflatten(t, n, k), ex, rw, rv); },
        flatten(m));
    REQUIRE(analytic.size() == numeric.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
      CAPTURE(i);
      if (scale < 1e-10) continue;  // parameter not touched by this example
      CHECK(std::abs(analytic[i] - numeric[i]) / scale < 1e-4);
    }
  }
}

TEST_CASE("SGD fits a constant target") {
  std::vector<FmExample> data;
  for (int s = 0; s < 6; ++s)
    for (int g = 0; g < 5; ++g) data.push_back({encode_onehot(s, g, 6, 5), 0.7});
  FmTrainConfig cfg;
  cfg.epochs = 300;
  cfg.seed = 3;
  const auto m = fm_train_sgd(data, cfg);
  CHECK(train_mse(m, data) < 1e-4);
  CHECK(m.predict(data[0].x) == doctest::Approx(0.7).epsilon(1e-2));
}

TEST_CASE("SGD lowers training MSE and is deterministic") {
  const auto data = grid_data(8, 8, 1);
  FmTrainConfig cfg;
  cfg.seed = 21;
  cfg.epochs = 100;
  FmTrace trace;
  const auto m = fm_train_sgd(data, cfg, &trace);
  REQUIRE(trace.loss.size() == 100);
  CHECK(std::isfinite(trace.loss.back()));
  CHECK(train_mse(m, data) <= train_mse(fm_init(16, cfg), data));
  CHECK(fm_serialize(fm_train_sgd(data, cfg)) == fm_serialize(m));
  cfg.seed = 22;
  CHECK(fm_serialize(fm_train_sgd(data, cfg)) != fm_serialize(m));
}

TEST_CASE("SGD divergence names the epoch") {
  const auto data = grid_data(5, 5, 2);
  FmTrainConfig cfg;
  cfg.learning_rate = 1e6;
  cfg.init_stddev = 1.0;
  try {
    fm_train_sgd(data, cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() >= 1);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("a pair never seen together still gets an interaction") {
  const auto data = grid_data(6, 6, 4, true);  // subject i never plays game i
  FmTrainConfig cfg;
  cfg.k = 4;
  cfg.seed = 9;
  cfg.epochs = 300;
  cfg.learning_rate = 0.05;
  const auto m = fm_train_sgd(data, cfg);
  const auto vs = m.v(0), vg = m.v(6);
  double dot = 0;
  for (std::size_t f = 0; f < cfg.k; ++f) dot += vs[f] * vg[f];
  CHECK(std::abs(dot) > 1e-6);
}

TEST_CASE("property: ALS objective never increases across sweeps") {
  rng::Engine e(55);
  for (int i = 0; i < 20; ++i) {
    const int subjects = 3 + static_cast<int>(rng::below(e, 6));
    const int games = 3 + static_cast<int>(rng::below(e, 6));
    auto data = grid_data(subjects, games, e());
    for (auto& ex : data) ex.y += 0.05 * rng::normal(e);
    FmTrainConfig cfg;
    cfg.k = 1 + rng::below(e, 4);
    cfg.reg_w = 0.01 * rng::uniform01(e);
    cfg.reg_v = 0.01 * rng::uniform01(e);
    cfg.init_stddev = 0.1;
    cfg.seed = e();
    FmTrace trace;
    auto start = fm_init(subjects + games, cfg);
    const double before = fm_als_objective(start, data, cfg.reg_w, cfg.reg_v);
    fm_als_sweeps(data, start, cfg, 15, &trace);
    REQUIRE(trace.loss.size() == 15);
    CHECK(trace.loss[0] <= before * (1 + 1e-12));
    for (std::size_t s = 1; s < trace.loss.size(); ++s)
      CHECK(trace.loss[s] <= trace.loss[s - 1] * (1 + 1e-12));
  }
}

TEST_CASE("ALS recovers an exactly linear target") {
  std::vector<FmExample> data;
  for (int s = 0; s < 5; ++s)
    for (int g = 0; g < 4; ++g) data.push_back({encode_onehot(s, g, 5, 4), 0.1 * s - 0.2 * g + 1});
  FmTrainConfig cfg;
  cfg.solver = FmSolver::Als;
  cfg.reg_w = 0;
  cfg.reg_v = 0;
  cfg.init_stddev = 1e-3;
  cfg.epochs = 200;
  cfg.seed = 1;
  const auto m = fm_train(data, cfg);
  CHECK(train_mse(m, data) < 1e-10);
}

TEST_CASE("SGD and ALS reach similar training error") {
  auto data = grid_data(10, 10, 17);
  rng::Engine noise(18);
  for (auto& ex : data) ex.y += 0.1 * rng::normal(noise);
  FmTrainConfig cfg;
  cfg.k = 2;
  cfg.seed = 5;
  cfg.reg_w = cfg.reg_v = 1e-3;
  cfg.epochs = 1500;
  cfg.learning_rate = 0.05;
  cfg.init_stddev = 0.1;
  const double sgd = train_mse(fm_train_sgd(data, cfg), data);
  cfg.epochs = 300;
  const double als = train_mse(fm_train_als(data, cfg), data);
  CAPTURE(sgd);
  CAPTURE(als);
  CHECK(std::abs(sgd - als) <= 0.10 * std::max(sgd, als));
}

TEST_CASE("training config validation") {
  FmTrainConfig cfg;
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.reg_v = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("model files") {
  rng::Engine e(77);
  const auto m = random_model(e, 7, 3);
  const auto dir = std::filesystem::temp_directory_path() / "psychfm_test_fm";
  std::filesystem::remove_all(dir);
  SUBCASE("save and load round trip") {
    fm_save(m, dir / "m.model");
    const auto back = fm_load(dir / "m.model");
    CHECK(back == m);
    for (int i = 0; i < 20; ++i) {
      const auto x = random_input(e, 7);
      CHECK(fm_predict(back, x) == fm_predict(m, x));
    }
    CHECK(io::read_file(dir / "m.model").rfind("psychfm-model v1 fm\n7 3\n", 0) == 0);
  }
  SUBCASE("truncated file") {
    const auto text = fm_serialize(m);
    CHECK_THROWS_AS(fm_deserialize(text.substr(0, text.size() / 2)), FormatError);
  }
  SUBCASE("wrong header") {
    CHECK_THROWS_AS(fm_deserialize("psychfm-model v2 fm\n1 1\n0\n0\n0\n"), FormatError);
    CHECK_THROWS_AS(fm_deserialize("psychfm-model v1 linear\n1\n0\n0\n"), FormatError);
  }
  SUBCASE("k = 0") {
    CHECK_THROWS_AS(fm_deserialize("psychfm-model v1 fm\n1 0\n0\n0\n"), ValidationError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(fm_load(dir / "nope.model"), IoError); }
  std::filesystem::remove_all(dir);
}

TEST_CASE("model constructor rejects bad parameters") {
  CHECK_THROWS_AS(FmModel(0.0, {1.0}, {1.0}, 0), ValidationError);
  CHECK_THROWS_AS(FmModel(NAN, {1.0}, {1.0}, 1), ValidationError);
  CHECK_THROWS_AS(FmModel(0.0, {1.0, 2.0}, {1.0}, 1), ValidationError);
}

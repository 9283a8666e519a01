#include "psychfm/fm.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "psychfm/error.hpp"
#include "psychfm/io.hpp"
#include "psychfm/rng.hpp"

namespace psychfm {

namespace {

constexpr std::string_view kFmHeader = "psychfm-model v1 fm";

void check_input(const FmModel& m, const SparseVector& x) {
  if (x.length != m.n())
    throw ValidationError("input length " + std::to_string(x.length) + " != model n " +
                          std::to_string(m.n()));
  for (auto i : x.active)
    if (i >= m.n()) throw ValidationError("active index out of range");
}

void check_data(std::span<const FmExample> data) {
  if (data.empty()) throw ValidationError("training set is empty");
  const auto n = data.front().x.length;
  for (const auto& ex : data) {
    if (ex.x.length != n) throw ValidationError("training vectors differ in length");
    if (!std::isfinite(ex.y)) throw ValidationError("non-finite training target");
    for (auto i : ex.x.active)
      if (i >= n) throw ValidationError("active index out of range");
  }
}

}  // namespace

FmModel::FmModel(std::size_t n, std::size_t k) : w_(n, 0.0), v_(n * k, 0.0), k_(k) {
  if (n < 1 || k < 1) throw ValidationError("FM needs n >= 1 and k >= 1");
}

FmModel::FmModel(double w0, std::vector<double> w, std::vector<double> v, std::size_t k)
    : w0_(w0), w_(std::move(w)), v_(std::move(v)), k_(k) {
  if (w_.empty() || k_ < 1) throw ValidationError("FM needs n >= 1 and k >= 1");
  if (v_.size() != w_.size() * k_) throw ValidationError("V must be n x k");
  if (!std::isfinite(w0_)) throw ValidationError("non-finite FM parameter");
  for (double x : w_)
    if (!std::isfinite(x)) throw ValidationError("non-finite FM parameter");
  for (double x : v_)
    if (!std::isfinite(x)) throw ValidationError("non-finite FM parameter");
}

double FmModel::predict(const SparseVector& x) const {
  check_input(*this, x);
  double y = w0_;
  for (auto i : x.active) y += w_[i];
  double inter = 0.0;
  for (std::size_t f = 0; f < k_; ++f) {
    double s = 0.0, sq = 0.0;
    for (auto i : x.active) {
      const double vif = v_[i * k_ + f];
      s += vif;
      sq += vif * vif;
    }
    inter += s * s - sq;
  }
  return y + 0.5 * inter;
}

double fm_predict(const FmModel& m, const SparseVector& x) { return m.predict(x); }

void FmTrainConfig::validate() const {
  if (k < 1) throw ValidationError("fm.k must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("fm.lr must be > 0");
  if (epochs < 0) throw ValidationError("fm.epochs must be >= 0");
  if (!(reg_w >= 0.0) || !(reg_v >= 0.0)) throw ValidationError("FM penalties must be >= 0");
  if (!(init_stddev > 0.0)) throw ValidationError("fm.init_std must be > 0");
}

// ---------------------------------------------------------------------------
// SGD

double fm_sgd_loss(const FmModel& m, const FmExample& ex, double reg_w, double reg_v) {
  const double e = m.predict(ex.x) - ex.y;
  double pen = 0.0;
  for (auto i : ex.x.active) {
    pen += reg_w * m.w()[i] * m.w()[i];
    for (double vif : m.v(i)) pen += reg_v * vif * vif;
  }
  return 0.5 * e * e + 0.5 * pen;
}

std::vector<double> fm_sgd_gradient(const FmModel& m, const FmExample& ex, double reg_w,
                                    double reg_v) {
  const auto n = m.n(), k = m.k();
  std::vector<double> g(1 + n + n * k, 0.0);
  const double e = m.predict(ex.x) - ex.y;
  g[0] = e;
  std::vector<double> s(k, 0.0);
  for (auto i : ex.x.active)
    for (std::size_t f = 0; f < k; ++f) s[f] += m.v(i)[f];
  for (auto i : ex.x.active) {
    g[1 + i] = e + reg_w * m.w()[i];
    for (std::size_t f = 0; f < k; ++f) {
      const double vif = m.v(i)[f];
      g[1 + n + i * k + f] = e * (s[f] - vif) + reg_v * vif;
    }
  }
  return g;
}

FmModel fm_init(std::size_t n, const FmTrainConfig& cfg) {
  cfg.validate();
  FmModel m(n, cfg.k);
  rng::Engine e(rng::derive(cfg.seed, "fm.init"));
  for (std::size_t i = 0; i < n; ++i)
    for (auto& vif : m.v(i)) vif = rng::normal(e, 0.0, cfg.init_stddev);
  return m;
}

FmModel fm_train_sgd(std::span<const FmExample> data, const FmTrainConfig& cfg, FmTrace* trace) {
  check_data(data);
  FmModel m = fm_init(data.front().x.length, cfg);
  const auto k = m.k();
  const double lr = cfg.learning_rate;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng::Engine shuffler(rng::derive(cfg.seed, "fm.shuffle"));
  std::vector<double> s(k);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng::shuffle(std::span<std::size_t>(order), shuffler);
    double sse = 0.0;
    for (auto idx : order) {
      const auto& ex = data[idx];
      double y = m.w0();
      for (auto i : ex.x.active) y += m.w()[i];
      std::fill(s.begin(), s.end(), 0.0);
      double sq = 0.0;
      for (auto i : ex.x.active) {
        const auto vi = m.v(i);
        for (std::size_t f = 0; f < k; ++f) {
          s[f] += vi[f];
          sq += vi[f] * vi[f];
        }
      }
      double ss = 0.0;
      for (double sf : s) ss += sf * sf;
      y += 0.5 * (ss - sq);
      const double e = y - ex.y;
      sse += e * e;

      m.w0() -= lr * e;
      for (auto i : ex.x.active) {
        double& wi = m.w()[i];
        wi -= lr * (e + cfg.reg_w * wi);
        auto vi = m.v(i);
        for (std::size_t f = 0; f < k; ++f)
          vi[f] -= lr * (e * (s[f] - vi[f]) + cfg.reg_v * vi[f]);
      }
    }
    const double mse = sse / static_cast<double>(data.size());
    if (!std::isfinite(mse) || !std::isfinite(m.w0())) throw DivergenceError(epoch + 1);
    if (trace) trace->loss.push_back(mse);
  }
  return m;
}

// ---------------------------------------------------------------------------
// ALS (coordinate descent)

double fm_als_objective(const FmModel& m, std::span<const FmExample> data, double reg_w,
                        double reg_v) {
  double j = 0.0;
  for (const auto& ex : data) {
    const double r = m.predict(ex.x) - ex.y;
    j += r * r;
  }
  for (double w : m.w()) j += reg_w * w * w;
  for (double v : m.v_data()) j += reg_v * v * v;
  return j;
}

FmModel fm_als_sweeps(std::span<const FmExample> data, FmModel m, const FmTrainConfig& cfg,
                      int sweeps, FmTrace* trace) {
  check_data(data);
  cfg.validate();
  if (data.front().x.length != m.n()) throw ValidationError("model/data dimension mismatch");
  const auto n = m.n(), k = m.k(), count = data.size();

  std::vector<std::vector<std::size_t>> rows_of(n);
  for (std::size_t r = 0; r < count; ++r)
    for (auto i : data[r].x.active) rows_of[i].push_back(r);

  std::vector<double> resid(count);  // y - y_hat
  std::vector<double> s(count * k);  // per-example sum of active V columns
  auto refresh = [&] {
    for (std::size_t r = 0; r < count; ++r) {
      resid[r] = data[r].y - m.predict(data[r].x);
      for (std::size_t f = 0; f < k; ++f) {
        double acc = 0.0;
        for (auto i : data[r].x.active) acc += m.v(i)[f];
        s[r * k + f] = acc;
      }
    }
  };
  auto objective = [&] {
    double j = 0.0;
    for (double r : resid) j += r * r;
    for (double w : m.w()) j += cfg.reg_w * w * w;
    for (double v : m.v_data()) j += cfg.reg_v * v * v;
    return j;
  };

  refresh();
  double prev = objective();
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    // global bias
    double total = 0.0;
    for (double r : resid) total += r;
    const double dw0 = total / static_cast<double>(count);
    m.w0() += dw0;
    for (auto& r : resid) r -= dw0;

    for (std::size_t i = 0; i < n; ++i) {
      const auto& rows = rows_of[i];
      const double denom = static_cast<double>(rows.size()) + cfg.reg_w;
      double& wi = m.w()[i];
      if (rows.empty()) {
        if (cfg.reg_w > 0.0) wi = 0.0;
        continue;
      }
      double num = wi * static_cast<double>(rows.size());
      for (auto r : rows) num += resid[r];
      const double delta = num / denom - wi;
      wi += delta;
      for (auto r : rows) resid[r] -= delta;
    }

    for (std::size_t f = 0; f < k; ++f) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& rows = rows_of[i];
        double& vif = m.v(i)[f];
        if (rows.empty()) {
          if (cfg.reg_v > 0.0) vif = 0.0;
          continue;
        }
        double num = 0.0, denom = cfg.reg_v;
        for (auto r : rows) {
          const double h = s[r * k + f] - vif;
          num += h * (resid[r] + vif * h);
          denom += h * h;
        }
        if (denom <= 0.0) continue;
        const double delta = num / denom - vif;
        for (auto r : rows) {
          const double h = s[r * k + f] - vif;
          resid[r] -= delta * h;
          s[r * k + f] += delta;
        }
        vif += delta;
      }
    }

    refresh();
    const double cur = objective();
    if (!std::isfinite(cur)) throw DivergenceError(sweep + 1);
    if (cur > prev + 1e-9 * (1.0 + std::abs(prev)))
      throw std::logic_error("ALS objective increased at sweep " + std::to_string(sweep + 1));
    if (trace) trace->loss.push_back(cur);
    prev = cur;
  }
  return m;
}

FmModel fm_train_als(std::span<const FmExample> data, const FmTrainConfig& cfg, FmTrace* trace) {
  check_data(data);
  return fm_als_sweeps(data, fm_init(data.front().x.length, cfg), cfg, cfg.epochs, trace);
}

FmModel fm_train(std::span<const FmExample> data, const FmTrainConfig& cfg, FmTrace* trace) {
  return cfg.solver == FmSolver::Als ? fm_train_als(data, cfg, trace)
                                     : fm_train_sgd(data, cfg, trace);
}

// ---------------------------------------------------------------------------
// Serialization

std::string fm_serialize(const FmModel& m) {
  std::ostringstream out;
  out << kFmHeader << '\n' << m.n() << ' ' << m.k() << '\n' << io::format_real(m.w0()) << '\n';
  for (std::size_t i = 0; i < m.n(); ++i) out << (i ? " " : "") << io::format_real(m.w()[i]);
  out << '\n';
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto vi = m.v(i);
    for (std::size_t f = 0; f < m.k(); ++f) out << (f ? " " : "") << io::format_real(vi[f]);
    out << '\n';
  }
  return out.str();
}

FmModel fm_deserialize(std::string_view text, std::string_view source) {
  io::TokenReader r{std::string(text), std::string(source)};
  if (io::trim(r.next_line()) != kFmHeader)
    throw FormatError(std::string(source) + ": version header mismatch (expected '" +
                      std::string(kFmHeader) + "')");
  const auto n = r.next_int();
  const auto k = r.next_int();
  if (n < 1 || k < 1) throw ValidationError(std::string(source) + ": FM needs n >= 1 and k >= 1");
  const double w0 = r.next_real();
  auto w = r.reals(static_cast<std::size_t>(n));
  auto v = r.reals(static_cast<std::size_t>(n * k));
  if (!r.at_end()) throw FormatError(std::string(source) + ": trailing data");
  return FmModel(w0, std::move(w), std::move(v), static_cast<std::size_t>(k));
}

void fm_save(const FmModel& m, const std::filesystem::path& path) {
  io::write_file(path, fm_serialize(m));
}

FmModel fm_load(const std::filesystem::path& path) {
  return fm_deserialize(io::read_file(path), path.string());
}

}  // namespace psychfm

#include "psychfm/linear.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "psychfm/error.hpp"
#include "psychfm/io.hpp"

namespace psychfm {

namespace {

constexpr std::string_view kLinearHeader = "psychfm-model v1 linear";
constexpr double kJitter = 1e-10;

void check_problem(const Matrix& x, std::span<const double> y) {
  if (x.rows() < 1) throw ValidationError("need at least one row");
  if (y.size() != x.rows()) throw ValidationError("X and y differ in row count");
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (double v : x.row(r))
      if (!std::isfinite(v)) throw ValidationError("non-finite entry in X");
  for (double v : y)
    if (!std::isfinite(v)) throw ValidationError("non-finite entry in y");
}

struct Centered {
  std::vector<double> x_mean;
  double y_mean = 0.0;
  std::vector<std::vector<double>> cols;  // centered columns
  std::vector<double> y;                  // centered targets
};

Centered center(const Matrix& x, std::span<const double> y) {
  const auto m = x.rows(), d = x.cols();
  Centered c;
  c.x_mean.assign(d, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < d; ++j) c.x_mean[j] += x(r, j);
  for (auto& v : c.x_mean) v /= static_cast<double>(m);
  for (double v : y) c.y_mean += v;
  c.y_mean /= static_cast<double>(m);
  c.cols.assign(d, std::vector<double>(m));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < d; ++j) c.cols[j][r] = x(r, j) - c.x_mean[j];
  c.y.resize(m);
  for (std::size_t r = 0; r < m; ++r) c.y[r] = y[r] - c.y_mean;
  return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double intercept_for(const Centered& c, std::span<const double> w) {
  return c.y_mean - dot(c.x_mean, w);
}

}  // namespace

Matrix Matrix::from_rows(std::span<const std::vector<double>> rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw ValidationError("ragged matrix rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

double linear_predict(const LinearModel& m, std::span<const double> x) {
  if (x.size() != m.w.size())
    throw ValidationError("input dimension " + std::to_string(x.size()) + " != model dimension " +
                          std::to_string(m.w.size()));
  return m.b + dot(m.w, x);
}

bool cholesky_solve(Matrix a, std::vector<double>& rhs, double min_pivot) {
  const auto d = a.rows();
  for (std::size_t j = 0; j < d; ++j) {
    double diag = a(j, j);
    for (std::size_t p = 0; p < j; ++p) diag -= a(j, p) * a(j, p);
    if (!(diag > min_pivot) || !(diag > 0.0)) return false;
    const double l = std::sqrt(diag);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < d; ++i) {
      double v = a(i, j);
      for (std::size_t p = 0; p < j; ++p) v -= a(i, p) * a(j, p);
      a(i, j) = v / l;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    double v = rhs[i];
    for (std::size_t p = 0; p < i; ++p) v -= a(i, p) * rhs[p];
    rhs[i] = v / a(i, i);
  }
  for (std::size_t i = d; i-- > 0;) {
    double v = rhs[i];
    for (std::size_t p = i + 1; p < d; ++p) v -= a(p, i) * rhs[p];
    rhs[i] = v / a(i, i);
  }
  return true;
}

RidgeFit ridge_fit(const Matrix& x, std::span<const double> y, const RidgeConfig& cfg) {
  check_problem(x, y);
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda))
    throw ValidationError("ridge lambda must be finite and >= 0");
  const auto d = x.cols();
  const auto c = center(x, y);

  Matrix gram(d, d);
  std::vector<double> rhs(d);
  double max_diag = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = dot(c.cols[i], c.cols[j]);
    rhs[i] = dot(c.cols[i], c.y);
    max_diag = std::max(max_diag, gram(i, i));
  }

  RidgeFit fit;
  auto system = [&](double extra) {
    Matrix a = gram;
    for (std::size_t i = 0; i < d; ++i) a(i, i) += cfg.lambda + extra;
    return a;
  };
  std::vector<double> w = rhs;
  // Near-zero pivots at lambda = 0 mean collinear columns.
  const double min_pivot = cfg.lambda > 0.0 ? 0.0 : 1e-13 * std::max(max_diag, 1.0);
  if (!cholesky_solve(system(0.0), w, min_pivot)) {
    fit.jitter = kJitter;
    w = rhs;
    if (!cholesky_solve(system(fit.jitter), w))
      throw ValidationError("ridge system is not positive definite");
  }

  const Matrix a = system(fit.jitter);
  auto residual = [&](const std::vector<double>& sol) {
    std::vector<double> res(d);
    for (std::size_t i = 0; i < d; ++i) res[i] = rhs[i] - dot(a.row(i), sol);
    return res;
  };
  // One step of iterative refinement.
  auto res = residual(w);
  auto corr = res;
  if (cholesky_solve(a, corr)) {
    for (std::size_t i = 0; i < d; ++i) w[i] += corr[i];
    res = residual(w);
  }
  fit.residual = std::sqrt(dot(res, res)) / std::max(1.0, std::sqrt(dot(rhs, rhs)));
  fit.model.b = intercept_for(c, w);
  fit.model.w = std::move(w);
  return fit;
}

LassoFit lasso_fit(const Matrix& x, std::span<const double> y, const LassoConfig& cfg) {
  check_problem(x, y);
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda))
    throw ValidationError("lasso lambda must be finite and >= 0");
  if (!(cfg.tol > 0.0)) throw ValidationError("lasso tol must be > 0");
  if (cfg.max_iter < 1) throw ValidationError("lasso max_iter must be >= 1");
  const auto d = x.cols();
  const auto c = center(x, y);
  std::vector<double> z(d);
  for (std::size_t j = 0; j < d; ++j) z[j] = dot(c.cols[j], c.cols[j]);

  std::vector<double> w(d, 0.0);
  std::vector<double> r = c.y;
  const double threshold = 0.5 * cfg.lambda;
  auto objective = [&] {
    double o = dot(r, r);
    for (double v : w) o += cfg.lambda * std::abs(v);
    return o;
  };

  LassoFit fit;
  double prev = objective();
  for (int sweep = 0; sweep < cfg.max_iter; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (z[j] <= 0.0) {
        w[j] = 0.0;
        continue;
      }
      const auto& col = c.cols[j];
      const double rho = dot(col, r) + z[j] * w[j];
      double next = 0.0;
      if (rho > threshold)
        next = (rho - threshold) / z[j];
      else if (rho < -threshold)
        next = (rho + threshold) / z[j];
      const double delta = next - w[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= delta * col[i];
        w[j] = next;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    const double cur = objective();
    if (cur > prev + 1e-10 * (1.0 + std::abs(prev)))
      throw std::logic_error("lasso objective increased at sweep " + std::to_string(sweep + 1));
    fit.objective.push_back(cur);
    prev = cur;
    fit.sweeps = sweep + 1;
    if (max_change < cfg.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.model.b = intercept_for(c, w);
  fit.model.w = std::move(w);
  return fit;
}

std::string linear_serialize(const LinearModel& m) {
  std::ostringstream out;
  out << kLinearHeader << '\n' << m.w.size() << '\n' << io::format_real(m.b) << '\n';
  for (std::size_t j = 0; j < m.w.size(); ++j) out << (j ? " " : "") << io::format_real(m.w[j]);
  out << '\n';
  return out.str();
}

LinearModel linear_deserialize(std::string_view text, std::string_view source) {
  io::TokenReader r{std::string(text), std::string(source)};
  if (io::trim(r.next_line()) != kLinearHeader)
    throw FormatError(std::string(source) + ": version header mismatch (expected '" +
                      std::string(kLinearHeader) + "')");
  const auto d = r.next_int();
  if (d < 0) throw FormatError(std::string(source) + ": negative dimension");
  LinearModel m;
  m.b = r.next_real();
  m.w = r.reals(static_cast<std::size_t>(d));
  if (!r.at_end()) throw FormatError(std::string(source) + ": trailing data");
  return m;
}

void linear_save(const LinearModel& m, const std::filesystem::path& path) {
  io::write_file(path, linear_serialize(m));
}

LinearModel linear_load(const std::filesystem::path& path) {
  return linear_deserialize(io::read_file(path), path.string());
}

}  // namespace psychfm

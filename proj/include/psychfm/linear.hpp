#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psychfm {

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  static Matrix from_rows(std::span<const std::vector<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// y = b + w . x
struct LinearModel {
  double b = 0.0;
  std::vector<double> w;

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

double linear_predict(const LinearModel& m, std::span<const double> x);

struct RidgeConfig {
  double lambda = 1.0;
};

struct RidgeFit {
  LinearModel model;
  /// Diagonal jitter added because the unregularized system was singular; 0 otherwise.
  double jitter = 0.0;
  /// |(Xc'Xc + lambda I) w - Xc'yc| / max(1, |Xc'yc|) at the returned solution.
  double residual = 0.0;
};

/// Minimizes sum (y - b - Xw)^2 + lambda |w|^2 with b unpenalized, by a
/// Cholesky solve of the centered normal equations.
RidgeFit ridge_fit(const Matrix& x, std::span<const double> y, const RidgeConfig& cfg);

struct LassoConfig {
  double lambda = 1.0;
  double tol = 1e-7;
  int max_iter = 5000;
};

struct LassoFit {
  LinearModel model;
  bool converged = false;
  int sweeps = 0;
  /// Objective sum (y - yhat)^2 + lambda |w|_1 after each sweep.
  std::vector<double> objective;
};

/// Cyclic coordinate descent with soft-thresholding on
///   sum (y - b - Xw)^2 + lambda |w|_1, b unpenalized.
LassoFit lasso_fit(const Matrix& x, std::span<const double> y, const LassoConfig& cfg);

/// Solves the symmetric positive-definite system a z = rhs in place of rhs.
/// Returns false when a pivot is not positive (or below min_pivot).
bool cholesky_solve(Matrix a, std::vector<double>& rhs, double min_pivot = 0.0);

std::string linear_serialize(const LinearModel& m);
LinearModel linear_deserialize(std::string_view text, std::string_view source = "linear model");
void linear_save(const LinearModel& m, const std::filesystem::path& path);
LinearModel linear_load(const std::filesystem::path& path);

}  // namespace psychfm

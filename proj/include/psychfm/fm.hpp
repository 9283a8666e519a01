#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psychfm/features.hpp"

namespace psychfm {

/// Degree-2 factorization machine over binary sparse inputs:
///   y(x) = w0 + sum_i w_i x_i + sum_{i<j} <V_i, V_j> x_i x_j
class FmModel {
 public:
  FmModel() = default;
  FmModel(std::size_t n, std::size_t k);
  FmModel(double w0, std::vector<double> w, std::vector<double> v, std::size_t k);

  std::size_t n() const { return w_.size(); }
  std::size_t k() const { return k_; }

  double& w0() { return w0_; }
  double w0() const { return w0_; }
  std::span<double> w() { return w_; }
  std::span<const double> w() const { return w_; }
  /// Latent row of feature i (length k).
  std::span<double> v(std::size_t i) { return {v_.data() + i * k_, k_}; }
  std::span<const double> v(std::size_t i) const { return {v_.data() + i * k_, k_}; }
  std::span<const double> v_data() const { return v_; }

  /// Linear-time factored evaluation.
  double predict(const SparseVector& x) const;

  friend bool operator==(const FmModel&, const FmModel&) = default;

 private:
  double w0_ = 0.0;
  std::vector<double> w_;
  std::vector<double> v_;  // n x k, row-major
  std::size_t k_ = 0;
};

double fm_predict(const FmModel& m, const SparseVector& x);

enum class FmSolver { Sgd, Als };

struct FmTrainConfig {
  std::size_t k = 8;
  double learning_rate = 0.01;
  int epochs = 200;
  double reg_w = 1e-3;
  double reg_v = 1e-3;
  double init_stddev = 0.01;
  std::uint64_t seed = 0;
  FmSolver solver = FmSolver::Sgd;

  void validate() const;
};

struct FmExample {
  SparseVector x;
  double y;
};

/// Per-epoch diagnostics. For SGD `loss` is the training MSE measured during
/// the pass; for ALS it is the regularized objective after the sweep.
struct FmTrace {
  std::vector<double> loss;
};

/// Gradient of the per-example SGD loss
///   1/2 (y(x) - y)^2 + reg_w/2 sum_{i active} w_i^2 + reg_v/2 sum_{i active} |V_i|^2
/// laid out as [w0, w_0..w_{n-1}, V row-major].
std::vector<double> fm_sgd_gradient(const FmModel& m, const FmExample& ex, double reg_w,
                                    double reg_v);
double fm_sgd_loss(const FmModel& m, const FmExample& ex, double reg_w, double reg_v);

/// Initial model: w0 = 0, w = 0, V ~ Normal(0, init_stddev^2) from cfg.seed.
FmModel fm_init(std::size_t n, const FmTrainConfig& cfg);

FmModel fm_train_sgd(std::span<const FmExample> data, const FmTrainConfig& cfg,
                     FmTrace* trace = nullptr);

/// Coordinate-wise exact minimization of
///   sum_n (y(x_n) - y_n)^2 + reg_w |w|^2 + reg_v |V|^2   (w0 unpenalized).
FmModel fm_train_als(std::span<const FmExample> data, const FmTrainConfig& cfg,
                     FmTrace* trace = nullptr);
/// Runs `sweeps` ALS sweeps starting from `start`.
FmModel fm_als_sweeps(std::span<const FmExample> data, FmModel start, const FmTrainConfig& cfg,
                      int sweeps, FmTrace* trace = nullptr);
double fm_als_objective(const FmModel& m, std::span<const FmExample> data, double reg_w,
                        double reg_v);

FmModel fm_train(std::span<const FmExample> data, const FmTrainConfig& cfg,
                 FmTrace* trace = nullptr);

std::string fm_serialize(const FmModel& m);
FmModel fm_deserialize(std::string_view text, std::string_view source = "fm model");
void fm_save(const FmModel& m, const std::filesystem::path& path);
FmModel fm_load(const std::filesystem::path& path);

}  // namespace psychfm

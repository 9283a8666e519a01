#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace psychfm {

double mse(std::span<const double> preds, std::span<const double> targets);
double mse_x100(std::span<const double> preds, std::span<const double> targets);

/// |test - val| MSE*100 above this marks a model unstable.
inline constexpr double kUnstableGap = 5.0;

enum class InputType { A, B, Ensemble };

struct BlendShare {
  std::string member;  // report label of the member, e.g. "FM (A)"
  double coefficient = 0.0;
};

struct ReportRow {
  std::string model;  // "FM (A)", "Ridge (B)", "FM (A) + Ridge (B)"
  InputType input = InputType::A;
  double test_mse_x100 = 0.0;
  double val_mse_x100 = 0.0;
  std::string hyperparameters;
  std::uint64_t seed = 0;
  std::vector<BlendShare> coefficients;  // blend rows only
  std::optional<double> intercept;       // blend rows fit with an intercept

  double gap() const;
  bool unstable() const { return gap() > kUnstableGap; }
  /// Typical per-prediction error, sqrt(test MSE).
  double test_rmse() const;
};

struct EvalReport {
  std::uint64_t seed = 0;
  std::vector<ReportRow> rows;
  std::optional<double> baseline_test_mse_x100;  // predict-the-training-mean
};

/// Predictions of one model on the validation and test folds.
struct ModelEvaluation {
  std::string model;
  InputType input = InputType::A;
  std::vector<double> val_preds, val_targets;
  std::vector<double> test_preds, test_targets;
  std::string hyperparameters;
  std::vector<BlendShare> coefficients;
  std::optional<double> intercept;
};

/// Per-model test and validation MSE*100 with their gap. When `clip` is set
/// predictions are clamped to [0, 1] before scoring.
EvalReport stability_report(std::span<const ModelEvaluation> models, std::uint64_t seed,
                            bool clip = false);

enum class ReportFormat { Markdown, Csv };

/// Deterministic text rendering of a report.
std::string emit_report(const EvalReport& report, ReportFormat format);
void write_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace psychfm

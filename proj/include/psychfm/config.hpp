#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "psychfm/cpc_data.hpp"
#include "psychfm/ensemble.hpp"

namespace psychfm {

/// Flat key = value run settings. Unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t fm_k = 8;
  double fm_lr = 0.01;
  int fm_epochs = 200;
  double fm_reg_w = 1e-3;
  double fm_reg_v = 1e-3;
  double fm_init_std = 0.01;
  FmSolver fm_solver = FmSolver::Sgd;
  std::optional<double> ridge_lambda;  // unset: "auto", chosen on validation
  std::optional<double> lasso_lambda;
  double lasso_tol = 1e-7;
  int lasso_max_iter = 5000;
  bool lasso_standardize = true;
  double blend_lambda = 1e-3;
  bool blend_intercept = false;
  int split_test_per_subject = 5;
  double split_val_frac = 0.10;
  bool clip_predictions = false;
  int synth_subjects = 40;
  int synth_games = 40;
  int synth_trials = 25;

  /// Applies one setting; throws ValidationError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  /// Reads "key = value" lines; '#' starts a comment.
  void merge_text(std::string_view text, std::string_view source = "config");
  void merge_file(const std::filesystem::path& path);

  /// Every key with its resolved value, one "key = value" line each.
  std::string resolved() const;

  SplitConfig split() const;
  /// Component settings with seeds derived from the master seed.
  PipelineConfig pipeline() const;
  std::uint64_t synth_seed() const;
  std::uint64_t split_seed() const;
};

}  // namespace psychfm

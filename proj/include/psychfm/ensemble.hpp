#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psychfm/cpc_data.hpp"
#include "psychfm/features.hpp"
#include "psychfm/fm.hpp"
#include "psychfm/linear.hpp"

namespace psychfm {

/// y = intercept + sum_i c_i * member_i
struct BlendModel {
  std::vector<std::string> member_ids;
  std::vector<double> coefficients;
  double intercept = 0.0;
  bool has_intercept = false;
};

/// Ridge regression of y_val on the members' validation predictions (one
/// column per member). Without an intercept this solves
/// (P'P + lambda I) c = P'y directly.
BlendModel blend_fit(const Matrix& val_preds, std::span<const double> y_val, double lambda,
                     bool intercept = false, std::vector<std::string> member_ids = {});
double blend_predict(const BlendModel& bm, std::span<const double> member_preds);

std::string blend_serialize(const BlendModel& bm);
BlendModel blend_deserialize(std::string_view text, std::string_view source = "blend model");

// ---------------------------------------------------------------------------
// Pipeline

enum class ModelKind { Fm, Ridge, Lasso };
enum class InputKind { OneHot, Psych };

struct MemberSpec {
  ModelKind model = ModelKind::Fm;
  InputKind input = InputKind::OneHot;

  /// "fm:onehot", "ridge:psych", ...
  std::string id() const;
  /// Row label in reports: "FM (A)", "Ridge (B)", ...
  std::string label() const;
  friend bool operator==(const MemberSpec&, const MemberSpec&) = default;
};

MemberSpec parse_member(std::string_view text);
std::vector<MemberSpec> parse_members(std::string_view list);
/// "FM (A) + Ridge (B)"
std::string blend_label(std::span<const MemberSpec> members);

/// Log-spaced lambda grid 1e-4 ... 1e3 searched on the validation fold.
std::vector<double> lambda_grid();

struct PipelineConfig {
  FmTrainConfig fm;
  std::optional<double> ridge_lambda;  // nullopt: select on validation
  std::optional<double> lasso_lambda;
  double lasso_tol = 1e-7;
  int lasso_max_iter = 5000;
  bool lasso_standardize = true;
  double blend_lambda = 1e-3;
  bool blend_intercept = false;
  bool clip_predictions = false;
  std::uint64_t seed = 0;
};

/// Problems, targets and both input representations for every rate point.
class Dataset {
 public:
  Dataset(std::vector<ChoiceProblem> problems, std::vector<RatePoint> points);

  std::span<const RatePoint> points() const { return points_; }
  std::span<const ChoiceProblem> problems() const { return problems_; }
  const IdentityIndex& index() const { return index_; }

  double target(const RateKey& k) const;
  SparseVector onehot(const RateKey& k) const { return index_.encode(k); }
  const PsychFeatureVector& psych(int game_id) const;
  std::vector<double> dense(const RateKey& k, InputKind input) const;
  std::vector<FeatureRow> feature_rows() const;
  /// Replaces the computed psychological features with stored ones (one
  /// vector per game; rows for the same game must agree).
  void use_features(std::span<const FeatureRow> rows);

 private:
  std::vector<ChoiceProblem> problems_;
  std::vector<RatePoint> points_;
  std::map<RateKey, double> targets_;
  std::map<int, PsychFeatureVector> psych_;
  IdentityIndex index_;
};

/// A fitted layer-1 model together with whatever it needs to map a key to an input.
struct TrainedMember {
  MemberSpec spec;
  std::optional<FmModel> fm;
  std::optional<LinearModel> linear;
  std::optional<Standardizer> scaler;
  double lambda = 0.0;
  std::string hyperparameters;

  double predict(const Dataset& data, const RateKey& k) const;
  /// Writes <stem>.model (and <stem>.scaler when standardized).
  void save(const std::filesystem::path& stem) const;
  static TrainedMember load(const MemberSpec& spec, const std::filesystem::path& stem);
};

/// Fits on the train fold; lambdas left unset in cfg are chosen by validation MSE.
TrainedMember train_member(const Dataset& data, const SplitAssignment& split,
                           const MemberSpec& spec, const PipelineConfig& cfg);

struct FoldPredictions {
  std::vector<double> train, val, test;  // aligned with the split's key lists
};

FoldPredictions predict_folds(const TrainedMember& m, const Dataset& data,
                              const SplitAssignment& split);

struct PipelineResult {
  std::vector<TrainedMember> members;
  std::vector<FoldPredictions> member_preds;
  BlendModel blend;
  std::vector<double> blend_val;
  std::vector<double> blend_test;
  std::vector<double> y_train, y_val, y_test;
};

/// Members fit on train, blend fit on their validation predictions, test
/// predictions combined by the blend. Artifacts go to run_dir when given.
PipelineResult run_pipeline(const Dataset& data, const SplitAssignment& split,
                            std::span<const MemberSpec> members, const PipelineConfig& cfg,
                            const std::optional<std::filesystem::path>& run_dir = std::nullopt);

/// Blend stage alone, over already-computed member predictions.
void fit_blend_stage(PipelineResult& r, const PipelineConfig& cfg);

std::vector<double> fold_targets(const Dataset& data, std::span<const RateKey> keys);

/// CSV with SubjID, GameID, one column per member id, then extra columns.
std::string format_prediction_csv(std::span<const RateKey> keys,
                                  std::span<const std::string> columns,
                                  std::span<const std::vector<double>> values);

void write_pipeline_artifacts(const PipelineResult& r, const SplitAssignment& split,
                              const std::filesystem::path& run_dir);

}  // namespace psychfm

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psychfm/cpc_data.hpp"

namespace psychfm {

/// Binary sparse input: value 1 at each active index, 0 elsewhere.
struct SparseVector {
  std::size_t length = 0;
  std::vector<std::uint32_t> active;  // strictly ascending, each < length
};

/// Identity one-hot: subjects occupy [0, n_subjects), games follow.
SparseVector encode_onehot(int subj_idx, int game_idx, int n_subjects, int n_games);

/// Maps raw subject/game ids onto dense 0-based indices (ascending id order).
class IdentityIndex {
 public:
  IdentityIndex() = default;
  explicit IdentityIndex(std::span<const RatePoint> points);

  int n_subjects() const { return static_cast<int>(subjects_.size()); }
  int n_games() const { return static_cast<int>(games_.size()); }
  std::size_t length() const { return subjects_.size() + games_.size(); }
  SparseVector encode(const RateKey& k) const;

 private:
  std::map<int, int> subjects_;
  std::map<int, int> games_;
};

struct NaiveFeatures {
  double d_ev = 0, d_sd = 0, d_min = 0, d_max = 0;
};

/// statistic(B) - statistic(A) for mean, stddev, min and max.
NaiveFeatures naive_features(const OutcomeDistribution& a, const OutcomeDistribution& b);

inline constexpr std::size_t kObjectiveCount = 11;
inline constexpr std::size_t kNaiveCount = 4;
inline constexpr std::size_t kPsychCount = 12;
inline constexpr std::size_t kFeatureCount = kObjectiveCount + kNaiveCount + kPsychCount;

/// Column names in storage order.
const std::array<std::string_view, kFeatureCount>& feature_names();

struct PsychFeatureVector {
  // objective
  double ha = 0, p_ha = 0, la = 0, hb = 0, p_hb = 0, lot_val = 0, lot_num = 0;
  double lot_shape_code = 0, corr = 0, amb = 0, feedback_code = 0;
  // naive
  double d_ev = 0, d_sd = 0, d_min = 0, d_max = 0;
  // psychological
  double d_ev_o = 0, d_ev_fb = 0, p_better_o = 0, p_better_fb = 0;
  double d_uni_ev = 0, p_better_u = 0;
  double d_sign_ev = 0, p_better_s_o = 0, p_better_s_fb = 0;
  double sign_max = 0, ratio_min = 0, dom = 0;

  std::array<double, kFeatureCount> values() const;
  static PsychFeatureVector from_values(std::span<const double> v);
};

/// Gamble B as seen before feedback. For ambiguous problems its hidden
/// probability is read pessimistically (pHb taken as 0), leaving only the
/// lottery branch.
OutcomeDistribution objective_view_b(const ChoiceProblem& p);

/// +1 when B first-order stochastically dominates A, -1 for the converse,
/// 0 otherwise (weak dominance with one strict CDF inequality).
int dominance(const OutcomeDistribution& a, const OutcomeDistribution& b);

/// 0 when both minima are 0, otherwise sign(mA)sign(mB) min(|mA|,|mB|)/max(|mA|,|mB|).
double ratio_min(double min_a, double min_b);

PsychFeatureVector psych_features(const ChoiceProblem& p, const OutcomeDistribution& a,
                                  const OutcomeDistribution& b);
PsychFeatureVector psych_features(const ChoiceProblem& p);

/// Per-column affine map learned on the training fold.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> scale);

  static Standardizer fit(std::span<const std::vector<double>> rows);
  std::vector<double> apply(std::span<const double> row) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

  std::string serialize() const;
  static Standardizer deserialize(std::string_view text, std::string_view source = "standardizer");

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

Standardizer fit_standardizer(std::span<const PsychFeatureVector> rows);
std::vector<double> apply_standardizer(const Standardizer& s, const PsychFeatureVector& row);

struct FeatureRow {
  RateKey key;
  PsychFeatureVector features;
};

std::string format_feature_csv(std::span<const FeatureRow> rows);
std::vector<FeatureRow> parse_feature_csv(std::string_view text);

}  // namespace psychfm

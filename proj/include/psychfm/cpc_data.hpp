#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psychfm {

enum class LotShape { None, Symm, RSkew, LSkew };

/// Payoff correlation between the two gambles.
enum class Corr : int { Negative = -1, None = 0, Positive = 1 };

std::string_view to_string(LotShape s);
/// Accepts the raw-file spellings "Symm", "R-skew", "L-skew", "-".
LotShape parse_lot_shape(std::string_view s);

/// One A-vs-B problem. Gamble A pays `ha` with probability `p_ha`, else `la`.
/// Gamble B pays `hb` with probability `p_hb`, else a lottery with
/// `lot_num` outcomes, mean `lot_val`, and shape `lot_shape`. When
/// lot_num == 1 the lottery is the point mass Lb, so `lot_val` doubles as Lb.
struct ChoiceProblem {
  int game_id = 0;
  double ha = 0.0;
  double p_ha = 1.0;
  double la = 0.0;
  double hb = 0.0;
  double p_hb = 1.0;
  double lot_val = 0.0;
  int lot_num = 1;
  LotShape lot_shape = LotShape::None;
  Corr corr = Corr::None;
  bool amb = false;

  friend bool operator==(const ChoiceProblem&, const ChoiceProblem&) = default;
};

/// Throws ValidationError when a type invariant does not hold.
void validate(const ChoiceProblem& p);

struct TrialRecord {
  int subj_id = 0;
  int game_id = 0;
  int block = 1;
  int trial = 1;
  bool chose_b = false;
  bool feedback = false;
};

struct Outcome {
  double value;
  double prob;
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// Finite payoff distribution. Values are strictly ascending, every
/// probability is positive, and the total mass is 1.
class OutcomeDistribution {
 public:
  /// Sorts, merges equal values, drops zero-mass entries and renormalizes
  /// away rounding. Throws ValidationError on negative or non-finite input
  /// or when the mass is not 1 within 1e-9.
  static OutcomeDistribution from(std::vector<Outcome> outcomes);

  std::span<const Outcome> outcomes() const { return outcomes_; }
  std::size_t size() const { return outcomes_.size(); }
  const Outcome& operator[](std::size_t i) const { return outcomes_[i]; }

  double mean() const;
  double stddev() const;
  double min() const { return outcomes_.front().value; }
  double max() const { return outcomes_.back().value; }

  /// Same support, probability 1/size on each value.
  OutcomeDistribution uniformized() const;
  /// Every value v replaced by sign(v), with sign(0) = 0.
  OutcomeDistribution sign_mapped() const;
  /// Every value shifted by c.
  OutcomeDistribution shifted(double c) const;

  friend bool operator==(const OutcomeDistribution&, const OutcomeDistribution&) = default;

 private:
  std::vector<Outcome> outcomes_;
};

OutcomeDistribution expand_gamble_a(const ChoiceProblem& p);
OutcomeDistribution expand_gamble_b(const ChoiceProblem& p);
/// The lottery branch of B alone (mass 1, mean lot_val).
OutcomeDistribution expand_lottery(const ChoiceProblem& p);

struct JointOutcome {
  double a;
  double b;
  double prob;
};

/// Coupling of two marginals: product measure for Corr::None, comonotone
/// quantile pairing for Positive, antithetic pairing for Negative.
std::vector<JointOutcome> joint_distribution(const OutcomeDistribution& a,
                                             const OutcomeDistribution& b, Corr corr);

/// P(b > a) under the coupling.
double prob_b_better(const OutcomeDistribution& a, const OutcomeDistribution& b, Corr corr);

struct RateKey {
  int subj_id = 0;
  int game_id = 0;
  friend auto operator<=>(const RateKey&, const RateKey&) = default;
};

struct RatePoint {
  int subj_id = 0;
  int game_id = 0;
  double b_rate = 0.0;
  int n_trials = 0;
  RateKey key() const { return {subj_id, game_id}; }
};

struct RawData {
  std::vector<ChoiceProblem> problems;  // ascending game_id
  std::vector<TrialRecord> trials;
};

/// Reads the trial-level CSV. Required columns: SubjID, GameID, Ha, pHa, La,
/// Hb, pHb, Lb, LotNum, LotShape, Corr, Amb, Block, Trial, B, Feedback.
/// Extra columns are ignored.
RawData parse_raw_csv(const std::filesystem::path& path);
RawData parse_raw_csv_text(std::string_view text);
std::string format_raw_csv(const RawData& data);

/// One point per (subject, game), ordered by key.
std::vector<RatePoint> aggregate_b_rates(std::span<const TrialRecord> trials);

std::string format_rates_csv(std::span<const RatePoint> points);
std::vector<RatePoint> parse_rates_csv(std::string_view text);

std::string format_problems_csv(std::span<const ChoiceProblem> problems);
std::vector<ChoiceProblem> parse_problems_csv(std::string_view text);

enum class Fold { Train, Val, Test };
std::string_view to_string(Fold f);

struct SplitAssignment {
  std::vector<RateKey> train;  // each list ascending
  std::vector<RateKey> val;
  std::vector<RateKey> test;
  std::uint64_t seed = 0;

  Fold fold_of(const RateKey& k) const;
};

struct SplitConfig {
  int test_per_subject = 5;
  double val_frac = 0.10;
};

/// Per subject, test games are drawn without replacement from a stream keyed
/// on (seed, subject); validation is then drawn from the pooled remainder.
SplitAssignment split_dataset(std::span<const RatePoint> points, std::uint64_t seed,
                              const SplitConfig& cfg = {});

std::string format_split_csv(const SplitAssignment& s);
SplitAssignment parse_split_csv(std::string_view text);

/// Synthetic raw data with a planted logistic choice model:
/// P(B) = logistic(slope_s * (EV_B - EV_A) + bias_s + offset_g), with a
/// log-normal per-subject slope.
/// Each subject faces min(30, n_games) distinct games.
RawData synth_generate(int n_subjects, int n_games, int trials_per_cell, std::uint64_t seed);

/// Planted per-subject biases, exposed for tests.
std::vector<double> synth_subject_biases(int n_subjects, std::uint64_t seed);

}  // namespace psychfm

#include "psychfm/cpc_data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "psychfm/error.hpp"
#include "psychfm/io.hpp"
#include "psychfm/rng.hpp"

namespace psychfm {

namespace {

constexpr int kMaxLotNum = 50;

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

double binomial_half_pmf(int k, int j) {
  // C(k, j) / 2^k, exact for the small k used by lotteries.
  double c = 1.0;
  for (int i = 1; i <= j; ++i) c = c * static_cast<double>(k - j + i) / i;
  return std::ldexp(c, -k);
}

Corr corr_from_int(long long v, std::size_t line) {
  switch (v) {
    case -1: return Corr::Negative;
    case 0: return Corr::None;
    case 1: return Corr::Positive;
    default: throw RowError(line, "Corr must be -1, 0 or 1");
  }
}

bool flag_from_int(long long v, std::size_t line, const char* column) {
  if (v != 0 && v != 1) throw RowError(line, std::string(column) + " must be 0 or 1");
  return v == 1;
}

// Cumulative masses with the final entry pinned to exactly 1.
std::vector<double> cumulative(std::span<const Outcome> o) {
  std::vector<double> c(o.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) c[i] = (acc += o[i].prob);
  if (!c.empty()) c.back() = 1.0;
  return c;
}

}  // namespace

std::string_view to_string(LotShape s) {
  switch (s) {
    case LotShape::Symm: return "Symm";
    case LotShape::RSkew: return "R-skew";
    case LotShape::LSkew: return "L-skew";
    case LotShape::None: break;
  }
  return "-";
}

LotShape parse_lot_shape(std::string_view s) {
  s = io::trim(s);
  if (s == "Symm") return LotShape::Symm;
  if (s == "R-skew") return LotShape::RSkew;
  if (s == "L-skew") return LotShape::LSkew;
  if (s == "-") return LotShape::None;
  throw ValidationError("unknown LotShape '" + std::string(s) + "'");
}

void validate(const ChoiceProblem& p) {
  const auto where = " (game " + std::to_string(p.game_id) + ")";
  if (!is_probability(p.p_ha)) throw ValidationError("pHa outside [0,1]" + where);
  if (!is_probability(p.p_hb)) throw ValidationError("pHb outside [0,1]" + where);
  for (double v : {p.ha, p.la, p.hb, p.lot_val})
    if (!std::isfinite(v)) throw ValidationError("non-finite payoff" + where);
  if (p.lot_num < 1) throw ValidationError("LotNum must be >= 1" + where);
  if (p.lot_num > kMaxLotNum) throw ValidationError("LotNum too large" + where);
  if ((p.lot_num == 1) != (p.lot_shape == LotShape::None))
    throw ValidationError("LotNum = 1 requires LotShape '-' and vice versa" + where);
  if (p.lot_shape == LotShape::Symm && p.lot_num % 2 == 0)
    throw ValidationError("symmetric lottery needs an odd LotNum" + where);
}

// ---------------------------------------------------------------------------
// OutcomeDistribution

OutcomeDistribution OutcomeDistribution::from(std::vector<Outcome> outcomes) {
  for (const auto& o : outcomes) {
    if (!std::isfinite(o.value) || !std::isfinite(o.prob) || o.prob < 0.0)
      throw ValidationError("invalid outcome (non-finite value or negative probability)");
  }
  std::sort(outcomes.begin(), outcomes.end(),
            [](const Outcome& x, const Outcome& y) { return x.value < y.value; });
  OutcomeDistribution d;
  for (const auto& o : outcomes) {
    if (o.prob == 0.0) continue;
    if (!d.outcomes_.empty() && d.outcomes_.back().value == o.value)
      d.outcomes_.back().prob += o.prob;
    else
      d.outcomes_.push_back(o);
  }
  if (d.outcomes_.empty()) throw ValidationError("distribution has no mass");
  double total = 0.0;
  for (const auto& o : d.outcomes_) total += o.prob;
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("probabilities do not sum to 1");
  for (auto& o : d.outcomes_) o.prob /= total;
  return d;
}

double OutcomeDistribution::mean() const {
  double m = 0.0;
  for (const auto& o : outcomes_) m += o.value * o.prob;
  return m;
}

double OutcomeDistribution::stddev() const {
  const double m = mean();
  double v = 0.0;
  for (const auto& o : outcomes_) v += (o.value - m) * (o.value - m) * o.prob;
  return std::sqrt(v);
}

OutcomeDistribution OutcomeDistribution::uniformized() const {
  std::vector<Outcome> u;
  const double p = 1.0 / static_cast<double>(outcomes_.size());
  for (const auto& o : outcomes_) u.push_back({o.value, p});
  return from(std::move(u));
}

OutcomeDistribution OutcomeDistribution::sign_mapped() const {
  std::vector<Outcome> s;
  for (const auto& o : outcomes_) s.push_back({static_cast<double>((o.value > 0) - (o.value < 0)), o.prob});
  return from(std::move(s));
}

OutcomeDistribution OutcomeDistribution::shifted(double c) const {
  std::vector<Outcome> s;
  for (const auto& o : outcomes_) s.push_back({o.value + c, o.prob});
  return from(std::move(s));
}

// ---------------------------------------------------------------------------
// Gamble expansion

OutcomeDistribution expand_gamble_a(const ChoiceProblem& p) {
  validate(p);
  return OutcomeDistribution::from({{p.ha, p.p_ha}, {p.la, 1.0 - p.p_ha}});
}

namespace {

std::vector<Outcome> lottery_outcomes(const ChoiceProblem& p) {
  const int n = p.lot_num;
  std::vector<Outcome> out;
  switch (p.lot_shape) {
    case LotShape::None:
      out.push_back({p.lot_val, 1.0});
      break;
    case LotShape::Symm: {
      const int k = n - 1;
      for (int j = 0; j <= k; ++j)
        out.push_back({p.lot_val + (j - k / 2), binomial_half_pmf(k, j)});
      break;
    }
    case LotShape::RSkew:
    case LotShape::LSkew: {
      const double dir = p.lot_shape == LotShape::RSkew ? 1.0 : -1.0;
      for (int i = 1; i <= n; ++i) {
        const double prob = std::ldexp(1.0, i == n ? -(i - 1) : -i);
        out.push_back({p.lot_val + dir * (std::ldexp(1.0, i) - (n + 1)), prob});
      }
      break;
    }
  }
  return out;
}

}  // namespace

OutcomeDistribution expand_lottery(const ChoiceProblem& p) {
  validate(p);
  return OutcomeDistribution::from(lottery_outcomes(p));
}

OutcomeDistribution expand_gamble_b(const ChoiceProblem& p) {
  validate(p);
  std::vector<Outcome> out{{p.hb, p.p_hb}};
  const double rest = 1.0 - p.p_hb;
  for (auto o : lottery_outcomes(p)) out.push_back({o.value, o.prob * rest});
  return OutcomeDistribution::from(std::move(out));
}

// ---------------------------------------------------------------------------
// Coupling

std::vector<JointOutcome> joint_distribution(const OutcomeDistribution& a,
                                             const OutcomeDistribution& b, Corr corr) {
  std::vector<JointOutcome> joint;
  if (corr == Corr::None) {
    joint.reserve(a.size() * b.size());
    for (const auto& oa : a.outcomes())
      for (const auto& ob : b.outcomes()) joint.push_back({oa.value, ob.value, oa.prob * ob.prob});
    return joint;
  }
  std::vector<Outcome> bo(b.outcomes().begin(), b.outcomes().end());
  if (corr == Corr::Negative) std::reverse(bo.begin(), bo.end());
  const auto fa = cumulative(a.outcomes());
  const auto fb = cumulative(bo);
  std::size_t i = 0, j = 0;
  double prev = 0.0;
  while (i < fa.size() && j < fb.size()) {
    const double t = std::min(fa[i], fb[j]);
    if (t > prev) joint.push_back({a[i].value, bo[j].value, t - prev});
    prev = t;
    if (fa[i] == t) ++i;
    if (fb[j] == t) ++j;
  }
  return joint;
}

double prob_b_better(const OutcomeDistribution& a, const OutcomeDistribution& b, Corr corr) {
  double p = 0.0;
  for (const auto& j : joint_distribution(a, b, corr))
    if (j.b > j.a) p += j.prob;
  return std::clamp(p, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Raw CSV

namespace {

struct RawColumns {
  std::size_t subj, game, ha, pha, la, hb, phb, lb, lotnum, lotshape, corr, amb, block, trial, b,
      feedback;
};

// The published CPC-18 file names a few columns differently; the canonical
// name wins when both are present.
std::size_t column_or_alias(const io::CsvTable& t, std::string_view name, std::string_view alias) {
  if (auto c = t.find_column(name)) return *c;
  if (auto c = t.find_column(alias)) return *c;
  throw SchemaError(std::string(name));
}

RawColumns resolve_columns(const io::CsvTable& t) {
  return {t.column("SubjID"),
          t.column("GameID"),
          t.column("Ha"),
          t.column("pHa"),
          t.column("La"),
          t.column("Hb"),
          t.column("pHb"),
          t.column("Lb"),
          column_or_alias(t, "LotNum", "LotNumB"),
          column_or_alias(t, "LotShape", "LotShapeB"),
          t.column("Corr"),
          t.column("Amb"),
          column_or_alias(t, "Block", "block"),
          t.column("Trial"),
          t.column("B"),
          t.column("Feedback")};
}

const std::vector<std::string>& raw_header() {
  static const std::vector<std::string> h{"SubjID", "GameID", "Ha",       "pHa",  "La",  "Hb",
                                          "pHb",    "Lb",     "LotNum",   "LotShape", "Corr",
                                          "Amb",    "Block",  "Trial",    "B",    "Feedback"};
  return h;
}

bool same_problem(const ChoiceProblem& x, const ChoiceProblem& y) { return x == y; }

}  // namespace

RawData parse_raw_csv(const std::filesystem::path& path) {
  return parse_raw_csv_text(io::read_file(path));
}

RawData parse_raw_csv_text(std::string_view text) {
  const auto t = io::CsvTable::parse(text);
  const auto c = resolve_columns(t);
  std::map<int, ChoiceProblem> problems;
  RawData data;
  data.trials.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto line = t.line_of(r);
    ChoiceProblem p;
    p.game_id = static_cast<int>(t.integer(r, c.game));
    p.ha = t.real(r, c.ha);
    p.p_ha = t.real(r, c.pha);
    p.la = t.real(r, c.la);
    p.hb = t.real(r, c.hb);
    p.p_hb = t.real(r, c.phb);
    p.lot_val = t.real(r, c.lb);
    p.lot_num = static_cast<int>(t.integer(r, c.lotnum));
    try {
      p.lot_shape = parse_lot_shape(t.cell(r, c.lotshape));
      p.corr = corr_from_int(t.integer(r, c.corr), line);
      p.amb = flag_from_int(t.integer(r, c.amb), line, "Amb");
      validate(p);
    } catch (const RowError&) {
      throw;
    } catch (const ValidationError& e) {
      throw RowError(line, e.what());
    }
    auto [it, inserted] = problems.emplace(p.game_id, p);
    if (!inserted && !same_problem(it->second, p))
      throw RowError(line, "parameters of GameID " + std::to_string(p.game_id) +
                               " differ from an earlier row");

    TrialRecord tr;
    tr.subj_id = static_cast<int>(t.integer(r, c.subj));
    tr.game_id = p.game_id;
    tr.block = static_cast<int>(t.integer(r, c.block));
    tr.trial = static_cast<int>(t.integer(r, c.trial));
    tr.chose_b = flag_from_int(t.integer(r, c.b), line, "B");
    tr.feedback = flag_from_int(t.integer(r, c.feedback), line, "Feedback");
    if (tr.block < 1 || tr.block > 5) throw RowError(line, "Block outside 1-5");
    if (tr.trial < 1 || tr.trial > 25) throw RowError(line, "Trial outside 1-25");
    data.trials.push_back(tr);
  }
  for (auto& [id, p] : problems) data.problems.push_back(p);
  return data;
}

std::string format_raw_csv(const RawData& data) {
  std::map<int, const ChoiceProblem*> by_id;
  for (const auto& p : data.problems) by_id[p.game_id] = &p;
  std::ostringstream out;
  for (std::size_t i = 0; i < raw_header().size(); ++i) out << (i ? "," : "") << raw_header()[i];
  out << '\n';
  for (const auto& tr : data.trials) {
    auto it = by_id.find(tr.game_id);
    if (it == by_id.end())
      throw ValidationError("trial references unknown GameID " + std::to_string(tr.game_id));
    const auto& p = *it->second;
    out << tr.subj_id << ',' << p.game_id << ',' << io::format_real(p.ha) << ','
        << io::format_real(p.p_ha) << ',' << io::format_real(p.la) << ','
        << io::format_real(p.hb) << ',' << io::format_real(p.p_hb) << ','
        << io::format_real(p.lot_val) << ',' << p.lot_num << ',' << to_string(p.lot_shape) << ','
        << static_cast<int>(p.corr) << ',' << (p.amb ? 1 : 0) << ',' << tr.block << ','
        << tr.trial << ',' << (tr.chose_b ? 1 : 0) << ',' << (tr.feedback ? 1 : 0) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Rates

std::vector<RatePoint> aggregate_b_rates(std::span<const TrialRecord> trials) {
  std::map<RateKey, std::pair<int, int>> counts;
  for (const auto& t : trials) {
    auto& [chose, n] = counts[{t.subj_id, t.game_id}];
    chose += t.chose_b ? 1 : 0;
    ++n;
  }
  std::vector<RatePoint> out;
  out.reserve(counts.size());
  for (const auto& [k, c] : counts)
    out.push_back({k.subj_id, k.game_id, static_cast<double>(c.first) / c.second, c.second});
  return out;
}

std::string format_rates_csv(std::span<const RatePoint> points) {
  std::ostringstream out;
  out << "SubjID,GameID,BRate,N\n";
  for (const auto& p : points)
    out << p.subj_id << ',' << p.game_id << ',' << io::format_real(p.b_rate) << ','
        << p.n_trials << '\n';
  return out.str();
}

std::vector<RatePoint> parse_rates_csv(std::string_view text) {
  const auto t = io::CsvTable::parse(text);
  const auto cs = t.column("SubjID"), cg = t.column("GameID"), cr = t.column("BRate"),
             cn = t.column("N");
  std::vector<RatePoint> out;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    RatePoint p{static_cast<int>(t.integer(r, cs)), static_cast<int>(t.integer(r, cg)),
                t.real(r, cr), static_cast<int>(t.integer(r, cn))};
    if (p.b_rate < 0.0 || p.b_rate > 1.0) throw RowError(t.line_of(r), "BRate outside [0,1]");
    if (p.n_trials < 1) throw RowError(t.line_of(r), "N must be positive");
    out.push_back(p);
  }
  return out;
}

std::string format_problems_csv(std::span<const ChoiceProblem> problems) {
  std::ostringstream out;
  out << "GameID,Ha,pHa,La,Hb,pHb,Lb,LotNum,LotShape,Corr,Amb\n";
  for (const auto& p : problems)
    out << p.game_id << ',' << io::format_real(p.ha) << ',' << io::format_real(p.p_ha) << ','
        << io::format_real(p.la) << ',' << io::format_real(p.hb) << ','
        << io::format_real(p.p_hb) << ',' << io::format_real(p.lot_val) << ',' << p.lot_num
        << ',' << to_string(p.lot_shape) << ',' << static_cast<int>(p.corr) << ','
        << (p.amb ? 1 : 0) << '\n';
  return out.str();
}

std::vector<ChoiceProblem> parse_problems_csv(std::string_view text) {
  const auto t = io::CsvTable::parse(text);
  std::vector<ChoiceProblem> out;
  const auto cg = t.column("GameID"), cha = t.column("Ha"), cpha = t.column("pHa"),
             cla = t.column("La"), chb = t.column("Hb"), cphb = t.column("pHb"),
             clb = t.column("Lb"), cn = t.column("LotNum"), cs = t.column("LotShape"),
             cc = t.column("Corr"), ca = t.column("Amb");
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto line = t.line_of(r);
    ChoiceProblem p;
    p.game_id = static_cast<int>(t.integer(r, cg));
    p.ha = t.real(r, cha);
    p.p_ha = t.real(r, cpha);
    p.la = t.real(r, cla);
    p.hb = t.real(r, chb);
    p.p_hb = t.real(r, cphb);
    p.lot_val = t.real(r, clb);
    p.lot_num = static_cast<int>(t.integer(r, cn));
    try {
      p.lot_shape = parse_lot_shape(t.cell(r, cs));
      p.corr = corr_from_int(t.integer(r, cc), line);
      p.amb = flag_from_int(t.integer(r, ca), line, "Amb");
      validate(p);
    } catch (const RowError&) {
      throw;
    } catch (const ValidationError& e) {
      throw RowError(line, e.what());
    }
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split

std::string_view to_string(Fold f) {
  switch (f) {
    case Fold::Train: return "train";
    case Fold::Val: return "val";
    case Fold::Test: return "test";
  }
  return "train";
}

Fold SplitAssignment::fold_of(const RateKey& k) const {
  if (std::binary_search(test.begin(), test.end(), k)) return Fold::Test;
  if (std::binary_search(val.begin(), val.end(), k)) return Fold::Val;
  if (std::binary_search(train.begin(), train.end(), k)) return Fold::Train;
  throw ValidationError("key (" + std::to_string(k.subj_id) + "," + std::to_string(k.game_id) +
                        ") is not in the split");
}

SplitAssignment split_dataset(std::span<const RatePoint> points, std::uint64_t seed,
                              const SplitConfig& cfg) {
  if (cfg.test_per_subject < 0) throw ValidationError("test_per_subject must be >= 0");
  if (!(cfg.val_frac >= 0.0 && cfg.val_frac < 1.0))
    throw ValidationError("val_frac must lie in [0, 1)");

  std::map<int, std::vector<int>> games_of;
  for (const auto& p : points) games_of[p.subj_id].push_back(p.game_id);

  SplitAssignment s;
  s.seed = seed;
  const auto test_seed = rng::derive(seed, "split.test");
  std::vector<RateKey> remainder;
  for (auto& [subj, games] : games_of) {
    std::sort(games.begin(), games.end());
    if (std::adjacent_find(games.begin(), games.end()) != games.end())
      throw ValidationError("duplicate rate point for subject " + std::to_string(subj));
    const auto k = static_cast<std::size_t>(cfg.test_per_subject);
    if (k > 0 && games.size() <= k)
      throw ValidationError("subject " + std::to_string(subj) + " has only " +
                            std::to_string(games.size()) + " games; need more than " +
                            std::to_string(k));
    rng::Engine e(rng::derive(test_seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(subj))));
    rng::shuffle(std::span<int>(games), e);
    for (std::size_t i = 0; i < games.size(); ++i)
      (i < k ? s.test : remainder).push_back({subj, games[i]});
  }
  std::sort(remainder.begin(), remainder.end());
  const auto n_val =
      static_cast<std::size_t>(std::llround(cfg.val_frac * static_cast<double>(remainder.size())));
  rng::Engine ev(rng::derive(seed, "split.val"));
  rng::shuffle(std::span<RateKey>(remainder), ev);
  s.val.assign(remainder.begin(), remainder.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(remainder.begin() + static_cast<std::ptrdiff_t>(n_val), remainder.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::string format_split_csv(const SplitAssignment& s) {
  std::vector<std::pair<RateKey, Fold>> all;
  for (const auto& k : s.train) all.emplace_back(k, Fold::Train);
  for (const auto& k : s.val) all.emplace_back(k, Fold::Val);
  for (const auto& k : s.test) all.emplace_back(k, Fold::Test);
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::ostringstream out;
  for (const auto& [k, f] : all) out << k.subj_id << ',' << k.game_id << ',' << to_string(f) << '\n';
  return out.str();
}

SplitAssignment parse_split_csv(std::string_view text) {
  SplitAssignment s;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    const auto f = io::split_fields(line);
    if (f.size() != 3) throw RowError(line_no, "expected SubjID,GameID,fold");
    const auto subj = io::parse_int(f[0]);
    const auto game = io::parse_int(f[1]);
    if (!subj || !game) throw RowError(line_no, "bad key");
    const RateKey k{static_cast<int>(*subj), static_cast<int>(*game)};
    const auto fold = io::trim(f[2]);
    if (fold == "train")
      s.train.push_back(k);
    else if (fold == "val")
      s.val.push_back(k);
    else if (fold == "test")
      s.test.push_back(k);
    else
      throw RowError(line_no, "fold must be train, val or test");
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

constexpr double kProbGrid[] = {0.01, 0.05, 0.1, 0.2, 0.25, 0.4, 0.5,
                                0.6,  0.75, 0.8, 0.9, 0.95, 1.0};
constexpr double kSynthSlope = 0.15;
constexpr double kSynthBiasSd = 0.5;
constexpr double kSynthGameSd = 0.3;
constexpr double kSynthSlopeLogSd = 0.5;
constexpr int kSynthGamesPerSubject = 30;

int uniform_int(rng::Engine& e, int lo, int hi) {
  return lo + static_cast<int>(rng::below(e, static_cast<std::uint64_t>(hi - lo + 1)));
}

double pick_prob(rng::Engine& e) {
  return kProbGrid[rng::below(e, std::size(kProbGrid))];
}

ChoiceProblem random_problem(int game_id, rng::Engine& e) {
  ChoiceProblem p;
  p.game_id = game_id;
  p.ha = uniform_int(e, -10, 40);
  p.p_ha = pick_prob(e);
  p.la = p.p_ha == 1.0 ? p.ha : uniform_int(e, -20, static_cast<int>(p.ha));
  p.hb = uniform_int(e, -10, 60);
  p.p_hb = pick_prob(e);
  p.lot_val = uniform_int(e, -20, static_cast<int>(p.hb));
  const double u = rng::uniform01(e);
  if (p.p_hb == 1.0 || u < 0.55) {
    p.lot_num = 1;
    p.lot_shape = LotShape::None;
  } else if (u < 0.7) {
    p.lot_shape = LotShape::Symm;
    p.lot_num = 2 * uniform_int(e, 1, 4) + 1;
  } else {
    p.lot_shape = u < 0.85 ? LotShape::RSkew : LotShape::LSkew;
    p.lot_num = uniform_int(e, 2, 9);
  }
  const double c = rng::uniform01(e);
  p.corr = c < 0.7 ? Corr::None : (c < 0.85 ? Corr::Positive : Corr::Negative);
  p.amb = p.p_hb > 0.0 && p.p_hb < 1.0 && rng::uniform01(e) < 0.15;
  return p;
}

}  // namespace

std::vector<double> synth_subject_biases(int n_subjects, std::uint64_t seed) {
  rng::Engine e(rng::derive(seed, "synth.bias"));
  std::vector<double> b(static_cast<std::size_t>(n_subjects));
  for (auto& x : b) x = rng::normal(e, 0.0, kSynthBiasSd);
  return b;
}

RawData synth_generate(int n_subjects, int n_games, int trials_per_cell, std::uint64_t seed) {
  if (n_subjects < 1 || n_games < 1 || trials_per_cell < 1)
    throw ValidationError("synth counts must be >= 1");
  if (trials_per_cell > 25) throw ValidationError("trials per cell must be <= 25");

  RawData data;
  rng::Engine pe(rng::derive(seed, "synth.problems"));
  std::vector<double> game_offset;
  std::vector<double> ev_gap;
  for (int g = 1; g <= n_games; ++g) {
    data.problems.push_back(random_problem(g, pe));
    game_offset.push_back(rng::normal(pe, 0.0, kSynthGameSd));
    const auto& p = data.problems.back();
    ev_gap.push_back(expand_gamble_b(p).mean() - expand_gamble_a(p).mean());
  }

  const auto bias = synth_subject_biases(n_subjects, seed);
  // Per-subject sensitivity to the EV gap: a subject x game interaction.
  rng::Engine se(rng::derive(seed, "synth.slope"));
  std::vector<double> slope(static_cast<std::size_t>(n_subjects));
  for (auto& x : slope) x = kSynthSlope * std::exp(rng::normal(se, 0.0, kSynthSlopeLogSd));
  const int per_subject = std::min(kSynthGamesPerSubject, n_games);
  const auto assign_seed = rng::derive(seed, "synth.assign");
  const auto choice_seed = rng::derive(seed, "synth.choices");
  std::vector<int> games(static_cast<std::size_t>(n_games));
  for (int s = 0; s < n_subjects; ++s) {
    const int subj_id = s + 1;
    std::iota(games.begin(), games.end(), 1);
    rng::Engine ae(rng::derive(assign_seed, static_cast<std::uint64_t>(subj_id)));
    rng::shuffle(std::span<int>(games), ae);
    std::vector<int> mine(games.begin(), games.begin() + per_subject);
    std::sort(mine.begin(), mine.end());
    rng::Engine ce(rng::derive(choice_seed, static_cast<std::uint64_t>(subj_id)));
    for (int g : mine) {
      const auto gi = static_cast<std::size_t>(g - 1);
      const auto si = static_cast<std::size_t>(s);
      const double z = slope[si] * ev_gap[gi] + bias[si] + game_offset[gi];
      const double p_b = 1.0 / (1.0 + std::exp(-z));
      for (int t = 0; t < trials_per_cell; ++t) {
        TrialRecord tr;
        tr.subj_id = subj_id;
        tr.game_id = g;
        tr.trial = t + 1;
        tr.block = t / 5 + 1;
        tr.feedback = tr.block > 1;
        tr.chose_b = rng::uniform01(ce) < p_b;
        data.trials.push_back(tr);
      }
    }
  }
  return data;
}

}  // namespace psychfm

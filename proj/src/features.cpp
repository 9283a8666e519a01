#include "psychfm/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "psychfm/error.hpp"
#include "psychfm/io.hpp"

namespace psychfm {

SparseVector encode_onehot(int subj_idx, int game_idx, int n_subjects, int n_games) {
  if (n_subjects < 1 || n_games < 1) throw ValidationError("one-hot space must be non-empty");
  if (subj_idx < 0 || subj_idx >= n_subjects)
    throw ValidationError("subject index " + std::to_string(subj_idx) + " out of range");
  if (game_idx < 0 || game_idx >= n_games)
    throw ValidationError("game index " + std::to_string(game_idx) + " out of range");
  SparseVector x;
  x.length = static_cast<std::size_t>(n_subjects) + static_cast<std::size_t>(n_games);
  x.active = {static_cast<std::uint32_t>(subj_idx),
              static_cast<std::uint32_t>(n_subjects + game_idx)};
  return x;
}

IdentityIndex::IdentityIndex(std::span<const RatePoint> points) {
  for (const auto& p : points) {
    subjects_.emplace(p.subj_id, 0);
    games_.emplace(p.game_id, 0);
  }
  int i = 0;
  for (auto& [id, idx] : subjects_) idx = i++;
  i = 0;
  for (auto& [id, idx] : games_) idx = i++;
}

SparseVector IdentityIndex::encode(const RateKey& k) const {
  const auto s = subjects_.find(k.subj_id);
  const auto g = games_.find(k.game_id);
  if (s == subjects_.end()) throw ValidationError("unknown SubjID " + std::to_string(k.subj_id));
  if (g == games_.end()) throw ValidationError("unknown GameID " + std::to_string(k.game_id));
  return encode_onehot(s->second, g->second, n_subjects(), n_games());
}

NaiveFeatures naive_features(const OutcomeDistribution& a, const OutcomeDistribution& b) {
  return {b.mean() - a.mean(), b.stddev() - a.stddev(), b.min() - a.min(), b.max() - a.max()};
}

const std::array<std::string_view, kFeatureCount>& feature_names() {
  static constexpr std::array<std::string_view, kFeatureCount> names{
      "Ha",        "pHa",        "La",          "Hb",          "pHb",     "LotVal",
      "LotNum",    "lotShapeCode", "Corr",      "Amb",         "feedbackCode",
      "dEV",       "dSD",        "dMin",        "dMax",
      "dEV_o",     "dEV_fb",     "pBetter_o",   "pBetter_fb",  "dUniEV",  "pBetter_u",
      "dSignEV",   "pBetter_So", "pBetter_Sfb", "SignMax",     "RatioMin", "Dom"};
  return names;
}

std::array<double, kFeatureCount> PsychFeatureVector::values() const {
  return {ha,        p_ha,        la,          hb,           p_hb,        lot_val,     lot_num,
          lot_shape_code, corr,   amb,         feedback_code, d_ev,       d_sd,        d_min,
          d_max,     d_ev_o,      d_ev_fb,     p_better_o,   p_better_fb, d_uni_ev,    p_better_u,
          d_sign_ev, p_better_s_o, p_better_s_fb, sign_max,   ratio_min,   dom};
}

PsychFeatureVector PsychFeatureVector::from_values(std::span<const double> v) {
  if (v.size() != kFeatureCount)
    throw ValidationError("expected " + std::to_string(kFeatureCount) + " feature values");
  PsychFeatureVector f;
  double* fields[] = {&f.ha,          &f.p_ha,        &f.la,          &f.hb,         &f.p_hb,
                      &f.lot_val,     &f.lot_num,     &f.lot_shape_code, &f.corr,    &f.amb,
                      &f.feedback_code, &f.d_ev,      &f.d_sd,        &f.d_min,      &f.d_max,
                      &f.d_ev_o,      &f.d_ev_fb,     &f.p_better_o,  &f.p_better_fb,
                      &f.d_uni_ev,    &f.p_better_u,  &f.d_sign_ev,   &f.p_better_s_o,
                      &f.p_better_s_fb, &f.sign_max,  &f.ratio_min,   &f.dom};
  for (std::size_t i = 0; i < kFeatureCount; ++i) *fields[i] = v[i];
  return f;
}

OutcomeDistribution objective_view_b(const ChoiceProblem& p) {
  if (!p.amb) return expand_gamble_b(p);
  return expand_lottery(p);
}

int dominance(const OutcomeDistribution& a, const OutcomeDistribution& b) {
  constexpr double eps = 1e-12;
  std::vector<double> support;
  for (const auto& o : a.outcomes()) support.push_back(o.value);
  for (const auto& o : b.outcomes()) support.push_back(o.value);
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  bool b_weak = true, a_weak = true, b_strict = false, a_strict = false;
  std::size_t ia = 0, ib = 0;
  double fa = 0.0, fb = 0.0;
  for (double x : support) {
    while (ia < a.size() && a[ia].value <= x) fa += a[ia++].prob;
    while (ib < b.size() && b[ib].value <= x) fb += b[ib++].prob;
    if (fb > fa + eps) b_weak = false;
    if (fa > fb + eps) a_weak = false;
    if (fb < fa - eps) b_strict = true;
    if (fa < fb - eps) a_strict = true;
  }
  if (b_weak && b_strict) return 1;
  if (a_weak && a_strict) return -1;
  return 0;
}

double ratio_min(double min_a, double min_b) {
  const double ma = std::abs(min_a), mb = std::abs(min_b);
  const double hi = std::max(ma, mb);
  if (hi == 0.0) return 0.0;
  const double sa = (min_a > 0) - (min_a < 0);
  const double sb = (min_b > 0) - (min_b < 0);
  return sa * sb * std::min(ma, mb) / hi;
}

namespace {

double lot_shape_code(LotShape s) {
  switch (s) {
    case LotShape::LSkew: return -1.0;
    case LotShape::RSkew: return 1.0;
    case LotShape::Symm:
    case LotShape::None: break;
  }
  return 0.0;
}

double sign(double v) { return static_cast<double>((v > 0) - (v < 0)); }

}  // namespace

PsychFeatureVector psych_features(const ChoiceProblem& p, const OutcomeDistribution& a,
                                  const OutcomeDistribution& b) {
  PsychFeatureVector f;
  f.ha = p.ha;
  f.p_ha = p.p_ha;
  f.la = p.la;
  f.hb = p.hb;
  f.p_hb = p.p_hb;
  f.lot_val = p.lot_val;
  f.lot_num = p.lot_num;
  f.lot_shape_code = lot_shape_code(p.lot_shape);
  f.corr = static_cast<double>(static_cast<int>(p.corr));
  f.amb = p.amb ? 1.0 : 0.0;
  f.feedback_code = 0.0;

  const auto naive = naive_features(a, b);
  f.d_ev = naive.d_ev;
  f.d_sd = naive.d_sd;
  f.d_min = naive.d_min;
  f.d_max = naive.d_max;

  const auto b_obj = p.amb ? objective_view_b(p) : b;
  f.d_ev_o = b_obj.mean() - a.mean();
  f.d_ev_fb = b.mean() - a.mean();
  f.p_better_o = prob_b_better(a, b_obj, p.corr);
  f.p_better_fb = prob_b_better(a, b, p.corr);

  const auto ua = a.uniformized(), ub = b.uniformized();
  f.d_uni_ev = ub.mean() - ua.mean();
  f.p_better_u = prob_b_better(ua, ub, p.corr);

  const auto sa = a.sign_mapped(), sb = b.sign_mapped(), sb_obj = b_obj.sign_mapped();
  f.d_sign_ev = sb.mean() - sa.mean();
  f.p_better_s_o = prob_b_better(sa, sb_obj, p.corr);
  f.p_better_s_fb = prob_b_better(sa, sb, p.corr);

  f.sign_max = sign(std::max(a.max(), b.max()));
  f.ratio_min = ratio_min(a.min(), b.min());
  f.dom = dominance(a, b);
  return f;
}

PsychFeatureVector psych_features(const ChoiceProblem& p) {
  return psych_features(p, expand_gamble_a(p), expand_gamble_b(p));
}

// ---------------------------------------------------------------------------
// Standardizer

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (mean_.size() != scale_.size()) throw ValidationError("standardizer size mismatch");
  for (double s : scale_)
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("standardizer scale must be > 0");
}

Standardizer Standardizer::fit(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw ValidationError("cannot fit a standardizer on zero rows");
  const auto d = rows.front().size();
  std::vector<double> mean(d, 0.0), scale(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw ValidationError("ragged feature rows");
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  const double n = static_cast<double>(rows.size());
  for (auto& m : mean) m /= n;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) scale[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
  for (auto& s : scale) {
    s = std::sqrt(s / n);
    if (!(s > 1e-12)) s = 1.0;  // constant column
  }
  return Standardizer(std::move(mean), std::move(scale));
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  if (row.size() != mean_.size()) throw ValidationError("standardizer dimension mismatch");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean_[j]) / scale_[j];
  return out;
}

std::string Standardizer::serialize() const {
  std::ostringstream out;
  out << "psychfm-model v1 standardizer\n" << mean_.size() << '\n';
  for (std::size_t j = 0; j < mean_.size(); ++j) out << (j ? " " : "") << io::format_real(mean_[j]);
  out << '\n';
  for (std::size_t j = 0; j < scale_.size(); ++j) out << (j ? " " : "") << io::format_real(scale_[j]);
  out << '\n';
  return out.str();
}

Standardizer Standardizer::deserialize(std::string_view text, std::string_view source) {
  io::TokenReader r{std::string(text), std::string(source)};
  if (io::trim(r.next_line()) != "psychfm-model v1 standardizer")
    throw FormatError(std::string(source) + ": bad header");
  const auto d = r.next_int();
  if (d < 0) throw FormatError(std::string(source) + ": negative dimension");
  auto mean = r.reals(static_cast<std::size_t>(d));
  auto scale = r.reals(static_cast<std::size_t>(d));
  return Standardizer(std::move(mean), std::move(scale));
}

Standardizer fit_standardizer(std::span<const PsychFeatureVector> rows) {
  std::vector<std::vector<double>> m;
  m.reserve(rows.size());
  for (const auto& r : rows) {
    const auto v = r.values();
    m.emplace_back(v.begin(), v.end());
  }
  return Standardizer::fit(m);
}

std::vector<double> apply_standardizer(const Standardizer& s, const PsychFeatureVector& row) {
  const auto v = row.values();
  return s.apply(v);
}

std::string format_feature_csv(std::span<const FeatureRow> rows) {
  std::ostringstream out;
  out << "SubjID,GameID";
  for (auto n : feature_names()) out << ',' << n;
  out << '\n';
  for (const auto& r : rows) {
    out << r.key.subj_id << ',' << r.key.game_id;
    for (double v : r.features.values()) out << ',' << io::format_real(v);
    out << '\n';
  }
  return out.str();
}

std::vector<FeatureRow> parse_feature_csv(std::string_view text) {
  const auto t = io::CsvTable::parse(text);
  const auto cs = t.column("SubjID"), cg = t.column("GameID");
  std::array<std::size_t, kFeatureCount> cols{};
  for (std::size_t j = 0; j < kFeatureCount; ++j) cols[j] = t.column(feature_names()[j]);
  std::vector<FeatureRow> out;
  out.reserve(t.rows());
  std::array<double, kFeatureCount> v{};
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) v[j] = t.real(r, cols[j]);
    out.push_back({{static_cast<int>(t.integer(r, cs)), static_cast<int>(t.integer(r, cg))},
                   PsychFeatureVector::from_values(v)});
  }
  return out;
}

}  // namespace psychfm

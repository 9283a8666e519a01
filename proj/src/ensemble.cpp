#include "psychfm/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "psychfm/error.hpp"
#include "psychfm/io.hpp"

namespace psychfm {

namespace {

constexpr std::string_view kBlendHeader = "psychfm-model v1 blend";

std::vector<double> solve_no_intercept(const Matrix& p, std::span<const double> y, double lambda) {
  const auto k = p.cols();
  Matrix a(k, k);
  std::vector<double> rhs(k, 0.0);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto row = p.row(r);
    for (std::size_t i = 0; i < k; ++i) {
      rhs[i] += row[i] * y[r];
      for (std::size_t j = 0; j < k; ++j) a(i, j) += row[i] * row[j];
    }
  }
  double max_diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) max_diag = std::max(max_diag, a(i, i));
  auto c = rhs;
  Matrix reg = a;
  for (std::size_t i = 0; i < k; ++i) reg(i, i) += lambda;
  const double min_pivot = lambda > 0.0 ? 0.0 : 1e-13 * std::max(max_diag, 1.0);
  if (cholesky_solve(reg, c, min_pivot)) return c;
  for (std::size_t i = 0; i < k; ++i) reg(i, i) += 1e-10;
  c = rhs;
  if (!cholesky_solve(reg, c)) throw ValidationError("blend system is singular");
  return c;
}

double mse_of(std::span<const double> pred, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
  return s / static_cast<double>(y.size());
}

std::string fm_hyperparameters(const FmTrainConfig& c) {
  std::ostringstream o;
  o << "k=" << c.k << ";lr=" << io::format_real(c.learning_rate) << ";epochs=" << c.epochs
    << ";reg_w=" << io::format_real(c.reg_w) << ";reg_v=" << io::format_real(c.reg_v)
    << ";init_std=" << io::format_real(c.init_stddev)
    << ";solver=" << (c.solver == FmSolver::Als ? "als" : "sgd");
  return o.str();
}

}  // namespace

BlendModel blend_fit(const Matrix& val_preds, std::span<const double> y_val, double lambda,
                     bool intercept, std::vector<std::string> member_ids) {
  const auto m = val_preds.rows(), p = val_preds.cols();
  if (p < 1) throw ValidationError("blend needs at least one member");
  if (m < p)
    throw ValidationError("blend needs at least as many validation rows (" + std::to_string(m) +
                          ") as members (" + std::to_string(p) + ")");
  if (y_val.size() != m) throw ValidationError("blend targets and predictions differ in length");
  if (!(lambda >= 0.0)) throw ValidationError("blend lambda must be >= 0");
  if (member_ids.empty())
    for (std::size_t i = 0; i < p; ++i) member_ids.push_back("m" + std::to_string(i + 1));
  if (member_ids.size() != p) throw ValidationError("one member id per prediction column");

  BlendModel bm;
  bm.member_ids = std::move(member_ids);
  bm.has_intercept = intercept;
  if (intercept) {
    auto fit = ridge_fit(val_preds, y_val, {lambda});
    bm.coefficients = std::move(fit.model.w);
    bm.intercept = fit.model.b;
  } else {
    bm.coefficients = solve_no_intercept(val_preds, y_val, lambda);
  }
  return bm;
}

double blend_predict(const BlendModel& bm, std::span<const double> member_preds) {
  if (member_preds.size() != bm.coefficients.size())
    throw ValidationError("blend expects " + std::to_string(bm.coefficients.size()) +
                          " member predictions, got " + std::to_string(member_preds.size()));
  double y = bm.intercept;
  for (std::size_t i = 0; i < member_preds.size(); ++i) y += bm.coefficients[i] * member_preds[i];
  return y;
}

std::string blend_serialize(const BlendModel& bm) {
  std::ostringstream out;
  out << kBlendHeader << '\n' << bm.member_ids.size() << '\n';
  for (std::size_t i = 0; i < bm.member_ids.size(); ++i) out << (i ? " " : "") << bm.member_ids[i];
  out << '\n';
  for (std::size_t i = 0; i < bm.coefficients.size(); ++i)
    out << (i ? " " : "") << io::format_real(bm.coefficients[i]);
  out << '\n' << (bm.has_intercept ? 1 : 0) << ' ' << io::format_real(bm.intercept) << '\n';
  return out.str();
}

BlendModel blend_deserialize(std::string_view text, std::string_view source) {
  io::TokenReader r{std::string(text), std::string(source)};
  if (io::trim(r.next_line()) != kBlendHeader)
    throw FormatError(std::string(source) + ": version header mismatch (expected '" +
                      std::string(kBlendHeader) + "')");
  const auto p = r.next_int();
  if (p < 1) throw FormatError(std::string(source) + ": blend needs at least one member");
  r.next_line();  // rest of the count line
  std::istringstream ids(r.next_line());
  BlendModel bm;
  for (std::string id; ids >> id;) bm.member_ids.push_back(id);
  if (bm.member_ids.size() != static_cast<std::size_t>(p))
    throw FormatError(std::string(source) + ": member id count mismatch");
  bm.coefficients = r.reals(static_cast<std::size_t>(p));
  const auto flag = r.next_int();
  if (flag != 0 && flag != 1) throw FormatError(std::string(source) + ": bad intercept flag");
  bm.has_intercept = flag == 1;
  bm.intercept = r.next_real();
  if (!r.at_end()) throw FormatError(std::string(source) + ": trailing data");
  return bm;
}

// ---------------------------------------------------------------------------
// Member specs

std::string MemberSpec::id() const {
  std::string s = model == ModelKind::Fm ? "fm" : (model == ModelKind::Ridge ? "ridge" : "lasso");
  return s + (input == InputKind::OneHot ? ":onehot" : ":psych");
}

std::string MemberSpec::label() const {
  std::string s = model == ModelKind::Fm ? "FM" : (model == ModelKind::Ridge ? "Ridge" : "Lasso");
  return s + (input == InputKind::OneHot ? " (A)" : " (B)");
}

MemberSpec parse_member(std::string_view text) {
  text = io::trim(text);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ValidationError("member must look like model:input, got '" + std::string(text) + "'");
  const auto model = text.substr(0, colon), input = text.substr(colon + 1);
  MemberSpec s;
  if (model == "fm")
    s.model = ModelKind::Fm;
  else if (model == "ridge")
    s.model = ModelKind::Ridge;
  else if (model == "lasso")
    s.model = ModelKind::Lasso;
  else
    throw ValidationError("unknown model '" + std::string(model) + "' (fm, ridge, lasso)");
  if (input == "onehot")
    s.input = InputKind::OneHot;
  else if (input == "psych")
    s.input = InputKind::Psych;
  else
    throw ValidationError("unknown input '" + std::string(input) + "' (onehot, psych)");
  if (s.model == ModelKind::Fm && s.input == InputKind::Psych)
    throw ValidationError("fm takes onehot input only");
  return s;
}

std::vector<MemberSpec> parse_members(std::string_view list) {
  std::vector<MemberSpec> out;
  for (auto part : io::split_fields(list)) {
    if (io::trim(part).empty()) continue;
    out.push_back(parse_member(part));
  }
  if (out.empty()) throw ValidationError("member list is empty");
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = i + 1; j < out.size(); ++j)
      if (out[i] == out[j]) throw ValidationError("duplicate member " + out[i].id());
  return out;
}

std::string blend_label(std::span<const MemberSpec> members) {
  std::string s;
  for (std::size_t i = 0; i < members.size(); ++i) s += (i ? " + " : "") + members[i].label();
  return s;
}

std::vector<double> lambda_grid() { return {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0}; }

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<ChoiceProblem> problems, std::vector<RatePoint> points)
    : problems_(std::move(problems)), points_(std::move(points)) {
  std::sort(points_.begin(), points_.end(),
            [](const RatePoint& a, const RatePoint& b) { return a.key() < b.key(); });
  for (const auto& p : problems_) {
    if (!psych_.emplace(p.game_id, psych_features(p)).second)
      throw ValidationError("duplicate GameID " + std::to_string(p.game_id));
  }
  for (const auto& p : points_) {
    if (!psych_.contains(p.game_id))
      throw ValidationError("rate point references unknown GameID " + std::to_string(p.game_id));
    if (!targets_.emplace(p.key(), p.b_rate).second)
      throw ValidationError("duplicate rate point (" + std::to_string(p.subj_id) + "," +
                            std::to_string(p.game_id) + ")");
  }
  index_ = IdentityIndex(points_);
}

double Dataset::target(const RateKey& k) const {
  const auto it = targets_.find(k);
  if (it == targets_.end())
    throw ValidationError("no rate point for (" + std::to_string(k.subj_id) + "," +
                          std::to_string(k.game_id) + ")");
  return it->second;
}

const PsychFeatureVector& Dataset::psych(int game_id) const {
  const auto it = psych_.find(game_id);
  if (it == psych_.end()) throw ValidationError("unknown GameID " + std::to_string(game_id));
  return it->second;
}

std::vector<double> Dataset::dense(const RateKey& k, InputKind input) const {
  if (input == InputKind::Psych) {
    const auto v = psych(k.game_id).values();
    return {v.begin(), v.end()};
  }
  const auto x = onehot(k);
  std::vector<double> d(x.length, 0.0);
  for (auto i : x.active) d[i] = 1.0;
  return d;
}

std::vector<FeatureRow> Dataset::feature_rows() const {
  std::vector<FeatureRow> rows;
  rows.reserve(points_.size());
  for (const auto& p : points_) rows.push_back({p.key(), psych(p.game_id)});
  return rows;
}

void Dataset::use_features(std::span<const FeatureRow> rows) {
  std::map<int, PsychFeatureVector> stored;
  for (const auto& r : rows) {
    auto [it, inserted] = stored.emplace(r.key.game_id, r.features);
    if (!inserted && it->second.values() != r.features.values())
      throw ValidationError("feature rows disagree for GameID " + std::to_string(r.key.game_id));
  }
  for (const auto& p : points_)
    if (!stored.contains(p.game_id))
      throw ValidationError("no stored features for GameID " + std::to_string(p.game_id));
  for (auto& [game, f] : stored) psych_[game] = f;
}

std::vector<double> fold_targets(const Dataset& data, std::span<const RateKey> keys) {
  std::vector<double> y;
  y.reserve(keys.size());
  for (const auto& k : keys) y.push_back(data.target(k));
  return y;
}

// ---------------------------------------------------------------------------
// Members

double TrainedMember::predict(const Dataset& data, const RateKey& k) const {
  if (fm) return fm->predict(data.onehot(k));
  if (!linear) throw ValidationError("member " + spec.id() + " is not trained");
  auto x = data.dense(k, spec.input);
  if (scaler) x = scaler->apply(x);
  return linear_predict(*linear, x);
}

void TrainedMember::save(const std::filesystem::path& stem) const {
  auto model_path = stem;
  model_path += ".model";
  if (fm)
    fm_save(*fm, model_path);
  else if (linear)
    linear_save(*linear, model_path);
  else
    throw ValidationError("member " + spec.id() + " is not trained");
  if (scaler) {
    auto scaler_path = stem;
    scaler_path += ".scaler";
    io::write_file(scaler_path, scaler->serialize());
  }
}

TrainedMember TrainedMember::load(const MemberSpec& spec, const std::filesystem::path& stem) {
  TrainedMember m;
  m.spec = spec;
  auto model_path = stem;
  model_path += ".model";
  if (spec.model == ModelKind::Fm)
    m.fm = fm_load(model_path);
  else
    m.linear = linear_load(model_path);
  auto scaler_path = stem;
  scaler_path += ".scaler";
  if (std::filesystem::exists(scaler_path))
    m.scaler = Standardizer::deserialize(io::read_file(scaler_path), scaler_path.string());
  return m;
}

TrainedMember train_member(const Dataset& data, const SplitAssignment& split,
                           const MemberSpec& spec, const PipelineConfig& cfg) {
  if (split.train.empty()) throw ValidationError("train fold is empty");
  TrainedMember out;
  out.spec = spec;
  const auto y_train = fold_targets(data, split.train);

  if (spec.model == ModelKind::Fm) {
    if (spec.input != InputKind::OneHot) throw ValidationError("fm takes onehot input only");
    std::vector<FmExample> ex;
    ex.reserve(split.train.size());
    for (std::size_t i = 0; i < split.train.size(); ++i)
      ex.push_back({data.onehot(split.train[i]), y_train[i]});
    out.fm = fm_train(ex, cfg.fm);
    out.hyperparameters = fm_hyperparameters(cfg.fm);
    return out;
  }

  const bool standardize =
      spec.input == InputKind::Psych && (spec.model == ModelKind::Ridge || cfg.lasso_standardize);
  auto design = [&](std::span<const RateKey> keys) {
    std::vector<std::vector<double>> rows;
    rows.reserve(keys.size());
    for (const auto& k : keys) rows.push_back(data.dense(k, spec.input));
    return rows;
  };
  auto train_rows = design(split.train);
  if (standardize) {
    out.scaler = Standardizer::fit(train_rows);
    for (auto& r : train_rows) r = out.scaler->apply(r);
  }
  const Matrix x_train = Matrix::from_rows(train_rows);

  auto fit_at = [&](double lambda) {
    if (spec.model == ModelKind::Ridge) return ridge_fit(x_train, y_train, {lambda}).model;
    return lasso_fit(x_train, y_train, {lambda, cfg.lasso_tol, cfg.lasso_max_iter}).model;
  };
  const auto& fixed = spec.model == ModelKind::Ridge ? cfg.ridge_lambda : cfg.lasso_lambda;
  if (fixed) {
    out.lambda = *fixed;
    out.linear = fit_at(*fixed);
  } else {
    if (split.val.empty())
      throw ValidationError("lambda selection needs a non-empty validation fold");
    auto val_rows = design(split.val);
    if (out.scaler)
      for (auto& r : val_rows) r = out.scaler->apply(r);
    const auto y_val = fold_targets(data, split.val);
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : lambda_grid()) {
      auto model = fit_at(lambda);
      std::vector<double> pred;
      pred.reserve(val_rows.size());
      for (const auto& r : val_rows) pred.push_back(linear_predict(model, r));
      const double err = mse_of(pred, y_val);
      if (err < best) {
        best = err;
        out.lambda = lambda;
        out.linear = std::move(model);
      }
    }
  }
  out.hyperparameters = "lambda=" + io::format_real(out.lambda);
  if (spec.model == ModelKind::Lasso && spec.input == InputKind::Psych)
    out.hyperparameters += standardize ? ";standardize=1" : ";standardize=0";
  return out;
}

FoldPredictions predict_folds(const TrainedMember& m, const Dataset& data,
                              const SplitAssignment& split) {
  FoldPredictions p;
  auto run = [&](std::span<const RateKey> keys, std::vector<double>& out) {
    out.reserve(keys.size());
    for (const auto& k : keys) out.push_back(m.predict(data, k));
  };
  run(split.train, p.train);
  run(split.val, p.val);
  run(split.test, p.test);
  return p;
}

void fit_blend_stage(PipelineResult& r, const PipelineConfig& cfg) {
  const auto p = r.member_preds.size();
  const auto m = r.y_val.size();
  Matrix val(m, p);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t i = 0; i < m; ++i) val(i, j) = r.member_preds[j].val[i];
  std::vector<std::string> ids;
  for (const auto& mem : r.members) ids.push_back(mem.spec.id());
  r.blend = blend_fit(val, r.y_val, cfg.blend_lambda, cfg.blend_intercept, ids);

  auto combine = [&](auto fold) {
    const auto n = (r.member_preds.front().*fold).size();
    std::vector<double> out(n), row(p);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j) row[j] = (r.member_preds[j].*fold)[i];
      out[i] = blend_predict(r.blend, row);
    }
    return out;
  };
  r.blend_val = combine(&FoldPredictions::val);
  r.blend_test = combine(&FoldPredictions::test);
}

PipelineResult run_pipeline(const Dataset& data, const SplitAssignment& split,
                            std::span<const MemberSpec> members, const PipelineConfig& cfg,
                            const std::optional<std::filesystem::path>& run_dir) {
  if (split.train.empty() || split.val.empty() || split.test.empty())
    throw ValidationError("pipeline needs non-empty train, validation and test folds");
  if (members.empty()) throw ValidationError("pipeline needs at least one member");
  PipelineResult r;
  r.y_train = fold_targets(data, split.train);
  r.y_val = fold_targets(data, split.val);
  r.y_test = fold_targets(data, split.test);
  for (const auto& spec : members) {
    r.members.push_back(train_member(data, split, spec, cfg));
    r.member_preds.push_back(predict_folds(r.members.back(), data, split));
  }
  fit_blend_stage(r, cfg);
  if (run_dir) write_pipeline_artifacts(r, split, *run_dir);
  return r;
}

std::string format_prediction_csv(std::span<const RateKey> keys,
                                  std::span<const std::string> columns,
                                  std::span<const std::vector<double>> values) {
  if (columns.size() != values.size()) throw ValidationError("one value column per name");
  for (const auto& v : values)
    if (v.size() != keys.size()) throw ValidationError("prediction column length mismatch");
  std::ostringstream out;
  out << "SubjID,GameID";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out << keys[i].subj_id << ',' << keys[i].game_id;
    for (const auto& v : values) out << ',' << io::format_real(v[i]);
    out << '\n';
  }
  return out.str();
}

void write_pipeline_artifacts(const PipelineResult& r, const SplitAssignment& split,
                              const std::filesystem::path& run_dir) {
  std::vector<std::string> cols;
  std::vector<std::vector<double>> val, test;
  for (std::size_t j = 0; j < r.members.size(); ++j) {
    const auto id = r.members[j].spec.id();
    auto stem = run_dir / "models" / id;
    stem.replace_filename(id.substr(0, id.find(':')) + "_" + id.substr(id.find(':') + 1));
    r.members[j].save(stem);
    cols.push_back(id);
    val.push_back(r.member_preds[j].val);
    test.push_back(r.member_preds[j].test);
  }
  io::write_file(run_dir / "models" / "blend.model", blend_serialize(r.blend));

  auto val_cols = cols;
  val_cols.push_back("target");
  val.push_back(r.y_val);
  io::write_file(run_dir / "val_predictions.csv", format_prediction_csv(split.val, val_cols, val));

  auto test_cols = cols;
  test_cols.push_back("blend");
  test_cols.push_back("target");
  test.push_back(r.blend_test);
  test.push_back(r.y_test);
  io::write_file(run_dir / "test_predictions.csv",
                 format_prediction_csv(split.test, test_cols, test));
}

}  // namespace psychfm

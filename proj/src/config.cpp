#include "psychfm/config.hpp"

#include <sstream>

#include "psychfm/error.hpp"
#include "psychfm/io.hpp"
#include "psychfm/rng.hpp"

namespace psychfm {

namespace {

double real_value(std::string_view key, std::string_view v) {
  if (auto x = io::parse_real(v)) return *x;
  throw ValidationError("config " + std::string(key) + ": expected a number, got '" +
                        std::string(v) + "'");
}

long long int_value(std::string_view key, std::string_view v) {
  auto x = io::parse_int(v);
  if (!x || io::trim(v).find_first_of(".eE") != std::string_view::npos)
    throw ValidationError("config " + std::string(key) + ": expected an integer, got '" +
                          std::string(v) + "'");
  return *x;
}

bool bool_value(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config " + std::string(key) + ": expected true or false, got '" +
                        std::string(v) + "'");
}

std::optional<double> lambda_value(std::string_view key, std::string_view v) {
  if (v == "auto") return std::nullopt;
  const double x = real_value(key, v);
  if (x < 0.0) throw ValidationError("config " + std::string(key) + " must be >= 0");
  return x;
}

std::string lambda_text(const std::optional<double>& l) {
  return l ? io::format_real(*l) : std::string("auto");
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view raw) {
  const auto v = io::trim(raw);
  if (key == "seed") {
    const auto s = int_value(key, v);
    if (s < 0) throw ValidationError("config seed must be >= 0");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "fm.k") {
    const auto k = int_value(key, v);
    if (k < 1) throw ValidationError("config fm.k must be >= 1");
    fm_k = static_cast<std::size_t>(k);
  } else if (key == "fm.lr") {
    fm_lr = real_value(key, v);
  } else if (key == "fm.epochs") {
    fm_epochs = static_cast<int>(int_value(key, v));
  } else if (key == "fm.reg_w") {
    fm_reg_w = real_value(key, v);
  } else if (key == "fm.reg_v") {
    fm_reg_v = real_value(key, v);
  } else if (key == "fm.init_std") {
    fm_init_std = real_value(key, v);
  } else if (key == "fm.solver") {
    if (v == "sgd")
      fm_solver = FmSolver::Sgd;
    else if (v == "als")
      fm_solver = FmSolver::Als;
    else
      throw ValidationError("config fm.solver must be sgd or als");
  } else if (key == "ridge.lambda") {
    ridge_lambda = lambda_value(key, v);
  } else if (key == "lasso.lambda") {
    lasso_lambda = lambda_value(key, v);
  } else if (key == "lasso.tol") {
    lasso_tol = real_value(key, v);
  } else if (key == "lasso.max_iter") {
    lasso_max_iter = static_cast<int>(int_value(key, v));
  } else if (key == "lasso.standardize") {
    lasso_standardize = bool_value(key, v);
  } else if (key == "blend.lambda") {
    blend_lambda = real_value(key, v);
  } else if (key == "blend.intercept") {
    blend_intercept = bool_value(key, v);
  } else if (key == "split.test_per_subject") {
    split_test_per_subject = static_cast<int>(int_value(key, v));
  } else if (key == "split.val_frac") {
    split_val_frac = real_value(key, v);
  } else if (key == "clip_predictions") {
    clip_predictions = bool_value(key, v);
  } else if (key == "synth.subjects") {
    synth_subjects = static_cast<int>(int_value(key, v));
  } else if (key == "synth.games") {
    synth_games = static_cast<int>(int_value(key, v));
  } else if (key == "synth.trials") {
    synth_trials = static_cast<int>(int_value(key, v));
  } else {
    throw ValidationError("unknown config key '" + std::string(key) + "'");
  }
}

void RunConfig::merge_text(std::string_view text, std::string_view source) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view l = line;
    if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
    l = io::trim(l);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError(std::string(source) + ":" + std::to_string(line_no) +
                            ": expected 'key = value'");
    set(io::trim(l.substr(0, eq)), io::trim(l.substr(eq + 1)));
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  merge_text(io::read_file(path), path.string());
}

std::string RunConfig::resolved() const {
  std::ostringstream o;
  o << "seed = " << seed << '\n'
    << "fm.k = " << fm_k << '\n'
    << "fm.lr = " << io::format_real(fm_lr) << '\n'
    << "fm.epochs = " << fm_epochs << '\n'
    << "fm.reg_w = " << io::format_real(fm_reg_w) << '\n'
    << "fm.reg_v = " << io::format_real(fm_reg_v) << '\n'
    << "fm.init_std = " << io::format_real(fm_init_std) << '\n'
    << "fm.solver = " << (fm_solver == FmSolver::Als ? "als" : "sgd") << '\n'
    << "ridge.lambda = " << lambda_text(ridge_lambda) << '\n'
    << "lasso.lambda = " << lambda_text(lasso_lambda) << '\n'
    << "lasso.tol = " << io::format_real(lasso_tol) << '\n'
    << "lasso.max_iter = " << lasso_max_iter << '\n'
    << "lasso.standardize = " << (lasso_standardize ? "true" : "false") << '\n'
    << "blend.lambda = " << io::format_real(blend_lambda) << '\n'
    << "blend.intercept = " << (blend_intercept ? "true" : "false") << '\n'
    << "split.test_per_subject = " << split_test_per_subject << '\n'
    << "split.val_frac = " << io::format_real(split_val_frac) << '\n'
    << "clip_predictions = " << (clip_predictions ? "true" : "false") << '\n'
    << "synth.subjects = " << synth_subjects << '\n'
    << "synth.games = " << synth_games << '\n'
    << "synth.trials = " << synth_trials << '\n';
  return o.str();
}

SplitConfig RunConfig::split() const { return {split_test_per_subject, split_val_frac}; }

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig p;
  p.fm.k = fm_k;
  p.fm.learning_rate = fm_lr;
  p.fm.epochs = fm_epochs;
  p.fm.reg_w = fm_reg_w;
  p.fm.reg_v = fm_reg_v;
  p.fm.init_stddev = fm_init_std;
  p.fm.solver = fm_solver;
  p.fm.seed = rng::derive(seed, "fm");
  p.ridge_lambda = ridge_lambda;
  p.lasso_lambda = lasso_lambda;
  p.lasso_tol = lasso_tol;
  p.lasso_max_iter = lasso_max_iter;
  p.lasso_standardize = lasso_standardize;
  p.blend_lambda = blend_lambda;
  p.blend_intercept = blend_intercept;
  p.clip_predictions = clip_predictions;
  p.seed = seed;
  return p;
}

std::uint64_t RunConfig::synth_seed() const { return rng::derive(seed, "synth"); }
std::uint64_t RunConfig::split_seed() const { return rng::derive(seed, "split"); }

}  // namespace psychfm

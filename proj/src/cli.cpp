#include "psychfm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "psychfm/config.hpp"
#include "psychfm/cpc_data.hpp"
#include "psychfm/ensemble.hpp"
#include "psychfm/error.hpp"
#include "psychfm/eval.hpp"
#include "psychfm/features.hpp"
#include "psychfm/io.hpp"

namespace psychfm::cli {

namespace fs = std::filesystem;

namespace {

/// File layout of a run directory shared by all subcommands.
struct RunDir {
  fs::path root;

  fs::path raw() const { return root / "raw.csv"; }
  fs::path problems() const { return root / "problems.csv"; }
  fs::path rates() const { return root / "rates.csv"; }
  fs::path features() const { return root / "features.csv"; }
  fs::path split() const { return root / "split.csv"; }
  fs::path config() const { return root / "config.resolved.txt"; }
  fs::path blends_index() const { return root / "models" / "blends.txt"; }
  fs::path model_stem(const MemberSpec& s) const { return root / "models" / stem(s); }
  fs::path params(const MemberSpec& s) const { return root / "models" / (stem(s) + ".params"); }
  fs::path preds(const MemberSpec& s) const { return root / "preds" / (stem(s) + ".csv"); }
  fs::path blend_model(const std::string& name) const { return root / "models" / (name + ".model"); }
  fs::path blend_dir(const std::string& name) const { return root / "blends" / name; }
  fs::path report(ReportFormat f) const {
    return root / (f == ReportFormat::Csv ? "report.csv" : "report.md");
  }

  static std::string stem(const MemberSpec& s) {
    auto id = s.id();
    std::replace(id.begin(), id.end(), ':', '_');
    return id;
  }
  static std::string blend_name(std::span<const MemberSpec> members) {
    std::string n = "blend";
    for (std::size_t i = 0; i < members.size(); ++i) n += (i ? "+" : "_") + stem(members[i]);
    return n;
  }
};

// Row order of single models in reports.
const std::vector<MemberSpec>& known_members() {
  static const std::vector<MemberSpec> all{
      {ModelKind::Fm, InputKind::OneHot},    {ModelKind::Ridge, InputKind::OneHot},
      {ModelKind::Lasso, InputKind::OneHot}, {ModelKind::Ridge, InputKind::Psych},
      {ModelKind::Lasso, InputKind::Psych}};
  return all;
}

// Members and blends run-all evaluates when --members is not given.
const std::vector<std::string>& default_blends() {
  static const std::vector<std::string> b{"fm:onehot,ridge:psych", "ridge:onehot,ridge:psych",
                                          "fm:onehot,lasso:psych"};
  return b;
}

struct Options {
  std::string config;
  std::optional<long long> seed;
  std::string raw;
  std::string out = "run";
  std::string model;
  std::string input;
  std::string members;
  std::string format = "markdown";
  bool intercept = false;
  bool clip = false;
  std::vector<std::string> synth;
};

class Runner {
 public:
  Runner(const Options& opt, std::ostream& out, std::ostream& err)
      : opt_(opt), out_(out), err_(err), dir_{fs::path(opt.out)} {
    if (!opt.config.empty()) cfg_.merge_file(opt.config);
    for (const auto& kv : opt.synth) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw ValidationError("--synth expects key=value pairs, got '" + kv + "'");
      cfg_.set("synth." + kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (opt.seed) cfg_.set("seed", std::to_string(*opt.seed));
    if (opt.intercept) cfg_.blend_intercept = true;
    if (opt.clip) cfg_.clip_predictions = true;
    if (opt.format == "markdown")
      format_ = ReportFormat::Markdown;
    else if (opt.format == "csv")
      format_ = ReportFormat::Csv;
    else
      throw ValidationError("--format must be markdown or csv");
  }

  void log_config(std::string_view command) {
    err_ << "# " << command << " resolved config\n" << cfg_.resolved();
    io::write_file(dir_.config(), cfg_.resolved());
  }

  void synth() {
    const auto data =
        synth_generate(cfg_.synth_subjects, cfg_.synth_games, cfg_.synth_trials, cfg_.synth_seed());
    io::write_file(dir_.raw(), format_raw_csv(data));
    out_ << "synth: " << data.trials.size() << " trials, " << data.problems.size()
         << " problems -> " << dir_.raw().string() << '\n';
  }

  void ingest() {
    const fs::path raw = opt_.raw.empty() ? dir_.raw() : fs::path(opt_.raw);
    const auto data = parse_raw_csv(raw);
    const auto rates = aggregate_b_rates(data.trials);
    io::write_file(dir_.problems(), format_problems_csv(data.problems));
    io::write_file(dir_.rates(), format_rates_csv(rates));
    out_ << "ingest: " << data.trials.size() << " trials -> " << rates.size() << " rate points\n";
  }

  void featurize() {
    const auto data = load_dataset(false);
    io::write_file(dir_.features(), format_feature_csv(data.feature_rows()));
    out_ << "featurize: " << data.points().size() << " rows -> " << dir_.features().string()
         << '\n';
  }

  void split() {
    const auto rates = parse_rates_csv(io::read_file(dir_.rates()));
    const auto s = split_dataset(rates, cfg_.split_seed(), cfg_.split());
    io::write_file(dir_.split(), format_split_csv(s));
    out_ << "split: train " << s.train.size() << ", val " << s.val.size() << ", test "
         << s.test.size() << '\n';
  }

  void train(const MemberSpec& spec) {
    const auto data = load_dataset(spec.input == InputKind::Psych);
    const auto s = load_split();
    const auto member = train_member(data, s, spec, cfg_.pipeline());
    member.save(dir_.model_stem(spec));
    io::write_file(dir_.params(spec), member.hyperparameters + "\n");
    const auto preds = predict_folds(member, data, s);
    write_member_preds(spec, s, preds);
    out_ << "train: " << spec.label() << " (" << member.hyperparameters << ")\n";
  }

  void blend(const std::vector<MemberSpec>& members, bool write_own_report) {
    const auto data = load_dataset(false);
    const auto s = load_split();
    PipelineResult r;
    r.y_val = fold_targets(data, s.val);
    r.y_test = fold_targets(data, s.test);
    for (const auto& spec : members) {
      r.members.emplace_back().spec = spec;
      r.member_preds.push_back(read_member_preds(spec, s));
    }
    fit_blend_stage(r, cfg_.pipeline());
    const auto name = RunDir::blend_name(members);
    io::write_file(dir_.blend_model(name), blend_serialize(r.blend));

    std::vector<std::string> cols;
    std::vector<std::vector<double>> val, test;
    for (std::size_t j = 0; j < members.size(); ++j) {
      cols.push_back(members[j].id());
      val.push_back(r.member_preds[j].val);
      test.push_back(r.member_preds[j].test);
    }
    auto val_cols = cols;
    val_cols.push_back("target");
    val.push_back(r.y_val);
    io::write_file(dir_.blend_dir(name) / "val_predictions.csv",
                   format_prediction_csv(s.val, val_cols, val));
    auto test_cols = cols;
    test_cols.push_back("blend");
    test_cols.push_back("target");
    test.push_back(r.blend_test);
    test.push_back(r.y_test);
    io::write_file(dir_.blend_dir(name) / "test_predictions.csv",
                   format_prediction_csv(s.test, test_cols, test));
    register_blend(name, members);

    out_ << "blend: " << blend_label(members) << " coefficients";
    for (double c : r.blend.coefficients) out_ << ' ' << io::format_fixed(c, 4);
    out_ << '\n';
    if (write_own_report) {
      const std::vector<std::vector<MemberSpec>> only{members};
      write_report_for(members, only);
    }
  }

  void eval() {
    std::vector<MemberSpec> members;
    for (const auto& m : known_members())
      if (fs::exists(dir_.preds(m))) members.push_back(m);
    if (members.empty()) throw ValidationError("no trained members in " + dir_.root.string());
    write_report_for(members, registered_blends());
  }

  void run_all() {
    if (!opt_.raw.empty() && !opt_.synth.empty())
      throw ValidationError("--raw and --synth are mutually exclusive");
    if (opt_.raw.empty()) synth();
    ingest();
    featurize();
    split();
    std::error_code ec;
    fs::remove(dir_.blends_index(), ec);
    std::vector<std::vector<MemberSpec>> blends;
    std::vector<MemberSpec> members;
    if (!opt_.members.empty()) {
      blends.push_back(parse_members(opt_.members));
      members = blends.front();
    } else {
      for (const auto& b : default_blends()) blends.push_back(parse_members(b));
      members = known_members();
    }
    for (const auto& m : members) train(m);
    for (const auto& b : blends) blend(b, false);
    write_report_for(members, blends);
  }

  const RunConfig& config() const { return cfg_; }

 private:
  Dataset load_dataset(bool need_features) const {
    Dataset d(parse_problems_csv(io::read_file(dir_.problems())),
              parse_rates_csv(io::read_file(dir_.rates())));
    if (need_features) {
      if (!fs::exists(dir_.features()))
        throw IoError("missing " + dir_.features().string() + " (run featurize first)");
      d.use_features(parse_feature_csv(io::read_file(dir_.features())));
    }
    return d;
  }

  SplitAssignment load_split() const {
    auto s = parse_split_csv(io::read_file(dir_.split()));
    s.seed = cfg_.split_seed();
    return s;
  }

  void write_member_preds(const MemberSpec& spec, const SplitAssignment& s,
                          const FoldPredictions& p) const {
    std::vector<std::tuple<RateKey, Fold, double>> rows;
    for (std::size_t i = 0; i < s.train.size(); ++i) rows.emplace_back(s.train[i], Fold::Train, p.train[i]);
    for (std::size_t i = 0; i < s.val.size(); ++i) rows.emplace_back(s.val[i], Fold::Val, p.val[i]);
    for (std::size_t i = 0; i < s.test.size(); ++i) rows.emplace_back(s.test[i], Fold::Test, p.test[i]);
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
    std::ostringstream o;
    o << "SubjID,GameID,fold,prediction\n";
    for (const auto& [k, f, v] : rows)
      o << k.subj_id << ',' << k.game_id << ',' << to_string(f) << ',' << io::format_real(v) << '\n';
    io::write_file(dir_.preds(spec), o.str());
  }

  FoldPredictions read_member_preds(const MemberSpec& spec, const SplitAssignment& s) const {
    const auto path = dir_.preds(spec);
    if (!fs::exists(path))
      throw IoError("missing " + path.string() + " (train " + spec.id() + " first)");
    const auto t = io::CsvTable::read(path);
    const auto cs = t.column("SubjID"), cg = t.column("GameID"), cp = t.column("prediction");
    std::map<RateKey, double> by_key;
    for (std::size_t r = 0; r < t.rows(); ++r)
      by_key[{static_cast<int>(t.integer(r, cs)), static_cast<int>(t.integer(r, cg))}] =
          t.real(r, cp);
    auto pick = [&](std::span<const RateKey> keys) {
      std::vector<double> v;
      for (const auto& k : keys) {
        const auto it = by_key.find(k);
        if (it == by_key.end())
          throw ValidationError(path.string() + " lacks a prediction for (" +
                                std::to_string(k.subj_id) + "," + std::to_string(k.game_id) + ")");
        v.push_back(it->second);
      }
      return v;
    };
    return {pick(s.train), pick(s.val), pick(s.test)};
  }

  void register_blend(const std::string& name, std::span<const MemberSpec> members) const {
    std::string ids;
    for (const auto& m : members) ids += (ids.empty() ? "" : ",") + m.id();
    std::string text = fs::exists(dir_.blends_index()) ? io::read_file(dir_.blends_index()) : "";
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
      if (line == ids) return;
    io::write_file(dir_.blends_index(), text + ids + "\n");
    (void)name;
  }

  std::vector<std::vector<MemberSpec>> registered_blends() const {
    std::vector<std::vector<MemberSpec>> out;
    if (!fs::exists(dir_.blends_index())) return out;
    std::istringstream in(io::read_file(dir_.blends_index()));
    for (std::string line; std::getline(in, line);)
      if (!io::trim(line).empty()) out.push_back(parse_members(line));
    return out;
  }

  void write_report_for(std::span<const MemberSpec> members,
                        std::span<const std::vector<MemberSpec>> blends) const {
    const auto data = load_dataset(false);
    const auto s = load_split();
    const auto y_train = fold_targets(data, s.train);
    const auto y_val = fold_targets(data, s.val);
    const auto y_test = fold_targets(data, s.test);

    std::vector<ModelEvaluation> evals;
    std::map<std::string, FoldPredictions> preds;
    auto member_preds = [&](const MemberSpec& m) -> const FoldPredictions& {
      auto it = preds.find(m.id());
      if (it == preds.end()) it = preds.emplace(m.id(), read_member_preds(m, s)).first;
      return it->second;
    };
    for (const auto& m : members) {
      const auto& p = member_preds(m);
      ModelEvaluation e;
      e.model = m.label();
      e.input = m.input == InputKind::OneHot ? InputType::A : InputType::B;
      e.val_preds = p.val;
      e.val_targets = y_val;
      e.test_preds = p.test;
      e.test_targets = y_test;
      if (fs::exists(dir_.params(m))) e.hyperparameters = std::string(io::trim(io::read_file(dir_.params(m))));
      evals.push_back(std::move(e));
    }
    for (const auto& b : blends) {
      const auto name = RunDir::blend_name(b);
      const auto model = blend_deserialize(io::read_file(dir_.blend_model(name)),
                                           dir_.blend_model(name).string());
      ModelEvaluation e;
      e.model = blend_label(b);
      e.input = InputType::Ensemble;
      e.val_targets = y_val;
      e.test_targets = y_test;
      std::vector<double> row(b.size());
      for (std::size_t i = 0; i < y_val.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) row[j] = member_preds(b[j]).val[i];
        e.val_preds.push_back(blend_predict(model, row));
      }
      for (std::size_t i = 0; i < y_test.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) row[j] = member_preds(b[j]).test[i];
        e.test_preds.push_back(blend_predict(model, row));
      }
      for (std::size_t j = 0; j < b.size(); ++j)
        e.coefficients.push_back({b[j].label(), model.coefficients[j]});
      if (model.has_intercept) e.intercept = model.intercept;
      e.hyperparameters = "lambda=" + io::format_real(cfg_.blend_lambda) +
                          ";intercept=" + (model.has_intercept ? "1" : "0");
      evals.push_back(std::move(e));
    }
    auto report = stability_report(evals, cfg_.seed, cfg_.clip_predictions);
    const double mean =
        std::accumulate(y_train.begin(), y_train.end(), 0.0) / static_cast<double>(y_train.size());
    report.baseline_test_mse_x100 = mse_x100(std::vector<double>(y_test.size(), mean), y_test);
    write_report(report, format_, dir_.report(format_));
    out_ << "report -> " << dir_.report(format_).string() << '\n';
  }

  const Options& opt_;
  std::ostream& out_;
  std::ostream& err_;
  RunDir dir_;
  RunConfig cfg_;
  ReportFormat format_ = ReportFormat::Markdown;
};

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"psychfm: per-person risky-choice prediction (factorization machine + "
               "psychological-feature ridge blend)"};
  app.require_subcommand(1, 1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "flat key = value config file");
    sub->add_option("--seed", opt.seed, "master seed");
    sub->add_option("--out", opt.out, "run directory")->capture_default_str();
    sub->add_option("--format", opt.format, "report format: markdown or csv")
        ->check(CLI::IsMember({"markdown", "csv"}))
        ->capture_default_str();
    sub->add_flag("--intercept", opt.intercept, "fit the blend with an intercept");
    sub->add_flag("--clip", opt.clip, "clip predictions to [0,1] when scoring");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic trial-level raw CSV");
  common(synth);
  synth->add_option("--synth", opt.synth, "subjects=N games=N trials=N");

  auto* ingest = app.add_subcommand("ingest", "parse the raw CSV into problems and B-rates");
  common(ingest);
  ingest->add_option("--raw", opt.raw, "trial-level CSV (default: <out>/raw.csv)");

  auto* featurize = app.add_subcommand("featurize", "write the psychological feature matrix");
  common(featurize);

  auto* split = app.add_subcommand("split", "assign rate points to train/val/test");
  common(split);

  auto* train = app.add_subcommand("train", "fit one layer-1 model on the train fold");
  common(train);
  train->add_option("--model", opt.model, "fm, ridge or lasso")
      ->required()
      ->check(CLI::IsMember({"fm", "ridge", "lasso"}));
  train->add_option("--input", opt.input, "onehot or psych")
      ->required()
      ->check(CLI::IsMember({"onehot", "psych"}));

  auto* blend = app.add_subcommand("blend", "fit blend coefficients on validation predictions");
  common(blend);
  blend->add_option("--members", opt.members,
                    "comma list of model:input (default fm:onehot,ridge:psych)");

  auto* eval = app.add_subcommand("eval", "write the evaluation report");
  common(eval);

  auto* run_all = app.add_subcommand("run-all", "synth/ingest, featurize, split, train, blend, eval");
  common(run_all);
  run_all->add_option("--raw", opt.raw, "trial-level CSV; synthetic data when omitted");
  run_all->add_option("--synth", opt.synth, "subjects=N games=N trials=N");
  run_all->add_option("--members", opt.members, "comma list of model:input for one blend");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    Runner runner(opt, out, err);
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    runner.log_config(name);
    if (name == "synth")
      runner.synth();
    else if (name == "ingest")
      runner.ingest();
    else if (name == "featurize")
      runner.featurize();
    else if (name == "split")
      runner.split();
    else if (name == "train")
      runner.train(parse_member(opt.model + ":" + opt.input));
    else if (name == "blend")
      runner.blend(parse_members(opt.members.empty() ? "fm:onehot,ridge:psych" : opt.members),
                   true);
    else if (name == "eval")
      runner.eval();
    else
      runner.run_all();
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace psychfm::cli

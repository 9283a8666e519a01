#include "psychfm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "psychfm/error.hpp"
#include "psychfm/io.hpp"

namespace psychfm {

double mse(std::span<const double> preds, std::span<const double> targets) {
  if (preds.size() != targets.size())
    throw ValidationError("mse: " + std::to_string(preds.size()) + " predictions vs " +
                          std::to_string(targets.size()) + " targets");
  if (preds.empty()) throw ValidationError("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - targets[i];
    s += d * d;
  }
  return s / static_cast<double>(preds.size());
}

double mse_x100(std::span<const double> preds, std::span<const double> targets) {
  return 100.0 * mse(preds, targets);
}

double ReportRow::gap() const { return std::abs(test_mse_x100 - val_mse_x100); }

double ReportRow::test_rmse() const { return std::sqrt(test_mse_x100 / 100.0); }

EvalReport stability_report(std::span<const ModelEvaluation> models, std::uint64_t seed,
                            bool clip) {
  EvalReport report;
  report.seed = seed;
  auto clipped = [clip](std::vector<double> v) {
    if (clip)
      for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
    return v;
  };
  for (const auto& m : models) {
    ReportRow row;
    row.model = m.model;
    row.input = m.input;
    row.test_mse_x100 = mse_x100(clipped(m.test_preds), m.test_targets);
    row.val_mse_x100 = mse_x100(clipped(m.val_preds), m.val_targets);
    row.hyperparameters = m.hyperparameters;
    row.seed = seed;
    row.coefficients = m.coefficients;
    row.intercept = m.intercept;
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

const char* section_title(InputType t) {
  switch (t) {
    case InputType::A: return "Naive Models on One Hot Encoded Input (A)";
    case InputType::B: return "Naive Models on Psychological Feature Input (B)";
    case InputType::Ensemble: break;
  }
  return "Ensemble Models";
}

const char* input_code(InputType t) {
  switch (t) {
    case InputType::A: return "A";
    case InputType::B: return "B";
    case InputType::Ensemble: break;
  }
  return "ensemble";
}

// Single models are listed by algorithm name inside their input section.
std::string table_name(const ReportRow& row) {
  if (row.input == InputType::Ensemble) return row.model;
  const auto base = row.model.substr(0, row.model.find(" ("));
  if (base == "FM") return "Factorization Machines";
  if (base == "Ridge") return "Ridge Regression";
  if (base == "Lasso") return "Lasso Regression";
  return base;
}

std::string fx(double v, int decimals = 4) { return io::format_fixed(v, decimals); }

std::string markdown(const EvalReport& r) {
  std::ostringstream out;
  out << "# Mean Squared Error of Different Models\n\nSeed: " << r.seed << "\n";
  for (auto section : {InputType::A, InputType::B, InputType::Ensemble}) {
    const bool any = std::any_of(r.rows.begin(), r.rows.end(),
                                 [&](const ReportRow& row) { return row.input == section; });
    if (!any) continue;
    out << "\n## " << section_title(section) << "\n\n| Model | MSE*100 | RMSE |\n|---|---:|---:|\n";
    for (const auto& row : r.rows)
      if (row.input == section)
        out << "| " << table_name(row) << " | " << fx(row.test_mse_x100) << " | "
            << fx(row.test_rmse()) << " |\n";
  }
  if (r.baseline_test_mse_x100)
    out << "\nBaseline (training mean): MSE*100 = " << fx(*r.baseline_test_mse_x100) << "\n";

  out << "\n# Validation and Test Errors\n\n"
      << "| Model | Test MSE | Validation MSE | Gap | Stable |\n|---|---:|---:|---:|---|\n";
  for (const auto& row : r.rows)
    out << "| " << row.model << " | " << fx(row.test_mse_x100) << " | " << fx(row.val_mse_x100)
        << " | " << fx(row.gap()) << " | " << (row.unstable() ? "no" : "yes") << " |\n";

  const bool blends = std::any_of(r.rows.begin(), r.rows.end(),
                                  [](const ReportRow& row) { return !row.coefficients.empty(); });
  if (blends) {
    out << "\n# Blend Coefficients\n\n| Blend | Member | Coefficient | Share |\n|---|---|---:|---:|\n";
    for (const auto& row : r.rows) {
      if (row.coefficients.empty()) continue;
      double total = 0.0;
      for (const auto& c : row.coefficients) total += std::abs(c.coefficient);
      for (const auto& c : row.coefficients)
        out << "| " << row.model << " | " << c.member << " | " << fx(c.coefficient) << " | "
            << (total > 0.0 ? fx(100.0 * std::abs(c.coefficient) / total, 1) + "%" : "-")
            << " |\n";
      if (row.intercept)
        out << "| " << row.model << " | (intercept) | " << fx(*row.intercept) << " | - |\n";
    }
  }

  out << "\n# Hyperparameters\n\n| Model | Seed | Settings |\n|---|---:|---|\n";
  for (const auto& row : r.rows)
    out << "| " << row.model << " | " << row.seed << " | "
        << (row.hyperparameters.empty() ? "-" : row.hyperparameters) << " |\n";
  return out.str();
}

std::string csv(const EvalReport& r) {
  std::ostringstream out;
  out << "model,input,test_mse_x100,val_mse_x100,gap,stable,test_rmse,seed,hyperparameters,"
         "coefficients\n";
  for (const auto& row : r.rows) {
    std::string coefs;
    for (const auto& c : row.coefficients)
      coefs += (coefs.empty() ? "" : ";") + c.member + "=" + fx(c.coefficient, 6);
    if (row.intercept) coefs += (coefs.empty() ? "" : ";") + std::string("intercept=") + fx(*row.intercept, 6);
    out << row.model << ',' << input_code(row.input) << ',' << fx(row.test_mse_x100, 6) << ','
        << fx(row.val_mse_x100, 6) << ',' << fx(row.gap(), 6) << ','
        << (row.unstable() ? 0 : 1) << ',' << fx(row.test_rmse(), 6) << ',' << row.seed << ','
        << row.hyperparameters << ',' << coefs << '\n';
  }
  return out.str();
}

}  // namespace

std::string emit_report(const EvalReport& report, ReportFormat format) {
  if (report.rows.empty()) throw ValidationError("report has no rows");
  return format == ReportFormat::Markdown ? markdown(report) : csv(report);
}

void write_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path) {
  io::write_file(path, emit_report(report, format));
}

}  // namespace psychfm

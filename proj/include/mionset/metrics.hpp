#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mionset {

struct Confusion {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

// Derived metrics; a missing optional marks a 0/0 case (rendered "NA").
struct EvalReport {
  Confusion confusion;
  std::optional<double> precision, tpr, tnr, fpr, fnr, f1;

  // config echo
  int output_len = 0;
  int neighbor_votes = 0;
  double s_th = 0.0;
};

// Positive class = "mi_task".
Confusion confusion_counts(const std::vector<std::string>& pred, const std::vector<std::string>& truth);

EvalReport compute_metrics(const Confusion& c);

// 100 * (f1_new / f1_base - 1).
double improvement_ratio(double f1_new, double f1_base);

// Fixed 6-decimal formatting for reproducible bytes; undefined values render
// as null (JSON) / NA (CSV).
std::string report_json(const EvalReport& report);
std::string report_csv(const EvalReport& report);  // header + one row: precision..f1

}  // namespace mionset

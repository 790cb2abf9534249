#include "mionset/metrics.hpp"

#include <stdexcept>

#include "mionset/common.hpp"
#include "mionset/recording.hpp"

namespace mionset {

Confusion confusion_counts(const std::vector<std::string>& pred, const std::vector<std::string>& truth) {
  if (pred.size() != truth.size()) {
    throw std::runtime_error(strfmt("metrics: %zu predictions vs %zu truth labels", pred.size(),
                                    truth.size()));
  }
  Confusion c;
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == kLabelMi;
    const bool t = truth[i] == kLabelMi;
    if (p && t) {
      ++c.tp;
    } else if (!p && !t) {
      ++c.tn;
    } else if (p && !t) {
      ++c.fp;
    } else {
      ++c.fn;
    }
  }
  return c;
}

EvalReport compute_metrics(const Confusion& c) {
  EvalReport r;
  r.confusion = c;
  auto ratio = [](std::int64_t num, std::int64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.tpr = ratio(c.tp, c.tp + c.fn);
  r.tnr = ratio(c.tn, c.tn + c.fp);
  if (r.tnr) r.fpr = 1.0 - *r.tnr;
  if (r.tpr) r.fnr = 1.0 - *r.tpr;
  if (r.precision && r.tpr && (*r.precision > 0 || *r.tpr > 0)) {
    r.f1 = 2.0 * *r.precision * *r.tpr / (*r.precision + *r.tpr);
  }
  return r;
}

double improvement_ratio(double f1_new, double f1_base) {
  if (!(f1_base > 0)) throw std::runtime_error("metrics: improvement ratio needs a positive baseline");
  return 100.0 * (f1_new / f1_base - 1.0);
}

namespace {

std::string json_value(const std::optional<double>& v) {
  return v ? strfmt("%.6f", *v) : std::string("null");
}

std::string csv_value(const std::optional<double>& v) {
  return v ? strfmt("%.6f", *v) : std::string("NA");
}

}  // namespace

std::string report_json(const EvalReport& r) {
  std::string out = "{\n";
  out += strfmt("  \"confusion\": {\"tp\": %lld, \"tn\": %lld, \"fp\": %lld, \"fn\": %lld},\n",
                static_cast<long long>(r.confusion.tp), static_cast<long long>(r.confusion.tn),
                static_cast<long long>(r.confusion.fp), static_cast<long long>(r.confusion.fn));
  out += strfmt("  \"precision\": %s,\n", json_value(r.precision).c_str());
  out += strfmt("  \"tpr\": %s,\n", json_value(r.tpr).c_str());
  out += strfmt("  \"tnr\": %s,\n", json_value(r.tnr).c_str());
  out += strfmt("  \"fpr\": %s,\n", json_value(r.fpr).c_str());
  out += strfmt("  \"fnr\": %s,\n", json_value(r.fnr).c_str());
  out += strfmt("  \"f1\": %s,\n", json_value(r.f1).c_str());
  out += strfmt("  \"config\": {\"output_len\": %d, \"neighbor_votes\": %d, \"s_th\": %.6f}\n",
                r.output_len, r.neighbor_votes, r.s_th);
  out += "}\n";
  return out;
}

std::string report_csv(const EvalReport& r) {
  std::string out = "precision,tpr,tnr,fpr,fnr,f1\n";
  out += csv_value(r.precision) + "," + csv_value(r.tpr) + "," + csv_value(r.tnr) + "," +
         csv_value(r.fpr) + "," + csv_value(r.fnr) + "," + csv_value(r.f1) + "\n";
  return out;
}

}  // namespace mionset

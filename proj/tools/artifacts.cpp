#include "artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "quill/error.hpp"

namespace quill::cli {

using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  if (!out) throw IoError("failed writing " + path.string());
}

void require_file(const std::filesystem::path& path, const std::string& what) {
  if (!std::filesystem::is_regular_file(path)) {
    throw IoError(what + " not found: " + path.string());
  }
}

std::vector<std::string> read_text_lines(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string format_prediction_line(const Prediction& p) {
  json obj = {{"student", p.student}, {"prediction", p.prediction}};
  obj["confidence"] = p.confidence ? json(*p.confidence) : json(nullptr);
  return obj.dump();
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Prediction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error&) {
      throw ParseError(number, "malformed JSON in " + path.string());
    }
    if (!obj.is_object()) throw ParseError(number, "expected a JSON object");
    for (const char* key : {"student", "prediction"}) {
      if (!obj.contains(key) || !obj[key].is_string()) {
        throw ParseError(number, std::string("missing string field '") + key + "'");
      }
    }
    Prediction p{obj["student"].get<std::string>(), obj["prediction"].get<std::string>(), {}};
    if (auto it = obj.find("confidence"); it != obj.end() && it->is_number()) {
      p.confidence = it->get<double>();
    }
    out.push_back(std::move(p));
  }
  return out;
}

void save_predictions(std::span<const Prediction> predictions, const std::filesystem::path& path) {
  std::string text;
  for (const auto& p : predictions) {
    text += format_prediction_line(p);
    text += '\n';
  }
  write_file(path, text);
}

void check_alignment(std::span<const TextPair> pairs, std::span<const Prediction> predictions) {
  if (pairs.size() != predictions.size()) {
    throw InvalidArgument("pair file has " + std::to_string(pairs.size()) +
                          " entries but prediction file has " + std::to_string(predictions.size()));
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].student != predictions[i].student) {
      throw InvalidArgument("prediction " + std::to_string(i + 1) +
                            " does not belong to the pair on the same line");
    }
  }
}

namespace {

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"median", s.median}, {"sem", s.sem}}; }

}  // namespace

json report_to_json(const MetricsReport& r) {
  return {{"n", r.n},
          {"ed", summary_json(r.ed)},
          {"ned", summary_json(r.ned)},
          {"fk_mae", summary_json(r.fk_error)},
          {"lix_mae", summary_json(r.lix_error)}};
}

std::string report_to_text(const MetricsReport& r, const std::string& title) {
  char buf[256];
  std::string out = title + " (n=" + std::to_string(r.n) + ")\n";
  std::snprintf(buf, sizeof buf, "%-8s %10s %10s %10s\n", "metric", "mean", "median", "sem");
  out += buf;
  const auto row = [&](const char* name, const Summary& s) {
    std::snprintf(buf, sizeof buf, "%-8s %10.4f %10.4f %10.4f\n", name, s.mean, s.median, s.sem);
    out += buf;
  };
  row("ED", r.ed);
  row("NED", r.ned);
  row("FK MAE", r.fk_error);
  row("LIX MAE", r.lix_error);
  return out;
}

std::string per_pair_csv(std::span<const PairMetrics> rows, std::span<const Prediction> predictions) {
  std::string out = "ed,ned,fk_pred,fk_true,lix_pred,lix_true,confidence\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& m = rows[i];
    out += format_double(m.ed) + ',' + format_double(m.ned) + ',' + format_double(m.fk_pred) + ',' +
           format_double(m.fk_true) + ',' + format_double(m.lix_pred) + ',' +
           format_double(m.lix_true) + ',';
    if (i < predictions.size() && predictions[i].confidence) {
      out += format_double(*predictions[i].confidence);
    }
    out += '\n';
  }
  return out;
}

std::string calibration_csv(const CalibrationReport& report) {
  std::string out = "bin,lower,upper,count,mean_confidence,accuracy\n";
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    const auto& bin = report.bins[b];
    out += std::to_string(b + 1) + ',' + format_double(bin.lower) + ',' + format_double(bin.upper) +
           ',' + std::to_string(bin.count) + ',' + format_double(bin.mean_confidence) + ',' +
           format_double(bin.accuracy) + '\n';
  }
  return out;
}

json calibration_to_json(const CalibrationReport& report) {
  return {{"n", report.n}, {"ece", report.ece}, {"mce", report.mce}};
}

std::string rejection_csv(const RejectionCurve& curve) {
  std::string out = "rejection,retained," + (curve.metric.empty() ? "value" : curve.metric) + '\n';
  for (const auto& p : curve.points) {
    out += format_double(p.rejection) + ',' + std::to_string(p.retained) + ',' +
           format_double(p.value) + '\n';
  }
  return out;
}

CurveMetric parse_curve_metric(const std::string& name) {
  if (name == "ned") return CurveMetric::kNed;
  if (name == "ed") return CurveMetric::kEd;
  if (name == "fk") return CurveMetric::kFk;
  if (name == "lix") return CurveMetric::kLix;
  throw InvalidArgument("unknown metric '" + name + "' (expected ned, ed, fk or lix)");
}

std::string to_string(CurveMetric metric) {
  switch (metric) {
    case CurveMetric::kNed: return "ned";
    case CurveMetric::kEd: return "ed";
    case CurveMetric::kFk: return "fk_mae";
    case CurveMetric::kLix: return "lix_mae";
  }
  return "value";
}

RejectionCurve metric_rejection_curve(std::span<const PairMetrics> rows,
                                      std::span<const Prediction> predictions, CurveMetric metric,
                                      std::span<const double> grid) {
  std::vector<ScoredItem> items;
  items.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!predictions[i].confidence) {
      throw InvalidArgument("rejection curves need predictions with confidences");
    }
    const auto& m = rows[i];
    double value = 0.0;
    switch (metric) {
      case CurveMetric::kNed: value = m.ned; break;
      case CurveMetric::kEd: value = m.ed; break;
      case CurveMetric::kFk: value = m.fk_pred - m.fk_true; break;
      case CurveMetric::kLix: value = m.lix_pred - m.lix_true; break;
    }
    items.push_back({*predictions[i].confidence, value});
  }
  const bool signed_errors = metric == CurveMetric::kFk || metric == CurveMetric::kLix;
  return rejection_curve(items, signed_errors ? Aggregate::kMae : Aggregate::kMean, grid,
                         to_string(metric));
}

}  // namespace quill::cli

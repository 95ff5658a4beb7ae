#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "quill/calibration.hpp"
#include "quill/metrics.hpp"
#include "quill/pairs.hpp"

namespace quill::cli {

// Shortest decimal form that reads back to the same double.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);
void require_file(const std::filesystem::path& path, const std::string& what);

// Non-empty lines with trailing '\r' removed.
std::vector<std::string> read_text_lines(const std::filesystem::path& path);

struct Prediction {
  std::string student;
  std::string prediction;
  std::optional<double> confidence;  // absent for the identity baseline
};

std::string format_prediction_line(const Prediction& p);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);
void save_predictions(std::span<const Prediction> predictions, const std::filesystem::path& path);

// Throws InvalidArgument unless the lists have equal length and each
// prediction's student text matches its pair.
void check_alignment(std::span<const TextPair> pairs, std::span<const Prediction> predictions);

nlohmann::json report_to_json(const MetricsReport& report);
std::string report_to_text(const MetricsReport& report, const std::string& title);

// ed,ned,fk_pred,fk_true,lix_pred,lix_true,confidence
std::string per_pair_csv(std::span<const PairMetrics> rows, std::span<const Prediction> predictions);

// bin,lower,upper,count,mean_confidence,accuracy
std::string calibration_csv(const CalibrationReport& report);
nlohmann::json calibration_to_json(const CalibrationReport& report);

// rejection,retained,<metric>
std::string rejection_csv(const RejectionCurve& curve);

enum class CurveMetric { kNed, kEd, kFk, kLix };
CurveMetric parse_curve_metric(const std::string& name);
std::string to_string(CurveMetric metric);

// Per-item (confidence, value) samples for a rejection curve. FK and LIX
// use signed errors aggregated as MAE; ED and NED use the mean.
RejectionCurve metric_rejection_curve(std::span<const PairMetrics> rows,
                                      std::span<const Prediction> predictions, CurveMetric metric,
                                      std::span<const double> grid);

}  // namespace quill::cli

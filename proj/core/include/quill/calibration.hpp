#pragma once

#include <span>
#include <string>
#include <vector>

#include "quill/decoding.hpp"
#include "quill/vocab.hpp"

namespace quill {

// One teacher-forced target position: the probability of the argmax token
// and whether that token equals the reference.
struct TokenEvent {
  double confidence = 0.0;
  bool correct = false;
};

// Teacher-forced events for every target position of every pair (EOS
// included), with probabilities from softmax(z / temperature).
std::vector<TokenEvent> collect_token_events(const Translator& model,
                                             std::span<const EncodedPair> pairs,
                                             double temperature = 1.0);

struct CalibrationBin {
  double lower = 0.0;  // exclusive
  double upper = 0.0;  // inclusive
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

struct CalibrationReport {
  double ece = 0.0;
  double mce = 0.0;
  std::size_t n = 0;
  std::vector<CalibrationBin> bins;
};

// Equal-width bins ((m-1)/M, m/M]; a confidence of exactly 0 joins the
// first bin. ECE weights each bin's |accuracy - confidence| gap by its
// share of events; MCE is the largest gap over non-empty bins.
CalibrationReport calibration_report(std::span<const TokenEvent> events, int bins = 10);

struct TemperatureScaler {
  double temperature = 1.0;
};

struct TemperatureFitOptions {
  double min_temperature = 0.05;
  double max_temperature = 10.0;
  double tolerance = 1e-3;  // on log T
  bool use_grid = false;    // 50 log-spaced candidates instead of golden section
  int grid_points = 50;
};

// Teacher-forced logits and targets for a set of pairs, computed once so
// the temperature search does not re-run the model.
struct TeacherForcedSet {
  std::vector<Logits<double>> logits;
  std::vector<TokenSeq> targets;
};
TeacherForcedSet teacher_forced_set(const Translator& model, std::span<const EncodedPair> pairs);

// Mean per-token negative log-likelihood at temperature T.
double temperature_nll(const TeacherForcedSet& set, double temperature);

// Maximizes validation log-likelihood over T. The returned T never scores
// worse than T = 1.
TemperatureScaler fit_temperature(const TeacherForcedSet& set,
                                  const TemperatureFitOptions& options = {});
TemperatureScaler fit_temperature(const Translator& model, std::span<const EncodedPair> pairs,
                                  const TemperatureFitOptions& options = {});

enum class Aggregate { kMean, kMae };

struct ScoredItem {
  double confidence = 0.0;  // C(y_hat | x)
  double value = 0.0;       // per-item metric (e.g. NED, or a signed FK error for kMae)
};

struct RejectionPoint {
  double rejection = 0.0;
  std::size_t retained = 0;
  double value = 0.0;
};

struct RejectionCurve {
  std::string metric;
  std::vector<RejectionPoint> points;
};

// For each rejection fraction r, keeps the ceil((1 - r) N) most confident
// items (stable on ties) and aggregates their values: the mean, or the
// mean absolute value for kMae.
RejectionCurve rejection_curve(std::span<const ScoredItem> items, Aggregate aggregate,
                               std::span<const double> grid, std::string metric = {});

// {0, 0.05, ..., 0.95}
std::vector<double> default_rejection_grid();

}  // namespace quill

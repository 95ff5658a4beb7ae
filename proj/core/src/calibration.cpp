#include "quill/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "quill/error.hpp"

namespace quill {

namespace {

std::size_t argmax_row(const Logits<double>& logits, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < logits.cols(); ++k) {
    if (logits(row, k) > logits(row, best)) best = k;
  }
  return static_cast<std::size_t>(best);
}

std::vector<double> row_log_softmax(const Logits<double>& logits, Eigen::Index row, double t) {
  std::vector<double> z(logits.row(row).data(), logits.row(row).data() + logits.cols());
  return log_softmax(z, t);
}

}  // namespace

std::vector<TokenEvent> collect_token_events(const Translator& model,
                                             std::span<const EncodedPair> pairs,
                                             double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  std::vector<TokenEvent> events;
  for (const auto& pair : pairs) {
    const Logits<double> logits = model.teacher_forced_logits(pair.source, pair.decoder_input);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const std::size_t best = argmax_row(logits, i);
      const std::vector<double> logp = row_log_softmax(logits, i, temperature);
      events.push_back({std::exp(logp[best]),
                        static_cast<TokenId>(best) == pair.target[static_cast<std::size_t>(i)]});
    }
  }
  return events;
}

CalibrationReport calibration_report(std::span<const TokenEvent> events, int bins) {
  if (events.empty()) throw InvalidArgument("calibration report needs at least one event");
  if (bins < 1) throw InvalidArgument("calibration report needs at least one bin");
  std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> correct_sum(static_cast<std::size_t>(bins), 0.0);
  for (const auto& e : events) {
    const double scaled = std::ceil(e.confidence * bins);
    const auto b = static_cast<std::size_t>(std::clamp(scaled - 1.0, 0.0, static_cast<double>(bins - 1)));
    ++count[b];
    conf_sum[b] += e.confidence;
    correct_sum[b] += e.correct ? 1.0 : 0.0;
  }
  CalibrationReport report;
  report.n = events.size();
  const double n = static_cast<double>(events.size());
  for (std::size_t b = 0; b < count.size(); ++b) {
    CalibrationBin bin;
    bin.lower = static_cast<double>(b) / bins;
    bin.upper = static_cast<double>(b + 1) / bins;
    bin.count = count[b];
    if (count[b] > 0) {
      bin.mean_confidence = conf_sum[b] / static_cast<double>(count[b]);
      bin.accuracy = correct_sum[b] / static_cast<double>(count[b]);
      const double gap = std::abs(bin.accuracy - bin.mean_confidence);
      report.ece += static_cast<double>(count[b]) / n * gap;
      report.mce = std::max(report.mce, gap);
    }
    report.bins.push_back(bin);
  }
  return report;
}

TeacherForcedSet teacher_forced_set(const Translator& model, std::span<const EncodedPair> pairs) {
  TeacherForcedSet set;
  for (const auto& pair : pairs) {
    set.logits.push_back(model.teacher_forced_logits(pair.source, pair.decoder_input));
    set.targets.push_back(pair.target);
  }
  return set;
}

double temperature_nll(const TeacherForcedSet& set, double temperature) {
  if (!(temperature > 0.0 && std::isfinite(temperature))) {
    throw InvalidArgument("temperature must be a positive finite number");
  }
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < set.logits.size(); ++s) {
    const Logits<double>& logits = set.logits[s];
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const std::vector<double> logp = row_log_softmax(logits, i, temperature);
      total -= logp[static_cast<std::size_t>(set.targets[s][static_cast<std::size_t>(i)])];
      ++n;
    }
  }
  if (n == 0) throw InvalidArgument("temperature fit needs at least one target token");
  return total / static_cast<double>(n);
}

TemperatureScaler fit_temperature(const TeacherForcedSet& set, const TemperatureFitOptions& options) {
  if (set.logits.empty()) throw InvalidArgument("temperature fit needs validation pairs");
  if (!(options.min_temperature > 0.0 && options.max_temperature > options.min_temperature)) {
    throw InvalidArgument("temperature search interval is invalid");
  }
  const auto nll = [&set](double log_t) { return temperature_nll(set, std::exp(log_t)); };
  double lo = std::log(options.min_temperature);
  double hi = std::log(options.max_temperature);
  double best_u = 0.0;

  if (options.use_grid) {
    double best = std::numeric_limits<double>::infinity();
    const int points = std::max(options.grid_points, 2);
    for (int i = 0; i < points; ++i) {
      const double u = lo + (hi - lo) * i / (points - 1);
      const double f = nll(u);
      if (f < best) {
        best = f;
        best_u = u;
      }
    }
  } else {
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - ratio * (hi - lo);
    double d = lo + ratio * (hi - lo);
    double fc = nll(c);
    double fd = nll(d);
    while (hi - lo > options.tolerance) {
      if (fc < fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - ratio * (hi - lo);
        fc = nll(c);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + ratio * (hi - lo);
        fd = nll(d);
      }
    }
    best_u = 0.5 * (lo + hi);
  }
  if (nll(0.0) <= nll(best_u)) return {1.0};
  return {std::exp(best_u)};
}

TemperatureScaler fit_temperature(const Translator& model, std::span<const EncodedPair> pairs,
                                  const TemperatureFitOptions& options) {
  return fit_temperature(teacher_forced_set(model, pairs), options);
}

RejectionCurve rejection_curve(std::span<const ScoredItem> items, Aggregate aggregate,
                               std::span<const double> grid, std::string metric) {
  if (items.empty()) throw InvalidArgument("rejection curve needs at least one item");
  for (double r : grid) {
    if (!(r >= 0.0 && r < 1.0)) throw InvalidArgument("rejection fractions must lie in [0, 1)");
  }
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&items](std::size_t a, std::size_t b) {
    return items[a].confidence > items[b].confidence;
  });
  RejectionCurve curve;
  curve.metric = std::move(metric);
  const double n = static_cast<double>(items.size());
  for (double r : grid) {
    auto keep = static_cast<std::size_t>(std::ceil((1.0 - r) * n - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, items.size());
    double total = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
      const double v = items[order[i]].value;
      total += aggregate == Aggregate::kMae ? std::abs(v) : v;
    }
    curve.points.push_back({r, keep, total / static_cast<double>(keep)});
  }
  return curve;
}

std::vector<double> default_rejection_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 20; ++i) grid.push_back(0.05 * i);
  return grid;
}

}  // namespace quill

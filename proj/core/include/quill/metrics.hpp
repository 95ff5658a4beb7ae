#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quill/pairs.hpp"

namespace quill {

// Levenshtein distance with unit costs over Unicode scalar values.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);
std::size_t edit_distance(std::string_view a, std::string_view b);

// ED / max(|a|, |b|); 0 when both are empty.
double normalized_ed(std::string_view a, std::string_view b);

struct TextStats {
  std::size_t words = 0;
  std::size_t sentences = 0;
  std::size_t syllables = 0;
  std::size_t long_words = 0;  // more than 6 characters

  friend bool operator==(const TextStats&, const TextStats&) = default;
};

// Words are whitespace-separated tokens with leading/trailing punctuation
// stripped. Sentences are maximal runs of '.', '!' or '?' (at least one
// when there are words). Syllables are maximal runs of a/e/i/o/u/y per
// word, at least one per word.
TextStats text_stats(std::string_view text);

inline constexpr double kFleschKincaidMin = -3.4;
inline constexpr double kFleschKincaidMax = 36.0;  // twice the "very complex" threshold 18
inline constexpr double kLixMin = 0.0;
inline constexpr double kLixMax = 110.0;           // twice the "very complex" threshold 55

double clip_flesch_kincaid(double raw);
double clip_lix(double raw);

// Flesch-Kincaid grade level, clipped. Zero words yields the lower bound.
double flesch_kincaid(const TextStats& stats);
// LIX readability index, clipped. Zero words yields 0.
double lix(const TextStats& stats);

// Mean absolute error. Throws InvalidArgument on empty or unequal lists.
double mae(std::span<const double> predictions, std::span<const double> truths);

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double sem = 0.0;  // sample std / sqrt(n); 0 for n = 1
};
Summary summarize(std::span<const double> values);

struct PairMetrics {
  double ed = 0.0;
  double ned = 0.0;
  double fk_pred = 0.0;
  double fk_true = 0.0;
  double lix_pred = 0.0;
  double lix_true = 0.0;
};

struct MetricsReport {
  std::size_t n = 0;
  Summary ed;
  Summary ned;
  Summary fk_error;   // |FK(prediction) - FK(teacher)|; mean is the MAE
  Summary lix_error;  // |LIX(prediction) - LIX(teacher)|
};

struct Evaluation {
  MetricsReport report;
  std::vector<PairMetrics> per_pair;
};

// Compares each prediction with its pair's teacher text.
Evaluation evaluate(std::span<const TextPair> pairs, std::span<const std::string> predictions);

PairMetrics pair_metrics(std::string_view teacher, std::string_view prediction);

}  // namespace quill

#include "quill/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>

#include "quill/error.hpp"
#include "quill/utf8.hpp"

namespace quill {

namespace {

// Two-row dynamic programme; used when the shorter string exceeds 64.
std::size_t edit_distance_rows(std::u32string_view a, std::u32string_view b) {
  std::vector<std::size_t> prev(a.size() + 1);
  std::vector<std::size_t> cur(a.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t j = 1; j <= b.size(); ++j) {
    cur[0] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
      const std::size_t sub = prev[i - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[i] = std::min({prev[i] + 1, cur[i - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[a.size()];
}

// Bit-parallel Levenshtein distance (Myers 1999, Hyyro 2001) for a
// pattern of at most 64 characters.
std::size_t edit_distance_bits(std::u32string_view pattern, std::u32string_view text) {
  const std::size_t m = pattern.size();
  std::array<std::uint64_t, 128> ascii{};
  std::vector<std::pair<char32_t, std::uint64_t>> other;
  for (std::size_t i = 0; i < m; ++i) {
    const char32_t c = pattern[i];
    const std::uint64_t bit = std::uint64_t{1} << i;
    if (c < 128) {
      ascii[c] |= bit;
    } else {
      auto it = std::find_if(other.begin(), other.end(), [c](const auto& e) { return e.first == c; });
      if (it == other.end()) {
        other.emplace_back(c, bit);
      } else {
        it->second |= bit;
      }
    }
  }
  const auto peq = [&](char32_t c) -> std::uint64_t {
    if (c < 128) return ascii[c];
    for (const auto& [k, mask] : other) {
      if (k == c) return mask;
    }
    return 0;
  };

  const std::uint64_t last = std::uint64_t{1} << (m - 1);
  std::uint64_t pv = m == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << m) - 1;
  std::uint64_t mv = 0;
  std::size_t score = m;
  for (char32_t c : text) {
    const std::uint64_t eq = peq(c);
    const std::uint64_t xv = eq | mv;
    const std::uint64_t xh = (((eq & pv) + pv) ^ pv) | eq;
    std::uint64_t ph = mv | ~(xh | pv);
    std::uint64_t mh = pv & xh;
    if (ph & last) ++score;
    if (mh & last) --score;
    ph = (ph << 1) | 1;
    mh <<= 1;
    pv = mh | ~(xv | ph);
    mv = ph & xv;
  }
  return score;
}

bool is_vowel(char32_t c) {
  switch (to_lower(c)) {
    case U'a':
    case U'e':
    case U'i':
    case U'o':
    case U'u':
    case U'y':
      return true;
    default:
      return false;
  }
}

bool is_terminator(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

}  // namespace

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  if (a.size() > b.size()) std::swap(a, b);
  if (a.empty()) return b.size();
  if (a.size() <= 64) return edit_distance_bits(a, b);
  return edit_distance_rows(a, b);
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  return edit_distance(std::u32string_view(utf8_decode(a)), std::u32string_view(utf8_decode(b)));
}

double normalized_ed(std::string_view a, std::string_view b) {
  const std::u32string ua = utf8_decode(a);
  const std::u32string ub = utf8_decode(b);
  const std::size_t longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(edit_distance(std::u32string_view(ua), std::u32string_view(ub))) /
         static_cast<double>(longest);
}

TextStats text_stats(std::string_view text) {
  const std::u32string t = utf8_decode(text);
  TextStats stats;

  std::size_t runs = 0;
  bool in_run = false;
  for (char32_t c : t) {
    if (is_terminator(c)) {
      if (!in_run) ++runs;
      in_run = true;
    } else {
      in_run = false;
    }
  }

  std::size_t i = 0;
  while (i < t.size()) {
    while (i < t.size() && is_whitespace(t[i])) ++i;
    std::size_t j = i;
    while (j < t.size() && !is_whitespace(t[j])) ++j;
    std::size_t begin = i;
    std::size_t end = j;
    while (begin < end && is_punctuation(t[begin])) ++begin;
    while (end > begin && is_punctuation(t[end - 1])) --end;
    if (begin < end) {
      ++stats.words;
      if (end - begin > 6) ++stats.long_words;
      std::size_t groups = 0;
      bool in_vowels = false;
      for (std::size_t k = begin; k < end; ++k) {
        if (is_vowel(t[k])) {
          if (!in_vowels) ++groups;
          in_vowels = true;
        } else {
          in_vowels = false;
        }
      }
      stats.syllables += std::max<std::size_t>(groups, 1);
    }
    i = j;
  }
  stats.sentences = stats.words > 0 ? std::max<std::size_t>(runs, 1) : 0;
  return stats;
}

double clip_flesch_kincaid(double raw) { return std::clamp(raw, kFleschKincaidMin, kFleschKincaidMax); }

double clip_lix(double raw) { return std::clamp(raw, kLixMin, kLixMax); }

double flesch_kincaid(const TextStats& s) {
  if (s.words == 0) return kFleschKincaidMin;
  const double words = static_cast<double>(s.words);
  const double raw = 0.39 * (words / static_cast<double>(s.sentences)) +
                     11.8 * (static_cast<double>(s.syllables) / words) - 15.59;
  return clip_flesch_kincaid(raw);
}

double lix(const TextStats& s) {
  if (s.words == 0) return kLixMin;
  const double words = static_cast<double>(s.words);
  const double raw = words / static_cast<double>(s.sentences) +
                     100.0 * static_cast<double>(s.long_words) / words;
  return clip_lix(raw);
}

double mae(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) {
    throw InvalidArgument("mae: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(truths.size()) + " truths");
  }
  if (predictions.empty()) throw InvalidArgument("mae of empty lists");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) total += std::abs(predictions[i] - truths[i]);
  return total / static_cast<double>(predictions.size());
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("summarize of an empty list");
  const double n = static_cast<double>(values.size());
  Summary s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

PairMetrics pair_metrics(std::string_view teacher, std::string_view prediction) {
  PairMetrics m;
  m.ed = static_cast<double>(edit_distance(teacher, prediction));
  m.ned = normalized_ed(teacher, prediction);
  const TextStats pred = text_stats(prediction);
  const TextStats truth = text_stats(teacher);
  m.fk_pred = flesch_kincaid(pred);
  m.fk_true = flesch_kincaid(truth);
  m.lix_pred = lix(pred);
  m.lix_true = lix(truth);
  return m;
}

Evaluation evaluate(std::span<const TextPair> pairs, std::span<const std::string> predictions) {
  if (pairs.size() != predictions.size()) {
    throw InvalidArgument("evaluate: " + std::to_string(predictions.size()) +
                          " predictions for " + std::to_string(pairs.size()) + " pairs");
  }
  if (pairs.empty()) throw InvalidArgument("evaluate: no pairs");
  Evaluation out;
  std::vector<double> ed, ned, fk, lx;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const PairMetrics m = pair_metrics(pairs[i].teacher, predictions[i]);
    ed.push_back(m.ed);
    ned.push_back(m.ned);
    fk.push_back(std::abs(m.fk_pred - m.fk_true));
    lx.push_back(std::abs(m.lix_pred - m.lix_true));
    out.per_pair.push_back(m);
  }
  out.report.n = pairs.size();
  out.report.ed = summarize(ed);
  out.report.ned = summarize(ned);
  out.report.fk_error = summarize(fk);
  out.report.lix_error = summarize(lx);
  return out;
}

}  // namespace quill

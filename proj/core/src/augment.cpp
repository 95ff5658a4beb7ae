#include "quill/augment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "quill/error.hpp"
#include "quill/utf8.hpp"

namespace quill {

namespace {

bool is_lowercase_key(const std::u32string& key) {
  return std::all_of(key.begin(), key.end(), [](char32_t c) { return to_lower(c) == c; });
}

std::u32string lowercase(std::u32string_view s) {
  std::u32string out(s);
  for (char32_t& c : out) c = to_lower(c);
  return out;
}

// Applies misspellings to `core`, matching bigram keys before letter keys.
std::u32string misspell(const std::u32string& core, const AugmentConfig& config, Rng& rng) {
  const auto& table = config.confusion_table;
  std::u32string out;
  std::size_t i = 0;
  while (i < core.size()) {
    auto match = table.end();
    std::size_t unit = 0;
    if (i + 1 < core.size()) {
      match = table.find(lowercase(core.substr(i, 2)));
      if (match != table.end()) unit = 2;
    }
    if (match == table.end()) {
      match = table.find(std::u32string(1, to_lower(core[i])));
      if (match != table.end()) unit = 1;
    }
    if (match == table.end() || match->second.empty()) {
      out.push_back(core[i]);
      ++i;
      continue;
    }
    if (rng.bernoulli(config.p_misspell)) {
      std::u32string replacement = match->second[rng.below(match->second.size())];
      if (to_lower(core[i]) != core[i] && !replacement.empty()) {
        replacement[0] = to_upper(replacement[0]);
      }
      out += replacement;
    } else {
      out.append(core, i, unit);
    }
    i += unit;
  }
  return out;
}

std::u32string corrupt_core(const std::u32string& core, const AugmentConfig& config, Rng& rng) {
  std::u32string word = core;
  if (rng.bernoulli(config.p_shorten_to_initial)) {
    word.resize(1);
  } else if (word.size() >= 4 && rng.bernoulli(config.p_cut_ending)) {
    const std::size_t max_cut =
        std::min<std::size_t>(static_cast<std::size_t>(config.cut_ending_max_chars), word.size() - 1);
    const std::size_t cut = 1 + static_cast<std::size_t>(rng.below(max_cut));
    word.resize(word.size() - cut);
  }
  word = misspell(word, config, rng);

  std::u32string kept;
  for (char32_t c : word) {
    if (is_letter(c) && rng.bernoulli(config.p_letter_delete)) continue;
    kept.push_back(c);
  }
  if (kept.empty()) kept.push_back(core.front());
  return kept;
}

std::u32string corrupt_word32(const std::u32string& word, const AugmentConfig& config, Rng& rng) {
  std::size_t begin = 0;
  std::size_t end = word.size();
  while (begin < end && is_punctuation(word[begin])) ++begin;
  while (end > begin && is_punctuation(word[end - 1])) --end;
  if (begin == end) return word;
  return word.substr(0, begin) + corrupt_core(word.substr(begin, end - begin), config, rng) +
         word.substr(end);
}

}  // namespace

void AugmentConfig::validate() const {
  const std::pair<const char*, double> probs[] = {
      {"p_word_delete", p_word_delete},     {"p_letter_delete", p_letter_delete},
      {"p_shorten_to_initial", p_shorten_to_initial}, {"p_cut_ending", p_cut_ending},
      {"p_misspell", p_misspell},           {"p_space_delete", p_space_delete}};
  for (const auto& [name, p] : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidArgument(std::string("augment: ") + name + " must be in [0, 1]");
    }
  }
  if (cut_ending_max_chars < 1) throw InvalidArgument("augment: cut_ending_max_chars must be >= 1");
  for (const auto& [key, candidates] : confusion_table) {
    if (key.empty() || key.size() > 2 || !is_lowercase_key(key)) {
      throw InvalidArgument("augment: confusion key \"" + utf8_encode(key) +
                            "\" must be one or two lowercase characters");
    }
    for (const auto& c : candidates) {
      if (c.empty()) {
        throw InvalidArgument("augment: empty replacement for key \"" + utf8_encode(key) + "\"");
      }
    }
  }
}

AugmentConfig AugmentConfig::defaults() {
  AugmentConfig config;
  config.confusion_table = parse_confusion_table(default_confusion_table_text());
  return config;
}

AugmentConfig AugmentConfig::zero() {
  AugmentConfig config;
  config.p_word_delete = 0.0;
  config.p_letter_delete = 0.0;
  config.p_shorten_to_initial = 0.0;
  config.p_cut_ending = 0.0;
  config.p_misspell = 0.0;
  config.p_space_delete = 0.0;
  return config;
}

ConfusionTable parse_confusion_table(std::string_view text) {
  ConfusionTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw ParseError(line_number, "expected \"key<TAB>replacement\"");
    }
    table[utf8_decode(line.substr(0, tab))].push_back(utf8_decode(line.substr(tab + 1)));
  }
  return table;
}

ConfusionTable load_confusion_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open confusion table " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_confusion_table(buffer.str());
}

std::string corrupt_word(std::string_view word, const AugmentConfig& config, Rng& rng) {
  const std::u32string w = utf8_decode(word);
  if (w.empty()) return std::string(word);
  return utf8_encode(corrupt_word32(w, config, rng));
}

std::string corrupt_text(std::string_view text, const AugmentConfig& config, Rng& rng) {
  const std::u32string t = utf8_decode(text);

  // Alternating layout: separators[0] word[0] separators[1] ... word[n-1] separators[n].
  std::vector<std::u32string> words;
  std::vector<std::u32string> separators(1);
  for (char32_t c : t) {
    if (is_whitespace(c)) {
      if (separators.size() == words.size()) separators.emplace_back();
      separators.back().push_back(c);
    } else {
      if (words.size() < separators.size()) words.emplace_back();
      words.back().push_back(c);
    }
  }
  if (separators.size() == words.size()) separators.emplace_back();
  if (words.empty()) return std::string(text);

  std::vector<bool> keep(words.size(), true);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (rng.bernoulli(config.p_word_delete)) keep[i] = false;
  }
  if (std::none_of(keep.begin(), keep.end(), [](bool k) { return k; })) keep[0] = true;

  std::u32string out = separators.front();
  bool first = true;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!keep[i]) continue;
    if (!first) {
      const std::u32string& sep = separators[i];
      if (!rng.bernoulli(config.p_space_delete)) out += sep;
    }
    out += corrupt_word32(words[i], config, rng);
    first = false;
  }
  out += separators.back();
  return utf8_encode(out);
}

std::vector<TextPair> generate_pairs(const std::vector<std::string>& clean_texts,
                                     const AugmentConfig& config) {
  config.validate();
  std::vector<TextPair> pairs;
  pairs.reserve(clean_texts.size());
  for (std::size_t i = 0; i < clean_texts.size(); ++i) {
    Rng rng(derive_seed(config.seed, i));
    pairs.push_back({corrupt_text(clean_texts[i], config, rng), clean_texts[i], std::nullopt});
  }
  return pairs;
}

}  // namespace quill

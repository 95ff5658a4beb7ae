#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "quill/pairs.hpp"
#include "quill/rng.hpp"

namespace quill {

// Maps a lowercase letter or bigram to its candidate misspellings.
using ConfusionTable = std::map<std::u32string, std::vector<std::u32string>>;

struct AugmentConfig {
  double p_word_delete = 0.03;
  double p_letter_delete = 0.03;
  double p_shorten_to_initial = 0.03;
  double p_cut_ending = 0.10;
  int cut_ending_max_chars = 3;
  double p_misspell = 0.10;
  double p_space_delete = 0.05;
  ConfusionTable confusion_table;
  std::uint64_t seed = 0;

  // Throws InvalidArgument if a probability is outside [0, 1], a key is not
  // one or two lowercase characters, or cut_ending_max_chars < 1.
  void validate() const;

  // Defaults with the bundled confusion table.
  static AugmentConfig defaults();
  // Every probability zero; corrupt_text is then the identity.
  static AugmentConfig zero();
};

std::string_view default_confusion_table_text();

// Reads "key<TAB>replacement" lines; blank lines and lines starting with
// '#' are skipped. Repeated keys accumulate candidates.
ConfusionTable parse_confusion_table(std::string_view text);
ConfusionTable load_confusion_table(const std::filesystem::path& path);

// Corrupts one whitespace-free word. Leading and trailing punctuation is
// kept as-is; the core applies at most one structural operation
// (shorten-to-initial, else cut-ending), then misspellings, then letter
// deletions. The core never becomes empty.
std::string corrupt_word(std::string_view word, const AugmentConfig& config, Rng& rng);

std::string corrupt_text(std::string_view text, const AugmentConfig& config, Rng& rng);

// One pair per clean text; text i uses the stream derive_seed(config.seed, i).
std::vector<TextPair> generate_pairs(const std::vector<std::string>& clean_texts,
                                     const AugmentConfig& config);

}  // namespace quill

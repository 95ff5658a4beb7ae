#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace quill {

// One student text and its conventional rendering.
struct TextPair {
  std::string student;
  std::string teacher;
  // Set on pairs whose teacher was replaced by inject_pair_noise; purely
  // diagnostic.
  std::optional<bool> noisy;

  friend bool operator==(const TextPair&, const TextPair&) = default;
};

// Pair files are UTF-8 JSON lines: {"student": ..., "teacher": ..., "noisy": bool?}.
std::vector<TextPair> load_pairs(const std::filesystem::path& path);
void save_pairs(const std::vector<TextPair>& pairs, const std::filesystem::path& path);

// Parses one line of a pair file; `line_number` is used in error messages.
TextPair parse_pair_line(const std::string& line, std::size_t line_number);
std::string format_pair_line(const TextPair& pair);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<TextPair> train;
  std::vector<TextPair> validation;
  std::vector<TextPair> test;
  std::uint64_t seed = 0;
};

// Shuffles with `seed` and partitions. Validation and test receive
// floor(ratio * N) pairs each; train receives the remainder.
DatasetSplit split_dataset(const std::vector<TextPair>& pairs, SplitRatios ratios,
                           std::uint64_t seed);

// Replaces the teacher of exactly ceil(rate * N) pairs with the teacher of
// a different pair and marks them noisy. The replaced subset is permuted by
// a random cyclic permutation, so no selected pair keeps its own teacher.
std::vector<TextPair> inject_pair_noise(const std::vector<TextPair>& pairs, double rate,
                                        std::uint64_t seed);

// Number of pairs inject_pair_noise will corrupt.
std::size_t noisy_pair_count(std::size_t n, double rate);

}  // namespace quill

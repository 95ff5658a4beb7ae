#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "quill/decoding.hpp"

namespace quill::testing {

// Textbook O(nm) Levenshtein table, kept deliberately naive.
std::size_t dp_edit_distance(const std::u32string& a, const std::u32string& b);

// Translator whose logits come from a function of the source and the
// decoder inputs fed so far (BOS first).
class StubTranslator final : public Translator {
 public:
  using Fn = std::function<std::vector<double>(std::span<const TokenId> source,
                                               std::span<const TokenId> prefix)>;
  StubTranslator(int vocab_size, int max_len, Fn fn)
      : vocab_size_(vocab_size), max_len_(max_len), fn_(std::move(fn)) {}

  int vocab_size() const override { return vocab_size_; }
  int max_target_len() const override { return max_len_; }
  std::unique_ptr<DecodeSession> start(std::span<const TokenId> source) const override;

 private:
  int vocab_size_;
  int max_len_;
  Fn fn_;
};

// Logits with `margin` on `hot` and 0 elsewhere.
std::vector<double> one_hot_logits(int vocab_size, TokenId hot, double margin = 1e4);

// Stub that spells `tokens` (then EOS) regardless of its input.
StubTranslator spelling_stub(int vocab_size, std::vector<TokenId> tokens, int max_len = 64);

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& path);

}  // namespace quill::testing

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace quill {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Character-level vocabulary. Ids 0..3 are the special tokens; the
// remaining ids follow the code points in ascending order, so the
// vocabulary depends only on the set of characters seen.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr int kNumSpecials = 4;

  Vocab() = default;
  explicit Vocab(std::vector<char32_t> characters);

  int size() const { return kNumSpecials + static_cast<int>(chars_.size()); }

  TokenId id_of(char32_t cp) const;
  // Returns 0 for special ids.
  char32_t char_of(TokenId id) const;
  static bool is_special(TokenId id) { return id >= 0 && id < kNumSpecials; }

  const std::vector<char32_t>& characters() const { return chars_; }

  friend bool operator==(const Vocab&, const Vocab&) = default;

 private:
  std::vector<char32_t> chars_;
  std::map<char32_t, TokenId> index_;
};

Vocab build_vocab(std::span<const std::string> corpus);

TokenSeq encode(std::string_view text, const Vocab& vocab);
std::string decode(std::span<const TokenId> seq, const Vocab& vocab);

// Encoder input: the characters of `text` followed by EOS.
TokenSeq encoder_input(std::string_view text, const Vocab& vocab);

// Decoder input (BOS + characters) and targets (characters + EOS).
struct DecoderSequences {
  TokenSeq input;
  TokenSeq target;
};
DecoderSequences decoder_sequences(std::string_view text, const Vocab& vocab);

// A student/teacher pair in model form.
struct EncodedPair {
  TokenSeq source;
  TokenSeq decoder_input;
  TokenSeq target;
};
EncodedPair encode_pair(std::string_view student, std::string_view teacher, const Vocab& vocab);

}  // namespace quill

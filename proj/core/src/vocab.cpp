#include "quill/vocab.hpp"

#include <algorithm>
#include <set>

#include "quill/utf8.hpp"

namespace quill {

Vocab::Vocab(std::vector<char32_t> characters) : chars_(std::move(characters)) {
  std::sort(chars_.begin(), chars_.end());
  chars_.erase(std::unique(chars_.begin(), chars_.end()), chars_.end());
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    index_.emplace(chars_[i], static_cast<TokenId>(kNumSpecials + i));
  }
}

TokenId Vocab::id_of(char32_t cp) const {
  const auto it = index_.find(cp);
  return it == index_.end() ? kUnk : it->second;
}

char32_t Vocab::char_of(TokenId id) const {
  if (id < kNumSpecials || id >= size()) return 0;
  return chars_[static_cast<std::size_t>(id - kNumSpecials)];
}

Vocab build_vocab(std::span<const std::string> corpus) {
  std::set<char32_t> seen;
  for (const auto& text : corpus) {
    for (char32_t cp : utf8_decode(text)) seen.insert(cp);
  }
  return Vocab(std::vector<char32_t>(seen.begin(), seen.end()));
}

TokenSeq encode(std::string_view text, const Vocab& vocab) {
  TokenSeq out;
  for (char32_t cp : utf8_decode(text)) out.push_back(vocab.id_of(cp));
  return out;
}

std::string decode(std::span<const TokenId> seq, const Vocab& vocab) {
  std::string out;
  for (TokenId id : seq) {
    if (Vocab::is_special(id) || id >= vocab.size() || id < 0) continue;
    utf8_append(out, vocab.char_of(id));
  }
  return out;
}

TokenSeq encoder_input(std::string_view text, const Vocab& vocab) {
  TokenSeq seq = encode(text, vocab);
  seq.push_back(Vocab::kEos);
  return seq;
}

DecoderSequences decoder_sequences(std::string_view text, const Vocab& vocab) {
  const TokenSeq chars = encode(text, vocab);
  DecoderSequences out;
  out.input.reserve(chars.size() + 1);
  out.input.push_back(Vocab::kBos);
  out.input.insert(out.input.end(), chars.begin(), chars.end());
  out.target = chars;
  out.target.push_back(Vocab::kEos);
  return out;
}

EncodedPair encode_pair(std::string_view student, std::string_view teacher, const Vocab& vocab) {
  DecoderSequences dec = decoder_sequences(teacher, vocab);
  return {encoder_input(student, vocab), std::move(dec.input), std::move(dec.target)};
}

}  // namespace quill

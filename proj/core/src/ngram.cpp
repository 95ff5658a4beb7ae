#include "quill/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "quill/error.hpp"

namespace quill {

namespace {
constexpr char kMagic[4] = {'N', 'G', 'L', 'M'};
}

NGramModel::NGramModel(int order, double k, int vocab_size, TokenId bos)
    : order_(order), k_(k), vocab_size_(vocab_size), bos_(bos) {
  if (order < 1) throw InvalidArgument("n-gram order must be >= 1");
  if (!(k > 0.0) || !std::isfinite(k)) throw InvalidArgument("n-gram smoothing constant must be > 0");
  if (vocab_size < 1) throw InvalidArgument("n-gram vocabulary size must be >= 1");
  tables_.resize(static_cast<std::size_t>(order));
}

void NGramModel::add_sequence(std::span<const TokenId> padded) {
  for (std::size_t i = static_cast<std::size_t>(order_ - 1); i < padded.size(); ++i) {
    const TokenId w = padded[i];
    if (w < 0 || w >= vocab_size_) {
      throw InvalidArgument("n-gram token id " + std::to_string(w) + " outside vocabulary");
    }
    for (int m = 1; m <= order_; ++m) {
      TokenSeq history(padded.begin() + static_cast<long>(i) - (m - 1),
                       padded.begin() + static_cast<long>(i));
      HistoryCounts& counts = tables_[static_cast<std::size_t>(m - 1)][history];
      ++counts.total;
      ++counts.next[w];
    }
  }
}

double NGramModel::prob_token(TokenId token, std::span<const TokenId> history) const {
  double p = 1.0 / static_cast<double>(vocab_size_);
  TokenSeq h;
  for (int m = 1; m <= order_; ++m) {
    const std::size_t need = static_cast<std::size_t>(m - 1);
    h.assign(need, bos_);
    const std::size_t have = std::min(need, history.size());
    std::copy(history.end() - static_cast<long>(have), history.end(),
              h.end() - static_cast<long>(have));
    const auto& table = tables_[need];
    double c_hw = 0.0;
    double c_h = 0.0;
    if (const auto it = table.find(h); it != table.end()) {
      c_h = static_cast<double>(it->second.total);
      if (const auto jt = it->second.next.find(token); jt != it->second.next.end()) {
        c_hw = static_cast<double>(jt->second);
      }
    }
    p = (c_hw + k_ * p) / (c_h + k_);
  }
  return p;
}

double NGramModel::log_prob_token(TokenId token, std::span<const TokenId> history) const {
  return std::log(prob_token(token, history));
}

double NGramModel::log_prob_seq(std::span<const TokenId> seq) const {
  double total = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) total += log_prob_token(seq[i], seq.first(i));
  return total;
}

TokenSeq lm_padded(std::span<const TokenId> content, int order, TokenId bos, TokenId eos) {
  TokenSeq out(static_cast<std::size_t>(std::max(order - 1, 0)), bos);
  out.insert(out.end(), content.begin(), content.end());
  out.push_back(eos);
  return out;
}

NGramModel fit_ngram(std::span<const TokenSeq> sequences, int order, double k, int vocab_size,
                     TokenId bos) {
  NGramModel model(order, k, vocab_size, bos);
  for (const auto& seq : sequences) model.add_sequence(seq);
  return model;
}

NGramModel fit_ngram_on_texts(std::span<const std::string> texts, const Vocab& vocab, int order,
                              double k) {
  NGramModel model(order, k, vocab.size(), Vocab::kBos);
  for (const auto& text : texts) model.add_sequence(lm_padded(encode(text, vocab), order));
  return model;
}

double lm_log_prob_text(const NGramModel& model, std::string_view text, const Vocab& vocab) {
  TokenSeq seq = encode(text, vocab);
  seq.push_back(Vocab::kEos);
  return model.log_prob_seq(seq);
}

void save_ngram(const NGramModel& model, const Vocab& vocab, const std::filesystem::path& path) {
  if (vocab.size() != model.vocab_size()) {
    throw InvalidArgument("n-gram vocabulary size does not match the supplied vocabulary");
  }
  detail::BinaryWriter w;
  w.put_bytes(kMagic, 4);
  w.put(kNGramFormatVersion);
  w.put(static_cast<std::uint32_t>(model.order()));
  w.put(model.smoothing());
  w.put(static_cast<std::uint32_t>(model.vocab_size()));
  w.put(static_cast<std::int32_t>(model.bos()));
  w.put(static_cast<std::uint32_t>(vocab.characters().size()));
  for (char32_t c : vocab.characters()) w.put(static_cast<std::uint32_t>(c));
  for (int m = 1; m <= model.order(); ++m) {
    const auto& table = model.counts(m);
    w.put(static_cast<std::uint64_t>(table.size()));
    for (const auto& [history, counts] : table) {
      for (TokenId t : history) w.put(static_cast<std::int32_t>(t));
      w.put(counts.total);
      w.put(static_cast<std::uint32_t>(counts.next.size()));
      for (const auto& [token, count] : counts.next) {
        w.put(static_cast<std::int32_t>(token));
        w.put(count);
      }
    }
  }
  w.write_to(path);
}

LoadedNGram load_ngram(const std::filesystem::path& path) {
  auto r = detail::BinaryReader::from_file(path);
  if (r.remaining() < 4 || r.get_bytes(4) != std::string(kMagic, 4)) {
    throw FormatVersionError(path.string() + ": not an n-gram model file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kNGramFormatVersion) {
    throw FormatVersionError(path.string() + ": unsupported n-gram format version " +
                             std::to_string(version));
  }
  const auto order = static_cast<int>(r.get<std::uint32_t>());
  const double k = r.get<double>();
  const auto vocab_size = static_cast<int>(r.get<std::uint32_t>());
  const auto bos = static_cast<TokenId>(r.get<std::int32_t>());
  const auto n_chars = r.get<std::uint32_t>();
  std::vector<char32_t> chars;
  for (std::uint32_t i = 0; i < n_chars; ++i) chars.push_back(r.get<std::uint32_t>());
  Vocab vocab(std::move(chars));
  if (vocab.size() != vocab_size) {
    throw ShapeMismatchError(path.string() + ": vocabulary section has " +
                             std::to_string(vocab.size()) + " ids, header says " +
                             std::to_string(vocab_size));
  }
  NGramModel model(order, k, vocab_size, bos);
  for (int m = 1; m <= order; ++m) {
    auto& table = model.mutable_counts(m);
    const auto n_hist = r.get<std::uint64_t>();
    for (std::uint64_t h = 0; h < n_hist; ++h) {
      TokenSeq history(static_cast<std::size_t>(m - 1));
      for (auto& t : history) t = r.get<std::int32_t>();
      HistoryCounts counts;
      counts.total = r.get<std::uint64_t>();
      const auto n_next = r.get<std::uint32_t>();
      std::uint64_t sum = 0;
      for (std::uint32_t j = 0; j < n_next; ++j) {
        const TokenId token = r.get<std::int32_t>();
        const auto count = r.get<std::uint64_t>();
        if (token < 0 || token >= vocab_size) {
          throw ShapeMismatchError(path.string() + ": token id outside vocabulary");
        }
        counts.next[token] = count;
        sum += count;
      }
      if (sum != counts.total) {
        throw ShapeMismatchError(path.string() + ": history total does not match its counts");
      }
      table.emplace(std::move(history), std::move(counts));
    }
  }
  return {std::move(model), std::move(vocab)};
}

}  // namespace quill

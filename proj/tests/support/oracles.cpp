#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace quill::testing {

std::size_t dp_edit_distance(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[a.size()][b.size()];
}

namespace {

class StubSession final : public DecodeSession {
 public:
  StubSession(const StubTranslator::Fn& fn, std::span<const TokenId> source)
      : fn_(fn), source_(source.begin(), source.end()) {}
  std::vector<double> next_logits(TokenId token) override {
    prefix_.push_back(token);
    return fn_(source_, prefix_);
  }

 private:
  const StubTranslator::Fn& fn_;
  TokenSeq source_;
  TokenSeq prefix_;
};

}  // namespace

std::unique_ptr<DecodeSession> StubTranslator::start(std::span<const TokenId> source) const {
  return std::make_unique<StubSession>(fn_, source);
}

std::vector<double> one_hot_logits(int vocab_size, TokenId hot, double margin) {
  std::vector<double> z(static_cast<std::size_t>(vocab_size), 0.0);
  z[static_cast<std::size_t>(hot)] = margin;
  return z;
}

StubTranslator spelling_stub(int vocab_size, std::vector<TokenId> tokens, int max_len) {
  tokens.push_back(Vocab::kEos);
  return StubTranslator(vocab_size, max_len,
                        [vocab_size, tokens](std::span<const TokenId>, std::span<const TokenId> prefix) {
                          const std::size_t i = std::min(prefix.size() - 1, tokens.size() - 1);
                          return one_hot_logits(vocab_size, tokens[i]);
                        });
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("quill-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace quill::testing

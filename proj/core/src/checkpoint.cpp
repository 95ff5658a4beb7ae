#include "quill/checkpoint.hpp"

#include <string>

#include "binary_io.hpp"
#include "quill/error.hpp"

namespace quill {

namespace {
constexpr char kMagic[4] = {'S', 'Q', '2', 'Q'};
}

void save_checkpoint(const ModelParams<float>& params, const Vocab& vocab,
                     const std::filesystem::path& path) {
  const ModelConfig& c = params.config;
  if (vocab.size() != c.vocab_size) {
    throw InvalidArgument("checkpoint vocabulary has " + std::to_string(vocab.size()) +
                          " ids but the model expects " + std::to_string(c.vocab_size));
  }
  detail::BinaryWriter w;
  w.put_bytes(kMagic, 4);
  w.put(kCheckpointFormatVersion);
  for (int v : {c.vocab_size, c.d_model, c.n_heads, c.n_encoder_layers, c.n_decoder_layers,
                c.d_ffn, c.max_seq_len}) {
    w.put(static_cast<std::uint32_t>(v));
  }
  w.put(c.dropout_rate);
  w.put(static_cast<std::uint32_t>(vocab.characters().size()));
  for (char32_t ch : vocab.characters()) w.put(static_cast<std::uint32_t>(ch));

  const auto list = tensors(params);
  w.put(static_cast<std::uint32_t>(list.size()));
  for (const auto& t : list) {
    w.put_string(t.name);
    w.put(static_cast<std::uint32_t>(t.rows));
    w.put(static_cast<std::uint32_t>(t.cols));
    for (float v : t.values()) w.put(v);
  }
  w.write_to(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto r = detail::BinaryReader::from_file(path);
  const std::string where = path.string() + ": ";
  if (r.remaining() < 4 || r.get_bytes(4) != std::string(kMagic, 4)) {
    throw FormatVersionError(where + "not a model checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointFormatVersion) {
    throw FormatVersionError(where + "unsupported checkpoint format version " +
                             std::to_string(version));
  }
  ModelConfig config;
  for (int* field : {&config.vocab_size, &config.d_model, &config.n_heads,
                     &config.n_encoder_layers, &config.n_decoder_layers, &config.d_ffn,
                     &config.max_seq_len}) {
    *field = static_cast<int>(r.get<std::uint32_t>());
  }
  config.dropout_rate = r.get<double>();
  try {
    config.validate();
  } catch (const InvalidArgument& e) {
    throw ShapeMismatchError(where + e.what());
  }
  const auto n_chars = r.get<std::uint32_t>();
  std::vector<char32_t> chars;
  for (std::uint32_t i = 0; i < n_chars; ++i) chars.push_back(r.get<std::uint32_t>());

  Checkpoint ckpt{zero_params<float>(config), Vocab(std::move(chars))};
  auto list = tensors(ckpt.params);
  const auto n_tensors = r.get<std::uint32_t>();
  if (n_tensors != list.size()) {
    throw ShapeMismatchError(where + "expected " + std::to_string(list.size()) +
                             " tensors, file has " + std::to_string(n_tensors));
  }
  for (auto& t : list) {
    const std::string name = r.get_string();
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (name != t.name || rows != t.rows || cols != t.cols) {
      throw ShapeMismatchError(where + "tensor " + name + " is " + std::to_string(rows) + "x" +
                               std::to_string(cols) + ", config requires " + t.name + " " +
                               std::to_string(t.rows) + "x" + std::to_string(t.cols));
    }
    for (float& v : t.values()) v = r.get<float>();
  }
  if (ckpt.vocab.size() != config.vocab_size) {
    throw ShapeMismatchError(where + "vocabulary section has " +
                             std::to_string(ckpt.vocab.size()) + " ids, config says " +
                             std::to_string(config.vocab_size));
  }
  if (r.remaining() != 0) throw ShapeMismatchError(where + "trailing bytes after last tensor");
  return ckpt;
}

}  // namespace quill

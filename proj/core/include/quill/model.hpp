#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "quill/rng.hpp"
#include "quill/vocab.hpp"

namespace quill {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;

// Row i holds the pre-softmax scores for target position i.
template <typename S>
using Logits = Matrix<S>;

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 128;
  int n_heads = 4;
  int n_encoder_layers = 2;
  int n_decoder_layers = 2;
  int d_ffn = 512;
  int max_seq_len = 256;
  double dropout_rate = 0.1;

  // Throws InvalidArgument when d_model is not divisible by n_heads, a
  // count is < 1, or dropout_rate is outside [0, 1).
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename S>
struct LayerNormParams {
  RowVector<S> scale;
  RowVector<S> shift;
};

template <typename S>
struct AttentionParams {
  Matrix<S> wq, wk, wv, wo;
  // No key bias: it shifts every score of a query row equally, which the
  // softmax ignores.
  RowVector<S> bq, bv, bo;
};

template <typename S>
struct FeedForwardParams {
  Matrix<S> w1;
  RowVector<S> b1;
  Matrix<S> w2;
  RowVector<S> b2;
};

template <typename S>
struct EncoderLayerParams {
  LayerNormParams<S> norm1;
  AttentionParams<S> self_attn;
  LayerNormParams<S> norm2;
  FeedForwardParams<S> ffn;
};

template <typename S>
struct DecoderLayerParams {
  LayerNormParams<S> norm1;
  AttentionParams<S> self_attn;
  LayerNormParams<S> norm2;
  AttentionParams<S> cross_attn;
  LayerNormParams<S> norm3;
  FeedForwardParams<S> ffn;
};

// Pre-layer-norm encoder-decoder Transformer. The token embedding is shared
// by encoder input, decoder input and the output projection.
template <typename S>
struct ModelParams {
  ModelConfig config;
  Matrix<S> token_embedding;     // K x d_model
  Matrix<S> encoder_positions;   // max_seq_len x d_model
  Matrix<S> decoder_positions;   // max_seq_len x d_model
  std::vector<EncoderLayerParams<S>> encoder;
  std::vector<DecoderLayerParams<S>> decoder;
  LayerNormParams<S> encoder_norm;
  LayerNormParams<S> decoder_norm;
  RowVector<S> output_bias;      // K
};

enum class TensorRole { kWeight, kBias, kNormScale, kNormShift };

template <typename T>
struct TensorRef {
  std::string name;
  T* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  TensorRole role = TensorRole::kWeight;

  Eigen::Index size() const { return rows * cols; }
  std::span<T> values() const { return {data, static_cast<std::size_t>(size())}; }
};

// Every tensor of `params` in a fixed order with a stable dotted name.
template <typename S>
std::vector<TensorRef<S>> tensors(ModelParams<S>& params);
template <typename S>
std::vector<TensorRef<const S>> tensors(const ModelParams<S>& params);

// All tensors allocated with their configured shapes and set to zero.
template <typename S>
ModelParams<S> zero_params(const ModelConfig& config);

// Weights ~ U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases and
// norm offsets 0; norm scales 1.
template <typename S>
ModelParams<S> init_params(const ModelConfig& config, std::uint64_t seed);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params);

std::size_t parameter_count(const ModelConfig& config);

enum class Mode { kTrain, kEval };

// Activations recorded by a forward pass for use by backward().
template <typename S>
struct ForwardTape;

template <typename S>
class TapeHandle {
 public:
  TapeHandle();
  ~TapeHandle();
  TapeHandle(TapeHandle&&) noexcept;
  TapeHandle& operator=(TapeHandle&&) noexcept;

  ForwardTape<S>& get() { return *tape_; }
  const ForwardTape<S>& get() const { return *tape_; }

 private:
  std::unique_ptr<ForwardTape<S>> tape_;
};

// Logits for p(y_i | x, y_{1:i-1}), one row per decoder input position.
// Train mode applies dropout using `rng` (required); eval mode is
// deterministic. Throws InvalidArgument if either sequence is longer than
// max_seq_len or empty.
template <typename S>
Logits<S> forward(const ModelParams<S>& params, std::span<const TokenId> source,
                  std::span<const TokenId> decoder_input, Mode mode, Rng* rng = nullptr,
                  TapeHandle<S>* tape = nullptr);

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
template <typename S>
void backward(const ModelParams<S>& params, const TapeHandle<S>& tape,
              const Logits<S>& dlogits, ModelParams<S>& grads);

// Eval-mode decoder that caches encoder memory and per-layer keys/values
// so that each step costs one row of work.
template <typename S>
class IncrementalDecoder {
 public:
  IncrementalDecoder(const ModelParams<S>& params, std::span<const TokenId> source);

  // Appends `token` at the next decoder position and returns the logits
  // for the token that follows it.
  RowVector<S> step(TokenId token);

  int position() const { return position_; }

 private:
  struct LayerCache {
    Matrix<S> self_keys, self_values;
    Matrix<S> cross_keys, cross_values;
  };

  const ModelParams<S>* params_;
  std::vector<LayerCache> layers_;
  int position_ = 0;
};

}  // namespace quill

#include "quill/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "quill/error.hpp"

namespace quill {

void ModelConfig::validate() const {
  if (vocab_size < 1) throw InvalidArgument("model config: vocab_size must be >= 1");
  if (d_model < 1 || n_heads < 1 || n_encoder_layers < 1 || n_decoder_layers < 1 ||
      d_ffn < 1 || max_seq_len < 1) {
    throw InvalidArgument("model config: all sizes and layer counts must be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw InvalidArgument("model config: d_model (" + std::to_string(d_model) +
                          ") is not divisible by n_heads (" + std::to_string(n_heads) + ")");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidArgument("model config: dropout_rate must be in [0, 1)");
  }
}

namespace {

using Eigen::Index;

constexpr double kNormEps = 1e-5;

template <typename S>
using Mat = Matrix<S>;
template <typename S>
using Vec = RowVector<S>;
template <typename S>
using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------- tensors

template <typename T, typename P>
std::vector<TensorRef<T>> collect_tensors(P& p) {
  std::vector<TensorRef<T>> out;
  auto add = [&out](std::string name, auto& m, TensorRole role) {
    out.push_back(TensorRef<T>{std::move(name), m.data(), m.rows(), m.cols(), role});
  };
  auto add_norm = [&add](const std::string& prefix, auto& n) {
    add(prefix + ".scale", n.scale, TensorRole::kNormScale);
    add(prefix + ".shift", n.shift, TensorRole::kNormShift);
  };
  auto add_attn = [&add](const std::string& prefix, auto& a) {
    add(prefix + ".wq", a.wq, TensorRole::kWeight);
    add(prefix + ".bq", a.bq, TensorRole::kBias);
    add(prefix + ".wk", a.wk, TensorRole::kWeight);
    add(prefix + ".wv", a.wv, TensorRole::kWeight);
    add(prefix + ".bv", a.bv, TensorRole::kBias);
    add(prefix + ".wo", a.wo, TensorRole::kWeight);
    add(prefix + ".bo", a.bo, TensorRole::kBias);
  };
  auto add_ffn = [&add](const std::string& prefix, auto& f) {
    add(prefix + ".w1", f.w1, TensorRole::kWeight);
    add(prefix + ".b1", f.b1, TensorRole::kBias);
    add(prefix + ".w2", f.w2, TensorRole::kWeight);
    add(prefix + ".b2", f.b2, TensorRole::kBias);
  };

  add("token_embedding", p.token_embedding, TensorRole::kWeight);
  add("encoder_positions", p.encoder_positions, TensorRole::kWeight);
  add("decoder_positions", p.decoder_positions, TensorRole::kWeight);
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    const std::string prefix = "encoder." + std::to_string(l);
    add_norm(prefix + ".norm1", p.encoder[l].norm1);
    add_attn(prefix + ".self_attn", p.encoder[l].self_attn);
    add_norm(prefix + ".norm2", p.encoder[l].norm2);
    add_ffn(prefix + ".ffn", p.encoder[l].ffn);
  }
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    const std::string prefix = "decoder." + std::to_string(l);
    add_norm(prefix + ".norm1", p.decoder[l].norm1);
    add_attn(prefix + ".self_attn", p.decoder[l].self_attn);
    add_norm(prefix + ".norm2", p.decoder[l].norm2);
    add_attn(prefix + ".cross_attn", p.decoder[l].cross_attn);
    add_norm(prefix + ".norm3", p.decoder[l].norm3);
    add_ffn(prefix + ".ffn", p.decoder[l].ffn);
  }
  add_norm("encoder_norm", p.encoder_norm);
  add_norm("decoder_norm", p.decoder_norm);
  add("output_bias", p.output_bias, TensorRole::kBias);
  return out;
}

template <typename S>
LayerNormParams<S> zero_norm(int d) {
  return {Vec<S>::Zero(d), Vec<S>::Zero(d)};
}

template <typename S>
AttentionParams<S> zero_attention(int d) {
  return {Mat<S>::Zero(d, d), Mat<S>::Zero(d, d), Mat<S>::Zero(d, d), Mat<S>::Zero(d, d),
          Vec<S>::Zero(d),    Vec<S>::Zero(d),    Vec<S>::Zero(d)};
}

template <typename S>
FeedForwardParams<S> zero_ffn(int d, int f) {
  return {Mat<S>::Zero(d, f), Vec<S>::Zero(f), Mat<S>::Zero(f, d), Vec<S>::Zero(d)};
}

// ---------------------------------------------------------------- dropout

template <typename S>
Mat<S> dropout_mask(Index rows, Index cols, double rate, Rng& rng) {
  Mat<S> mask(rows, cols);
  const S keep = static_cast<S>(1.0 / (1.0 - rate));
  for (Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.uniform() < rate ? S(0) : keep;
  }
  return mask;
}

// Draws a mask into `mask` and applies it to `x` when dropout is active.
template <typename S>
void apply_dropout(Mat<S>& x, double rate, Rng* rng, Mat<S>& mask) {
  if (rng == nullptr || rate <= 0.0) return;
  mask = dropout_mask<S>(x.rows(), x.cols(), rate, *rng);
  x.array() *= mask.array();
}

template <typename S>
void apply_mask_grad(Mat<S>& grad, const Mat<S>& mask) {
  if (mask.size() != 0) grad.array() *= mask.array();
}

// ---------------------------------------------------------------- layer norm

template <typename S>
struct LayerNormCache {
  Mat<S> normalized;
  Col<S> inv_std;
};

template <typename S>
Mat<S> layer_norm(const LayerNormParams<S>& p, const Mat<S>& x, LayerNormCache<S>* cache) {
  const Index rows = x.rows();
  const Index d = x.cols();
  Mat<S> out(rows, d);
  if (cache != nullptr) {
    cache->normalized.resize(rows, d);
    cache->inv_std.resize(rows);
  }
  for (Index r = 0; r < rows; ++r) {
    const S mean = x.row(r).mean();
    const S var = (x.row(r).array() - mean).square().mean();
    const S inv = S(1) / std::sqrt(var + static_cast<S>(kNormEps));
    const Vec<S> xhat = (x.row(r).array() - mean) * inv;
    out.row(r) = xhat.cwiseProduct(p.scale) + p.shift;
    if (cache != nullptr) {
      cache->normalized.row(r) = xhat;
      cache->inv_std(r) = inv;
    }
  }
  return out;
}

template <typename S>
Mat<S> layer_norm_backward(const LayerNormParams<S>& p, LayerNormParams<S>& g,
                           const LayerNormCache<S>& c, const Mat<S>& dy) {
  const Index d = dy.cols();
  g.scale += dy.cwiseProduct(c.normalized).colwise().sum();
  g.shift += dy.colwise().sum();
  Mat<S> dx(dy.rows(), d);
  for (Index r = 0; r < dy.rows(); ++r) {
    const Vec<S> dxhat = dy.row(r).cwiseProduct(p.scale);
    const S sum = dxhat.sum();
    const S dot = dxhat.dot(c.normalized.row(r));
    dx.row(r) = (c.inv_std(r) / static_cast<S>(d)) *
                (static_cast<S>(d) * dxhat.array() - sum - c.normalized.row(r).array() * dot)
                    .matrix();
  }
  return dx;
}

// ---------------------------------------------------------------- attention

template <typename S>
struct AttentionCache {
  Mat<S> query_in;
  Mat<S> kv_in;
  Mat<S> q, k, v;
  std::vector<Mat<S>> probs;
  std::vector<Mat<S>> masks;  // empty without dropout
  Mat<S> context;
};

template <typename S>
void softmax_rows(Mat<S>& scores, bool causal) {
  for (Index i = 0; i < scores.rows(); ++i) {
    const Index width = causal ? i + 1 : scores.cols();
    auto row = scores.row(i).head(width);
    const S mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    row /= row.sum();
    if (width < scores.cols()) scores.row(i).tail(scores.cols() - width).setZero();
  }
}

template <typename S>
Mat<S> attention(const AttentionParams<S>& p, const Mat<S>& xq, const Mat<S>& xkv, int heads,
                 bool causal, double rate, Rng* rng, AttentionCache<S>* cache) {
  Mat<S> q = (xq * p.wq).rowwise() + p.bq;
  Mat<S> k = xkv * p.wk;
  Mat<S> v = (xkv * p.wv).rowwise() + p.bv;
  const Index d = q.cols();
  const Index dh = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  Mat<S> context(xq.rows(), d);
  if (cache != nullptr) {
    cache->probs.assign(heads, Mat<S>());
    cache->masks.assign(rng != nullptr && rate > 0.0 ? heads : 0, Mat<S>());
  }
  for (int h = 0; h < heads; ++h) {
    Mat<S> scores = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
    softmax_rows(scores, causal);
    if (cache != nullptr) cache->probs[h] = scores;
    if (rng != nullptr && rate > 0.0) {
      Mat<S> mask;
      apply_dropout(scores, rate, rng, mask);
      if (cache != nullptr) cache->masks[h] = std::move(mask);
    }
    context.middleCols(h * dh, dh) = scores * v.middleCols(h * dh, dh);
  }
  Mat<S> out = (context * p.wo).rowwise() + p.bo;
  if (cache != nullptr) {
    cache->query_in = xq;
    cache->kv_in = xkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
  }
  return out;
}

template <typename S>
void attention_backward(const AttentionParams<S>& p, AttentionParams<S>& g,
                        const AttentionCache<S>& c, const Mat<S>& dout, int heads, Mat<S>& dxq,
                        Mat<S>& dxkv) {
  g.wo.noalias() += c.context.transpose() * dout;
  g.bo += dout.colwise().sum();
  const Mat<S> dcontext = dout * p.wo.transpose();

  const Index d = c.q.cols();
  const Index dh = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  Mat<S> dq(c.q.rows(), d);
  Mat<S> dk(c.k.rows(), d);
  Mat<S> dv(c.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Mat<S>& probs = c.probs[h];
    const bool dropped = !c.masks.empty();
    const auto dctx = dcontext.middleCols(h * dh, dh);
    if (dropped) {
      const Mat<S> used = probs.cwiseProduct(c.masks[h]);
      dv.middleCols(h * dh, dh) = used.transpose() * dctx;
    } else {
      dv.middleCols(h * dh, dh) = probs.transpose() * dctx;
    }
    Mat<S> dprobs = dctx * c.v.middleCols(h * dh, dh).transpose();
    if (dropped) dprobs.array() *= c.masks[h].array();
    const Col<S> row_dot = dprobs.cwiseProduct(probs).rowwise().sum();
    Mat<S> dscores = probs.cwiseProduct(dprobs.colwise() - row_dot) * scale;
    dq.middleCols(h * dh, dh) = dscores * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh) = dscores.transpose() * c.q.middleCols(h * dh, dh);
  }
  g.wq.noalias() += c.query_in.transpose() * dq;
  g.bq += dq.colwise().sum();
  g.wk.noalias() += c.kv_in.transpose() * dk;
  g.wv.noalias() += c.kv_in.transpose() * dv;
  g.bv += dv.colwise().sum();
  dxq = dq * p.wq.transpose();
  dxkv = dk * p.wk.transpose();
  dxkv.noalias() += dv * p.wv.transpose();
}

// ---------------------------------------------------------------- feed-forward

constexpr double kInvSqrt2 = 0.70710678118654752440;

template <typename S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * static_cast<S>(kInvSqrt2)));
}

template <typename S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x * static_cast<S>(kInvSqrt2)));
  const S pdf = std::exp(S(-0.5) * x * x) *
                static_cast<S>(std::numbers::inv_sqrtpi * kInvSqrt2);
  return cdf + x * pdf;
}

template <typename S>
struct FeedForwardCache {
  Mat<S> input;
  Mat<S> pre;
  Mat<S> act;  // after activation and dropout
  Mat<S> mask;
};

template <typename S>
Mat<S> feed_forward(const FeedForwardParams<S>& p, const Mat<S>& x, double rate, Rng* rng,
                    FeedForwardCache<S>* cache) {
  Mat<S> pre = (x * p.w1).rowwise() + p.b1;
  Mat<S> act = pre.unaryExpr([](S v) { return gelu(v); });
  Mat<S> mask;
  apply_dropout(act, rate, rng, mask);
  Mat<S> out = (act * p.w2).rowwise() + p.b2;
  if (cache != nullptr) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
    cache->mask = std::move(mask);
  }
  return out;
}

template <typename S>
Mat<S> feed_forward_backward(const FeedForwardParams<S>& p, FeedForwardParams<S>& g,
                             const FeedForwardCache<S>& c, const Mat<S>& dout) {
  g.w2.noalias() += c.act.transpose() * dout;
  g.b2 += dout.colwise().sum();
  Mat<S> dact = dout * p.w2.transpose();
  apply_mask_grad(dact, c.mask);
  const Mat<S> dpre = dact.cwiseProduct(c.pre.unaryExpr([](S v) { return gelu_grad(v); }));
  g.w1.noalias() += c.input.transpose() * dpre;
  g.b1 += dpre.colwise().sum();
  return dpre * p.w1.transpose();
}

// ---------------------------------------------------------------- validation

void check_sequence(std::span<const TokenId> seq, const ModelConfig& config, const char* what) {
  if (seq.empty()) throw InvalidArgument(std::string(what) + " sequence is empty");
  if (static_cast<int>(seq.size()) > config.max_seq_len) {
    throw InvalidArgument(std::string(what) + " sequence length " + std::to_string(seq.size()) +
                          " exceeds max_seq_len " + std::to_string(config.max_seq_len));
  }
  for (TokenId t : seq) {
    if (t < 0 || t >= config.vocab_size) {
      throw InvalidArgument(std::string(what) + " token id " + std::to_string(t) +
                            " outside vocabulary of size " + std::to_string(config.vocab_size));
    }
  }
}

template <typename S>
Mat<S> embed(const Mat<S>& table, const Mat<S>& positions, std::span<const TokenId> tokens) {
  Mat<S> out(static_cast<Index>(tokens.size()), table.cols());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.row(static_cast<Index>(i)) =
        table.row(tokens[i]) + positions.row(static_cast<Index>(i));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- tape

template <typename S>
struct EncoderLayerCache {
  LayerNormCache<S> norm1;
  AttentionCache<S> self_attn;
  Mat<S> attn_mask;
  LayerNormCache<S> norm2;
  FeedForwardCache<S> ffn;
  Mat<S> ffn_mask;
};

template <typename S>
struct DecoderLayerCache {
  LayerNormCache<S> norm1;
  AttentionCache<S> self_attn;
  Mat<S> self_mask;
  LayerNormCache<S> norm2;
  AttentionCache<S> cross_attn;
  Mat<S> cross_mask;
  LayerNormCache<S> norm3;
  FeedForwardCache<S> ffn;
  Mat<S> ffn_mask;
};

template <typename S>
struct ForwardTape {
  TokenSeq source;
  TokenSeq decoder_input;
  Mat<S> encoder_embed_mask;
  Mat<S> decoder_embed_mask;
  std::vector<EncoderLayerCache<S>> encoder;
  LayerNormCache<S> encoder_norm;
  Mat<S> memory;
  std::vector<DecoderLayerCache<S>> decoder;
  LayerNormCache<S> decoder_norm;
  Mat<S> decoder_out;
};

template <typename S>
TapeHandle<S>::TapeHandle() : tape_(std::make_unique<ForwardTape<S>>()) {}
template <typename S>
TapeHandle<S>::~TapeHandle() = default;
template <typename S>
TapeHandle<S>::TapeHandle(TapeHandle&&) noexcept = default;
template <typename S>
TapeHandle<S>& TapeHandle<S>::operator=(TapeHandle&&) noexcept = default;

// ---------------------------------------------------------------- public API

template <typename S>
std::vector<TensorRef<S>> tensors(ModelParams<S>& params) {
  return collect_tensors<S>(params);
}

template <typename S>
std::vector<TensorRef<const S>> tensors(const ModelParams<S>& params) {
  return collect_tensors<const S>(params);
}

template <typename S>
ModelParams<S> zero_params(const ModelConfig& config) {
  config.validate();
  const int d = config.d_model;
  ModelParams<S> p;
  p.config = config;
  p.token_embedding = Mat<S>::Zero(config.vocab_size, d);
  p.encoder_positions = Mat<S>::Zero(config.max_seq_len, d);
  p.decoder_positions = Mat<S>::Zero(config.max_seq_len, d);
  for (int l = 0; l < config.n_encoder_layers; ++l) {
    p.encoder.push_back({zero_norm<S>(d), zero_attention<S>(d), zero_norm<S>(d),
                         zero_ffn<S>(d, config.d_ffn)});
  }
  for (int l = 0; l < config.n_decoder_layers; ++l) {
    p.decoder.push_back({zero_norm<S>(d), zero_attention<S>(d), zero_norm<S>(d),
                         zero_attention<S>(d), zero_norm<S>(d), zero_ffn<S>(d, config.d_ffn)});
  }
  p.encoder_norm = zero_norm<S>(d);
  p.decoder_norm = zero_norm<S>(d);
  p.output_bias = Vec<S>::Zero(config.vocab_size);
  return p;
}

template <typename S>
ModelParams<S> init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams<S> p = zero_params<S>(config);
  Rng rng(seed);
  for (auto& t : tensors(p)) {
    switch (t.role) {
      case TensorRole::kWeight: {
        const double a = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
        for (S& v : t.values()) v = static_cast<S>(rng.uniform(-a, a));
        break;
      }
      case TensorRole::kNormScale:
        for (S& v : t.values()) v = S(1);
        break;
      case TensorRole::kBias:
      case TensorRole::kNormShift:
        break;
    }
  }
  return p;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params) {
  ModelParams<To> out = zero_params<To>(params.config);
  auto dst = tensors(out);
  const auto src = tensors(params);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (Index j = 0; j < dst[i].size(); ++j) dst[i].data[j] = static_cast<To>(src[i].data[j]);
  }
  return out;
}

std::size_t parameter_count(const ModelConfig& config) {
  const ModelParams<float> p = zero_params<float>(config);
  std::size_t n = 0;
  for (const auto& t : tensors(p)) n += static_cast<std::size_t>(t.size());
  return n;
}

template <typename S>
Logits<S> forward(const ModelParams<S>& params, std::span<const TokenId> source,
                  std::span<const TokenId> decoder_input, Mode mode, Rng* rng,
                  TapeHandle<S>* tape_handle) {
  const ModelConfig& cfg = params.config;
  check_sequence(source, cfg, "source");
  check_sequence(decoder_input, cfg, "decoder input");
  if (mode == Mode::kTrain && rng == nullptr && cfg.dropout_rate > 0.0) {
    throw InvalidArgument("train-mode forward requires an rng when dropout is enabled");
  }
  Rng* drop_rng = mode == Mode::kTrain && cfg.dropout_rate > 0.0 ? rng : nullptr;
  const double rate = cfg.dropout_rate;
  ForwardTape<S>* tape = tape_handle != nullptr ? &tape_handle->get() : nullptr;
  if (tape != nullptr) {
    tape->source.assign(source.begin(), source.end());
    tape->decoder_input.assign(decoder_input.begin(), decoder_input.end());
    tape->encoder.assign(params.encoder.size(), {});
    tape->decoder.assign(params.decoder.size(), {});
  }

  Mat<S> scratch;
  Mat<S>& enc_mask = tape != nullptr ? tape->encoder_embed_mask : scratch;
  enc_mask.resize(0, 0);
  Mat<S> h = embed(params.token_embedding, params.encoder_positions, source);
  apply_dropout(h, rate, drop_rng, enc_mask);
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    const auto& lp = params.encoder[l];
    EncoderLayerCache<S>* lc = tape != nullptr ? &tape->encoder[l] : nullptr;
    Mat<S> local_mask;
    const Mat<S> a = layer_norm(lp.norm1, h, lc ? &lc->norm1 : nullptr);
    Mat<S> attn = attention(lp.self_attn, a, a, cfg.n_heads, false, rate, drop_rng,
                            lc ? &lc->self_attn : nullptr);
    apply_dropout(attn, rate, drop_rng, lc ? lc->attn_mask : local_mask);
    h += attn;
    const Mat<S> b = layer_norm(lp.norm2, h, lc ? &lc->norm2 : nullptr);
    Mat<S> ff = feed_forward(lp.ffn, b, rate, drop_rng, lc ? &lc->ffn : nullptr);
    apply_dropout(ff, rate, drop_rng, lc ? lc->ffn_mask : local_mask);
    h += ff;
  }
  Mat<S> memory = layer_norm(params.encoder_norm, h, tape ? &tape->encoder_norm : nullptr);

  Mat<S>& dec_mask = tape != nullptr ? tape->decoder_embed_mask : scratch;
  dec_mask.resize(0, 0);
  Mat<S> g = embed(params.token_embedding, params.decoder_positions, decoder_input);
  apply_dropout(g, rate, drop_rng, dec_mask);
  for (std::size_t l = 0; l < params.decoder.size(); ++l) {
    const auto& lp = params.decoder[l];
    DecoderLayerCache<S>* lc = tape != nullptr ? &tape->decoder[l] : nullptr;
    Mat<S> local_mask;
    const Mat<S> a = layer_norm(lp.norm1, g, lc ? &lc->norm1 : nullptr);
    Mat<S> self = attention(lp.self_attn, a, a, cfg.n_heads, true, rate, drop_rng,
                            lc ? &lc->self_attn : nullptr);
    apply_dropout(self, rate, drop_rng, lc ? lc->self_mask : local_mask);
    g += self;
    const Mat<S> b = layer_norm(lp.norm2, g, lc ? &lc->norm2 : nullptr);
    Mat<S> cross = attention(lp.cross_attn, b, memory, cfg.n_heads, false, rate, drop_rng,
                             lc ? &lc->cross_attn : nullptr);
    apply_dropout(cross, rate, drop_rng, lc ? lc->cross_mask : local_mask);
    g += cross;
    const Mat<S> c = layer_norm(lp.norm3, g, lc ? &lc->norm3 : nullptr);
    Mat<S> ff = feed_forward(lp.ffn, c, rate, drop_rng, lc ? &lc->ffn : nullptr);
    apply_dropout(ff, rate, drop_rng, lc ? lc->ffn_mask : local_mask);
    g += ff;
  }
  Mat<S> out = layer_norm(params.decoder_norm, g, tape ? &tape->decoder_norm : nullptr);
  Logits<S> logits = (out * params.token_embedding.transpose()).rowwise() + params.output_bias;
  if (tape != nullptr) {
    tape->memory = std::move(memory);
    tape->decoder_out = std::move(out);
  }
  return logits;
}

template <typename S>
void backward(const ModelParams<S>& params, const TapeHandle<S>& tape_handle,
              const Logits<S>& dlogits, ModelParams<S>& grads) {
  const ForwardTape<S>& tape = tape_handle.get();
  const int heads = params.config.n_heads;

  grads.output_bias += dlogits.colwise().sum();
  grads.token_embedding.noalias() += dlogits.transpose() * tape.decoder_out;
  const Mat<S> dout = dlogits * params.token_embedding;
  Mat<S> dg = layer_norm_backward(params.decoder_norm, grads.decoder_norm, tape.decoder_norm, dout);

  Mat<S> dmemory = Mat<S>::Zero(tape.memory.rows(), tape.memory.cols());
  Mat<S> dxq, dxkv;
  for (std::size_t li = params.decoder.size(); li-- > 0;) {
    const auto& lp = params.decoder[li];
    auto& lg = grads.decoder[li];
    const auto& lc = tape.decoder[li];

    Mat<S> dff = dg;
    apply_mask_grad(dff, lc.ffn_mask);
    const Mat<S> dc = feed_forward_backward(lp.ffn, lg.ffn, lc.ffn, dff);
    dg += layer_norm_backward(lp.norm3, lg.norm3, lc.norm3, dc);

    Mat<S> dcross = dg;
    apply_mask_grad(dcross, lc.cross_mask);
    attention_backward(lp.cross_attn, lg.cross_attn, lc.cross_attn, dcross, heads, dxq, dxkv);
    dmemory += dxkv;
    dg += layer_norm_backward(lp.norm2, lg.norm2, lc.norm2, dxq);

    Mat<S> dself = dg;
    apply_mask_grad(dself, lc.self_mask);
    attention_backward(lp.self_attn, lg.self_attn, lc.self_attn, dself, heads, dxq, dxkv);
    dxq += dxkv;
    dg += layer_norm_backward(lp.norm1, lg.norm1, lc.norm1, dxq);
  }
  apply_mask_grad(dg, tape.decoder_embed_mask);
  for (std::size_t i = 0; i < tape.decoder_input.size(); ++i) {
    const auto row = static_cast<Index>(i);
    grads.token_embedding.row(tape.decoder_input[i]) += dg.row(row);
    grads.decoder_positions.row(row) += dg.row(row);
  }

  Mat<S> dh = layer_norm_backward(params.encoder_norm, grads.encoder_norm, tape.encoder_norm, dmemory);
  for (std::size_t li = params.encoder.size(); li-- > 0;) {
    const auto& lp = params.encoder[li];
    auto& lg = grads.encoder[li];
    const auto& lc = tape.encoder[li];

    Mat<S> dff = dh;
    apply_mask_grad(dff, lc.ffn_mask);
    const Mat<S> db = feed_forward_backward(lp.ffn, lg.ffn, lc.ffn, dff);
    dh += layer_norm_backward(lp.norm2, lg.norm2, lc.norm2, db);

    Mat<S> dattn = dh;
    apply_mask_grad(dattn, lc.attn_mask);
    attention_backward(lp.self_attn, lg.self_attn, lc.self_attn, dattn, heads, dxq, dxkv);
    dxq += dxkv;
    dh += layer_norm_backward(lp.norm1, lg.norm1, lc.norm1, dxq);
  }
  apply_mask_grad(dh, tape.encoder_embed_mask);
  for (std::size_t i = 0; i < tape.source.size(); ++i) {
    const auto row = static_cast<Index>(i);
    grads.token_embedding.row(tape.source[i]) += dh.row(row);
    grads.encoder_positions.row(row) += dh.row(row);
  }
}

// ---------------------------------------------------------------- incremental decoding

template <typename S>
IncrementalDecoder<S>::IncrementalDecoder(const ModelParams<S>& params,
                                          std::span<const TokenId> source)
    : params_(&params) {
  const ModelConfig& cfg = params.config;
  check_sequence(source, cfg, "source");
  Mat<S> h = embed(params.token_embedding, params.encoder_positions, source);
  for (const auto& lp : params.encoder) {
    const Mat<S> a = layer_norm<S>(lp.norm1, h, nullptr);
    h += attention<S>(lp.self_attn, a, a, cfg.n_heads, false, 0.0, nullptr, nullptr);
    const Mat<S> b = layer_norm<S>(lp.norm2, h, nullptr);
    h += feed_forward<S>(lp.ffn, b, 0.0, nullptr, nullptr);
  }
  const Mat<S> memory = layer_norm<S>(params.encoder_norm, h, nullptr);
  layers_.reserve(params.decoder.size());
  for (const auto& lp : params.decoder) {
    LayerCache cache;
    cache.self_keys.resize(cfg.max_seq_len, cfg.d_model);
    cache.self_values.resize(cfg.max_seq_len, cfg.d_model);
    cache.cross_keys = memory * lp.cross_attn.wk;
    cache.cross_values = (memory * lp.cross_attn.wv).rowwise() + lp.cross_attn.bv;
    layers_.push_back(std::move(cache));
  }
}

namespace {

// Single-query attention over the first `length` cached rows.
template <typename S>
Vec<S> attend_row(const Vec<S>& q, const Mat<S>& keys, const Mat<S>& values, Index length,
                  int heads) {
  const Index d = q.cols();
  const Index dh = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  Vec<S> context(d);
  for (int h = 0; h < heads; ++h) {
    Vec<S> scores =
        (q.middleCols(h * dh, dh) * keys.topRows(length).middleCols(h * dh, dh).transpose()) *
        scale;
    const S mx = scores.maxCoeff();
    scores = (scores.array() - mx).exp().matrix();
    scores /= scores.sum();
    context.middleCols(h * dh, dh) = scores * values.topRows(length).middleCols(h * dh, dh);
  }
  return context;
}

}  // namespace

template <typename S>
RowVector<S> IncrementalDecoder<S>::step(TokenId token) {
  const ModelParams<S>& p = *params_;
  const ModelConfig& cfg = p.config;
  if (position_ >= cfg.max_seq_len) {
    throw InvalidArgument("incremental decoder exceeded max_seq_len " +
                          std::to_string(cfg.max_seq_len));
  }
  if (token < 0 || token >= cfg.vocab_size) {
    throw InvalidArgument("decoder token id " + std::to_string(token) + " outside vocabulary");
  }
  const Index pos = position_;
  Mat<S> x = p.token_embedding.row(token) + p.decoder_positions.row(pos);
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    const auto& lp = p.decoder[l];
    LayerCache& cache = layers_[l];

    const Mat<S> a = layer_norm<S>(lp.norm1, x, nullptr);
    const Vec<S> q = a * lp.self_attn.wq + lp.self_attn.bq;
    cache.self_keys.row(pos) = a * lp.self_attn.wk;
    cache.self_values.row(pos) = a * lp.self_attn.wv + lp.self_attn.bv;
    const Vec<S> self_ctx = attend_row(q, cache.self_keys, cache.self_values, pos + 1, cfg.n_heads);
    x += self_ctx * lp.self_attn.wo + lp.self_attn.bo;

    const Mat<S> b = layer_norm<S>(lp.norm2, x, nullptr);
    const Vec<S> qc = b * lp.cross_attn.wq + lp.cross_attn.bq;
    const Vec<S> cross_ctx = attend_row(qc, cache.cross_keys, cache.cross_values,
                                        cache.cross_keys.rows(), cfg.n_heads);
    x += cross_ctx * lp.cross_attn.wo + lp.cross_attn.bo;

    const Mat<S> c = layer_norm<S>(lp.norm3, x, nullptr);
    x += feed_forward<S>(lp.ffn, c, 0.0, nullptr, nullptr);
  }
  const Mat<S> out = layer_norm<S>(p.decoder_norm, x, nullptr);
  ++position_;
  return out * p.token_embedding.transpose() + p.output_bias;
}

#define QUILL_INSTANTIATE_MODEL(S)                                                            \
  template struct ForwardTape<S>;                                                             \
  template class TapeHandle<S>;                                                               \
  template std::vector<TensorRef<S>> tensors<S>(ModelParams<S>&);                             \
  template std::vector<TensorRef<const S>> tensors<S>(const ModelParams<S>&);                 \
  template ModelParams<S> zero_params<S>(const ModelConfig&);                                 \
  template ModelParams<S> init_params<S>(const ModelConfig&, std::uint64_t);                  \
  template Logits<S> forward<S>(const ModelParams<S>&, std::span<const TokenId>,              \
                                std::span<const TokenId>, Mode, Rng*, TapeHandle<S>*);        \
  template void backward<S>(const ModelParams<S>&, const TapeHandle<S>&, const Logits<S>&,    \
                            ModelParams<S>&);                                                 \
  template class IncrementalDecoder<S>;

QUILL_INSTANTIATE_MODEL(float)
QUILL_INSTANTIATE_MODEL(double)

template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);

}  // namespace quill

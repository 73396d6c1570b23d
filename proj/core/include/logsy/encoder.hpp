#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "logsy/tokenizer.hpp"

namespace logsy {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// phi(x; theta): the output at the '[EMBEDDING]' position after the final
/// linear layer.
using EmbeddingVector = Vector;

/// Raised when an activation or gradient stops being finite. The message names
/// the layer where it was detected.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  std::size_t d = 16;          // token embedding width, also p
  std::size_t heads = 2;       // L, must divide d
  std::size_t layers = 2;      // N
  std::size_t max_len = kDefaultMaxLen;
  std::size_t ffn_width = 16;
  double dropout = 0.05;

  std::size_t head_width() const { return d / heads; }
  void validate() const;  // throws std::invalid_argument
  bool operator==(const ModelConfig&) const = default;
};

/// Weights of one encoder layer. Q/K/V projections of all heads are stored
/// side by side: head h owns columns [h*w, (h+1)*w).
struct LayerParams {
  Matrix wq, wk, wv;  // d x d
  Matrix wo;          // d x d, mixes the concatenated heads
  Matrix norm1_gain, norm1_bias;  // 1 x d
  Matrix ffn_w1;                  // d x ffn_width
  Matrix ffn_b1;                  // 1 x ffn_width
  Matrix ffn_w2;                  // ffn_width x d
  Matrix ffn_b2;                  // 1 x d
  Matrix norm2_gain, norm2_bias;  // 1 x d
};

/// Every learnable tensor of the model. Also used as the gradient container,
/// with identical shapes.
struct ModelParams {
  ModelConfig config;
  Matrix token_embedding;  // |V| x d
  std::vector<LayerParams> layers;
  Matrix final_w;  // d x d
  Matrix final_b;  // 1 x d

  std::size_t vocab_size() const { return static_cast<std::size_t>(token_embedding.rows()); }

  /// Same shapes, all zeros.
  ModelParams zeros_like() const;

  std::size_t parameter_count() const;

  template <typename F>
  void for_each_tensor(F&& f) { visit(*this, f); }
  template <typename F>
  void for_each_tensor(F&& f) const { visit(*this, f); }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    f(std::string("token_embedding"), self.token_embedding);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      const std::string p = "layers." + std::to_string(l) + ".";
      auto& L = self.layers[l];
      f(p + "attn.wq", L.wq);
      f(p + "attn.wk", L.wk);
      f(p + "attn.wv", L.wv);
      f(p + "attn.wo", L.wo);
      f(p + "norm1.gain", L.norm1_gain);
      f(p + "norm1.bias", L.norm1_bias);
      f(p + "ffn.w1", L.ffn_w1);
      f(p + "ffn.b1", L.ffn_b1);
      f(p + "ffn.w2", L.ffn_w2);
      f(p + "ffn.b2", L.ffn_b2);
      f(p + "norm2.gain", L.norm2_gain);
      f(p + "norm2.bias", L.norm2_bias);
    }
    f(std::string("final.w"), self.final_w);
    f(std::string("final.b"), self.final_b);
  }
};

/// Weights ~ U(-1/sqrt(d), 1/sqrt(d)), biases 0, norm gains 1.
ModelParams init_params(const ModelConfig& config, std::size_t vocab_size,
                        std::uint64_t seed);

/// Sinusoidal encoding of 1-based position j:
///   n[2k]   = sin(j / 10000^(2k/d))
///   n[2k+1] = cos(j / 10000^((2k+1)/d))
/// Throws std::invalid_argument for odd d or j < 1.
RowVector positional_encoding(std::size_t j, std::size_t d);

struct AttentionResult {
  Matrix output;   // M x w; zero rows at padded queries
  Matrix weights;  // M x M; row-stochastic over valid keys, zero rows at padded queries
};

/// One self-attention head: softmax(Q K^T / sqrt(w)) V with Q = X Wq etc.
/// Keys where mask is false get -inf before the softmax.
AttentionResult attention_head(const Matrix& x, const Matrix& wq,
                               const Matrix& wk, const Matrix& wv,
                               const std::vector<bool>& mask);

/// Row-wise layer normalization (population variance, eps 1e-5).
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias);

/// Multi-head attention + residual + norm, then FFN + residual + norm.
/// Eval mode when dropout_seed is empty.
Matrix encoder_layer(const Matrix& x, const LayerParams& layer,
                     const ModelConfig& config, const std::vector<bool>& mask,
                     std::optional<std::uint64_t> dropout_seed = std::nullopt);

struct LayerNormTrace {
  Matrix xhat;
  Vector inv_std;
};

/// Intermediate values of one layer kept for the backward pass.
struct LayerTrace {
  Matrix input;
  Matrix q, k, v;
  std::vector<Matrix> attn;  // per head, M x M
  Matrix concat;
  Matrix drop1;  // empty when dropout is off
  LayerNormTrace ln1;
  Matrix x1;
  Matrix ffn_pre;
  Matrix ffn_act;
  Matrix drop2;
  LayerNormTrace ln2;
  Matrix output;
};

struct ForwardTrace {
  std::vector<TokenId> ids;  // the valid prefix of the sequence
  std::vector<LayerTrace> layers;
  RowVector pooled;  // encoder output row of '[EMBEDDING]'
  EmbeddingVector z;
};

/// Forward pass recording everything backward needs. Only the valid prefix is
/// processed (padded keys are masked out, so they cannot reach row 0), which
/// makes z exactly independent of padding. With a dropout seed the masks are
/// drawn from a stream seeded by it; the same seed reproduces the same masks.
ForwardTrace trace_forward(const TokenSequence& seq, const ModelParams& params,
                           std::optional<std::uint64_t> dropout_seed = std::nullopt);

/// Eval-mode forward.
EmbeddingVector forward(const TokenSequence& seq, const ModelParams& params);

/// Accumulates d(loss)/d(params) into grads given d(loss)/dz for one trace.
void backward(const ForwardTrace& trace, const ModelParams& params,
              const Vector& dz, ModelParams& grads);

}  // namespace logsy

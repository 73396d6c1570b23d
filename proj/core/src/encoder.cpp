#include "logsy/encoder.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace logsy {

namespace {

constexpr double kNormEps = 1e-5;

void check_finite(const Matrix& m, const std::string& where) {
  if (!m.allFinite()) throw NonFiniteError("non-finite values in " + where);
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound,
                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  // Fill row by row so the layout does not affect the draw order.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = (u(rng) < p) ? 0.0 : keep_scale;
  return m;
}

LayerNormTrace normalize_rows(const Matrix& x) {
  LayerNormTrace t;
  const auto d = static_cast<double>(x.cols());
  t.xhat.resize(x.rows(), x.cols());
  t.inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / d;
    const RowVector centered = x.row(r).array() - mean;
    const double var = centered.squaredNorm() / d;
    t.inv_std(r) = 1.0 / std::sqrt(var + kNormEps);
    t.xhat.row(r) = centered * t.inv_std(r);
  }
  return t;
}

Matrix apply_gain_bias(const Matrix& xhat, const Matrix& gain, const Matrix& bias) {
  return (xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
}

// Returns dx; accumulates gain/bias gradients.
Matrix layer_norm_backward(const Matrix& dy, const LayerNormTrace& t,
                           const Matrix& gain, Matrix& dgain, Matrix& dbias) {
  const auto d = static_cast<double>(dy.cols());
  dgain.row(0) += (dy.array() * t.xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const RowVector dxhat = dy.row(r).cwiseProduct(gain.row(0));
    const double mean_dxhat = dxhat.sum() / d;
    const double mean_dxhat_xhat = dxhat.dot(t.xhat.row(r)) / d;
    dx.row(r) = t.inv_std(r) *
                (dxhat.array() - mean_dxhat - t.xhat.row(r).array() * mean_dxhat_xhat).matrix();
  }
  return dx;
}

// Softmax(Q K^T / sqrt(w)) with optional key mask; padded query rows are zero.
Matrix attention_weights(const Matrix& q, const Matrix& k,
                         const std::vector<bool>* mask) {
  const auto m = q.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix scores = (q * k.transpose()) * scale;
  Matrix weights = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (mask && !(*mask)[static_cast<std::size_t>(i)]) continue;
    double row_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (mask && !(*mask)[static_cast<std::size_t>(j)]) continue;
      row_max = std::max(row_max, scores(i, j));
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (mask && !(*mask)[static_cast<std::size_t>(j)]) continue;
      const double e = std::exp(scores(i, j) - row_max);
      weights(i, j) = e;
      total += e;
    }
    weights.row(i) /= total;
  }
  return weights;
}

LayerTrace run_layer(const Matrix& x, const LayerParams& layer,
                     const ModelConfig& config, const std::vector<bool>* mask,
                     std::mt19937_64* rng) {
  const auto m = x.rows();
  const auto w = static_cast<Eigen::Index>(config.head_width());
  const bool use_dropout = rng != nullptr && config.dropout > 0.0;

  LayerTrace t;
  t.input = x;
  t.q = x * layer.wq;
  t.k = x * layer.wk;
  t.v = x * layer.wv;
  t.concat.resize(m, x.cols());
  t.attn.reserve(config.heads);
  for (std::size_t h = 0; h < config.heads; ++h) {
    const auto c0 = static_cast<Eigen::Index>(h) * w;
    Matrix a = attention_weights(t.q.middleCols(c0, w), t.k.middleCols(c0, w), mask);
    t.concat.middleCols(c0, w) = a * t.v.middleCols(c0, w);
    t.attn.push_back(std::move(a));
  }

  Matrix attn_out = t.concat * layer.wo;
  if (use_dropout) {
    t.drop1 = dropout_mask(m, attn_out.cols(), config.dropout, *rng);
    attn_out.array() *= t.drop1.array();
  }
  t.ln1 = normalize_rows(x + attn_out);
  t.x1 = apply_gain_bias(t.ln1.xhat, layer.norm1_gain, layer.norm1_bias);

  t.ffn_pre = (t.x1 * layer.ffn_w1).rowwise() + layer.ffn_b1.row(0);
  t.ffn_act = t.ffn_pre.cwiseMax(0.0);
  Matrix ffn_out = (t.ffn_act * layer.ffn_w2).rowwise() + layer.ffn_b2.row(0);
  if (use_dropout) {
    t.drop2 = dropout_mask(m, ffn_out.cols(), config.dropout, *rng);
    ffn_out.array() *= t.drop2.array();
  }
  t.ln2 = normalize_rows(t.x1 + ffn_out);
  t.output = apply_gain_bias(t.ln2.xhat, layer.norm2_gain, layer.norm2_bias);
  return t;
}

// Returns d(loss)/d(layer input); accumulates parameter gradients.
Matrix layer_backward(const LayerTrace& t, const LayerParams& layer,
                      const ModelConfig& config, const Matrix& d_out,
                      LayerParams& g) {
  const auto w = static_cast<Eigen::Index>(config.head_width());

  Matrix d_r2 = layer_norm_backward(d_out, t.ln2, layer.norm2_gain, g.norm2_gain, g.norm2_bias);
  Matrix d_x1 = d_r2;
  Matrix d_ffn = d_r2;
  if (t.drop2.size() != 0) d_ffn.array() *= t.drop2.array();
  g.ffn_w2.noalias() += t.ffn_act.transpose() * d_ffn;
  g.ffn_b2.row(0) += d_ffn.colwise().sum();
  Matrix d_pre = d_ffn * layer.ffn_w2.transpose();
  d_pre.array() *= (t.ffn_pre.array() > 0.0).cast<double>();
  g.ffn_w1.noalias() += t.x1.transpose() * d_pre;
  g.ffn_b1.row(0) += d_pre.colwise().sum();
  d_x1.noalias() += d_pre * layer.ffn_w1.transpose();

  Matrix d_r1 = layer_norm_backward(d_x1, t.ln1, layer.norm1_gain, g.norm1_gain, g.norm1_bias);
  Matrix d_in = d_r1;
  Matrix d_attn_out = d_r1;
  if (t.drop1.size() != 0) d_attn_out.array() *= t.drop1.array();
  g.wo.noalias() += t.concat.transpose() * d_attn_out;
  const Matrix d_concat = d_attn_out * layer.wo.transpose();

  Matrix d_q(t.q.rows(), t.q.cols());
  Matrix d_k(t.k.rows(), t.k.cols());
  Matrix d_v(t.v.rows(), t.v.cols());
  const double scale = 1.0 / std::sqrt(static_cast<double>(w));
  for (std::size_t h = 0; h < config.heads; ++h) {
    const auto c0 = static_cast<Eigen::Index>(h) * w;
    const Matrix& a = t.attn[h];
    const auto d_head = d_concat.middleCols(c0, w);
    const Matrix d_a = d_head * t.v.middleCols(c0, w).transpose();
    d_v.middleCols(c0, w) = a.transpose() * d_head;
    const Eigen::VectorXd row_dot = (d_a.array() * a.array()).rowwise().sum();
    const Matrix d_scores =
        (a.array() * (d_a.array().colwise() - row_dot.array())).matrix() * scale;
    d_q.middleCols(c0, w) = d_scores * t.k.middleCols(c0, w);
    d_k.middleCols(c0, w) = d_scores.transpose() * t.q.middleCols(c0, w);
  }
  g.wq.noalias() += t.input.transpose() * d_q;
  g.wk.noalias() += t.input.transpose() * d_k;
  g.wv.noalias() += t.input.transpose() * d_v;
  d_in.noalias() += d_q * layer.wq.transpose();
  d_in.noalias() += d_k * layer.wk.transpose();
  d_in.noalias() += d_v * layer.wv.transpose();
  return d_in;
}

}  // namespace

void ModelConfig::validate() const {
  if (d == 0 || heads == 0 || layers == 0 || max_len == 0 || ffn_width == 0) {
    throw std::invalid_argument("model config: all sizes must be positive");
  }
  if (d % heads != 0) {
    throw std::invalid_argument("model config: d=" + std::to_string(d) +
                                " is not divisible by heads=" + std::to_string(heads));
  }
  if (d % 2 != 0) {
    throw std::invalid_argument("model config: positional encoding needs an even d");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("model config: dropout must be in [0,1)");
  }
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each_tensor([](const std::string&, Matrix& m) { m.setZero(); });
  return z;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&n](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

ModelParams init_params(const ModelConfig& config, std::size_t vocab_size,
                        std::uint64_t seed) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.d);
  const auto f = static_cast<Eigen::Index>(config.ffn_width);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.d));
  std::mt19937_64 rng(seed);

  ModelParams p;
  p.config = config;
  p.token_embedding = uniform_matrix(static_cast<Eigen::Index>(vocab_size), d, bound, rng);
  p.layers.resize(config.layers);
  for (auto& L : p.layers) {
    L.wq = uniform_matrix(d, d, bound, rng);
    L.wk = uniform_matrix(d, d, bound, rng);
    L.wv = uniform_matrix(d, d, bound, rng);
    L.wo = uniform_matrix(d, d, bound, rng);
    L.norm1_gain = Matrix::Ones(1, d);
    L.norm1_bias = Matrix::Zero(1, d);
    L.ffn_w1 = uniform_matrix(d, f, bound, rng);
    L.ffn_b1 = Matrix::Zero(1, f);
    L.ffn_w2 = uniform_matrix(f, d, bound, rng);
    L.ffn_b2 = Matrix::Zero(1, d);
    L.norm2_gain = Matrix::Ones(1, d);
    L.norm2_bias = Matrix::Zero(1, d);
  }
  p.final_w = uniform_matrix(d, d, bound, rng);
  p.final_b = Matrix::Zero(1, d);
  return p;
}

RowVector positional_encoding(std::size_t j, std::size_t d) {
  if (d == 0 || d % 2 != 0) {
    throw std::invalid_argument("positional_encoding: d must be even and positive");
  }
  if (j < 1) throw std::invalid_argument("positional_encoding: positions start at 1");
  RowVector n(static_cast<Eigen::Index>(d));
  const double pos = static_cast<double>(j);
  const double dd = static_cast<double>(d);
  for (std::size_t k = 0; k < d / 2; ++k) {
    const double even = 2.0 * static_cast<double>(k);
    n(static_cast<Eigen::Index>(2 * k)) = std::sin(pos / std::pow(10000.0, even / dd));
    n(static_cast<Eigen::Index>(2 * k + 1)) = std::cos(pos / std::pow(10000.0, (even + 1.0) / dd));
  }
  return n;
}

AttentionResult attention_head(const Matrix& x, const Matrix& wq,
                               const Matrix& wk, const Matrix& wv,
                               const std::vector<bool>& mask) {
  if (wq.rows() != x.cols() || wk.rows() != x.cols() || wv.rows() != x.cols() ||
      wq.cols() != wk.cols() || wk.cols() != wv.cols() ||
      static_cast<std::size_t>(x.rows()) != mask.size()) {
    throw std::invalid_argument("attention_head: shape mismatch");
  }
  AttentionResult r;
  r.weights = attention_weights(x * wq, x * wk, &mask);
  r.output = r.weights * (x * wv);
  return r;
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias) {
  return apply_gain_bias(normalize_rows(x).xhat, gain, bias);
}

Matrix encoder_layer(const Matrix& x, const LayerParams& layer,
                     const ModelConfig& config, const std::vector<bool>& mask,
                     std::optional<std::uint64_t> dropout_seed) {
  if (static_cast<std::size_t>(x.cols()) != config.d ||
      static_cast<std::size_t>(x.rows()) != mask.size()) {
    throw std::invalid_argument("encoder_layer: shape mismatch");
  }
  std::mt19937_64 rng(dropout_seed.value_or(0));
  return run_layer(x, layer, config, &mask, dropout_seed ? &rng : nullptr).output;
}

ForwardTrace trace_forward(const TokenSequence& seq, const ModelParams& params,
                           std::optional<std::uint64_t> dropout_seed) {
  const auto& cfg = params.config;
  if (seq.real_len == 0 || seq.real_len > seq.ids.size()) {
    throw std::invalid_argument("forward: malformed token sequence");
  }
  ForwardTrace t;
  t.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(seq.real_len));
  const auto m = static_cast<Eigen::Index>(t.ids.size());
  Matrix x(m, static_cast<Eigen::Index>(cfg.d));
  for (Eigen::Index j = 0; j < m; ++j) {
    const TokenId id = t.ids[static_cast<std::size_t>(j)];
    if (id < 0 || static_cast<std::size_t>(id) >= params.vocab_size()) {
      throw std::invalid_argument("forward: token id " + std::to_string(id) +
                                  " outside vocabulary of size " +
                                  std::to_string(params.vocab_size()));
    }
    x.row(j) = params.token_embedding.row(id) +
               positional_encoding(static_cast<std::size_t>(j) + 1, cfg.d);
  }

  std::mt19937_64 rng(dropout_seed.value_or(0));
  std::mt19937_64* rng_ptr = dropout_seed ? &rng : nullptr;
  t.layers.reserve(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Matrix& in = (l == 0) ? x : t.layers.back().output;
    t.layers.push_back(run_layer(in, params.layers[l], cfg, nullptr, rng_ptr));
    check_finite(t.layers.back().output, "encoder layer " + std::to_string(l));
  }
  t.pooled = t.layers.empty() ? RowVector(x.row(0)) : RowVector(t.layers.back().output.row(0));
  t.z = (t.pooled * params.final_w + params.final_b).transpose();
  check_finite(t.z, "final linear layer");
  return t;
}

EmbeddingVector forward(const TokenSequence& seq, const ModelParams& params) {
  return trace_forward(seq, params).z;
}

void backward(const ForwardTrace& trace, const ModelParams& params,
              const Vector& dz, ModelParams& grads) {
  const RowVector dz_row = dz.transpose();
  grads.final_w.noalias() += trace.pooled.transpose() * dz_row;
  grads.final_b.row(0) += dz_row;

  const auto m = static_cast<Eigen::Index>(trace.ids.size());
  Matrix d_x = Matrix::Zero(m, static_cast<Eigen::Index>(params.config.d));
  d_x.row(0) = dz_row * params.final_w.transpose();

  for (std::size_t l = trace.layers.size(); l-- > 0;) {
    d_x = layer_backward(trace.layers[l], params.layers[l], params.config, d_x,
                         grads.layers[l]);
    check_finite(d_x, "gradient of encoder layer " + std::to_string(l));
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    grads.token_embedding.row(trace.ids[static_cast<std::size_t>(j)]) += d_x.row(j);
  }
}

}  // namespace logsy

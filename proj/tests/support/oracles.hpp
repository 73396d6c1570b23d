#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's math; only the parameter containers are shared.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <iterator>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "logsy/encoder.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid zeros(std::size_t r, std::size_t c) { return Grid(r, std::vector<double>(c, 0.0)); }

inline Grid matmul(const Grid& a, const logsy::Matrix& b) {
  const std::size_t n = a.size(), k = static_cast<std::size_t>(b.rows()),
                    m = static_cast<std::size_t>(b.cols());
  Grid out = zeros(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i][t] * b(static_cast<long>(t), static_cast<long>(j));
      out[i][j] = s;
    }
  return out;
}

inline void layer_norm_rows(Grid& x, const logsy::Matrix& gain, const logsy::Matrix& bias) {
  for (auto& row : x) {
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = (row[j] - mean) * inv * gain(0, static_cast<long>(j)) + bias(0, static_cast<long>(j));
  }
}

/// Position j (1-based), width d, element-wise as printed in the method.
inline double positional(std::size_t j, std::size_t i, std::size_t d) {
  const double jd = static_cast<double>(j);
  const double e = static_cast<double>(i) / static_cast<double>(d);
  return (i % 2 == 0) ? std::sin(jd / std::pow(10000.0, e)) : std::cos(jd / std::pow(10000.0, e));
}

/// Eval-mode forward over the first real_len ids, written with plain loops.
inline std::vector<double> forward(const std::vector<logsy::TokenId>& ids, std::size_t real_len,
                                   const logsy::ModelParams& p) {
  const std::size_t d = p.config.d, heads = p.config.heads, w = d / heads;
  Grid x = zeros(real_len, d);
  for (std::size_t r = 0; r < real_len; ++r)
    for (std::size_t c = 0; c < d; ++c)
      x[r][c] = p.token_embedding(ids[r], static_cast<long>(c)) + positional(r + 1, c, d);

  for (const auto& L : p.layers) {
    const Grid q = matmul(x, L.wq), k = matmul(x, L.wk), v = matmul(x, L.wv);
    Grid concat = zeros(real_len, d);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < real_len; ++i) {
        std::vector<double> s(real_len);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < real_len; ++j) {
          double dot = 0.0;
          for (std::size_t t = h * w; t < (h + 1) * w; ++t) dot += q[i][t] * k[j][t];
          s[j] = dot / std::sqrt(static_cast<double>(w));
          mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (auto& e : s) z += (e = std::exp(e - mx));
        for (std::size_t j = 0; j < real_len; ++j)
          for (std::size_t t = h * w; t < (h + 1) * w; ++t) concat[i][t] += s[j] / z * v[j][t];
      }
    }
    const Grid proj = matmul(concat, L.wo);
    for (std::size_t i = 0; i < real_len; ++i)
      for (std::size_t c = 0; c < d; ++c) x[i][c] += proj[i][c];
    layer_norm_rows(x, L.norm1_gain, L.norm1_bias);

    Grid hidden = matmul(x, L.ffn_w1);
    for (auto& row : hidden)
      for (std::size_t c = 0; c < row.size(); ++c)
        row[c] = std::max(0.0, row[c] + L.ffn_b1(0, static_cast<long>(c)));
    const Grid out = matmul(hidden, L.ffn_w2);
    for (std::size_t i = 0; i < real_len; ++i)
      for (std::size_t c = 0; c < d; ++c) x[i][c] += out[i][c] + L.ffn_b2(0, static_cast<long>(c));
    layer_norm_rows(x, L.norm2_gain, L.norm2_bias);
  }
  const Grid z = matmul(Grid{x[0]}, p.final_w);
  std::vector<double> result(d);
  for (std::size_t c = 0; c < d; ++c) result[c] = z[0][c] + p.final_b(0, static_cast<long>(c));
  return result;
}

inline double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

/// Sigmoid-head binary cross-entropy. sigma(w.z + b) is the probability of
/// the anomaly class; class weights as in the hypersphere loss.
struct LinearHead {
  std::vector<double> w;
  double b = 0.0;
};

inline double bce_logit_loss(double logit, int y, double w0 = 0.5, double w1 = 1.0) {
  return y == 1 ? w1 * softplus(-logit) : w0 * softplus(logit);
}

inline double bce_reference_loss(const std::vector<std::pair<std::vector<double>, int>>& batch,
                                 const LinearHead& head, double w0 = 0.5, double w1 = 1.0) {
  if (batch.empty()) throw std::invalid_argument("bce_reference_loss: empty batch");
  double total = 0.0;
  for (const auto& [z, y] : batch) {
    double logit = head.b;
    for (std::size_t i = 0; i < z.size(); ++i) logit += head.w[i] * z[i];
    total += bce_logit_loss(logit, y, w0, w1);
  }
  return total / static_cast<double>(batch.size());
}

/// Entrywise relative error with an absolute floor for near-zero entries.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of f with respect to every entry of every tensor.
/// Returns the max relative error against `analytic` and the tensor name
/// where it occurs.
struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t entries = 0;
};

inline GradCheck check_gradients(logsy::ModelParams& params, const logsy::ModelParams& analytic,
                                 const std::function<double()>& f, double h = 1e-4,
                                 double floor = 1e-6) {
  GradCheck out;
  std::vector<const logsy::Matrix*> grads;
  analytic.for_each_tensor([&](const std::string&, const logsy::Matrix& g) { grads.push_back(&g); });
  std::size_t t = 0;
  params.for_each_tensor([&](const std::string& name, logsy::Matrix& m) {
    const logsy::Matrix& g = *grads[t++];
    for (long i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = f();
      m.data()[i] = saved - h;
      const double down = f();
      m.data()[i] = saved;
      const double err = relative_error(g.data()[i], (up - down) / (2.0 * h), floor);
      ++out.entries;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst_tensor = name;
      }
    }
  });
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("logsy_" + tag + "_" + std::to_string(rng() % 1000000000ULL));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random printable messages mixing words, numbers, paths and punctuation.
inline std::string random_message(std::mt19937_64& rng) {
  static const char* words[] = {"kernel", "panic", "node",   "Cache",  "flush",  "error",
                                "the",    "of",    "socket", "closed", "RETRY",  "link",
                                "down",   "up",    "vm",     "disk",   "quota",  "frob"};
  static const char* noise[] = {"0x1f", "/var/log/x", "12:00:01", "http://h/p", "a/b", "#42",
                                "node-7", "(ok)", "--", "café"};
  std::uniform_int_distribution<int> len(0, 14), coin(0, 3);
  std::string out;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    if (coin(rng) == 0) {
      out += noise[rng() % std::size(noise)];
    } else {
      out += words[rng() % std::size(words)];
    }
  }
  return out;
}

}  // namespace oracle

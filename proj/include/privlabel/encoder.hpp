#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <span>
#include <vector>

#include <json.hpp>

#include "privlabel/kernels.hpp"
#include "privlabel/tokenizer.hpp"

namespace privlabel {

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t max_len = 64;
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t ffn = 64;
  double init_std = 0.02;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

// Contiguous parameter block inside the flat parameter vector.
struct Block {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

struct LayerBlocks {
  Block wq, bq, wk, bk, wv, bv, wo, bo;
  Block ln1_g, ln1_b;
  Block w1, b1, w2, b2;
  Block ln2_g, ln2_b;
};

struct EncoderLayout {
  Block tok, pos, seg, emb_g, emb_b;
  std::vector<LayerBlocks> layers;
  Block pool_w, pool_b, cls_w, cls_b;
  Block mlm_w, mlm_b, mlm_g, mlm_beta, mlm_out_b;
  std::size_t total = 0;

  static EncoderLayout for_config(const EncoderConfig& c);
};

// Model input: token ids with segment ids (0 = first text, 1 = second).
struct EncodedInput {
  std::vector<TokenId> tokens;
  std::vector<int> segments;
  bool truncated = false;
};

// "[CLS] first [SEP] second [SEP]" with the second text truncated from the
// tail first; the first text is only cut when it alone overflows.
EncodedInput encode_pair(const Vocabulary& vocab, std::string_view first, std::string_view second,
                         std::size_t max_len);
// "[CLS] tokens [SEP]", all segment 0.
EncodedInput encode_single(std::span<const TokenId> tokens, std::size_t max_len);

struct LnTrace {
  std::vector<double> xhat;     // rows x d
  std::vector<double> inv_std;  // rows
};

struct LayerTrace {
  std::vector<double> q, k, v;  // T x d
  std::vector<double> attn;     // heads x T x T
  std::vector<double> ctx;      // T x d
  LnTrace ln1;
  std::vector<double> h1;     // T x d
  std::vector<double> f_pre;  // T x ffn
  std::vector<double> f_act;  // T x ffn
  LnTrace ln2;
  std::vector<double> out;  // T x d
};

// Activations of one forward pass, kept for the backward pass.
struct Trace {
  std::size_t length = 0;
  std::vector<TokenId> tokens;
  std::vector<int> segments;
  LnTrace emb_ln;
  std::vector<double> emb_out;
  std::vector<LayerTrace> layers;

  std::vector<double> pooled;

  std::vector<std::size_t> mlm_positions;
  std::vector<TokenId> mlm_targets;
  std::vector<double> mlm_pre, mlm_act;
  LnTrace mlm_ln;
  std::vector<double> mlm_u;
  std::vector<double> mlm_probs;  // P x V softmax

  const std::vector<double>& hidden() const { return layers.empty() ? emb_out : layers.back().out; }
};

// Small post-LN transformer encoder (BERT layout) with a pooled binary
// classification head and a masked-LM head whose decoder is tied to the
// token embedding. All parameters live in one flat vector so optimizers,
// gradient buffers and checkpoints treat the model as a single array.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& config, std::uint64_t seed);
  Encoder(const EncoderConfig& config, std::vector<double> params);

  const EncoderConfig& config() const { return config_; }
  const EncoderLayout& layout() const { return layout_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  void set_exec(kernels::Exec e) { exec_ = e; }

  // Re-initializes only the classification head (fine-tuning on top of an
  // MLM-pretrained body).
  void reset_classifier_head(std::uint64_t seed);

  void encode(const EncodedInput& input, Trace& trace) const;
  void backward_hidden(const Trace& trace, std::span<const double> d_hidden,
                       std::span<double> grad) const;

  double classifier_logit(const EncodedInput& input, Trace& trace) const;
  // d_logit: dLoss/dLogit for this sample.
  void backward_classifier(const Trace& trace, double d_logit, std::span<double> grad) const;

  // Runs the MLM head at `positions` (tokens there should already be
  // masked in `input`). Returns log p(target) per position.
  std::vector<double> mlm_log_probs(const EncodedInput& input,
                                    std::span<const std::size_t> positions,
                                    std::span<const TokenId> targets, Trace& trace) const;
  // Gradient of sum_p weight_p * NLL_p.
  void backward_mlm(const Trace& trace, std::span<const double> weights,
                    std::span<double> grad) const;

  // Mean of final hidden states over non-special positions.
  std::vector<double> mean_pooled(const EncodedInput& input) const;

 private:
  double* p(const Block& b) { return params_.data() + b.offset; }
  const double* p(const Block& b) const { return params_.data() + b.offset; }
  kernels::ConstMat mat(const Block& b) const { return {p(b), b.rows, b.cols}; }

  EncoderConfig config_;
  EncoderLayout layout_;
  std::vector<double> params_;
  kernels::Exec exec_ = kernels::Exec::kSerial;
};

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_grad_norm = 1.0;  // <= 0 disables clipping
};

class Adam {
 public:
  Adam(std::size_t n, AdamConfig config) : config_(config), m_(n, 0.0), v_(n, 0.0) {}

  // Returns the pre-clipping gradient norm.
  double step(std::span<double> params, std::span<double> grad);
  std::uint64_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace privlabel

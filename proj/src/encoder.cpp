#include "privlabel/encoder.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "privlabel/error.hpp"
#include "privlabel/rng.hpp"

namespace privlabel {

using kernels::ConstMat;
using kernels::Mat;

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// y = g * (x - mean) / std + b over each row of x (rows x d).
void layer_norm(const double* x, std::size_t rows, std::size_t d, const double* g,
                const double* b, double* y, LnTrace& tr) {
  tr.xhat.resize(rows * d);
  tr.inv_std.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    tr.inv_std[r] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      const double xh = (xr[c] - mean) * inv;
      tr.xhat[r * d + c] = xh;
      y[r * d + c] = g[c] * xh + b[c];
    }
  }
}

// Writes dx (overwrite) and accumulates dg, db.
void layer_norm_backward(const double* dy, std::size_t rows, std::size_t d, const double* g,
                         const LnTrace& tr, double* dx, double* dg, double* db) {
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dyr = dy + r * d;
    const double* xh = tr.xhat.data() + r * d;
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dg[c] += dyr[c] * xh[c];
      db[c] += dyr[c];
      dxhat[c] = dyr[c] * g[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xh[c];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      dx[r * d + c] = tr.inv_std[r] * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
    }
  }
}

void add_bias(double* y, std::size_t rows, std::size_t cols, const double* b) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += b[c];
  }
}

void col_sum_into(const double* x, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += x[r * cols + c];
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config and layout

void EncoderConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(Vocabulary::kFirstRegular)) {
    throw Error(ErrorKind::kValidation, "encoder vocab_size too small");
  }
  if (max_len < 4) throw Error(ErrorKind::kValidation, "encoder max_len must be >= 4");
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw Error(ErrorKind::kValidation, "encoder d_model must be a positive multiple of heads");
  }
  if (ffn == 0) throw Error(ErrorKind::kValidation, "encoder ffn must be positive");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"max_len", max_len}, {"d_model", d_model},
          {"heads", heads},           {"layers", layers},   {"ffn", ffn},
          {"init_std", init_std}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.max_len = j.value("max_len", c.max_len);
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.layers = j.value("layers", c.layers);
  c.ffn = j.value("ffn", c.ffn);
  c.init_std = j.value("init_std", c.init_std);
  return c;
}

EncoderLayout EncoderLayout::for_config(const EncoderConfig& c) {
  EncoderLayout l;
  std::size_t off = 0;
  const auto block = [&](std::size_t rows, std::size_t cols) {
    Block b{off, rows, cols};
    off += rows * cols;
    return b;
  };
  const std::size_t d = c.d_model;
  l.tok = block(c.vocab_size, d);
  l.pos = block(c.max_len, d);
  l.seg = block(2, d);
  l.emb_g = block(1, d);
  l.emb_b = block(1, d);
  for (std::size_t i = 0; i < c.layers; ++i) {
    LayerBlocks lb;
    lb.wq = block(d, d);
    lb.bq = block(1, d);
    lb.wk = block(d, d);
    lb.bk = block(1, d);
    lb.wv = block(d, d);
    lb.bv = block(1, d);
    lb.wo = block(d, d);
    lb.bo = block(1, d);
    lb.ln1_g = block(1, d);
    lb.ln1_b = block(1, d);
    lb.w1 = block(d, c.ffn);
    lb.b1 = block(1, c.ffn);
    lb.w2 = block(c.ffn, d);
    lb.b2 = block(1, d);
    lb.ln2_g = block(1, d);
    lb.ln2_b = block(1, d);
    l.layers.push_back(lb);
  }
  l.pool_w = block(d, d);
  l.pool_b = block(1, d);
  l.cls_w = block(1, d);
  l.cls_b = block(1, 1);
  l.mlm_w = block(d, d);
  l.mlm_b = block(1, d);
  l.mlm_g = block(1, d);
  l.mlm_beta = block(1, d);
  l.mlm_out_b = block(1, c.vocab_size);
  l.total = off;
  return l;
}

// ---------------------------------------------------------------------------
// Inputs

EncodedInput encode_pair(const Vocabulary& vocab, std::string_view first, std::string_view second,
                         std::size_t max_len) {
  auto a = vocab.encode(first);
  auto b = vocab.encode(second);
  EncodedInput in;
  const std::size_t budget = max_len - 3;
  if (a.size() + b.size() > budget) {
    in.truncated = true;
    if (a.size() >= budget) {
      // Keep at least one token of the second text.
      a.resize(budget - 1);
      b.resize(std::min<std::size_t>(b.size(), 1));
    } else {
      b.resize(budget - a.size());
    }
  }
  in.tokens.reserve(a.size() + b.size() + 3);
  in.tokens.push_back(Vocabulary::kCls);
  in.tokens.insert(in.tokens.end(), a.begin(), a.end());
  in.tokens.push_back(Vocabulary::kSep);
  in.segments.assign(in.tokens.size(), 0);
  in.tokens.insert(in.tokens.end(), b.begin(), b.end());
  in.tokens.push_back(Vocabulary::kSep);
  in.segments.resize(in.tokens.size(), 1);
  return in;
}

EncodedInput encode_single(std::span<const TokenId> tokens, std::size_t max_len) {
  EncodedInput in;
  const std::size_t keep = std::min(tokens.size(), max_len - 2);
  in.truncated = keep < tokens.size();
  in.tokens.push_back(Vocabulary::kCls);
  in.tokens.insert(in.tokens.end(), tokens.begin(), tokens.begin() + keep);
  in.tokens.push_back(Vocabulary::kSep);
  in.segments.assign(in.tokens.size(), 0);
  return in;
}

// ---------------------------------------------------------------------------
// Construction

Encoder::Encoder(const EncoderConfig& config, std::uint64_t seed)
    : config_(config), layout_(EncoderLayout::for_config(config)) {
  config_.validate();
  params_.assign(layout_.total, 0.0);
  Rng rng(seed);
  const auto normal_init = [&](const Block& b) {
    double* x = p(b);
    for (std::size_t i = 0; i < b.size(); ++i) x[i] = rng.normal(0.0, config_.init_std);
  };
  const auto fill = [&](const Block& b, double v) { std::fill_n(p(b), b.size(), v); };
  normal_init(layout_.tok);
  normal_init(layout_.pos);
  normal_init(layout_.seg);
  fill(layout_.emb_g, 1.0);
  for (const auto& lb : layout_.layers) {
    for (const Block* w : {&lb.wq, &lb.wk, &lb.wv, &lb.wo, &lb.w1, &lb.w2}) normal_init(*w);
    fill(lb.ln1_g, 1.0);
    fill(lb.ln2_g, 1.0);
  }
  normal_init(layout_.pool_w);
  normal_init(layout_.cls_w);
  normal_init(layout_.mlm_w);
  fill(layout_.mlm_g, 1.0);
}

Encoder::Encoder(const EncoderConfig& config, std::vector<double> params)
    : config_(config), layout_(EncoderLayout::for_config(config)), params_(std::move(params)) {
  config_.validate();
  if (params_.size() != layout_.total) {
    throw Error(ErrorKind::kValidation, "encoder parameter count mismatch: expected " +
                                            std::to_string(layout_.total) + ", got " +
                                            std::to_string(params_.size()));
  }
}

void Encoder::reset_classifier_head(std::uint64_t seed) {
  Rng rng(seed);
  for (const Block* b : {&layout_.pool_w, &layout_.cls_w}) {
    double* x = p(*b);
    for (std::size_t i = 0; i < b->size(); ++i) x[i] = rng.normal(0.0, config_.init_std);
  }
  std::fill_n(p(layout_.pool_b), layout_.pool_b.size(), 0.0);
  std::fill_n(p(layout_.cls_b), layout_.cls_b.size(), 0.0);
}

// ---------------------------------------------------------------------------
// Body forward / backward

void Encoder::encode(const EncodedInput& input, Trace& tr) const {
  const std::size_t T = input.tokens.size();
  const std::size_t d = config_.d_model;
  if (T == 0 || T > config_.max_len) {
    throw Error(ErrorKind::kPrecondition, "encoder input length " + std::to_string(T) +
                                              " outside [1, " + std::to_string(config_.max_len) +
                                              "]");
  }
  tr.length = T;
  tr.tokens = input.tokens;
  tr.segments = input.segments;

  std::vector<double> x0(T * d);
  for (std::size_t t = 0; t < T; ++t) {
    const auto tok = static_cast<std::size_t>(input.tokens[t]);
    const auto seg = static_cast<std::size_t>(input.segments[t]);
    if (tok >= config_.vocab_size || seg > 1) {
      throw Error(ErrorKind::kPrecondition, "token or segment id out of range");
    }
    const double* e = p(layout_.tok) + tok * d;
    const double* ps = p(layout_.pos) + t * d;
    const double* sg = p(layout_.seg) + seg * d;
    for (std::size_t c = 0; c < d; ++c) x0[t * d + c] = e[c] + ps[c] + sg[c];
  }
  tr.emb_out.resize(T * d);
  layer_norm(x0.data(), T, d, p(layout_.emb_g), p(layout_.emb_b), tr.emb_out.data(), tr.emb_ln);

  const std::size_t H = config_.heads;
  const std::size_t dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t F = config_.ffn;
  tr.layers.resize(layout_.layers.size());
  const std::vector<double>* x = &tr.emb_out;
  std::vector<double> tmp(T * std::max(d, F));
  for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
    const auto& lb = layout_.layers[l];
    auto& lt = tr.layers[l];
    const ConstMat xm{x->data(), T, d};
    for (auto* buf : {&lt.q, &lt.k, &lt.v, &lt.ctx, &lt.h1, &lt.out}) buf->assign(T * d, 0.0);
    kernels::gemm(exec_, xm, mat(lb.wq), Mat{lt.q.data(), T, d}, false);
    kernels::gemm(exec_, xm, mat(lb.wk), Mat{lt.k.data(), T, d}, false);
    kernels::gemm(exec_, xm, mat(lb.wv), Mat{lt.v.data(), T, d}, false);
    add_bias(lt.q.data(), T, d, p(lb.bq));
    add_bias(lt.k.data(), T, d, p(lb.bk));
    add_bias(lt.v.data(), T, d, p(lb.bv));

    lt.attn.assign(H * T * T, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t c0 = h * dh;
      for (std::size_t i = 0; i < T; ++i) {
        double* a = lt.attn.data() + (h * T + i) * T;
        double mx = -1e300;
        for (std::size_t j = 0; j < T; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += lt.q[i * d + c0 + c] * lt.k[j * d + c0 + c];
          a[j] = s * scale;
          mx = std::max(mx, a[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < T; ++j) {
          a[j] = std::exp(a[j] - mx);
          z += a[j];
        }
        for (std::size_t j = 0; j < T; ++j) a[j] /= z;
        for (std::size_t j = 0; j < T; ++j) {
          const double w = a[j];
          for (std::size_t c = 0; c < dh; ++c) lt.ctx[i * d + c0 + c] += w * lt.v[j * d + c0 + c];
        }
      }
    }
    // res1 = x + ctx Wo + bo
    std::vector<double> res(T * d);
    kernels::gemm(exec_, ConstMat{lt.ctx.data(), T, d}, mat(lb.wo), Mat{res.data(), T, d}, false);
    add_bias(res.data(), T, d, p(lb.bo));
    for (std::size_t i = 0; i < T * d; ++i) res[i] += (*x)[i];
    layer_norm(res.data(), T, d, p(lb.ln1_g), p(lb.ln1_b), lt.h1.data(), lt.ln1);

    lt.f_pre.assign(T * F, 0.0);
    kernels::gemm(exec_, ConstMat{lt.h1.data(), T, d}, mat(lb.w1), Mat{lt.f_pre.data(), T, F},
                  false);
    add_bias(lt.f_pre.data(), T, F, p(lb.b1));
    lt.f_act.resize(T * F);
    for (std::size_t i = 0; i < T * F; ++i) lt.f_act[i] = gelu(lt.f_pre[i]);
    kernels::gemm(exec_, ConstMat{lt.f_act.data(), T, F}, mat(lb.w2), Mat{res.data(), T, d},
                  false);
    add_bias(res.data(), T, d, p(lb.b2));
    for (std::size_t i = 0; i < T * d; ++i) res[i] += lt.h1[i];
    layer_norm(res.data(), T, d, p(lb.ln2_g), p(lb.ln2_b), lt.out.data(), lt.ln2);
    x = &lt.out;
  }
}

void Encoder::backward_hidden(const Trace& tr, std::span<const double> d_hidden,
                              std::span<double> grad) const {
  const std::size_t T = tr.length;
  const std::size_t d = config_.d_model;
  const std::size_t H = config_.heads;
  const std::size_t dh = d / H;
  const std::size_t F = config_.ffn;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  assert(d_hidden.size() == T * d && grad.size() == params_.size());
  double* g = grad.data();
  const auto gp = [&](const Block& b) { return g + b.offset; };
  const auto gmat = [&](const Block& b) { return Mat{g + b.offset, b.rows, b.cols}; };

  std::vector<double> dx(d_hidden.begin(), d_hidden.end());
  std::vector<double> d_res(T * d), d_h1(T * d), d_f(T * F), d_ctx(T * d), dq(T * d), dk(T * d),
      dv(T * d), d_a(T);

  for (std::size_t li = layout_.layers.size(); li-- > 0;) {
    const auto& lb = layout_.layers[li];
    const auto& lt = tr.layers[li];
    const std::vector<double>& x_in = li == 0 ? tr.emb_out : tr.layers[li - 1].out;

    // out = LN2(h1 + FFN(h1))
    layer_norm_backward(dx.data(), T, d, p(lb.ln2_g), lt.ln2, d_res.data(), gp(lb.ln2_g),
                        gp(lb.ln2_b));
    kernels::gemm_tn(exec_, ConstMat{lt.f_act.data(), T, F}, ConstMat{d_res.data(), T, d},
                     gmat(lb.w2), true);
    col_sum_into(d_res.data(), T, d, gp(lb.b2));
    kernels::gemm_nt(exec_, ConstMat{d_res.data(), T, d}, mat(lb.w2), Mat{d_f.data(), T, F},
                     false);
    for (std::size_t i = 0; i < T * F; ++i) d_f[i] *= gelu_grad(lt.f_pre[i]);
    kernels::gemm_tn(exec_, ConstMat{lt.h1.data(), T, d}, ConstMat{d_f.data(), T, F},
                     gmat(lb.w1), true);
    col_sum_into(d_f.data(), T, F, gp(lb.b1));
    d_h1 = d_res;
    kernels::gemm_nt(exec_, ConstMat{d_f.data(), T, F}, mat(lb.w1), Mat{d_h1.data(), T, d},
                     true);

    // h1 = LN1(x + ctx Wo + bo)
    layer_norm_backward(d_h1.data(), T, d, p(lb.ln1_g), lt.ln1, d_res.data(), gp(lb.ln1_g),
                        gp(lb.ln1_b));
    kernels::gemm_tn(exec_, ConstMat{lt.ctx.data(), T, d}, ConstMat{d_res.data(), T, d},
                     gmat(lb.wo), true);
    col_sum_into(d_res.data(), T, d, gp(lb.bo));
    kernels::gemm_nt(exec_, ConstMat{d_res.data(), T, d}, mat(lb.wo), Mat{d_ctx.data(), T, d},
                     false);

    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dk.begin(), dk.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t c0 = h * dh;
      for (std::size_t i = 0; i < T; ++i) {
        const double* a = lt.attn.data() + (h * T + i) * T;
        double dot = 0.0;
        for (std::size_t j = 0; j < T; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += d_ctx[i * d + c0 + c] * lt.v[j * d + c0 + c];
          d_a[j] = s;
          dot += a[j] * s;
          for (std::size_t c = 0; c < dh; ++c) dv[j * d + c0 + c] += a[j] * d_ctx[i * d + c0 + c];
        }
        for (std::size_t j = 0; j < T; ++j) {
          const double ds = a[j] * (d_a[j] - dot) * scale;
          if (ds == 0.0) continue;
          for (std::size_t c = 0; c < dh; ++c) {
            dq[i * d + c0 + c] += ds * lt.k[j * d + c0 + c];
            dk[j * d + c0 + c] += ds * lt.q[i * d + c0 + c];
          }
        }
      }
    }
    const ConstMat xm{x_in.data(), T, d};
    // Residual path first, then the three projections.
    dx = d_res;
    const std::pair<const std::vector<double>*, std::pair<const Block*, const Block*>> proj[] = {
        {&dq, {&lb.wq, &lb.bq}}, {&dk, {&lb.wk, &lb.bk}}, {&dv, {&lb.wv, &lb.bv}}};
    for (const auto& [dm, wb] : proj) {
      kernels::gemm_tn(exec_, xm, ConstMat{dm->data(), T, d}, gmat(*wb.first), true);
      col_sum_into(dm->data(), T, d, gp(*wb.second));
      kernels::gemm_nt(exec_, ConstMat{dm->data(), T, d}, mat(*wb.first), Mat{dx.data(), T, d},
                       true);
    }
  }

  std::vector<double> d_x0(T * d);
  layer_norm_backward(dx.data(), T, d, p(layout_.emb_g), tr.emb_ln, d_x0.data(),
                      gp(layout_.emb_g), gp(layout_.emb_b));
  for (std::size_t t = 0; t < T; ++t) {
    double* dt = gp(layout_.tok) + static_cast<std::size_t>(tr.tokens[t]) * d;
    double* dp = gp(layout_.pos) + t * d;
    double* ds = gp(layout_.seg) + static_cast<std::size_t>(tr.segments[t]) * d;
    for (std::size_t c = 0; c < d; ++c) {
      dt[c] += d_x0[t * d + c];
      dp[c] += d_x0[t * d + c];
      ds[c] += d_x0[t * d + c];
    }
  }
}

// ---------------------------------------------------------------------------
// Classification head: logit = w . tanh(W h_cls + b) + c

double Encoder::classifier_logit(const EncodedInput& input, Trace& tr) const {
  encode(input, tr);
  const std::size_t d = config_.d_model;
  const double* cls = tr.hidden().data();
  tr.pooled.assign(d, 0.0);
  kernels::serial::gemm(ConstMat{cls, 1, d}, mat(layout_.pool_w), Mat{tr.pooled.data(), 1, d},
                        false);
  double logit = p(layout_.cls_b)[0];
  const double* w = p(layout_.cls_w);
  const double* b = p(layout_.pool_b);
  for (std::size_t c = 0; c < d; ++c) {
    tr.pooled[c] = std::tanh(tr.pooled[c] + b[c]);
    logit += w[c] * tr.pooled[c];
  }
  return logit;
}

void Encoder::backward_classifier(const Trace& tr, double d_logit, std::span<double> grad) const {
  const std::size_t d = config_.d_model;
  double* g = grad.data();
  g[layout_.cls_b.offset] += d_logit;
  const double* w = p(layout_.cls_w);
  std::vector<double> d_pre(d);
  for (std::size_t c = 0; c < d; ++c) {
    g[layout_.cls_w.offset + c] += d_logit * tr.pooled[c];
    d_pre[c] = d_logit * w[c] * (1.0 - tr.pooled[c] * tr.pooled[c]);
    g[layout_.pool_b.offset + c] += d_pre[c];
  }
  const double* cls = tr.hidden().data();
  kernels::serial::gemm_tn(ConstMat{cls, 1, d}, ConstMat{d_pre.data(), 1, d},
                           Mat{g + layout_.pool_w.offset, d, d}, true);
  std::vector<double> d_hidden(tr.length * d, 0.0);
  kernels::serial::gemm_nt(ConstMat{d_pre.data(), 1, d}, mat(layout_.pool_w),
                           Mat{d_hidden.data(), 1, d}, false);
  backward_hidden(tr, d_hidden, grad);
}

// ---------------------------------------------------------------------------
// MLM head: logits = LN(gelu(h W + b)) E^T + out_b

std::vector<double> Encoder::mlm_log_probs(const EncodedInput& input,
                                           std::span<const std::size_t> positions,
                                           std::span<const TokenId> targets, Trace& tr) const {
  assert(positions.size() == targets.size());
  encode(input, tr);
  const std::size_t d = config_.d_model;
  const std::size_t V = config_.vocab_size;
  const std::size_t P = positions.size();
  tr.mlm_positions.assign(positions.begin(), positions.end());
  tr.mlm_targets.assign(targets.begin(), targets.end());
  std::vector<double> hp(P * d);
  for (std::size_t i = 0; i < P; ++i) {
    if (positions[i] >= tr.length) throw Error(ErrorKind::kPrecondition, "mask position out of range");
    std::copy_n(tr.hidden().data() + positions[i] * d, d, hp.data() + i * d);
  }
  tr.mlm_pre.assign(P * d, 0.0);
  kernels::gemm(exec_, ConstMat{hp.data(), P, d}, mat(layout_.mlm_w), Mat{tr.mlm_pre.data(), P, d},
                false);
  add_bias(tr.mlm_pre.data(), P, d, p(layout_.mlm_b));
  tr.mlm_act.resize(P * d);
  for (std::size_t i = 0; i < P * d; ++i) tr.mlm_act[i] = gelu(tr.mlm_pre[i]);
  tr.mlm_u.resize(P * d);
  layer_norm(tr.mlm_act.data(), P, d, p(layout_.mlm_g), p(layout_.mlm_beta), tr.mlm_u.data(),
             tr.mlm_ln);
  tr.mlm_probs.assign(P * V, 0.0);
  kernels::gemm_nt(exec_, ConstMat{tr.mlm_u.data(), P, d}, mat(layout_.tok),
                   Mat{tr.mlm_probs.data(), P, V}, false);
  std::vector<double> out(P);
  const double* ob = p(layout_.mlm_out_b);
  for (std::size_t i = 0; i < P; ++i) {
    double* row = tr.mlm_probs.data() + i * V;
    double mx = -1e300;
    for (std::size_t v = 0; v < V; ++v) {
      row[v] += ob[v];
      mx = std::max(mx, row[v]);
    }
    double z = 0.0;
    for (std::size_t v = 0; v < V; ++v) z += std::exp(row[v] - mx);
    const double log_z = mx + std::log(z);
    out[i] = row[static_cast<std::size_t>(targets[i])] - log_z;
    for (std::size_t v = 0; v < V; ++v) row[v] = std::exp(row[v] - log_z);
  }
  return out;
}

void Encoder::backward_mlm(const Trace& tr, std::span<const double> weights,
                           std::span<double> grad) const {
  const std::size_t d = config_.d_model;
  const std::size_t V = config_.vocab_size;
  const std::size_t P = tr.mlm_positions.size();
  assert(weights.size() == P);
  double* g = grad.data();
  std::vector<double> d_logits(tr.mlm_probs);
  for (std::size_t i = 0; i < P; ++i) {
    double* row = d_logits.data() + i * V;
    row[static_cast<std::size_t>(tr.mlm_targets[i])] -= 1.0;
    for (std::size_t v = 0; v < V; ++v) row[v] *= weights[i];
  }
  col_sum_into(d_logits.data(), P, V, g + layout_.mlm_out_b.offset);
  kernels::gemm_tn(exec_, ConstMat{d_logits.data(), P, V}, ConstMat{tr.mlm_u.data(), P, d},
                   Mat{g + layout_.tok.offset, V, d}, true);
  std::vector<double> d_u(P * d, 0.0);
  kernels::gemm(exec_, ConstMat{d_logits.data(), P, V}, mat(layout_.tok), Mat{d_u.data(), P, d},
                false);
  std::vector<double> d_act(P * d);
  layer_norm_backward(d_u.data(), P, d, p(layout_.mlm_g), tr.mlm_ln, d_act.data(),
                      g + layout_.mlm_g.offset, g + layout_.mlm_beta.offset);
  for (std::size_t i = 0; i < P * d; ++i) d_act[i] *= gelu_grad(tr.mlm_pre[i]);
  std::vector<double> hp(P * d);
  for (std::size_t i = 0; i < P; ++i) {
    std::copy_n(tr.hidden().data() + tr.mlm_positions[i] * d, d, hp.data() + i * d);
  }
  kernels::gemm_tn(exec_, ConstMat{hp.data(), P, d}, ConstMat{d_act.data(), P, d},
                   Mat{g + layout_.mlm_w.offset, d, d}, true);
  col_sum_into(d_act.data(), P, d, g + layout_.mlm_b.offset);
  std::vector<double> d_hp(P * d, 0.0);
  kernels::gemm_nt(exec_, ConstMat{d_act.data(), P, d}, mat(layout_.mlm_w),
                   Mat{d_hp.data(), P, d}, false);
  std::vector<double> d_hidden(tr.length * d, 0.0);
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t c = 0; c < d; ++c) d_hidden[tr.mlm_positions[i] * d + c] += d_hp[i * d + c];
  }
  backward_hidden(tr, d_hidden, grad);
}

std::vector<double> Encoder::mean_pooled(const EncodedInput& input) const {
  Trace tr;
  encode(input, tr);
  const std::size_t d = config_.d_model;
  std::vector<double> out(d, 0.0);
  std::size_t n = 0;
  for (std::size_t t = 0; t < tr.length; ++t) {
    if (input.tokens[t] < Vocabulary::kFirstRegular && input.tokens[t] != Vocabulary::kUnk) continue;
    for (std::size_t c = 0; c < d; ++c) out[c] += tr.hidden()[t * d + c];
    ++n;
  }
  if (n > 0) {
    for (auto& v : out) v /= static_cast<double>(n);
  }
  return out;
}

// ---------------------------------------------------------------------------

double Adam::step(std::span<double> params, std::span<double> grad) {
  assert(params.size() == m_.size() && grad.size() == m_.size());
  double sq = 0.0;
  for (double gv : grad) sq += gv * gv;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw Error(ErrorKind::kNumeric, "non-finite gradient");
  const double clip =
      config_.max_grad_norm > 0 && norm > config_.max_grad_norm ? config_.max_grad_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double gv = grad[i] * clip;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * gv;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * gv * gv;
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
  }
  return norm;
}

}  // namespace privlabel

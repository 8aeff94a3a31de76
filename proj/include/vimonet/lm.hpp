#pragma once

// Small pre-norm decoder-only language model with visual-token splicing,
// LoRA-aware attention projections, the masked next-token cross-entropy and
// greedy / sampled decoding. All math is double precision; backward passes
// are hand-derived and checked against finite differences in the tests.

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vimonet/adaptation.hpp"
#include "vimonet/core.hpp"
#include "vimonet/translators.hpp"

namespace vimonet::lm {

using adaptation::Adapter;
using adaptation::LoraParams;
using adaptation::Target;

struct LMConfig {
  int d_lm = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_len = 256;
  int vocab_size = 0;

  int head_dim() const { return d_lm / n_heads; }

  void validate() const {
    if (d_lm < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || max_len < 1)
      throw ContractError("LM dimensions must be positive");
    if (d_lm % n_heads != 0) throw ContractError("d_lm must be divisible by n_heads");
    if (vocab_size < static_cast<int>(kSpecialTokens.size()))
      throw ContractError("vocab_size must cover the special tokens");
  }

  friend bool operator==(const LMConfig&, const LMConfig&) = default;
};

inline constexpr double kNormEps = 1e-6;

struct LayerParams {
  Vec norm1;
  Mat wq, wk, wv, wo;  // d x d, (out, in)
  Vec norm2;
  Mat w1;  // d_ff x d
  Vec b1;
  Mat w2;  // d x d_ff
  Vec b2;

  const Mat& projection(Target t) const {
    switch (t) {
      case Target::wq: return wq;
      case Target::wk: return wk;
      case Target::wv: return wv;
      default: return wo;
    }
  }
  Mat& projection(Target t) { return const_cast<Mat&>(std::as_const(*this).projection(t)); }
};

struct LMParams {
  LMConfig cfg;
  Mat tok_emb;  // vocab x d
  Mat pos_emb;  // max_len x d
  std::vector<LayerParams> layers;
  Vec norm_f;
  Mat head;  // vocab x d

  static LMParams init(const LMConfig& cfg, Rng& rng) {
    cfg.validate();
    const int d = cfg.d_lm;
    const double small = 0.02;
    const double fan_d = 1.0 / std::sqrt(static_cast<double>(d));
    const double fan_ff = 1.0 / std::sqrt(static_cast<double>(cfg.d_ff));
    const double resid = 1.0 / std::sqrt(2.0 * cfg.n_layers);
    LMParams p;
    p.cfg = cfg;
    p.tok_emb = normal_matrix(cfg.vocab_size, d, rng, small);
    p.pos_emb = normal_matrix(cfg.max_len, d, rng, small);
    p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& l : p.layers) {
      l.norm1 = Vec::Ones(d);
      l.wq = normal_matrix(d, d, rng, fan_d);
      l.wk = normal_matrix(d, d, rng, fan_d);
      l.wv = normal_matrix(d, d, rng, fan_d);
      l.wo = normal_matrix(d, d, rng, fan_d * resid);
      l.norm2 = Vec::Ones(d);
      l.w1 = normal_matrix(cfg.d_ff, d, rng, fan_d);
      l.b1 = Vec::Zero(cfg.d_ff);
      l.w2 = normal_matrix(d, cfg.d_ff, rng, fan_ff * resid);
      l.b2 = Vec::Zero(d);
    }
    p.norm_f = Vec::Ones(d);
    p.head = normal_matrix(cfg.vocab_size, d, rng, small);
    return p;
  }

  static LMParams zeros_like(const LMParams& p) {
    LMParams z = p;
    z.for_each([](std::string_view, auto& t) { t.setZero(); });
    return z;
  }

  template <class F>
  void for_each(F&& f) {
    for_each_impl(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    for_each_impl(*this, f);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](std::string_view, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }

 private:
  template <class Self, class F>
  static void for_each_impl(Self& self, F& f) {
    f(std::string("tok_emb"), self.tok_emb);
    f(std::string("pos_emb"), self.pos_emb);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      auto& l = self.layers[i];
      const std::string pre = "layers." + std::to_string(i) + ".";
      f(pre + "norm1", l.norm1);
      f(pre + "wq", l.wq);
      f(pre + "wk", l.wk);
      f(pre + "wv", l.wv);
      f(pre + "wo", l.wo);
      f(pre + "norm2", l.norm2);
      f(pre + "w1", l.w1);
      f(pre + "b1", l.b1);
      f(pre + "w2", l.w2);
      f(pre + "b2", l.b2);
    }
    f(std::string("norm_f"), self.norm_f);
    f(std::string("head"), self.head);
  }
};

// Folds every active adapter into a copy of the base weights.
inline LMParams merge_lora(const LMParams& base, const LoraParams& lora) {
  LMParams merged = base;
  for (std::size_t l = 0; l < merged.layers.size(); ++l)
    for (auto t : {Target::wq, Target::wk, Target::wv, Target::wo})
      if (const Adapter* a = lora.adapter(l, t))
        merged.layers[l].projection(t) = adaptation::merge_lora(base.layers[l].projection(t), *a, lora.spec);
  return merged;
}

// ---------------------------------------------------------------------------
// Splicing

struct EmbeddedSequence {
  Mat vectors;                    // L_total x d, positional vectors included
  std::vector<bool> loss_mask;    // true only on response positions
  std::vector<TokenId> token_ids; // -1 on visual positions
  int visual_begin = -1;
  int visual_count = 0;

  int length() const { return static_cast<int>(vectors.rows()); }
};

// Token ids with the single VIS replaced by `visual` rows; `response` (if
// any) is appended and marked in the loss mask.
inline EmbeddedSequence embed_tokens(const std::vector<TokenId>& prompt_ids, TokenId vis_id, const Mat* visual,
                                     const TokenSequence* response, const LMParams& params) {
  const int d = params.cfg.d_lm;
  const int k = visual ? static_cast<int>(visual->rows()) : 0;
  if (visual && visual->cols() != d)
    throw ContractError("visual token width " + std::to_string(visual->cols()) + " != d_lm " + std::to_string(d));
  std::size_t vis_count = 0;
  for (auto id : prompt_ids) vis_count += id == vis_id;
  if (visual && vis_count != 1) throw ContractError("prompt must contain exactly one VIS");
  if (!visual && vis_count != 0) throw ContractError("VIS placeholder present but no visual embeddings given");

  const std::size_t resp_len = response ? response->size() : 0;
  const std::size_t total = prompt_ids.size() - vis_count + static_cast<std::size_t>(k) + resp_len;
  if (total > static_cast<std::size_t>(params.cfg.max_len))
    throw CapacityError("sequence length " + std::to_string(total) + " exceeds max_len " +
                        std::to_string(params.cfg.max_len));

  EmbeddedSequence seq;
  seq.vectors.resize(static_cast<Eigen::Index>(total), d);
  seq.loss_mask.assign(total, false);
  seq.token_ids.assign(total, -1);
  Eigen::Index row = 0;
  auto put_token = [&](TokenId id, bool masked) {
    if (id < 0 || id >= params.cfg.vocab_size) throw InvalidTokenError("token id " + std::to_string(id) + " out of range");
    seq.vectors.row(row) = params.tok_emb.row(id);
    seq.token_ids[static_cast<std::size_t>(row)] = id;
    seq.loss_mask[static_cast<std::size_t>(row)] = masked;
    ++row;
  };
  for (auto id : prompt_ids) {
    if (id == vis_id && visual) {
      seq.visual_begin = static_cast<int>(row);
      seq.visual_count = k;
      seq.vectors.middleRows(row, k) = *visual;
      row += k;
    } else {
      put_token(id, false);
    }
  }
  if (response)
    for (auto id : response->ids) put_token(id, true);
  seq.vectors += params.pos_emb.topRows(static_cast<Eigen::Index>(total));
  return seq;
}

inline EmbeddedSequence embed_with_visual(const Prompt& prompt, const translators::VisualEmbeddings& vis,
                                          const TokenSequence* response, const LMParams& params,
                                          const Vocabulary& vocab) {
  if (count_vis(prompt.instruction_tokens, vocab) != 1) throw ContractError("prompt must contain exactly one VIS");
  return embed_tokens(prompt.instruction_tokens.ids, vocab.specials().vis, &vis.tokens, response, params);
}

// Scatters d(vectors) into token/position embedding grads; returns the
// visual rows' gradient (K x d, empty when there are none).
inline Mat embed_backward(const EmbeddedSequence& seq, const Mat& dvectors, LMParams* grads) {
  if (grads) {
    grads->pos_emb.topRows(dvectors.rows()) += dvectors;
    for (Eigen::Index r = 0; r < dvectors.rows(); ++r) {
      auto id = seq.token_ids[static_cast<std::size_t>(r)];
      if (id >= 0) grads->tok_emb.row(id) += dvectors.row(r);
    }
  }
  if (seq.visual_count == 0) return Mat(0, dvectors.cols());
  return dvectors.middleRows(seq.visual_begin, seq.visual_count);
}

// ---------------------------------------------------------------------------
// Forward / backward

struct LayerCache {
  Mat x_in;
  Vec rms1;
  Mat n1, h1;
  Mat q, k, v;
  std::vector<Mat> probs;  // per head, L x L lower-triangular
  Mat attn;                // concatenated head outputs, L x d
  Mat x_mid;
  Vec rms2;
  Mat n2, h2;
  Mat u, g;  // FFN pre-activation and activation, L x d_ff
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Mat x_final;
  Vec rms_f;
  Mat n_f, h_f;
};

namespace detail {

inline Mat rmsnorm(const Mat& x, const Vec& gain, Vec* rms_out, Mat* normed_out) {
  const auto d = static_cast<double>(x.cols());
  Vec rms = ((x.array().square().rowwise().sum() / d) + kNormEps).sqrt().matrix();
  Mat normed = x.array().colwise() / rms.array();
  Mat out = normed.array().rowwise() * gain.transpose().array();
  if (rms_out) *rms_out = std::move(rms);
  if (normed_out) *normed_out = std::move(normed);
  return out;
}

inline Mat rmsnorm_backward(const Mat& dy, const Vec& gain, const Vec& rms, const Mat& normed, Vec* dgain) {
  if (dgain) *dgain += (dy.array() * normed.array()).colwise().sum().transpose().matrix();
  Mat dn = dy.array().rowwise() * gain.transpose().array();
  const auto d = static_cast<double>(dy.cols());
  Vec proj = (dn.array() * normed.array()).rowwise().sum() / d;
  Mat dx = (dn.array() - normed.array().colwise() * proj.array()).colwise() / rms.array();
  return dx;
}

inline Mat project(const Mat& x, const Mat& W, const Adapter* a, double scale) {
  Mat y = x * W.transpose();
  if (a) y.noalias() += scale * ((x * a->A.transpose()) * a->B.transpose());
  return y;
}

inline Mat project_backward(const Mat& x, const Mat& W, const Adapter* a, double scale, const Mat& dy, Mat* dW,
                            Adapter* da) {
  if (dW) dW->noalias() += dy.transpose() * x;
  Mat dx = dy * W;
  if (a) {
    Mat dyB = dy * a->B;  // L x r
    if (da) {
      Mat xA = x * a->A.transpose();  // L x r
      da->B.noalias() += scale * (dy.transpose() * xA);
      da->A.noalias() += scale * (dyB.transpose() * x);
    }
    dx.noalias() += scale * (dyB * a->A);
  }
  return dx;
}

inline void check_finite(const Mat& m, int layer, const char* what) {
  if (!m.allFinite())
    throw NumericFault(std::string("non-finite ") + what + " in layer " + std::to_string(layer), layer);
}

}  // namespace detail

// Returns logits (L x vocab). Position t only reads positions <= t.
inline Mat forward(const Mat& x0, const LMParams& p, const LoraParams* lora = nullptr, ForwardCache* cache = nullptr) {
  const auto& cfg = p.cfg;
  const int L = static_cast<int>(x0.rows());
  if (L > cfg.max_len) throw CapacityError("sequence longer than max_len");
  if (x0.cols() != cfg.d_lm) throw ContractError("input width != d_lm");
  if (lora && lora->layers.size() != p.layers.size()) throw ContractError("LoRA layer count mismatch");
  const int H = cfg.n_heads, dh = cfg.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const double scale = lora ? lora->spec.scale() : 0.0;
  if (cache) cache->layers.assign(p.layers.size(), {});

  Mat x = x0;
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const auto& lp = p.layers[li];
    auto adapter = [&](Target t) { return lora ? lora->adapter(li, t) : nullptr; };
    LayerCache local;
    LayerCache& c = cache ? cache->layers[li] : local;
    c.x_in = x;
    c.h1 = detail::rmsnorm(x, lp.norm1, &c.rms1, &c.n1);
    c.q = detail::project(c.h1, lp.wq, adapter(Target::wq), scale);
    c.k = detail::project(c.h1, lp.wk, adapter(Target::wk), scale);
    c.v = detail::project(c.h1, lp.wv, adapter(Target::wv), scale);
    c.attn = Mat::Zero(L, cfg.d_lm);
    c.probs.assign(static_cast<std::size_t>(H), Mat::Zero(L, L));
    for (int h = 0; h < H; ++h) {
      Mat& P = c.probs[static_cast<std::size_t>(h)];
      const int off = h * dh;
      for (int i = 0; i < L; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j <= i; ++j) {
          P(i, j) = c.q.row(i).segment(off, dh).dot(c.k.row(j).segment(off, dh)) * inv_sqrt_dh;
          mx = std::max(mx, P(i, j));
        }
        double sum = 0.0;
        for (int j = 0; j <= i; ++j) {
          P(i, j) = std::exp(P(i, j) - mx);
          sum += P(i, j);
        }
        for (int j = 0; j <= i; ++j) {
          P(i, j) /= sum;
          c.attn.row(i).segment(off, dh) += P(i, j) * c.v.row(j).segment(off, dh);
        }
      }
    }
    x = x + detail::project(c.attn, lp.wo, adapter(Target::wo), scale);
    c.x_mid = x;
    c.h2 = detail::rmsnorm(x, lp.norm2, &c.rms2, &c.n2);
    c.u = c.h2 * lp.w1.transpose();
    c.u.rowwise() += lp.b1.transpose();
    c.g = translators::apply(translators::Activation::gelu, c.u);
    Mat f = c.g * lp.w2.transpose();
    f.rowwise() += lp.b2.transpose();
    x += f;
    detail::check_finite(x, static_cast<int>(li), "activation");
  }
  Vec rms_f;
  Mat n_f;
  Mat h_f = detail::rmsnorm(x, p.norm_f, &rms_f, &n_f);
  Mat logits = h_f * p.head.transpose();
  detail::check_finite(logits, static_cast<int>(p.layers.size()), "logits");
  if (cache) {
    cache->x_final = std::move(x);
    cache->rms_f = std::move(rms_f);
    cache->n_f = std::move(n_f);
    cache->h_f = std::move(h_f);
  }
  return logits;
}

// Backpropagates dlogits. Base-weight gradients accumulate into `dp` when
// non-null, adapter gradients into `dlora` when non-null. Returns dL/dx0.
inline Mat backward(const ForwardCache& cache, const Mat& dlogits, const LMParams& p, const LoraParams* lora,
                    LMParams* dp, LoraParams* dlora) {
  const auto& cfg = p.cfg;
  const int L = static_cast<int>(dlogits.rows());
  const int H = cfg.n_heads, dh = cfg.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const double scale = lora ? lora->spec.scale() : 0.0;

  if (dp) dp->head.noalias() += dlogits.transpose() * cache.h_f;
  Mat dh_f = dlogits * p.head;
  Mat dx = detail::rmsnorm_backward(dh_f, p.norm_f, cache.rms_f, cache.n_f, dp ? &dp->norm_f : nullptr);

  for (int li = static_cast<int>(p.layers.size()) - 1; li >= 0; --li) {
    const auto& lp = p.layers[static_cast<std::size_t>(li)];
    const auto& c = cache.layers[static_cast<std::size_t>(li)];
    LayerParams* g = dp ? &dp->layers[static_cast<std::size_t>(li)] : nullptr;
    auto adapter = [&](Target t) { return lora ? lora->adapter(static_cast<std::size_t>(li), t) : nullptr; };
    auto dadapter = [&](Target t) -> Adapter* {
      return dlora ? dlora->adapter(static_cast<std::size_t>(li), t) : nullptr;
    };

    // FFN: x_out = x_mid + W2 gelu(W1 h2 + b1) + b2
    if (g) {
      g->w2.noalias() += dx.transpose() * c.g;
      g->b2 += dx.colwise().sum().transpose();
    }
    Mat dg = dx * lp.w2;
    Mat du = dg.cwiseProduct(translators::apply_grad(translators::Activation::gelu, c.u));
    if (g) {
      g->w1.noalias() += du.transpose() * c.h2;
      g->b1 += du.colwise().sum().transpose();
    }
    Mat dh2 = du * lp.w1;
    dx += detail::rmsnorm_backward(dh2, lp.norm2, c.rms2, c.n2, g ? &g->norm2 : nullptr);

    // Attention: x_mid = x_in + Wo attn
    Mat dattn = detail::project_backward(c.attn, lp.wo, adapter(Target::wo), scale, dx, g ? &g->wo : nullptr,
                                         dadapter(Target::wo));
    Mat dq = Mat::Zero(L, cfg.d_lm), dk = Mat::Zero(L, cfg.d_lm), dv = Mat::Zero(L, cfg.d_lm);
    for (int h = 0; h < H; ++h) {
      const Mat& P = c.probs[static_cast<std::size_t>(h)];
      const int off = h * dh;
      for (int i = 0; i < L; ++i) {
        auto dO = dattn.row(i).segment(off, dh);
        double dot = 0.0;
        std::vector<double> dP(static_cast<std::size_t>(i + 1));
        for (int j = 0; j <= i; ++j) {
          dP[static_cast<std::size_t>(j)] = dO.dot(c.v.row(j).segment(off, dh));
          dot += P(i, j) * dP[static_cast<std::size_t>(j)];
          dv.row(j).segment(off, dh) += P(i, j) * dO;
        }
        for (int j = 0; j <= i; ++j) {
          const double dS = P(i, j) * (dP[static_cast<std::size_t>(j)] - dot) * inv_sqrt_dh;
          dq.row(i).segment(off, dh) += dS * c.k.row(j).segment(off, dh);
          dk.row(j).segment(off, dh) += dS * c.q.row(i).segment(off, dh);
        }
      }
    }
    Mat dh1 = detail::project_backward(c.h1, lp.wq, adapter(Target::wq), scale, dq, g ? &g->wq : nullptr,
                                       dadapter(Target::wq));
    dh1 += detail::project_backward(c.h1, lp.wk, adapter(Target::wk), scale, dk, g ? &g->wk : nullptr,
                                    dadapter(Target::wk));
    dh1 += detail::project_backward(c.h1, lp.wv, adapter(Target::wv), scale, dv, g ? &g->wv : nullptr,
                                    dadapter(Target::wv));
    dx += detail::rmsnorm_backward(dh1, lp.norm1, c.rms1, c.n1, g ? &g->norm1 : nullptr);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Loss

struct LossResult {
  double loss = 0.0;   // mean (or sum) negative log-likelihood over masked positions
  Mat dlogits;         // gradient of `loss` w.r.t. logits
  std::size_t count = 0;
};

enum class Reduction { mean, sum };

inline Vec log_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double mx = row.maxCoeff();
  const double lse = mx + std::log((row.array() - mx).exp().sum());
  return (row.array() - lse).transpose();
}

// Shift-by-one: masked position t is predicted by the logits at t-1.
inline LossResult masked_cross_entropy(const Mat& logits, const std::vector<TokenId>& targets,
                                       const std::vector<bool>& mask, Reduction reduction = Reduction::mean) {
  const auto L = static_cast<std::size_t>(logits.rows());
  if (targets.size() != L || mask.size() != L) throw ContractError("targets/mask length != logits rows");
  LossResult r;
  r.dlogits = Mat::Zero(logits.rows(), logits.cols());
  for (std::size_t t = 0; t < L; ++t) {
    if (!mask[t]) continue;
    if (t == 0) throw ContractError("position 0 has no preceding logits");
    const auto target = targets[t];
    if (target < 0 || target >= logits.cols()) throw InvalidTokenError("target id out of range");
    const auto row = static_cast<Eigen::Index>(t - 1);
    Vec logp = log_softmax(logits.row(row));
    r.loss -= logp(target);
    r.dlogits.row(row) = logp.array().exp().transpose();
    r.dlogits(row, target) -= 1.0;
    ++r.count;
  }
  if (r.count == 0) throw EmptyLossError("no masked positions");
  if (reduction == Reduction::mean) {
    r.loss /= static_cast<double>(r.count);
    r.dlogits /= static_cast<double>(r.count);
  }
  return r;
}

inline LossResult masked_cross_entropy(const Mat& logits, const EmbeddedSequence& seq,
                                       Reduction reduction = Reduction::mean) {
  return masked_cross_entropy(logits, seq.token_ids, seq.loss_mask, reduction);
}

// ---------------------------------------------------------------------------
// Decoding

struct DecodeStrategy {
  enum class Kind { greedy, sample } kind = Kind::greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  static DecodeStrategy greedy() { return {}; }
  static DecodeStrategy sample(double temperature, std::uint64_t seed) { return {Kind::sample, temperature, seed}; }
};

struct GenerateResult {
  TokenSequence tokens;
  bool truncated = false;
};

// Ties go to the lowest id.
inline TokenId argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i)
    if (row(i) > row(best)) best = i;
  return static_cast<TokenId>(best);
}

inline GenerateResult generate_from_ids(const std::vector<TokenId>& prompt_ids, TokenId vis_id, const Mat* visual,
                                        const LMParams& params, const LoraParams* lora, const DecodeStrategy& strategy,
                                        int max_new, TokenId eos_id) {
  if (strategy.kind == DecodeStrategy::Kind::sample && !(strategy.temperature > 0.0))
    throw ContractError("sampling temperature must be > 0");
  GenerateResult out;
  Rng rng(strategy.seed);
  TokenSequence so_far;
  for (int step = 0; step < max_new; ++step) {
    EmbeddedSequence seq;
    try {
      seq = embed_tokens(prompt_ids, vis_id, visual, &so_far, params);
    } catch (const CapacityError&) {
      if (step == 0) throw;
      out.truncated = true;
      break;
    }
    Mat logits = forward(seq.vectors, params, lora);
    auto last = logits.row(logits.rows() - 1);
    TokenId next;
    if (strategy.kind == DecodeStrategy::Kind::greedy) {
      next = argmax(last);
    } else {
      Eigen::RowVectorXd scaled = last / strategy.temperature;
      Vec probs = log_softmax(scaled).array().exp();
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      double u = uni(rng), acc = 0.0;
      next = static_cast<TokenId>(probs.size() - 1);
      for (Eigen::Index i = 0; i < probs.size(); ++i) {
        acc += probs(i);
        if (u < acc) {
          next = static_cast<TokenId>(i);
          break;
        }
      }
    }
    so_far.ids.push_back(next);
    out.tokens.ids.push_back(next);
    if (next == eos_id) break;
  }
  return out;
}

inline GenerateResult generate(const Prompt& prompt, const translators::VisualEmbeddings& vis, const LMParams& params,
                               const LoraParams* lora, const DecodeStrategy& strategy, int max_new,
                               const Vocabulary& vocab) {
  if (max_new <= 0) return {};
  return generate_from_ids(prompt.instruction_tokens.ids, vocab.specials().vis, &vis.tokens, params, lora, strategy,
                           max_new, vocab.specials().eos);
}

}  // namespace vimonet::lm

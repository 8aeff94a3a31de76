#pragma once

// Vision-to-language translators. Motion features go through a single affine
// map; video features through a two-layer MLP. The two never share weights.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "vimonet/core.hpp"

namespace vimonet::translators {

enum class Activation { gelu, identity };

inline std::string_view to_string(Activation a) { return a == Activation::gelu ? "gelu" : "identity"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "gelu") return Activation::gelu;
  if (s == "identity") return Activation::identity;
  throw ContractError("unknown activation '" + std::string(s) + "'");
}

inline constexpr double kInvSqrt2 = 0.5 * std::numbers::sqrt2;

// Exact (erf) Gaussian error linear unit.
inline double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u * kInvSqrt2)); }

inline double gelu_grad(double u) {
  const double cdf = 0.5 * (1.0 + std::erf(u * kInvSqrt2));
  const double pdf = std::exp(-0.5 * u * u) * std::numbers::inv_sqrtpi * kInvSqrt2;
  return cdf + u * pdf;
}

inline Mat apply(Activation a, const Mat& u) {
  if (a == Activation::identity) return u;
  return u.unaryExpr([](double x) { return gelu(x); });
}

inline Mat apply_grad(Activation a, const Mat& u) {
  if (a == Activation::identity) return Mat::Ones(u.rows(), u.cols());
  return u.unaryExpr([](double x) { return gelu_grad(x); });
}

struct TensorInfo {
  std::string name;
  std::vector<Eigen::Index> shape;
};

struct MotionTranslatorParams {
  Mat W;  // d_lm x d_motion
  Vec b;  // d_lm

  static MotionTranslatorParams init(int d_lm, int d_motion, Rng& rng) {
    return {normal_matrix(d_lm, d_motion, rng, 1.0 / std::sqrt(static_cast<double>(d_motion))), Vec::Zero(d_lm)};
  }

  static MotionTranslatorParams zeros_like(const MotionTranslatorParams& p) {
    return {Mat::Zero(p.W.rows(), p.W.cols()), Vec::Zero(p.b.size())};
  }

  int in_width() const { return static_cast<int>(W.cols()); }
  int out_width() const { return static_cast<int>(W.rows()); }

  template <class F>
  void for_each(F&& f) {
    f("W", W);
    f("b", b);
  }
  template <class F>
  void for_each(F&& f) const {
    f("W", W);
    f("b", b);
  }

  std::size_t parameter_count() const { return static_cast<std::size_t>(W.size() + b.size()); }
};

struct VideoTranslatorParams {
  Mat W1;  // d_h x d_video
  Vec b1;  // d_h
  Mat W2;  // d_lm x d_h
  Vec b2;  // d_lm
  Activation activation = Activation::gelu;

  static VideoTranslatorParams init(int d_lm, int d_video, int d_hidden, Rng& rng,
                                    Activation act = Activation::gelu) {
    if (2 * d_hidden < d_lm) throw ContractError("video translator hidden width must be >= d_lm/2");
    VideoTranslatorParams p;
    p.W1 = normal_matrix(d_hidden, d_video, rng, 1.0 / std::sqrt(static_cast<double>(d_video)));
    p.b1 = Vec::Zero(d_hidden);
    p.W2 = normal_matrix(d_lm, d_hidden, rng, 1.0 / std::sqrt(static_cast<double>(d_hidden)));
    p.b2 = Vec::Zero(d_lm);
    p.activation = act;
    return p;
  }

  static VideoTranslatorParams zeros_like(const VideoTranslatorParams& p) {
    return {Mat::Zero(p.W1.rows(), p.W1.cols()), Vec::Zero(p.b1.size()), Mat::Zero(p.W2.rows(), p.W2.cols()),
            Vec::Zero(p.b2.size()), p.activation};
  }

  int in_width() const { return static_cast<int>(W1.cols()); }
  int out_width() const { return static_cast<int>(W2.rows()); }

  template <class F>
  void for_each(F&& f) {
    f("W1", W1);
    f("b1", b1);
    f("W2", W2);
    f("b2", b2);
  }
  template <class F>
  void for_each(F&& f) const {
    f("W1", W1);
    f("b1", b1);
    f("W2", W2);
    f("b2", b2);
  }

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(W1.size() + b1.size() + W2.size() + b2.size());
  }
};

template <class P>
std::vector<TensorInfo> inventory(const P& p) {
  std::vector<TensorInfo> out;
  p.for_each([&](std::string_view name, const auto& t) {
    if constexpr (std::decay_t<decltype(t)>::ColsAtCompileTime == 1)
      out.push_back({std::string(name), {t.size()}});
    else
      out.push_back({std::string(name), {t.rows(), t.cols()}});
  });
  return out;
}

// K x d_lm, one row per input feature token.
struct VisualEmbeddings {
  Mat tokens;
  int count() const { return static_cast<int>(tokens.rows()); }
};

inline VisualEmbeddings translate_motion(const Mat& features, const MotionTranslatorParams& p) {
  if (features.cols() != p.W.cols())
    throw ContractError("motion feature width " + std::to_string(features.cols()) + " != translator input " +
                        std::to_string(p.W.cols()));
  Mat y = features * p.W.transpose();
  y.rowwise() += p.b.transpose();
  return {std::move(y)};
}

struct VideoForwardCache {
  Mat pre;     // K x d_h, W1 x + b1
  Mat hidden;  // K x d_h, act(pre)
};

inline VisualEmbeddings translate_video(const Mat& features, const VideoTranslatorParams& p,
                                        VideoForwardCache* cache = nullptr) {
  if (features.cols() != p.W1.cols())
    throw ContractError("video feature width " + std::to_string(features.cols()) + " != translator input " +
                        std::to_string(p.W1.cols()));
  Mat pre = features * p.W1.transpose();
  pre.rowwise() += p.b1.transpose();
  Mat hidden = apply(p.activation, pre);
  Mat y = hidden * p.W2.transpose();
  y.rowwise() += p.b2.transpose();
  if (cache) *cache = {std::move(pre), std::move(hidden)};
  return {std::move(y)};
}

// Accumulates parameter gradients into `grads` and returns dL/dfeatures.
inline Mat motion_backward(const Mat& features, const MotionTranslatorParams& p, const Mat& upstream,
                           MotionTranslatorParams& grads) {
  if (upstream.rows() != features.rows() || upstream.cols() != p.W.rows())
    throw ContractError("upstream gradient shape mismatch");
  grads.W.noalias() += upstream.transpose() * features;
  grads.b += upstream.colwise().sum().transpose();
  return upstream * p.W;
}

inline Mat video_backward(const Mat& features, const VideoTranslatorParams& p, const VideoForwardCache& cache,
                          const Mat& upstream, VideoTranslatorParams& grads) {
  if (upstream.rows() != features.rows() || upstream.cols() != p.W2.rows())
    throw ContractError("upstream gradient shape mismatch");
  grads.W2.noalias() += upstream.transpose() * cache.hidden;
  grads.b2 += upstream.colwise().sum().transpose();
  Mat dhidden = upstream * p.W2;
  Mat dpre = dhidden.cwiseProduct(apply_grad(p.activation, cache.pre));
  grads.W1.noalias() += dpre.transpose() * features;
  grads.b1 += dpre.colwise().sum().transpose();
  return dpre * p.W1;
}

inline Mat video_backward(const Mat& features, const VideoTranslatorParams& p, const Mat& upstream,
                          VideoTranslatorParams& grads) {
  VideoForwardCache cache;
  translate_video(features, p, &cache);
  return video_backward(features, p, cache, upstream, grads);
}

}  // namespace vimonet::translators

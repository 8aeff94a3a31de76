#pragma once

// Low-rank adaptation of the LM attention projections.

#include <array>
#include <string>
#include <vector>

#include "vimonet/core.hpp"

namespace vimonet::adaptation {

enum class Target { wq = 0, wk = 1, wv = 2, wo = 3 };

inline constexpr std::array<std::string_view, 4> kTargetNames = {"wq", "wk", "wv", "wo"};

inline Target parse_target(std::string_view s) {
  for (std::size_t i = 0; i < kTargetNames.size(); ++i)
    if (kTargetNames[i] == s) return static_cast<Target>(i);
  throw ContractError("unknown LoRA target '" + std::string(s) + "'");
}

struct LoraSpec {
  int rank = 4;
  double alpha = 4.0;
  std::array<bool, 4> targets = {true, true, true, true};

  // Paper-fidelity setting; rank 64 equals the desk-scale d_lm.
  static LoraSpec paper() { return {64, 64.0, {true, true, true, true}}; }

  double scale() const { return alpha / rank; }
  bool targets_matrix(Target t) const { return targets[static_cast<std::size_t>(t)]; }

  void validate() const {
    if (rank < 1) throw ContractError("LoRA rank must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ContractError("LoRA alpha must be > 0");
  }
};

// One adapter: delta = scale * B * A, A is r x d_in, B is d_out x r.
struct Adapter {
  Mat A;
  Mat B;

  bool active() const { return A.size() > 0; }
};

inline Vec apply_lora(const Mat& W, const Adapter& a, const LoraSpec& spec, const Vec& x) {
  if (W.cols() != x.size()) throw ContractError("apply_lora: x width mismatch");
  if (!a.active()) return W * x;
  if (a.A.cols() != W.cols() || a.B.rows() != W.rows() || a.A.rows() != a.B.cols())
    throw ContractError("apply_lora: adapter shape mismatch");
  return W * x + spec.scale() * (a.B * (a.A * x));
}

inline Mat merge_lora(const Mat& W, const Adapter& a, const LoraSpec& spec) {
  if (!a.active()) return W;
  if (a.A.cols() != W.cols() || a.B.rows() != W.rows() || a.A.rows() != a.B.cols())
    throw ContractError("merge_lora: adapter shape mismatch");
  Mat merged = W;
  merged.noalias() += spec.scale() * (a.B * a.A);
  return merged;
}

struct LoraParams {
  LoraSpec spec;
  std::vector<std::array<Adapter, 4>> layers;

  // A ~ N(0, 1/d_in), B = 0, so a fresh adapter is an exact no-op.
  static LoraParams init(const LoraSpec& spec, int n_layers, int d_model, Rng& rng) {
    spec.validate();
    LoraParams p{spec, {}};
    p.layers.resize(static_cast<std::size_t>(n_layers));
    for (auto& layer : p.layers)
      for (std::size_t t = 0; t < 4; ++t) {
        if (!spec.targets[t]) continue;
        layer[t].A = normal_matrix(spec.rank, d_model, rng, 1.0 / std::sqrt(static_cast<double>(d_model)));
        layer[t].B = Mat::Zero(d_model, spec.rank);
      }
    return p;
  }

  static LoraParams zeros_like(const LoraParams& p) {
    LoraParams z{p.spec, p.layers};
    for (auto& layer : z.layers)
      for (auto& a : layer) {
        a.A.setZero();
        a.B.setZero();
      }
    return z;
  }

  const Adapter* adapter(std::size_t layer, Target t) const {
    const auto& a = layers[layer][static_cast<std::size_t>(t)];
    return a.active() ? &a : nullptr;
  }
  Adapter* adapter(std::size_t layer, Target t) {
    auto& a = layers[layer][static_cast<std::size_t>(t)];
    return a.active() ? &a : nullptr;
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
    for (std::size_t l = 0; l < self.layers.size(); ++l)
      for (std::size_t t = 0; t < 4; ++t) {
        auto& a = self.layers[l][t];
        if (!a.active()) continue;
        const std::string base = "layers." + std::to_string(l) + "." + std::string(kTargetNames[t]);
        f(base + ".A", a.A);
        f(base + ".B", a.B);
      }
  }
};

// A named set of tensors sharing trainability and a step size.
struct ParamGroup {
  std::string name;
  std::vector<std::string> members;
  bool trainable = false;
  double lr = 0.0;
};

}  // namespace vimonet::adaptation

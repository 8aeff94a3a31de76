#pragma once

// The assembled pipeline: frozen encoder -> modality translator -> visual
// splice -> LM (optionally LoRA-adapted) -> masked cross-entropy, plus the
// named parameter inventory used by optimizers, checkpoints and the
// stage-wise trainability groups.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vimonet/adaptation.hpp"
#include "vimonet/encoders.hpp"
#include "vimonet/lm.hpp"
#include "vimonet/translators.hpp"

namespace vimonet {

struct ModelShape {
  lm::LMConfig lm;
  encoders::EncoderConfig encoder;
  int video_hidden = 0;  // 0 means d_lm
  translators::Activation activation = translators::Activation::gelu;
};

struct Model {
  Vocabulary vocab;
  encoders::EncoderConfig encoder;
  translators::MotionTranslatorParams motion;
  translators::VideoTranslatorParams video;
  lm::LMParams base;
  std::optional<adaptation::LoraParams> lora;

  static Model create(Vocabulary vocab, ModelShape shape, std::uint64_t seed) {
    shape.lm.vocab_size = static_cast<int>(vocab.size());
    shape.lm.validate();
    shape.encoder.validate();
    Model m{std::move(vocab), shape.encoder, {}, {}, {}, std::nullopt};
    Rng lm_rng(mix_seed(seed, 1));
    m.base = lm::LMParams::init(shape.lm, lm_rng);
    Rng tr_rng(mix_seed(seed, 2));
    const int hidden = shape.video_hidden > 0 ? shape.video_hidden : shape.lm.d_lm;
    m.motion = translators::MotionTranslatorParams::init(shape.lm.d_lm, shape.encoder.d_motion, tr_rng);
    m.video = translators::VideoTranslatorParams::init(shape.lm.d_lm, shape.encoder.d_video, hidden, tr_rng,
                                                       shape.activation);
    return m;
  }

  // Fresh translators with the current shapes (used when re-aligning on a new base).
  void reset_translators(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 2));
    motion = translators::MotionTranslatorParams::init(motion.out_width(), motion.in_width(), rng);
    video = translators::VideoTranslatorParams::init(video.out_width(), video.in_width(),
                                                     static_cast<int>(video.W1.rows()), rng, video.activation);
  }

  void attach_lora(const adaptation::LoraSpec& spec, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 3));
    lora = adaptation::LoraParams::init(spec, base.cfg.n_layers, base.cfg.d_lm, rng);
  }

  const adaptation::LoraParams* lora_ptr() const { return lora ? &*lora : nullptr; }

  translators::VisualEmbeddings translate(Modality modality, const Mat& features,
                                          translators::VideoForwardCache* cache = nullptr) const {
    return modality == Modality::motion ? translators::translate_motion(features, motion)
                                        : translators::translate_video(features, video, cache);
  }

  Mat encode(const Payload& payload) const {
    if (auto m = std::get_if<std::shared_ptr<const MotionSequence>>(&payload))
      return encoders::ReferenceMotionEncoder(encoder).encode(**m).tokens;
    return encoders::ReferenceVideoEncoder(encoder).encode(*std::get<std::shared_ptr<const VideoClip>>(payload))
        .tokens;
  }

  // Names are "<group>.<tensor>": translator.*, lm.*, lora.*.
  template <class F>
  void for_each_tensor(F&& f) {
    for_each_impl(*this, f);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    for_each_impl(*this, f);
  }

 private:
  template <class Self, class F>
  static void for_each_impl(Self& self, F& f) {
    self.motion.for_each([&](std::string_view n, auto& t) { f("translator.motion." + std::string(n), t); });
    self.video.for_each([&](std::string_view n, auto& t) { f("translator.video." + std::string(n), t); });
    self.base.for_each([&](const std::string& n, auto& t) { f("lm." + n, t); });
    if (self.lora) self.lora->for_each([&](const std::string& n, auto& t) { f("lora." + n, t); });
  }
};

inline std::map<std::string, std::string> tensor_digests(const Model& m) {
  std::map<std::string, std::string> out;
  m.for_each_tensor([&](const std::string& name, const auto& t) { out[name] = tensor_digest(t); });
  return out;
}

inline std::string base_digest(const lm::LMParams& base) {
  Sha256 h;
  base.for_each([&](const std::string& name, const auto& t) {
    h.update(name);
    h.update(t.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
  });
  auto d = h.finish();
  return to_hex(d);
}

// A training/eval unit with features precomputed; encoders are frozen, so
// caching their output is exact. Text-only samples (used for base-LM
// pretraining) have no features and no VIS.
struct EncodedSample {
  std::string id;
  Modality modality = Modality::motion;
  Mat features;
  std::vector<TokenId> prompt_ids;  // one VIS, or none for text-only
  TokenSequence response;
  Category category = Category::caption;
};

inline EncodedSample encode_sample(const InstructionSample& s, const Model& model) {
  return EncodedSample{s.id, s.prompt.modality, model.encode(s.prompt.payload), s.prompt.instruction_tokens.ids,
                       s.response_tokens, s.category};
}

// Mirrors the trainable parts of Model with identical tensor names.
struct Gradients {
  translators::MotionTranslatorParams motion;
  translators::VideoTranslatorParams video;
  std::optional<lm::LMParams> base;
  std::optional<adaptation::LoraParams> lora;

  static Gradients zeros_for(const Model& m, bool want_base, bool want_lora) {
    Gradients g{translators::MotionTranslatorParams::zeros_like(m.motion),
                translators::VideoTranslatorParams::zeros_like(m.video), std::nullopt, std::nullopt};
    if (want_base) g.base = lm::LMParams::zeros_like(m.base);
    if (want_lora && m.lora) g.lora = adaptation::LoraParams::zeros_like(*m.lora);
    return g;
  }

  template <class F>
  void for_each_tensor(F&& f) {
    motion.for_each([&](std::string_view n, auto& t) { f("translator.motion." + std::string(n), t); });
    video.for_each([&](std::string_view n, auto& t) { f("translator.video." + std::string(n), t); });
    if (base) base->for_each([&](const std::string& n, auto& t) { f("lm." + n, t); });
    if (lora) lora->for_each([&](const std::string& n, auto& t) { f("lora." + n, t); });
  }
};

struct SampleLoss {
  double loss_sum = 0.0;
  std::size_t count = 0;
};

inline lm::EmbeddedSequence embed_sample(const Model& model, const EncodedSample& s,
                                         const translators::VisualEmbeddings& vis, bool with_response = true) {
  const Mat* visual = s.features.rows() > 0 ? &vis.tokens : nullptr;
  return lm::embed_tokens(s.prompt_ids, model.vocab.specials().vis, visual, with_response ? &s.response : nullptr,
                          model.base);
}

inline translators::VisualEmbeddings translate_sample(const Model& model, const EncodedSample& s,
                                                      translators::VideoForwardCache* cache = nullptr) {
  if (s.features.rows() == 0) return {};
  return model.translate(s.modality, s.features, cache);
}

inline Mat sample_logits(const Model& model, const EncodedSample& s) {
  auto vis = translate_sample(model, s);
  auto seq = embed_sample(model, s, vis);
  return lm::forward(seq.vectors, model.base, model.lora_ptr());
}

inline SampleLoss sample_loss(const Model& model, const EncodedSample& s) {
  auto vis = translate_sample(model, s);
  auto seq = embed_sample(model, s, vis);
  Mat logits = lm::forward(seq.vectors, model.base, model.lora_ptr());
  auto r = lm::masked_cross_entropy(logits, seq, lm::Reduction::sum);
  return {r.loss, r.count};
}

// Forward + backward for one sample; gradients of (scale * summed NLL)
// accumulate into `grads`. Translator gradients are always produced; LM base
// and LoRA gradients only when `grads` holds those parts.
inline SampleLoss sample_backward(const Model& model, const EncodedSample& s, double scale, Gradients& grads) {
  translators::VideoForwardCache vcache;
  auto vis = translate_sample(model, s, &vcache);
  auto seq = embed_sample(model, s, vis);
  lm::ForwardCache cache;
  Mat logits = lm::forward(seq.vectors, model.base, model.lora_ptr(), &cache);
  auto r = lm::masked_cross_entropy(logits, seq, lm::Reduction::sum);
  r.dlogits *= scale;
  lm::LMParams* dbase = grads.base ? &*grads.base : nullptr;
  adaptation::LoraParams* dlora = grads.lora ? &*grads.lora : nullptr;
  Mat dx0 = lm::backward(cache, r.dlogits, model.base, model.lora_ptr(), dbase, dlora);
  Mat dvis = lm::embed_backward(seq, dx0, dbase);
  if (s.features.rows() == 0) return {r.loss, r.count};
  if (s.modality == Modality::motion)
    translators::motion_backward(s.features, model.motion, dvis, grads.motion);
  else
    translators::video_backward(s.features, model.video, vcache, dvis, grads.video);
  return {r.loss, r.count};
}

// Mean masked NLL over all response tokens of the batch.
inline double batch_loss(const Model& model, std::span<const EncodedSample> batch) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : batch) {
    auto r = sample_loss(model, s);
    sum += r.loss_sum;
    count += r.count;
  }
  if (count == 0) throw EmptyLossError("batch has no response tokens");
  return sum / static_cast<double>(count);
}

inline std::size_t response_token_count(std::span<const EncodedSample> batch) {
  std::size_t n = 0;
  for (const auto& s : batch) n += s.response.size();
  return n;
}

// Returns the batch mean loss; grads hold d(mean)/d(params).
inline double batch_backward(const Model& model, std::span<const EncodedSample> batch, Gradients& grads) {
  const std::size_t total = response_token_count(batch);
  if (total == 0) throw EmptyLossError("batch has no response tokens");
  const double scale = 1.0 / static_cast<double>(total);
  double sum = 0.0;
  for (const auto& s : batch) sum += sample_backward(model, s, scale, grads).loss_sum;
  return sum / static_cast<double>(total);
}

inline lm::GenerateResult generate_for(const Model& model, const EncodedSample& s, int max_new,
                                       const lm::DecodeStrategy& strategy = lm::DecodeStrategy::greedy()) {
  auto vis = translate_sample(model, s);
  return lm::generate_from_ids(s.prompt_ids, model.vocab.specials().vis, s.features.rows() > 0 ? &vis.tokens : nullptr, model.base, model.lora_ptr(),
                               strategy, max_new, model.vocab.specials().eos);
}

namespace adaptation {

inline constexpr double kStage1TranslatorLr = 1e-3;
inline constexpr double kStage2TranslatorLr = 2e-5;
inline constexpr double kStage2LoraLr = 2e-4;
inline constexpr int kPaperLoraRank = 64;

// Stage 1: translators train, LM base frozen, encoders hold nothing.
// Stage 2: translators and LoRA train at their own rates, LM base frozen.
inline std::vector<ParamGroup> stage_param_groups(int stage, const Model& model) {
  if (stage != 1 && stage != 2) throw ContractError("unknown stage " + std::to_string(stage));
  if (stage == 2 && !model.lora) throw ContractError("stage 2 needs LoRA adapters attached");
  ParamGroup translators{"translators", {}, true, stage == 1 ? kStage1TranslatorLr : kStage2TranslatorLr};
  ParamGroup lora{"lora", {}, true, kStage2LoraLr};
  ParamGroup base{"lm_base", {}, false, 0.0};
  ParamGroup encoders{"encoders", {}, false, 0.0};
  model.for_each_tensor([&](const std::string& name, const auto&) {
    if (name.starts_with("translator.")) translators.members.push_back(name);
    else if (name.starts_with("lora.")) lora.members.push_back(name);
    else base.members.push_back(name);
  });
  if (stage == 1) {
    // LoRA tensors (if attached) are not touched in stage 1.
    base.members.insert(base.members.end(), lora.members.begin(), lora.members.end());
    return {translators, base, encoders};
  }
  return {translators, lora, base, encoders};
}

}  // namespace adaptation

}  // namespace vimonet

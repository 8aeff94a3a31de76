#pragma once

// Two-stage training: stage 1 aligns the translators against the frozen LM,
// stage 2 tunes translators and LoRA jointly on mixed-modality instruction
// data. A third "stage 0" pretrains the base LM on text so that there is a
// language model worth aligning to.

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "vimonet/model.hpp"

namespace vimonet::training {

using adaptation::ParamGroup;

struct StageConfig {
  int stage = 1;  // 0 = base pretraining, 1 = alignment, 2 = instruction tuning
  int steps = 200;
  int batch_size = 8;
  std::map<std::string, double> group_lrs;  // overrides stage defaults
  double mix_ratio = 0.5;                  // P(motion) per batch slot, stage 2
  std::uint64_t seed = 1;
  double grad_clip = 1.0;
  adaptation::LoraSpec lora = adaptation::LoraSpec::paper();  // stage 2 only

  static StageConfig defaults(int stage) {
    StageConfig c;
    c.stage = stage;
    if (stage == 0) c.group_lrs = {{"lm_base", 3e-3}};
    if (stage == 1) c.group_lrs = {{"translators", adaptation::kStage1TranslatorLr}};
    if (stage == 2)
      c.group_lrs = {{"translators", adaptation::kStage2TranslatorLr}, {"lora", adaptation::kStage2LoraLr}};
    return c;
  }

  void validate() const {
    if (stage < 0 || stage > 2) throw ContractError("stage must be 0, 1 or 2");
    if (steps < 0) throw ContractError("steps must be >= 0");
    if (batch_size < 1) throw ContractError("batch_size must be >= 1");
    if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw ContractError("mix_ratio must be in [0, 1]");
    if (!(grad_clip > 0.0)) throw ContractError("grad_clip must be > 0");
    for (const auto& [name, lr] : group_lrs)
      if (!(lr >= 0.0) || !std::isfinite(lr)) throw ContractError("learning rate for '" + name + "' must be >= 0");
    lora.validate();
  }
};

// Groups for a stage, with learning rates taken from cfg.group_lrs where given.
inline std::vector<ParamGroup> resolve_groups(const StageConfig& cfg, const Model& model) {
  std::vector<ParamGroup> groups;
  if (cfg.stage == 0) {
    ParamGroup base{"lm_base", {}, true, 0.0};
    ParamGroup rest{"frozen", {}, false, 0.0};
    model.for_each_tensor([&](const std::string& n, const auto&) {
      (n.starts_with("lm.") ? base : rest).members.push_back(n);
    });
    groups = {base, rest};
  } else {
    groups = adaptation::stage_param_groups(cfg.stage, model);
  }
  for (auto& g : groups) {
    auto it = cfg.group_lrs.find(g.name);
    if (it != cfg.group_lrs.end()) {
      if (!g.trainable) throw ContractError("group '" + g.name + "' is frozen in stage " + std::to_string(cfg.stage));
      g.lr = it->second;
    }
  }
  return groups;
}

// Adam with bias correction; moments are kept per tensor name.
struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  std::map<std::string, std::pair<Vec, Vec>> moments;  // name -> (m, v), flattened

  friend bool operator==(const OptimizerState& a, const OptimizerState& b) {
    if (a.beta1 != b.beta1 || a.beta2 != b.beta2 || a.eps != b.eps || a.step != b.step) return false;
    if (a.moments.size() != b.moments.size()) return false;
    for (const auto& [k, mv] : a.moments) {
      auto it = b.moments.find(k);
      if (it == b.moments.end() || it->second.first != mv.first || it->second.second != mv.second) return false;
    }
    return true;
  }
};

struct TensorRef {
  double* data = nullptr;
  Eigen::Index size = 0;
};

template <class T>
std::unordered_map<std::string, TensorRef> tensor_refs(T& owner) {
  std::unordered_map<std::string, TensorRef> out;
  owner.for_each_tensor([&](const std::string& n, auto& t) { out[n] = {t.data(), t.size()}; });
  return out;
}

struct StepResult {
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
};

inline std::string sample_ids(std::span<const EncodedSample> batch) {
  std::string out;
  for (const auto& s : batch) out += (out.empty() ? "" : ",") + s.id;
  return out;
}

// One optimizer step on the batch mean loss. Only tensors of trainable
// groups are touched; everything else stays bit-identical.
inline StepResult training_step(Model& model, std::span<const EncodedSample> batch,
                                const std::vector<ParamGroup>& groups, OptimizerState& opt, double grad_clip) {
  if (batch.empty()) throw ContractError("empty batch");
  bool want_base = false, want_lora = false;
  for (const auto& g : groups) {
    if (!g.trainable) continue;
    for (const auto& n : g.members) {
      want_base |= n.starts_with("lm.");
      want_lora |= n.starts_with("lora.");
    }
  }
  auto grads = Gradients::zeros_for(model, want_base, want_lora);
  double loss = 0.0;
  try {
    loss = batch_backward(model, batch, grads);
  } catch (const NumericFault& e) {
    throw NumericFault(std::string(e.what()) + " at step " + std::to_string(opt.step) + " (samples " +
                           sample_ids(batch) + ")",
                       e.layer());
  }
  if (!std::isfinite(loss))
    throw NumericFault("non-finite loss at step " + std::to_string(opt.step) + " (samples " + sample_ids(batch) + ")");

  auto params = tensor_refs(model);
  auto grad_refs = tensor_refs(grads);
  double sq = 0.0;
  for (const auto& g : groups) {
    if (!g.trainable) continue;
    for (const auto& n : g.members) {
      auto it = grad_refs.find(n);
      if (it == grad_refs.end()) throw ContractError("no gradient for trainable tensor " + n);
      Eigen::Map<const Vec> gv(it->second.data, it->second.size);
      sq += gv.squaredNorm();
    }
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm))
    throw NumericFault("non-finite gradient norm at step " + std::to_string(opt.step) + " (samples " +
                       sample_ids(batch) + ")");
  const double clip = norm > grad_clip ? grad_clip / norm : 1.0;

  ++opt.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (const auto& g : groups) {
    if (!g.trainable) continue;
    for (const auto& n : g.members) {
      const auto& pr = params.at(n);
      Eigen::Map<Vec> p(pr.data, pr.size);
      Vec gv = Eigen::Map<const Vec>(grad_refs.at(n).data, pr.size) * clip;
      auto [it, fresh] = opt.moments.try_emplace(n, Vec::Zero(pr.size), Vec::Zero(pr.size));
      auto& [m, v] = it->second;
      if (m.size() != pr.size) throw ContractError("optimizer state shape mismatch for " + n);
      m = opt.beta1 * m + (1.0 - opt.beta1) * gv;
      v = opt.beta2 * v + (1.0 - opt.beta2) * gv.cwiseAbs2();
      if (g.lr == 0.0) continue;
      p.array() -= g.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opt.eps);
    }
  }
  return {loss, norm};
}

// ---------------------------------------------------------------------------
// Batch streams. Batch `k` is a pure function of (seed, k), so a resumed run
// sees exactly the batches the uninterrupted run would have.

struct SampleRef {
  Modality pool = Modality::motion;
  std::size_t index = 0;
};

class MixedStream {
 public:
  MixedStream(std::size_t motion_count, std::size_t video_count, double ratio, std::uint64_t seed)
      : motion_(motion_count), video_(video_count), ratio_(ratio), seed_(seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ContractError("mix ratio must be in [0, 1]");
    if (ratio > 0.0 && motion_ == 0) throw ContractError("motion pool is empty but mix ratio > 0");
    if (ratio < 1.0 && video_ == 0) throw ContractError("video pool is empty but mix ratio < 1");
  }

  std::vector<SampleRef> batch(long long k, int size) const {
    Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(k)));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<SampleRef> out;
    out.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
      const bool motion = coin(rng) < ratio_;
      const std::size_t n = motion ? motion_ : video_;
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      out.push_back({motion ? Modality::motion : Modality::video, pick(rng)});
    }
    return out;
  }

 private:
  std::size_t motion_, video_;
  double ratio_;
  std::uint64_t seed_;
};

// Draws batches from a motion pool and a video pool: each slot picks its
// modality with P(motion) = ratio, then a uniform sample of that modality.
class BatchMixer {
 public:
  BatchMixer(std::vector<EncodedSample> motion, std::vector<EncodedSample> video, double ratio, std::uint64_t seed)
      : motion_(std::move(motion)), video_(std::move(video)), stream_(motion_.size(), video_.size(), ratio, seed) {}

  std::vector<EncodedSample> batch(long long k, int size) const {
    std::vector<EncodedSample> out;
    for (const auto& r : stream_.batch(k, size)) out.push_back(r.pool == Modality::motion ? motion_[r.index] : video_[r.index]);
    return out;
  }

 private:
  std::vector<EncodedSample> motion_, video_;
  MixedStream stream_;
};

inline BatchMixer mix_batches(std::vector<EncodedSample> motion_ds, std::vector<EncodedSample> video_ds, double ratio,
                              std::uint64_t seed) {
  return BatchMixer(std::move(motion_ds), std::move(video_ds), ratio, seed);
}

// Splits a dataset by modality (text-only samples go with motion) and builds
// the mixer. Stage 1 uses the dataset's own modality proportion.
inline BatchMixer mixer_for(std::span<const EncodedSample> data, const StageConfig& cfg) {
  std::vector<EncodedSample> motion, video;
  for (const auto& s : data) (s.modality == Modality::video && s.features.rows() > 0 ? video : motion).push_back(s);
  double ratio = cfg.mix_ratio;
  if (cfg.stage != 2) ratio = static_cast<double>(motion.size()) / static_cast<double>(data.size());
  return BatchMixer(std::move(motion), std::move(video), ratio, mix_seed(cfg.seed, 0xba7c4ULL));
}

// ---------------------------------------------------------------------------
// Runs

struct LogEntry {
  long long step = 0;  // 1-based optimizer step that produced `loss`
  double loss = 0.0;
  std::vector<std::pair<std::string, double>> lrs;
};

// A run's full mutable state: what a checkpoint captures.
struct RunState {
  int stage = 1;
  Model model;
  OptimizerState opt;
  std::string config_json;  // snapshot of the producing configuration
};

using StepCallback = std::function<void(const LogEntry&)>;

// Formats a learning rate compactly: 1e-3, 2e-05 -> 2e-5, 0.003 -> 3e-3.
inline std::string format_lr(double lr) {
  if (lr == 0.0) return "0";
  std::ostringstream os;
  os.precision(6);
  os << std::scientific << lr;
  std::string s = os.str();  // d.dddddde-0x
  auto e = s.find('e');
  std::string mant = s.substr(0, e), exp = s.substr(e + 1);
  while (mant.ends_with('0')) mant.pop_back();
  if (mant.ends_with('.')) mant.pop_back();
  const char sign = exp[0];
  std::string digits = exp.substr(1);
  while (digits.size() > 1 && digits[0] == '0') digits.erase(0, 1);
  return mant + "e" + (sign == '-' ? "-" : "") + digits;
}

// Continues `state` until cfg.steps optimizer steps have been taken in total.
inline std::vector<LogEntry> run_stage(RunState& state, std::span<const EncodedSample> data, const StageConfig& cfg,
                                       const StepCallback& on_step = {}) {
  cfg.validate();
  if (cfg.stage != state.stage) throw ContractError("run state is for a different stage");
  if (data.empty()) throw ContractError("training dataset is empty");
  const auto groups = resolve_groups(cfg, state.model);
  const auto mixer = mixer_for(data, cfg);
  std::vector<std::pair<std::string, double>> lrs;
  for (const auto& g : groups)
    if (g.trainable) lrs.emplace_back(g.name, g.lr);
  std::vector<LogEntry> log;
  while (state.opt.step < cfg.steps) {
    const auto batch = mixer.batch(state.opt.step, cfg.batch_size);
    auto r = training_step(state.model, batch, groups, state.opt, cfg.grad_clip);
    LogEntry e{state.opt.step, r.loss, lrs};
    if (on_step) on_step(e);
    log.push_back(std::move(e));
  }
  return log;
}

inline RunState pretrain_base(Model model, std::span<const EncodedSample> corpus, const StageConfig& cfg,
                              std::vector<LogEntry>* log = nullptr, const StepCallback& on_step = {}) {
  if (cfg.stage != 0) throw ContractError("pretraining expects a stage-0 config");
  RunState st{0, std::move(model), {}, {}};
  auto l = run_stage(st, corpus, cfg, on_step);
  if (log) *log = std::move(l);
  return st;
}

inline RunState start_stage1(Model model) {
  model.lora.reset();
  return {1, std::move(model), {}, {}};
}

// Warm-starts from a finished stage-1 state; LoRA is attached fresh (B = 0).
inline RunState start_stage2(const RunState* stage1, const StageConfig& cfg) {
  if (!stage1 || stage1->stage != 1) throw ContractError("stage 2 requires a stage-1 checkpoint");
  RunState st{2, stage1->model, {}, {}};
  st.model.attach_lora(cfg.lora, cfg.seed);
  return st;
}

inline RunState train_stage1(Model model, std::span<const EncodedSample> captions, const StageConfig& cfg,
                             std::vector<LogEntry>* log = nullptr, const StepCallback& on_step = {}) {
  if (cfg.stage != 1) throw ContractError("train_stage1 expects a stage-1 config");
  if (captions.empty()) throw ContractError("caption dataset is empty");
  auto st = start_stage1(std::move(model));
  auto l = run_stage(st, captions, cfg, on_step);
  if (log) *log = std::move(l);
  return st;
}

inline RunState train_stage2(const RunState* stage1, std::span<const EncodedSample> instructions,
                             const StageConfig& cfg, std::vector<LogEntry>* log = nullptr,
                             const StepCallback& on_step = {}) {
  if (cfg.stage != 2) throw ContractError("train_stage2 expects a stage-2 config");
  auto st = start_stage2(stage1, cfg);
  auto l = run_stage(st, instructions, cfg, on_step);
  if (log) *log = std::move(l);
  return st;
}

}  // namespace vimonet::training

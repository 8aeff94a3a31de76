#pragma once

// Run configuration: nested JSON, every field optional with defaults from
// the published recipe. Validation errors carry a JSON pointer.

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "vimonet/checkpoint.hpp"
#include "vimonet/training.hpp"

namespace vimonet::config {

using nlohmann::json;

struct StageSettings {
  int steps = 200;
  int batch_size = 8;
  std::map<std::string, double> lrs;
  double mix_ratio = 0.5;
  double grad_clip = 1.0;
};

struct DataPaths {
  std::string captions;      // stage-1 caption records
  std::string instructions;  // stage-2 instruction records
  std::string bench;
};

struct JudgeSettings {
  std::string url = "http://127.0.0.1:8080/judge";
  std::string credential_env = "VIMONET_JUDGE_KEY";
  double timeout_seconds = 30.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "runs";
  encoders::EncoderConfig encoder;
  lm::LMConfig lm;  // vocab_size comes from the vocabulary
  int video_hidden = 0;
  translators::Activation activation = translators::Activation::gelu;
  adaptation::LoraSpec lora = adaptation::LoraSpec::paper();
  std::map<int, StageSettings> stages;
  DataPaths data;
  JudgeSettings judge;

  static RunConfig defaults() {
    RunConfig c;
    for (int s : {0, 1, 2}) {
      auto d = training::StageConfig::defaults(s);
      c.stages[s] = {d.steps, d.batch_size, d.group_lrs, d.mix_ratio, d.grad_clip};
    }
    c.stages[0].steps = 3000;
    c.stages[1].steps = 1000;
    c.stages[2].steps = 1000;
    return c;
  }

  ModelShape shape() const { return {lm, encoder, video_hidden, activation}; }

  training::StageConfig stage_config(int stage) const {
    auto c = training::StageConfig::defaults(stage);
    const auto& s = stages.at(stage);
    c.steps = s.steps;
    c.batch_size = s.batch_size;
    for (const auto& [g, lr] : s.lrs) c.group_lrs[g] = lr;
    c.mix_ratio = s.mix_ratio;
    c.grad_clip = s.grad_clip;
    c.seed = seed;
    c.lora = lora;
    return c;
  }
};

inline std::string stage_key(int s) { return s == 0 ? "pretrain" : "stage" + std::to_string(s); }

inline json to_json(const RunConfig& c) {
  json stages;
  for (const auto& [s, st] : c.stages)
    stages[stage_key(s)] = {{"steps", st.steps},
                            {"batch_size", st.batch_size},
                            {"lrs", st.lrs},
                            {"mix_ratio", st.mix_ratio},
                            {"grad_clip", st.grad_clip}};
  json lm = checkpoint::to_json(c.lm);
  lm.erase("vocab_size");
  return {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"encoder", checkpoint::to_json(c.encoder)},
          {"lm", lm},
          {"translators", {{"video_hidden", c.video_hidden}, {"activation", translators::to_string(c.activation)}}},
          {"lora", checkpoint::to_json(c.lora)},
          {"stages", stages},
          {"data", {{"captions", c.data.captions}, {"instructions", c.data.instructions}, {"bench", c.data.bench}}},
          {"judge",
           {{"url", c.judge.url}, {"credential_env", c.judge.credential_env}, {"timeout_seconds", c.judge.timeout_seconds}}}};
}

namespace detail {

inline std::string escape(const std::string& key) {
  std::string out;
  for (char ch : key) {
    if (ch == '~') out += "~0";
    else if (ch == '/') out += "~1";
    else out.push_back(ch);
  }
  return out;
}

// Walks one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_.empty() ? "/" : where_, "expected an object");
  }

  std::string at(const std::string& key) const { return where_ + "/" + escape(key); }
  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(at(key), "expected a string");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(at(key), "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
            throw ConfigError(at(key), "expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(at(key), "expected a number");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(at(key), e.what());
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, at(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.contains(k)) throw ConfigError(at(k), "unknown key");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class F>
void check(bool ok, const std::string& where, F&& message) {
  if (!ok) throw ConfigError(where, message());
}

}  // namespace detail

inline RunConfig from_json(const json& root) {
  using detail::check;
  auto c = RunConfig::defaults();
  detail::Section top(root, "");
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  {
    auto s = top.child("encoder");
    s.get("d_motion", c.encoder.d_motion);
    s.get("d_video", c.encoder.d_video);
    s.get("motion_tokens", c.encoder.motion_tokens);
    s.get("patch_grid", c.encoder.patch_grid);
    s.get("video_frames", c.encoder.video_frames);
    s.get("seed", c.encoder.seed);
    s.finish();
    check(c.encoder.d_motion >= 4, s.at("d_motion"), [] { return "must be >= 4"; });
    check(c.encoder.d_video >= 4, s.at("d_video"), [] { return "must be >= 4"; });
    check(c.encoder.motion_tokens >= 1, s.at("motion_tokens"), [] { return "must be >= 1"; });
    check(c.encoder.patch_grid >= 1, s.at("patch_grid"), [] { return "must be >= 1"; });
    check(c.encoder.video_frames >= 1, s.at("video_frames"), [] { return "must be >= 1"; });
  }
  {
    auto s = top.child("lm");
    s.get("d_lm", c.lm.d_lm);
    s.get("n_layers", c.lm.n_layers);
    s.get("n_heads", c.lm.n_heads);
    s.get("d_ff", c.lm.d_ff);
    s.get("max_len", c.lm.max_len);
    s.finish();
    for (auto [k, v] : {std::pair{"d_lm", c.lm.d_lm}, {"n_layers", c.lm.n_layers}, {"n_heads", c.lm.n_heads},
                        {"d_ff", c.lm.d_ff}, {"max_len", c.lm.max_len}})
      check(v >= 1, s.at(k), [] { return "must be >= 1"; });
    check(c.lm.d_lm % c.lm.n_heads == 0, s.at("n_heads"), [] { return "must divide d_lm"; });
  }
  {
    auto s = top.child("translators");
    s.get("video_hidden", c.video_hidden);
    std::string act(translators::to_string(c.activation));
    s.get("activation", act);
    s.finish();
    check(c.video_hidden >= 0, s.at("video_hidden"), [] { return "must be >= 0 (0 means d_lm)"; });
    try {
      c.activation = translators::parse_activation(act);
    } catch (const ContractError& e) {
      throw ConfigError(s.at("activation"), e.what());
    }
  }
  {
    auto s = top.child("lora");
    s.get("rank", c.lora.rank);
    s.get("alpha", c.lora.alpha);
    if (s.has("targets")) {
      const auto& t = s.raw("targets");
      check(t.is_array() && !t.empty(), s.at("targets"), [] { return "expected a non-empty array"; });
      c.lora.targets = {false, false, false, false};
      for (std::size_t i = 0; i < t.size(); ++i) {
        const auto where = s.at("targets") + "/" + std::to_string(i);
        check(t[i].is_string(), where, [] { return "expected a string"; });
        try {
          c.lora.targets[static_cast<std::size_t>(adaptation::parse_target(t[i].get<std::string>()))] = true;
        } catch (const ContractError& e) {
          throw ConfigError(where, e.what());
        }
      }
    }
    s.finish();
    check(c.lora.rank >= 1, s.at("rank"), [] { return "must be >= 1"; });
    check(c.lora.alpha > 0.0, s.at("alpha"), [] { return "must be > 0"; });
  }
  {
    auto s = top.child("stages");
    for (int stage : {0, 1, 2}) {
      auto ss = s.child(stage_key(stage));
      auto& st = c.stages[stage];
      ss.get("steps", st.steps);
      ss.get("batch_size", st.batch_size);
      ss.get("mix_ratio", st.mix_ratio);
      ss.get("grad_clip", st.grad_clip);
      if (ss.has("lrs")) {
        auto lrs = ss.child("lrs");
        const auto& raw = ss.raw("lrs");
        const auto trainable = stage == 0   ? std::set<std::string>{"lm_base"}
                               : stage == 1 ? std::set<std::string>{"translators"}
                                            : std::set<std::string>{"translators", "lora"};
        for (const auto& [k, v] : raw.items()) {
          check(trainable.contains(k), lrs.at(k), [&] { return "not a trainable group in " + stage_key(stage); });
          double lr = 0.0;
          lrs.get(k, lr);
          check(lr > 0.0 && std::isfinite(lr), lrs.at(k), [] { return "learning rate must be > 0"; });
          st.lrs[k] = lr;
        }
      }
      ss.finish();
      check(st.steps >= 0, ss.at("steps"), [] { return "must be >= 0"; });
      check(st.batch_size >= 1, ss.at("batch_size"), [] { return "must be >= 1"; });
      check(st.mix_ratio >= 0.0 && st.mix_ratio <= 1.0, ss.at("mix_ratio"), [] { return "must be in [0, 1]"; });
      check(st.grad_clip > 0.0, ss.at("grad_clip"), [] { return "must be > 0"; });
    }
    s.finish();
  }
  {
    auto s = top.child("data");
    s.get("captions", c.data.captions);
    s.get("instructions", c.data.instructions);
    s.get("bench", c.data.bench);
    s.finish();
  }
  {
    auto s = top.child("judge");
    s.get("url", c.judge.url);
    s.get("credential_env", c.judge.credential_env);
    s.get("timeout_seconds", c.judge.timeout_seconds);
    s.finish();
    check(!c.judge.credential_env.empty(), s.at("credential_env"), [] { return "must name an environment variable"; });
    check(c.judge.timeout_seconds > 0.0, s.at("timeout_seconds"), [] { return "must be > 0"; });
  }
  top.finish();
  return c;
}

inline RunConfig parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("malformed JSON: ") + e.what());
  }
  return from_json(j);
}

inline RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ResolutionError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text);
}

// Paths are resolved relative to `base` (normally the config's directory).
inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path q(p);
  return q.is_absolute() ? q : base / q;
}

// Checks that the named data paths exist; `keys` picks which are needed.
inline void require_paths(const RunConfig& c, const std::filesystem::path& base,
                          std::initializer_list<std::string_view> keys) {
  for (auto k : keys) {
    const std::string* v = k == "captions" ? &c.data.captions : k == "instructions" ? &c.data.instructions
                                                                                     : &c.data.bench;
    const auto where = "/data/" + std::string(k);
    if (v->empty()) throw ConfigError(where, "path is required for this command");
    if (!std::filesystem::exists(resolve(base, *v))) throw ConfigError(where, "file not found: " + *v);
  }
}

}  // namespace vimonet::config

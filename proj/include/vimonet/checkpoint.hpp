#pragma once

// Checkpoint container:
//   "VMCK" | u32 version | u64 header length | header JSON
//   | u32 block count | blocks (u32 name length, name, tensor body)...
//   | SHA-256 of everything before it
// The LM base is written once to a sibling file "base-<digest>.vmck" (same
// container, kind "base") and referenced from the checkpoint header.

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "vimonet/io.hpp"
#include "vimonet/training.hpp"

namespace vimonet::checkpoint {

using nlohmann::json;

inline constexpr char kMagic[4] = {'V', 'M', 'C', 'K'};
inline constexpr std::uint32_t kVersion = 1;

// ---------------------------------------------------------------------------
// Shape <-> JSON

inline json to_json(const lm::LMConfig& c) {
  return {{"d_lm", c.d_lm},       {"n_layers", c.n_layers}, {"n_heads", c.n_heads},
          {"d_ff", c.d_ff},       {"max_len", c.max_len},   {"vocab_size", c.vocab_size}};
}

inline lm::LMConfig lm_config_from_json(const json& j) {
  lm::LMConfig c;
  c.d_lm = j.at("d_lm");
  c.n_layers = j.at("n_layers");
  c.n_heads = j.at("n_heads");
  c.d_ff = j.at("d_ff");
  c.max_len = j.at("max_len");
  c.vocab_size = j.at("vocab_size");
  return c;
}

inline json to_json(const encoders::EncoderConfig& c) {
  return {{"d_motion", c.d_motion},         {"d_video", c.d_video},           {"motion_tokens", c.motion_tokens},
          {"patch_grid", c.patch_grid},     {"video_frames", c.video_frames}, {"seed", c.seed}};
}

inline encoders::EncoderConfig encoder_config_from_json(const json& j) {
  encoders::EncoderConfig c;
  c.d_motion = j.at("d_motion");
  c.d_video = j.at("d_video");
  c.motion_tokens = j.at("motion_tokens");
  c.patch_grid = j.at("patch_grid");
  c.video_frames = j.at("video_frames");
  c.seed = j.at("seed");
  return c;
}

inline json to_json(const adaptation::LoraSpec& s) {
  json targets = json::array();
  for (std::size_t i = 0; i < 4; ++i)
    if (s.targets[i]) targets.push_back(std::string(adaptation::kTargetNames[i]));
  return {{"rank", s.rank}, {"alpha", s.alpha}, {"targets", targets}};
}

inline adaptation::LoraSpec lora_spec_from_json(const json& j) {
  adaptation::LoraSpec s;
  s.rank = j.at("rank");
  s.alpha = j.at("alpha");
  s.targets = {false, false, false, false};
  for (const auto& t : j.at("targets"))
    s.targets[static_cast<std::size_t>(adaptation::parse_target(t.get<std::string>()))] = true;
  return s;
}

// ---------------------------------------------------------------------------
// Container

struct Container {
  json header;
  std::map<std::string, io::RawTensor> blocks;
};

inline std::vector<std::uint8_t> encode(const Container& c) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  io::put_le(out, kVersion);
  const std::string h = c.header.dump();
  io::put_le<std::uint64_t>(out, h.size());
  out.insert(out.end(), h.begin(), h.end());
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.blocks.size()));
  for (const auto& [name, t] : c.blocks) {
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    io::encode_tensor_body(out, t);
  }
  auto d = Sha256().update(out.data(), out.size()).finish();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

inline Container decode(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  if (bytes.size() < 4 + 4 + 8 + 4 + 32) throw CorruptionError(what + ": file too short");
  const std::size_t body = bytes.size() - 32;
  auto d = Sha256().update(bytes.data(), body).finish();
  if (!std::equal(d.begin(), d.end(), bytes.begin() + static_cast<std::ptrdiff_t>(body)))
    throw CorruptionError(what + ": digest mismatch");
  io::Reader r(bytes.data(), body, what);
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw CorruptionError(what + ": bad magic");
  if (auto v = r.read<std::uint32_t>(); v != kVersion)
    throw CorruptionError(what + ": unsupported version " + std::to_string(v));
  Container c;
  const auto hlen = r.read<std::uint64_t>();
  if (hlen > r.remaining()) throw CorruptionError(what + ": truncated header");
  try {
    c.header = json::parse(r.read_string(static_cast<std::size_t>(hlen)));
  } catch (const json::exception& e) {
    throw CorruptionError(what + ": bad header: " + e.what());
  }
  const auto n = r.read<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = r.read<std::uint32_t>();
    auto name = r.read_string(len);
    c.blocks.emplace(std::move(name), r.read_tensor_body());
  }
  if (r.remaining() != 0) throw CorruptionError(what + ": trailing bytes");
  return c;
}

template <class T>
io::RawTensor tensor_block(const T& t) {
  std::vector<std::uint64_t> dims;
  if constexpr (T::ColsAtCompileTime == 1)
    dims = {static_cast<std::uint64_t>(t.size())};
  else
    dims = {static_cast<std::uint64_t>(t.rows()), static_cast<std::uint64_t>(t.cols())};
  return io::from_doubles(t.data(), static_cast<std::size_t>(t.size()), std::move(dims));
}

template <class T>
void restore_block(T& t, const std::map<std::string, io::RawTensor>& blocks, const std::string& name) {
  auto it = blocks.find(name);
  if (it == blocks.end()) throw CorruptionError("checkpoint lacks tensor " + name);
  if (it->second.element_count() != static_cast<std::uint64_t>(t.size()))
    throw CorruptionError("tensor " + name + " has the wrong size");
  auto values = io::to_doubles(it->second);
  std::copy(values.begin(), values.end(), t.data());
}

inline io::RawTensor text_block(const std::string& s) {
  return {io::DType::u8, {s.size()}, std::vector<std::uint8_t>(s.begin(), s.end())};
}

inline std::string block_text(const std::map<std::string, io::RawTensor>& blocks, const std::string& name) {
  auto it = blocks.find(name);
  if (it == blocks.end() || it->second.dtype != io::DType::u8) throw CorruptionError("checkpoint lacks " + name);
  return std::string(it->second.bytes.begin(), it->second.bytes.end());
}

// ---------------------------------------------------------------------------
// Base LM file

inline std::string base_file_name(const std::string& digest) { return "base-" + digest.substr(0, 16) + ".vmck"; }

inline std::filesystem::path save_base(const std::filesystem::path& dir, const lm::LMParams& base) {
  const auto digest = base_digest(base);
  const auto path = dir / base_file_name(digest);
  if (std::filesystem::exists(path)) return path;  // stored once
  Container c;
  c.header = {{"kind", "base"}, {"lm", to_json(base.cfg)}, {"digest", digest}};
  base.for_each([&](const std::string& n, const auto& t) { c.blocks["lm." + n] = tensor_block(t); });
  io::write_file(path, encode(c));
  return path;
}

inline lm::LMParams load_base(const std::filesystem::path& path, const std::string& expected_digest) {
  if (!std::filesystem::exists(path)) throw ResolutionError("base LM file not found: " + path.string());
  auto c = decode(io::read_file(path), path.string());
  if (c.header.value("kind", "") != "base") throw CorruptionError(path.string() + " is not a base LM file");
  Rng rng(0);
  auto p = lm::LMParams::init(lm_config_from_json(c.header.at("lm")), rng);
  p.for_each([&](const std::string& n, auto& t) { restore_block(t, c.blocks, "lm." + n); });
  if (base_digest(p) != expected_digest) throw CorruptionError("base LM digest mismatch for " + path.string());
  return p;
}

// ---------------------------------------------------------------------------
// Run checkpoints

inline void save_checkpoint(const std::filesystem::path& path, const training::RunState& st) {
  const auto& m = st.model;
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const auto base_path = save_base(dir, m.base);
  Container c;
  c.header = {{"kind", "run"},
              {"stage", st.stage},
              {"step", st.opt.step},
              {"config_digest", sha256_hex(st.config_json)},
              {"base_digest", base_digest(m.base)},
              {"base_file", base_path.filename().string()},
              {"lm", to_json(m.base.cfg)},
              {"encoder", to_json(m.encoder)},
              {"video_hidden", m.video.W1.rows()},
              {"activation", std::string(translators::to_string(m.video.activation))},
              {"adam", {{"beta1", st.opt.beta1}, {"beta2", st.opt.beta2}, {"eps", st.opt.eps}}}};
  if (m.lora) c.header["lora"] = to_json(m.lora->spec);
  c.blocks["vocab"] = text_block(m.vocab.to_text());
  c.blocks["config"] = text_block(st.config_json);
  m.for_each_tensor([&](const std::string& n, const auto& t) {
    if (!n.starts_with("lm.")) c.blocks[n] = tensor_block(t);
  });
  for (const auto& [n, mv] : st.opt.moments) {
    c.blocks["adam.m." + n] = tensor_block(mv.first);
    c.blocks["adam.v." + n] = tensor_block(mv.second);
  }
  io::write_file(path, encode(c));
}

inline training::RunState load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ResolutionError("checkpoint not found: " + path.string());
  auto c = decode(io::read_file(path), path.string());
  const auto& h = c.header;
  try {
    if (h.at("kind") != "run") throw CorruptionError(path.string() + " is not a run checkpoint");
    training::RunState st;
    st.stage = h.at("stage");
    st.config_json = block_text(c.blocks, "config");
    if (sha256_hex(st.config_json) != h.at("config_digest").get<std::string>())
      throw CorruptionError("config digest mismatch");
    ModelShape shape;
    shape.lm = lm_config_from_json(h.at("lm"));
    shape.encoder = encoder_config_from_json(h.at("encoder"));
    shape.video_hidden = h.at("video_hidden");
    shape.activation = translators::parse_activation(h.at("activation").get<std::string>());
    auto vocab = Vocabulary::from_text(block_text(c.blocks, "vocab"));
    if (static_cast<int>(vocab.size()) != shape.lm.vocab_size) throw CorruptionError("vocabulary size mismatch");
    st.model = Model::create(std::move(vocab), shape, 0);
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    st.model.base = load_base(dir / h.at("base_file").get<std::string>(), h.at("base_digest"));
    if (h.contains("lora")) st.model.attach_lora(lora_spec_from_json(h.at("lora")), 0);
    st.model.for_each_tensor([&](const std::string& n, auto& t) {
      if (!n.starts_with("lm.")) restore_block(t, c.blocks, n);
    });
    st.opt.step = h.at("step");
    st.opt.beta1 = h.at("adam").at("beta1");
    st.opt.beta2 = h.at("adam").at("beta2");
    st.opt.eps = h.at("adam").at("eps");
    for (const auto& [name, block] : c.blocks) {
      if (!name.starts_with("adam.m.")) continue;
      const auto n = name.substr(7);
      auto m = io::to_doubles(block);
      auto v = io::to_doubles(c.blocks.at("adam.v." + n));
      st.opt.moments[n] = {Eigen::Map<const Vec>(m.data(), static_cast<Eigen::Index>(m.size())),
                           Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()))};
    }
    return st;
  } catch (const json::exception& e) {
    throw CorruptionError(path.string() + ": bad header field: " + e.what());
  } catch (const std::out_of_range& e) {
    throw CorruptionError(path.string() + ": missing block: " + e.what());
  }
}

}  // namespace vimonet::checkpoint

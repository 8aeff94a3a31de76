#pragma once

// Synthetic paired motion/video/text corpus. Every record carries the script
// that generated it, so gold answers can be recomputed mechanically.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vimonet/io.hpp"
#include "vimonet/model.hpp"
#include "vimonet/synth.hpp"

namespace vimonet::data {

using synth::CompositeScript;
using synth::Direction;
using synth::Kind;
using synth::MotionPrimitive;
using synth::Side;

// ---------------------------------------------------------------------------
// Phrase tables

inline std::string verb(Kind k) {
  switch (k) {
    case Kind::raise_arm: return "raise";
    case Kind::wave: return "wave";
    case Kind::squat: return "squat";
    case Kind::jump: return "jump";
    case Kind::kick: return "kick";
    case Kind::walk: return "walk";
    case Kind::turn: return "turn";
  }
  return "?";
}

inline std::string gerund(Kind k) {
  switch (k) {
    case Kind::raise_arm: return "raising";
    case Kind::wave: return "waving";
    case Kind::squat: return "squatting";
    case Kind::jump: return "jumping";
    case Kind::kick: return "kicking";
    case Kind::walk: return "walking";
    case Kind::turn: return "turning";
  }
  return "?";
}

inline std::string intent(Kind k) {
  switch (k) {
    case Kind::raise_arm: return "asking a question";
    case Kind::wave: return "greeting a friend";
    case Kind::squat: return "exercising the legs";
    case Kind::jump: return "celebrating a win";
    case Kind::kick: return "playing with a ball";
    case Kind::walk: return "going somewhere";
    case Kind::turn: return "facing another way";
  }
  return "?";
}

inline std::string direction_word(Direction d) { return std::string(synth::to_string(d)); }
inline std::string side_word(Side s) { return std::string(synth::to_string(s)); }

// Third-person clause: "raises the left arm", "walks to the right".
inline std::string clause(const MotionPrimitive& p) {
  const auto side = side_word(p.side);
  switch (p.kind) {
    case Kind::raise_arm: return "raises the " + side + " arm";
    case Kind::wave: return "waves the " + side + " hand";
    case Kind::squat: return "squats";
    case Kind::jump: return "jumps";
    case Kind::kick: return "kicks with the " + side + " leg";
    case Kind::walk:
      return p.direction == Direction::left || p.direction == Direction::right
                 ? "walks to the " + direction_word(p.direction)
                 : "walks " + direction_word(p.direction);
    case Kind::turn: return "turns " + direction_word(p.direction);
  }
  return "?";
}

inline std::string caption(const CompositeScript& s) {
  std::string out = "the person";
  for (std::size_t i = 0; i < s.primitives.size(); ++i) out += (i ? " then " : " ") + clause(s.primitives[i]);
  return out;
}

inline const std::vector<std::string>& caption_instructions() {
  static const std::vector<std::string> v = {"describe the motion .", "what is the person doing ?",
                                             "give a short caption ."};
  return v;
}

inline const std::string kNegation = "no";
inline const std::string kInContextLead = "example question :";

// The six QA categories of the instruction set, in round-robin order.
inline constexpr std::array<Category, 6> kQaCategories = {Category::sequentiality, Category::direction,
                                                          Category::body_part,     Category::reasoning,
                                                          Category::hallucination, Category::multiple_choice};

// The five bench categories.
inline constexpr std::array<Category, 5> kBenchCategories = {Category::sequentiality, Category::direction,
                                                             Category::body_part, Category::reasoning,
                                                             Category::hallucination};

// Label tokens standing in for visual content during base-LM pretraining.
inline std::string label_token(const MotionPrimitive& p) { return "@" + p.label(); }

// Every word the generator can emit, plus the label tokens.
inline Vocabulary corpus_vocabulary() {
  std::set<std::string> words;
  auto add = [&](const std::string& text) {
    for (auto& w : split_whitespace(text)) words.insert(std::move(w));
  };
  for (const auto& p : synth::all_primitives()) {
    add(clause(p));
    add(label_token(p));
  }
  for (auto k : synth::kAllKinds) {
    add(verb(k));
    add(gerund(k));
    add(intent(k));
  }
  for (const auto& i : caption_instructions()) add(i);
  add("the person then " + kNegation + " " + kInContextLead + " answer");
  add("what did the person do first last after ?");
  add("which direction did the person walk way turn ?");
  add("which arm hand leg did the person raise wave kick with ?");
  add("what was the intent of the first last action ?");
  add("which action did the person perform ?");
  add("left right forward backward");
  for (char c = 'A'; c <= 'D'; ++c) add(std::string(1, c) + " (" + std::string(1, c) + ")");
  add(format_multiple_choice("x", {}).substr(2));
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

// ---------------------------------------------------------------------------
// Records

struct DatasetRecord {
  std::string id;
  Modality modality = Modality::motion;
  Category category = Category::caption;
  std::string instruction;           // bare question when options are present
  std::string response;
  std::vector<std::string> options;  // multiple-choice only; labelled A, B, ...
  std::string motion_file;           // payload paths, relative to the dataset file
  std::string video_file;
  double fps = synth::kDefaultFps;
  CompositeScript script;
  std::shared_ptr<const MotionSequence> motion;
  std::shared_ptr<const VideoClip> video;

  bool multiple_choice() const { return !options.empty(); }

  // The text that goes after the visual placeholder.
  std::string prompt_text() const {
    return multiple_choice() ? format_multiple_choice(instruction, options) : instruction;
  }

  Payload payload() const {
    if (modality == Modality::motion) {
      if (!motion) throw ResolutionError("record " + id + " has no motion payload");
      return motion;
    }
    if (!video) throw ResolutionError("record " + id + " has no video payload");
    return video;
  }
};

inline std::string letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

// ---------------------------------------------------------------------------
// Scripts

inline MotionPrimitive random_primitive(Kind k, Rng& rng) {
  MotionPrimitive p{k, Side::none, Direction::none, 16 + static_cast<int>(rng() % 9)};
  if (synth::needs_side(k)) p.side = rng() % 2 ? Side::right : Side::left;
  if (k == Kind::walk) p.direction = std::array{Direction::forward, Direction::backward, Direction::left,
                                                Direction::right}[rng() % 4];
  if (k == Kind::turn) p.direction = rng() % 2 ? Direction::right : Direction::left;
  return p;
}

// 1-3 primitives of distinct kinds, 16-24 frames each. When `required` is
// non-empty the script contains at least one of those kinds.
inline CompositeScript random_script(Rng& rng, int min_prims = 1, const std::vector<Kind>& required = {}) {
  const int n = min_prims + static_cast<int>(rng() % static_cast<std::uint64_t>(4 - min_prims));
  std::vector<Kind> kinds(synth::kAllKinds.begin(), synth::kAllKinds.end());
  std::shuffle(kinds.begin(), kinds.end(), rng);
  kinds.resize(static_cast<std::size_t>(n));
  if (!required.empty() &&
      std::none_of(kinds.begin(), kinds.end(),
                   [&](Kind k) { return std::find(required.begin(), required.end(), k) != required.end(); }))
    kinds[rng() % kinds.size()] = required[rng() % required.size()];
  CompositeScript s;
  for (auto k : kinds) s.primitives.push_back(random_primitive(k, rng));
  s.validate();
  return s;
}

inline std::vector<Kind> absent_kinds(const CompositeScript& s) {
  std::vector<Kind> out;
  for (auto k : synth::kAllKinds)
    if (!s.has_kind(k)) out.push_back(k);
  return out;
}

// ---------------------------------------------------------------------------
// Question builders. Each returns (instruction, response, options).

struct QA {
  std::string instruction;
  std::string response;
  std::vector<std::string> options;
};

inline QA sequentiality_qa(const CompositeScript& s, Rng& rng) {
  const auto& p = s.primitives;
  const auto pick = p.size() >= 2 ? rng() % 3 : rng() % 2;
  if (pick == 0) return {"what did the person do first ?", verb(p.front().kind), {}};
  if (pick == 1) return {"what did the person do last ?", verb(p.back().kind), {}};
  const auto i = rng() % (p.size() - 1);
  return {"what did the person do after " + gerund(p[i].kind) + " ?", verb(p[i + 1].kind), {}};
}

inline QA direction_qa(const CompositeScript& s, Rng& rng) {
  std::vector<const MotionPrimitive*> c;
  for (const auto& p : s.primitives)
    if (synth::needs_direction(p.kind)) c.push_back(&p);
  if (c.empty()) throw ContractError("direction question needs a walk or turn");
  const auto& p = *c[rng() % c.size()];
  if (p.kind == Kind::walk) return {"which direction did the person walk ?", direction_word(p.direction), {}};
  return {"which way did the person turn ?", direction_word(p.direction), {}};
}

inline QA body_part_qa(const CompositeScript& s, Rng& rng) {
  std::vector<const MotionPrimitive*> c;
  for (const auto& p : s.primitives)
    if (synth::needs_side(p.kind)) c.push_back(&p);
  if (c.empty()) throw ContractError("body-part question needs a raise, wave or kick");
  const auto& p = *c[rng() % c.size()];
  const auto side = side_word(p.side);
  if (p.kind == Kind::raise_arm) return {"which arm did the person raise ?", side, {}};
  if (p.kind == Kind::wave) return {"which hand did the person wave ?", side, {}};
  return {"which leg did the person kick with ?", side, {}};
}

// Shuffles `correct` in among `distractors`; the response is its letter.
inline QA multiple_choice_qa(std::string question, std::string correct, std::vector<std::string> distractors,
                             Rng& rng) {
  std::shuffle(distractors.begin(), distractors.end(), rng);
  distractors.resize(3);
  const auto at = rng() % 4;
  distractors.insert(distractors.begin() + static_cast<std::ptrdiff_t>(at), std::move(correct));
  return {std::move(question), letter(at), std::move(distractors)};
}

inline QA reasoning_qa(const CompositeScript& s, Rng& rng) {
  const bool first = rng() % 2 == 0;
  const Kind k = first ? s.primitives.front().kind : s.primitives.back().kind;
  std::vector<std::string> others;
  for (auto o : synth::kAllKinds)
    if (o != k) others.push_back(intent(o));
  return multiple_choice_qa(std::string("what was the intent of the ") + (first ? "first" : "last") + " action ?",
                            intent(k), std::move(others), rng);
}

inline QA action_choice_qa(const CompositeScript& s, Rng& rng) {
  const Kind k = s.primitives[rng() % s.primitives.size()].kind;
  std::vector<std::string> others;
  for (auto o : absent_kinds(s)) others.push_back(verb(o));
  return multiple_choice_qa("which action did the person perform ?", verb(k), std::move(others), rng);
}

inline QA hallucination_qa(const CompositeScript& s, Rng& rng) {
  const auto absent = absent_kinds(s);
  return {"did the person " + verb(absent[rng() % absent.size()]) + " ?", kNegation, {}};
}

inline std::vector<Kind> required_kinds(Category c) {
  if (c == Category::direction) return {Kind::walk, Kind::turn};
  if (c == Category::body_part) return {Kind::raise_arm, Kind::wave, Kind::kick};
  return {};
}

inline QA build_qa(Category c, const CompositeScript& s, Rng& rng) {
  switch (c) {
    case Category::sequentiality: return sequentiality_qa(s, rng);
    case Category::direction: return direction_qa(s, rng);
    case Category::body_part: return body_part_qa(s, rng);
    case Category::reasoning: return reasoning_qa(s, rng);
    case Category::hallucination: return hallucination_qa(s, rng);
    case Category::multiple_choice: return action_choice_qa(s, rng);
    case Category::caption: break;
  }
  return {caption_instructions()[rng() % caption_instructions().size()], caption(s), {}};
}

// A solved hallucination example about the same clip, prepended to the question.
inline std::string in_context_prefix(const CompositeScript& s, Rng& rng) {
  auto ex = hallucination_qa(s, rng);
  return kInContextLead + " " + ex.instruction + " answer : " + ex.response + " question : ";
}

// ---------------------------------------------------------------------------
// Dataset builders

struct GenOptions {
  double fps = synth::kDefaultFps;
  int height = 32;
  int width = 32;
  double noise = 0.004;
  double in_context_rate = 0.15;
};

struct Clip {
  std::shared_ptr<const MotionSequence> motion;
  std::shared_ptr<const VideoClip> video;
};

inline Clip synthesize(const CompositeScript& s, std::uint64_t seed, const GenOptions& opt) {
  auto m = std::make_shared<const MotionSequence>(synth::synth_motion(s, synth::kJointCount, opt.fps, seed, opt.noise));
  auto v = std::make_shared<const VideoClip>(synth::render_stick_figure(*m, opt.height, opt.width));
  return {m, v};
}

inline std::string pad_index(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

// Emits a motion record and a video record per script until n records exist.
template <class MakeQA>
std::vector<DatasetRecord> build_paired(const std::string& prefix, int n, std::uint64_t seed, const GenOptions& opt,
                                        MakeQA&& make) {
  if (n < 0) throw ContractError("record count must be >= 0");
  std::vector<DatasetRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::size_t k = 0; static_cast<int>(out.size()) < n; ++k) {
    Rng rng(mix_seed(seed, k));
    auto [script, category, qa] = make(k, rng);
    const auto clip = synthesize(script, mix_seed(seed, 0x5c0000ULL + k), opt);
    const auto stem = prefix + "-" + pad_index(k);
    for (auto mod : {Modality::motion, Modality::video}) {
      if (static_cast<int>(out.size()) == n) break;
      DatasetRecord r;
      r.id = stem + (mod == Modality::motion ? "-m" : "-v");
      r.modality = mod;
      r.category = category;
      r.instruction = qa.instruction;
      r.response = qa.response;
      r.options = qa.options;
      r.motion_file = "payloads/" + stem + ".motion.vmtn";
      r.video_file = "payloads/" + stem + ".video.vmtn";
      r.fps = opt.fps;
      r.script = script;
      r.motion = clip.motion;
      r.video = clip.video;
      out.push_back(std::move(r));
    }
  }
  return out;
}

struct Drawn {
  CompositeScript script;
  Category category;
  QA qa;
};

inline std::vector<DatasetRecord> build_caption_dataset(int n, std::uint64_t seed, const GenOptions& opt = {}) {
  return build_paired("cap", n, seed, opt, [](std::size_t, Rng& rng) {
    auto s = random_script(rng);
    auto qa = build_qa(Category::caption, s, rng);
    return Drawn{std::move(s), Category::caption, std::move(qa)};
  });
}

inline Drawn draw_question(Category c, Rng& rng) {
  auto s = random_script(rng, c == Category::sequentiality ? 2 : 1, required_kinds(c));
  auto qa = build_qa(c, s, rng);
  return {std::move(s), c, std::move(qa)};
}

inline std::vector<DatasetRecord> build_instruction_dataset(int n, std::uint64_t seed, const GenOptions& opt = {}) {
  if (n < 6) throw ContractError("instruction dataset needs n >= 6");
  return build_paired("ins", n, seed, opt, [&](std::size_t k, Rng& rng) {
    auto d = draw_question(kQaCategories[k % kQaCategories.size()], rng);
    if (std::uniform_real_distribution<double>(0, 1)(rng) < opt.in_context_rate)
      d.qa.instruction = in_context_prefix(d.script, rng) + d.qa.instruction;
    return d;
  });
}

// Held-out evaluation items over the five bench categories.
inline std::vector<DatasetRecord> build_bench_dataset(int n, std::uint64_t seed, const GenOptions& opt = {}) {
  return build_paired("bench", n, seed, opt, [](std::size_t k, Rng& rng) {
    return draw_question(kBenchCategories[k % kBenchCategories.size()], rng);
  });
}

// ---------------------------------------------------------------------------
// Base-LM pretraining corpus: the visual slot is filled with label tokens of
// the primitive active at each visual position (motion chunk or keyframe).

inline std::vector<std::string> visual_labels(const DatasetRecord& r, const encoders::EncoderConfig& enc) {
  const int F = r.script.total_frames();
  std::vector<int> frames;
  if (r.modality == Modality::motion) {
    const int k = std::min(enc.motion_tokens, F);
    for (int c = 0; c < k; ++c) {
      auto [lo, hi] = encoders::chunk_bounds(F, k, c);
      frames.push_back((lo + hi - 1) / 2);
    }
  } else {
    frames = encoders::keyframe_indices(F, enc.video_frames);
  }
  std::vector<std::string> out;
  for (int f : frames) out.push_back(label_token(r.script.primitives[r.script.primitive_at(f)]));
  return out;
}

inline EncodedSample text_sample(const DatasetRecord& r, const encoders::EncoderConfig& enc, const Vocabulary& vocab) {
  EncodedSample s;
  s.id = r.id + "-text";
  s.modality = r.modality;
  s.category = r.category;
  s.prompt_ids = {vocab.specials().bos};
  for (const auto& l : visual_labels(r, enc)) s.prompt_ids.push_back(vocab.id(l));
  auto body = tokenize(r.prompt_text(), vocab);
  s.prompt_ids.insert(s.prompt_ids.end(), body.ids.begin(), body.ids.end());
  s.response = response_tokens(r.response, vocab);
  return s;
}

inline std::vector<EncodedSample> pretraining_corpus(std::span<const DatasetRecord> records,
                                                     const encoders::EncoderConfig& enc, const Vocabulary& vocab) {
  std::vector<EncodedSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(text_sample(r, enc, vocab));
  return out;
}

// ---------------------------------------------------------------------------
// Conversion to model inputs

inline InstructionSample to_instruction_sample(const DatasetRecord& r, const Vocabulary& vocab) {
  auto prompt = build_prompt(r.prompt_text(), r.modality, r.payload(), vocab);
  return make_sample(r.id, std::move(prompt), response_tokens(r.response, vocab), r.category, vocab);
}

inline std::vector<EncodedSample> encode_records(std::span<const DatasetRecord> records, const Model& model) {
  std::vector<EncodedSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(encode_sample(to_instruction_sample(r, model.vocab), model));
  return out;
}

inline std::vector<DatasetRecord> of_modality(std::span<const DatasetRecord> records, Modality m) {
  std::vector<DatasetRecord> out;
  for (const auto& r : records)
    if (r.modality == m) out.push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// Files: one JSON object per line; payloads are tensor files next to it.

inline nlohmann::json to_json(const DatasetRecord& r) {
  nlohmann::json j = {{"id", r.id},
                      {"modality", to_string(r.modality)},
                      {"category", to_string(r.category)},
                      {"instruction", r.instruction},
                      {"response", r.response},
                      {"motion_file", r.motion_file},
                      {"video_file", r.video_file},
                      {"fps", r.fps},
                      {"script", synth::to_json(r.script)}};
  if (!r.options.empty()) j["options"] = r.options;
  return j;
}

inline DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord r;
  r.id = j.at("id").get<std::string>();
  r.modality = parse_modality(j.at("modality").get<std::string>());
  r.category = parse_category(j.at("category").get<std::string>());
  r.instruction = j.at("instruction").get<std::string>();
  r.response = j.at("response").get<std::string>();
  r.motion_file = j.value("motion_file", "");
  r.video_file = j.value("video_file", "");
  r.fps = j.value("fps", synth::kDefaultFps);
  r.script = synth::script_from_json(j.at("script"));
  if (j.contains("options")) r.options = j.at("options").get<std::vector<std::string>>();
  return r;
}

inline void write_dataset(const std::filesystem::path& path, std::span<const DatasetRecord> records) {
  namespace fs = std::filesystem;
  const auto dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ostringstream lines;
  std::set<std::string> written;
  for (const auto& r : records) {
    lines << to_json(r).dump() << '\n';
    auto put = [&](const std::string& rel, auto&& make) {
      if (rel.empty() || !written.insert(rel).second) return;
      const auto p = dir / rel;
      fs::create_directories(p.parent_path(), ec);
      if (ec) throw IoError("cannot create " + p.parent_path().string());
      io::write_tensor(p, make());
    };
    if (r.motion) put(r.motion_file, [&] { return io::motion_tensor(*r.motion); });
    if (r.video) put(r.video_file, [&] { return io::video_tensor(*r.video); });
  }
  const auto text = lines.str();
  io::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// Loads records and their payloads. The payload matching each record's
// modality must exist; the other one is loaded when present.
inline std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::ifstream in(path);
  if (!in) throw ResolutionError("cannot open dataset " + path.string());
  const auto dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::map<std::string, std::shared_ptr<const MotionSequence>> motions;
  std::map<std::string, std::shared_ptr<const VideoClip>> videos;
  std::vector<DatasetRecord> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (split_whitespace(line).empty()) continue;
    DatasetRecord r;
    try {
      r = record_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
    auto load_motion = [&](bool required) {
      if (r.motion_file.empty() || !fs::exists(dir / r.motion_file)) {
        if (required) throw ResolutionError("record " + r.id + ": motion payload '" + r.motion_file + "' not found");
        return;
      }
      auto& slot = motions[r.motion_file];
      if (!slot) slot = std::make_shared<const MotionSequence>(io::motion_from_tensor(io::read_tensor(dir / r.motion_file), r.fps));
      r.motion = slot;
    };
    auto load_video = [&](bool required) {
      if (r.video_file.empty() || !fs::exists(dir / r.video_file)) {
        if (required) throw ResolutionError("record " + r.id + ": video payload '" + r.video_file + "' not found");
        return;
      }
      auto& slot = videos[r.video_file];
      if (!slot) slot = std::make_shared<const VideoClip>(io::video_from_tensor(io::read_tensor(dir / r.video_file)));
      r.video = slot;
    };
    load_motion(r.modality == Modality::motion);
    load_video(r.modality == Modality::video);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace vimonet::data

#pragma once

// Shared domain types, the word-level tokenizer and prompt templating.

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "vimonet/errors.hpp"
#include "vimonet/tensor.hpp"

namespace vimonet {

using TokenId = std::int32_t;

struct SpecialIds {
  TokenId pad = 0;
  TokenId bos = 1;
  TokenId eos = 2;
  TokenId unk = 3;
  TokenId vis = 4;
};

inline constexpr std::array<std::string_view, 5> kSpecialTokens = {"<pad>", "<bos>", "<eos>",
                                                                   "<unk>", "<vis>"};

// Closed word-level vocabulary. Ids are dense in [0, size()); the five
// specials always occupy ids 0..4.
class Vocabulary {
 public:
  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  explicit Vocabulary(const std::vector<std::string>& words) {
    for (auto s : kSpecialTokens) add(std::string(s));
    for (const auto& w : words) {
      if (w.empty() || w.find_first_of(" \t\r\n") != std::string::npos)
        throw ContractError("vocabulary word must be non-empty and whitespace-free: '" + w + "'");
      if (!token_to_id_.contains(w)) add(w);
    }
  }

  std::size_t size() const { return id_to_token_.size(); }
  const SpecialIds& specials() const { return specials_; }

  bool contains(std::string_view token) const {
    return token_to_id_.contains(std::string(token));
  }

  std::optional<TokenId> find(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
  }

  TokenId id(std::string_view token) const {
    auto found = find(token);
    if (!found) throw ContractError("token not in vocabulary: '" + std::string(token) + "'");
    return *found;
  }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= size())
      throw InvalidTokenError("token id " + std::to_string(id) + " out of range [0, " +
                              std::to_string(size()) + ")");
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  bool is_special(TokenId id) const { return id >= 0 && id < static_cast<TokenId>(kSpecialTokens.size()); }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  // One "token<TAB>id" line per entry, ascending id (so specials first).
  void write(std::ostream& out) const {
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\t' << i << '\n';
  }

  std::string to_text() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  static Vocabulary read(std::istream& in) {
    std::vector<std::pair<std::string, long long>> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0)
        throw ParseError("vocabulary line " + std::to_string(lineno) + ": expected token<TAB>id", lineno);
      long long id = 0;
      try {
        std::size_t used = 0;
        id = std::stoll(line.substr(tab + 1), &used);
        if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("vocabulary line " + std::to_string(lineno) + ": bad id", lineno);
      }
      entries.emplace_back(line.substr(0, tab), id);
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].second != static_cast<long long>(i))
        throw ParseError("vocabulary ids must be dense and ascending", i + 1);
      if (i < kSpecialTokens.size() && entries[i].first != kSpecialTokens[i])
        throw ParseError("vocabulary must start with the special tokens", i + 1);
    }
    if (entries.size() < kSpecialTokens.size()) throw ParseError("vocabulary is missing special tokens");
    std::vector<std::string> words;
    for (std::size_t i = kSpecialTokens.size(); i < entries.size(); ++i) words.push_back(entries[i].first);
    Vocabulary v(words);
    if (v.size() != entries.size()) throw ParseError("vocabulary contains duplicate tokens");
    return v;
  }

  static Vocabulary from_text(const std::string& text) {
    std::istringstream is(text);
    return read(is);
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  void add(std::string w) {
    token_to_id_.emplace(w, static_cast<TokenId>(id_to_token_.size()));
    id_to_token_.push_back(std::move(w));
  }

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
  SpecialIds specials_;
};

struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  TokenId operator[](std::size_t i) const { return ids[i]; }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

// Whitespace word-level tokenization. Unknown words and literal special
// strings map to UNK, so text can never inject a VIS placeholder.
inline TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  for (const auto& w : split_whitespace(text)) {
    auto id = vocab.find(w);
    seq.ids.push_back(id && !vocab.is_special(*id) ? *id : vocab.specials().unk);
  }
  return seq;
}

inline std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : seq.ids) {
    const auto& tok = vocab.token(id);
    if (vocab.is_special(id) && id != vocab.specials().unk) continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

inline void validate_ids(const TokenSequence& seq, const Vocabulary& vocab) {
  for (TokenId id : seq.ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size())
      throw InvalidTokenError("token id " + std::to_string(id) + " out of range");
}

// F frames of a J-joint skeleton, stored as an F x (3J) matrix with joint j
// at columns [3j, 3j+3) in (x, y, z) order. Meters; y is up, z is forward,
// x is the person's left.
class MotionSequence {
 public:
  MotionSequence(Mat frames, int joints, double fps) : frames_(std::move(frames)), joints_(joints), fps_(fps) {
    if (joints_ < 2) throw ContractError("motion needs at least 2 joints");
    if (frames_.rows() < 1) throw ContractError("motion needs at least 1 frame");
    if (frames_.cols() != 3 * joints_) throw ContractError("motion frame width must be 3*J");
    if (!(fps_ > 0.0) || !std::isfinite(fps_)) throw ContractError("motion fps must be positive");
    if (!frames_.allFinite()) throw ContractError("motion coordinates must be finite");
  }

  int frame_count() const { return static_cast<int>(frames_.rows()); }
  int joint_count() const { return joints_; }
  double fps() const { return fps_; }
  const Mat& frames() const { return frames_; }

  Eigen::Vector3d joint(int frame, int j) const {
    return frames_.block<1, 3>(frame, 3 * j).transpose();
  }

  friend bool operator==(const MotionSequence& a, const MotionSequence& b) {
    return a.joints_ == b.joints_ && a.fps_ == b.fps_ && a.frames_.rows() == b.frames_.rows() &&
           a.frames_ == b.frames_;
  }

 private:
  Mat frames_;
  int joints_;
  double fps_;
};

// T raster keyframes, 8-bit channels, stored frame-major as T x H x W x C.
class VideoClip {
 public:
  VideoClip(int frames, int height, int width, int channels, std::vector<std::uint8_t> pixels)
      : t_(frames), h_(height), w_(width), c_(channels), pixels_(std::move(pixels)) {
    if (t_ < 1) throw ContractError("video needs at least 1 frame");
    if (h_ < 8 || w_ < 8) throw ContractError("video frames must be at least 8x8");
    if (c_ != 1 && c_ != 3) throw ContractError("video channels must be 1 or 3");
    if (pixels_.size() != frame_size() * static_cast<std::size_t>(t_))
      throw ContractError("video pixel buffer has the wrong size");
  }

  static VideoClip blank(int frames, int height, int width, int channels = 1) {
    return VideoClip(frames, height, width, channels,
                     std::vector<std::uint8_t>(static_cast<std::size_t>(frames) * height * width * channels, 0));
  }

  int frame_count() const { return t_; }
  int height() const { return h_; }
  int width() const { return w_; }
  int channels() const { return c_; }
  std::size_t frame_size() const { return static_cast<std::size_t>(h_) * w_ * c_; }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }

  std::uint8_t at(int t, int y, int x, int c = 0) const { return pixels_[index(t, y, x, c)]; }
  std::uint8_t& at(int t, int y, int x, int c = 0) { return pixels_[index(t, y, x, c)]; }

  std::span<const std::uint8_t> frame(int t) const {
    return {pixels_.data() + frame_size() * static_cast<std::size_t>(t), frame_size()};
  }

  friend bool operator==(const VideoClip&, const VideoClip&) = default;

 private:
  std::size_t index(int t, int y, int x, int c) const {
    return ((static_cast<std::size_t>(t) * h_ + y) * w_ + x) * c_ + c;
  }

  int t_, h_, w_, c_;
  std::vector<std::uint8_t> pixels_;
};

enum class Modality { motion, video };

inline std::string_view to_string(Modality m) { return m == Modality::motion ? "motion" : "video"; }

inline Modality parse_modality(std::string_view s) {
  if (s == "motion") return Modality::motion;
  if (s == "video") return Modality::video;
  throw ContractError("unknown modality '" + std::string(s) + "'");
}

enum class Category { caption, sequentiality, direction, body_part, reasoning, hallucination, multiple_choice };

inline constexpr std::array<Category, 7> kAllCategories = {
    Category::caption,   Category::sequentiality, Category::direction,      Category::body_part,
    Category::reasoning, Category::hallucination, Category::multiple_choice};

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::caption: return "caption";
    case Category::sequentiality: return "sequentiality";
    case Category::direction: return "direction";
    case Category::body_part: return "body-part";
    case Category::reasoning: return "reasoning";
    case Category::hallucination: return "hallucination";
    case Category::multiple_choice: return "multiple-choice";
  }
  return "?";
}

inline Category parse_category(std::string_view s) {
  for (auto c : kAllCategories)
    if (to_string(c) == s) return c;
  throw ContractError("unknown category '" + std::string(s) + "'");
}

using Payload = std::variant<std::shared_ptr<const MotionSequence>, std::shared_ptr<const VideoClip>>;

inline Modality payload_modality(const Payload& p) {
  return std::holds_alternative<std::shared_ptr<const MotionSequence>>(p) ? Modality::motion : Modality::video;
}

struct Prompt {
  Modality modality;
  TokenSequence instruction_tokens;  // [BOS, VIS, instruction...]
  Payload payload;
  std::size_t vis_index = 1;

  const MotionSequence& motion() const { return *std::get<std::shared_ptr<const MotionSequence>>(payload); }
  const VideoClip& video() const { return *std::get<std::shared_ptr<const VideoClip>>(payload); }
};

inline std::size_t count_vis(const TokenSequence& seq, const Vocabulary& vocab) {
  return static_cast<std::size_t>(std::count(seq.ids.begin(), seq.ids.end(), vocab.specials().vis));
}

inline Prompt build_prompt(std::string_view instruction, Modality modality, Payload payload,
                           const Vocabulary& vocab) {
  if (split_whitespace(instruction).empty()) throw ContractError("instruction must be non-empty");
  bool has_payload = std::visit([](const auto& p) { return p != nullptr; }, payload);
  if (!has_payload) throw ContractError("prompt payload is null");
  if (payload_modality(payload) != modality)
    throw ContractError("payload type does not match modality '" + std::string(to_string(modality)) + "'");
  Prompt p{modality, {}, std::move(payload), 1};
  const auto& sp = vocab.specials();
  p.instruction_tokens.ids = {sp.bos, sp.vis};
  auto body = tokenize(instruction, vocab);
  p.instruction_tokens.ids.insert(p.instruction_tokens.ids.end(), body.ids.begin(), body.ids.end());
  if (count_vis(p.instruction_tokens, vocab) != 1) throw ContractError("prompt must hold exactly one VIS");
  return p;
}

struct InstructionSample {
  std::string id;
  Prompt prompt;
  TokenSequence response_tokens;  // ends with EOS
  Category category;
};

// Tokenizes `response` and appends EOS.
inline TokenSequence response_tokens(std::string_view response, const Vocabulary& vocab) {
  auto seq = tokenize(response, vocab);
  seq.ids.push_back(vocab.specials().eos);
  return seq;
}

inline InstructionSample make_sample(std::string id, Prompt prompt, TokenSequence response, Category category,
                                     const Vocabulary& vocab) {
  if (response.empty() || response.ids.back() != vocab.specials().eos)
    throw ContractError("response must end with EOS");
  if (count_vis(response, vocab) != 0) throw ContractError("response must not contain VIS");
  validate_ids(response, vocab);
  return InstructionSample{std::move(id), std::move(prompt), std::move(response), category};
}

// "question (A) opt (B) opt ... Best option:(" with no trailing characters.
inline std::string format_multiple_choice(std::string_view question, const std::vector<std::string>& options) {
  if (options.size() > 26) throw ContractError("at most 26 options");
  std::string out(question);
  for (std::size_t i = 0; i < options.size(); ++i) {
    out += " (";
    out.push_back(static_cast<char>('A' + i));
    out += ") ";
    out += options[i];
  }
  out += " Best option:(";
  return out;
}

}  // namespace vimonet

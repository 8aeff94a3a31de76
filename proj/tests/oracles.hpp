#pragma once

// Independent rule evaluator for generated records: recomputes the gold
// answer from the stored script JSON and the question text alone. It keeps
// its own phrase tables on purpose and shares no code with the generator.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace vimonet::oracle {

struct Prim {
  std::string kind, side, direction;
};

inline std::vector<Prim> prims(const nlohmann::json& script) {
  std::vector<Prim> out;
  for (const auto& p : script) out.push_back({p["kind"], p["side"], p["direction"]});
  return out;
}

inline const std::map<std::string, std::string>& verbs() {
  static const std::map<std::string, std::string> m = {{"raise-arm", "raise"}, {"wave", "wave"}, {"squat", "squat"},
                                                       {"jump", "jump"},       {"kick", "kick"}, {"walk", "walk"},
                                                       {"turn", "turn"}};
  return m;
}

inline const std::map<std::string, std::string>& gerunds() {
  static const std::map<std::string, std::string> m = {
      {"raise-arm", "raising"}, {"wave", "waving"}, {"squat", "squatting"}, {"jump", "jumping"},
      {"kick", "kicking"},      {"walk", "walking"}, {"turn", "turning"}};
  return m;
}

inline const std::map<std::string, std::string>& intents() {
  static const std::map<std::string, std::string> m = {
      {"raise-arm", "asking a question"}, {"wave", "greeting a friend"},   {"squat", "exercising the legs"},
      {"jump", "celebrating a win"},      {"kick", "playing with a ball"}, {"walk", "going somewhere"},
      {"turn", "facing another way"}};
  return m;
}

inline std::string clause(const Prim& p) {
  if (p.kind == "raise-arm") return "raises the " + p.side + " arm";
  if (p.kind == "wave") return "waves the " + p.side + " hand";
  if (p.kind == "kick") return "kicks with the " + p.side + " leg";
  if (p.kind == "squat") return "squats";
  if (p.kind == "jump") return "jumps";
  if (p.kind == "turn") return "turns " + p.direction;
  if (p.direction == "left" || p.direction == "right") return "walks to the " + p.direction;
  return "walks " + p.direction;
}

inline bool present(const std::vector<Prim>& ps, const std::string& verb) {
  for (const auto& p : ps)
    if (verbs().at(p.kind) == verb) return true;
  return false;
}

inline std::string option_letter(const std::vector<std::string>& options, const std::string& text) {
  for (std::size_t i = 0; i < options.size(); ++i)
    if (options[i] == text) return std::string(1, static_cast<char>('A' + i));
  throw std::runtime_error("correct option '" + text + "' not offered");
}

inline bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

inline std::string find_kind(const std::vector<Prim>& ps, const std::string& kind, std::string Prim::*field) {
  std::optional<std::string> v;
  for (const auto& p : ps)
    if (p.kind == kind) {
      if (v) throw std::runtime_error("ambiguous: two " + kind + " primitives");
      v = p.*field;
    }
  if (!v) throw std::runtime_error("question about absent " + kind);
  return *v;
}

// Gold answer for (script, instruction, options).
inline std::string answer(const nlohmann::json& script, std::string q, const std::vector<std::string>& options) {
  const auto ps = prims(script);
  // In-context prefix: "example question : <q> answer : <a> question : <real q>".
  if (starts_with(q, "example question : ")) {
    const auto a = q.find(" answer : ");
    const auto rest = q.find(" question : ", a);
    const std::string ex_q = q.substr(19, a - 19);
    const std::string ex_a = q.substr(a + 10, rest - a - 10);
    if (answer(script, ex_q, {}) != ex_a) throw std::runtime_error("in-context example is wrong");
    q = q.substr(rest + 12);
  }
  if (q == "describe the motion ." || q == "what is the person doing ?" || q == "give a short caption .") {
    std::string out = "the person";
    for (std::size_t i = 0; i < ps.size(); ++i) out += (i ? " then " : " ") + clause(ps[i]);
    return out;
  }
  if (q == "what did the person do first ?") return verbs().at(ps.front().kind);
  if (q == "what did the person do last ?") return verbs().at(ps.back().kind);
  if (starts_with(q, "what did the person do after ")) {
    const auto g = q.substr(29, q.size() - 29 - 2);
    for (std::size_t i = 0; i + 1 < ps.size(); ++i)
      if (gerunds().at(ps[i].kind) == g) return verbs().at(ps[i + 1].kind);
    throw std::runtime_error("no successor for " + g);
  }
  if (q == "which direction did the person walk ?") return find_kind(ps, "walk", &Prim::direction);
  if (q == "which way did the person turn ?") return find_kind(ps, "turn", &Prim::direction);
  if (q == "which arm did the person raise ?") return find_kind(ps, "raise-arm", &Prim::side);
  if (q == "which hand did the person wave ?") return find_kind(ps, "wave", &Prim::side);
  if (q == "which leg did the person kick with ?") return find_kind(ps, "kick", &Prim::side);
  if (q == "what was the intent of the first action ?") return option_letter(options, intents().at(ps.front().kind));
  if (q == "what was the intent of the last action ?") return option_letter(options, intents().at(ps.back().kind));
  if (q == "which action did the person perform ?") {
    std::optional<std::string> hit;
    for (const auto& o : options)
      if (present(ps, o)) {
        if (hit) throw std::runtime_error("two performed actions offered");
        hit = o;
      }
    if (!hit) throw std::runtime_error("no performed action offered");
    return option_letter(options, *hit);
  }
  if (starts_with(q, "did the person ")) return present(ps, q.substr(15, q.size() - 15 - 2)) ? "yes" : "no";
  throw std::runtime_error("unrecognised question: " + q);
}

}  // namespace vimonet::oracle

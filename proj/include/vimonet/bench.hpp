#pragma once

// Five-category behaviour benchmark: multiple-choice formatting and parsing,
// an offline token-overlap judge, a pluggable external judge, and
// order-independent per-category reports.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vimonet/data.hpp"

namespace vimonet::bench {

inline constexpr double kCorrectThreshold = 2.5;
inline constexpr double kMaxScore = 5.0;
inline constexpr int kMaxNewTokens = 24;

enum class Format { free, multiple_choice };

struct BenchItem {
  std::string id;
  Modality modality = Modality::motion;
  Payload payload;
  std::string question;
  std::string gold;  // free-form answer, or the correct option letter
  Category category = Category::sequentiality;
  std::vector<std::string> options;

  Format format() const { return options.empty() ? Format::free : Format::multiple_choice; }

  void validate() const {
    if (std::find(data::kBenchCategories.begin(), data::kBenchCategories.end(), category) ==
        data::kBenchCategories.end())
      throw ContractError("item " + id + ": '" + std::string(to_string(category)) + "' is not a bench category");
    if (gold.empty()) throw ContractError("item " + id + ": empty gold answer");
    if (format() == Format::multiple_choice) {
      if (gold.size() != 1 || gold[0] < 'A' || static_cast<std::size_t>(gold[0] - 'A') >= options.size())
        throw ContractError("item " + id + ": gold must be one of the option labels");
    }
  }
};

inline BenchItem item_from_record(const data::DatasetRecord& r) {
  BenchItem it{r.id, r.modality, r.payload(), r.instruction, r.response, r.category, r.options};
  it.validate();
  return it;
}

inline std::vector<BenchItem> items_from_records(std::span<const data::DatasetRecord> records) {
  std::vector<BenchItem> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(item_from_record(r));
  return out;
}

inline std::string format_mc_prompt(const BenchItem& item) {
  if (item.format() != Format::multiple_choice) throw ContractError("item " + item.id + " is not multiple-choice");
  return format_multiple_choice(item.question, item.options);
}

inline std::string prompt_text(const BenchItem& item) {
  return item.format() == Format::multiple_choice ? format_mc_prompt(item) : item.question;
}

// First letter after the last "(" (or from the start when there is none),
// uppercased.
inline std::optional<char> parse_mc_answer(std::string_view text) {
  const auto open = text.rfind('(');
  const auto from = open == std::string_view::npos ? 0 : open + 1;
  for (auto i = from; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isalpha(c)) return static_cast<char>(std::toupper(c));
  }
  return std::nullopt;
}

struct JudgeVerdict {
  bool correct = false;
  double score = 0.0;
  std::optional<std::string> warning;
};

// Lowercase, punctuation removed, split on whitespace.
inline std::vector<std::string> normalize(std::string_view text) {
  std::string s;
  s.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::ispunct(c)) continue;
    s.push_back(static_cast<char>(std::tolower(c)));
  }
  return split_whitespace(s);
}

// Token-multiset F1.
inline double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& g : gold) ++counts[g];
  int common = 0;
  for (const auto& p : pred)
    if (auto it = counts.find(p); it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(common) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

inline JudgeVerdict judge_overlap(std::string_view pred, std::string_view gold) {
  const auto g = normalize(gold);
  if (g.empty()) throw ContractError("gold answer has no tokens");
  const double score = kMaxScore * token_f1(normalize(pred), g);
  return {score >= kCorrectThreshold, score, std::nullopt};
}

// External judge seam. Implementations throw on transport or credential
// failure; judge_external converts that into JudgeUnavailable.
struct JudgeRequest {
  std::string pred;
  std::string gold;
  std::string rubric;
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual double score(const JudgeRequest& request) = 0;
};

inline const std::string kRubric =
    "Rate how well the prediction matches the ground-truth answer about a person's movement. "
    "Reply with a single number from 0 (unrelated) to 5 (same meaning).";

inline JudgeVerdict judge_external(std::string_view pred, std::string_view gold, JudgeClient& client) {
  double s = 0.0;
  try {
    s = client.score({std::string(pred), std::string(gold), kRubric});
  } catch (const JudgeUnavailable&) {
    throw;
  } catch (const std::exception& e) {
    throw JudgeUnavailable(std::string("judge request failed: ") + e.what());
  }
  if (!std::isfinite(s)) throw JudgeUnavailable("judge returned a non-finite score");
  JudgeVerdict v;
  if (s < 0.0 || s > kMaxScore) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "judge score %g outside [0, 5]; clamped", s);
    v.warning = buf;
    s = std::clamp(s, 0.0, kMaxScore);
  }
  v.score = s;
  v.correct = s >= kCorrectThreshold;
  return v;
}

// Which judge scores free-form items. Multiple-choice items are always
// scored by exact label match.
struct Judge {
  JudgeClient* external = nullptr;  // null selects the overlap judge

  JudgeVerdict operator()(std::string_view pred, std::string_view gold) const {
    return external ? judge_external(pred, gold, *external) : judge_overlap(pred, gold);
  }
};

inline JudgeVerdict judge_item(const BenchItem& item, std::string_view pred, const Judge& judge) {
  if (item.format() == Format::multiple_choice) {
    const auto label = parse_mc_answer(pred);
    const bool ok = label && std::string(1, *label) == item.gold;
    return {ok, ok ? kMaxScore : 0.0, std::nullopt};
  }
  return judge(pred, item.gold);
}

// ---------------------------------------------------------------------------
// Reports

struct ItemResult {
  std::string id;
  Category category = Category::sequentiality;
  std::string prediction;
  JudgeVerdict verdict;
  bool failed = false;  // generation error; scored 0
};

struct CategoryStats {
  std::size_t items = 0;
  std::size_t correct = 0;
  std::size_t failed = 0;
  double score_sum = 0.0;

  double accuracy() const { return items ? 100.0 * static_cast<double>(correct) / static_cast<double>(items) : 0.0; }
  double mean_score() const { return items ? score_sum / static_cast<double>(items) : 0.0; }
};

struct BenchReport {
  std::map<Category, CategoryStats> categories;  // all five bench categories, possibly empty
  CategoryStats overall;
  std::vector<ItemResult> items;  // sorted by id
  std::vector<std::string> warnings;
};

// Sorting by id first makes every floating-point sum independent of the
// order items were evaluated in.
inline BenchReport aggregate(std::vector<ItemResult> results) {
  std::sort(results.begin(), results.end(), [](const ItemResult& a, const ItemResult& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < results.size(); ++i)
    if (results[i].id == results[i - 1].id) throw ContractError("duplicate bench item id " + results[i].id);
  BenchReport rep;
  for (auto c : data::kBenchCategories) rep.categories[c];
  for (const auto& r : results) {
    auto it = rep.categories.find(r.category);
    if (it == rep.categories.end()) throw ContractError("item " + r.id + " has a non-bench category");
    for (auto* s : {&it->second, &rep.overall}) {
      ++s->items;
      s->correct += r.verdict.correct;
      s->failed += r.failed;
      s->score_sum += r.verdict.score;
    }
    if (r.verdict.warning) rep.warnings.push_back(r.id + ": " + *r.verdict.warning);
  }
  rep.items = std::move(results);
  return rep;
}

using Generator = std::function<std::string(const BenchItem&)>;

// Evaluates every item with `generate` and aggregates. Generation errors mark
// the item failed with score 0. JudgeUnavailable propagates.
inline BenchReport run_bench(std::span<const BenchItem> items, const Generator& generate, const Judge& judge = {}) {
  if (items.empty()) throw ContractError("bench needs at least one item");
  std::vector<ItemResult> results;
  results.reserve(items.size());
  for (const auto& item : items) {
    item.validate();
    ItemResult r{item.id, item.category, {}, {}, false};
    try {
      r.prediction = generate(item);
    } catch (const CapacityError&) {
      r.failed = true;
    } catch (const NumericFault&) {
      r.failed = true;
    }
    if (!r.failed) r.verdict = judge_item(item, r.prediction, judge);
    results.push_back(std::move(r));
  }
  return aggregate(std::move(results));
}

// Greedy generation with the model; the payload goes through the frozen
// encoders (videos are downsampled to the configured keyframe count).
inline Generator model_generator(const Model& model, int max_new = kMaxNewTokens) {
  return [&model, max_new](const BenchItem& item) {
    auto prompt = build_prompt(prompt_text(item), item.modality, item.payload, model.vocab);
    EncodedSample s{item.id, item.modality, model.encode(item.payload), prompt.instruction_tokens.ids, {},
                    item.category};
    auto g = generate_for(model, s, max_new);
    TokenSequence out;
    for (auto t : g.tokens.ids)
      if (t != model.vocab.specials().eos) out.ids.push_back(t);
    return detokenize(out, model.vocab);
  };
}

inline BenchReport run_bench(const Model& model, std::span<const BenchItem> items, const Judge& judge = {}) {
  return run_bench(items, model_generator(model), judge);
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string format_report(const BenchReport& rep) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %6s %8s %7s %10s %7s\n", "category", "items", "correct", "failed",
                "accuracy", "score");
  out += line;
  auto row = [&](const std::string& name, const CategoryStats& s) {
    std::snprintf(line, sizeof line, "%-16s %6zu %8zu %7zu %9s%% %7s\n", name.c_str(), s.items, s.correct, s.failed,
                  fixed(s.accuracy(), 2).c_str(), fixed(s.mean_score(), 3).c_str());
    out += line;
  };
  for (const auto& [c, s] : rep.categories) row(std::string(to_string(c)), s);
  row("overall", rep.overall);
  return out;
}

inline nlohmann::json stats_json(const CategoryStats& s) {
  return {{"items", s.items},       {"correct", s.correct},        {"failed", s.failed},
          {"accuracy", s.accuracy()}, {"mean_score", s.mean_score()}};
}

inline nlohmann::json report_json(const BenchReport& rep, bool with_items = false) {
  nlohmann::json j;
  for (const auto& [c, s] : rep.categories) j["categories"][std::string(to_string(c))] = stats_json(s);
  j["overall"] = stats_json(rep.overall);
  j["warnings"] = rep.warnings;
  if (with_items) {
    j["items"] = nlohmann::json::array();
    for (const auto& r : rep.items)
      j["items"].push_back({{"id", r.id},
                            {"category", to_string(r.category)},
                            {"prediction", r.prediction},
                            {"score", r.verdict.score},
                            {"correct", r.verdict.correct},
                            {"failed", r.failed}});
  }
  return j;
}

}  // namespace vimonet::bench

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>

#include "oracles.hpp"
#include "vimonet/data.hpp"

namespace vimonet::data {
namespace {

namespace fs = std::filesystem;
using synth::Direction;
using synth::Kind;
using synth::MotionPrimitive;
using synth::Side;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("vimonet_data_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CompositeScript one(MotionPrimitive p) { return CompositeScript{{p}}; }

// Topmost row with any lit pixel in frame t, scanned directly from the buffer.
int top_row(const VideoClip& v, int t) {
  const auto f = v.frame(t);
  for (int y = 0; y < v.height(); ++y)
    for (int x = 0; x < v.width() * v.channels(); ++x)
      if (f[static_cast<std::size_t>(y * v.width() * v.channels() + x)]) return y;
  return v.height();
}

TEST(Primitive, ValidatesSideAndDirection) {
  EXPECT_THROW((MotionPrimitive{Kind::walk, Side::none, Direction::none, 20}).validate(), ContractError);
  EXPECT_THROW((MotionPrimitive{Kind::raise_arm, Side::none, Direction::none, 20}).validate(), ContractError);
  EXPECT_THROW((MotionPrimitive{Kind::squat, Side::left, Direction::none, 20}).validate(), ContractError);
  EXPECT_NO_THROW((MotionPrimitive{Kind::turn, Side::none, Direction::left, 20}).validate());
  EXPECT_EQ(synth::all_primitives().size(), 14u);
}

TEST(Script, PartitionsFramesContiguously) {
  CompositeScript s{{{Kind::squat, Side::none, Direction::none, 10},
                     {Kind::jump, Side::none, Direction::none, 7},
                     {Kind::wave, Side::right, Direction::none, 5}}};
  EXPECT_EQ(s.total_frames(), 22);
  EXPECT_EQ(s.segment(1), std::make_pair(10, 17));
  EXPECT_EQ(s.primitive_at(9), 0u);
  EXPECT_EQ(s.primitive_at(10), 1u);
  EXPECT_EQ(s.primitive_at(21), 2u);
  EXPECT_THROW(CompositeScript{}.validate(), ContractError);
  auto dup = s;
  dup.primitives[2].kind = Kind::squat;
  dup.primitives[2].side = Side::none;
  EXPECT_THROW(dup.validate(), ContractError);
}

TEST(SynthMotion, RaiseArmWristFollowsFormula) {
  // Straight arm swung about the shoulder: wrist y = 1.45 - 0.55 cos(0.9 pi s).
  const auto m = synth::synth_motion(one({Kind::raise_arm, Side::left, Direction::none, 30}), 15, 20.0, 1, 0.0);
  ASSERT_EQ(m.frame_count(), 30);
  double prev = -1e9;
  for (int t = 0; t < 30; ++t) {
    const double s = t / 29.0;
    const double want = 1.45 - 0.55 * std::cos(0.9 * std::numbers::pi * s);
    const double y = m.joint(t, synth::kLWrist).y();
    EXPECT_NEAR(y, want, 1e-12);
    EXPECT_GT(y, prev);
    prev = y;
  }
  EXPECT_GE(m.joint(29, synth::kLWrist).y() - m.joint(0, synth::kLWrist).y(), 0.3);
  // The other wrist stays put.
  EXPECT_EQ(m.joint(0, synth::kRWrist), m.joint(29, synth::kRWrist));
}

TEST(SynthMotion, WalkForwardTranslatesWithAntiphaseLegs) {
  const auto m = synth::synth_motion(one({Kind::walk, Side::none, Direction::forward, 40}), 15, 20.0, 1, 0.0);
  EXPECT_GT(m.joint(39, synth::kRoot).z() - m.joint(0, synth::kRoot).z(), 0.0);
  // Ankle offsets relative to the root along the walking axis.
  double dot = 0, nl = 0, nr = 0;
  for (int t = 0; t < 40; ++t) {
    const double l = m.joint(t, synth::kLAnkle).z() - m.joint(t, synth::kRoot).z();
    const double r = m.joint(t, synth::kRAnkle).z() - m.joint(t, synth::kRoot).z();
    dot += l * r;
    nl += l * l;
    nr += r * r;
  }
  ASSERT_GT(nl, 0.0);
  EXPECT_LT(dot / std::sqrt(nl * nr), -0.99);  // half a period apart
}

TEST(SynthMotion, TurnRotatesShouldersByQuarterTurn) {
  const auto m = synth::synth_motion(one({Kind::turn, Side::none, Direction::left, 20}), 15, 20.0, 1, 0.0);
  const auto axis = [&](int t) { return (m.joint(t, synth::kLShoulder) - m.joint(t, synth::kRShoulder)).normalized(); };
  EXPECT_NEAR(axis(0).dot(axis(19)), 0.0, 1e-12);
}

TEST(SynthMotion, NoiseIsBoundedAndDeterministic) {
  Rng rng(4);
  const auto s = random_script(rng);
  const auto clean = synth::synth_motion(s, 15, 20.0, 9, 0.0);
  const auto a = synth::synth_motion(s, 15, 20.0, 9);
  const auto b = synth::synth_motion(s, 15, 20.0, 9);
  const auto c = synth::synth_motion(s, 15, 20.0, 10);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  EXPECT_LT((a.frames() - clean.frames()).cwiseAbs().maxCoeff(), 0.01);
  EXPECT_GT((a.frames() - clean.frames()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SynthMotion, RejectsBadArguments) {
  const auto s = one({Kind::squat, Side::none, Direction::none, 10});
  EXPECT_THROW(synth::synth_motion(s, 14, 20.0, 1), ContractError);
  EXPECT_THROW(synth::synth_motion(s, 15, 0.0, 1), ContractError);
  EXPECT_THROW(synth::synth_motion(s, 15, 20.0, 1, 0.02), ContractError);
  EXPECT_THROW(synth::synth_motion(CompositeScript{}, 15, 20.0, 1), ContractError);
}

TEST(Render, StaticPoseGivesIdenticalLitFrames) {
  Mat f(6, 45);
  const auto rest = synth::rest_pose();
  for (int t = 0; t < 6; ++t)
    for (int j = 0; j < 15; ++j) f.block<1, 3>(t, 3 * j) = rest[j].transpose();
  const auto v = synth::render_stick_figure(MotionSequence(f, 15, 20.0));
  ASSERT_EQ(v.frame_count(), 6);
  for (int t = 1; t < 6; ++t) EXPECT_TRUE(std::ranges::equal(v.frame(0), v.frame(t)));
  for (std::uint8_t p : v.pixels()) EXPECT_TRUE(p == 0 || p == 255);
}

TEST(Render, EveryFrameHasLitPixels) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = synth::synth_motion(random_script(rng), 15, 20.0, trial);
    const auto v = synth::render_stick_figure(m, 24, 40, 3);
    for (int t = 0; t < v.frame_count(); ++t) {
      const auto f = v.frame(t);
      EXPECT_GT(std::count_if(f.begin(), f.end(), [](auto p) { return p != 0; }), 0);
    }
  }
  // Two-joint chain far outside the image is clamped, still lit.
  Mat far(1, 6);
  far << 100, 100, 100, -100, -100, -100;
  const auto v = synth::render_stick_figure(MotionSequence(far, 2, 20.0));
  EXPECT_GT(std::count(v.pixels().begin(), v.pixels().end(), 255), 0);
}

TEST(Render, RaisedArmMovesTopRowUp) {
  const auto m = synth::synth_motion(one({Kind::raise_arm, Side::right, Direction::none, 20}), 15, 20.0, 3);
  const auto v = synth::render_stick_figure(m);
  EXPECT_LT(top_row(v, 19), top_row(v, 0));
}

TEST(Captions, NameEveryPrimitiveInOrder) {
  const auto recs = build_caption_dataset(200, 11);
  ASSERT_EQ(recs.size(), 200u);
  int motion = 0;
  for (const auto& r : recs) {
    EXPECT_EQ(r.category, Category::caption);
    motion += r.modality == Modality::motion;
    EXPECT_EQ(r.response, oracle::answer(synth::to_json(r.script), r.instruction, r.options)) << r.id;
    // Parse the caption back into clauses and compare with the script.
    auto text = r.response.substr(std::string("the person ").size());
    std::vector<std::string> clauses;
    for (std::size_t at; (at = text.find(" then ")) != std::string::npos; text = text.substr(at + 6))
      clauses.push_back(text.substr(0, at));
    clauses.push_back(text);
    ASSERT_EQ(clauses.size(), r.script.primitives.size());
    for (std::size_t i = 0; i < clauses.size(); ++i)
      EXPECT_EQ(clauses[i], oracle::clause(oracle::prims(synth::to_json(r.script))[i]));
  }
  EXPECT_EQ(motion, 100);
}

TEST(Captions, PairSharesResponseText) {
  const auto recs = build_caption_dataset(2, 3);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].modality, Modality::motion);
  EXPECT_EQ(recs[1].modality, Modality::video);
  EXPECT_EQ(recs[0].response, recs[1].response);
  EXPECT_EQ(caption(CompositeScript{{{Kind::raise_arm, Side::left, Direction::none, 20},
                                     {Kind::squat, Side::none, Direction::none, 20}}}),
            "the person raises the left arm then squats");
}

TEST(Questions, SquatThenJumpFirstIsSquat) {
  const CompositeScript s{{{Kind::squat, Side::none, Direction::none, 20}, {Kind::jump, Side::none, Direction::none, 20}}};
  bool seen = false;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto qa = sequentiality_qa(s, rng);
    if (qa.instruction == "what did the person do first ?") {
      EXPECT_EQ(qa.response, "squat");
      seen = true;
    }
  }
  EXPECT_TRUE(seen);
}

TEST(Questions, HallucinationAnswersNegation) {
  const CompositeScript s{{{Kind::wave, Side::left, Direction::none, 20}}};
  std::set<std::string> asked;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto qa = hallucination_qa(s, rng);
    EXPECT_EQ(qa.response, kNegation);
    asked.insert(qa.instruction);
  }
  EXPECT_TRUE(asked.count("did the person kick ?"));
  EXPECT_FALSE(asked.count("did the person wave ?"));
}

TEST(Questions, MultipleChoicePromptLayout) {
  Rng rng(2);
  const CompositeScript s{{{Kind::jump, Side::none, Direction::none, 20}}};
  const auto qa = reasoning_qa(s, rng);
  ASSERT_EQ(qa.options.size(), 4u);
  EXPECT_EQ(qa.options[static_cast<std::size_t>(qa.response[0] - 'A')], "celebrating a win");
  const auto text = format_multiple_choice(qa.instruction, qa.options);
  EXPECT_NE(text.find("(A) " + qa.options[0]), std::string::npos);
  EXPECT_EQ(text.substr(text.size() - 13), "Best option:(");
}

TEST(InstructionDataset, HistogramCoversAllSixCategories) {
  const auto recs = build_instruction_dataset(600, 21);
  ASSERT_EQ(recs.size(), 600u);
  std::map<Category, int> hist;
  int in_context = 0;
  for (const auto& r : recs) {
    ++hist[r.category];
    in_context += r.instruction.rfind(kInContextLead, 0) == 0;
  }
  EXPECT_EQ(hist.size(), 6u);
  for (auto c : kQaCategories) EXPECT_GE(hist[c], 50) << to_string(c);
  EXPECT_GT(in_context, 30);
  EXPECT_LT(in_context, 150);
  EXPECT_THROW(build_instruction_dataset(5, 1), ContractError);
}

TEST(InstructionDataset, OracleRecomputesEveryAnswer) {
  for (auto recs : {build_instruction_dataset(800, 5), build_bench_dataset(400, 6)})
    for (const auto& r : recs)
      EXPECT_EQ(oracle::answer(synth::to_json(r.script), r.instruction, r.options), r.response) << r.id;
}

TEST(InstructionDataset, DeterministicAndPaired) {
  const auto a = build_instruction_dataset(60, 8), b = build_instruction_dataset(60, 8);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(to_json(a[i]), to_json(b[i]));
    EXPECT_EQ(*a[i].motion, *b[i].motion);
  }
  for (std::size_t i = 0; i + 1 < a.size(); i += 2) {
    EXPECT_EQ(a[i].motion, a[i + 1].motion);  // same clip behind both modalities
    EXPECT_EQ(*a[i + 1].video, synth::render_stick_figure(*a[i].motion));
  }
}

TEST(BenchDataset, RoundRobinsFiveCategories) {
  std::map<Category, int> hist;
  for (const auto& r : build_bench_dataset(100, 2)) ++hist[r.category];
  EXPECT_EQ(hist.size(), 5u);
  for (auto c : kBenchCategories) EXPECT_EQ(hist[c], 20);
}

TEST(DatasetFile, EmptyRoundTrips) {
  const auto dir = scratch("empty");
  write_dataset(dir / "d.jsonl", std::vector<DatasetRecord>{});
  EXPECT_EQ(fs::file_size(dir / "d.jsonl"), 0u);
  EXPECT_TRUE(read_dataset(dir / "d.jsonl").empty());
  fs::remove_all(dir);
}

TEST(DatasetFile, HundredRecordsRoundTripFieldForField) {
  const auto dir = scratch("rt");
  const auto recs = build_instruction_dataset(100, 12);
  write_dataset(dir / "d.jsonl", recs);
  const auto back = read_dataset(dir / "d.jsonl");
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(to_json(back[i]), to_json(recs[i]));
    EXPECT_EQ(back[i].options, recs[i].options);
    EXPECT_EQ(*back[i].motion, *recs[i].motion);
    EXPECT_EQ(*back[i].video, *recs[i].video);
  }
  fs::remove_all(dir);
}

TEST(DatasetFile, VideoRecordWithoutVideoPayloadIsResolutionError) {
  const auto dir = scratch("res");
  auto recs = build_caption_dataset(2, 1);
  recs[1].video.reset();
  recs[0].video.reset();
  write_dataset(dir / "d.jsonl", recs);
  EXPECT_THROW(read_dataset(dir / "d.jsonl"), ResolutionError);
  EXPECT_THROW(read_dataset(dir / "missing.jsonl"), ResolutionError);
  fs::remove_all(dir);
}

TEST(DatasetFile, MalformedLineReportsLineNumber) {
  const auto dir = scratch("parse");
  write_dataset(dir / "d.jsonl", build_caption_dataset(2, 1));
  {
    std::ofstream out(dir / "d.jsonl", std::ios::app);
    out << "{\"id\": \"broken\"\n";
  }
  try {
    read_dataset(dir / "d.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  fs::remove_all(dir);
}

TEST(Pretraining, LabelsTrackActivePrimitive) {
  const auto recs = build_caption_dataset(20, 4);
  const encoders::EncoderConfig enc;
  for (const auto& r : recs) {
    const auto labels = visual_labels(r, enc);
    EXPECT_EQ(labels.front(), label_token(r.script.primitives.front()));
    EXPECT_EQ(labels.back(), label_token(r.script.primitives.back()));
  }
  const auto vocab = corpus_vocabulary();
  for (const auto& r : build_instruction_dataset(60, 4)) EXPECT_NO_THROW(text_sample(r, enc, vocab));
}

}  // namespace
}  // namespace vimonet::data

#pragma once

// `vimonet` command line: datagen, train, generate, bench.
// Exit codes: 0 ok, 1 usage/config, 2 I/O, 3 missing checkpoint,
// 4 non-finite loss, 5 judge unavailable or missing credentials.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vimonet/bench_http.hpp"
#include "vimonet/checkpoint.hpp"
#include "vimonet/config.hpp"
#include "vimonet/data.hpp"

namespace vimonet::cli {

namespace fs = std::filesystem;

enum Exit : int { kOk = 0, kUsage = 1, kIo = 2, kMissingCheckpoint = 3, kNonFinite = 4, kJudge = 5 };

struct MissingCheckpoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct LoadedConfig {
  config::RunConfig cfg = config::RunConfig::defaults();
  fs::path base = ".";  // relative paths in the config resolve against this
};

inline LoadedConfig load_config(const std::string& path) {
  LoadedConfig lc;
  if (path.empty()) return lc;
  lc.cfg = config::load(path);
  lc.base = fs::path(path).has_parent_path() ? fs::path(path).parent_path() : fs::path(".");
  return lc;
}

inline std::string file_digest(const fs::path& p) {
  auto bytes = io::read_file(p);
  auto d = Sha256().update(bytes.data(), bytes.size()).finish();
  return to_hex(d);
}

// Digest over every payload file, in name order.
inline std::string tree_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::exists(dir))
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& f : files) {
    h.update(fs::relative(f, dir).generic_string());
    h.update(file_digest(f));
  }
  auto d = h.finish();
  return to_hex(d);
}

// ---------------------------------------------------------------------------
// datagen

struct DatagenArgs {
  std::string config;
  int captions = 2000;
  int instructions = 2000;
  int bench = 600;
  std::optional<std::uint64_t> seed;
  std::string out = "data";
};

inline int cmd_datagen(const DatagenArgs& a, Streams s) {
  const auto lc = load_config(a.config);
  const auto seed = a.seed.value_or(lc.cfg.seed);
  if (a.captions < 0 || a.instructions < 0 || a.bench < 0) throw ContractError("record counts must be >= 0");
  if (a.instructions > 0 && a.instructions < 6) throw ContractError("--instructions must be 0 or >= 6");
  const fs::path out(a.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory " + out.string());

  struct Part {
    std::string file;
    int n;
    std::vector<data::DatasetRecord> (*build)(int, std::uint64_t, const data::GenOptions&);
    std::uint64_t salt;
  };
  const std::vector<Part> parts = {
      {"captions.jsonl", a.captions, &data::build_caption_dataset, 1},
      {"instructions.jsonl", a.instructions, &data::build_instruction_dataset, 2},
      {"bench.jsonl", a.bench, &data::build_bench_dataset, 3},
  };
  nlohmann::json manifest = {{"seed", seed}};
  for (const auto& p : parts) {
    if (p.n == 0) s.err << "warning: " << p.file << " has no records\n";
    const auto records = p.n > 0 ? p.build(p.n, mix_seed(seed, p.salt), {}) : std::vector<data::DatasetRecord>{};
    data::write_dataset(out / p.file, records);
    manifest["counts"][p.file.substr(0, p.file.find('.'))] = records.size();
    manifest["digests"][p.file] = file_digest(out / p.file);
  }
  manifest["digests"]["payloads"] = tree_digest(out / "payloads");
  const auto text = manifest.dump(2) + "\n";
  io::write_file(out / "manifest.json", std::vector<std::uint8_t>(text.begin(), text.end()));
  s.out << manifest.dump() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  int stage = 1;
  std::string from;    // previous-stage checkpoint
  std::string resume;  // same-stage checkpoint to continue
  std::string out;
  std::optional<int> steps;
  int save_every = 0;
};

inline std::string stage_name(int stage) { return "stage" + std::to_string(stage); }

inline training::RunState load_prerequisite(const std::string& path, int want_stage) {
  if (path.empty() || !fs::exists(path))
    throw MissingCheckpoint("stage " + std::to_string(want_stage + 1) + " needs a stage-" +
                            std::to_string(want_stage) + " checkpoint" + (path.empty() ? "" : ": " + path + " not found"));
  auto st = checkpoint::load_checkpoint(path);
  if (st.stage != want_stage)
    throw MissingCheckpoint(path + " is a stage-" + std::to_string(st.stage) + " checkpoint, expected stage " +
                            std::to_string(want_stage));
  return st;
}

inline std::string log_line(const training::LogEntry& e) {
  std::string out = std::to_string(e.step) + " " + bench::fixed(e.loss, 6);
  for (const auto& [g, lr] : e.lrs) out += " " + g + "=" + training::format_lr(lr);
  return out + "\n";
}

inline int cmd_train(const TrainArgs& a, Streams s) {
  if (a.stage < 0 || a.stage > 2) throw ContractError("--stage must be 0, 1 or 2");
  if (a.stage == 2 && a.resume.empty() && (a.from.empty() || !fs::exists(a.from)))
    throw MissingCheckpoint("stage 2 needs a stage-1 checkpoint (--from)" + (a.from.empty() ? "" : ": " + a.from + " not found"));
  const auto lc = load_config(a.config);
  const auto& cfg = lc.cfg;
  auto sc = cfg.stage_config(a.stage);
  if (a.steps) sc.steps = *a.steps;
  sc.validate();
  const fs::path out = a.out.empty() ? fs::path(cfg.output_dir) : fs::path(a.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory " + out.string());

  // Datasets first, so that a bad path fails before any work.
  std::vector<data::DatasetRecord> records;
  if (a.stage == 0) {
    config::require_paths(cfg, lc.base, {"captions", "instructions"});
    records = data::read_dataset(config::resolve(lc.base, cfg.data.captions));
    auto more = data::read_dataset(config::resolve(lc.base, cfg.data.instructions));
    records.insert(records.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  } else {
    const auto key = a.stage == 1 ? "captions" : "instructions";
    config::require_paths(cfg, lc.base, {key});
    records = data::read_dataset(config::resolve(lc.base, a.stage == 1 ? cfg.data.captions : cfg.data.instructions));
  }
  if (records.empty()) throw ContractError("training dataset is empty");

  training::RunState st;
  if (!a.resume.empty()) {
    if (!fs::exists(a.resume)) throw MissingCheckpoint("resume checkpoint not found: " + a.resume);
    st = checkpoint::load_checkpoint(a.resume);
    if (st.stage != a.stage) throw ContractError("--resume checkpoint is for stage " + std::to_string(st.stage));
  } else if (a.stage == 0) {
    st = {0, Model::create(data::corpus_vocabulary(), cfg.shape(), cfg.seed), {}, {}};
  } else if (a.stage == 1) {
    Model base = a.from.empty() ? Model::create(data::corpus_vocabulary(), cfg.shape(), cfg.seed)
                                : load_prerequisite(a.from, 0).model;
    if (a.from.empty()) s.err << "warning: stage 1 without --from starts from an untrained base LM\n";
    st = training::start_stage1(std::move(base));
  } else {
    const auto prev = load_prerequisite(a.from, 1);
    st = training::start_stage2(&prev, sc);
  }
  st.config_json = config::to_json(cfg).dump();

  std::vector<EncodedSample> samples =
      a.stage == 0 ? data::pretraining_corpus(records, st.model.encoder, st.model.vocab)
                   : data::encode_records(records, st.model);

  const auto ckpt = out / (stage_name(a.stage) + ".vmck");
  const auto log_path = out / (stage_name(a.stage) + ".log");
  const bool append = !a.resume.empty() && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path.string());
  if (!append) {
    log << "# stage " << a.stage << " seed " << cfg.seed << " steps " << sc.steps << " batch_size " << sc.batch_size
        << "\n# lr";
    for (const auto& g : training::resolve_groups(sc, st.model))
      if (g.trainable) log << " " << g.name << "=" << training::format_lr(g.lr);
    log << "\n# step loss lr...\n";
  }

  training::StageConfig chunk = sc;
  while (true) {
    if (a.save_every > 0) chunk.steps = static_cast<int>(std::min<long long>(sc.steps, st.opt.step + a.save_every));
    training::run_stage(st, samples, chunk, [&](const training::LogEntry& e) { log << log_line(e) << std::flush; });
    checkpoint::save_checkpoint(ckpt, st);
    if (st.opt.step >= sc.steps) break;
  }
  s.out << "wrote " << ckpt.string() << " (step " << st.opt.step << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string config;
  std::string ckpt;
  std::string motion;
  std::string video;
  std::string instruction;
  double fps = synth::kDefaultFps;
  int max_new = bench::kMaxNewTokens;
  bool verbose = false;
};

inline int cmd_generate(const GenerateArgs& a, Streams s) {
  if (a.motion.empty() == a.video.empty()) {
    s.err << "error: pass exactly one of --motion or --video\n";
    return kUsage;
  }
  if (!a.config.empty()) load_config(a.config);  // validated for consistency with other commands
  if (!fs::exists(a.ckpt)) throw MissingCheckpoint("checkpoint not found: " + a.ckpt);
  const auto st = checkpoint::load_checkpoint(a.ckpt);
  const auto& model = st.model;
  Payload payload;
  Modality modality;
  if (!a.motion.empty()) {
    modality = Modality::motion;
    auto m = io::motion_from_tensor(io::read_tensor(a.motion), a.fps);
    if (a.verbose) s.err << "motion: " << m.frame_count() << " frames, " << m.joint_count() << " joints\n";
    payload = std::make_shared<const MotionSequence>(std::move(m));
  } else {
    modality = Modality::video;
    auto v = io::video_from_tensor(io::read_tensor(a.video));
    if (a.verbose) {
      const auto idx = encoders::keyframe_indices(v.frame_count(), model.encoder.video_frames);
      s.err << "video: " << v.frame_count() << " frames -> " << idx.size() << " keyframes [";
      for (std::size_t i = 0; i < idx.size(); ++i) s.err << (i ? "," : "") << idx[i];
      s.err << "]\n";
    }
    payload = std::make_shared<const VideoClip>(std::move(v));
  }
  auto prompt = build_prompt(a.instruction, modality, payload, model.vocab);
  EncodedSample sample{"cli", modality, model.encode(payload), prompt.instruction_tokens.ids, {}, Category::caption};
  if (a.verbose) s.err << "encoder tokens: " << sample.features.rows() << " x " << sample.features.cols() << "\n";
  auto g = generate_for(model, sample, a.max_new);
  TokenSequence text;
  for (auto t : g.tokens.ids)
    if (t != model.vocab.specials().eos) text.ids.push_back(t);
  s.out << detokenize(text, model.vocab) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string config;
  std::string ckpt;
  std::string items;
  std::string judge = "overlap";
  std::string out;
};

inline int cmd_bench(const BenchArgs& a, Streams s) {
  const auto lc = load_config(a.config);
  const auto& cfg = lc.cfg;
  std::unique_ptr<bench::JudgeClient> client;
  if (a.judge == "external") {
    const char* key = std::getenv(cfg.judge.credential_env.c_str());
    if (!key || !*key) {
      s.err << "error: external judge needs credentials in $" << cfg.judge.credential_env << "\n";
      return kJudge;
    }
    client = std::make_unique<bench::HttpJudgeClient>(cfg.judge.url, key, cfg.judge.timeout_seconds);
  } else if (a.judge != "overlap") {
    s.err << "error: --judge must be overlap or external\n";
    return kUsage;
  }
  if (!fs::exists(a.ckpt)) throw MissingCheckpoint("checkpoint not found: " + a.ckpt);
  const auto items_path = a.items.empty() ? config::resolve(lc.base, cfg.data.bench) : fs::path(a.items);
  if (items_path.empty() || !fs::exists(items_path))
    throw ResolutionError("bench items not found: " + items_path.string());
  const auto records = data::read_dataset(items_path);
  const auto items = bench::items_from_records(records);
  const auto st = checkpoint::load_checkpoint(a.ckpt);
  const auto rep = bench::run_bench(st.model, items, bench::Judge{client.get()});

  const fs::path out = a.out.empty() ? fs::path(cfg.output_dir) : fs::path(a.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory " + out.string());
  const auto table = bench::format_report(rep);
  auto summary = bench::report_json(rep);
  summary["seed"] = cfg.seed;
  summary["judge"] = a.judge;
  const auto js = bench::report_json(rep, true).dump(2) + "\n";
  io::write_file(out / "bench_report.txt", std::vector<std::uint8_t>(table.begin(), table.end()));
  io::write_file(out / "bench_report.json", std::vector<std::uint8_t>(js.begin(), js.end()));
  for (const auto& w : rep.warnings) s.err << "warning: " << w << "\n";
  s.out << table << summary.dump() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Streams s{out, err};
  CLI::App app{"Motion and video to language: data generation, training, inference and benchmarking"};
  app.require_subcommand(1);

  DatagenArgs dg;
  auto* datagen = app.add_subcommand("datagen", "Write caption, instruction and bench datasets");
  datagen->add_option("--config", dg.config, "Run config (JSON)");
  datagen->add_option("--captions", dg.captions, "Caption records")->capture_default_str();
  datagen->add_option("--instructions", dg.instructions, "Instruction records")->capture_default_str();
  datagen->add_option("--bench", dg.bench, "Bench records")->capture_default_str();
  datagen->add_option("--seed", dg.seed, "Seed (defaults to the config seed)");
  datagen->add_option("--out", dg.out, "Output directory")->capture_default_str();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Run one training stage (0 pretrain, 1 align, 2 instruct)");
  train->add_option("--config", tr.config, "Run config (JSON)")->required();
  train->add_option("--stage", tr.stage, "Stage")->required()->check(CLI::Range(0, 2));
  train->add_option("--from", tr.from, "Previous-stage checkpoint");
  train->add_option("--resume", tr.resume, "Continue from a checkpoint of this stage");
  train->add_option("--out", tr.out, "Output directory (defaults to the config output_dir)");
  train->add_option("--steps", tr.steps, "Override the stage's total step count");
  train->add_option("--save-every", tr.save_every, "Checkpoint every N steps");

  GenerateArgs ge;
  auto* generate = app.add_subcommand("generate", "Greedy answer for one motion or video input");
  generate->add_option("--config", ge.config, "Run config (JSON)");
  generate->add_option("--ckpt", ge.ckpt, "Checkpoint")->required();
  generate->add_option("--motion", ge.motion, "Motion tensor file (F, J, 3)");
  generate->add_option("--video", ge.video, "Video tensor file (T, H, W, C)");
  generate->add_option("--instruction", ge.instruction, "Instruction text")->required();
  generate->add_option("--fps", ge.fps, "Motion frame rate")->capture_default_str();
  generate->add_option("--max-new", ge.max_new, "Maximum generated tokens")->capture_default_str();
  generate->add_flag("--verbose,-v", ge.verbose, "Trace encoder inputs on stderr");

  BenchArgs be;
  auto* benchc = app.add_subcommand("bench", "Score a checkpoint on bench items");
  benchc->add_option("--config", be.config, "Run config (JSON)");
  benchc->add_option("--ckpt", be.ckpt, "Checkpoint")->required();
  benchc->add_option("--items", be.items, "Bench items file (defaults to the config data.bench)");
  benchc->add_option("--judge", be.judge, "overlap or external")->capture_default_str();
  benchc->add_option("--out", be.out, "Report directory (defaults to the config output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (datagen->parsed()) return cmd_datagen(dg, s);
    if (train->parsed()) return cmd_train(tr, s);
    if (generate->parsed()) return cmd_generate(ge, s);
    if (benchc->parsed()) return cmd_bench(be, s);
  } catch (const MissingCheckpoint& e) {
    err << "error: " << e.what() << "\n";
    return kMissingCheckpoint;
  } catch (const NumericFault& e) {
    err << "error: " << e.what() << "\n";
    return kNonFinite;
  } catch (const JudgeUnavailable& e) {
    err << "error: " << e.what() << "\n";
    return kJudge;
  } catch (const ConfigError& e) {
    err << "config error at " << e.what() << "\n";
    return kUsage;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    // I/O, missing files, corrupt payloads or checkpoints, parse errors.
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

}  // namespace vimonet::cli

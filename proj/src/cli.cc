// Copyright 2026 The HR-Align Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hralign/cli.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "hralign/ablation.h"
#include "hralign/checkpoint.h"
#include "hralign/dataset.h"
#include "hralign/encoder.h"
#include "hralign/errors.h"
#include "hralign/eval.h"
#include "hralign/tensor_io.h"
#include "hralign/trainer.h"

namespace hralign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Data streams derived from the run seed.
constexpr uint64_t kTrainDataStream = 10;
constexpr uint64_t kHeldoutDataStream = 11;
constexpr uint64_t kPretrainStream = 12;
constexpr int kHeldoutFirstPairId = 100000;

// Failures the user can fix by changing the command line or config.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  if (key == "output_dir") output_dir_set = true;
  if (train.set(key, value)) return;
  if (key == "n_tasks") n_tasks = parse_uint(key, value);
  else if (key == "pairs_per_task") pairs_per_task = parse_uint(key, value);
  else if (key == "heldout_pairs_per_task") heldout_pairs_per_task = parse_uint(key, value);
  else if (key == "gap") gap = parse_double(key, value);
  else if (key == "pretrain_epochs") pretrain_epochs = parse_uint(key, value);
  else if (key == "pretrain_learning_rate") pretrain_learning_rate = parse_double(key, value);
  else if (key == "data") data = std::string(value);
  else if (key == "heldout") heldout = std::string(value);
  else if (key == "backbone") backbone = std::string(value);
  else if (key == "checkpoint") checkpoint = std::string(value);
  else throw ArgumentError("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::to_text() const {
  std::string out = train.to_text();
  out += "n_tasks = " + std::to_string(n_tasks) + "\n";
  out += "pairs_per_task = " + std::to_string(pairs_per_task) + "\n";
  out += "heldout_pairs_per_task = " + std::to_string(heldout_pairs_per_task) + "\n";
  out += "gap = " + fmt_double(gap) + "\n";
  out += "pretrain_epochs = " + std::to_string(pretrain_epochs) + "\n";
  out += "pretrain_learning_rate = " + fmt_double(pretrain_learning_rate) + "\n";
  out += "data = " + data + "\n";
  out += "heldout = " + heldout + "\n";
  out += "backbone = " + backbone + "\n";
  out += "checkpoint = " + checkpoint + "\n";
  return out;
}

namespace {

struct Context {
  RunConfig cfg;
  fs::path out_dir;
  std::vector<fs::path> artifacts;
  std::ostream* out = nullptr;

  void write(const std::string& name, std::string_view bytes) {
    const fs::path p = out_dir / name;
    write_file_atomic(p, bytes);
    artifacts.push_back(p);
  }
  void record(const fs::path& p) { artifacts.push_back(p); }
};

void finish(Context& ctx, const std::string& command) {
  ctx.write("resolved_config.txt", ctx.cfg.to_text());
  json files = json::array();
  for (const auto& p : ctx.artifacts) {
    files.push_back({{"path", p.lexically_relative(ctx.out_dir).string()},
                     {"bytes", fs::file_size(p)},
                     {"sha256", sha256_hex(read_file_bytes(p))}});
  }
  const json manifest = {{"command", command}, {"output_dir", ctx.out_dir.string()}, {"files", files}};
  write_file_atomic(ctx.out_dir / "artifacts.json", manifest.dump(1) + "\n");
  *ctx.out << "wrote " << ctx.artifacts.size() + 1 << " files to " << ctx.out_dir.string() << "\n";
}

std::string metrics_note(const TrainConfig& c) {
  return "# desk-scale run: batch_size " + std::to_string(c.batch_size) + ", steps " + std::to_string(c.steps) +
         " (reference scale: batch 200, 8000 steps)\n";
}

void cmd_generate(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const RngState root(c.train.seed);
  RngState train_rng = root.fork(kTrainDataStream);
  RngState held_rng = root.fork(kHeldoutDataStream);
  const auto train = generate_paired_set(train_rng, static_cast<int>(c.n_tasks), static_cast<int>(c.pairs_per_task),
                                         c.gap);
  const auto held = generate_paired_set(held_rng, static_cast<int>(c.n_tasks),
                                        static_cast<int>(c.heldout_pairs_per_task), c.gap, kHeldoutFirstPairId);
  for (const auto& [name, set] : {std::pair{"train", &train}, std::pair{"heldout", &held}}) {
    const fs::path manifest = ctx.out_dir / name / "manifest.json";
    save_manifest(*set, manifest);
    ctx.record(manifest);
  }
  ctx.write("pixel_gap.txt", "mean_pair_pixel_difference = " + fmt_double(mean_pair_pixel_difference(train)) + "\n");
}

void cmd_pretrain(Context& ctx) {
  const auto data = load_manifest(ctx.cfg.data);
  const auto clips = human_clips(data);
  RngState rng = RngState(ctx.cfg.train.seed).fork(kPretrainStream);
  PretextOptions opts;
  opts.learning_rate = ctx.cfg.pretrain_learning_rate;
  const PretrainResult r = pretext_pretrain(rng, clips, static_cast<int>(ctx.cfg.pretrain_epochs), opts);
  const fs::path path = ctx.out_dir / "backbone.ckpt";
  save_backbone(r.backbone, path);
  ctx.record(path);
  std::string csv = "epoch,loss\n";
  for (size_t i = 0; i < r.epoch_losses.size(); ++i) csv += std::to_string(i + 1) + "," + fmt_double(r.epoch_losses[i]) + "\n";
  ctx.write("pretrain_losses.csv", csv);
}

void write_training(Context& ctx, const TrainResult& r, const MetricsLog* prior) {
  const fs::path path = ctx.out_dir / "model.ckpt";
  save_checkpoint(r.checkpoint, path);
  ctx.record(path);
  MetricsLog log;
  if (prior) log = *prior;
  log.append(r.metrics);
  ctx.write("metrics.csv", log.to_csv());
  ctx.write("run_notes.txt", metrics_note(ctx.cfg.train));
  const ModelCheckpoint& ck = r.checkpoint;
  json summary = {{"method", method_name(ck.config.method)},
                  {"steps", ck.step},
                  {"learned_params", ck.learned_parameter_count()},
                  {"head_params", ck.head_parameter_count()},
                  {"backbone_params", ck.backbone.parameter_count()}};
  if (!log.records.empty()) {
    summary["initial_loss"] = log.records.front().loss;
    summary["final_loss"] = log.records.back().loss;
  }
  if (ck.config.method == Method::kClsBaseline) summary["final_train_accuracy"] = r.final_accuracy;
  ctx.write("summary.json", summary.dump(1) + "\n");
}

void cmd_train(Context& ctx, const std::string& resume_path) {
  const auto data = load_manifest(ctx.cfg.data);
  const Backbone backbone = load_backbone(ctx.cfg.backbone);
  std::optional<ModelCheckpoint> resume;
  std::optional<MetricsLog> prior;
  if (!resume_path.empty()) {
    resume = load_checkpoint(resume_path);
    const fs::path prior_csv = fs::path(resume_path).parent_path() / "metrics.csv";
    if (fs::exists(prior_csv)) prior = MetricsLog::from_csv(read_file_bytes(prior_csv));
  }
  const TrainResult r = train(ctx.cfg.train, data, backbone, resume ? &*resume : nullptr);
  write_training(ctx, r, prior ? &*prior : nullptr);
}

void cmd_ablate(Context& ctx) {
  const auto data = load_manifest(ctx.cfg.data);
  const auto held = load_manifest(ctx.cfg.heldout);
  const Backbone backbone = load_backbone(ctx.cfg.backbone);
  auto hook = [&ctx](const AblationRow& row, const TrainResult& r) {
    const fs::path dir = ctx.out_dir / row.variant.name;
    save_checkpoint(r.checkpoint, dir / "model.ckpt");
    ctx.record(dir / "model.ckpt");
    write_file_atomic(dir / "metrics.csv", r.metrics.to_csv());
    ctx.record(dir / "metrics.csv");
    *ctx.out << row.variant.name << ": done\n";
  };
  const auto rows = run_ablation_grid(ctx.cfg.train, data, held, backbone, {}, hook);
  ctx.write("ablation.tsv", ablation_table(rows));
  ctx.write("ablation.json", ablation_json(rows).dump(1) + "\n");
  *ctx.out << ablation_table(rows);
}

void cmd_eval(Context& ctx) {
  const fs::path ckpt_path = ctx.cfg.checkpoint;
  const ModelCheckpoint ckpt = load_checkpoint(ckpt_path);
  const auto held = load_manifest(ctx.cfg.heldout);
  json report = json::object();
  std::string text;
  std::vector<EvalModel> models{adapted_model(ckpt)};
  if (ckpt.config.method == Method::kHrAlign) models.push_back(frozen_model(ckpt));
  for (const EvalModel& m : models) {
    const RetrievalReport r = eval_retrieval(m, held);
    const DownstreamReport d = eval_downstream(m, held);
    report[m.tag] = {{"retrieval", r.to_json()}, {"downstream", d.to_json()}};
    text += r.to_text() + d.to_text();
  }
  report["checkpoint"] = ckpt_path.string();
  ctx.write("report.json", report.dump(1) + "\n");
  ctx.write("report.txt", text);
  *ctx.out << text;
}

void cmd_dump(Context& ctx, bool frozen) {
  const ModelCheckpoint ckpt = load_checkpoint(ctx.cfg.checkpoint);
  const auto held = load_manifest(ctx.cfg.heldout);
  const EvalModel m = frozen ? frozen_model(ckpt) : adapted_model(ckpt);
  const fs::path path = ctx.out_dir / "embeddings.csv";
  dump_embeddings(m, held, path);
  ctx.record(path);
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hralign: human-robot alignment lab"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key = value config file");
    sub->add_option("-s,--set", overrides, "override a config key, key=value")->allow_extra_args(false);
    sub->add_option_function<std::string>(
        "-o,--out", [&overrides](const std::string& v) { overrides.push_back("output_dir=" + v); },
        "output directory");
  };
  CLI::App* gen = app.add_subcommand("generate", "generate paired train and held-out sets");
  CLI::App* pre = app.add_subcommand("pretrain", "pretext pre-training of the backbone on human clips");
  CLI::App* adapt = app.add_subcommand("adapt", "HR-Align adaptation");
  CLI::App* base = app.add_subcommand("baseline", "full fine-tune baseline");
  CLI::App* abl = app.add_subcommand("ablate", "adapter position and language ablation grid");
  CLI::App* ev = app.add_subcommand("eval", "retrieval and downstream evaluation");
  CLI::App* dump = app.add_subcommand("dump", "write pooled embeddings as CSV");
  for (CLI::App* s : {gen, pre, adapt, base, abl, ev, dump}) add_common(s);
  std::string resume;
  adapt->add_option("--resume", resume, "continue from a checkpoint");
  std::string kind;
  base->add_option("kind", kind, "pret or cls")->required()->check(CLI::IsMember({"pret", "cls"}));
  base->add_option("--resume", resume, "continue from a checkpoint");
  bool frozen = false;
  dump->add_flag("--frozen", frozen, "bypass adapters");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  Context ctx;
  ctx.out = &out;
  try {
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path);
      for (const auto& [k, v] : load_key_values(config_path)) ctx.cfg.set(k, v);
    }
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + o + "'");
      ctx.cfg.set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (command == "adapt") ctx.cfg.train.method = Method::kHrAlign;
    if (command == "baseline") ctx.cfg.train.method = kind == "pret" ? Method::kPretBaseline : Method::kClsBaseline;
    if (!ctx.cfg.output_dir_set) {
      ctx.cfg.train.output_dir = command == "generate" ? "runs/data"
                                 : command == "baseline" ? "runs/baseline_" + kind
                                                         : "runs/" + command;
    }
    ctx.cfg.train.validate();
    if (!(ctx.cfg.gap >= 0.0 && ctx.cfg.gap <= 1.0)) throw ArgumentError("gap must lie in [0, 1]");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    ctx.out_dir = ctx.cfg.train.output_dir;
    fs::create_directories(ctx.out_dir);
    if (command == "generate") cmd_generate(ctx);
    else if (command == "pretrain") cmd_pretrain(ctx);
    else if (command == "adapt" || command == "baseline") cmd_train(ctx, resume);
    else if (command == "ablate") cmd_ablate(ctx);
    else if (command == "eval") cmd_eval(ctx);
    else if (command == "dump") cmd_dump(ctx, frozen);
    finish(ctx, command);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace hralign

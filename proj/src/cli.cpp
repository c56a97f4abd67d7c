// Copyright 2026  sasv-backend authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "sasv/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "sasv/data_io.hpp"
#include "sasv/error.hpp"
#include "sasv/evaluator.hpp"
#include "sasv/gradcheck.hpp"
#include "sasv/model.hpp"
#include "sasv/sampler.hpp"
#include "sasv/scoring.hpp"
#include "sasv/synth.hpp"
#include "sasv/text.hpp"
#include "sasv/trainer.hpp"

namespace sasv {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const IoError*>(&error) ||
      dynamic_cast<const CheckpointError*>(&error)) {
    return kExitIo;
  }
  if (dynamic_cast<const PoolExhaustedError*>(&error) ||
      dynamic_cast<const NonFiniteError*>(&error) ||
      dynamic_cast<const DegenerateEnrollmentError*>(&error)) {
    return kExitTraining;
  }
  if (dynamic_cast<const UnresolvedIdError*>(&error)) return kExitResolution;
  if (dynamic_cast<const ParseError*>(&error) ||
      dynamic_cast<const EmptyClassError*>(&error) ||
      dynamic_cast<const ShapeError*>(&error)) {
    return kExitProtocol;
  }
  return kExitUsage;
}

namespace {

class GradcheckFailed : public Error {
 public:
  using Error::Error;
};

/// Applies a key=value file to the options of `sub` that were not given on
/// the command line. Keys are long option names; '_' and '-' are
/// interchangeable. Blank lines and lines starting with '#' are skipped.
void apply_config_file(CLI::App& sub, const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(path + ":" + std::to_string(i + 1) +
                        ": expected key=value");
    }
    auto trim = [](std::string_view s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string_view::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return std::string(s.substr(b, e - b + 1));
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    for (char& c : key) {
      if (c == '_') c = '-';
    }
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw ConfigError(path + ":" + std::to_string(i + 1) +
                        ": unknown key '" + key + "' for '" + sub.get_name() +
                        "'");
    }
    if (opt->count() > 0) continue;  // command-line flag wins
    opt->add_result(value);
    opt->run_callback();
  }
}

struct DataPaths {
  std::string data_dir;
  std::string manifest;
  std::string asv;
  std::string cm;
  std::string trials;

  void add_embedding_options(CLI::App* sub) {
    sub->add_option("--data", data_dir,
                    "Directory written by 'synth'; supplies default paths");
    sub->add_option("--asv-embeddings", asv, "Speaker embedding file");
    sub->add_option("--cm-embeddings", cm, "CM embedding file");
  }
  std::string resolve(const std::string& given, const char* file,
                      const char* what) const {
    if (!given.empty()) return given;
    if (!data_dir.empty()) return (fs::path(data_dir) / file).string();
    throw ConfigError(std::string("missing ") + what +
                      " (give the flag or --data)");
  }
};

std::string write_log(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const std::string& l : lines) text += l + '\n';
  write_text(path, text);
  return text;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Spoofing-aware speaker verification back-end", "sasv"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sasv 1.0.0");

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_path;
  auto common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", config_path,
                    "key=value file; flags given on the command line win");
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
    CLI::Option* o = sub->add_option("--out", out_path, "Output path");
    if (out_required) o->required();
  };

  // synth -------------------------------------------------------------------
  SynthConfig synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic embedding corpus");
  common(synth_cmd, true);
  synth_cmd->add_option("--train-speakers", synth.train_speakers)->capture_default_str();
  synth_cmd->add_option("--dev-speakers", synth.dev_speakers)->capture_default_str();
  synth_cmd->add_option("--eval-speakers", synth.eval_speakers)->capture_default_str();
  synth_cmd->add_option("--bonafide-per-speaker", synth.bonafide_per_speaker)->capture_default_str();
  synth_cmd->add_option("--spoof-per-speaker", synth.spoof_per_speaker)->capture_default_str();
  synth_cmd->add_option("--enroll-per-speaker", synth.enroll_per_speaker)->capture_default_str();
  synth_cmd->add_option("--nontarget-per-test", synth.nontarget_per_test)->capture_default_str();
  synth_cmd->add_option("--asv-dim", synth.asv_dim)->capture_default_str();
  synth_cmd->add_option("--cm-dim", synth.cm_dim)->capture_default_str();
  synth_cmd->add_option("--asv-noise", synth.asv_noise)->capture_default_str();
  synth_cmd->add_option("--spoof-speaker-fidelity", synth.spoof_speaker_fidelity)->capture_default_str();
  synth_cmd->add_option("--cm-separation", synth.cm_separation)->capture_default_str();
  synth_cmd->add_option("--cm-noise", synth.cm_noise)->capture_default_str();

  // train -------------------------------------------------------------------
  TrainConfig train_cfg;
  DataPaths train_paths;
  std::string pooling_text = "attention";
  std::string selection_text = "negatives_only";
  std::string dev_trials;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Train the back-end on a manifest");
  common(train_cmd, true);
  train_paths.add_embedding_options(train_cmd);
  train_cmd->add_option("--manifest", train_paths.manifest, "Training manifest");
  train_cmd->add_option("--dev-trials", dev_trials,
                        "Development trials scored after every epoch");
  train_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  train_cmd->add_option("--learning-rate", train_cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--momentum", train_cfg.momentum)->capture_default_str();
  train_cmd->add_option("--weight-decay", train_cfg.weight_decay)->capture_default_str();
  train_cmd->add_option("--lr-decay", train_cfg.lr_decay_per_epoch)->capture_default_str();
  train_cmd->add_option("--top-n", train_cfg.hard_negative_top_n,
                        "Hardest negatives kept per batch")->capture_default_str();
  train_cmd->add_option("--hard-selection", selection_text,
                        "negatives_only or all_trials")->capture_default_str();
  train_cmd->add_option("--speakers-per-batch", train_cfg.m)->capture_default_str();
  train_cmd->add_option("--utterances-per-speaker", train_cfg.k)->capture_default_str();
  train_cmd->add_option("--hidden", train_cfg.hidden)->capture_default_str();
  train_cmd->add_option("--pooling", pooling_text, "attention or average")->capture_default_str();

  // score -------------------------------------------------------------------
  DataPaths score_paths;
  std::string checkpoint;
  std::string scorer_text = "fused";
  std::string score_pooling = "attention";
  CLI::App* score_cmd = app.add_subcommand("score", "Score a trial list");
  common(score_cmd, true);
  score_paths.add_embedding_options(score_cmd);
  score_cmd->add_option("--checkpoint", checkpoint, "Trained back-end")->required();
  score_cmd->add_option("--trials", score_paths.trials, "Trial list");
  score_cmd->add_option("--scorer", scorer_text, "fused, asv_only or score_sum")->capture_default_str();
  score_cmd->add_option("--pooling", score_pooling, "attention or average")->capture_default_str();

  // evaluate ----------------------------------------------------------------
  std::string score_file;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Compute SV-, SPF- and SASV-EER");
  common(eval_cmd, false);
  eval_cmd->add_option("--scores", score_file, "Score file")->required();

  // gradcheck ---------------------------------------------------------------
  GradcheckConfig gc;
  std::string gc_pooling = "attention";
  CLI::App* gc_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient check");
  common(gc_cmd, false);
  gc_cmd->add_option("--asv-dim", gc.asv_dim)->capture_default_str();
  gc_cmd->add_option("--cm-dim", gc.cm_dim)->capture_default_str();
  gc_cmd->add_option("--hidden", gc.hidden)->capture_default_str();
  gc_cmd->add_option("--utterances-per-speaker", gc.k)->capture_default_str();
  gc_cmd->add_option("--speakers-per-batch", gc.m)->capture_default_str();
  gc_cmd->add_option("--seeds", gc.n_seeds)->capture_default_str();
  gc_cmd->add_option("--pooling", gc_pooling, "attention or average")->capture_default_str();

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::CallForVersion&) {
      out << app.version() << "\n";
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err << "sasv: " << e.what() << "\n";
      return kExitUsage;
    }
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) apply_config_file(*sub, config_path);

    if (sub == synth_cmd) {
      synth.seed = seed;
      const SyntheticData data = generate_synthetic(synth);
      write_synthetic(data, out_path);
      out << "wrote " << data.manifest.size() << " training utterances, "
          << data.train_trials.size() << "/" << data.dev_trials.size() << "/"
          << data.eval_trials.size() << " train/dev/eval trials to "
          << out_path << "\n";
      return kExitOk;
    }

    if (sub == train_cmd) {
      train_cfg.seed = seed;
      train_cfg.pooling = parse_pooling(pooling_text);
      train_cfg.hard_selection = parse_hard_selection(selection_text);
      train_cfg.validate();
      const auto manifest = load_manifest(
          train_paths.resolve(train_paths.manifest, kManifestFile, "--manifest"));
      const EmbeddingTable asv = load_embeddings(train_paths.resolve(
          train_paths.asv, kAsvEmbeddingFile, "--asv-embeddings"));
      const EmbeddingTable cm = load_embeddings(train_paths.resolve(
          train_paths.cm, kCmEmbeddingFile, "--cm-embeddings"));
      const SpeakerPool pool = build_pool(manifest, asv, cm);

      TrainHooks hooks;
      TrialList dev;
      if (!dev_trials.empty()) {
        dev = load_trials(dev_trials);
        require_resolved(unresolved_ids(dev, asv, cm), dev_trials);
        hooks.dev_eval = [&](const BackendParams& params) {
          const auto records = score_trials(params, dev, asv, cm,
                                            Scorer::kFused, train_cfg.pooling);
          return evaluate(records);
        };
      }
      const fs::path dir(out_path);
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) {
        throw IoError("cannot create directory '" + dir.string() +
                      "': " + ec.message());
      }
      std::vector<std::string> log_lines;
      hooks.on_epoch = [&](const EpochLog& log, const BackendParams& params) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", log.epoch);
        save_checkpoint(params, dir / name);
        log_lines.push_back(format_log_line(log));
        out << log_lines.back() << "\n" << std::flush;
        write_log(dir / "train.log", log_lines);
      };
      const TrainResult result = train(pool, train_cfg, hooks);
      save_checkpoint(result.params, dir / "final.ckpt");
      return kExitOk;
    }

    if (sub == score_cmd) {
      const BackendParams params = load_checkpoint(checkpoint);
      const Scorer scorer = parse_scorer(scorer_text);
      const Pooling pooling = parse_pooling(score_pooling);
      const TrialList trials = load_trials(
          score_paths.resolve(score_paths.trials, kEvalTrialsFile, "--trials"));
      const EmbeddingTable asv = load_embeddings(score_paths.resolve(
          score_paths.asv, kAsvEmbeddingFile, "--asv-embeddings"));
      EmbeddingTable cm;
      if (scorer != Scorer::kAsvOnly) {
        cm = load_embeddings(score_paths.resolve(
            score_paths.cm, kCmEmbeddingFile, "--cm-embeddings"));
      }
      const auto records = score_trials(params, trials, asv, cm, scorer, pooling);
      save_scores(records, out_path);
      return kExitOk;
    }

    if (sub == eval_cmd) {
      const EerReport report = evaluate(load_scores(score_file));
      out << format_percentages(report) << "\n";
      err << format_report(report);
      if (!out_path.empty()) write_text(out_path, format_key_values(report));
      return kExitOk;
    }

    if (sub == gc_cmd) {
      gc.seed = seed;
      gc.pooling = parse_pooling(gc_pooling);
      const GradcheckReport report = run_gradcheck(gc);
      out << format_gradcheck(report);
      if (!out_path.empty()) write_text(out_path, format_gradcheck(report));
      if (!report.passed) {
        throw GradcheckFailed("gradient check failed; worst parameter " +
                              report.worst_group);
      }
      return kExitOk;
    }
    return kExitUsage;
  } catch (const GradcheckFailed& e) {
    err << "sasv: " << e.what() << "\n";
    return kExitGradcheck;
  } catch (const std::exception& e) {
    err << "sasv: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace sasv

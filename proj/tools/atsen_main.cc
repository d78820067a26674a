// atsen: corpus synthesis, training, ablations and checkpoint evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "atsen/corpus.h"
#include "atsen/error.h"
#include "atsen/experiment.h"
#include "atsen/metrics.h"
#include "atsen/tagger.h"
#include "atsen/trainer.h"
#include "json.hpp"

namespace fs = std::filesystem;
using atsen::ExperimentConfig;
using OJson = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kInternal = 3 };

// A failed training run, after its partial record has been written.
struct RunAborted {
  std::string message;
};

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw atsen::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw atsen::IoError("failed writing " + path.string());
}

void write_ckpt(const fs::path &path, const atsen::TaggerConfig &config,
                const atsen::ParamSet &params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw atsen::IoError("cannot write " + path.string());
  atsen::write_checkpoint(out, config, params);
  if (!out) throw atsen::IoError("failed writing " + path.string());
}

void make_dir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw atsen::IoError("cannot create " + dir.string() + ": " + ec.message());
}

fs::path data_dir(const ExperimentConfig &config, const fs::path &config_path,
                  const std::string &flag) {
  if (!flag.empty()) return flag;
  fs::path dir = config.data_dir;
  if (dir.is_relative()) dir = config_path.parent_path() / dir;
  return dir;
}

OJson seeds_json(const atsen::DerivedSeeds &s) {
  OJson j;
  j["corpus"] = s.corpus;
  j["data"] = s.data;
  j["init"] = s.init;
  j["ensemble"] = s.ensemble;
  return j;
}

std::string epoch_table(const atsen::RunRecord &rec) {
  std::string out = "epoch";
  for (const char *name : atsen::kModelNames) out += std::string("  ") + name;
  out += "   (dev F1)\n";
  char buf[128];
  for (const auto &e : rec.epochs) {
    std::snprintf(buf, sizeof(buf), "%5d", e.epoch);
    out += buf;
    for (int m = 0; m < 4; ++m) {
      std::snprintf(buf, sizeof(buf), "  %*.2f", static_cast<int>(std::string(atsen::kModelNames[m]).size()),
                    100.0 * e.dev[m].f1);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

struct LoadedCorpus {
  atsen::TokenVocab tokens;
  atsen::EncodedCorpus encoded;
};

LoadedCorpus load_corpus(const fs::path &dir) {
  atsen::CorpusFiles files = atsen::read_corpus(dir);
  LoadedCorpus c{atsen::TokenVocab::build(files.train), {}};
  c.encoded = atsen::encode_corpus(files.train, files.dev, files.test, c.tokens);
  return c;
}

// One ATSEN run; fills `record` and returns the resolved settings.
atsen::RunRecord train_once(const ExperimentConfig &config, const LoadedCorpus &corpus,
                            atsen::ResolvedRun &resolved) {
  resolved = atsen::resolve(config, corpus.tokens.size(), corpus.encoded.vocab->size());
  atsen::Trainer trainer(resolved.trainer, resolved.taggers);
  return trainer.run(corpus.encoded);
}

int cmd_synth(const fs::path &config_path, const std::vector<std::string> &overrides,
              const fs::path &out) {
  ExperimentConfig config = atsen::load_experiment(config_path, overrides);
  const atsen::DerivedSeeds seeds = atsen::derive_seeds(config.master_seed);
  atsen::SynthCorpus corpus = atsen::synth_corpus(config.synth, seeds.corpus);
  atsen::NoiseReport noise = atsen::write_corpus(out, corpus, config.synth, seeds.corpus);
  std::printf("wrote %zu/%zu/%zu sentences and %zu dictionary entries to %s\n",
              corpus.train.size(), corpus.dev.size(), corpus.test.size(),
              corpus.dictionary.size(), out.string().c_str());
  std::printf("distant labels: precision %.4f  recall %.4f  (%zu of %zu spans correct, %zu gold, %zu "
              "type confusions)\n",
              noise.label_precision, noise.label_recall, noise.correct_spans,
              noise.labeled_spans, noise.gold_spans, noise.confusion_count);
  return kOk;
}

int cmd_train(const fs::path &config_path, const std::vector<std::string> &overrides,
              const fs::path &out, const std::string &data_flag) {
  ExperimentConfig config = atsen::load_experiment(config_path, overrides);
  LoadedCorpus corpus = load_corpus(data_dir(config, config_path, data_flag));
  atsen::ResolvedRun resolved;
  atsen::RunRecord rec = train_once(config, corpus, resolved);

  make_dir(out);
  OJson record;
  record["config"] = atsen::to_json(config);
  record["derived_seeds"] = seeds_json(resolved.seeds);
  record["run"] = atsen::to_json(rec);
  write_text(out / "record.json", record.dump(2) + "\n");
  write_text(out / "epochs.txt", epoch_table(rec));
  atsen::write_vocab(out / "vocab.json", corpus.tokens, *corpus.encoded.vocab);
  if (!rec.complete) throw RunAborted{rec.error};

  write_ckpt(out / "best.ckpt", rec.best->config, rec.best->params);
  for (int p = 0; p < 2; ++p) {
    const auto &pair = (*rec.final_pairs)[p];
    write_ckpt(out / (std::string(atsen::kModelNames[2 * p]) + ".ckpt"), pair.arch, pair.teacher);
    write_ckpt(out / (std::string(atsen::kModelNames[2 * p + 1]) + ".ckpt"), pair.arch,
               pair.student);
  }
  std::cout << epoch_table(rec);
  std::printf("best: %s at epoch %d (dev F1 %.2f)\n", rec.best_model.c_str(), rec.best_epoch,
              100.0 * rec.best_dev_f1);
  std::cout << atsen::format_table({{"test", rec.test}});
  return kOk;
}

int cmd_ablate(const fs::path &config_path, const std::vector<std::string> &overrides,
               const std::string &name, const fs::path &out, int seeds,
               const std::string &data_flag) {
  ExperimentConfig config = atsen::load_experiment(config_path, overrides);
  ExperimentConfig ablated = atsen::apply_ablation(config, name);
  const auto diff = atsen::config_diff(atsen::to_json(config), atsen::to_json(ablated));
  LoadedCorpus corpus = load_corpus(data_dir(config, config_path, data_flag));

  OJson report;
  report["ablation"] = name;
  report["label"] = atsen::ablation_label(name);
  report["changed_fields"] = diff;
  report["config"] = atsen::to_json(config);
  report["runs"] = OJson::array();
  atsen::SpanCounts full_counts, ablated_counts;
  auto add = [](atsen::SpanCounts &c, const atsen::EntityMetrics &m) {
    c.tp += m.tp;
    c.fp += m.fp;
    c.fn += m.fn;
  };
  for (int k = 0; k < seeds; ++k) {
    ExperimentConfig a = config, b = ablated;
    a.master_seed = b.master_seed = config.master_seed + static_cast<std::uint64_t>(k);
    atsen::ResolvedRun ra, rb;
    atsen::RunRecord full = train_once(a, corpus, ra);
    atsen::RunRecord abl = train_once(b, corpus, rb);
    OJson run;
    run["master_seed"] = a.master_seed;
    run["derived_seeds"] = seeds_json(ra.seeds);
    run["full"] = atsen::to_json(full);
    run["ablated"] = atsen::to_json(abl);
    report["runs"].push_back(std::move(run));
    if (!full.complete || !abl.complete) {
      make_dir(out);
      write_text(out / "report.json", report.dump(2) + "\n");
      throw RunAborted{full.complete ? abl.error : full.error};
    }
    add(full_counts, full.test);
    add(ablated_counts, abl.test);
  }
  const auto full_m = atsen::metrics_from_counts(full_counts.tp, full_counts.fp, full_counts.fn);
  const auto abl_m =
      atsen::metrics_from_counts(ablated_counts.tp, ablated_counts.fp, ablated_counts.fn);
  report["test"] = {{"full", atsen::to_json(full_m)}, {"ablated", atsen::to_json(abl_m)}};
  const std::string table =
      atsen::format_table({{"ATSEN", full_m}, {atsen::ablation_label(name), abl_m}});
  make_dir(out);
  write_text(out / "report.json", report.dump(2) + "\n");
  write_text(out / "table.txt", table);
  std::cout << "changed:";
  for (const auto &d : diff) std::cout << ' ' << d;
  std::cout << "\n" << table;
  return kOk;
}

int cmd_eval(const fs::path &checkpoint, const fs::path &data, std::string vocab_path,
             bool as_json) {
  if (vocab_path.empty()) vocab_path = (checkpoint.parent_path() / "vocab.json").string();
  auto [tokens, tags] = atsen::read_vocab(vocab_path);
  std::ifstream ck(checkpoint, std::ios::binary);
  if (!ck) throw atsen::IoError("cannot read " + checkpoint.string());
  atsen::Checkpoint cp = atsen::read_checkpoint(ck);
  if (cp.config.token_vocab_size != tokens.size() || cp.config.tag_count != tags->size()) {
    throw atsen::ShapeError("checkpoint does not match " + vocab_path);
  }
  std::ifstream in(data, std::ios::binary);
  if (!in) throw atsen::IoError("cannot read " + data.string());
  atsen::Dataset dataset = atsen::read_jsonl(in, tags, atsen::Split::kTest);
  atsen::Tagger tagger(cp.config);
  std::vector<atsen::TagSeq> pred, gold;
  for (const auto &s : dataset.sentences()) {
    pred.push_back(tagger.predict(cp.params, tokens.encode(s)).tags);
    gold.push_back(s.gold_tags ? *s.gold_tags : s.tags);
  }
  const atsen::EntityMetrics m = atsen::entity_prf(pred, gold, *tags);
  if (as_json) {
    std::cout << atsen::to_json(m).dump(2) << "\n";
  } else {
    std::cout << atsen::format_table({{data.filename().string(), m}});
  }
  return kOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Dual teacher-student self-training for distantly supervised tagging"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_flag, name, checkpoint, eval_data, vocab_path;
  std::vector<std::string> overrides;
  int seeds = 1;
  bool as_json = false;

  auto *synth = app.add_subcommand("synth", "generate a synthetic corpus and its dictionary");
  auto *train = app.add_subcommand("train", "train on a corpus and write the run record");
  auto *ablate = app.add_subcommand("ablate", "compare the full method with one ablation");
  auto *eval = app.add_subcommand("eval", "score a checkpoint on a JSONL file");
  for (auto *sub : {synth, train, ablate}) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--set", overrides, "override a scalar field, e.g. trainer.max_epochs=3");
  }
  for (auto *sub : {train, ablate}) {
    sub->add_option("--data", data_flag, "corpus directory (default: data_dir from the config)");
  }
  ablate->add_option("--name", name, "ablation name")->required();
  ablate->add_option("--seeds", seeds, "number of consecutive master seeds")
      ->check(CLI::PositiveNumber);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "JSONL data with gold tags")->required();
  eval->add_option("--vocab", vocab_path, "vocab.json (default: next to the checkpoint)");
  eval->add_flag("--json", as_json, "print metrics as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(config_path, overrides, out_dir);
    if (*train) return cmd_train(config_path, overrides, out_dir, data_flag);
    if (*ablate) return cmd_ablate(config_path, overrides, name, out_dir, seeds, data_flag);
    if (*eval) return cmd_eval(checkpoint, eval_data, vocab_path, as_json);
  } catch (const atsen::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const atsen::IoError &e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const atsen::ParseError &e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kIo;
  } catch (const atsen::SchemaError &e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kIo;
  } catch (const RunAborted &e) {
    std::cerr << "run aborted: " << e.message << "\n";
    return kInternal;
  } catch (const std::exception &e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

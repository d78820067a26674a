#ifndef ATSEN_EXPERIMENT_H_
#define ATSEN_EXPERIMENT_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atsen/corpus.h"
#include "atsen/tagger.h"
#include "atsen/trainer.h"
#include "json.hpp"

namespace atsen {

// Everything a CLI run needs. Seeds inside `trainer` and `taggers`, and the
// vocabulary sizes of `taggers`, are not read from the file: they are filled
// in by resolve() from master_seed and the data.
struct ExperimentConfig {
  SynthConfig synth;
  std::array<TaggerConfig, 2> taggers;
  TrainerConfig trainer;
  // Corpus directory; relative paths are taken from the config file's folder.
  std::string data_dir = "data";
  std::uint64_t master_seed = 1;

  ExperimentConfig();
  void validate() const;
};

struct DerivedSeeds {
  std::uint64_t corpus = 0;
  std::uint64_t data = 0;
  std::array<std::uint64_t, 2> init = {0, 0};
  std::array<std::uint64_t, 2> ensemble = {0, 0};
};
DerivedSeeds derive_seeds(std::uint64_t master);

nlohmann::ordered_json to_json(const ExperimentConfig &config);
// Unknown keys and wrong types raise ConfigError naming the field.
ExperimentConfig experiment_from_json(const nlohmann::json &j);

// "trainer.learning_rate=0.3" style override of a scalar field.
void apply_override(nlohmann::json &j, const std::string &assignment);

ExperimentConfig load_experiment(const std::filesystem::path &path,
                                 const std::vector<std::string> &overrides = {});

// Seeds filled in from master_seed; vocabulary sizes from the data.
struct ResolvedRun {
  TrainerConfig trainer;
  std::array<TaggerConfig, 2> taggers;
  DerivedSeeds seeds;
};
ResolvedRun resolve(const ExperimentConfig &config, int token_vocab_size, int tag_count);

// Ablation names in table order.
const std::vector<std::string> &ablation_names();
// Display label, e.g. "w/o FE".
std::string ablation_label(const std::string &name);
// Throws ConfigError (field "name") listing valid names.
ExperimentConfig apply_ablation(const ExperimentConfig &config, const std::string &name);

// Dotted paths of every leaf that differs between two JSON documents.
std::vector<std::string> config_diff(const nlohmann::json &a, const nlohmann::json &b);

nlohmann::ordered_json to_json(const NoiseReport &report);

// Corpus files as written by the synth command.
struct CorpusFiles {
  Dataset train;
  Dataset dev;
  Dataset test;
};
// Writes train.jsonl (distant tags plus gold_tags), dev.jsonl and test.jsonl
// (gold tags), dictionary.tsv and meta.json. Returns the training noise.
NoiseReport write_corpus(const std::filesystem::path &dir, const SynthCorpus &corpus,
                         const SynthConfig &config, std::uint64_t seed);
CorpusFiles read_corpus(const std::filesystem::path &dir);

// Tokens and tag types needed to decode a checkpoint's inputs and outputs.
void write_vocab(const std::filesystem::path &path, const TokenVocab &tokens,
                 const TagVocab &tags);
std::pair<TokenVocab, std::shared_ptr<const TagVocab>> read_vocab(
    const std::filesystem::path &path);

}  // namespace atsen

#endif  // ATSEN_EXPERIMENT_H_

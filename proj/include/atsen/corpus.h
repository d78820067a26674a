#ifndef ATSEN_CORPUS_H_
#define ATSEN_CORPUS_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "atsen/tags.h"

namespace atsen {

struct Sentence {
  std::vector<std::string> tokens;
  TagSeq tags;
  // Gold tags for datasets whose `tags` are distant or pseudo labels.
  std::optional<TagSeq> gold_tags;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence &) const = default;
};

enum class Split { kTrain, kDev, kTest };
const char *split_name(Split split);

// An immutable, non-empty list of sentences sharing one tag vocabulary.
class Dataset {
 public:
  // Validates lengths and tag indices; throws InputError when empty.
  Dataset(std::vector<Sentence> sentences, std::shared_ptr<const TagVocab> vocab,
          Split split);

  const std::vector<Sentence> &sentences() const { return sentences_; }
  const Sentence &operator[](std::size_t i) const { return sentences_[i]; }
  std::size_t size() const { return sentences_.size(); }
  std::size_t token_count() const;
  const TagVocab &vocab() const { return *vocab_; }
  const std::shared_ptr<const TagVocab> &vocab_ptr() const { return vocab_; }
  Split split() const { return split_; }

  std::vector<TagSeq> tag_sequences() const;
  // Throws InputError if any sentence lacks gold tags.
  std::vector<TagSeq> gold_sequences() const;

  // Copy with `tags` replaced; gold tags are carried over unchanged.
  Dataset with_tags(const std::vector<TagSeq> &tags) const;

 private:
  std::vector<Sentence> sentences_;
  std::shared_ptr<const TagVocab> vocab_;
  Split split_;
};

// Two-column CoNLL text: "token<ws>tag" per line, blank line between
// sentences. Stray I- tags are repaired to B-. The one-argument form infers
// the tag vocabulary from the file.
Dataset parse_conll(std::string_view text, Split split = Split::kTrain);
Dataset parse_conll(std::string_view text, std::shared_ptr<const TagVocab> vocab,
                    Split split = Split::kTrain);
std::string to_conll(const Dataset &dataset);

// One JSON object per line with fields "tokens", "tags" and optional
// "gold_tags"; tags are written as strings.
void write_jsonl(std::ostream &out, const Dataset &dataset);
Dataset read_jsonl(std::istream &in, std::shared_ptr<const TagVocab> vocab, Split split);

// Surface-form dictionary for distant supervision. Keys are lowercased
// token n-grams joined by single spaces.
class Dictionary {
 public:
  void add(std::string_view surface, std::string type);
  std::optional<std::string> find(std::span<const std::string> tokens) const;
  const std::map<std::string, std::string> &entries() const { return entries_; }
  std::size_t max_ngram() const { return max_ngram_; }
  std::size_t size() const { return entries_.size(); }

  // "surface<TAB>type" per line, sorted by surface.
  void write(std::ostream &out) const;
  static Dictionary read(std::istream &in);

 private:
  std::map<std::string, std::string> entries_;
  std::size_t max_ngram_ = 0;
};

// Longest-match, leftmost-first dictionary labeling. The input's tags are
// treated as gold: the output carries them in gold_tags and never reads them
// when labeling.
Dataset distant_annotate(const Dataset &clean, const Dictionary &dictionary);

struct NoiseReport {
  double label_precision = 0.0;
  double label_recall = 0.0;
  std::size_t confusion_count = 0;  // right boundaries, wrong type
  std::size_t correct_spans = 0;
  std::size_t labeled_spans = 0;
  std::size_t gold_spans = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
};

NoiseReport noise_report(const Dataset &clean, const Dataset &noisy);

// Token-string to index map. Index 0 pads windows past sentence edges and
// index 1 stands for unknown tokens.
class TokenVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  TokenVocab();
  // `tokens` excludes the two reserved entries.
  explicit TokenVocab(const std::vector<std::string> &tokens);
  // Tokens in first-appearance order.
  static TokenVocab build(const Dataset &dataset);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;
  const std::string &token(int id) const { return tokens_.at(id); }
  // Ordinary tokens only, in index order.
  std::vector<std::string> words() const;
  std::vector<int> encode(const Sentence &sentence) const;
  std::vector<std::vector<int>> encode(const Dataset &dataset) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct SynthConfig {
  int train_sentences = 2000;
  int dev_sentences = 400;
  int test_sentences = 400;
  std::vector<std::string> entity_types = {"PER", "LOC", "ORG", "MISC"};
  int surface_forms_per_type = 500;
  int entity_words_per_type = 500;
  int context_words = 150;
  int triggers_per_type = 4;
  // Relative weights of entity lengths 1, 2, 3, ...
  std::vector<double> entity_length_weights = {1.0};
  int max_mentions = 3;
  int max_gap = 3;
  double trigger_rate = 0.85;
  double coverage = 0.6;
  double confusion = 0.1;

  // Throws ConfigError naming the bad field.
  void validate() const;
};

struct SynthCorpus {
  Dataset train;
  Dataset dev;
  Dataset test;
  Dictionary dictionary;
};

// Template-generated clean corpus plus a dictionary covering `coverage` of
// the entity surface forms, `confusion` of whose entries carry a wrong type.
// Deterministic in (config, seed).
SynthCorpus synth_corpus(const SynthConfig &config, std::uint64_t seed);

}  // namespace atsen

#endif  // ATSEN_CORPUS_H_

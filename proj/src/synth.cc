#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "atsen/corpus.h"
#include "atsen/error.h"
#include "atsen/rng.h"

namespace atsen {
namespace {

constexpr const char *kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                   "s", "t", "v", "z", "br", "tr", "st", "kl"};
constexpr const char *kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};

// Generates distinct pronounceable pseudo-words.
class WordMaker {
 public:
  explicit WordMaker(Rng &rng) : rng_(rng) {}

  std::string make() {
    for (;;) {
      std::string w;
      const int syllables = 2 + static_cast<int>(rng_.below(2));
      for (int i = 0; i < syllables; ++i) {
        w += kOnsets[rng_.below(std::size(kOnsets))];
        w += kVowels[rng_.below(std::size(kVowels))];
      }
      if (rng_.uniform() < 0.3) w += kOnsets[rng_.below(std::size(kOnsets))];
      if (used_.insert(w).second) return w;
    }
  }

  std::vector<std::string> make(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(make());
    return out;
  }

 private:
  Rng &rng_;
  std::set<std::string> used_;
};

struct SurfaceForm {
  std::vector<std::string> words;
  int type;
};

int draw_weighted(Rng &rng, const std::vector<double> &weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return static_cast<int>(i);
    u -= weights[i];
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace

void SynthConfig::validate() const {
  auto positive = [](int v, const char *field) {
    if (v < 1) throw ConfigError(field, "must be at least 1");
  };
  positive(train_sentences, "train_sentences");
  positive(dev_sentences, "dev_sentences");
  positive(test_sentences, "test_sentences");
  positive(surface_forms_per_type, "surface_forms_per_type");
  positive(entity_words_per_type, "entity_words_per_type");
  positive(context_words, "context_words");
  positive(triggers_per_type, "triggers_per_type");
  positive(max_mentions, "max_mentions");
  if (entity_types.empty()) throw ConfigError("entity_types", "must not be empty");
  if (max_gap < 0) throw ConfigError("max_gap", "must be non-negative");
  if (entity_length_weights.empty()) throw ConfigError("entity_length_weights", "must not be empty");
  double total = 0.0;
  for (double w : entity_length_weights) {
    if (!(w >= 0.0)) throw ConfigError("entity_length_weights", "weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("entity_length_weights", "weights must not all be zero");
  if (static_cast<int>(entity_length_weights.size()) > entity_words_per_type) {
    throw ConfigError("entity_length_weights", "entities longer than the word pool");
  }
  if (!(trigger_rate >= 0.0 && trigger_rate <= 1.0)) throw ConfigError("trigger_rate", "must be in [0, 1]");
  if (!(coverage >= 0.0 && coverage <= 1.0)) throw ConfigError("coverage", "must be in [0, 1]");
  if (!(confusion >= 0.0 && confusion <= 1.0)) throw ConfigError("confusion", "must be in [0, 1]");
  if (confusion > 0.0 && entity_types.size() < 2) {
    throw ConfigError("confusion", "needs at least two entity types");
  }
}

SynthCorpus synth_corpus(const SynthConfig &config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  WordMaker words(rng);
  const int types = static_cast<int>(config.entity_types.size());
  auto vocab = std::make_shared<const TagVocab>(config.entity_types);

  std::vector<std::string> context = words.make(config.context_words);
  std::vector<std::vector<std::string>> entity_words, left_triggers, right_triggers;
  for (int t = 0; t < types; ++t) {
    entity_words.push_back(words.make(config.entity_words_per_type));
    left_triggers.push_back(words.make(config.triggers_per_type));
    right_triggers.push_back(words.make(config.triggers_per_type));
  }

  // Surface forms: distinct word tuples drawn from each type's word pool.
  std::vector<SurfaceForm> forms;
  for (int t = 0; t < types; ++t) {
    std::set<std::vector<std::string>> seen;
    int attempts = 0;
    while (static_cast<int>(seen.size()) < config.surface_forms_per_type) {
      if (++attempts > 1000 * config.surface_forms_per_type) {
        throw ConfigError("surface_forms_per_type", "word pool too small for that many forms");
      }
      const int length = 1 + draw_weighted(rng, config.entity_length_weights);
      std::vector<std::string> form;
      std::set<std::size_t> picked;
      while (static_cast<int>(form.size()) < length) {
        std::size_t k = rng.below(entity_words[t].size());
        if (picked.insert(k).second) form.push_back(entity_words[t][k]);
      }
      if (seen.insert(form).second) forms.push_back({form, t});
    }
  }

  // Dictionary: an exact `coverage` fraction of forms, of which an exact
  // `confusion` fraction carry a wrong type.
  Dictionary dictionary;
  {
    std::vector<std::size_t> order(forms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const auto covered = static_cast<std::size_t>(std::llround(config.coverage * forms.size()));
    const auto confused = static_cast<std::size_t>(std::llround(config.confusion * covered));
    for (std::size_t k = 0; k < covered; ++k) {
      const SurfaceForm &form = forms[order[k]];
      int type = form.type;
      if (k < confused) {
        type = static_cast<int>(rng.below(types - 1));
        if (type >= form.type) ++type;
      }
      std::string surface;
      for (const auto &w : form.words) surface += (surface.empty() ? "" : " ") + w;
      dictionary.add(surface, config.entity_types[type]);
    }
  }

  std::set<std::vector<std::string>> used_sentences;
  std::vector<std::size_t> form_queue(forms.size());
  for (std::size_t i = 0; i < form_queue.size(); ++i) form_queue[i] = i;
  rng.shuffle(form_queue);
  std::size_t queue_pos = 0;

  auto make_split = [&](int count, Split split) {
    std::vector<Sentence> sentences;
    while (static_cast<int>(sentences.size()) < count) {
      Sentence s;
      auto filler = [&](int n) {
        for (int i = 0; i < n; ++i) {
          s.tokens.push_back(context[rng.below(context.size())]);
          s.tags.push_back(TagVocab::kOutside);
        }
      };
      auto gap = [&] { filler(static_cast<int>(rng.below(config.max_gap + 1))); };
      const int mentions = 1 + static_cast<int>(rng.below(config.max_mentions));
      gap();
      for (int m = 0; m < mentions; ++m) {
        std::size_t f;
        if (split == Split::kTrain && queue_pos < form_queue.size()) {
          f = form_queue[queue_pos++];
        } else {
          f = rng.below(forms.size());
        }
        const SurfaceForm &form = forms[f];
        // The slot left of a mention always holds a word, so mentions never touch.
        if (rng.uniform() < config.trigger_rate) {
          s.tokens.push_back(left_triggers[form.type][rng.below(config.triggers_per_type)]);
          s.tags.push_back(TagVocab::kOutside);
        } else {
          filler(1);
        }
        for (std::size_t k = 0; k < form.words.size(); ++k) {
          s.tokens.push_back(form.words[k]);
          s.tags.push_back(k == 0 ? vocab->begin_tag(form.type) : vocab->inside_tag(form.type));
        }
        if (rng.uniform() < 0.5 * config.trigger_rate) {
          s.tokens.push_back(right_triggers[form.type][rng.below(config.triggers_per_type)]);
          s.tags.push_back(TagVocab::kOutside);
        }
        gap();
      }
      // Splits never share a sentence.
      if (used_sentences.insert(s.tokens).second) sentences.push_back(std::move(s));
    }
    return Dataset(std::move(sentences), vocab, split);
  };

  Dataset train = make_split(config.train_sentences, Split::kTrain);
  Dataset dev = make_split(config.dev_sentences, Split::kDev);
  Dataset test = make_split(config.test_sentences, Split::kTest);
  return {std::move(train), std::move(dev), std::move(test), std::move(dictionary)};
}

}  // namespace atsen

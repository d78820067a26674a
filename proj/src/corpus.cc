#include "atsen/corpus.h"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "atsen/error.h"
#include "atsen/metrics.h"
#include "json.hpp"

namespace atsen {
namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char &c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) fields.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

struct RawSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

std::vector<RawSentence> split_conll(std::string_view text) {
  std::vector<RawSentence> out;
  RawSentence current;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto fields = split_ws(line);
    if (fields.empty()) {
      if (!current.tokens.empty()) out.push_back(std::move(current));
      current = {};
    } else if (fields.size() != 2) {
      throw ParseError(line_no, "expected 2 columns, found " + std::to_string(fields.size()));
    } else {
      try {
        split_tag(fields[1]);
      } catch (const SchemaError &e) {
        throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
      }
      current.tokens.push_back(std::move(fields[0]));
      current.tags.push_back(std::move(fields[1]));
    }
    pos = eol + 1;
  }
  if (!current.tokens.empty()) out.push_back(std::move(current));
  if (out.empty()) throw InputError("empty dataset: no sentences in CoNLL input");
  return out;
}

Dataset build_dataset(std::vector<RawSentence> raw, std::shared_ptr<const TagVocab> vocab,
                      Split split) {
  std::vector<Sentence> sentences;
  sentences.reserve(raw.size());
  for (auto &r : raw) {
    Sentence s;
    s.tokens = std::move(r.tokens);
    for (const auto &tag : r.tags) s.tags.push_back(vocab->index(tag));
    s.tags = repair_bio(s.tags, *vocab);
    sentences.push_back(std::move(s));
  }
  return Dataset(std::move(sentences), std::move(vocab), split);
}

void check_tags(const TagSeq &tags, std::size_t n, const TagVocab &vocab, std::size_t i) {
  if (tags.size() != n) {
    throw InputError("sentence " + std::to_string(i) + ": tag count differs from token count");
  }
  for (int t : tags) {
    if (!vocab.contains(t)) {
      throw InputError("sentence " + std::to_string(i) + ": tag index out of range");
    }
  }
}

}  // namespace

const char *split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Dataset::Dataset(std::vector<Sentence> sentences, std::shared_ptr<const TagVocab> vocab,
                 Split split)
    : sentences_(std::move(sentences)), vocab_(std::move(vocab)), split_(split) {
  if (!vocab_) throw InputError("dataset without tag vocabulary");
  if (sentences_.empty()) throw InputError("empty dataset");
  for (std::size_t i = 0; i < sentences_.size(); ++i) {
    const Sentence &s = sentences_[i];
    check_tags(s.tags, s.tokens.size(), *vocab_, i);
    if (s.gold_tags) check_tags(*s.gold_tags, s.tokens.size(), *vocab_, i);
  }
}

std::size_t Dataset::token_count() const {
  std::size_t n = 0;
  for (const auto &s : sentences_) n += s.size();
  return n;
}

std::vector<TagSeq> Dataset::tag_sequences() const {
  std::vector<TagSeq> out;
  out.reserve(sentences_.size());
  for (const auto &s : sentences_) out.push_back(s.tags);
  return out;
}

std::vector<TagSeq> Dataset::gold_sequences() const {
  std::vector<TagSeq> out;
  out.reserve(sentences_.size());
  for (std::size_t i = 0; i < sentences_.size(); ++i) {
    if (!sentences_[i].gold_tags) {
      throw InputError("sentence " + std::to_string(i) + " has no gold tags");
    }
    out.push_back(*sentences_[i].gold_tags);
  }
  return out;
}

Dataset Dataset::with_tags(const std::vector<TagSeq> &tags) const {
  if (tags.size() != sentences_.size()) throw InputError("tag set does not cover the dataset");
  std::vector<Sentence> copy = sentences_;
  for (std::size_t i = 0; i < copy.size(); ++i) copy[i].tags = tags[i];
  return Dataset(std::move(copy), vocab_, split_);
}

Dataset parse_conll(std::string_view text, Split split) {
  auto raw = split_conll(text);
  std::vector<std::string> all_tags;
  for (const auto &r : raw) all_tags.insert(all_tags.end(), r.tags.begin(), r.tags.end());
  auto vocab = std::make_shared<const TagVocab>(TagVocab::infer(all_tags));
  return build_dataset(std::move(raw), std::move(vocab), split);
}

Dataset parse_conll(std::string_view text, std::shared_ptr<const TagVocab> vocab, Split split) {
  return build_dataset(split_conll(text), std::move(vocab), split);
}

std::string to_conll(const Dataset &dataset) {
  std::string out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (i > 0) out += '\n';
    const Sentence &s = dataset[i];
    for (std::size_t j = 0; j < s.size(); ++j) {
      out += s.tokens[j];
      out += ' ';
      out += dataset.vocab().tag(s.tags[j]);
      out += '\n';
    }
  }
  return out;
}

void write_jsonl(std::ostream &out, const Dataset &dataset) {
  const TagVocab &vocab = dataset.vocab();
  auto names = [&](const TagSeq &tags) {
    std::vector<std::string> v;
    v.reserve(tags.size());
    for (int t : tags) v.push_back(vocab.tag(t));
    return v;
  };
  for (const auto &s : dataset.sentences()) {
    nlohmann::ordered_json j;
    j["tokens"] = s.tokens;
    j["tags"] = names(s.tags);
    if (s.gold_tags) j["gold_tags"] = names(*s.gold_tags);
    out << j.dump() << '\n';
  }
}

Dataset read_jsonl(std::istream &in, std::shared_ptr<const TagVocab> vocab, Split split) {
  std::vector<Sentence> sentences;
  std::string line;
  std::size_t line_no = 0;
  auto to_indices = [&](const nlohmann::json &arr) {
    TagSeq tags;
    for (const auto &t : arr) tags.push_back(vocab->index(t.get<std::string>()));
    return tags;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      Sentence s;
      s.tokens = j.at("tokens").get<std::vector<std::string>>();
      s.tags = repair_bio(to_indices(j.at("tags")), *vocab);
      if (j.contains("gold_tags")) s.gold_tags = repair_bio(to_indices(j["gold_tags"]), *vocab);
      if (s.tags.size() != s.tokens.size() ||
          (s.gold_tags && s.gold_tags->size() != s.tokens.size())) {
        throw ParseError(line_no, "tags and tokens differ in length");
      }
      sentences.push_back(std::move(s));
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(line_no, e.what());
    }
  }
  return Dataset(std::move(sentences), std::move(vocab), split);
}

void Dictionary::add(std::string_view surface, std::string type) {
  auto words = split_ws(surface);
  if (words.empty()) throw InputError("empty dictionary entry");
  if (type.empty()) throw InputError("dictionary entry without type");
  std::string key;
  for (const auto &w : words) {
    if (!key.empty()) key += ' ';
    key += lowercase(w);
  }
  entries_[key] = std::move(type);
  max_ngram_ = std::max(max_ngram_, words.size());
}

std::optional<std::string> Dictionary::find(std::span<const std::string> tokens) const {
  std::string key;
  for (const auto &w : tokens) {
    if (!key.empty()) key += ' ';
    key += lowercase(w);
  }
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void Dictionary::write(std::ostream &out) const {
  for (const auto &[surface, type] : entries_) out << surface << '\t' << type << '\n';
}

Dictionary Dictionary::read(std::istream &in) {
  Dictionary dict;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "expected surface<TAB>type");
    dict.add(std::string_view(line).substr(0, tab), line.substr(tab + 1));
  }
  return dict;
}

Dataset distant_annotate(const Dataset &clean, const Dictionary &dictionary) {
  const TagVocab &vocab = clean.vocab();
  std::unordered_map<std::string, int> type_index;
  for (const auto &[surface, type] : dictionary.entries()) {
    auto t = vocab.find_type(type);
    if (!t) throw SchemaError("dictionary type '" + type + "' is not in the dataset vocabulary");
    type_index[type] = *t;
  }
  std::vector<Sentence> out;
  out.reserve(clean.size());
  for (const auto &s : clean.sentences()) {
    Sentence labeled;
    labeled.tokens = s.tokens;
    labeled.tags.assign(s.size(), TagVocab::kOutside);
    labeled.gold_tags = s.tags;
    const std::span<const std::string> tokens(s.tokens);
    std::size_t j = 0;
    while (j < s.size()) {
      std::size_t longest = std::min(dictionary.max_ngram(), s.size() - j);
      std::size_t matched = 0;
      int type = -1;
      for (std::size_t len = longest; len >= 1; --len) {
        if (auto hit = dictionary.find(tokens.subspan(j, len))) {
          matched = len;
          type = type_index.at(*hit);
          break;
        }
      }
      if (matched == 0) {
        ++j;
        continue;
      }
      labeled.tags[j] = vocab.begin_tag(type);
      for (std::size_t k = 1; k < matched; ++k) labeled.tags[j + k] = vocab.inside_tag(type);
      j += matched;
    }
    out.push_back(std::move(labeled));
  }
  return Dataset(std::move(out), clean.vocab_ptr(), clean.split());
}

NoiseReport noise_report(const Dataset &clean, const Dataset &noisy) {
  if (clean.size() != noisy.size()) throw AlignmentError("datasets differ in sentence count");
  if (!(clean.vocab() == noisy.vocab())) throw AlignmentError("datasets use different tag sets");
  NoiseReport r;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i].tokens != noisy[i].tokens) {
      throw AlignmentError("sentence " + std::to_string(i) + " tokens differ");
    }
    auto gold = decode_spans(clean[i].tags, clean.vocab());
    auto labeled = decode_spans(noisy[i].tags, noisy.vocab());
    std::set<EntitySpan> gold_set(gold.begin(), gold.end());
    std::set<std::pair<int, int>> gold_bounds;
    for (const auto &g : gold) gold_bounds.emplace(g.start, g.end);
    r.gold_spans += gold.size();
    r.labeled_spans += labeled.size();
    for (const auto &span : labeled) {
      if (gold_set.count(span)) {
        ++r.correct_spans;
      } else if (gold_bounds.count({span.start, span.end})) {
        ++r.confusion_count;
      }
    }
  }
  EntityMetrics m = metrics_from_counts(r.correct_spans, r.labeled_spans - r.correct_spans,
                                        r.gold_spans - r.correct_spans);
  r.label_precision = m.precision;
  r.label_recall = m.recall;
  r.precision_undefined = m.precision_undefined;
  r.recall_undefined = m.recall_undefined;
  return r;
}

TokenVocab::TokenVocab() : TokenVocab(std::vector<std::string>{}) {}

TokenVocab::TokenVocab(const std::vector<std::string> &tokens) {
  tokens_ = {"<pad>", "<unk>"};
  index_["<pad>"] = kPad;
  index_["<unk>"] = kUnk;
  for (const auto &t : tokens) {
    if (index_.emplace(t, static_cast<int>(tokens_.size())).second) tokens_.push_back(t);
  }
}

TokenVocab TokenVocab::build(const Dataset &dataset) {
  std::vector<std::string> tokens;
  std::set<std::string> seen;
  for (const auto &s : dataset.sentences()) {
    for (const auto &t : s.tokens) {
      if (seen.insert(t).second) tokens.push_back(t);
    }
  }
  return TokenVocab(tokens);
}

int TokenVocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::string> TokenVocab::words() const {
  return std::vector<std::string>(tokens_.begin() + 2, tokens_.end());
}

std::vector<int> TokenVocab::encode(const Sentence &sentence) const {
  std::vector<int> ids;
  ids.reserve(sentence.size());
  for (const auto &t : sentence.tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::vector<int>> TokenVocab::encode(const Dataset &dataset) const {
  std::vector<std::vector<int>> out;
  out.reserve(dataset.size());
  for (const auto &s : dataset.sentences()) out.push_back(encode(s));
  return out;
}

}  // namespace atsen

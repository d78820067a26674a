#include "atsen/experiment.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "atsen/error.h"
#include "atsen/rng.h"

namespace atsen {
namespace {

using Json = nlohmann::json;
using OJson = nlohmann::ordered_json;

// Walks one JSON object, remembering which keys were read so that leftovers
// can be reported as unknown fields.
class ObjectReader {
 public:
  ObjectReader(const Json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where(), "expected an object");
  }

  bool has(const char *key) const { return j_.contains(key); }

  template <typename T>
  void read(const char *key, T &out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const Json &v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
            throw ConfigError(field(key), "must be non-negative");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
      }
      out = v.get<T>();
    } catch (const Json::exception &e) {
      throw ConfigError(field(key), e.what());
    }
  }

  const Json &child(const char *key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string field(const std::string &key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto &item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(field(item.key()), "unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const Json &j_;
  std::string path_;
  std::set<std::string> seen_;
};

OJson tagger_json(const TaggerConfig &t) {
  OJson j;
  j["embed_dim"] = t.embed_dim;
  j["hidden_dim"] = t.hidden_dim;
  j["context_radius"] = t.context_radius;
  j["init_scale"] = t.init_scale;
  return j;
}

void read_tagger(const Json &j, const std::string &path, TaggerConfig &t) {
  ObjectReader r(j, path);
  r.read("embed_dim", t.embed_dim);
  r.read("hidden_dim", t.hidden_dim);
  r.read("context_radius", t.context_radius);
  r.read("init_scale", t.init_scale);
  r.finish();
}

OJson synth_json(const SynthConfig &s) {
  OJson j;
  j["train_sentences"] = s.train_sentences;
  j["dev_sentences"] = s.dev_sentences;
  j["test_sentences"] = s.test_sentences;
  j["entity_types"] = s.entity_types;
  j["surface_forms_per_type"] = s.surface_forms_per_type;
  j["entity_words_per_type"] = s.entity_words_per_type;
  j["context_words"] = s.context_words;
  j["triggers_per_type"] = s.triggers_per_type;
  j["entity_length_weights"] = s.entity_length_weights;
  j["max_mentions"] = s.max_mentions;
  j["max_gap"] = s.max_gap;
  j["trigger_rate"] = s.trigger_rate;
  j["coverage"] = s.coverage;
  j["confusion"] = s.confusion;
  return j;
}

void read_synth(const Json &j, SynthConfig &s) {
  ObjectReader r(j, "synth");
  r.read("train_sentences", s.train_sentences);
  r.read("dev_sentences", s.dev_sentences);
  r.read("test_sentences", s.test_sentences);
  r.read("entity_types", s.entity_types);
  r.read("surface_forms_per_type", s.surface_forms_per_type);
  r.read("entity_words_per_type", s.entity_words_per_type);
  r.read("context_words", s.context_words);
  r.read("triggers_per_type", s.triggers_per_type);
  r.read("entity_length_weights", s.entity_length_weights);
  r.read("max_mentions", s.max_mentions);
  r.read("max_gap", s.max_gap);
  r.read("trigger_rate", s.trigger_rate);
  r.read("coverage", s.coverage);
  r.read("confusion", s.confusion);
  r.finish();
}

OJson trainer_json(const TrainerConfig &t) {
  OJson j;
  j["pretrain_epochs"] = t.pretrain_epochs;
  j["pretrain_dev_select"] = t.pretrain_dev_select;
  j["max_epochs"] = t.max_epochs;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["use_ce"] = t.use_ce;
  j["relabel"] = to_string(t.relabel);
  j["selection"] = {{"sigma1", t.selection.sigma1},
                    {"mask_policy", to_string(t.selection.mask_policy)},
                    {"consistency", t.selection.consistency}};
  j["distill"] = {{"temperature", t.distill.temperature},
                  {"c", t.distill.c},
                  {"solver", to_string(t.distill.solver)},
                  {"weighting", to_string(t.distill.weighting)},
                  {"fixed_alpha", t.distill.fixed_alpha}};
  OJson ens = OJson::array();
  for (const auto &e : t.ensemble) ens.push_back({{"m", e.m}, {"sigma2", e.sigma2}});
  j["ensemble"] = std::move(ens);
  return j;
}

template <typename Parse>
auto read_enum(ObjectReader &r, const char *key, Parse parse, decltype(parse("")) current) {
  std::string name;
  r.read(key, name);
  if (name.empty()) return current;
  try {
    return parse(name);
  } catch (const ConfigError &e) {
    throw ConfigError(r.field(key), e.message());
  }
}

void read_trainer(const Json &j, TrainerConfig &t) {
  ObjectReader r(j, "trainer");
  r.read("pretrain_epochs", t.pretrain_epochs);
  r.read("pretrain_dev_select", t.pretrain_dev_select);
  r.read("max_epochs", t.max_epochs);
  r.read("batch_size", t.batch_size);
  r.read("learning_rate", t.learning_rate);
  r.read("use_ce", t.use_ce);
  t.relabel = read_enum(r, "relabel", parse_relabel, t.relabel);
  if (r.has("selection")) {
    ObjectReader s(r.child("selection"), "trainer.selection");
    s.read("sigma1", t.selection.sigma1);
    t.selection.mask_policy = read_enum(s, "mask_policy", parse_mask_policy,
                                        t.selection.mask_policy);
    s.read("consistency", t.selection.consistency);
    s.finish();
  }
  if (r.has("distill")) {
    ObjectReader d(r.child("distill"), "trainer.distill");
    d.read("temperature", t.distill.temperature);
    d.read("c", t.distill.c);
    t.distill.solver = read_enum(d, "solver", parse_solver, t.distill.solver);
    t.distill.weighting = read_enum(d, "weighting", parse_weighting, t.distill.weighting);
    d.read("fixed_alpha", t.distill.fixed_alpha);
    d.finish();
  }
  if (r.has("ensemble")) {
    const Json &arr = r.child("ensemble");
    if (!arr.is_array() || arr.size() != 2) {
      throw ConfigError("trainer.ensemble", "expected a list of two entries");
    }
    for (std::size_t i = 0; i < 2; ++i) {
      ObjectReader e(arr[i], "trainer.ensemble." + std::to_string(i));
      e.read("m", t.ensemble[i].m);
      e.read("sigma2", t.ensemble[i].sigma2);
      e.finish();
    }
  }
  r.finish();
}

void flatten(const Json &j, const std::string &prefix, std::map<std::string, Json> &out) {
  if (j.is_object() && !j.empty()) {
    for (const auto &item : j.items()) {
      flatten(item.value(), prefix.empty() ? item.key() : prefix + "." + item.key(), out);
    }
  } else if (j.is_array() && !j.empty() && (j[0].is_object() || j[0].is_array())) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      flatten(j[i], prefix + "." + std::to_string(i), out);
    }
  } else {
    out[prefix] = j;
  }
}

void write_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::ifstream open_input(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

Json read_json_file(const std::filesystem::path &path) {
  std::ifstream in = open_input(path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error &e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  taggers[0].hidden_dim = 48;
  taggers[1].hidden_dim = 40;
  trainer.pretrain_epochs = 8;
  trainer.max_epochs = 10;
  trainer.batch_size = 16;
  trainer.learning_rate = 0.5;
  trainer.selection.sigma1 = 0.0;
  trainer.selection.mask_policy = MaskPolicy::kExclude;
  trainer.distill.temperature = 2.0;
}

void ExperimentConfig::validate() const {
  auto nested = [](const std::string &prefix, auto &&check) {
    try {
      check();
    } catch (const ConfigError &e) {
      throw ConfigError(prefix + "." + e.field(), e.message());
    }
  };
  nested("synth", [&] { synth.validate(); });
  for (std::size_t i = 0; i < taggers.size(); ++i) {
    TaggerConfig probe = taggers[i];
    probe.token_vocab_size = std::max(probe.token_vocab_size, 2);
    nested("taggers." + std::to_string(i), [&] { probe.validate(); });
  }
  nested("trainer", [&] { trainer.validate(); });
  if (data_dir.empty()) throw ConfigError("data_dir", "must not be empty");
}

DerivedSeeds derive_seeds(std::uint64_t master) {
  DerivedSeeds s;
  s.corpus = derive_seed(master, "corpus");
  s.data = derive_seed(master, "data");
  s.init = {derive_seed(master, "init1"), derive_seed(master, "init2")};
  s.ensemble = {derive_seed(master, "ensemble1"), derive_seed(master, "ensemble2")};
  return s;
}

OJson to_json(const ExperimentConfig &config) {
  OJson j;
  j["master_seed"] = config.master_seed;
  j["data_dir"] = config.data_dir;
  j["synth"] = synth_json(config.synth);
  j["taggers"] = {tagger_json(config.taggers[0]), tagger_json(config.taggers[1])};
  j["trainer"] = trainer_json(config.trainer);
  return j;
}

ExperimentConfig experiment_from_json(const Json &j) {
  ExperimentConfig c;
  ObjectReader r(j, "");
  r.read("master_seed", c.master_seed);
  r.read("data_dir", c.data_dir);
  if (r.has("synth")) read_synth(r.child("synth"), c.synth);
  if (r.has("taggers")) {
    const Json &arr = r.child("taggers");
    if (!arr.is_array() || arr.size() != 2) throw ConfigError("taggers", "expected two entries");
    for (std::size_t i = 0; i < 2; ++i) {
      read_tagger(arr[i], "taggers." + std::to_string(i), c.taggers[i]);
    }
  }
  if (r.has("trainer")) read_trainer(r.child("trainer"), c.trainer);
  r.finish();
  c.validate();
  return c;
}

void apply_override(Json &j, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like field=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json *node = &j;
  std::stringstream parts(path);
  std::string key;
  while (std::getline(parts, key, '.')) {
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (const std::exception &) {
        throw ConfigError(path, "expected a list index");
      }
      if (idx >= node->size()) throw ConfigError(path, "index out of range");
      node = &(*node)[idx];
    } else if (node->is_object() && node->contains(key)) {
      node = &(*node)[key];
    } else {
      throw ConfigError(path, "unknown field");
    }
  }
  if (node->is_object()) throw ConfigError(path, "not a scalar field");
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error &) {
    value = text;
  }
  *node = std::move(value);
}

ExperimentConfig load_experiment(const std::filesystem::path &path,
                                 const std::vector<std::string> &overrides) {
  ExperimentConfig c = experiment_from_json(read_json_file(path));
  if (overrides.empty()) return c;
  Json full = to_json(c);
  for (const auto &o : overrides) apply_override(full, o);
  return experiment_from_json(full);
}

ResolvedRun resolve(const ExperimentConfig &config, int token_vocab_size, int tag_count) {
  ResolvedRun r;
  r.seeds = derive_seeds(config.master_seed);
  r.trainer = config.trainer;
  r.trainer.data_seed = r.seeds.data;
  for (int i = 0; i < 2; ++i) {
    r.trainer.ensemble[i].rng_seed = r.seeds.ensemble[i];
    r.taggers[i] = config.taggers[i];
    r.taggers[i].init_seed = r.seeds.init[i];
    r.taggers[i].token_vocab_size = token_vocab_size;
    r.taggers[i].tag_count = tag_count;
  }
  return r;
}

const std::vector<std::string> &ablation_names() {
  static const std::vector<std::string> names = {
      "cp", "tp", "ce", "ad", "fe", "avg_kd", "manual_kd", "se", "ema", "all_ensemble"};
  return names;
}

std::string ablation_label(const std::string &name) {
  static const std::map<std::string, std::string> labels = {
      {"cp", "w/o CP"},         {"tp", "w/o TP"},           {"ce", "w/o CE"},
      {"ad", "w/o AD"},         {"fe", "w/o FE"},           {"avg_kd", "average KD"},
      {"manual_kd", "manual KD"}, {"se", "w/o SE"},         {"ema", "w/o EMA"},
      {"all_ensemble", "w/o all"}};
  auto it = labels.find(name);
  if (it == labels.end()) return name;
  return it->second;
}

ExperimentConfig apply_ablation(const ExperimentConfig &config, const std::string &name) {
  ExperimentConfig c = config;
  TrainerConfig &t = c.trainer;
  if (name == "cp") {
    t.selection.consistency = false;
  } else if (name == "tp") {
    t.selection.sigma1 = 0.0;
  } else if (name == "ce") {
    t.use_ce = false;
  } else if (name == "ad") {
    t.distill.weighting = KdWeighting::kOff;
  } else if (name == "avg_kd") {
    t.distill.weighting = KdWeighting::kFixed;
    t.distill.fixed_alpha = 0.5;
  } else if (name == "manual_kd") {
    t.distill.weighting = KdWeighting::kFixed;
    t.distill.fixed_alpha = 0.7;
  } else if (name == "se") {
    for (auto &e : t.ensemble) e.sigma2 = 0.0;
  } else if (name == "ema") {
    for (auto &e : t.ensemble) e.m = 0.0;
  } else if (name == "fe" || name == "all_ensemble") {
    for (auto &e : t.ensemble) {
      e.m = 0.0;
      e.sigma2 = 0.0;
    }
  } else {
    std::string valid;
    for (const auto &n : ablation_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("name", "unknown ablation '" + name + "' (valid: " + valid + ")");
  }
  c.validate();
  return c;
}

std::vector<std::string> config_diff(const Json &a, const Json &b) {
  std::map<std::string, Json> fa, fb;
  flatten(a, "", fa);
  flatten(b, "", fb);
  std::vector<std::string> out;
  for (const auto &[k, v] : fa) {
    auto it = fb.find(k);
    if (it == fb.end() || it->second != v) out.push_back(k);
  }
  for (const auto &[k, v] : fb) {
    if (!fa.count(k)) out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  return out;
}

OJson to_json(const NoiseReport &r) {
  OJson j;
  j["label_precision"] = r.label_precision;
  j["label_recall"] = r.label_recall;
  j["confusion_count"] = r.confusion_count;
  j["correct_spans"] = r.correct_spans;
  j["labeled_spans"] = r.labeled_spans;
  j["gold_spans"] = r.gold_spans;
  j["precision_undefined"] = r.precision_undefined;
  j["recall_undefined"] = r.recall_undefined;
  return j;
}

NoiseReport write_corpus(const std::filesystem::path &dir, const SynthCorpus &corpus,
                         const SynthConfig &config, std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const Dataset distant = distant_annotate(corpus.train, corpus.dictionary);
  const NoiseReport noise = noise_report(corpus.train, distant);
  auto jsonl = [](const Dataset &d) {
    std::ostringstream out;
    write_jsonl(out, d);
    return out.str();
  };
  write_file(dir / "train.jsonl", jsonl(distant));
  write_file(dir / "dev.jsonl", jsonl(corpus.dev));
  write_file(dir / "test.jsonl", jsonl(corpus.test));
  std::ostringstream dict;
  corpus.dictionary.write(dict);
  write_file(dir / "dictionary.tsv", dict.str());
  OJson meta;
  meta["entity_types"] = corpus.train.vocab().entity_types();
  meta["seed"] = seed;
  meta["synth"] = synth_json(config);
  meta["noise"] = to_json(noise);
  write_file(dir / "meta.json", meta.dump(2) + "\n");
  return noise;
}

CorpusFiles read_corpus(const std::filesystem::path &dir) {
  const Json meta = read_json_file(dir / "meta.json");
  std::vector<std::string> types;
  try {
    types = meta.at("entity_types").get<std::vector<std::string>>();
  } catch (const Json::exception &e) {
    throw SchemaError((dir / "meta.json").string() + ": " + e.what());
  }
  auto vocab = std::make_shared<const TagVocab>(types);
  auto load = [&](const char *name, Split split) {
    std::ifstream in = open_input(dir / name);
    return read_jsonl(in, vocab, split);
  };
  return {load("train.jsonl", Split::kTrain), load("dev.jsonl", Split::kDev),
          load("test.jsonl", Split::kTest)};
}

void write_vocab(const std::filesystem::path &path, const TokenVocab &tokens,
                 const TagVocab &tags) {
  OJson j;
  j["entity_types"] = tags.entity_types();
  j["tokens"] = tokens.words();
  write_file(path, j.dump() + "\n");
}

std::pair<TokenVocab, std::shared_ptr<const TagVocab>> read_vocab(
    const std::filesystem::path &path) {
  const Json j = read_json_file(path);
  try {
    return {TokenVocab(j.at("tokens").get<std::vector<std::string>>()),
            std::make_shared<const TagVocab>(
                j.at("entity_types").get<std::vector<std::string>>())};
  } catch (const Json::exception &e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace atsen

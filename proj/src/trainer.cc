#include "atsen/trainer.h"

#include <cmath>

#include "atsen/error.h"
#include "atsen/rng.h"

namespace atsen {

const char *to_string(RelabelGranularity g) {
  return g == RelabelGranularity::kPerBatch ? "per_batch" : "per_epoch";
}

RelabelGranularity parse_relabel(const std::string &name) {
  if (name == "per_batch") return RelabelGranularity::kPerBatch;
  if (name == "per_epoch") return RelabelGranularity::kPerEpoch;
  throw ConfigError("relabel", "unknown granularity '" + name + "'");
}

void TrainerConfig::validate() const {
  if (pretrain_epochs < 1) throw ConfigError("pretrain_epochs", "must be at least 1");
  if (max_epochs < 0) throw ConfigError("max_epochs", "must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate", "must be positive");
  }
  auto nested = [](const std::string &prefix, auto &&check) {
    try {
      check();
    } catch (const ConfigError &e) {
      throw ConfigError(prefix + "." + e.field(), e.message());
    }
  };
  nested("selection", [&] { selection.validate(); });
  nested("distill", [&] { distill.validate(2); });
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    nested("ensemble." + std::to_string(i), [&] { ensemble[i].validate(); });
  }
  if (!use_ce && distill.weighting == KdWeighting::kOff) {
    throw ConfigError("use_ce", "student loss needs cross-entropy or distillation");
  }
}

EncodedCorpus encode_corpus(const Dataset &train, const Dataset &dev, const Dataset &test,
                            const TokenVocab &tokens) {
  if (!(train.vocab() == dev.vocab()) || !(train.vocab() == test.vocab())) {
    throw SchemaError("splits use different tag sets");
  }
  EncodedCorpus c;
  c.vocab = train.vocab_ptr();
  c.train = {tokens.encode(train), train.tag_sequences()};
  c.dev = {tokens.encode(dev), dev.tag_sequences()};
  c.test = {tokens.encode(test), test.tag_sequences()};
  bool has_gold = true;
  for (const auto &s : train.sentences()) has_gold = has_gold && s.gold_tags.has_value();
  if (has_gold) c.train_gold = train.gold_sequences();
  return c;
}

Trainer::Trainer(TrainerConfig config, std::array<TaggerConfig, 2> archs)
    : config_(std::move(config)), taggers_{Tagger(archs[0]), Tagger(archs[1])} {
  config_.validate();
  if (archs[0].tag_count != archs[1].tag_count ||
      archs[0].token_vocab_size != archs[1].token_vocab_size) {
    throw ConfigError("tagger", "both architectures must share token and tag vocabularies");
  }
}

std::vector<std::vector<std::size_t>> Trainer::epoch_batches(std::size_t n, Rng &rng) const {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  const auto size = static_cast<std::size_t>(config_.batch_size);
  for (std::size_t i = 0; i < n; i += size) {
    batches.emplace_back(order.begin() + i, order.begin() + std::min(n, i + size));
  }
  return batches;
}

double Trainer::batch_gradient(int pair, const ParamSet &params, const EncodedSet &data,
                               std::span<const std::size_t> batch,
                               const std::vector<LossSpec> &specs, ParamSet &grad) const {
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    loss += taggers_[pair].accumulate_grad(params, data.ids[batch[b]], specs[b], grad);
  }
  return loss;
}

void Trainer::gradient_step(ParamSet &params, const ParamSet &grad) const {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config_.learning_rate * grad[i];
}

PretrainResult Trainer::pretrain(const EncodedSet &distant, const EncodedSet *dev,
                                 const TagVocab *vocab) const {
  if (distant.size() == 0) throw InputError("empty training set");
  const bool select = config_.pretrain_dev_select && dev != nullptr && vocab != nullptr;
  PretrainResult result;
  std::array<ParamSet, 2> models = {taggers_[0].init(), taggers_[1].init()};
  std::array<ParamSet, 2> chosen = models;
  std::array<double, 2> best_f1 = {-1.0, -1.0};
  Rng rng(derive_seed(config_.data_seed, "pretrain"));
  for (int epoch = 1; epoch <= config_.pretrain_epochs; ++epoch) {
    const auto batches = epoch_batches(distant.size(), rng);
    std::array<double, 2> total = {0.0, 0.0};
    for (const auto &batch : batches) {
      std::vector<LossSpec> specs(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) {
        specs[b].ce = CeTerm{distant.tags[batch[b]], {}, 1.0};
        specs[b].scale = 1.0 / static_cast<double>(batch.size());
      }
      for (int p = 0; p < 2; ++p) {
        ParamSet grad = models[p].zeros_like();
        total[p] += batch_gradient(p, models[p], distant, batch, specs, grad) *
                    static_cast<double>(batch.size());
        gradient_step(models[p], grad);
      }
    }
    for (int p = 0; p < 2; ++p) {
      result.epoch_losses[p].push_back(total[p] / static_cast<double>(distant.size()));
      if (dev != nullptr && vocab != nullptr) {
        result.dev_f1[p].push_back(evaluate(p, models[p], *dev, *vocab).f1);
      }
      if (!select || result.dev_f1[p].back() > best_f1[p]) {
        if (select) best_f1[p] = result.dev_f1[p].back();
        chosen[p] = models[p];
        result.chosen_epoch[p] = epoch;
      }
    }
  }
  for (int p = 0; p < 2; ++p) {
    result.pairs[p] = {chosen[p], chosen[p], taggers_[p].config()};
  }
  return result;
}

StepLog Trainer::self_train_step(PairArray &pairs, const EncodedSet &train,
                                 std::span<const std::size_t> batch,
                                 std::array<Rng, 2> &rngs) const {
  StepLog log;
  const std::size_t n_batch = batch.size();
  if (n_batch == 0) return log;
  const DistillConfig &kd = config_.distill;
  const double inv_batch = 1.0 / static_cast<double>(n_batch);

  // Teacher pseudo-labels and logits.
  std::array<std::vector<Matrix>, 2> teacher_logits;
  std::array<std::vector<Prediction>, 2> teacher_pred;
  for (int p = 0; p < 2; ++p) {
    for (std::size_t i : batch) {
      teacher_logits[p].push_back(taggers_[p].forward(pairs[p].teacher, train.ids[i]).logits);
      teacher_pred[p].push_back(predict_from_logits(teacher_logits[p].back()));
      if (p == 0) log.tokens += train.ids[i].size();
    }
  }

  for (int p = 0; p < 2; ++p) {
    const Tagger &tagger = taggers_[p];
    TeacherStudentPair &pair = pairs[p];
    PairStepLog &plog = log.pairs[p];

    std::vector<ReliableLabels> reliable;
    std::vector<ForwardTrace> traces;
    for (std::size_t b = 0; b < n_batch; ++b) {
      reliable.push_back(
          select_reliable(teacher_pred[p][b], teacher_pred[1 - p][b], config_.selection));
      plog.kept += reliable.back().kept;
      plog.demoted += reliable.back().demoted;
      for (bool m : reliable.back().mask) plog.supervised += (m && config_.use_ce) ? 1 : 0;
      traces.push_back(tagger.forward(pair.student, train.ids[batch[b]]));
    }

    double alpha = kd.fixed_alpha;
    if (kd.weighting == KdWeighting::kAdaptive) {
      std::vector<std::vector<double>> feature_grads(2);
      for (std::size_t b = 0; b < n_batch; ++b) {
        for (int m = 0; m < 2; ++m) {
          Matrix g = tagger.feature_grad_of_kd(pair.student, traces[b], teacher_logits[m][b],
                                               kd.temperature);
          feature_grads[m].insert(feature_grads[m].end(), g.data().begin(), g.data().end());
        }
      }
      MinNormSolution sol = min_norm_weights(feature_grads, kd.c, kd.solver);
      alpha = sol.alphas[0];
      plog.min_norm_objective = sol.objective;
    }
    plog.alpha = alpha;

    std::vector<LossSpec> specs(n_batch);
    std::vector<double> logp(tagger.config().tag_count);
    for (std::size_t b = 0; b < n_batch; ++b) {
      LossSpec &spec = specs[b];
      spec.scale = inv_batch;
      const Matrix &logits = traces[b].logits;
      if (config_.use_ce) {
        spec.ce = CeTerm{reliable[b].tags, reliable[b].mask, 1.0};
        double ce = 0.0;
        for (std::size_t j = 0; j < logits.rows(); ++j) {
          if (!reliable[b].mask[j]) continue;
          log_softmax(logits.row(j), 1.0, logp);
          ce -= logp[reliable[b].tags[j]];
        }
        if (logits.rows() > 0) plog.ce_loss += inv_batch * ce / static_cast<double>(logits.rows());
      }
      if (kd.weighting != KdWeighting::kOff) {
        spec.kd.push_back({teacher_logits[0][b], kd.temperature, alpha});
        spec.kd.push_back({teacher_logits[1][b], kd.temperature, 1.0 - alpha});
        plog.kd1_loss += inv_batch * kd_loss(logits, teacher_logits[0][b], kd.temperature);
        plog.kd2_loss += inv_batch * kd_loss(logits, teacher_logits[1][b], kd.temperature);
      }
    }
    plog.total_loss = kd.weighting == KdWeighting::kOff
                          ? plog.ce_loss
                          : total_student_loss(plog.ce_loss, plog.kd1_loss, plog.kd2_loss, alpha);

    ParamSet grad = pair.student.zeros_like();
    batch_gradient(p, pair.student, train, batch, specs, grad);
    gradient_step(pair.student, grad);
  }

  for (int p = 0; p < 2; ++p) {
    pairs[p].teacher =
        fine_grained_update(pairs[p].teacher, pairs[p].student, config_.ensemble[p], rngs[p]);
  }
  return log;
}

std::vector<TagSeq> Trainer::predict_all(int pair, const ParamSet &params,
                                         const EncodedSet &data) const {
  std::vector<TagSeq> out;
  out.reserve(data.size());
  for (const auto &ids : data.ids) out.push_back(taggers_[pair].predict(params, ids).tags);
  return out;
}

EntityMetrics Trainer::evaluate(int pair, const ParamSet &params, const EncodedSet &data,
                                const TagVocab &vocab) const {
  const auto pred = predict_all(pair, params, data);
  return entity_prf(pred, data.tags, vocab);
}

LabelState Trainer::mutual_relabel(const PairArray &pairs, const EncodedSet &train) const {
  LabelState state;
  state.labels[0] = predict_all(1, pairs[1].teacher, train);
  state.labels[1] = predict_all(0, pairs[0].teacher, train);
  return state;
}

RunRecord Trainer::run(const EncodedCorpus &corpus) const {
  RunRecord rec;
  rec.seeds["data"] = config_.data_seed;
  rec.seeds["ensemble1"] = config_.ensemble[0].rng_seed;
  rec.seeds["ensemble2"] = config_.ensemble[1].rng_seed;
  rec.seeds["init1"] = taggers_[0].config().init_seed;
  rec.seeds["init2"] = taggers_[1].config().init_seed;
  try {
    if (!corpus.vocab) throw InputError("corpus without tag vocabulary");
    if (corpus.dev.size() == 0 || corpus.test.size() == 0) {
      throw InputError("dev and test sets must not be empty");
    }
    const TagVocab &vocab = *corpus.vocab;
    PretrainResult pre = pretrain(corpus.train, &corpus.dev, &vocab);
    rec.pretrain_epoch = pre.chosen_epoch;
    PairArray pairs = std::move(pre.pairs);
    LabelState labels{{corpus.train.tags, corpus.train.tags}};
    std::array<Rng, 2> rngs = {Rng(config_.ensemble[0].rng_seed),
                               Rng(config_.ensemble[1].rng_seed)};
    Rng data_rng(derive_seed(config_.data_seed, "self-train"));

    auto model_params = [&](const PairArray &ps, int model) -> const ParamSet & {
      return model % 2 == 0 ? ps[model / 2].teacher : ps[model / 2].student;
    };
    auto record_epoch = [&](int epoch, std::array<double, 2> mean_alpha, std::size_t steps) {
      EpochRecord er;
      er.epoch = epoch;
      er.mean_alpha = mean_alpha;
      er.steps = steps;
      for (int model = 0; model < 4; ++model) {
        er.dev[model] = evaluate(model / 2, model_params(pairs, model), corpus.dev, vocab);
        if (rec.best_epoch < 0 || er.dev[model].f1 > rec.best_dev_f1) {
          rec.best_epoch = epoch;
          rec.best_model = kModelNames[model];
          rec.best_dev_f1 = er.dev[model].f1;
          rec.best = Checkpoint{taggers_[model / 2].config(), model_params(pairs, model)};
        }
      }
      if (corpus.train_gold) {
        er.label_f1 = std::array<double, 2>{};
        for (int p = 0; p < 2; ++p) {
          (*er.label_f1)[p] = entity_prf(labels.labels[p], *corpus.train_gold, vocab).f1;
        }
      }
      rec.epochs.push_back(std::move(er));
    };

    record_epoch(0, {0.5, 0.5}, 0);
    for (int epoch = 1; epoch <= config_.max_epochs; ++epoch) {
      std::array<double, 2> alpha_sum = {0.0, 0.0};
      std::size_t steps = 0;
      for (const auto &batch : epoch_batches(corpus.train.size(), data_rng)) {
        StepLog log = self_train_step(pairs, corpus.train, batch, rngs);
        for (int p = 0; p < 2; ++p) alpha_sum[p] += log.pairs[p].alpha;
        ++steps;
        if (config_.relabel == RelabelGranularity::kPerBatch) {
          labels = mutual_relabel(pairs, corpus.train);
        }
      }
      if (config_.relabel == RelabelGranularity::kPerEpoch) {
        labels = mutual_relabel(pairs, corpus.train);
      }
      const double denom = steps > 0 ? static_cast<double>(steps) : 1.0;
      record_epoch(epoch, {alpha_sum[0] / denom, alpha_sum[1] / denom}, steps);
    }

    const int best_pair = rec.best->config == taggers_[0].config() ? 0 : 1;
    rec.test = evaluate(best_pair, rec.best->params, corpus.test, vocab);
    rec.final_pairs = std::move(pairs);
    rec.complete = true;
  } catch (const std::exception &e) {
    rec.complete = false;
    rec.error = e.what();
  }
  return rec;
}

nlohmann::ordered_json to_json(const RunRecord &record) {
  nlohmann::ordered_json j;
  j["complete"] = record.complete;
  if (!record.error.empty()) j["error"] = record.error;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  for (const auto &[name, seed] : record.seeds) seeds[name] = seed;
  j["seeds"] = std::move(seeds);
  j["pretrain_epoch"] = record.pretrain_epoch;
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const auto &e : record.epochs) {
    nlohmann::ordered_json je;
    je["epoch"] = e.epoch;
    je["steps"] = e.steps;
    je["mean_alpha"] = e.mean_alpha;
    nlohmann::ordered_json dev;
    for (int m = 0; m < 4; ++m) dev[kModelNames[m]] = to_json(e.dev[m]);
    je["dev"] = std::move(dev);
    if (e.label_f1) je["label_f1"] = *e.label_f1;
    epochs.push_back(std::move(je));
  }
  j["epochs"] = std::move(epochs);
  j["best"] = {{"model", record.best_model},
               {"epoch", record.best_epoch},
               {"dev_f1", record.best_dev_f1}};
  if (record.complete) j["test"] = to_json(record.test);
  return j;
}

BaselineRecord run_distant_baseline(const TaggerConfig &arch, const EncodedCorpus &corpus,
                                    const TrainerConfig &config, int epochs) {
  if (corpus.train.size() == 0) throw InputError("empty training set");
  if (epochs < 1) throw InputError("baseline needs at least one epoch");
  Tagger tagger(arch);
  ParamSet params = tagger.init();
  Rng rng(derive_seed(config.data_seed, "pretrain"));
  BaselineRecord rec;
  const std::size_t n = corpus.train.size();
  const auto size = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += size) {
      const std::size_t end = std::min(n, start + size);
      ParamSet grad = params.zeros_like();
      for (std::size_t i = start; i < end; ++i) {
        LossSpec spec;
        spec.ce = CeTerm{corpus.train.tags[order[i]], {}, 1.0};
        spec.scale = 1.0 / static_cast<double>(end - start);
        tagger.accumulate_grad(params, corpus.train.ids[order[i]], spec, grad);
      }
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * grad[i];
    }
    std::vector<TagSeq> pred;
    for (const auto &ids : corpus.dev.ids) pred.push_back(tagger.predict(params, ids).tags);
    rec.dev.push_back(entity_prf(pred, corpus.dev.tags, *corpus.vocab));
    if (rec.best_epoch < 0 || rec.dev.back().f1 > rec.dev[rec.best_epoch - 1].f1) {
      rec.best_epoch = epoch;
      rec.best = Checkpoint{arch, params};
    }
  }
  std::vector<TagSeq> pred;
  for (const auto &ids : corpus.test.ids) pred.push_back(tagger.predict(rec.best->params, ids).tags);
  rec.test = entity_prf(pred, corpus.test.tags, *corpus.vocab);
  return rec;
}

}  // namespace atsen

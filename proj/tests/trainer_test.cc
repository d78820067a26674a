#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "atsen/error.h"
#include "atsen/trainer.h"
#include "reference_net.h"

namespace atsen {
namespace {

struct Micro {
  EncodedCorpus corpus;
  std::array<TaggerConfig, 2> archs;
};

Micro micro(int train = 40, std::uint64_t seed = 11) {
  SynthConfig sc;
  sc.train_sentences = train;
  sc.dev_sentences = 12;
  sc.test_sentences = 12;
  sc.entity_types = {"PER", "LOC"};
  sc.surface_forms_per_type = 20;
  sc.entity_words_per_type = 20;
  sc.context_words = 30;
  sc.triggers_per_type = 2;
  SynthCorpus c = synth_corpus(sc, seed);
  Dataset distant = distant_annotate(c.train, c.dictionary);
  TokenVocab tokens = TokenVocab::build(distant);
  Micro m{encode_corpus(distant, c.dev, c.test, tokens), {}};
  for (int p = 0; p < 2; ++p) {
    TaggerConfig &a = m.archs[p];
    a.token_vocab_size = tokens.size();
    a.tag_count = m.corpus.vocab->size();
    a.embed_dim = 4;
    a.hidden_dim = p == 0 ? 6 : 5;
    a.init_seed = 100 + p;
    a.init_scale = 0.3;
  }
  return m;
}

TrainerConfig small_trainer() {
  TrainerConfig t;
  t.pretrain_epochs = 2;
  t.max_epochs = 2;
  t.batch_size = 8;
  t.learning_rate = 0.3;
  t.data_seed = 5;
  t.ensemble[0].rng_seed = 6;
  t.ensemble[1].rng_seed = 7;
  return t;
}

std::array<Rng, 2> rngs_of(const TrainerConfig &t) {
  return {Rng(t.ensemble[0].rng_seed), Rng(t.ensemble[1].rng_seed)};
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

TEST(TrainerConfig, Validation) {
  auto m = micro();
  TrainerConfig t = small_trainer();
  t.pretrain_epochs = 0;
  EXPECT_THROW(Trainer(t, m.archs), ConfigError);
  t = small_trainer();
  t.learning_rate = -1;
  EXPECT_THROW(Trainer(t, m.archs), ConfigError);
  t = small_trainer();
  t.use_ce = false;
  t.distill.weighting = KdWeighting::kOff;
  EXPECT_THROW(Trainer(t, m.archs), ConfigError);
  auto archs = m.archs;
  archs[1].tag_count += 2;
  EXPECT_THROW(Trainer(small_trainer(), archs), ConfigError);
  EXPECT_EQ(parse_relabel("per_batch"), RelabelGranularity::kPerBatch);
  EXPECT_THROW(parse_relabel("never"), ConfigError);
}

TEST(Pretrain, FullBatchLossNonIncreasing) {
  auto m = micro();
  TrainerConfig t = small_trainer();
  t.pretrain_epochs = 8;
  t.batch_size = static_cast<int>(m.corpus.train.size());
  t.learning_rate = 0.1;
  Trainer trainer(t, m.archs);
  PretrainResult r = trainer.pretrain(m.corpus.train);
  for (int p = 0; p < 2; ++p) {
    ASSERT_EQ(r.epoch_losses[p].size(), 8u);
    for (std::size_t e = 1; e < 8; ++e) {
      EXPECT_LE(r.epoch_losses[p][e], r.epoch_losses[p][e - 1] + 1e-6);
    }
  }
}

TEST(Pretrain, TeacherEqualsStudentAndDeterministic) {
  auto m = micro();
  Trainer trainer(small_trainer(), m.archs);
  PretrainResult a = trainer.pretrain(m.corpus.train);
  PretrainResult b = trainer.pretrain(m.corpus.train);
  for (int p = 0; p < 2; ++p) {
    EXPECT_EQ(a.pairs[p].teacher, a.pairs[p].student);
    EXPECT_EQ(a.pairs[p].teacher, b.pairs[p].teacher);
    EXPECT_FALSE(a.pairs[p].teacher == trainer.tagger(p).init());
    EXPECT_EQ(a.chosen_epoch[p], 2);
  }
  EXPECT_THROW(trainer.pretrain(EncodedSet{}), InputError);
}

TEST(Pretrain, DevSelectionPicksBestEpoch) {
  auto m = micro();
  TrainerConfig t = small_trainer();
  t.pretrain_epochs = 5;
  Trainer trainer(t, m.archs);
  PretrainResult r = trainer.pretrain(m.corpus.train, &m.corpus.dev, m.corpus.vocab.get());
  for (int p = 0; p < 2; ++p) {
    const auto &f = r.dev_f1[p];
    ASSERT_EQ(f.size(), 5u);
    int best = static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin()) + 1;
    EXPECT_EQ(r.chosen_epoch[p], best);
    EXPECT_EQ(trainer.evaluate(p, r.pairs[p].teacher, m.corpus.dev, *m.corpus.vocab).f1,
              f[best - 1]);
  }
}

TEST(SelfTrainStep, IdenticalTeachersGiveHalf) {
  auto m = micro();
  auto archs = m.archs;
  archs[1] = archs[0];
  Trainer trainer(small_trainer(), archs);
  ParamSet teacher = trainer.tagger(0).init();
  ParamSet student = teacher;
  Rng r(3);
  for (double &v : student.values()) v += 0.05 * (r.uniform() - 0.5);
  PairArray pairs = {TeacherStudentPair{teacher, student, archs[0]},
                     TeacherStudentPair{teacher, student, archs[1]}};
  auto rngs = rngs_of(trainer.config());
  auto batch = all_indices(8);
  StepLog log = trainer.self_train_step(pairs, m.corpus.train, batch, rngs);
  EXPECT_EQ(log.pairs[0].alpha, 0.5);
  EXPECT_EQ(log.pairs[1].alpha, 0.5);
}

TEST(SelfTrainStep, FullThresholdLeavesOnlyDistillation) {
  auto m = micro();
  TrainerConfig t = small_trainer();
  t.selection.sigma1 = 1.0;
  t.selection.mask_policy = MaskPolicy::kExclude;
  Trainer trainer(t, m.archs);
  PairArray pairs = trainer.pretrain(m.corpus.train).pairs;
  for (auto &p : pairs) {
    for (double &v : p.student.values()) v *= 1.01;
  }
  PairArray kd_only = pairs;
  auto batch = all_indices(8);
  auto rngs = rngs_of(t);
  StepLog log = trainer.self_train_step(pairs, m.corpus.train, batch, rngs);
  EXPECT_EQ(log.pairs[0].supervised, 0u);
  EXPECT_EQ(log.pairs[1].supervised, 0u);
  EXPECT_EQ(log.pairs[0].ce_loss, 0.0);

  TrainerConfig u = t;
  u.use_ce = false;
  Trainer kd_trainer(u, m.archs);
  auto rngs2 = rngs_of(u);
  kd_trainer.self_train_step(kd_only, m.corpus.train, batch, rngs2);
  for (int p = 0; p < 2; ++p) {
    ASSERT_EQ(pairs[p].student.size(), kd_only[p].student.size());
    for (std::size_t i = 0; i < pairs[p].student.size(); ++i) {
      EXPECT_NEAR(pairs[p].student[i], kd_only[p].student[i], 1e-15);
    }
  }
}

TEST(SelfTrainStep, OwnTeacherGetsFullWeightRightAfterPretrain) {
  auto m = micro();
  Trainer trainer(small_trainer(), m.archs);
  PairArray pairs = trainer.pretrain(m.corpus.train).pairs;
  auto rngs = rngs_of(trainer.config());
  StepLog log = trainer.self_train_step(pairs, m.corpus.train, all_indices(8), rngs);
  EXPECT_EQ(log.pairs[0].alpha, 1.0);
  EXPECT_EQ(log.pairs[1].alpha, 0.0);
}

TEST(SelfTrainStep, TeacherMovesOnlyThroughEnsemble) {
  auto m = micro();
  TrainerConfig t = small_trainer();
  t.ensemble[0].sigma2 = 1.0;  // keep every unit
  t.ensemble[1].sigma2 = 0.0;
  t.ensemble[1].m = 0.0;  // copy the student
  Trainer trainer(t, m.archs);
  PairArray pairs = trainer.pretrain(m.corpus.train).pairs;
  PairArray before = pairs;
  auto rngs = rngs_of(t);
  trainer.self_train_step(pairs, m.corpus.train, all_indices(8), rngs);
  EXPECT_EQ(pairs[0].teacher, before[0].teacher);
  EXPECT_FALSE(pairs[0].student == before[0].student);
  EXPECT_EQ(pairs[1].teacher, pairs[1].student);
  EXPECT_FALSE(pairs[1].student == before[1].student);
}

// One step replayed with the reference network and hand-written selection,
// closed-form weights, gradient step and fine-grained update.
TEST(SelfTrainStep, HandReplay) {
  auto m = micro(4, 13);
  ASSERT_EQ(m.corpus.train.size(), 4u);
  TrainerConfig t = small_trainer();
  t.batch_size = 4;
  t.learning_rate = 0.7;
  t.selection.sigma1 = 0.3;
  t.selection.mask_policy = MaskPolicy::kExclude;
  t.distill.temperature = 1.5;
  for (int p = 0; p < 2; ++p) {
    t.ensemble[p].m = 0.9;
    t.ensemble[p].sigma2 = 0.5;
  }
  Trainer trainer(t, m.archs);
  PairArray pairs;
  Rng noise(17);
  for (int p = 0; p < 2; ++p) {
    ParamSet teacher = trainer.tagger(p).init();
    for (double &v : teacher.values()) v *= 4.0;
    ParamSet student = teacher;
    for (double &v : student.values()) v += 0.2 * (noise.uniform() - 0.5);
    pairs[p] = {teacher, student, m.archs[p]};
  }
  const PairArray start = pairs;
  auto batch = all_indices(4);
  auto rngs = rngs_of(t);
  StepLog log = trainer.self_train_step(pairs, m.corpus.train, batch, rngs);

  const auto &ids = m.corpus.train.ids;
  std::array<ref::Net, 2> teachers, students;
  for (int p = 0; p < 2; ++p) {
    teachers[p] = ref::unpack(m.archs[p], start[p].teacher);
    students[p] = ref::unpack(m.archs[p], start[p].student);
  }
  // Teacher logits, argmax and confidence.
  std::array<std::vector<ref::Mat>, 2> tl;
  std::array<std::vector<std::vector<int>>, 2> tag;
  std::array<std::vector<std::vector<double>>, 2> conf;
  for (int p = 0; p < 2; ++p) {
    for (std::size_t b = 0; b < 4; ++b) {
      ref::Mat a = ref::forward(teachers[p], ids[b]).a;
      tl[p].push_back(a);
      std::vector<int> tg;
      std::vector<double> cf;
      for (const auto &row : a) {
        int best = 0;
        for (int c = 1; c < static_cast<int>(row.size()); ++c) best = row[c] > row[best] ? c : best;
        tg.push_back(best);
        cf.push_back(ref::probs(row, 1.0)[best]);
      }
      tag[p].push_back(tg);
      conf[p].push_back(cf);
    }
  }
  for (int p = 0; p < 2; ++p) {
    // closed-form min-norm weight over concatenated feature gradients
    std::vector<double> g1, g2;
    for (std::size_t b = 0; b < 4; ++b) {
      for (auto &row : ref::kd_feature_grad(students[p], ids[b], tl[0][b], 1.5)) g1.insert(g1.end(), row.begin(), row.end());
      for (auto &row : ref::kd_feature_grad(students[p], ids[b], tl[1][b], 1.5)) g2.insert(g2.end(), row.begin(), row.end());
    }
    double num = 0, den = 0;
    for (std::size_t i = 0; i < g1.size(); ++i) {
      num += (g2[i] - g1[i]) * g2[i];
      den += (g1[i] - g2[i]) * (g1[i] - g2[i]);
    }
    double alpha = den == 0 ? 0.5 : std::clamp(num / den, 0.0, 1.0);
    EXPECT_NEAR(log.pairs[p].alpha, alpha, 1e-12);

    std::vector<double> grad(start[p].student.size(), 0.0);
    std::size_t supervised = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      ref::Spec s;
      s.ce = true;
      for (std::size_t j = 0; j < ids[b].size(); ++j) {
        bool agree = tag[0][b][j] == tag[1][b][j];
        double c = std::min(conf[0][b][j], conf[1][b][j]);
        bool keep = agree && c > 0.3;
        s.targets.push_back(keep ? tag[p][b][j] : 0);
        s.mask.push_back(keep);
        supervised += keep;
      }
      s.kd = {{tl[0][b], 1.5, alpha}, {tl[1][b], 1.5, 1 - alpha}};
      s.scale = 0.25;
      ref::Vec g;
      ref::loss_and_grad(students[p], ids[b], s, g);
      for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    }
    EXPECT_EQ(log.pairs[p].supervised, supervised);
    std::vector<double> new_student(start[p].student.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      new_student[i] = start[p].student[i] - 0.7 * grad[i];
      EXPECT_NEAR(pairs[p].student[i], new_student[i], 1e-12);
    }
    // fine-grained update: one draw per unit, keep teacher below sigma2
    Rng draws(t.ensemble[p].rng_seed);
    for (const auto &unit : start[p].teacher.units()) {
      const double d = draws.uniform();
      auto span = start[p].teacher.unit(unit);
      const std::size_t off = static_cast<std::size_t>(span.data() - start[p].teacher.values().data());
      for (std::size_t i = off; i < off + span.size(); ++i) {
        double want = d < 0.5 ? start[p].teacher[i] : 0.9 * start[p].teacher[i] + 0.1 * new_student[i];
        EXPECT_NEAR(pairs[p].teacher[i], want, 1e-12);
      }
    }
  }
}

TEST(MutualRelabel, CrossWiring) {
  auto m = micro();
  Trainer trainer(small_trainer(), m.archs);
  PairArray pairs = trainer.pretrain(m.corpus.train).pairs;
  LabelState s = trainer.mutual_relabel(pairs, m.corpus.train);
  EXPECT_EQ(s.labels[0], trainer.predict_all(1, pairs[1].teacher, m.corpus.train));
  EXPECT_EQ(s.labels[1], trainer.predict_all(0, pairs[0].teacher, m.corpus.train));
  for (int p = 0; p < 2; ++p) {
    ASSERT_EQ(s.labels[p].size(), m.corpus.train.size());
    for (std::size_t i = 0; i < s.labels[p].size(); ++i) {
      ASSERT_EQ(s.labels[p][i].size(), m.corpus.train.ids[i].size());
      for (int tag : s.labels[p][i]) EXPECT_TRUE(m.corpus.vocab->contains(tag));
    }
  }
  PairArray mutated = pairs;
  for (double &v : mutated[0].teacher.values()) v = -v;
  LabelState after = trainer.mutual_relabel(mutated, m.corpus.train);
  EXPECT_EQ(after.labels[0], s.labels[0]);
}

TEST(MutualRelabel, IdenticalTeachersAgree) {
  auto m = micro();
  auto archs = m.archs;
  archs[1] = archs[0];
  Trainer trainer(small_trainer(), archs);
  ParamSet t = trainer.tagger(0).init();
  PairArray pairs = {TeacherStudentPair{t, t, archs[0]}, TeacherStudentPair{t, t, archs[1]}};
  LabelState s = trainer.mutual_relabel(pairs, m.corpus.train);
  EXPECT_EQ(s.labels[0], s.labels[1]);
}

TEST(Run, ZeroEpochsIsPretrainOnly) {
  auto m = micro();
  TrainerConfig t = small_trainer();
  t.max_epochs = 0;
  Trainer trainer(t, m.archs);
  RunRecord r = trainer.run(m.corpus);
  ASSERT_TRUE(r.complete) << r.error;
  ASSERT_EQ(r.epochs.size(), 1u);
  EXPECT_EQ(r.best_epoch, 0);
  EXPECT_NE(std::find(kModelNames.begin(), kModelNames.end(), r.best_model), kModelNames.end());
  EXPECT_TRUE(r.best.has_value());
  auto j = to_json(r);
  EXPECT_EQ(j["epochs"].size(), 1u);
  EXPECT_TRUE(j.contains("test"));
}

TEST(Run, DeterministicAndShaped) {
  auto m = micro();
  TrainerConfig t = small_trainer();
  t.relabel = RelabelGranularity::kPerBatch;
  Trainer trainer(t, m.archs);
  RunRecord a = trainer.run(m.corpus);
  RunRecord b = trainer.run(m.corpus);
  ASSERT_TRUE(a.complete) << a.error;
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(a.best->params, b.best->params);
  ASSERT_EQ(a.epochs.size(), 3u);
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    EXPECT_EQ(a.epochs[e].epoch, static_cast<int>(e));
    EXPECT_TRUE(a.epochs[e].label_f1.has_value());
  }
  EXPECT_EQ(a.epochs[1].steps, 5u);
  // best is the maximum over all recorded dev scores
  double best = -1;
  for (const auto &e : a.epochs) {
    for (const auto &d : e.dev) best = std::max(best, d.f1);
  }
  EXPECT_EQ(a.best_dev_f1, best);
  EXPECT_EQ(a.seeds.at("data"), 5u);
  EXPECT_EQ(a.seeds.at("ensemble2"), 7u);
}

TEST(Run, ErrorsGiveIncompleteRecord) {
  auto m = micro();
  m.corpus.dev = EncodedSet{};
  Trainer trainer(small_trainer(), m.archs);
  RunRecord r = trainer.run(m.corpus);
  EXPECT_FALSE(r.complete);
  EXPECT_FALSE(r.error.empty());
  auto j = to_json(r);
  EXPECT_EQ(j["complete"], false);
  EXPECT_FALSE(j.contains("test"));
}

TEST(Run, PlainSelfTrainingConfiguration) {
  auto m = micro();
  TrainerConfig t = small_trainer();
  t.selection.sigma1 = 0.0;
  t.selection.consistency = false;
  t.distill.weighting = KdWeighting::kFixed;
  t.distill.fixed_alpha = 0.5;
  for (auto &e : t.ensemble) {
    e.sigma2 = 0.0;
    e.m = 0.0;
  }
  Trainer trainer(t, m.archs);
  RunRecord r = trainer.run(m.corpus);
  ASSERT_TRUE(r.complete) << r.error;
  for (const auto &p : *r.final_pairs) EXPECT_EQ(p.teacher, p.student);
  for (const auto &e : r.epochs) EXPECT_EQ(e.mean_alpha[0], 0.5);
}

TEST(Baseline, FollowsPretrainTrajectory) {
  auto m = micro();
  TrainerConfig t = small_trainer();
  t.pretrain_epochs = 4;
  Trainer trainer(t, m.archs);
  PretrainResult pre = trainer.pretrain(m.corpus.train, &m.corpus.dev, m.corpus.vocab.get());
  BaselineRecord b = run_distant_baseline(m.archs[0], m.corpus, t, 6);
  ASSERT_EQ(b.dev.size(), 6u);
  for (int e = 0; e < 4; ++e) EXPECT_EQ(b.dev[e].f1, pre.dev_f1[0][e]);
  double best = 0;
  for (const auto &d : b.dev) best = std::max(best, d.f1);
  EXPECT_EQ(b.dev[b.best_epoch - 1].f1, best);
  EXPECT_THROW(run_distant_baseline(m.archs[0], m.corpus, t, 0), InputError);
}

}  // namespace
}  // namespace atsen

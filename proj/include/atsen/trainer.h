#ifndef ATSEN_TRAINER_H_
#define ATSEN_TRAINER_H_

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atsen/corpus.h"
#include "atsen/distillation.h"
#include "atsen/ensemble.h"
#include "atsen/metrics.h"
#include "atsen/selection.h"
#include "atsen/tagger.h"
#include "json.hpp"

namespace atsen {

enum class RelabelGranularity { kPerBatch, kPerEpoch };
const char *to_string(RelabelGranularity g);
RelabelGranularity parse_relabel(const std::string &name);

struct TrainerConfig {
  int pretrain_epochs = 3;
  // Keep each pretrained model's dev-best epoch instead of its last one.
  bool pretrain_dev_select = true;
  int max_epochs = 10;
  int batch_size = 16;
  double learning_rate = 0.5;
  SelectionConfig selection;
  DistillConfig distill;
  // One per teacher-student pair.
  std::array<EnsembleConfig, 2> ensemble;
  // Cross-entropy on reliable labels in the student loss.
  bool use_ce = true;
  RelabelGranularity relabel = RelabelGranularity::kPerEpoch;
  std::uint64_t data_seed = 0;

  void validate() const;
};

// Token ids plus one tag sequence per sentence.
struct EncodedSet {
  std::vector<std::vector<int>> ids;
  std::vector<TagSeq> tags;
  std::size_t size() const { return ids.size(); }
};

// Train tags are the distant labels; dev and test tags are gold.
struct EncodedCorpus {
  std::shared_ptr<const TagVocab> vocab;
  EncodedSet train;
  EncodedSet dev;
  EncodedSet test;
  // Gold tags of the training set, when known. Only used for reporting.
  std::optional<std::vector<TagSeq>> train_gold;
};

EncodedCorpus encode_corpus(const Dataset &train, const Dataset &dev, const Dataset &test,
                            const TokenVocab &tokens);

struct TeacherStudentPair {
  ParamSet teacher;
  ParamSet student;
  TaggerConfig arch;
};
using PairArray = std::array<TeacherStudentPair, 2>;

// Working label sets Y_I and Y_II, one per pair.
struct LabelState {
  std::array<std::vector<TagSeq>, 2> labels;
};

struct PretrainResult {
  PairArray pairs;
  // Mean training loss of each epoch, per model.
  std::array<std::vector<double>, 2> epoch_losses;
  // Dev F1 after each epoch, when a dev set was given.
  std::array<std::vector<double>, 2> dev_f1;
  // 1-based epoch each model was taken from.
  std::array<int, 2> chosen_epoch = {0, 0};
};

struct PairStepLog {
  double alpha = 0.5;  // weight of teacher 1's distillation term
  double min_norm_objective = 0.0;
  double ce_loss = 0.0;
  double kd1_loss = 0.0;
  double kd2_loss = 0.0;
  double total_loss = 0.0;
  std::size_t kept = 0;
  std::size_t demoted = 0;
  std::size_t supervised = 0;
};

struct StepLog {
  std::array<PairStepLog, 2> pairs;
  std::size_t tokens = 0;
};

inline constexpr std::array<const char *, 4> kModelNames = {"teacher1", "student1", "teacher2",
                                                            "student2"};

struct EpochRecord {
  int epoch = 0;
  std::array<EntityMetrics, 4> dev;  // in kModelNames order
  std::array<double, 2> mean_alpha = {0.5, 0.5};
  std::size_t steps = 0;
  // Span F1 of Y_I / Y_II against train gold, when gold is known.
  std::optional<std::array<double, 2>> label_f1;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  std::string best_model;
  int best_epoch = -1;
  double best_dev_f1 = 0.0;
  EntityMetrics test;
  std::map<std::string, std::uint64_t> seeds;
  std::array<int, 2> pretrain_epoch = {0, 0};
  bool complete = false;
  std::string error;

  // Not serialized.
  std::optional<Checkpoint> best;
  std::optional<PairArray> final_pairs;
};

nlohmann::ordered_json to_json(const RunRecord &record);

// Same tagger trained on distant labels only, dev-selected per epoch.
struct BaselineRecord {
  std::vector<EntityMetrics> dev;  // one per epoch
  int best_epoch = -1;
  EntityMetrics test;
  std::optional<Checkpoint> best;
};

class Trainer {
 public:
  Trainer(TrainerConfig config, std::array<TaggerConfig, 2> archs);

  const TrainerConfig &config() const { return config_; }
  const Tagger &tagger(int pair) const { return taggers_[pair]; }

  // Minibatch gradient descent on token-averaged cross-entropy against the
  // given labels; each teacher and student start as copies of its model.
  // With `dev` and pretrain_dev_select, each model is taken from its best
  // dev epoch (earliest on ties).
  PretrainResult pretrain(const EncodedSet &distant, const EncodedSet *dev = nullptr,
                          const TagVocab *vocab = nullptr) const;

  // One self-training step on `batch` (indices into `train`): teacher
  // predictions, reliable-label selection, one student gradient step, then
  // the fine-grained teacher update. `rngs` are the per-pair ensemble streams.
  StepLog self_train_step(PairArray &pairs, const EncodedSet &train,
                          std::span<const std::size_t> batch, std::array<Rng, 2> &rngs) const;

  // Y_I <- teacher 2 predictions, Y_II <- teacher 1 predictions.
  LabelState mutual_relabel(const PairArray &pairs, const EncodedSet &train) const;

  // Pretraining, the self-training loop, best-of-four dev selection and a
  // single test evaluation. Errors produce an incomplete record.
  RunRecord run(const EncodedCorpus &corpus) const;

  std::vector<TagSeq> predict_all(int pair, const ParamSet &params,
                                  const EncodedSet &data) const;
  EntityMetrics evaluate(int pair, const ParamSet &params, const EncodedSet &data,
                         const TagVocab &vocab) const;

 private:
  // Sum of per-sentence gradients scaled by 1/batch; returns the mean loss.
  double batch_gradient(int pair, const ParamSet &params, const EncodedSet &data,
                        std::span<const std::size_t> batch,
                        const std::vector<LossSpec> &specs, ParamSet &grad) const;
  void gradient_step(ParamSet &params, const ParamSet &grad) const;
  std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, Rng &rng) const;

  TrainerConfig config_;
  std::array<Tagger, 2> taggers_;
};

BaselineRecord run_distant_baseline(const TaggerConfig &arch, const EncodedCorpus &corpus,
                                    const TrainerConfig &config, int epochs);

}  // namespace atsen

#endif  // ATSEN_TRAINER_H_

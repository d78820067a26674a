#ifndef ATSEN_TAGGER_H_
#define ATSEN_TAGGER_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "atsen/matrix.h"
#include "atsen/param_set.h"
#include "atsen/tags.h"

namespace atsen {

struct TaggerConfig {
  int token_vocab_size = 2;
  int embed_dim = 16;
  int hidden_dim = 32;
  int tag_count = 9;
  // Tokens on each side fed to the hidden layer alongside the center token.
  int context_radius = 1;
  std::uint64_t init_seed = 1;
  double init_scale = 0.1;

  void validate() const;
  int window() const { return 2 * context_radius + 1; }
  int input_dim() const { return window() * embed_dim; }
  bool operator==(const TaggerConfig &) const = default;
};

struct ForwardTrace {
  std::vector<int> ids;
  Matrix inputs;  // N x input_dim, concatenated window embeddings
  Matrix z;       // N x hidden_dim, tanh features shared by all heads
  Matrix logits;  // N x tag_count
};

struct CeTerm {
  TagSeq targets;
  // Tokens with mask false carry no cross-entropy loss. Empty means all.
  std::vector<bool> mask;
  double weight = 1.0;
};

struct KdTerm {
  Matrix teacher_logits;
  double temperature = 1.0;
  double weight = 1.0;
};

// Per-sentence composite loss
//   scale * (ce.weight * CE + sum_k kd[k].weight * KD_k)
// where CE sums masked token cross-entropies over N (all tokens) and each
// KD term is the token-mean distillation loss.
struct LossSpec {
  std::optional<CeTerm> ce;
  std::vector<KdTerm> kd;
  double scale = 1.0;
};

struct LossAndGrad {
  double loss = 0.0;
  ParamSet grad;
};

struct Prediction {
  TagSeq tags;
  std::vector<double> confidences;
};

// Embedding -> tanh hidden layer over a token window -> linear tag head.
// Parameter units are "embedding", "hidden" and "output".
class Tagger {
 public:
  explicit Tagger(TaggerConfig config);

  const TaggerConfig &config() const { return config_; }

  // Zero-valued parameters with this architecture's layout.
  ParamSet layout() const;
  // Uniform in [-init_scale, init_scale], deterministic in init_seed.
  ParamSet init() const;

  ForwardTrace forward(const ParamSet &params, std::span<const int> ids) const;
  LossAndGrad loss_and_grad(const ParamSet &params, std::span<const int> ids,
                            const LossSpec &spec) const;
  // Adds scale * gradient into `grad` and returns the loss.
  double accumulate_grad(const ParamSet &params, std::span<const int> ids, const LossSpec &spec,
                         ParamSet &grad) const;
  // Gradient of the token-mean distillation loss with respect to z.
  Matrix feature_grad_of_kd(const ParamSet &params, std::span<const int> ids,
                            const Matrix &teacher_logits, double temperature) const;
  Matrix feature_grad_of_kd(const ParamSet &params, const ForwardTrace &trace,
                            const Matrix &teacher_logits, double temperature) const;
  Prediction predict(const ParamSet &params, std::span<const int> ids) const;

 private:
  void check(const ParamSet &params) const;

  TaggerConfig config_;
};

// Argmax (lowest index on ties) and max softmax probability of each row.
Prediction predict_from_logits(const Matrix &logits);

// Binary checkpoint: magic, TaggerConfig, then per fragment its name,
// unit, length and raw little-endian float64 values.
void write_checkpoint(std::ostream &out, const TaggerConfig &config, const ParamSet &params);
struct Checkpoint {
  TaggerConfig config;
  ParamSet params;
};
// Validates fragment shapes against the stored config.
Checkpoint read_checkpoint(std::istream &in);

}  // namespace atsen

#endif  // ATSEN_TAGGER_H_

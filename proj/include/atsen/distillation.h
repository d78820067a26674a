#ifndef ATSEN_DISTILLATION_H_
#define ATSEN_DISTILLATION_H_

#include <span>
#include <string>
#include <vector>

#include "atsen/matrix.h"

namespace atsen {

enum class MinNormSolver { kClosedForm2, kFrankWolfe };

// How the two distillation terms are weighted in the student loss.
enum class KdWeighting {
  kAdaptive,  // alpha from the min-norm problem each step
  kFixed,     // alpha = fixed_alpha
  kOff,       // no distillation term
};

struct DistillConfig {
  double temperature = 1.0;
  // Upper bound on each teacher weight.
  double c = 1.0;
  MinNormSolver solver = MinNormSolver::kClosedForm2;
  KdWeighting weighting = KdWeighting::kAdaptive;
  // Weight of teacher 1 under kFixed.
  double fixed_alpha = 0.5;

  // `teachers` is the number of distillation terms (C >= 1 / teachers).
  void validate(int teachers = 2) const;
};

const char *to_string(MinNormSolver s);
const char *to_string(KdWeighting w);
MinNormSolver parse_solver(const std::string &name);
KdWeighting parse_weighting(const std::string &name);

// softmax(logits / T). Throws InputError for T <= 0.
std::vector<double> soften(std::span<const double> logits, double temperature);

// Mean over tokens of -<softmax(t/T), log softmax(s/T)>.
double kd_loss(const Matrix &student_logits, const Matrix &teacher_logits, double temperature);

// d kd_loss / d student_logits: row j is (p_s - p_t) / (T N).
Matrix kd_logit_grad(const Matrix &student_logits, const Matrix &teacher_logits,
                     double temperature);

struct MinNormSolution {
  std::vector<double> alphas;
  // 0.5 * ||sum_m alpha_m g_m||^2 at the returned weights.
  double objective = 0.0;
  int iterations = 0;
};

// Solves min 0.5 ||sum alpha_m g_m||^2 s.t. sum alpha_m = 1, 0 <= alpha_m <= c.
// kClosedForm2 is exact for two vectors; other cases run pairwise
// Frank-Wolfe to a duality gap of 1e-9 (relative to the largest squared
// norm). Identical inputs yield the uniform weights.
MinNormSolution min_norm_weights(std::span<const std::vector<double>> grads, double c = 1.0,
                                 MinNormSolver solver = MinNormSolver::kClosedForm2);

// ce + alpha kd1 + (1 - alpha) kd2
double total_student_loss(double ce, double kd1, double kd2, double alpha);

}  // namespace atsen

#endif  // ATSEN_DISTILLATION_H_

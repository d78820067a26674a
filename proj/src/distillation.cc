#include "atsen/distillation.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "atsen/error.h"

namespace atsen {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_temperature(double temperature) {
  if (!(temperature > 0.0)) throw InputError("temperature must be positive");
}

void check_shapes(const Matrix &student, const Matrix &teacher) {
  if (student.rows() != teacher.rows() || student.cols() != teacher.cols()) {
    throw InputError("student and teacher logits differ in shape");
  }
}

double half_squared_norm(std::span<const std::vector<double>> grads,
                         const std::vector<double> &alphas) {
  std::vector<double> combined(grads[0].size(), 0.0);
  for (std::size_t m = 0; m < grads.size(); ++m) {
    for (std::size_t i = 0; i < combined.size(); ++i) combined[i] += alphas[m] * grads[m][i];
  }
  return 0.5 * dot(combined, combined);
}

MinNormSolution closed_form_2(std::span<const std::vector<double>> grads, double c) {
  const auto &g1 = grads[0];
  const auto &g2 = grads[1];
  double diff_sq = 0.0;
  double num = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    const double d = g2[i] - g1[i];
    diff_sq += d * d;
    num += d * g2[i];
  }
  MinNormSolution sol;
  double alpha = 0.5;
  if (diff_sq > 0.0) {
    alpha = std::clamp(num / diff_sq, 0.0, 1.0);
    alpha = std::clamp(alpha, 1.0 - c, c);
  }
  sol.alphas = {alpha, 1.0 - alpha};
  sol.iterations = 1;
  return sol;
}

// Pairwise Frank-Wolfe on the Gram matrix: each step moves mass from the
// active coordinate with the largest gradient to the non-saturated one with
// the smallest, with exact line search.
MinNormSolution frank_wolfe(std::span<const std::vector<double>> grads, double c) {
  const std::size_t m = grads.size();
  std::vector<double> gram(m * m);
  double scale = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      gram[i * m + j] = gram[j * m + i] = dot(grads[i], grads[j]);
    }
    scale = std::max(scale, gram[i * m + i]);
  }
  const double tolerance = 1e-9 * std::max(scale, 1e-300);

  MinNormSolution sol;
  sol.alphas.assign(m, 1.0 / static_cast<double>(m));
  std::vector<double> grad(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) grad[i] += gram[i * m + j] * sol.alphas[j];
  }

  std::vector<std::size_t> order(m);
  constexpr int kMaxIterations = 100000;
  for (sol.iterations = 0; sol.iterations < kMaxIterations; ++sol.iterations) {
    // Duality gap against the linear minimizer over the polytope, which
    // fills the smallest-gradient coordinates up to c.
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return grad[a] < grad[b]; });
    double mass = 1.0, vertex_value = 0.0;
    for (std::size_t k : order) {
      const double take = std::min(c, mass);
      vertex_value += take * grad[k];
      mass -= take;
      if (mass <= 0.0) break;
    }
    const double gap = dot(grad, sol.alphas) - vertex_value;
    if (gap <= tolerance) break;

    std::size_t up = m, down = m;
    for (std::size_t k = 0; k < m; ++k) {
      if (sol.alphas[k] < c && (up == m || grad[k] < grad[up])) up = k;
      if (sol.alphas[k] > 0.0 && (down == m || grad[k] > grad[down])) down = k;
    }
    if (up == m || down == m || up == down || !(grad[down] > grad[up])) break;

    const double max_step = std::min(c - sol.alphas[up], sol.alphas[down]);
    const double curvature = gram[up * m + up] - 2.0 * gram[up * m + down] + gram[down * m + down];
    double step = max_step;
    if (curvature > 0.0) step = std::min(max_step, (grad[down] - grad[up]) / curvature);
    if (!(step > 0.0)) break;
    sol.alphas[up] += step;
    sol.alphas[down] -= step;
    for (std::size_t k = 0; k < m; ++k) {
      grad[k] += step * (gram[k * m + up] - gram[k * m + down]);
    }
  }
  return sol;
}

}  // namespace

void DistillConfig::validate(int teachers) const {
  if (!(temperature > 0.0)) throw ConfigError("temperature", "must be positive");
  if (!(c > 0.0 && c <= 1.0)) throw ConfigError("c", "must be in (0, 1]");
  if (c * teachers < 1.0 - 1e-12) {
    throw ConfigError("c", "must be at least 1/" + std::to_string(teachers));
  }
  if (!(fixed_alpha >= 0.0 && fixed_alpha <= 1.0)) {
    throw ConfigError("fixed_alpha", "must be in [0, 1]");
  }
}

const char *to_string(MinNormSolver s) {
  return s == MinNormSolver::kClosedForm2 ? "closed_form_2" : "frank_wolfe";
}

const char *to_string(KdWeighting w) {
  switch (w) {
    case KdWeighting::kAdaptive: return "adaptive";
    case KdWeighting::kFixed: return "fixed";
    case KdWeighting::kOff: return "off";
  }
  return "?";
}

MinNormSolver parse_solver(const std::string &name) {
  if (name == "closed_form_2") return MinNormSolver::kClosedForm2;
  if (name == "frank_wolfe") return MinNormSolver::kFrankWolfe;
  throw ConfigError("solver", "unknown solver '" + name + "'");
}

KdWeighting parse_weighting(const std::string &name) {
  if (name == "adaptive") return KdWeighting::kAdaptive;
  if (name == "fixed") return KdWeighting::kFixed;
  if (name == "off") return KdWeighting::kOff;
  throw ConfigError("weighting", "unknown weighting '" + name + "'");
}

std::vector<double> soften(std::span<const double> logits, double temperature) {
  check_temperature(temperature);
  if (logits.empty()) throw InputError("empty logits");
  return softmax(logits, temperature);
}

double kd_loss(const Matrix &student_logits, const Matrix &teacher_logits, double temperature) {
  check_temperature(temperature);
  check_shapes(student_logits, teacher_logits);
  const std::size_t n = student_logits.rows(), k = student_logits.cols();
  if (n == 0) return 0.0;
  std::vector<double> pt(k), log_ps(k);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    softmax(teacher_logits.row(j), temperature, pt);
    log_softmax(student_logits.row(j), temperature, log_ps);
    total -= dot(pt, log_ps);
  }
  return total / static_cast<double>(n);
}

Matrix kd_logit_grad(const Matrix &student_logits, const Matrix &teacher_logits,
                     double temperature) {
  check_temperature(temperature);
  check_shapes(student_logits, teacher_logits);
  const std::size_t n = student_logits.rows(), k = student_logits.cols();
  Matrix grad(n, k);
  std::vector<double> ps(k), pt(k);
  const double scale = 1.0 / (temperature * static_cast<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    softmax(student_logits.row(j), temperature, ps);
    softmax(teacher_logits.row(j), temperature, pt);
    for (std::size_t c = 0; c < k; ++c) grad(j, c) = (ps[c] - pt[c]) * scale;
  }
  return grad;
}

MinNormSolution min_norm_weights(std::span<const std::vector<double>> grads, double c,
                                 MinNormSolver solver) {
  const std::size_t m = grads.size();
  if (m < 2) throw InputError("min-norm weights need at least two gradients");
  if (grads[0].empty()) throw InputError("zero-length gradient vectors");
  for (const auto &g : grads) {
    if (g.size() != grads[0].size()) throw InputError("gradient vectors differ in length");
  }
  if (!(c > 0.0) || c * static_cast<double>(m) < 1.0 - 1e-12) {
    throw InputError("weight bound c must be at least 1/M");
  }
  MinNormSolution sol = (solver == MinNormSolver::kClosedForm2 && m == 2) ? closed_form_2(grads, c)
                                                                           : frank_wolfe(grads, c);
  sol.objective = half_squared_norm(grads, sol.alphas);
  return sol;
}

double total_student_loss(double ce, double kd1, double kd2, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("alpha must be in [0, 1]");
  return ce + alpha * kd1 + (1.0 - alpha) * kd2;
}

}  // namespace atsen

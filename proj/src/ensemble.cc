#include "atsen/ensemble.h"

#include "atsen/error.h"

namespace atsen {
namespace {

// Shared by all three rules so the degenerate settings agree bitwise. The
// endpoints return an operand unchanged.
inline double ema_value(double teacher, double student, double m) {
  if (m == 0.0) return student;
  if (m == 1.0) return teacher;
  return m * teacher + (1.0 - m) * student;
}

void check_m(double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw InputError("smoothing coefficient m must be in [0, 1]");
}

void check_sigma2(double sigma2) {
  if (!(sigma2 >= 0.0 && sigma2 <= 1.0)) throw InputError("sigma2 must be in [0, 1]");
}

ParamSet unit_update(const ParamSet &teacher, const ParamSet &student, double m, double sigma2,
                     std::span<const double> draws) {
  teacher.require_same_layout(student);
  const auto units = teacher.units();
  if (draws.size() != units.size()) {
    throw InputError("expected one draw per unit (" + std::to_string(units.size()) + ")");
  }
  ParamSet out = teacher;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (draws[i] < sigma2) continue;
    auto dst = out.unit(units[i]);
    auto t = teacher.unit(units[i]);
    auto s = student.unit(units[i]);
    for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = ema_value(t[p], s[p], m);
  }
  return out;
}

}  // namespace

void EnsembleConfig::validate() const {
  if (!(m >= 0.0 && m < 1.0)) throw ConfigError("m", "must be in [0, 1)");
  if (!(sigma2 >= 0.0 && sigma2 <= 1.0)) throw ConfigError("sigma2", "must be in [0, 1]");
}

ParamSet ema_update(const ParamSet &teacher, const ParamSet &student, double m) {
  teacher.require_same_layout(student);
  check_m(m);
  ParamSet out = teacher.zeros_like();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ema_value(teacher[i], student[i], m);
  return out;
}

std::vector<double> draw_unit_probabilities(Rng &rng, const ParamSet &layout) {
  const std::size_t n = layout.units().size();
  std::vector<double> draws(n);
  for (double &d : draws) d = rng.uniform();
  return draws;
}

ParamSet segment_update(const ParamSet &teacher, const ParamSet &student, double sigma2,
                        std::span<const double> draws) {
  check_sigma2(sigma2);
  return unit_update(teacher, student, 0.0, sigma2, draws);
}

ParamSet segment_update(const ParamSet &teacher, const ParamSet &student, double sigma2,
                        Rng &rng) {
  teacher.require_same_layout(student);
  return segment_update(teacher, student, sigma2, draw_unit_probabilities(rng, teacher));
}

ParamSet fine_grained_update(const ParamSet &teacher, const ParamSet &student,
                             const EnsembleConfig &config, std::span<const double> draws) {
  check_m(config.m);
  check_sigma2(config.sigma2);
  return unit_update(teacher, student, config.m, config.sigma2, draws);
}

ParamSet fine_grained_update(const ParamSet &teacher, const ParamSet &student,
                             const EnsembleConfig &config, Rng &rng) {
  teacher.require_same_layout(student);
  return fine_grained_update(teacher, student, config, draw_unit_probabilities(rng, teacher));
}

}  // namespace atsen

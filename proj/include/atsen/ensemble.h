#ifndef ATSEN_ENSEMBLE_H_
#define ATSEN_ENSEMBLE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "atsen/param_set.h"
#include "atsen/rng.h"

namespace atsen {

struct EnsembleConfig {
  // EMA smoothing coefficient in [0, 1).
  double m = 0.995;
  // A unit keeps the teacher's value when its draw P_i < sigma2.
  double sigma2 = 0.8;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// m * teacher + (1 - m) * student for every parameter.
ParamSet ema_update(const ParamSet &teacher, const ParamSet &student, double m);

// One uniform [0, 1) draw per unit, in layout order.
std::vector<double> draw_unit_probabilities(Rng &rng, const ParamSet &layout);

// Units with draw < sigma2 keep the teacher's values; the rest are replaced
// by the student's.
ParamSet segment_update(const ParamSet &teacher, const ParamSet &student, double sigma2,
                        std::span<const double> draws);
ParamSet segment_update(const ParamSet &teacher, const ParamSet &student, double sigma2, Rng &rng);

// Units with draw < sigma2 keep the teacher's values; the rest take the EMA
// of teacher and student. sigma2 = 0 gives ema_update, m = 0 gives
// segment_update.
ParamSet fine_grained_update(const ParamSet &teacher, const ParamSet &student,
                             const EnsembleConfig &config, std::span<const double> draws);
ParamSet fine_grained_update(const ParamSet &teacher, const ParamSet &student,
                             const EnsembleConfig &config, Rng &rng);

}  // namespace atsen

#endif  // ATSEN_ENSEMBLE_H_

#ifndef ATSEN_RNG_H_
#define ATSEN_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace atsen {

// Seeded random source. Built only on std::mt19937_64, whose output sequence
// is fixed by the standard, so draws are identical across standard libraries.
// (std::uniform_*_distribution and std::shuffle are not.)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T> &items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent sub-seed for a named stream from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

}  // namespace atsen

#endif  // ATSEN_RNG_H_

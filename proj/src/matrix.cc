#include "atsen/matrix.h"

#include <algorithm>
#include <cmath>

namespace atsen {

void softmax(std::span<const double> logits, double temperature, std::span<double> out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp((logits[k] - top) / temperature);
    sum += out[k];
  }
  for (double &p : out) p /= sum;
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  std::vector<double> out(logits.size());
  softmax(logits, temperature, out);
  return out;
}

void log_softmax(std::span<const double> logits, double temperature, std::span<double> out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = (logits[k] - top) / temperature;
    sum += std::exp(out[k]);
  }
  const double log_sum = std::log(sum);
  for (double &v : out) v -= log_sum;
}

}  // namespace atsen

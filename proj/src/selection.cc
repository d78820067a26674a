#include "atsen/selection.h"

#include <algorithm>

#include "atsen/error.h"

namespace atsen {

const char *to_string(MaskPolicy p) {
  return p == MaskPolicy::kSuperviseAsO ? "supervise_as_o" : "exclude";
}

MaskPolicy parse_mask_policy(const std::string &name) {
  if (name == "supervise_as_o") return MaskPolicy::kSuperviseAsO;
  if (name == "exclude") return MaskPolicy::kExclude;
  throw ConfigError("mask_policy", "unknown policy '" + name + "'");
}

void SelectionConfig::validate() const {
  if (!(sigma1 >= 0.0 && sigma1 <= 1.0)) throw ConfigError("sigma1", "must be in [0, 1]");
}

TagSeq consistent_prediction(const TagSeq &y_t1, const TagSeq &y_t2) {
  if (y_t1.size() != y_t2.size()) throw InputError("teacher predictions differ in length");
  TagSeq out(y_t1.size(), TagVocab::kOutside);
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (y_t1[j] == y_t2[j]) out[j] = y_t1[j];
  }
  return out;
}

TagSeq threshold_filter(const TagSeq &tags, std::span<const double> confidences, double sigma1) {
  if (tags.size() != confidences.size()) throw InputError("tags and confidences differ in length");
  if (!(sigma1 >= 0.0 && sigma1 <= 1.0)) throw InputError("sigma1 must be in [0, 1]");
  TagSeq out(tags);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double c = confidences[j];
    if (!(c >= 0.0 && c <= 1.0)) throw InputError("confidence outside [0, 1]");
    if (!(c > sigma1)) out[j] = TagVocab::kOutside;
  }
  return out;
}

ReliableLabels select_reliable(const Prediction &primary, const Prediction &other,
                               const SelectionConfig &config) {
  const std::size_t n = primary.tags.size();
  if (primary.confidences.size() != n || other.tags.size() != n || other.confidences.size() != n) {
    throw InputError("teacher predictions are not aligned");
  }
  TagSeq candidate = primary.tags;
  std::vector<double> confidence = primary.confidences;
  if (config.consistency) {
    candidate = consistent_prediction(primary.tags, other.tags);
    for (std::size_t j = 0; j < n; ++j) {
      confidence[j] = std::min(primary.confidences[j], other.confidences[j]);
    }
  }
  ReliableLabels out;
  out.tags = threshold_filter(candidate, confidence, config.sigma1);
  out.mask.assign(n, true);
  for (std::size_t j = 0; j < n; ++j) {
    const bool disagreed = config.consistency && primary.tags[j] != other.tags[j];
    const bool demoted = disagreed || !(confidence[j] > config.sigma1);
    if (demoted) {
      ++out.demoted;
      if (config.mask_policy == MaskPolicy::kExclude) out.mask[j] = false;
    } else {
      ++out.kept;
    }
  }
  return out;
}

}  // namespace atsen

#ifndef ATSEN_SELECTION_H_
#define ATSEN_SELECTION_H_

#include <span>
#include <string>
#include <vector>

#include "atsen/tagger.h"
#include "atsen/tags.h"

namespace atsen {

// What happens to tokens demoted to "O" by selection.
enum class MaskPolicy {
  kSuperviseAsO,  // still trained towards "O"
  kExclude,       // no cross-entropy loss
};

const char *to_string(MaskPolicy p);
MaskPolicy parse_mask_policy(const std::string &name);

struct SelectionConfig {
  // Confidence threshold; a label survives only if confidence > sigma1.
  double sigma1 = 0.9;
  MaskPolicy mask_policy = MaskPolicy::kSuperviseAsO;
  // When false, each pair keeps its own teacher's labels unfiltered by the
  // other teacher.
  bool consistency = true;

  void validate() const;
};

struct ReliableLabels {
  TagSeq tags;
  std::vector<bool> mask;
  // Tokens whose label came through selection untouched.
  std::size_t kept = 0;
  std::size_t demoted = 0;
};

// Agreeing labels pass through; disagreements become "O".
TagSeq consistent_prediction(const TagSeq &y_t1, const TagSeq &y_t2);

// Labels whose confidence is not strictly above sigma1 become "O".
TagSeq threshold_filter(const TagSeq &tags, std::span<const double> confidences, double sigma1);

// Consistency filtering, then thresholding on the smaller of the two
// teachers' confidences. `primary` is the pair's own teacher; it alone
// supplies the labels when consistency is off.
ReliableLabels select_reliable(const Prediction &primary, const Prediction &other,
                               const SelectionConfig &config);

}  // namespace atsen

#endif  // ATSEN_SELECTION_H_

#ifndef ATSEN_METRICS_H_
#define ATSEN_METRICS_H_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "atsen/tags.h"
#include "json.hpp"

namespace atsen {

struct EntitySpan {
  int start = 0;  // inclusive
  int end = 0;    // exclusive
  std::string type;

  auto operator<=>(const EntitySpan &) const = default;
};

// Maximal B-led runs become spans. A stray I-X (after O or another type)
// opens a new span, matching repair_bio.
std::vector<EntitySpan> decode_spans(const TagSeq &tags, const TagVocab &vocab);

struct SpanCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct EntityMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  // Set when the denominator was zero; the value is then reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  std::map<std::string, SpanCounts> per_type;
};

// Exact (start, end, type) matching, micro-averaged over the corpus.
// Throws InputError when pred and gold are not aligned.
EntityMetrics entity_prf(std::span<const TagSeq> pred, std::span<const TagSeq> gold,
                         const TagVocab &vocab);

// Derives precision/recall/F1 and the zero-denominator flags from counts.
EntityMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

nlohmann::ordered_json to_json(const EntityMetrics &m);

// Aligned text table, one row per named result.
struct MetricsRow {
  std::string name;
  EntityMetrics metrics;
};
std::string format_table(const std::vector<MetricsRow> &rows);

}  // namespace atsen

#endif  // ATSEN_METRICS_H_

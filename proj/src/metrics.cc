#include "atsen/metrics.h"

#include <algorithm>
#include <cstdio>
#include <set>

#include "atsen/error.h"

namespace atsen {

std::vector<EntitySpan> decode_spans(const TagSeq &tags, const TagVocab &vocab) {
  std::vector<EntitySpan> spans;
  int open_type = -1;
  for (int j = 0; j < static_cast<int>(tags.size()); ++j) {
    const int tag = tags[j];
    if (!vocab.contains(tag)) throw InputError("tag index out of range: " + std::to_string(tag));
    const int type = vocab.type_of(tag);
    const bool continues = vocab.is_inside(tag) && open_type == type;
    if (continues) {
      spans.back().end = j + 1;
      continue;
    }
    if (type < 0) {
      open_type = -1;
      continue;
    }
    spans.push_back({j, j + 1, vocab.type_name(type)});
    open_type = type;
  }
  return spans;
}

EntityMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  EntityMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  if (tp + fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

EntityMetrics entity_prf(std::span<const TagSeq> pred, std::span<const TagSeq> gold,
                         const TagVocab &vocab) {
  if (pred.size() != gold.size()) {
    throw InputError("prediction has " + std::to_string(pred.size()) + " sentences, gold has " +
                     std::to_string(gold.size()));
  }
  std::map<std::string, SpanCounts> per_type;
  for (const auto &type : vocab.entity_types()) per_type[type];
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != gold[i].size()) {
      throw InputError("sentence " + std::to_string(i) + " length mismatch");
    }
    auto p = decode_spans(pred[i], vocab);
    auto g = decode_spans(gold[i], vocab);
    std::set<EntitySpan> gold_set(g.begin(), g.end());
    for (const auto &span : p) {
      if (gold_set.erase(span) > 0) {
        ++tp;
        ++per_type[span.type].tp;
      } else {
        ++fp;
        ++per_type[span.type].fp;
      }
    }
    for (const auto &span : gold_set) {
      ++fn;
      ++per_type[span.type].fn;
    }
  }
  EntityMetrics m = metrics_from_counts(tp, fp, fn);
  m.per_type = std::move(per_type);
  return m;
}

nlohmann::ordered_json to_json(const EntityMetrics &m) {
  nlohmann::ordered_json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  if (m.precision_undefined) j["precision_undefined"] = true;
  if (m.recall_undefined) j["recall_undefined"] = true;
  if (!m.per_type.empty()) {
    nlohmann::ordered_json types = nlohmann::ordered_json::object();
    for (const auto &[name, c] : m.per_type) {
      types[name] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
    }
    j["per_type"] = std::move(types);
  }
  return j;
}

std::string format_table(const std::vector<MetricsRow> &rows) {
  std::size_t width = 6;
  for (const auto &row : rows) width = std::max(width, row.name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %9s  %9s  %9s\n", static_cast<int>(width), "Method",
                "Precision", "Recall", "F1");
  out += buf;
  out += std::string(width + 33, '-') + "\n";
  for (const auto &row : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %9.2f  %9.2f  %9.2f\n", static_cast<int>(width),
                  row.name.c_str(), 100.0 * row.metrics.precision, 100.0 * row.metrics.recall,
                  100.0 * row.metrics.f1);
    out += buf;
  }
  return out;
}

}  // namespace atsen

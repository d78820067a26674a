#include "atsen/tags.h"

#include <algorithm>
#include <set>

#include "atsen/error.h"

namespace atsen {

TagVocab::TagVocab(std::vector<std::string> entity_types)
    : types_(std::move(entity_types)) {
  tags_.push_back("O");
  for (const auto &type : types_) {
    if (type.empty()) throw SchemaError("empty entity type name");
    tags_.push_back("B-" + type);
    tags_.push_back("I-" + type);
  }
  for (int i = 0; i < size(); ++i) {
    if (!index_.emplace(tags_[i], i).second) {
      throw SchemaError("duplicate tag " + tags_[i]);
    }
  }
}

TagVocab TagVocab::infer(const std::vector<std::string> &tags) {
  std::set<std::string> types;
  for (const auto &tag : tags) {
    TagParts parts = split_tag(tag);
    if (parts.prefix != 'O') types.insert(parts.type);
  }
  return TagVocab(std::vector<std::string>(types.begin(), types.end()));
}

const std::string &TagVocab::tag(int index) const {
  if (!contains(index)) throw InputError("tag index out of range: " + std::to_string(index));
  return tags_[index];
}

const std::string &TagVocab::type_name(int type) const {
  if (type < 0 || type >= type_count()) {
    throw InputError("type index out of range: " + std::to_string(type));
  }
  return types_[type];
}

std::optional<int> TagVocab::find(std::string_view tag) const {
  auto it = index_.find(std::string(tag));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int TagVocab::index(std::string_view tag) const {
  TagParts parts = split_tag(tag);
  auto found = find(tag);
  if (!found) throw SchemaError("unknown entity type '" + parts.type + "' in tag " + std::string(tag));
  return *found;
}

std::optional<int> TagVocab::find_type(std::string_view type) const {
  for (int t = 0; t < type_count(); ++t) {
    if (types_[t] == type) return t;
  }
  return std::nullopt;
}

TagParts split_tag(std::string_view tag) {
  if (tag == "O") return {'O', ""};
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
    return {tag[0], std::string(tag.substr(2))};
  }
  throw SchemaError("tag '" + std::string(tag) + "' is not O, B-<type> or I-<type>");
}

TagSeq repair_bio(const TagSeq &tags, const TagVocab &vocab) {
  TagSeq out(tags);
  int prev = TagVocab::kOutside;
  for (int &tag : out) {
    if (vocab.is_inside(tag) &&
        (prev == TagVocab::kOutside || vocab.type_of(prev) != vocab.type_of(tag))) {
      tag = vocab.begin_tag(vocab.type_of(tag));
    }
    prev = tag;
  }
  return out;
}

}  // namespace atsen

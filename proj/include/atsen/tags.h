#ifndef ATSEN_TAGS_H_
#define ATSEN_TAGS_H_

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace atsen {

using TagSeq = std::vector<int>;

// BIO tag inventory. Index 0 is "O"; entity type t owns B at 1 + 2t and I at
// 2 + 2t, so indices depend only on the ordered type list.
class TagVocab {
 public:
  static constexpr int kOutside = 0;

  explicit TagVocab(std::vector<std::string> entity_types);

  // Builds a vocabulary from raw tag strings. Types are sorted by name so the
  // result does not depend on the order tags were seen in.
  static TagVocab infer(const std::vector<std::string> &tags);

  int size() const { return static_cast<int>(tags_.size()); }
  int type_count() const { return static_cast<int>(types_.size()); }
  const std::vector<std::string> &entity_types() const { return types_; }
  const std::vector<std::string> &tags() const { return tags_; }
  const std::string &tag(int index) const;
  const std::string &type_name(int type) const;

  std::optional<int> find(std::string_view tag) const;
  // Throws SchemaError when the tag is malformed or its type is unknown.
  int index(std::string_view tag) const;
  std::optional<int> find_type(std::string_view type) const;

  int begin_tag(int type) const { return 1 + 2 * type; }
  int inside_tag(int type) const { return 2 + 2 * type; }
  // -1 for "O".
  int type_of(int tag) const { return tag <= 0 ? -1 : (tag - 1) / 2; }
  bool is_begin(int tag) const { return tag > 0 && tag % 2 == 1; }
  bool is_inside(int tag) const { return tag > 0 && tag % 2 == 0; }
  bool contains(int tag) const { return tag >= 0 && tag < size(); }

  bool operator==(const TagVocab &other) const { return types_ == other.types_; }

 private:
  std::vector<std::string> types_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
};

// Splits "B-X" / "I-X" / "O" into prefix and type. Throws SchemaError for
// anything else.
struct TagParts {
  char prefix;  // 'B', 'I' or 'O'
  std::string type;
};
TagParts split_tag(std::string_view tag);

// Rewrites every I-X that does not continue an X entity into B-X. Idempotent.
TagSeq repair_bio(const TagSeq &tags, const TagVocab &vocab);

}  // namespace atsen

#endif  // ATSEN_TAGS_H_

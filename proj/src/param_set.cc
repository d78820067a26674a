#include "atsen/param_set.h"

#include <cstring>
#include <set>

#include "atsen/error.h"

namespace atsen {

ParamSet::ParamSet(const std::vector<FragmentSpec> &layout) {
  std::set<std::string> names;
  std::set<std::string> closed_units;
  std::size_t offset = 0;
  for (const auto &spec : layout) {
    if (!names.insert(spec.name).second) throw ShapeError("duplicate fragment " + spec.name);
    if (!fragments_.empty() && fragments_.back().unit != spec.unit) {
      closed_units.insert(fragments_.back().unit);
    }
    if (closed_units.count(spec.unit)) {
      throw ShapeError("fragments of unit " + spec.unit + " are not contiguous");
    }
    fragments_.push_back({spec.name, spec.unit, offset, spec.length});
    offset += spec.length;
  }
  values_.assign(offset, 0.0);
}

std::span<double> ParamSet::fragment(std::string_view name) {
  for (const auto &f : fragments_) {
    if (f.name == name) return {values_.data() + f.offset, f.length};
  }
  throw ShapeError("no fragment named " + std::string(name));
}

std::span<const double> ParamSet::fragment(std::string_view name) const {
  return const_cast<ParamSet *>(this)->fragment(name);
}

std::vector<std::string> ParamSet::units() const {
  std::vector<std::string> out;
  for (const auto &f : fragments_) {
    if (out.empty() || out.back() != f.unit) out.push_back(f.unit);
  }
  return out;
}

std::span<double> ParamSet::unit(std::string_view unit) {
  std::size_t begin = values_.size(), end = 0;
  for (const auto &f : fragments_) {
    if (f.unit != unit) continue;
    begin = std::min(begin, f.offset);
    end = std::max(end, f.offset + f.length);
  }
  if (begin > end) throw ShapeError("no unit named " + std::string(unit));
  return {values_.data() + begin, end - begin};
}

std::span<const double> ParamSet::unit(std::string_view unit) const {
  return const_cast<ParamSet *>(this)->unit(unit);
}

void ParamSet::require_same_layout(const ParamSet &other) const {
  if (!same_layout(other)) throw ShapeError("parameter layouts differ");
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  out.fragments_ = fragments_;
  out.values_.assign(values_.size(), 0.0);
  return out;
}

bool ParamSet::operator==(const ParamSet &other) const {
  return fragments_ == other.fragments_ && values_.size() == other.values_.size() &&
         (values_.empty() ||
          std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0);
}

}  // namespace atsen

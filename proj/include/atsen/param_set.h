#ifndef ATSEN_PARAM_SET_H_
#define ATSEN_PARAM_SET_H_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace atsen {

// A flat parameter vector partitioned into named, disjoint fragments. Each
// fragment belongs to a unit (one network layer); ensemble updates act on
// whole units.
class ParamSet {
 public:
  struct Fragment {
    std::string name;  // e.g. "hidden.weight"
    std::string unit;  // e.g. "hidden"
    std::size_t offset = 0;
    std::size_t length = 0;
    bool operator==(const Fragment &) const = default;
  };

  struct FragmentSpec {
    std::string name;
    std::string unit;
    std::size_t length;
  };

  ParamSet() = default;
  // Zero-valued parameters with the given layout. Fragments of one unit must
  // be contiguous and names unique.
  explicit ParamSet(const std::vector<FragmentSpec> &layout);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double &operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  const std::vector<Fragment> &fragments() const { return fragments_; }
  std::span<double> fragment(std::string_view name);
  std::span<const double> fragment(std::string_view name) const;

  // Units in layout order.
  std::vector<std::string> units() const;
  // Contiguous [offset, offset + length) of a unit's fragments.
  std::span<double> unit(std::string_view unit);
  std::span<const double> unit(std::string_view unit) const;

  bool same_layout(const ParamSet &other) const { return fragments_ == other.fragments_; }
  // Throws ShapeError when layouts differ.
  void require_same_layout(const ParamSet &other) const;
  ParamSet zeros_like() const;

  // Bitwise equality of layout and values.
  bool operator==(const ParamSet &other) const;

 private:
  std::vector<Fragment> fragments_;
  std::vector<double> values_;
};

}  // namespace atsen

#endif  // ATSEN_PARAM_SET_H_

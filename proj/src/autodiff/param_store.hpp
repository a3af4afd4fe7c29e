#ifndef GADA_AUTODIFF_PARAM_STORE_HPP
#define GADA_AUTODIFF_PARAM_STORE_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "autodiff/tensor.hpp"

namespace gada::ad {

// Named tensors in insertion order. Small by construction (a few dozen
// entries at most), so lookup is a linear scan.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool operator==(const Entry&) const = default;
  };

  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const noexcept;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t scalar_count() const noexcept;

  const Entry& entry(std::size_t i) const { return entries_[i]; }
  Entry& entry(std::size_t i) { return entries_[i]; }

  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }
  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }

  // Same names and shapes, zero values.
  ParamStore zeros_like() const;

  // Concatenation; names must stay unique.
  void append(const ParamStore& other);

  bool operator==(const ParamStore&) const = default;

 private:
  std::vector<Entry> entries_;
};

}  // namespace gada::ad

#endif  // GADA_AUTODIFF_PARAM_STORE_HPP

#include "autodiff/param_store.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace gada::ad {

void ParamStore::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
}

bool ParamStore::contains(std::string_view name) const noexcept {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.name == name; });
}

const Tensor& ParamStore::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw ContractError("unknown parameter '" + std::string(name) + "'");
}

Tensor& ParamStore::at(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const ParamStore&>(*this).at(name));
}

std::size_t ParamStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& e : entries_) out.add(e.name, Tensor::zeros(e.value.shape()));
  return out;
}

void ParamStore::append(const ParamStore& other) {
  for (const auto& e : other) add(e.name, e.value);
}

}  // namespace gada::ad

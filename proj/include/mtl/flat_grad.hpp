#pragma once

#include <string>

#include "mtl/tensor.hpp"

namespace mtl {

/// Either the shared backbone or the head of one task.
struct Partition {
  enum class Kind { kBackbone, kHead };

  Kind kind = Kind::kBackbone;
  int task = -1;

  static Partition backbone() { return {Kind::kBackbone, -1}; }
  static Partition head(int t) { return {Kind::kHead, t}; }

  bool is_backbone() const { return kind == Kind::kBackbone; }
  bool operator==(const Partition&) const = default;
  std::string name() const { return is_backbone() ? "backbone" : "head-" + std::to_string(task + 1); }
};

/// Flattened gradient over one parameter partition, tagged with the task whose
/// loss produced it (or -1 for an aggregate).
struct FlatGrad {
  Vector values;
  Partition partition;
  int task = -1;

  Index size() const { return values.size(); }
};

/// Throws if the length differs from `expected` or any entry is non-finite.
void validate(const FlatGrad& g, Index expected);

}  // namespace mtl

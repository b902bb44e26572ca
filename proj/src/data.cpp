#include "mtl/data.hpp"

#include <stdexcept>

#include "mtl/flat_grad.hpp"

namespace mtl {

std::string to_string(TaskKind kind) {
  return kind == TaskKind::kRegressionL1 ? "regression-l1" : "classification-ce";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "regression-l1" || name == "regression" || name == "l1") return TaskKind::kRegressionL1;
  if (name == "classification-ce" || name == "classification" || name == "ce") return TaskKind::kClassificationCE;
  throw std::invalid_argument("unknown task kind '" + name + "'");
}

Dataset Dataset::rows(std::span<const Index> indices) const {
  Dataset out;
  out.inputs.resize(static_cast<Index>(indices.size()), inputs.cols());
  out.targets.resize(static_cast<Index>(indices.size()), targets.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Index i = indices[k];
    if (i < 0 || i >= size()) throw std::out_of_range("dataset row " + std::to_string(i) + " out of range");
    out.inputs.row(static_cast<Index>(k)) = inputs.row(i);
    out.targets.row(static_cast<Index>(k)) = targets.row(i);
  }
  return out;
}

Dataset Dataset::row(Index i) const {
  const Index idx[] = {i};
  return rows(idx);
}

Dataset Dataset::slice(Index begin, Index end) const {
  if (begin < 0 || end > size() || begin > end) throw std::out_of_range("dataset slice out of range");
  return {inputs.middleRows(begin, end - begin), targets.middleRows(begin, end - begin)};
}

void validate(const FlatGrad& g, Index expected) {
  if (g.size() != expected) {
    throw ShapeError("flat gradient for " + g.partition.name() + " has length " + std::to_string(g.size()) +
                     ", expected " + std::to_string(expected));
  }
  if (!g.values.allFinite()) throw std::domain_error("flat gradient for " + g.partition.name() + " is not finite");
}

}  // namespace mtl

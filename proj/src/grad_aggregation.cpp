#include "mtl/grad_aggregation.hpp"

namespace mtl {

std::string to_string(AggregationMethod m) {
  switch (m) {
    case AggregationMethod::kEqual: return "ew";
    case AggregationMethod::kPcgrad: return "pcgrad";
    case AggregationMethod::kCagrad: return "cagrad";
  }
  return "unknown";
}

AggregationMethod parse_aggregation(const std::string& name) {
  if (name == "ew") return AggregationMethod::kEqual;
  if (name == "pcgrad") return AggregationMethod::kPcgrad;
  if (name == "cagrad") return AggregationMethod::kCagrad;
  throw std::invalid_argument("unknown aggregation method '" + name + "'");
}

bool is_aggregation_method(const std::string& name) { return name == "pcgrad" || name == "cagrad"; }

FlatGrad aggregate(const AggregationOptions& opts, std::span<const FlatGrad> grads, std::span<const double> weights,
                   Rng& rng, std::vector<std::string>* warnings) {
  if (grads.empty()) throw std::invalid_argument("aggregate: no gradients");
  std::vector<Vector> values;
  values.reserve(grads.size());
  for (const FlatGrad& g : grads) {
    if (g.size() != grads[0].size()) {
      throw ShapeError("aggregate: gradient lengths differ (" + std::to_string(grads[0].size()) + " vs " +
                       std::to_string(g.size()) + ")");
    }
    values.push_back(g.values);
  }

  FlatGrad out;
  out.partition = grads[0].partition;
  switch (opts.method) {
    case AggregationMethod::kEqual: {
      if (!weights.empty() && weights.size() != grads.size()) {
        throw std::invalid_argument("aggregate: " + std::to_string(weights.size()) + " weights for " +
                                    std::to_string(grads.size()) + " gradients");
      }
      out.values = Vector::Zero(values[0].size());
      for (std::size_t t = 0; t < values.size(); ++t) out.values += (weights.empty() ? 1.0 : weights[t]) * values[t];
      break;
    }
    case AggregationMethod::kPcgrad:
      out.values = pcgrad<double>(values, rng);
      break;
    case AggregationMethod::kCagrad:
      out.values = cagrad<double>(values, opts.cagrad_c, warnings);
      break;
  }
  return out;
}

}  // namespace mtl

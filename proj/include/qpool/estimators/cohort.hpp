#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qpool/distributions.hpp"
#include "qpool/errors.hpp"

namespace qpool {

/// N assay results with optional risk scores and row identifiers.
struct Cohort {
  std::vector<double> values;
  std::optional<std::vector<double>> scores;
  std::vector<std::string> ids;  // may be empty

  Cohort() = default;
  explicit Cohort(std::vector<double> v) : values(std::move(v)) {}
  Cohort(std::vector<double> v, std::vector<double> s) : values(std::move(v)), scores(std::move(s)) {}

  std::size_t size() const noexcept { return values.size(); }
  bool has_scores() const noexcept { return scores.has_value(); }

  void validate() const {
    if (values.empty()) throw DataError("cohort is empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
        throw DataError("cohort value at index " + std::to_string(i) + " must be finite and >= 0");
      }
    }
    if (scores) {
      if (scores->size() != values.size()) throw DataError("cohort scores must match the number of values");
      for (double s : *scores) {
        if (!std::isfinite(s)) throw DataError("cohort scores must be finite");
      }
    }
    if (!ids.empty() && ids.size() != values.size()) throw DataError("cohort ids must match the number of values");
  }

  /// Fraction of values above C.
  double prevalence(double C) const {
    validate();
    std::size_t n = 0;
    for (double v : values) n += v > C ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(values.size());
  }

  /// Rows drawn with replacement, keeping value-score pairs together.
  Cohort resample(RngStream& rng) const {
    Cohort out;
    const std::size_t N = values.size();
    out.values.resize(N);
    if (scores) out.scores.emplace(N);
    for (std::size_t i = 0; i < N; ++i) {
      const auto k = static_cast<std::size_t>(rng.below(N));
      out.values[i] = values[k];
      if (scores) (*out.scores)[i] = (*scores)[k];
    }
    return out;
  }
};

}  // namespace qpool

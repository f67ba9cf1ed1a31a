// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/uncertainty_field.hpp"

#include "raylaplace/field.hpp"

#include <algorithm>
#include <cmath>

namespace raylaplace {

float UncertaintyField::max_sigma() const {
  return sigma.data.empty() ? 0.0f : *std::max_element(sigma.data.begin(), sigma.data.end());
}

void UncertaintyField::update_log_range() {
  if (sigma.data.empty()) {
    log_min = log_max = 0.0;
    return;
  }
  const auto [lo, hi] = std::minmax_element(sigma.data.begin(), sigma.data.end());
  log_min = std::log(double(*lo));
  log_max = std::log(double(*hi));
}

bool UncertaintyField::operator==(const UncertaintyField& other) const {
  return bounds == other.bounds && sigma.dims == other.sigma.dims &&
         sigma_axes.data == other.sigma_axes.data && sigma.data == other.sigma.data &&
         log_min == other.log_min && log_max == other.log_max;
}

double uncertainty_at(const UncertaintyField& field, const Vec3& x) {
  const Vec3 u = field.bounds.to_normalized(x);
  if (!inside_unit_cube(u)) return field.max_sigma();
  return trilinear_sample(field.sigma, u).value;
}

double normalized_log_uncertainty(const UncertaintyField& field, const Vec3& x) {
  const double range = field.log_max - field.log_min;
  if (!(range > 0.0)) return 0.0;
  const double v = (std::log(uncertainty_at(field, x)) - field.log_min) / range;
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace raylaplace

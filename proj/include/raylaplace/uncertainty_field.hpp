// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "raylaplace/common.hpp"

namespace raylaplace {

/// Per-vertex marginal deviations of the deformation posterior and their
/// norm sigma, with min/max of log sigma over vertices for normalization.
struct UncertaintyField {
  Aabb bounds;
  Grid3<Vec3f> sigma_axes;
  Grid3<float> sigma;
  double log_min = 0.0;
  double log_max = 0.0;

  std::uint32_t resolution() const { return sigma.dims.nx; }
  float max_sigma() const;
  /// Recomputes log_min/log_max from sigma.
  void update_log_range();
  bool operator==(const UncertaintyField& other) const;
};

/// Trilinear lookup of vertex sigma; outside the box returns max sigma.
double uncertainty_at(const UncertaintyField& field, const Vec3& x);

/// (log U(x) - log_min) / (log_max - log_min), clamped to [0,1]. A flat
/// field maps to 0.
double normalized_log_uncertainty(const UncertaintyField& field, const Vec3& x);

}  // namespace raylaplace

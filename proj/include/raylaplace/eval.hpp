// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "raylaplace/render.hpp"
#include "raylaplace/train.hpp"
#include "raylaplace/uncertainty_field.hpp"

#include <nlohmann/json_fwd.hpp>

#include <span>
#include <string>

namespace raylaplace {

struct DepthErrorMap {
  PlaneF error;                ///< |pred - ref| where valid, 0 elsewhere
  Plane<std::uint8_t> valid;

  std::vector<double> valid_errors() const;
  double mean() const;
};

/// Throws std::invalid_argument on dimension mismatch.
DepthErrorMap depth_error(const PlaneF& predicted, const PlaneF& reference,
                          const Plane<std::uint8_t>& valid);

/// Values of `plane` at valid pixels, in pixel order.
std::vector<double> masked_values(const PlaneF& plane, const Plane<std::uint8_t>& valid);

struct SparsificationResult {
  std::vector<double> fractions;
  std::vector<double> uncertainty_curve;  ///< MAE of survivors, removal by score
  std::vector<double> oracle_curve;       ///< MAE of survivors, removal by error
  double ause = 0.0;
};

/// Removes the top fraction f of pixels by score (resp. by error) for
/// f = 0, step, 2 step, ... < 1 and records the mean error of the rest. AUSE
/// is the mean gap between the two curves, both divided by the error at
/// f = 0. Ties are broken by ascending pixel index.
SparsificationResult sparsification(std::span<const double> errors,
                                    std::span<const double> scores, double step = 0.01);

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels, capped at 99 dB.
double psnr(const ImageRGB& image, const ImageRGB& reference);

/// Fraction of pixels whose coverage flag is set.
double coverage(const ChannelImage& channels);

struct EnsembleResult {
  std::vector<PlaneF> depth_std;  ///< one per evaluation camera, population std
  std::uint32_t k = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<VoxelField> members;
};

/// Per-pixel population standard deviation of rendered depth across fields.
EnsembleResult ensemble_depth_std(std::span<const VoxelField> members,
                                  std::span<const Camera> eval_cameras,
                                  const RenderOptions& options);

/// Trains one field per seed (otherwise identical configs) and measures the
/// spread of their depth renders. Requires at least two seeds.
EnsembleResult ensemble_uncertainty(std::span<const ImageRGB> images,
                                    std::span<const Camera> cameras, const VoxelField& init,
                                    const TrainConfig& base, std::span<const std::uint64_t> seeds,
                                    std::span<const Camera> eval_cameras,
                                    const RenderOptions& options);

/// Spearman correlation with average ranks for ties; nullopt when either
/// input is constant.
std::optional<double> rank_correlation(std::span<const double> a, std::span<const double> b);

/// Pixel score used for sparsification: composited normalized log
/// uncertainty with empty space behind the last sample counted as maximal.
PlaneF uncertainty_score(const ChannelImage& channels);

/// Pixels of several views pooled for sparsification and rank correlation.
/// Only pixels where the reference render is opaque (>= 0.5) are kept.
struct PooledDepthEval {
  std::vector<double> errors;        ///< |depth - reference depth|
  std::vector<double> scores;        ///< uncertainty_score at the pixel
  std::vector<double> ensemble_std;  ///< empty unless an ensemble was given
  std::vector<double> psnr;          ///< per view, against `images` if given
};

PooledDepthEval pool_depth_uncertainty(const VoxelField& field, const UncertaintyField& uncertainty,
                                       const VoxelField& reference,
                                       std::span<const Camera> cameras,
                                       const RenderOptions& options,
                                       const EnsembleResult* ensemble = nullptr,
                                       std::span<const ImageRGB> images = {});

struct SweepRow {
  std::optional<double> threshold;  ///< nullopt: unthresholded baseline
  double coverage = 1.0;            ///< mean over views
  double psnr = 0.0;                ///< mean over views
  std::vector<ChannelImage> renders;
};

/// Baseline row followed by one row per threshold, in the given order.
std::vector<SweepRow> threshold_sweep(const VoxelField& field, const UncertaintyField& uncertainty,
                                      std::span<const ImageRGB> images,
                                      std::span<const Camera> cameras,
                                      std::span<const double> thresholds,
                                      const RenderOptions& options, bool keep_renders = false);

struct MetricsReport {
  std::optional<double> ause;
  std::optional<double> psnr;
  std::optional<double> coverage;
  std::optional<double> spearman;
  std::optional<SparsificationResult> curves;
  std::vector<std::pair<std::string, double>> extra;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

}  // namespace raylaplace

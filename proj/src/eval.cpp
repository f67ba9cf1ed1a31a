// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace raylaplace {

namespace {

template <class A, class B>
void require_same_size(const Plane<A>& a, const Plane<B>& b, const char* what) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument(std::string(what) + ": image dimensions differ");
  }
}

}  // namespace

std::vector<double> DepthErrorMap::valid_errors() const { return masked_values(error, valid); }

double DepthErrorMap::mean() const {
  const auto e = valid_errors();
  if (e.empty()) return 0.0;
  return std::accumulate(e.begin(), e.end(), 0.0) / double(e.size());
}

DepthErrorMap depth_error(const PlaneF& predicted, const PlaneF& reference,
                          const Plane<std::uint8_t>& valid) {
  require_same_size(predicted, reference, "depth_error");
  require_same_size(predicted, valid, "depth_error");
  DepthErrorMap out{PlaneF(predicted.width, predicted.height, 0.0f), valid};
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (valid.data[i]) out.error.data[i] = std::abs(predicted.data[i] - reference.data[i]);
  }
  return out;
}

std::vector<double> masked_values(const PlaneF& plane, const Plane<std::uint8_t>& valid) {
  require_same_size(plane, valid, "masked_values");
  std::vector<double> out;
  for (std::size_t i = 0; i < plane.size(); ++i) {
    if (valid.data[i]) out.push_back(plane.data[i]);
  }
  return out;
}

SparsificationResult sparsification(std::span<const double> errors,
                                    std::span<const double> scores, double step) {
  if (errors.empty() || scores.empty()) throw std::invalid_argument("sparsification: empty input");
  if (errors.size() != scores.size()) {
    throw std::invalid_argument("sparsification: errors and scores differ in length");
  }
  if (errors.size() < 2) throw std::invalid_argument("sparsification: need at least 2 pixels");
  if (!(step > 0.0 && step <= 0.5)) throw std::invalid_argument("sparsification: step not in (0, 0.5]");

  const std::size_t n = errors.size();
  auto removal_order = [n](std::span<const double> key) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&key](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    return order;
  };
  // suffix[r] = sum of errors left after removing the first r of `order`
  auto suffix_sums = [&errors, n](const std::vector<std::size_t>& order) {
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t r = n; r-- > 0;) suffix[r] = suffix[r + 1] + errors[order[r]];
    return suffix;
  };
  const auto by_score = suffix_sums(removal_order(scores));
  const auto by_error = suffix_sums(removal_order(errors));
  const double total_mean = std::accumulate(errors.begin(), errors.end(), 0.0) / double(n);

  SparsificationResult res;
  for (std::size_t k = 0; double(k) * step < 1.0 - 1e-9; ++k) {
    const double f = double(k) * step;
    const auto removed = static_cast<std::size_t>(std::floor(f * double(n) + 1e-9));
    const double left = double(n - removed);
    res.fractions.push_back(f);
    res.uncertainty_curve.push_back(removed == 0 ? total_mean : by_score[removed] / left);
    res.oracle_curve.push_back(removed == 0 ? total_mean : by_error[removed] / left);
  }
  if (total_mean > 0.0) {
    double gap = 0.0;
    for (std::size_t k = 0; k < res.fractions.size(); ++k) {
      // error-ordered removal is optimal, so negative gaps are rounding only
      gap += std::max(0.0, res.uncertainty_curve[k] - res.oracle_curve[k]) / total_mean;
    }
    res.ause = gap / double(res.fractions.size());
  }
  return res;
}

double psnr(const ImageRGB& image, const ImageRGB& reference) {
  require_same_size(image, reference, "psnr");
  if (image.size() == 0) throw std::invalid_argument("psnr: empty image");
  double sq = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    sq += (image.data[i].cast<double>() - reference.data[i].cast<double>()).squaredNorm();
  }
  const double mse = sq / (3.0 * double(image.size()));
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double coverage(const ChannelImage& channels) {
  const auto& mask = channels.coverage.data;
  if (mask.empty()) return 0.0;
  const auto kept = std::count_if(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; });
  return double(kept) / double(mask.size());
}

EnsembleResult ensemble_depth_std(std::span<const VoxelField> members,
                                  std::span<const Camera> eval_cameras,
                                  const RenderOptions& options) {
  if (members.size() < 2) throw std::invalid_argument("ensemble: need at least two members");
  RenderOptions opts = options;
  opts.uncertainty_channel = false;
  opts.threshold.reset();

  EnsembleResult res;
  res.k = static_cast<std::uint32_t>(members.size());
  for (const Camera& cam : eval_cameras) {
    std::vector<PlaneF> depths;
    for (const VoxelField& f : members) depths.push_back(render_channels(f, cam, opts).depth);
    PlaneF sd(cam.width, cam.height, 0.0f);
    for (std::size_t p = 0; p < sd.size(); ++p) {
      double mean = 0.0;
      for (const PlaneF& d : depths) mean += d.data[p];
      mean /= double(depths.size());
      double var = 0.0;
      for (const PlaneF& d : depths) var += (d.data[p] - mean) * (d.data[p] - mean);
      sd.data[p] = static_cast<float>(std::sqrt(var / double(depths.size())));
    }
    res.depth_std.push_back(std::move(sd));
  }
  return res;
}

EnsembleResult ensemble_uncertainty(std::span<const ImageRGB> images,
                                    std::span<const Camera> cameras, const VoxelField& init,
                                    const TrainConfig& base, std::span<const std::uint64_t> seeds,
                                    std::span<const Camera> eval_cameras,
                                    const RenderOptions& options) {
  if (seeds.size() < 2) throw std::invalid_argument("ensemble: need at least two seeds");
  std::vector<VoxelField> members;
  members.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    members.push_back(fit_field(images, cameras, init, cfg).field);
  }
  EnsembleResult res = ensemble_depth_std(members, eval_cameras, options);
  res.seeds.assign(seeds.begin(), seeds.end());
  res.members = std::move(members);
  return res;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

std::optional<double> rank_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("rank_correlation: length mismatch");
  if (a.size() < 3) throw std::invalid_argument("rank_correlation: need at least 3 values");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = double(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

PlaneF uncertainty_score(const ChannelImage& channels) {
  PlaneF out(channels.width, channels.height, 0.0f);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = channels.norm_uncertainty.data[i] + (1.0f - channels.opacity.data[i]);
  }
  return out;
}

PooledDepthEval pool_depth_uncertainty(const VoxelField& field, const UncertaintyField& uncertainty,
                                       const VoxelField& reference,
                                       std::span<const Camera> cameras,
                                       const RenderOptions& options,
                                       const EnsembleResult* ensemble,
                                       std::span<const ImageRGB> images) {
  if (!images.empty() && images.size() != cameras.size()) {
    throw std::invalid_argument("pool_depth_uncertainty: one image per camera required");
  }
  if (ensemble && ensemble->depth_std.size() != cameras.size()) {
    throw std::invalid_argument("pool_depth_uncertainty: ensemble rendered for other views");
  }
  RenderOptions opts = options;
  opts.threshold.reset();
  opts.uncertainty_channel = true;
  RenderOptions ref_opts = opts;
  ref_opts.uncertainty_channel = false;

  PooledDepthEval out;
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    const ChannelImage pred = render_channels(field, cameras[v], opts, &uncertainty);
    const ChannelImage ref = render_channels(reference, cameras[v], ref_opts);
    const PlaneF score = uncertainty_score(pred);
    for (std::size_t p = 0; p < score.size(); ++p) {
      if (ref.opacity.data[p] < 0.5f) continue;
      out.errors.push_back(std::abs(double(pred.depth.data[p]) - double(ref.depth.data[p])));
      out.scores.push_back(score.data[p]);
      if (ensemble) out.ensemble_std.push_back(ensemble->depth_std[v].data[p]);
    }
    if (!images.empty()) out.psnr.push_back(psnr(pred.rgb, images[v]));
  }
  return out;
}

std::vector<SweepRow> threshold_sweep(const VoxelField& field, const UncertaintyField& uncertainty,
                                      std::span<const ImageRGB> images,
                                      std::span<const Camera> cameras,
                                      std::span<const double> thresholds,
                                      const RenderOptions& options, bool keep_renders) {
  if (images.size() != cameras.size() || cameras.empty()) {
    throw std::invalid_argument("threshold_sweep: need one image per camera");
  }
  std::vector<std::optional<double>> levels{std::nullopt};
  levels.insert(levels.end(), thresholds.begin(), thresholds.end());

  std::vector<SweepRow> rows;
  for (const auto& level : levels) {
    RenderOptions opts = options;
    opts.threshold = level;
    opts.uncertainty_channel = false;
    SweepRow row;
    row.threshold = level;
    row.coverage = 0.0;
    for (std::size_t v = 0; v < cameras.size(); ++v) {
      ChannelImage img = render_channels(field, cameras[v], opts, &uncertainty);
      row.coverage += raylaplace::coverage(img);
      row.psnr += psnr(img.rgb, images[v]);
      if (keep_renders) row.renders.push_back(std::move(img));
    }
    row.coverage /= double(cameras.size());
    row.psnr /= double(cameras.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j["ause"] = opt(ause);
  j["psnr"] = opt(psnr);
  j["coverage"] = opt(coverage);
  j["spearman"] = opt(spearman);
  if (curves) {
    j["curves"] = {{"fractions", curves->fractions},
                   {"uncertainty", curves->uncertainty_curve},
                   {"oracle", curves->oracle_curve}};
  } else {
    j["curves"] = nullptr;
  }
  for (const auto& [key, value] : extra) j[key] = value;
  return j;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os.precision(10);
  auto line = [&os](const char* key, const std::optional<double>& v) {
    os << key << '=';
    if (v) {
      os << *v;
    } else {
      os << "nan";
    }
    os << '\n';
  };
  line("ause", ause);
  line("psnr", psnr);
  line("coverage", coverage);
  line("spearman", spearman);
  for (const auto& [key, value] : extra) os << key << '=' << value << '\n';
  if (curves) {
    for (std::size_t k = 0; k < curves->fractions.size(); ++k) {
      os << "curve." << curves->fractions[k] << '=' << curves->uncertainty_curve[k] << ','
         << curves->oracle_curve[k] << '\n';
    }
  }
  return os.str();
}

}  // namespace raylaplace

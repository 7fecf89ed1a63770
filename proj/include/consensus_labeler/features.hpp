#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "raster.hpp"

namespace consensus {

inline double normalized_difference(double a, double b, const char* what) {
  const double denominator = a + b;
  if (denominator == 0.0) fail(ErrorKind::undefined, std::string(what) + ": zero denominator");
  return (a - b) / denominator;
}

inline double ndvi(double nir, double red) { return normalized_difference(nir, red, "ndvi"); }

inline double ndwi(double green, double nir) { return normalized_difference(green, nir, "ndwi"); }

/// Horn 3x3 slope in degrees. `cell_distance` is the horizontal pixel spacing
/// in elevation units; it defaults to the raster cellsize. Border pixels and
/// pixels with a nodata neighbour are nodata.
inline Raster slope(const Raster& dem, std::optional<double> cell_distance = std::nullopt) {
  dem.validate();
  if (dem.ncols < 3 || dem.nrows < 3) fail(ErrorKind::geometry, "slope: raster smaller than 3x3");
  const double spacing = cell_distance.value_or(dem.cellsize);
  require(spacing > 0.0, ErrorKind::geometry, "slope: cell distance must be positive");
  Raster out = dem.like(dem.nodata);
  for (std::size_t r = 1; r + 1 < dem.nrows; ++r) {
    for (std::size_t c = 1; c + 1 < dem.ncols; ++c) {
      double w[3][3];
      bool missing = false;
      for (int dr = -1; dr <= 1 && !missing; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const double v = dem.at(r + dr, c + dc);
          if (dem.is_nodata(v)) {
            missing = true;
            break;
          }
          w[dr + 1][dc + 1] = v;
        }
      }
      if (missing) continue;
      const double dzdx = ((w[0][2] + 2.0 * w[1][2] + w[2][2]) - (w[0][0] + 2.0 * w[1][0] + w[2][0])) / (8.0 * spacing);
      const double dzdy = ((w[2][0] + 2.0 * w[2][1] + w[2][2]) - (w[0][0] + 2.0 * w[0][1] + w[0][2])) / (8.0 * spacing);
      out.at(r, c) = std::atan(std::hypot(dzdx, dzdy)) * 180.0 / std::numbers::pi;
    }
  }
  return out;
}

inline constexpr std::size_t kPatchSize = 165;

/// Square image patch, channel-planar, intensities in [0, 1].
struct Patch {
  std::size_t width = kPatchSize;
  std::size_t height = kPatchSize;
  std::size_t channels = 3;
  std::vector<double> data;  // data[(ch * height + y) * width + x]

  Patch() = default;
  Patch(std::size_t w, std::size_t h, std::size_t ch, double fill = 0.0)
      : width(w), height(h), channels(ch), data(w * h * ch, fill) {}

  double& at(std::size_t ch, std::size_t y, std::size_t x) { return data[(ch * height + y) * width + x]; }
  double at(std::size_t ch, std::size_t y, std::size_t x) const { return data[(ch * height + y) * width + x]; }
};

inline constexpr std::size_t kHistogramBins = 4;
inline constexpr std::size_t kPatchFeaturesPerChannel = 3 + kHistogramBins;

/// Per channel: mean, standard deviation, mean forward-difference gradient
/// magnitude, then a 4-bin intensity histogram (fractions over [0,.25),
/// [.25,.5), [.5,.75), [.75,1]).
inline std::vector<double> patch_features(const Patch& patch) {
  if (patch.width != kPatchSize || patch.height != kPatchSize) {
    fail(ErrorKind::shape, "patch_features: patch must be 165x165");
  }
  require(patch.channels >= 1 && patch.data.size() == patch.width * patch.height * patch.channels,
          ErrorKind::shape, "patch_features: channel data size mismatch");
  const std::size_t w = patch.width, h = patch.height;
  const double n = static_cast<double>(w * h);
  std::vector<double> out;
  out.reserve(patch.channels * kPatchFeaturesPerChannel);
  for (std::size_t ch = 0; ch < patch.channels; ++ch) {
    double sum = 0.0;
    std::array<double, kHistogramBins> hist{};
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double v = patch.at(ch, y, x);
        sum += v;
        const double clamped = std::clamp(v, 0.0, 1.0);
        const auto bin = std::min<std::size_t>(kHistogramBins - 1, static_cast<std::size_t>(clamped * kHistogramBins));
        hist[bin] += 1.0;
      }
    }
    const double mean = sum / n;
    double sq = 0.0, grad = 0.0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double v = patch.at(ch, y, x);
        sq += (v - mean) * (v - mean);
        if (y + 1 < h && x + 1 < w) {
          const double gx = patch.at(ch, y, x + 1) - v, gy = patch.at(ch, y + 1, x) - v;
          grad += std::sqrt(gx * gx + gy * gy);
        }
      }
    }
    out.push_back(mean);
    out.push_back(std::sqrt(sq / n));
    out.push_back(grad / static_cast<double>((w - 1) * (h - 1)));
    for (double c : hist) out.push_back(c / n);
  }
  return out;
}

}  // namespace consensus

#pragma once

// Deterministic desk-scale world: a ground-truth land-cover raster, N prior
// "products" that disagree with it (heavily inside an uncertain belt),
// spectral bands, a DEM, ecoregions and a patch renderer.
//
// Flip model: each product draws a white Gaussian field, box-blurs it with
// radius `flip_smoothing_radius`, rescales it to unit variance and flips the
// truth wherever Phi(z) < rate(pixel). Rate is `base_flip_rate` outside the
// belt and `belt_flip_rate` inside it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "agreement.hpp"
#include "error.hpp"
#include "features.hpp"
#include "land_cover.hpp"
#include "random.hpp"
#include "raster.hpp"
#include "samples.hpp"
#include "sampling.hpp"

namespace consensus {

struct WorldConfig {
  std::uint64_t seed = 20220607;
  std::size_t ncols = 240;
  std::size_t nrows = 240;
  double x_origin = 0.0;
  double y_origin = 0.0;
  double cellsize = 0.25;  // degrees; 20 pixels per 5-degree grid
  int n_products = 5;
  int n_ecoregions = 4;
  std::vector<double> ecoregion_ndvi_shift = {-0.12, -0.05, 0.05, 0.12};
  double grid_ndvi_jitter = 0.03;  // sd of a per-5-degree-grid NDVI offset
  double ndvi_noise = 0.06;
  double base_flip_rate = 0.03;
  double belt_flip_rate = 0.30;
  std::size_t belt_row_begin = 80;  // belt covers whole rows [begin, end)
  std::size_t belt_row_end = 140;
  int flip_smoothing_radius = 2;
  double forest_share = 0.45;
  double cloud_fraction = 0.01;
  // Sample draw
  int strata = 10;
  std::size_t per_stratum = 4000;

  void validate() const {
    require(ncols >= 16 && nrows >= 16, ErrorKind::config, "world must be at least 16x16");
    require(cellsize > 0.0, ErrorKind::config, "world cellsize must be positive");
    require(n_products >= 1 && n_products <= kPriorProducts, ErrorKind::config, "world needs 1..5 products");
    require(n_ecoregions >= 1 && n_ecoregions <= 16, ErrorKind::config, "ecoregions must be 1..16");
    require(ecoregion_ndvi_shift.size() == static_cast<std::size_t>(n_ecoregions), ErrorKind::config,
            "one NDVI shift per ecoregion required");
    require(base_flip_rate >= 0.0 && base_flip_rate < 0.5 && belt_flip_rate >= 0.0 && belt_flip_rate < 0.5,
            ErrorKind::config, "flip rates must be in [0, 0.5)");
    require(belt_flip_rate > base_flip_rate || (belt_flip_rate == 0.0 && base_flip_rate == 0.0), ErrorKind::config,
            "belt flip rate must exceed the base rate");
    require(belt_row_begin <= belt_row_end && belt_row_end <= nrows, ErrorKind::config, "belt rows out of range");
    require(cloud_fraction >= 0.0 && cloud_fraction < 1.0, ErrorKind::config, "cloud fraction must be in [0,1)");
    require(forest_share > 0.0 && forest_share < 1.0, ErrorKind::config, "forest share must be in (0,1)");
  }
};

/// Nominal class NDVI before ecoregion and grid offsets.
inline double class_ndvi(LandCoverClass c, bool in_belt) {
  switch (c) {
    case LandCoverClass::forest: return in_belt ? 0.52 : 0.70;
    case LandCoverClass::shrubland: return in_belt ? 0.44 : 0.45;
    case LandCoverClass::grassland: return in_belt ? 0.38 : 0.37;
    case LandCoverClass::cropland: return 0.30;
    case LandCoverClass::impervious: return 0.08;
    case LandCoverClass::water: return -0.35;
    case LandCoverClass::bare: return 0.04;
    default: return 0.2;
  }
}

namespace detail {

/// Smooth field with unit variance: bilinear value noise on a lattice of the
/// given spacing, octaves summed, then standardised.
inline std::vector<double> value_noise(std::size_t ncols, std::size_t nrows, double spacing, int octaves, Rng& rng) {
  std::vector<double> field(ncols * nrows, 0.0);
  double amplitude = 1.0;
  for (int o = 0; o < octaves; ++o) {
    const auto lc = static_cast<std::size_t>(std::ceil(static_cast<double>(ncols) / spacing)) + 2;
    const auto lr = static_cast<std::size_t>(std::ceil(static_cast<double>(nrows) / spacing)) + 2;
    std::vector<double> lattice(lc * lr);
    for (auto& v : lattice) v = rng.normal();
    for (std::size_t r = 0; r < nrows; ++r) {
      const double fy = static_cast<double>(r) / spacing;
      const auto y0 = static_cast<std::size_t>(fy);
      double ty = fy - static_cast<double>(y0);
      ty = ty * ty * (3.0 - 2.0 * ty);
      for (std::size_t c = 0; c < ncols; ++c) {
        const double fx = static_cast<double>(c) / spacing;
        const auto x0 = static_cast<std::size_t>(fx);
        double tx = fx - static_cast<double>(x0);
        tx = tx * tx * (3.0 - 2.0 * tx);
        const double a = lattice[y0 * lc + x0], b = lattice[y0 * lc + x0 + 1];
        const double d = lattice[(y0 + 1) * lc + x0], e = lattice[(y0 + 1) * lc + x0 + 1];
        field[r * ncols + c] += amplitude * ((a * (1 - tx) + b * tx) * (1 - ty) + (d * (1 - tx) + e * tx) * ty);
      }
    }
    amplitude *= 0.5;
    spacing = std::max(1.0, spacing / 2.0);
  }
  double mean = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(field.size());
  double var = 0.0;
  for (double v : field) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(field.size()));
  for (auto& v : field) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return field;
}

/// White noise, box-blurred with the given radius, rescaled to unit variance.
inline std::vector<double> smoothed_gaussian(std::size_t ncols, std::size_t nrows, int radius, Rng& rng) {
  std::vector<double> white(ncols * nrows);
  for (auto& v : white) v = rng.normal();
  if (radius <= 0) return white;
  std::vector<double> out(white.size(), 0.0);
  const auto rad = static_cast<long long>(radius);
  for (std::size_t r = 0; r < nrows; ++r) {
    for (std::size_t c = 0; c < ncols; ++c) {
      double sum = 0.0;
      int count = 0;
      for (long long dr = -rad; dr <= rad; ++dr) {
        for (long long dc = -rad; dc <= rad; ++dc) {
          const long long rr = static_cast<long long>(r) + dr, cc = static_cast<long long>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long long>(nrows) || cc >= static_cast<long long>(ncols)) continue;
          sum += white[static_cast<std::size_t>(rr) * ncols + static_cast<std::size_t>(cc)];
          ++count;
        }
      }
      // Variance of a mean of `count` unit normals is 1/count.
      out[r * ncols + c] = sum / std::sqrt(static_cast<double>(count));
    }
  }
  return out;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
  return v[k];
}

inline void fill_disk(Patch& p, double cx, double cy, double radius, const double rgb[3], double alpha) {
  const auto y0 = static_cast<long long>(std::floor(cy - radius)), y1 = static_cast<long long>(std::ceil(cy + radius));
  const auto x0 = static_cast<long long>(std::floor(cx - radius)), x1 = static_cast<long long>(std::ceil(cx + radius));
  for (long long y = std::max(0LL, y0); y <= std::min<long long>(static_cast<long long>(p.height) - 1, y1); ++y) {
    for (long long x = std::max(0LL, x0); x <= std::min<long long>(static_cast<long long>(p.width) - 1, x1); ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      if (dx * dx + dy * dy > radius * radius) continue;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double& v = p.at(ch, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        v = (1.0 - alpha) * v + alpha * rgb[ch];
      }
    }
  }
}

inline void fill_rect(Patch& p, long long x0, long long y0, long long w, long long h, const double rgb[3]) {
  for (long long y = std::max(0LL, y0); y < std::min<long long>(static_cast<long long>(p.height), y0 + h); ++y) {
    for (long long x = std::max(0LL, x0); x < std::min<long long>(static_cast<long long>(p.width), x0 + w); ++x) {
      for (std::size_t ch = 0; ch < 3; ++ch) p.at(ch, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = rgb[ch];
    }
  }
}

}  // namespace detail

struct WorldRasters {
  Raster truth_class;            // LandCoverClass as integer (unlabelable never appears)
  Raster truth;                  // binary forest
  std::vector<Raster> products;  // binary, one per prior product
  Raster blue, green, red, nir, swir1, swir2, ndvi, ndwi;
  Raster dem;
  Raster slope;
  Raster ecoregions;  // 1..n_ecoregions
  Raster belt;        // 1 inside the uncertain belt
};

class SyntheticWorld {
 public:
  explicit SyntheticWorld(WorldConfig config) : config_(std::move(config)) {
    config_.validate();
    generate();
  }

  const WorldConfig& config() const { return config_; }
  const WorldRasters& rasters() const { return r_; }

  AgreementRaster agreement() const { return overlay_votes(r_.products); }

  bool in_belt(std::size_t row) const { return row >= config_.belt_row_begin && row < config_.belt_row_end; }

  LandCoverClass class_at(std::size_t row, std::size_t col) const {
    return static_cast<LandCoverClass>(static_cast<int>(r_.truth_class.at(row, col)));
  }

  /// Cloud cover is a property of the location only.
  bool cloudy_at(double lon, double lat) const {
    if (config_.cloud_fraction <= 0.0) return false;
    Rng rng(derive_seed(config_.seed ^ 0xc10dULL, location_key(lon, lat)));
    return rng.uniform() < config_.cloud_fraction;
  }

  /// What a careful annotator would answer for this location.
  LandCoverClass observed_class(double lon, double lat) const {
    if (cloudy_at(lon, lat)) return LandCoverClass::unlabelable;
    const auto cell = r_.truth_class.locate(lon, lat);
    require(cell.has_value(), ErrorKind::argument, "location outside the world");
    return class_at(cell->row, cell->col);
  }

  /// 165x165 RGB patch centred on the location. Depends only on the location
  /// and the world seed.
  Patch render_patch(double lon, double lat) const;

  /// Stratified sample points turned into catalog entries, with the ground
  /// truth each would receive from a perfect annotator.
  struct SampleDraw {
    std::vector<SamplePoint> samples;
    std::unordered_map<SampleId, LandCoverClass> truth;
    std::vector<std::string> warnings;
  };
  SampleDraw draw_samples() const;

 private:
  static std::uint64_t location_key(double lon, double lat) {
    const auto qx = static_cast<std::int64_t>(std::llround(lon * 1e6));
    const auto qy = static_cast<std::int64_t>(std::llround(lat * 1e6));
    return splitmix64(static_cast<std::uint64_t>(qx)) ^ (static_cast<std::uint64_t>(qy) * 0x9e3779b97f4a7c15ULL);
  }

  void generate();

  WorldConfig config_;
  WorldRasters r_;
};

inline void SyntheticWorld::generate() {
  const auto& cfg = config_;
  const std::size_t nc = cfg.ncols, nr = cfg.nrows, n = nc * nr;
  const Raster base(nc, nr, cfg.x_origin, cfg.y_origin, cfg.cellsize, -9999.0, 0.0);

  Rng truth_rng(derive_seed(cfg.seed, 1));
  const auto forest_field = detail::value_noise(nc, nr, 14.0, 3, truth_rng);
  const auto cover_field = detail::value_noise(nc, nr, 10.0, 2, truth_rng);
  const double forest_cut = detail::quantile(forest_field, 1.0 - cfg.forest_share);

  r_.truth_class = base;
  r_.truth = base;
  r_.belt = base;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = i / nc;
    const bool belt = in_belt(row);
    r_.belt.values[i] = belt ? 1.0 : 0.0;
    LandCoverClass c;
    if (forest_field[i] > forest_cut) {
      c = LandCoverClass::forest;
    } else if (belt) {
      // Transition zones: mostly shrub and grass next to sparse forest.
      c = cover_field[i] > 0.0 ? LandCoverClass::shrubland : LandCoverClass::grassland;
    } else {
      const double u = detail::normal_cdf(cover_field[i]);
      if (u < 0.30) c = LandCoverClass::shrubland;
      else if (u < 0.55) c = LandCoverClass::grassland;
      else if (u < 0.75) c = LandCoverClass::cropland;
      else if (u < 0.83) c = LandCoverClass::bare;
      else if (u < 0.91) c = LandCoverClass::impervious;
      else c = LandCoverClass::water;
    }
    r_.truth_class.values[i] = static_cast<double>(static_cast<int>(c));
    r_.truth.values[i] = c == LandCoverClass::forest ? 1.0 : 0.0;
  }

  // Ecoregions: Voronoi cells around seeded sites.
  Rng eco_rng(derive_seed(cfg.seed, 2));
  std::vector<std::pair<double, double>> sites;
  for (int e = 0; e < cfg.n_ecoregions; ++e) {
    sites.emplace_back(eco_rng.uniform(0.0, static_cast<double>(nc)), eco_rng.uniform(0.0, static_cast<double>(nr)));
  }
  r_.ecoregions = base;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i % nc) + 0.5, y = static_cast<double>(i / nc) + 0.5;
    int best = 0;
    double best_d = 1e300;
    for (int e = 0; e < cfg.n_ecoregions; ++e) {
      const double dx = x - sites[static_cast<std::size_t>(e)].first, dy = y - sites[static_cast<std::size_t>(e)].second;
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = e;
      }
    }
    r_.ecoregions.values[i] = static_cast<double>(best + 1);
  }

  // Products.
  for (int p = 0; p < cfg.n_products; ++p) {
    Rng rng(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(p)));
    const auto z = detail::smoothed_gaussian(nc, nr, cfg.flip_smoothing_radius, rng);
    Raster product = r_.truth;
    for (std::size_t i = 0; i < n; ++i) {
      const double rate = in_belt(i / nc) ? cfg.belt_flip_rate : cfg.base_flip_rate;
      if (rate > 0.0 && detail::normal_cdf(z[i]) < rate) product.values[i] = 1.0 - product.values[i];
    }
    r_.products.push_back(std::move(product));
  }

  // Spectral bands driven by a target NDVI per pixel.
  Rng band_rng(derive_seed(cfg.seed, 3));
  const GridSpec grid5(5.0);
  std::unordered_map<long long, double> grid_offset;
  auto offset_for = [&](const GridId& id) {
    const long long key = id.col * 1000003LL + id.row;
    auto it = grid_offset.find(key);
    if (it != grid_offset.end()) return it->second;
    Rng g(derive_seed(cfg.seed ^ 0x9d1dULL, static_cast<std::uint64_t>(key)));
    const double v = g.normal(0.0, cfg.grid_ndvi_jitter);
    grid_offset.emplace(key, v);
    return v;
  };
  for (auto* band : {&r_.blue, &r_.green, &r_.red, &r_.nir, &r_.swir1, &r_.swir2, &r_.ndvi, &r_.ndwi}) *band = base;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = i / nc, col = i % nc;
    const auto c = class_at(row, col);
    const bool belt = in_belt(row);
    const auto eco = static_cast<std::size_t>(r_.ecoregions.values[i]) - 1;
    double target = class_ndvi(c, belt) + cfg.ecoregion_ndvi_shift[eco] + offset_for(grid5.id_of(base, row, col)) +
                    band_rng.normal(0.0, cfg.ndvi_noise);
    target = std::clamp(target, -0.95, 0.95);
    double red = std::clamp(0.10 - 0.06 * target + band_rng.normal(0.0, 0.006), 0.01, 0.6);
    if (c == LandCoverClass::water) red = std::clamp(0.04 + band_rng.normal(0.0, 0.004), 0.01, 0.2);
    const double nir = std::min(1.0, red * (1.0 + target) / (1.0 - target));
    const double green = std::clamp((c == LandCoverClass::water ? 0.09 : 0.08 - 0.02 * target) +
                                        band_rng.normal(0.0, 0.005), 0.005, 1.0);
    const double blue = std::clamp(0.07 - 0.03 * target + band_rng.normal(0.0, 0.005), 0.005, 1.0);
    const double dry = belt ? 0.04 : 0.0;
    const double swir1 = std::clamp(0.28 - 0.15 * target + dry + band_rng.normal(0.0, 0.01), 0.005, 1.0);
    const double swir2 = std::clamp(0.20 - 0.12 * target + dry + band_rng.normal(0.0, 0.01), 0.005, 1.0);
    r_.red.values[i] = red;
    r_.nir.values[i] = nir;
    r_.green.values[i] = green;
    r_.blue.values[i] = blue;
    r_.swir1.values[i] = swir1;
    r_.swir2.values[i] = swir2;
    r_.ndvi.values[i] = ndvi(nir, red);
    r_.ndwi.values[i] = consensus::ndwi(green, nir);
  }

  Rng dem_rng(derive_seed(cfg.seed, 4));
  const auto relief = detail::value_noise(nc, nr, 24.0, 4, dem_rng);
  r_.dem = base;
  for (std::size_t i = 0; i < n; ++i) r_.dem.values[i] = 900.0 + 600.0 * relief[i];
  // Horizontal spacing in metres at the equator; slope stays a weak feature.
  Raster s = consensus::slope(r_.dem, cfg.cellsize * 111320.0 / 40.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (s.is_nodata_at(i)) {
      // Edge pixels copy their inward neighbour so every sample has a slope.
      const std::size_t row = std::clamp<std::size_t>(i / nc, 1, nr - 2), col = std::clamp<std::size_t>(i % nc, 1, nc - 2);
      s.values[i] = s.at(row, col);
    }
  }
  r_.slope = std::move(s);
}

inline Patch SyntheticWorld::render_patch(double lon, double lat) const {
  const auto cell = r_.truth_class.locate(lon, lat);
  require(cell.has_value(), ErrorKind::argument, "render_patch: location outside the world");
  const auto c = class_at(cell->row, cell->col);
  const bool belt = in_belt(cell->row);
  Rng rng(derive_seed(config_.seed ^ 0x9a7c4ULL, location_key(lon, lat)));
  Patch p(kPatchSize, kPatchSize, 3, 0.0);
  const double size = static_cast<double>(kPatchSize);

  auto background = [&](double r, double g, double b, double jitter) {
    // Coarse value noise plus per-pixel jitter.
    const std::size_t lattice = 12;
    const std::size_t ln = kPatchSize / lattice + 2;
    std::vector<double> coarse(ln * ln);
    for (auto& v : coarse) v = rng.uniform(-1.0, 1.0);
    for (std::size_t y = 0; y < kPatchSize; ++y) {
      for (std::size_t x = 0; x < kPatchSize; ++x) {
        const double fy = static_cast<double>(y) / lattice, fx = static_cast<double>(x) / lattice;
        const auto y0 = static_cast<std::size_t>(fy), x0 = static_cast<std::size_t>(fx);
        const double ty = fy - static_cast<double>(y0), tx = fx - static_cast<double>(x0);
        const double n = (coarse[y0 * ln + x0] * (1 - tx) + coarse[y0 * ln + x0 + 1] * tx) * (1 - ty) +
                         (coarse[(y0 + 1) * ln + x0] * (1 - tx) + coarse[(y0 + 1) * ln + x0 + 1] * tx) * ty;
        const double shade = 0.05 * n + jitter * (rng.uniform() - 0.5);
        p.at(0, y, x) = r + shade;
        p.at(1, y, x) = g + shade;
        p.at(2, y, x) = b + shade;
      }
    }
  };

  switch (c) {
    case LandCoverClass::forest: {
      background(0.22, 0.30, 0.16, 0.04);
      const int crowns = belt ? 45 : 110;
      const double shadow[3] = {0.05, 0.07, 0.04};
      for (int k = 0; k < crowns; ++k) {
        const double x = rng.uniform(0.0, size), y = rng.uniform(0.0, size), rad = rng.uniform(5.0, 10.0);
        const double crown[3] = {0.10 + rng.uniform(0.0, 0.06), 0.32 + rng.uniform(0.0, 0.12), 0.10 + rng.uniform(0.0, 0.05)};
        detail::fill_disk(p, x + rad * 0.4, y + rad * 0.4, rad, shadow, 0.7);
        detail::fill_disk(p, x, y, rad, crown, 1.0);
      }
      break;
    }
    case LandCoverClass::shrubland: {
      background(0.55, 0.50, 0.36, 0.06);
      const double dot[3] = {0.25, 0.33, 0.18};
      const int shrubs = belt ? 220 : 160;
      for (int k = 0; k < shrubs; ++k) {
        detail::fill_disk(p, rng.uniform(0.0, size), rng.uniform(0.0, size), rng.uniform(1.0, 3.0), dot, 1.0);
      }
      break;
    }
    case LandCoverClass::grassland: background(0.48, 0.60, 0.30, 0.03); break;
    case LandCoverClass::cropland: {
      background(0.58, 0.62, 0.35, 0.02);
      const double freq = rng.uniform(0.2, 0.4);
      for (std::size_t y = 0; y < kPatchSize; ++y) {
        for (std::size_t x = 0; x < kPatchSize; ++x) {
          const double ridge = 0.08 * std::sin(freq * static_cast<double>(x + y));
          for (std::size_t ch = 0; ch < 3; ++ch) p.at(ch, y, x) += ridge;
        }
      }
      break;
    }
    case LandCoverClass::impervious: {
      background(0.62, 0.62, 0.62, 0.05);
      for (int k = 0; k < 25; ++k) {
        const double shade = rng.uniform(0.3, 0.9);
        const double roof[3] = {shade, shade * 0.95, shade * 0.9};
        detail::fill_rect(p, static_cast<long long>(rng.below(kPatchSize)), static_cast<long long>(rng.below(kPatchSize)),
                          8 + static_cast<long long>(rng.below(18)), 8 + static_cast<long long>(rng.below(18)), roof);
      }
      break;
    }
    case LandCoverClass::water: background(0.08, 0.16, 0.30, 0.01); break;
    case LandCoverClass::bare: background(0.70, 0.58, 0.44, 0.10); break;
    default: background(0.5, 0.5, 0.5, 0.05); break;
  }

  if (cloudy_at(lon, lat)) {
    const double white[3] = {0.97, 0.97, 0.98};
    for (int k = 0; k < 14; ++k) {
      detail::fill_disk(p, rng.uniform(0.0, size), rng.uniform(0.0, size), rng.uniform(25.0, 50.0), white, 0.9);
    }
  }
  for (auto& v : p.data) v = std::clamp(v, 0.0, 1.0);
  return p;
}

inline SyntheticWorld::SampleDraw SyntheticWorld::draw_samples() const {
  const auto agreement = overlay_votes(r_.products);
  const auto picked = stratified_sample(r_.ndvi, nullptr, config_.strata, config_.per_stratum, derive_seed(config_.seed, 5));
  SampleDraw draw;
  draw.warnings = picked.warnings;
  // Raster order keeps ids independent of stratum draw order.
  auto points = picked.points;
  std::sort(points.begin(), points.end(),
            [](const auto& a, const auto& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  const GridSpec grid5(5.0);
  SampleId next_id = 1;
  for (const auto& pt : points) {
    const std::size_t i = r_.ndvi.index(pt.row, pt.col);
    SamplePoint s;
    s.id = next_id++;
    s.lon = pt.lon;
    s.lat = pt.lat;
    s.grid_id = grid5.id_at(pt.lon, pt.lat).str();
    s.ecoregion_id = static_cast<int>(r_.ecoregions.values[i]);
    s.product_votes = static_cast<int>(agreement.raster.values[i]);
    s.features = {r_.blue.values[i], r_.green.values[i], r_.red.values[i],  r_.nir.values[i],  r_.swir1.values[i],
                  r_.swir2.values[i], r_.ndvi.values[i], r_.ndwi.values[i], r_.slope.values[i]};
    s.patch_ref = "r" + std::to_string(pt.row) + "_c" + std::to_string(pt.col);
    s.current_label = s.product_votes * 2 > config_.n_products ? BinaryLabel::forest : BinaryLabel::non_forest;
    s.label_source = LabelSource::product_consensus;
    draw.truth.emplace(s.id, observed_class(s.lon, s.lat));
    draw.samples.push_back(std::move(s));
  }
  return draw;
}

}  // namespace consensus

#pragma once

// Multi-product agreement: vote overlay, the 2-3 uncertainty ratio, 5-degree
// grid certainty, 0.5-degree forest fractions and pairwise product statistics.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "raster.hpp"
#include "text.hpp"

namespace consensus {

inline AgreementRaster overlay_votes(std::span<const Raster> products) {
  require(!products.empty(), ErrorKind::argument, "overlay_votes: no products given");
  require(products.size() >= 2, ErrorKind::argument, "overlay_votes: need at least two products");
  for (const auto& p : products) {
    p.validate();
    require_aligned(products.front(), p, "overlay_votes");
  }
  AgreementRaster out;
  out.n_products = static_cast<int>(products.size());
  out.raster = products.front().like(0.0);
  out.raster.nodata = -9999.0;
  for (std::size_t i = 0; i < out.raster.size(); ++i) {
    int votes = 0;
    bool missing = false;
    for (const auto& p : products) {
      const double v = p.values[i];
      if (p.is_nodata(v)) {
        missing = true;
        break;
      }
      if (v != 0.0 && v != 1.0) fail(ErrorKind::data, "overlay_votes: product value is not binary");
      votes += v == 1.0;
    }
    out.raster.values[i] = missing ? out.raster.nodata : static_cast<double>(votes);
  }
  return out;
}

/// Pixel count per agreement value 0..n_products over non-nodata pixels.
inline std::vector<std::size_t> agreement_histogram(const AgreementRaster& agreement) {
  std::vector<std::size_t> hist(static_cast<std::size_t>(agreement.n_products) + 1, 0);
  for (double v : agreement.raster.values) {
    if (agreement.raster.is_nodata(v)) continue;
    const auto k = static_cast<long long>(v);
    if (k < 0 || k > agreement.n_products || static_cast<double>(k) != v) {
      fail(ErrorKind::data, "agreement value out of range");
    }
    ++hist[static_cast<std::size_t>(k)];
  }
  return hist;
}

namespace detail {

struct UncertaintyTally {
  std::size_t total = 0;      // every pixel in the unit, nodata included
  std::size_t low_agree = 0;  // value 2 or 3
  std::size_t voted = 0;      // value >= 1

  void add(const Raster& r, double v) {
    ++total;
    if (r.is_nodata(v)) return;
    if (v >= 1.0) ++voted;
    if (v == 2.0 || v == 3.0) ++low_agree;
  }
};

}  // namespace detail

/// Ratio of pixels valued 2 or 3 to pixels valued >= 1 inside the region.
/// With no mask the whole raster is the region.
inline double uncertainty_23(const AgreementRaster& agreement, const Raster* region_mask = nullptr) {
  const Raster& r = agreement.raster;
  if (region_mask) require_aligned(r, *region_mask, "uncertainty_23");
  detail::UncertaintyTally tally;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (region_mask && (region_mask->is_nodata_at(i) || region_mask->values[i] != 1.0)) continue;
    tally.add(r, r.values[i]);
  }
  if (tally.voted == 0) fail(ErrorKind::undefined, "uncertainty_23: region has no pixel with agreement >= 1");
  return static_cast<double>(tally.low_agree) / static_cast<double>(tally.voted);
}

enum class GridCertainty { certain, uncertain, excluded };

inline const char* to_string(GridCertainty c) {
  switch (c) {
    case GridCertainty::certain: return "certain";
    case GridCertainty::uncertain: return "uncertain";
    case GridCertainty::excluded: return "excluded";
  }
  return "?";
}

struct GridCertaintyLabel {
  GridId grid_id;
  GridCertainty label = GridCertainty::excluded;
  std::optional<double> uncertainty_23;
  double valid_fraction = 0.0;
};

/// Labels every grid cell touched by the raster. A grid is excluded when the
/// share of pixels valued >= 1 is not above `min_valid_fraction`; otherwise
/// it is uncertain when its 2-3 ratio is strictly above `threshold`.
inline std::vector<GridCertaintyLabel> classify_grids(const AgreementRaster& agreement, const GridSpec& grids,
                                                      double threshold = 0.3, double min_valid_fraction = 0.10) {
  const Raster& r = agreement.raster;
  r.validate();
  std::map<GridId, detail::UncertaintyTally> tallies;
  for (std::size_t row = 0; row < r.nrows; ++row) {
    for (std::size_t col = 0; col < r.ncols; ++col) {
      tallies[grids.id_of(r, row, col)].add(r, r.at(row, col));
    }
  }
  std::vector<GridCertaintyLabel> labels;
  labels.reserve(tallies.size());
  for (const auto& [id, t] : tallies) {
    GridCertaintyLabel label;
    label.grid_id = id;
    label.valid_fraction = static_cast<double>(t.voted) / static_cast<double>(t.total);
    if (t.voted == 0 || label.valid_fraction <= min_valid_fraction) {
      label.label = GridCertainty::excluded;
    } else {
      label.uncertainty_23 = static_cast<double>(t.low_agree) / static_cast<double>(t.voted);
      label.label = *label.uncertainty_23 > threshold ? GridCertainty::uncertain : GridCertainty::certain;
    }
    labels.push_back(label);
  }
  return labels;
}

inline void write_grid_report(std::ostream& out, std::span<const GridCertaintyLabel> labels) {
  out << "grid_id,label,uncertainty_23,valid_fraction\n";
  for (const auto& l : labels) {
    out << l.grid_id.str() << ',' << to_string(l.label) << ','
        << (l.uncertainty_23 ? format_double(*l.uncertainty_23) : std::string()) << ','
        << format_double(l.valid_fraction) << '\n';
  }
}

/// Forest fraction of a binary raster on a coarser lattice aligned to whole
/// multiples of `coarse.cell_degrees`. Cells with no valid pixel are nodata.
inline Raster aggregate_fraction(const Raster& binary, const GridSpec& coarse) {
  binary.validate();
  const double ratio = coarse.cell_degrees / binary.cellsize;
  const double factor = std::round(ratio);
  if (factor < 1.0 || std::abs(ratio - factor) > 1e-9 * ratio) {
    fail(ErrorKind::geometry, "aggregate_fraction: coarse cell is not an integer multiple of the fine cellsize");
  }
  GridId lo{0, 0}, hi{0, 0};
  bool first = true;
  for (std::size_t row = 0; row < binary.nrows; ++row) {
    for (std::size_t col = 0; col < binary.ncols; ++col) {
      const GridId id = coarse.id_of(binary, row, col);
      if (first) {
        lo = hi = id;
        first = false;
      }
      lo.col = std::min(lo.col, id.col);
      lo.row = std::min(lo.row, id.row);
      hi.col = std::max(hi.col, id.col);
      hi.row = std::max(hi.row, id.row);
    }
  }
  const auto ncols = static_cast<std::size_t>(hi.col - lo.col + 1);
  const auto nrows = static_cast<std::size_t>(hi.row - lo.row + 1);
  const double nodata = (binary.nodata >= 0.0 && binary.nodata <= 1.0) ? -9999.0 : binary.nodata;
  Raster out(ncols, nrows, static_cast<double>(lo.col) * coarse.cell_degrees,
             static_cast<double>(lo.row) * coarse.cell_degrees, coarse.cell_degrees, nodata, 0.0);
  std::vector<std::size_t> forest(out.size(), 0), valid(out.size(), 0);
  for (std::size_t row = 0; row < binary.nrows; ++row) {
    for (std::size_t col = 0; col < binary.ncols; ++col) {
      const double v = binary.at(row, col);
      if (binary.is_nodata(v)) continue;
      if (v != 0.0 && v != 1.0) fail(ErrorKind::data, "aggregate_fraction: input is not binary");
      const GridId id = coarse.id_of(binary, row, col);
      const auto out_row = static_cast<std::size_t>(hi.row - id.row);
      const auto out_col = static_cast<std::size_t>(id.col - lo.col);
      const std::size_t k = out.index(out_row, out_col);
      ++valid[k];
      forest[k] += v == 1.0;
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.values[k] = valid[k] == 0 ? nodata : static_cast<double>(forest[k]) / static_cast<double>(valid[k]);
  }
  return out;
}

struct PairwiseStats {
  double slope = 0.0;      // least-squares slope of b on a
  double intercept = 0.0;
  double pearson_r = 0.0;
  double r_squared = 0.0;  // 1 - SS_res / SS_tot of the fit
  double rmse = 0.0;       // root mean square of (b - a)
  std::size_t n = 0;
};

/// Fit statistics over jointly valid cells of two aligned fraction rasters.
inline PairwiseStats pairwise_stats(const Raster& a, const Raster& b) {
  require_aligned(a, b, "pairwise_stats");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_nodata_at(i) || b.is_nodata_at(i)) continue;
    xs.push_back(a.values[i]);
    ys.push_back(b.values[i]);
  }
  const std::size_t n = xs.size();
  if (n < 2) fail(ErrorKind::statistics, "pairwise_stats: fewer than two jointly valid cells");
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += xs[i];
    mean_y += ys[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0, sq_diff = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mean_x, dy = ys[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
    sq_diff += (ys[i] - xs[i]) * (ys[i] - xs[i]);
  }
  if (sxx == 0.0) fail(ErrorKind::statistics, "pairwise_stats: zero variance in first raster");
  if (syy == 0.0) fail(ErrorKind::statistics, "pairwise_stats: zero variance in second raster");
  PairwiseStats s;
  s.n = n;
  s.slope = sxy / sxx;
  s.intercept = mean_y - s.slope * mean_x;
  s.pearson_r = sxy / std::sqrt(sxx * syy);
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - (s.intercept + s.slope * xs[i]);
    ss_res += e * e;
  }
  s.r_squared = 1.0 - ss_res / syy;
  s.rmse = std::sqrt(sq_diff / static_cast<double>(n));
  return s;
}

}  // namespace consensus

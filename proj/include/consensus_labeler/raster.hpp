#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace consensus {

struct CellIndex {
  std::size_t row = 0;
  std::size_t col = 0;
};

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
};

/// Georeferenced 2-D grid. Row 0 is the northern edge; (x_origin, y_origin)
/// is the lower-left corner of the lower-left cell, in degrees.
struct Raster {
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  double x_origin = 0.0;
  double y_origin = 0.0;
  double cellsize = 1.0;
  double nodata = -9999.0;
  std::vector<double> values;

  Raster() = default;
  Raster(std::size_t cols, std::size_t rows, double x0, double y0, double cell,
         double nodata_value = -9999.0, double fill = 0.0)
      : ncols(cols), nrows(rows), x_origin(x0), y_origin(y0), cellsize(cell),
        nodata(nodata_value), values(cols * rows, fill) {
    validate();
  }

  void validate() const {
    require(ncols >= 1 && nrows >= 1, ErrorKind::geometry, "raster needs at least one row and column");
    require(cellsize > 0.0 && std::isfinite(cellsize), ErrorKind::geometry, "cellsize must be positive");
    require(values.size() == ncols * nrows, ErrorKind::geometry, "value count does not match ncols*nrows");
  }

  std::size_t size() const { return values.size(); }
  std::size_t index(std::size_t row, std::size_t col) const { return row * ncols + col; }

  double& at(std::size_t row, std::size_t col) { return values[index(row, col)]; }
  double at(std::size_t row, std::size_t col) const { return values[index(row, col)]; }

  bool is_nodata(double v) const { return std::isnan(v) || v == nodata; }
  bool is_nodata_at(std::size_t i) const { return is_nodata(values[i]); }

  LonLat cell_center(std::size_t row, std::size_t col) const {
    return {x_origin + (static_cast<double>(col) + 0.5) * cellsize,
            y_origin + (static_cast<double>(nrows - row) - 0.5) * cellsize};
  }

  std::optional<CellIndex> locate(double lon, double lat) const {
    const double fc = std::floor((lon - x_origin) / cellsize);
    const double fr = std::floor((y_origin + static_cast<double>(nrows) * cellsize - lat) / cellsize);
    if (fc < 0 || fr < 0 || fc >= static_cast<double>(ncols) || fr >= static_cast<double>(nrows)) return std::nullopt;
    return CellIndex{static_cast<std::size_t>(fr), static_cast<std::size_t>(fc)};
  }

  bool same_georeference(const Raster& other) const {
    return ncols == other.ncols && nrows == other.nrows && x_origin == other.x_origin &&
           y_origin == other.y_origin && cellsize == other.cellsize;
  }

  /// Same georeference, new fill.
  Raster like(double fill) const {
    Raster out = *this;
    std::fill(out.values.begin(), out.values.end(), fill);
    return out;
  }

  bool operator==(const Raster&) const = default;
};

inline void require_aligned(const Raster& a, const Raster& b, const char* what) {
  if (!a.same_georeference(b)) fail(ErrorKind::alignment, std::string(what) + ": rasters do not share a georeference");
}

/// Per-pixel forest-vote counts of n_products aligned binary products.
struct AgreementRaster {
  Raster raster;
  int n_products = 0;
};

/// 5-degree classification grids or 0.5-degree aggregation grids. Ids are the
/// integer (col, row) of the lower-left corner in cell units.
struct GridId {
  long long col = 0;
  long long row = 0;

  std::string str() const { return "c" + std::to_string(col) + "_r" + std::to_string(row); }

  static GridId parse(std::string_view text) {
    const auto underscore = text.find('_');
    if (text.size() < 4 || text.front() != 'c' || underscore == std::string_view::npos ||
        underscore + 1 >= text.size() || text[underscore + 1] != 'r') {
      fail(ErrorKind::format, "bad grid id '" + std::string(text) + "'");
    }
    GridId id;
    id.col = parse_integer(text.substr(1, underscore - 1));
    id.row = parse_integer(text.substr(underscore + 2));
    return id;
  }

  auto operator<=>(const GridId&) const = default;
};

struct GridSpec {
  double cell_degrees = 5.0;

  explicit GridSpec(double degrees = 5.0) : cell_degrees(degrees) {
    require(degrees > 0.0 && std::isfinite(degrees), ErrorKind::geometry, "grid cell size must be positive");
  }

  GridId id_at(double lon, double lat) const {
    return {static_cast<long long>(std::floor(lon / cell_degrees)),
            static_cast<long long>(std::floor(lat / cell_degrees))};
  }

  GridId id_of(const Raster& raster, std::size_t row, std::size_t col) const {
    const auto c = raster.cell_center(row, col);
    return id_at(c.lon, c.lat);
  }

  LonLat lower_left(GridId id) const {
    return {static_cast<double>(id.col) * cell_degrees, static_cast<double>(id.row) * cell_degrees};
  }
};

// ---------------------------------------------------------------------------
// ESRI ASCII Grid

inline Raster read_ascii_grid(std::istream& in) {
  Raster r;
  bool have_cols = false, have_rows = false, have_x = false, have_y = false, have_cell = false;
  bool x_center = false, y_center = false;
  std::string token;
  std::streampos data_start = in.tellg();
  for (;;) {
    data_start = in.tellg();
    if (!(in >> token)) break;
    const std::string key = to_lower(token);
    const bool is_key = !key.empty() && std::isalpha(static_cast<unsigned char>(key[0]));
    if (!is_key) {
      in.clear();
      in.seekg(data_start);
      break;
    }
    std::string value;
    if (!(in >> value)) fail(ErrorKind::format, "missing value for header key " + token);
    if (key == "ncols") { r.ncols = static_cast<std::size_t>(parse_integer(value)); have_cols = true; }
    else if (key == "nrows") { r.nrows = static_cast<std::size_t>(parse_integer(value)); have_rows = true; }
    else if (key == "xllcorner") { r.x_origin = parse_double(value); have_x = true; }
    else if (key == "yllcorner") { r.y_origin = parse_double(value); have_y = true; }
    else if (key == "xllcenter") { r.x_origin = parse_double(value); have_x = x_center = true; }
    else if (key == "yllcenter") { r.y_origin = parse_double(value); have_y = y_center = true; }
    else if (key == "cellsize") { r.cellsize = parse_double(value); have_cell = true; }
    else if (key == "nodata_value") { r.nodata = parse_double(value); }
    else fail(ErrorKind::format, "unknown ASCII grid header key " + token);
  }
  require(have_cols && have_rows && have_x && have_y && have_cell, ErrorKind::format,
          "ASCII grid header incomplete");
  if (x_center) r.x_origin -= r.cellsize / 2.0;
  if (y_center) r.y_origin -= r.cellsize / 2.0;
  require(r.ncols >= 1 && r.nrows >= 1 && r.cellsize > 0.0, ErrorKind::geometry, "ASCII grid has invalid geometry");
  r.values.reserve(r.ncols * r.nrows);
  while (in >> token) r.values.push_back(parse_double(token));
  require(r.values.size() == r.ncols * r.nrows, ErrorKind::format,
          "ASCII grid has " + std::to_string(r.values.size()) + " values, expected " +
              std::to_string(r.ncols * r.nrows));
  return r;
}

inline Raster read_ascii_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  // Normalise CRLF so the header scan and value parse see plain whitespace.
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  for (auto& c : text) if (c == '\r') c = ' ';
  std::istringstream clean(text);
  return read_ascii_grid(clean);
}

inline void write_ascii_grid(std::ostream& out, const Raster& r) {
  r.validate();
  out << "ncols " << r.ncols << '\n'
      << "nrows " << r.nrows << '\n'
      << "xllcorner " << format_double(r.x_origin) << '\n'
      << "yllcorner " << format_double(r.y_origin) << '\n'
      << "cellsize " << format_double(r.cellsize) << '\n'
      << "NODATA_value " << format_double(r.nodata) << '\n';
  for (std::size_t row = 0; row < r.nrows; ++row) {
    for (std::size_t col = 0; col < r.ncols; ++col) {
      if (col) out << ' ';
      out << format_double(r.at(row, col));
    }
    out << '\n';
  }
}

inline void write_ascii_grid(const std::string& path, const Raster& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  write_ascii_grid(out, r);
}

}  // namespace consensus

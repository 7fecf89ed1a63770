#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "error.hpp"

namespace consensus {

enum class LandCoverClass {
  forest,
  shrubland,
  grassland,
  cropland,
  impervious,
  water,
  bare,
  other,
  unlabelable,
};

inline constexpr std::array<LandCoverClass, 9> kAllClasses = {
    LandCoverClass::forest,     LandCoverClass::shrubland, LandCoverClass::grassland,
    LandCoverClass::cropland,   LandCoverClass::impervious, LandCoverClass::water,
    LandCoverClass::bare,       LandCoverClass::other,     LandCoverClass::unlabelable,
};

inline const char* to_string(LandCoverClass c) {
  switch (c) {
    case LandCoverClass::forest: return "forest";
    case LandCoverClass::shrubland: return "shrubland";
    case LandCoverClass::grassland: return "grassland";
    case LandCoverClass::cropland: return "cropland";
    case LandCoverClass::impervious: return "impervious";
    case LandCoverClass::water: return "water";
    case LandCoverClass::bare: return "bare";
    case LandCoverClass::other: return "other";
    case LandCoverClass::unlabelable: return "unlabelable";
  }
  return "?";
}

inline LandCoverClass parse_land_cover(std::string_view text) {
  for (auto c : kAllClasses) {
    if (text == to_string(c)) return c;
  }
  fail(ErrorKind::format, "unknown land-cover class '" + std::string(text) + "'");
}

enum class BinaryLabel : int { non_forest = 0, forest = 1 };

inline const char* to_string(BinaryLabel b) { return b == BinaryLabel::forest ? "forest" : "non-forest"; }

inline BinaryLabel parse_binary_label(std::string_view text) {
  if (text == "forest" || text == "1") return BinaryLabel::forest;
  if (text == "non-forest" || text == "non_forest" || text == "0") return BinaryLabel::non_forest;
  fail(ErrorKind::format, "unknown binary label '" + std::string(text) + "'");
}

/// Forest stays forest, every other class is non-forest, unlabelable has no
/// binary label at all.
inline std::optional<BinaryLabel> binary_projection(LandCoverClass c) {
  if (c == LandCoverClass::unlabelable) return std::nullopt;
  return c == LandCoverClass::forest ? BinaryLabel::forest : BinaryLabel::non_forest;
}

/// Annotation guidance shown next to each class in the labeling console.
inline const char* guideline_text(LandCoverClass c) {
  switch (c) {
    case LandCoverClass::forest:
      return "Tree-cover percentage above 15% and tree height above 3 m. Dense, large crowns with "
             "obvious shadow and a clear height difference from the ground; usually in patches.";
    case LandCoverClass::shrubland:
      return "Small, scattered vegetation with little shadow, visible ground between plants and no "
             "obvious crown structure.";
    case LandCoverClass::grassland:
      return "Continuous, flat texture with low height.";
    case LandCoverClass::cropland:
      return "Flat fields with regular boundaries and ridge-like lines.";
    case LandCoverClass::impervious:
      return "Buildings, cement, roads.";
    case LandCoverClass::water:
      return "Open water surfaces.";
    case LandCoverClass::bare:
      return "Exposed soil, sand or rock with no vegetation.";
    case LandCoverClass::other:
      return "Any other identifiable land cover.";
    case LandCoverClass::unlabelable:
      return "Too many clouds or shadows, abnormal color or blurred imagery: do not label.";
  }
  return "";
}

}  // namespace consensus

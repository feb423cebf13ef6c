#pragma once

#include <array>
#include <cmath>
#include <string>

namespace navpruner {

struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline double euclidean(const Position& a, const Position& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Angles are degrees throughout. Bearings are measured clockwise from +y
// ("north"), so +x is a bearing of 90.
inline double normalize_deg(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d < 0.0) d += 360.0;
  return d;
}

// Bearing of the horizontal displacement from `from` to `to`.
// Callers must reject zero horizontal displacement first.
inline double bearing_deg(const Position& from, const Position& to) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  return normalize_deg(std::atan2(dx, dy) * 180.0 / M_PI);
}

inline constexpr int kNumSectors = 8;

inline const std::array<std::string, kNumSectors>& sector_names() {
  static const std::array<std::string, kNumSectors> names = {
      "Front",     "Front-Right", "Right", "Rear-Right",
      "Rear",      "Rear-Left",   "Left",  "Front-Left"};
  return names;
}

// Sector index for a relative heading in [0, 360). Boundaries at exact
// multiples of 22.5 round up to the higher sector (22.5 -> sector 1).
inline int sector_of(double rel_heading_deg) {
  const double rel = normalize_deg(rel_heading_deg);
  return static_cast<int>(std::floor(rel / 45.0 + 0.5)) % kNumSectors;
}

}  // namespace navpruner

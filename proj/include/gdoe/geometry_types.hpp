#pragma once

#include <string>

namespace gdoe {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Which coordinate system a latent point is expressed in.
enum class LatentSpace {
  kUniformed,  // per-axis normal CDF image, (0,1)^2
  kOriginal,   // the encoder's 2D latent plane
};

std::string to_string(LatentSpace space);
LatentSpace latent_space_from_string(const std::string& text);

}  // namespace gdoe

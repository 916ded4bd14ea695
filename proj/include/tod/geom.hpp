#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "tod/error.hpp"

namespace tod {

// Axis-aligned box in pixel coordinates, MOT layout (left, top, width, height).
struct BoundingBox {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;

  double right() const noexcept { return left + width; }
  double bottom() const noexcept { return top + height; }
  double area() const noexcept { return width * height; }

  bool valid() const noexcept {
    return std::isfinite(left) && std::isfinite(top) && std::isfinite(width) &&
           std::isfinite(height) && width > 0.0 && height > 0.0;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ImageDims {
  int width = 0;
  int height = 0;

  bool valid() const noexcept { return width > 0 && height > 0; }
  double area() const noexcept { return static_cast<double>(width) * static_cast<double>(height); }

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

inline void require_valid(const ImageDims& dims) {
  if (!dims.valid()) {
    throw ConfigError("image dimensions must be positive, got " + std::to_string(dims.width) +
                      "x" + std::to_string(dims.height));
  }
}

// Box area as a fraction of the image area. Not clamped: boxes hanging off the
// frame (or full-frame false positives) keep their raw size.
inline double area_fraction(const BoundingBox& box, const ImageDims& dims) {
  require_valid(dims);
  return box.area() / dims.area();
}

inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left, b.left);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top, b.top);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

// Empty input yields 0 (the scheduler's "no boxes seen yet" state). Even-length
// inputs average the two middle order statistics.
inline double median(std::span<const double> values) {
  if (values.empty()) return 0.0;
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

}  // namespace tod

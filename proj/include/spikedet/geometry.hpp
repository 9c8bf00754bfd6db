#pragma once

#include <algorithm>
#include <string>

namespace spikedet {

struct SensorGeometry {
  int width = 0;
  int height = 0;
  std::string name;
};

// Axis-aligned box, pixel units, (x, y) = top-left corner.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double x2() const { return x + w; }
  double y2() const { return y + h; }
};

inline bool operator==(const Box& a, const Box& b) {
  return a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h;
}

inline double iou(const Box& a, const Box& b) {
  double ix = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x, b.x));
  double iy = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y, b.y));
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline Box clip_to(const Box& b, const SensorGeometry& g) {
  double x1 = std::clamp(b.x, 0.0, static_cast<double>(g.width));
  double y1 = std::clamp(b.y, 0.0, static_cast<double>(g.height));
  double x2 = std::clamp(b.x2(), 0.0, static_cast<double>(g.width));
  double y2 = std::clamp(b.y2(), 0.0, static_cast<double>(g.height));
  return Box{x1, y1, x2 - x1, y2 - y1};
}

}  // namespace spikedet

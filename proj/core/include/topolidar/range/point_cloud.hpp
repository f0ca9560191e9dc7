#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace topolidar::range {

using Point3 = std::array<double, 3>;

struct PointCloud {
  std::vector<Point3> points;
  std::vector<double> intensity;  // empty, or one value per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

}  // namespace topolidar::range

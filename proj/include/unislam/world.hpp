/*
 * Copyright 2026 The UniSLAM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef UNISLAM_WORLD_HPP_
#define UNISLAM_WORLD_HPP_

#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace unislam {

// Sentinel for a ray that hits nothing within max range.
constexpr double kRayMiss = std::numeric_limits<double>::infinity();

// Axis-aligned solid box, given by its min and max corners (meters).
struct Box {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
};

// A world made of solid axis-aligned boxes (walls, ceiling, floor,
// obstacles). Free space is everything not covered by a box.
class WorldModel {
 public:
  void AddBox(const Eigen::Vector3d& min, const Eigen::Vector3d& max) {
    for (int i = 0; i < 3; ++i) {
      if (!(max[i] > min[i])) {
        throw std::invalid_argument(
            "WorldModel::AddBox: box must have positive extent on every axis");
      }
    }
    boxes_.push_back(Box{min, max});
  }

  const std::vector<Box>& boxes() const { return boxes_; }

  // True if the point lies inside (or on the surface of) any solid box.
  bool IsOccupied(const Eigen::Vector3d& p) const {
    for (const Box& b : boxes_) {
      if (p.x() >= b.min.x() && p.x() <= b.max.x() && p.y() >= b.min.y() &&
          p.y() <= b.max.y() && p.z() >= b.min.z() && p.z() <= b.max.z()) {
        return true;
      }
    }
    return false;
  }

 private:
  std::vector<Box> boxes_;
};

// Slab-method intersection of a ray with one box. Returns the parameter of
// the first surface crossing with t >= 0, or kRayMiss.
inline double RayBoxIntersection(const Box& box, const Eigen::Vector3d& origin,
                                 const Eigen::Vector3d& direction) {
  double t_low = -std::numeric_limits<double>::infinity();
  double t_high = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(direction[i]) < 1e-15) {
      if (origin[i] < box.min[i] || origin[i] > box.max[i]) {
        return kRayMiss;
      }
      continue;
    }
    const double inv = 1.0 / direction[i];
    double t0 = (box.min[i] - origin[i]) * inv;
    double t1 = (box.max[i] - origin[i]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_low) t_low = t0;
    if (t1 < t_high) t_high = t1;
  }
  if (t_high < t_low) return kRayMiss;
  if (t_low >= 0.0) return t_low;
  // Origin inside the box: the first surface along the ray is the exit face.
  if (t_high >= 0.0) return t_high;
  return kRayMiss;
}

// Distance to the nearest box surface along the ray, or kRayMiss if nothing
// is hit within max_range. Direction must be unit-norm.
inline double RayCast(const WorldModel& world, const Eigen::Vector3d& origin,
                      const Eigen::Vector3d& direction, double max_range) {
  double best = kRayMiss;
  for (const Box& box : world.boxes()) {
    const double t = RayBoxIntersection(box, origin, direction);
    if (t < best) best = t;
  }
  return best <= max_range ? best : kRayMiss;
}

// Distance from a point to the nearest box surface (zero on a surface).
// Used to verify that simulated scan endpoints lie on world geometry.
inline double DistanceToNearestSurface(const WorldModel& world,
                                       const Eigen::Vector3d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Box& b : world.boxes()) {
    // Distance to the box boundary: outside it is the usual clamped
    // distance, inside it is the smallest distance to a face plane.
    Eigen::Vector3d delta = Eigen::Vector3d::Zero();
    bool inside = true;
    double min_face = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
      if (p[i] < b.min[i]) {
        delta[i] = b.min[i] - p[i];
        inside = false;
      } else if (p[i] > b.max[i]) {
        delta[i] = p[i] - b.max[i];
        inside = false;
      } else {
        min_face = std::min({min_face, p[i] - b.min[i], b.max[i] - p[i]});
      }
    }
    const double d = inside ? min_face : delta.norm();
    best = std::min(best, d);
  }
  return best;
}

}  // namespace unislam

#endif  // UNISLAM_WORLD_HPP_

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

#ifndef UNISLAM_VOXEL_GRID_HPP_
#define UNISLAM_VOXEL_GRID_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace unislam {

struct VoxelIndex {
  int32_t x = 0;
  int32_t y = 0;
  int32_t z = 0;

  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
  friend auto operator<=>(const VoxelIndex&, const VoxelIndex&) = default;
};

// Bounded occupancy grid over a fixed axis-aligned box. Occupancy is
// hit-only and monotone: voxels are only ever set, never cleared, and
// insertion reports exactly the free->occupied transitions so the distance
// map can be updated incrementally.
class VoxelGrid {
 public:
  VoxelGrid(double resolution, const Eigen::Vector3d& origin,
            const Eigen::Vector3i& dims)
      : resolution_(resolution), origin_(origin), dims_(dims) {
    if (!(resolution > 0.0) || (dims.array() <= 0).any()) {
      throw std::invalid_argument("VoxelGrid: bad resolution or dimensions");
    }
    occupancy_.assign(static_cast<size_t>(dims_.x()) * dims_.y() * dims_.z(),
                      0);
  }

  double resolution() const { return resolution_; }
  const Eigen::Vector3d& origin() const { return origin_; }
  const Eigen::Vector3i& dims() const { return dims_; }

  std::optional<VoxelIndex> IndexAt(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d scaled = (p - origin_) / resolution_;
    const int32_t ix = static_cast<int32_t>(std::floor(scaled.x()));
    const int32_t iy = static_cast<int32_t>(std::floor(scaled.y()));
    const int32_t iz = static_cast<int32_t>(std::floor(scaled.z()));
    if (ix < 0 || iy < 0 || iz < 0 || ix >= dims_.x() || iy >= dims_.y() ||
        iz >= dims_.z()) {
      return std::nullopt;
    }
    return VoxelIndex{ix, iy, iz};
  }

  Eigen::Vector3d CenterOf(const VoxelIndex& v) const {
    return origin_ + resolution_ * Eigen::Vector3d(v.x + 0.5, v.y + 0.5,
                                                   v.z + 0.5);
  }

  bool IsOccupied(const VoxelIndex& v) const {
    return occupancy_[LinearIndex(v)] != 0;
  }

  // Voxelizes the points and returns the voxels that became occupied by this
  // call. Re-inserting an occupied voxel changes nothing; points outside the
  // bounding box are dropped.
  std::vector<VoxelIndex> InsertPoints(
      const std::vector<Eigen::Vector3d>& points) {
    std::vector<VoxelIndex> changes;
    for (const Eigen::Vector3d& p : points) {
      const std::optional<VoxelIndex> index = IndexAt(p);
      if (!index) continue;
      uint8_t& cell = occupancy_[LinearIndex(*index)];
      if (cell == 0) {
        cell = 1;
        changes.push_back(*index);
        occupied_.push_back(*index);
      }
    }
    return changes;
  }

  // All occupied voxels in insertion order.
  const std::vector<VoxelIndex>& occupied() const { return occupied_; }

  // Lexicographically sorted copy; map export iterates this so files are
  // reproducible.
  std::vector<VoxelIndex> SortedOccupied() const {
    std::vector<VoxelIndex> sorted = occupied_;
    std::sort(sorted.begin(), sorted.end());
    return sorted;
  }

  // Frees the dense occupancy bitmap once a submap is finished; only the
  // occupied list is needed afterwards (export and loop closure).
  void ReleaseBitmap() {
    occupancy_.clear();
    occupancy_.shrink_to_fit();
  }

 private:
  size_t LinearIndex(const VoxelIndex& v) const {
    return (static_cast<size_t>(v.z) * dims_.y() + v.y) * dims_.x() + v.x;
  }

  double resolution_;
  Eigen::Vector3d origin_;
  Eigen::Vector3i dims_;
  std::vector<uint8_t> occupancy_;
  std::vector<VoxelIndex> occupied_;
};

}  // namespace unislam

#endif  // UNISLAM_VOXEL_GRID_HPP_

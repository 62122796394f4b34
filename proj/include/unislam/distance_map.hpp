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

#ifndef UNISLAM_DISTANCE_MAP_HPP_
#define UNISLAM_DISTANCE_MAP_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "unislam/voxel_grid.hpp"

namespace unislam {

namespace internal {

constexpr int64_t kSqInf = int64_t{1} << 50;

// One-dimensional squared Euclidean distance transform (lower envelope of
// parabolas). f and d may alias distinct buffers of length n; f entries are
// either exact squared distances or kSqInf.
inline void SquaredEdt1d(const int64_t* f, int64_t* d, int n, int32_t* v,
                         double* z) {
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kSqInf) continue;
    double s = 0.0;
    while (k >= 0) {
      const int p = v[k];
      s = (static_cast<double>(f[q] - f[p]) +
           static_cast<double>(q) * q - static_cast<double>(p) * p) /
          (2.0 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -std::numeric_limits<double>::infinity() : s;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = kSqInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (j < k && z[j + 1] < q) ++j;
    const int64_t dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace internal

// Immutable truncated Euclidean distance field over the same lattice as a
// VoxelGrid. Distances are voxel-center to voxel-center, clamped at
// max_distance. Each incremental update produces a new snapshot; readers
// holding an old snapshot are unaffected.
//
// Internally the field is kept as exact integer squared distances in voxel
// units, so the incremental update (a windowed distance transform over the
// newly occupied voxels, folded in with a min) stays exactly equal to a
// from-scratch transform over all occupied voxels.
class DistanceMap {
 public:
  DistanceMap(double resolution, const Eigen::Vector3d& origin,
              const Eigen::Vector3i& dims, double max_distance)
      : resolution_(resolution),
        origin_(origin),
        dims_(dims),
        max_distance_(max_distance) {
    if (!(resolution > 0.0) || !(max_distance > resolution) ||
        (dims.array() <= 0).any()) {
      throw std::invalid_argument("DistanceMap: bad construction parameters");
    }
    const double cells = max_distance / resolution;
    sq_cap_ = static_cast<int64_t>(std::ceil(cells * cells - 1e-12));
    sq_ = std::make_shared<std::vector<int64_t>>(CellCount(), sq_cap_);
    meters_.assign(CellCount(), static_cast<float>(max_distance));
  }

  double resolution() const { return resolution_; }
  const Eigen::Vector3d& origin() const { return origin_; }
  const Eigen::Vector3i& dims() const { return dims_; }
  double max_distance() const { return max_distance_; }
  uint64_t version() const { return version_; }
  bool compacted() const { return sq_ == nullptr; }

  // Clamped distance lookup for a point in the map frame. Points outside
  // the bounding box read as max_distance.
  double Distance(const Eigen::Vector3d& p) const {
    const double sx = (p.x() - origin_.x()) * inv_resolution();
    const double sy = (p.y() - origin_.y()) * inv_resolution();
    const double sz = (p.z() - origin_.z()) * inv_resolution();
    const int32_t ix = static_cast<int32_t>(std::floor(sx));
    const int32_t iy = static_cast<int32_t>(std::floor(sy));
    const int32_t iz = static_cast<int32_t>(std::floor(sz));
    if (ix < 0 || iy < 0 || iz < 0 || ix >= dims_.x() || iy >= dims_.y() ||
        iz >= dims_.z()) {
      return max_distance_;
    }
    return meters_[(static_cast<size_t>(iz) * dims_.y() + iy) * dims_.x() +
                   ix];
  }

  double DistanceAtVoxel(const VoxelIndex& v) const {
    return meters_[LinearIndex(v)];
  }

  // Exact distance in meters computed from the integer squared field; used
  // by verification against the brute-force transform. Unavailable after
  // Compact().
  double ExactDistanceAtVoxel(const VoxelIndex& v) const {
    if (!sq_) {
      throw std::logic_error("DistanceMap: exact field was compacted away");
    }
    return ExactFromSq((*sq_)[LinearIndex(v)]);
  }

  int64_t SquaredCellDistanceAtVoxel(const VoxelIndex& v) const {
    if (!sq_) {
      throw std::logic_error("DistanceMap: exact field was compacted away");
    }
    return (*sq_)[LinearIndex(v)];
  }

  // Returns a snapshot with the given newly occupied voxels folded in:
  // d'(v) = min(d(v), dist(v, changes)), computed by a windowed exact
  // distance transform around the changes. An empty change set returns this
  // snapshot unchanged (same version).
  std::shared_ptr<const DistanceMap> WithInserted(
      const std::vector<VoxelIndex>& changes,
      std::shared_ptr<const DistanceMap> self) const {
    if (changes.empty()) return self;
    auto next = std::make_shared<DistanceMap>(*this);
    next->version_ = version_ + 1;
    next->sq_ = std::make_shared<std::vector<int64_t>>(*sq_);
    next->FoldInChanges(changes);
    return next;
  }

  // Drops the integer field and keeps only the float meters field; finished
  // submaps are kept for loop closure and export, where the compact form is
  // enough.
  std::shared_ptr<const DistanceMap> Compacted() const {
    auto compact = std::make_shared<DistanceMap>(*this);
    compact->sq_ = nullptr;
    return compact;
  }

 private:
  double inv_resolution() const { return 1.0 / resolution_; }

  size_t CellCount() const {
    return static_cast<size_t>(dims_.x()) * dims_.y() * dims_.z();
  }

  size_t LinearIndex(const VoxelIndex& v) const {
    return (static_cast<size_t>(v.z) * dims_.y() + v.y) * dims_.x() + v.x;
  }

  double ExactFromSq(int64_t sq) const {
    return std::min(resolution_ * std::sqrt(static_cast<double>(sq)),
                    max_distance_);
  }

  void FoldInChanges(const std::vector<VoxelIndex>& changes) {
    // Window: bounding box of the changes inflated by the clamp reach.
    const int32_t reach =
        static_cast<int32_t>(
            std::ceil(std::sqrt(static_cast<double>(sq_cap_)))) +
        1;
    Eigen::Vector3i lo = dims_;
    Eigen::Vector3i hi = Eigen::Vector3i::Constant(-1);
    for (const VoxelIndex& c : changes) {
      lo = lo.cwiseMin(Eigen::Vector3i(c.x, c.y, c.z));
      hi = hi.cwiseMax(Eigen::Vector3i(c.x, c.y, c.z));
    }
    lo = (lo.array() - reach).max(0).matrix();
    hi = (hi.array() + reach).min(dims_.array() - 1).matrix();
    const Eigen::Vector3i window = hi - lo + Eigen::Vector3i::Ones();
    const size_t window_cells =
        static_cast<size_t>(window.x()) * window.y() * window.z();

    // Squared distance to the change set only, by three separable passes.
    std::vector<int64_t> field(window_cells, internal::kSqInf);
    const auto window_index = [&](int32_t x, int32_t y, int32_t z) {
      return (static_cast<size_t>(z) * window.y() + y) * window.x() + x;
    };
    for (const VoxelIndex& c : changes) {
      field[window_index(c.x - lo.x(), c.y - lo.y(), c.z - lo.z())] = 0;
    }

    const int max_extent =
        std::max({window.x(), window.y(), window.z()});
    std::vector<int64_t> line_in(max_extent), line_out(max_extent);
    std::vector<int32_t> hull(max_extent);
    std::vector<double> breaks(max_extent + 1);

    for (int32_t z = 0; z < window.z(); ++z) {
      for (int32_t y = 0; y < window.y(); ++y) {
        for (int32_t x = 0; x < window.x(); ++x)
          line_in[x] = field[window_index(x, y, z)];
        internal::SquaredEdt1d(line_in.data(), line_out.data(), window.x(),
                               hull.data(), breaks.data());
        for (int32_t x = 0; x < window.x(); ++x)
          field[window_index(x, y, z)] = line_out[x];
      }
    }
    for (int32_t z = 0; z < window.z(); ++z) {
      for (int32_t x = 0; x < window.x(); ++x) {
        for (int32_t y = 0; y < window.y(); ++y)
          line_in[y] = field[window_index(x, y, z)];
        internal::SquaredEdt1d(line_in.data(), line_out.data(), window.y(),
                               hull.data(), breaks.data());
        for (int32_t y = 0; y < window.y(); ++y)
          field[window_index(x, y, z)] = line_out[y];
      }
    }
    for (int32_t y = 0; y < window.y(); ++y) {
      for (int32_t x = 0; x < window.x(); ++x) {
        for (int32_t z = 0; z < window.z(); ++z)
          line_in[z] = field[window_index(x, y, z)];
        internal::SquaredEdt1d(line_in.data(), line_out.data(), window.z(),
                               hull.data(), breaks.data());
        for (int32_t z = 0; z < window.z(); ++z)
          field[window_index(x, y, z)] = line_out[z];
      }
    }

    std::vector<int64_t>& sq = *sq_;
    for (int32_t z = 0; z < window.z(); ++z) {
      for (int32_t y = 0; y < window.y(); ++y) {
        for (int32_t x = 0; x < window.x(); ++x) {
          const int64_t candidate =
              std::min(field[window_index(x, y, z)], sq_cap_);
          const size_t global = LinearIndex(
              VoxelIndex{x + lo.x(), y + lo.y(), z + lo.z()});
          if (candidate < sq[global]) {
            sq[global] = candidate;
            meters_[global] = static_cast<float>(ExactFromSq(candidate));
          }
        }
      }
    }
  }

  double resolution_;
  Eigen::Vector3d origin_;
  Eigen::Vector3i dims_;
  double max_distance_;
  int64_t sq_cap_ = 0;
  uint64_t version_ = 0;
  std::shared_ptr<std::vector<int64_t>> sq_;
  std::vector<float> meters_;
};

inline std::shared_ptr<const DistanceMap> UpdateDistanceMap(
    std::shared_ptr<const DistanceMap> map,
    const std::vector<VoxelIndex>& changes) {
  return map->WithInserted(changes, map);
}

}  // namespace unislam

#endif  // UNISLAM_DISTANCE_MAP_HPP_

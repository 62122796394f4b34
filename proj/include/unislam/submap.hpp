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

#ifndef UNISLAM_SUBMAP_HPP_
#define UNISLAM_SUBMAP_HPP_

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "unislam/distance_map.hpp"
#include "unislam/geometry.hpp"
#include "unislam/lidar_sim.hpp"
#include "unislam/voxel_grid.hpp"

namespace unislam {

struct LifecycleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// N line scans fused into one 3D scan. Points live in the reference frame
// (the body pose at accumulation end); fusing with the per-scan poses keeps
// a rotating LiDAR's sweep distortion-free.
struct AccumulatedScan {
  int id = 0;
  double t = 0.0;
  Pose reference;  // body pose in the world at accumulation end
  std::vector<Eigen::Vector3d> points;
  int source_scan_count = 0;
};

// Fuses line scans into one 3D scan. Each scan's endpoints are lifted to the
// world with that scan's own sensor pose, then expressed in the reference
// frame. Misses are dropped.
inline AccumulatedScan AccumulateScans(
    int id, const std::vector<LineScan>& scans,
    const std::vector<Pose>& sensor_poses_world, const LidarModel& lidar,
    const Pose& reference_body_pose) {
  if (scans.empty() || scans.size() != sensor_poses_world.size()) {
    throw std::invalid_argument(
        "AccumulateScans: scan and pose counts must match and be non-empty");
  }
  AccumulatedScan result;
  result.id = id;
  result.t = scans.back().t;
  result.reference = reference_body_pose;
  result.source_scan_count = static_cast<int>(scans.size());
  const Pose world_to_reference = Inverse(reference_body_pose);
  for (size_t i = 0; i < scans.size(); ++i) {
    const Pose to_reference =
        Compose(world_to_reference, sensor_poses_world[i]);
    for (const Eigen::Vector3d& endpoint :
         ScanEndpointsSensorFrame(scans[i], lidar)) {
      result.points.push_back(TransformPoint(to_reference, endpoint));
    }
  }
  if (result.points.empty()) {
    throw std::invalid_argument("AccumulateScans: every beam missed");
  }
  return result;
}

enum class SubmapState { kGrowing, kMatching, kFinished };

// Occupancy voxels plus the derived distance map, anchored at a world pose.
// The bounding box is a cube of side 2 * max_distance centered on the
// anchor; points outside are dropped.
class Submap {
 public:
  Submap(int id, const Pose& anchor, double resolution, double max_distance)
      : id_(id),
        anchor_(anchor),
        state_(SubmapState::kGrowing),
        grid_(resolution,
              Eigen::Vector3d::Constant(-max_distance),
              Eigen::Vector3i::Constant(static_cast<int>(
                  std::ceil(2.0 * max_distance / resolution - 1e-9)))),
        distance_map_(std::make_shared<const DistanceMap>(
            resolution, grid_.origin(), grid_.dims(), max_distance)) {}

  int id() const { return id_; }
  const Pose& anchor() const { return anchor_; }
  void set_anchor(const Pose& anchor) { anchor_ = anchor; }
  SubmapState state() const { return state_; }
  int inserted_scans() const { return inserted_scans_; }
  int inserted_while_matching() const { return inserted_while_matching_; }
  const VoxelGrid& grid() const { return grid_; }
  std::shared_ptr<const DistanceMap> distance_map() const {
    return distance_map_;
  }

  void Promote() {
    if (state_ != SubmapState::kGrowing) {
      throw LifecycleError("Submap::Promote: submap is not growing");
    }
    state_ = SubmapState::kMatching;
  }

  void Finish() {
    state_ = SubmapState::kFinished;
    distance_map_ = distance_map_->Compacted();
    grid_.ReleaseBitmap();
  }

  // Voxelizes the scan (given its world pose) into this submap and updates
  // the distance map. Returns the newly occupied voxels.
  std::vector<VoxelIndex> InsertScan(const AccumulatedScan& scan,
                                     const Pose& scan_pose_world) {
    if (state_ == SubmapState::kFinished) {
      throw LifecycleError("Submap::InsertScan: submap already finished");
    }
    const Pose to_submap = Compose(Inverse(anchor_), scan_pose_world);
    std::vector<Eigen::Vector3d> local;
    local.reserve(scan.points.size());
    for (const Eigen::Vector3d& p : scan.points) {
      local.push_back(TransformPoint(to_submap, p));
    }
    const std::vector<VoxelIndex> changes = grid_.InsertPoints(local);
    distance_map_ = UpdateDistanceMap(distance_map_, changes);
    ++inserted_scans_;
    if (state_ == SubmapState::kMatching) ++inserted_while_matching_;
    return changes;
  }

 private:
  int id_;
  Pose anchor_;
  SubmapState state_;
  int inserted_scans_ = 0;
  int inserted_while_matching_ = 0;
  VoxelGrid grid_;
  std::shared_ptr<const DistanceMap> distance_map_;
};

struct LifecycleEvent {
  enum Kind { kScanInserted, kSubmapCreated, kSubmapFinished } kind;
  int submap_id = -1;
  int scan_id = -1;
  Pose scan_in_submap;  // insertion events: scan pose in the submap frame
  Pose anchor;          // creation events
};

// Two-stage submap lifecycle: a matching and a growing submap are active at
// all times and every 3D scan is inserted into both. After the matching
// submap receives M scans in the matching role it is finished (and retained
// for loop closure), the growing submap is promoted, and a fresh growing
// submap is created at the current pose. Each submap therefore receives 2M
// scans over its life, except the initial pair.
class SubmapManager {
 public:
  SubmapManager(int scans_per_submap, double resolution, double max_distance)
      : scans_per_submap_(scans_per_submap),
        resolution_(resolution),
        max_distance_(max_distance) {
    if (scans_per_submap < 1) {
      throw std::invalid_argument("SubmapManager: M must be >= 1");
    }
  }

  bool initialized() const { return matching_ != nullptr; }
  const Submap& matching() const { return *matching_; }
  const Submap& growing() const { return *growing_; }
  const std::vector<std::shared_ptr<Submap>>& finished() const {
    return finished_;
  }

  // Corrects the anchors of the two active submaps after the optimizer moved
  // their pose-graph nodes. Keyed by submap id; absent ids are left alone.
  void SetActiveAnchor(int submap_id, const Pose& anchor) {
    if (matching_ && matching_->id() == submap_id) {
      matching_->set_anchor(anchor);
    } else if (growing_ && growing_->id() == submap_id) {
      growing_->set_anchor(anchor);
    }
  }

  // Inserts the scan into both active submaps and advances the lifecycle,
  // creating the initial pair on the first call. Emits the creation,
  // insertion and finish events in the order they happen.
  std::vector<LifecycleEvent> InsertScan(const AccumulatedScan& scan,
                                         const Pose& scan_pose_world) {
    std::vector<LifecycleEvent> events;
    if (!initialized()) {
      matching_ = CreateSubmap(scan_pose_world, &events);
      matching_->Promote();
      growing_ = CreateSubmap(scan_pose_world, &events);
    }

    for (Submap* submap : {matching_.get(), growing_.get()}) {
      submap->InsertScan(scan, scan_pose_world);
      LifecycleEvent e;
      e.kind = LifecycleEvent::kScanInserted;
      e.submap_id = submap->id();
      e.scan_id = scan.id;
      e.scan_in_submap = Compose(Inverse(submap->anchor()), scan_pose_world);
      events.push_back(e);
    }

    if (matching_->inserted_while_matching() >= scans_per_submap_) {
      matching_->Finish();
      LifecycleEvent e;
      e.kind = LifecycleEvent::kSubmapFinished;
      e.submap_id = matching_->id();
      events.push_back(e);
      finished_.push_back(std::move(matching_));
      matching_ = std::move(growing_);
      matching_->Promote();
      growing_ = CreateSubmap(scan_pose_world, &events);
    }
    return events;
  }

 private:
  std::shared_ptr<Submap> CreateSubmap(const Pose& anchor,
                                       std::vector<LifecycleEvent>* events) {
    auto submap = std::make_shared<Submap>(next_id_++, anchor, resolution_,
                                           max_distance_);
    LifecycleEvent e;
    e.kind = LifecycleEvent::kSubmapCreated;
    e.submap_id = submap->id();
    e.anchor = anchor;
    events->push_back(e);
    return submap;
  }

  int scans_per_submap_;
  double resolution_;
  double max_distance_;
  int next_id_ = 0;
  std::shared_ptr<Submap> matching_;
  std::shared_ptr<Submap> growing_;
  std::vector<std::shared_ptr<Submap>> finished_;
};

}  // namespace unislam

#endif  // UNISLAM_SUBMAP_HPP_

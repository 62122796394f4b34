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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "test_utils.hpp"
#include "unislam/distance_map.hpp"
#include "unislam/submap.hpp"
#include "unislam/voxel_grid.hpp"
#include "unislam/world.hpp"

namespace unislam {
namespace {

// From-scratch exact Euclidean distance transform: per voxel, the minimum
// integer squared distance over all occupied voxels.
std::vector<double> BruteForceDistanceField(
    const Eigen::Vector3i& dims, const std::vector<VoxelIndex>& occupied,
    double resolution, double max_distance) {
  std::vector<double> field(
      static_cast<size_t>(dims.x()) * dims.y() * dims.z(), max_distance);
  for (int32_t z = 0; z < dims.z(); ++z) {
    for (int32_t y = 0; y < dims.y(); ++y) {
      for (int32_t x = 0; x < dims.x(); ++x) {
        int64_t best = std::numeric_limits<int64_t>::max();
        for (const VoxelIndex& o : occupied) {
          const int64_t dx = x - o.x, dy = y - o.y, dz = z - o.z;
          best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        if (best == std::numeric_limits<int64_t>::max()) continue;
        const size_t i =
            (static_cast<size_t>(z) * dims.y() + y) * dims.x() + x;
        field[i] = std::min(
            resolution * std::sqrt(static_cast<double>(best)), max_distance);
      }
    }
  }
  return field;
}

TEST(VoxelGrid, SinglePointOccupiesOneVoxel) {
  VoxelGrid grid(0.1, Eigen::Vector3d(-1.0, -1.0, -1.0),
                 Eigen::Vector3i(20, 20, 20));
  const auto changes = grid.InsertPoints({Eigen::Vector3d::Zero()});
  ASSERT_EQ(changes.size(), 1u);
  EXPECT_EQ(changes[0], (VoxelIndex{10, 10, 10}));
  EXPECT_TRUE(grid.IsOccupied(changes[0]));
}

TEST(VoxelGrid, ReinsertionIsIdempotent) {
  VoxelGrid grid(0.1, Eigen::Vector3d(-1.0, -1.0, -1.0),
                 Eigen::Vector3i(20, 20, 20));
  const std::vector<Eigen::Vector3d> points = {
      {0.05, 0.0, 0.0}, {0.0, 0.35, 0.0}, {0.0, 0.0, -0.72}};
  const auto first = grid.InsertPoints(points);
  EXPECT_EQ(first.size(), 3u);
  const auto second = grid.InsertPoints(points);
  EXPECT_TRUE(second.empty());
  EXPECT_EQ(grid.occupied().size(), 3u);
}

TEST(VoxelGrid, DropsPointsOutsideBoundingBox) {
  VoxelGrid grid(0.5, Eigen::Vector3d::Zero(), Eigen::Vector3i(4, 4, 4));
  const auto changes = grid.InsertPoints(
      {{-0.1, 0.0, 0.0}, {5.0, 1.0, 1.0}, {1.0, 1.0, 1.0}});
  EXPECT_EQ(changes.size(), 1u);
}

TEST(VoxelGrid, MatchesBruteForceVoxelizationOracle) {
  Rng rng(61);
  const double resolution = 0.25;
  const Eigen::Vector3d origin(-4.0, -4.0, -4.0);
  VoxelGrid grid(resolution, origin, Eigen::Vector3i(32, 32, 32));
  std::vector<Eigen::Vector3d> points;
  for (int i = 0; i < 2000; ++i) points.push_back(3.5 * rng.NextNormal3());
  grid.InsertPoints(points);

  std::set<VoxelIndex> expected;
  for (const Eigen::Vector3d& p : points) {
    const Eigen::Vector3d scaled = (p - origin) / resolution;
    const int32_t x = static_cast<int32_t>(std::floor(scaled.x()));
    const int32_t y = static_cast<int32_t>(std::floor(scaled.y()));
    const int32_t z = static_cast<int32_t>(std::floor(scaled.z()));
    if (x < 0 || y < 0 || z < 0 || x >= 32 || y >= 32 || z >= 32) continue;
    expected.insert(VoxelIndex{x, y, z});
  }
  const auto sorted = grid.SortedOccupied();
  EXPECT_EQ(std::set<VoxelIndex>(sorted.begin(), sorted.end()), expected);
}

TEST(DistanceMap, EmptyChangeSetReturnsSameSnapshot) {
  auto map = std::make_shared<const DistanceMap>(
      1.0, Eigen::Vector3d::Zero(), Eigen::Vector3i(8, 8, 8), 3.0);
  const auto same = UpdateDistanceMap(map, {});
  EXPECT_EQ(same.get(), map.get());
  EXPECT_EQ(same->version(), map->version());
}

TEST(DistanceMap, SingleVoxelNeighborDistances) {
  auto map = std::make_shared<const DistanceMap>(
      1.0, Eigen::Vector3d::Zero(), Eigen::Vector3i(9, 9, 9), 3.0);
  const auto updated = UpdateDistanceMap(map, {VoxelIndex{4, 4, 4}});
  EXPECT_EQ(updated->version(), 1u);
  EXPECT_DOUBLE_EQ(updated->ExactDistanceAtVoxel({4, 4, 4}), 0.0);
  EXPECT_DOUBLE_EQ(updated->ExactDistanceAtVoxel({5, 4, 4}), 1.0);
  EXPECT_DOUBLE_EQ(updated->ExactDistanceAtVoxel({5, 5, 4}),
                   std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(updated->ExactDistanceAtVoxel({5, 5, 5}),
                   std::sqrt(3.0));
  // Beyond the clamp everything reads max_distance.
  EXPECT_DOUBLE_EQ(updated->ExactDistanceAtVoxel({8, 8, 8}), 3.0);
  EXPECT_DOUBLE_EQ(updated->ExactDistanceAtVoxel({0, 4, 4}), 3.0);
}

TEST(DistanceMap, ZeroExactlyOnOccupiedVoxels) {
  Rng rng(62);
  auto map = std::make_shared<const DistanceMap>(
      0.5, Eigen::Vector3d::Zero(), Eigen::Vector3i(16, 16, 16), 4.0);
  std::vector<VoxelIndex> occupied;
  for (int i = 0; i < 40; ++i) {
    occupied.push_back(VoxelIndex{static_cast<int32_t>(rng.NextU64() % 16),
                                  static_cast<int32_t>(rng.NextU64() % 16),
                                  static_cast<int32_t>(rng.NextU64() % 16)});
  }
  const auto updated = UpdateDistanceMap(map, occupied);
  const std::set<VoxelIndex> occupied_set(occupied.begin(), occupied.end());
  for (int32_t z = 0; z < 16; ++z) {
    for (int32_t y = 0; y < 16; ++y) {
      for (int32_t x = 0; x < 16; ++x) {
        const double d = updated->ExactDistanceAtVoxel({x, y, z});
        if (occupied_set.count(VoxelIndex{x, y, z})) {
          EXPECT_EQ(d, 0.0);
        } else {
          EXPECT_GT(d, 0.0);
        }
      }
    }
  }
}

TEST(DistanceMap, IncrementalEqualsBatchBruteForce) {
  Rng rng(63);
  for (int sequence = 0; sequence < 10; ++sequence) {
    const int nx = 8 + static_cast<int>(rng.NextU64() % 25);
    const int ny = 8 + static_cast<int>(rng.NextU64() % 25);
    const int nz = 8 + static_cast<int>(rng.NextU64() % 25);
    const double resolution = 0.2 + 0.3 * rng.NextUniform();
    const double max_distance = resolution * (2.0 + 10.0 * rng.NextUniform());
    auto map = std::make_shared<const DistanceMap>(
        resolution, Eigen::Vector3d::Zero(), Eigen::Vector3i(nx, ny, nz),
        max_distance);

    std::vector<VoxelIndex> all_occupied;
    std::set<VoxelIndex> seen;
    const int updates = 1 + static_cast<int>(rng.NextU64() % 6);
    for (int u = 0; u < updates; ++u) {
      std::vector<VoxelIndex> changes;
      const int inserts = 1 + static_cast<int>(rng.NextU64() % 30);
      for (int i = 0; i < inserts; ++i) {
        const VoxelIndex v{static_cast<int32_t>(rng.NextU64() % nx),
                           static_cast<int32_t>(rng.NextU64() % ny),
                           static_cast<int32_t>(rng.NextU64() % nz)};
        if (seen.insert(v).second) changes.push_back(v);
      }
      all_occupied.insert(all_occupied.end(), changes.begin(), changes.end());
      map = UpdateDistanceMap(map, changes);
    }

    const std::vector<double> oracle = BruteForceDistanceField(
        Eigen::Vector3i(nx, ny, nz), all_occupied, resolution, max_distance);
    for (int32_t z = 0; z < nz; ++z) {
      for (int32_t y = 0; y < ny; ++y) {
        for (int32_t x = 0; x < nx; ++x) {
          const size_t i =
              (static_cast<size_t>(z) * ny + y) * nx + x;
          ASSERT_NEAR(map->ExactDistanceAtVoxel({x, y, z}), oracle[i], 1e-9)
              << "sequence " << sequence << " voxel " << x << " " << y << " "
              << z;
        }
      }
    }
  }
}

TEST(DistanceMap, FieldIsLipschitzAcrossNeighbors) {
  Rng rng(64);
  auto map = std::make_shared<const DistanceMap>(
      0.25, Eigen::Vector3d::Zero(), Eigen::Vector3i(20, 20, 20), 2.0);
  std::vector<VoxelIndex> occupied;
  for (int i = 0; i < 25; ++i) {
    occupied.push_back(VoxelIndex{static_cast<int32_t>(rng.NextU64() % 20),
                                  static_cast<int32_t>(rng.NextU64() % 20),
                                  static_cast<int32_t>(rng.NextU64() % 20)});
  }
  const auto updated = UpdateDistanceMap(map, occupied);
  for (int32_t z = 0; z < 20; ++z) {
    for (int32_t y = 0; y < 20; ++y) {
      for (int32_t x = 0; x + 1 < 20; ++x) {
        const double a = updated->ExactDistanceAtVoxel({x, y, z});
        const double b = updated->ExactDistanceAtVoxel({x + 1, y, z});
        EXPECT_LE(std::abs(a - b), 0.25 + 1e-12);
      }
    }
  }
}

TEST(DistanceMap, OldSnapshotSurvivesUpdates) {
  auto v0 = std::make_shared<const DistanceMap>(
      1.0, Eigen::Vector3d::Zero(), Eigen::Vector3i(8, 8, 8), 3.0);
  const auto v1 = UpdateDistanceMap(v0, {VoxelIndex{4, 4, 4}});
  const double before = v1->ExactDistanceAtVoxel({2, 4, 4});
  const auto v2 = UpdateDistanceMap(v1, {VoxelIndex{2, 4, 4}});
  EXPECT_EQ(v1->version() + 1, v2->version());
  EXPECT_EQ(v1->ExactDistanceAtVoxel({2, 4, 4}), before);
  EXPECT_EQ(v2->ExactDistanceAtVoxel({2, 4, 4}), 0.0);
  EXPECT_EQ(v0->ExactDistanceAtVoxel({4, 4, 4}), 3.0);
}

WorldModel CubicRoom() {
  WorldModel world;
  const double lo = -5.0, hi = 5.0, t = 1.0;
  world.AddBox({lo - t, lo - t, -t}, {hi + t, hi + t, 0.0});
  world.AddBox({lo - t, lo - t, 10.0}, {hi + t, hi + t, 10.0 + t});
  world.AddBox({lo - t, lo - t, 0.0}, {lo, hi + t, 10.0});
  world.AddBox({hi, lo - t, 0.0}, {hi + t, hi + t, 10.0});
  world.AddBox({lo, lo - t, 0.0}, {hi, lo, 10.0});
  world.AddBox({lo, hi, 0.0}, {hi, hi + t, 10.0});
  return world;
}

TEST(AccumulateScans, SingleScanAtIdentityKeepsSensorFrame) {
  const WorldModel world = CubicRoom();
  LidarModel lidar = LidarModel::Rotating2d(40.0, 30.0, 30.0, 0.0);
  Pose body;
  body.translation = Eigen::Vector3d(0.0, 0.0, 5.0);
  const LineScan scan = SynthesizeScan(world, body, lidar, 0.0, 1, 0);
  const Pose sensor = lidar.SensorPose(body, scan.motor_angle);

  const AccumulatedScan acc =
      AccumulateScans(0, {scan}, {sensor}, lidar, sensor);
  const auto endpoints = ScanEndpointsSensorFrame(scan, lidar);
  ASSERT_EQ(acc.points.size(), endpoints.size());
  for (size_t i = 0; i < endpoints.size(); ++i) {
    EXPECT_NEAR((acc.points[i] - endpoints[i]).norm(), 0.0, 1e-12);
  }
}

TEST(AccumulateScans, FrameAlgebraAcrossTranslatedScans) {
  // Two single-beam scans; the second pose is 1 m further along x, and the
  // reference is the second pose, so the first scan's point appears 1 m
  // behind where the second scan's identical point lands.
  LidarModel lidar;
  lidar.kind = LidarKind::kFixed3d;
  lidar.beam_directions = {Eigen::Vector3d::UnitZ()};
  lidar.max_range = 10.0;
  lidar.motor_rpm = 0.0;
  LineScan s1, s2;
  s1.t = 0.0;
  s1.ranges = {2.0};
  s2.t = 0.1;
  s2.ranges = {2.0};
  Pose p1;
  Pose p2;
  p2.translation = Eigen::Vector3d(1.0, 0.0, 0.0);
  const AccumulatedScan acc = AccumulateScans(0, {s1, s2}, {p1, p2}, lidar,
                                              p2);
  ASSERT_EQ(acc.points.size(), 2u);
  EXPECT_NEAR((acc.points[0] - Eigen::Vector3d(-1.0, 0.0, 2.0)).norm(), 0.0,
              1e-12);
  EXPECT_NEAR((acc.points[1] - Eigen::Vector3d(0.0, 0.0, 2.0)).norm(), 0.0,
              1e-12);
}

TEST(AccumulateScans, RotatingHalfRevolutionLandsOnSurfaces) {
  const WorldModel world = CubicRoom();
  const LidarModel lidar = LidarModel::Rotating2d(40.0, 30.0, 30.0, 0.0);
  Pose body;
  body.translation = Eigen::Vector3d(0.5, -0.5, 5.0);

  // Half a motor revolution at 30 rpm spans 1 s = 40 scans.
  std::vector<LineScan> scans;
  std::vector<Pose> poses;
  for (int i = 0; i < 40; ++i) {
    const double t = i * 0.025;
    scans.push_back(SynthesizeScan(world, body, lidar, t, 3, i));
    poses.push_back(lidar.SensorPose(body, scans.back().motor_angle));
  }
  const AccumulatedScan acc = AccumulateScans(0, scans, poses, lidar, body);
  ASSERT_GT(acc.points.size(), 10000u);
  for (const Eigen::Vector3d& p : acc.points) {
    const Eigen::Vector3d world_point = TransformPoint(body, p);
    EXPECT_LT(DistanceToNearestSurface(world, world_point), 1e-6);
  }
}

TEST(AccumulateScans, RejectsMismatchedInputs) {
  LidarModel lidar;
  lidar.beam_directions = {Eigen::Vector3d::UnitX()};
  LineScan scan;
  scan.ranges = {1.0};
  EXPECT_THROW(AccumulateScans(0, {scan}, {}, lidar, Pose::Identity()),
               std::invalid_argument);
  EXPECT_THROW(AccumulateScans(0, {}, {}, lidar, Pose::Identity()),
               std::invalid_argument);
}

TEST(AccumulateScans, RejectsAllMissScans) {
  LidarModel lidar;
  lidar.beam_directions = {Eigen::Vector3d::UnitX()};
  LineScan scan;
  scan.ranges = {kRayMiss};
  EXPECT_THROW(AccumulateScans(0, {scan}, {Pose::Identity()}, lidar,
                               Pose::Identity()),
               std::invalid_argument);
}

AccumulatedScan BoxScan(int id, const Eigen::Vector3d& offset) {
  AccumulatedScan scan;
  scan.id = id;
  scan.t = id;
  scan.source_scan_count = 1;
  for (int x = -4; x <= 4; ++x) {
    for (int y = -4; y <= 4; ++y) {
      scan.points.push_back(offset + Eigen::Vector3d(x * 0.3, y * 0.3, 1.0));
      scan.points.push_back(offset + Eigen::Vector3d(x * 0.3, y * 0.3, -1.0));
    }
  }
  return scan;
}

TEST(Submap, InsertingSameScanTwiceYieldsEmptyChangeSet) {
  Submap submap(0, Pose::Identity(), 0.25, 4.0);
  const AccumulatedScan scan = BoxScan(0, Eigen::Vector3d::Zero());
  const auto first = submap.InsertScan(scan, Pose::Identity());
  EXPECT_FALSE(first.empty());
  const auto second = submap.InsertScan(scan, Pose::Identity());
  EXPECT_TRUE(second.empty());
  EXPECT_EQ(submap.inserted_scans(), 2);
}

TEST(Submap, FinishedSubmapRejectsInsertion) {
  Submap submap(0, Pose::Identity(), 0.25, 4.0);
  submap.InsertScan(BoxScan(0, Eigen::Vector3d::Zero()), Pose::Identity());
  submap.Finish();
  EXPECT_THROW(
      submap.InsertScan(BoxScan(1, Eigen::Vector3d::Zero()),
                        Pose::Identity()),
      LifecycleError);
}

TEST(Submap, OccupiedSetGrowsMonotonically) {
  Submap submap(0, Pose::Identity(), 0.25, 4.0);
  size_t last = 0;
  for (int i = 0; i < 5; ++i) {
    submap.InsertScan(BoxScan(i, Eigen::Vector3d(0.2 * i, 0.0, 0.0)),
                      Pose::Identity());
    EXPECT_GE(submap.grid().occupied().size(), last);
    last = submap.grid().occupied().size();
  }
}

TEST(SubmapManager, FirstRotationHappensExactlyAtM) {
  SubmapManager manager(3, 0.25, 4.0);
  int finished_count = 0;
  for (int scan_id = 1; scan_id <= 3; ++scan_id) {
    AccumulatedScan scan = BoxScan(scan_id, Eigen::Vector3d::Zero());
    const auto events = manager.InsertScan(scan, Pose::Identity());
    for (const auto& e : events) {
      if (e.kind == LifecycleEvent::kSubmapFinished) ++finished_count;
    }
    if (scan_id < 3) EXPECT_EQ(finished_count, 0);
  }
  EXPECT_EQ(finished_count, 1);
}

TEST(SubmapManager, SevenScanHandTrace) {
  // Hand trace for M = 3 over 7 scans with the always-active pair scheme:
  // the initial pair (ids 0, 1) is created on scan 1; rotations happen at
  // scans 3 and 6, each finishing the matching submap and creating a new
  // growing one. Totals: 4 created, 2 finished, 14 insertion events, and
  // the active pair ends as (matching 2, growing 3).
  SubmapManager manager(3, 0.25, 4.0);
  int created = 0, finished = 0, inserted = 0;
  for (int scan_id = 1; scan_id <= 7; ++scan_id) {
    Pose pose;
    pose.translation = Eigen::Vector3d(0.1 * scan_id, 0.0, 0.0);
    const auto events =
        manager.InsertScan(BoxScan(scan_id, Eigen::Vector3d::Zero()), pose);
    for (const auto& e : events) {
      switch (e.kind) {
        case LifecycleEvent::kSubmapCreated:
          ++created;
          break;
        case LifecycleEvent::kSubmapFinished:
          ++finished;
          break;
        case LifecycleEvent::kScanInserted:
          ++inserted;
          break;
      }
    }
    EXPECT_EQ(manager.matching().state(), SubmapState::kMatching);
    EXPECT_EQ(manager.growing().state(), SubmapState::kGrowing);
  }
  EXPECT_EQ(created, 4);
  EXPECT_EQ(finished, 2);
  EXPECT_EQ(inserted, 14);
  EXPECT_EQ(manager.matching().id(), 2);
  EXPECT_EQ(manager.growing().id(), 3);
  EXPECT_EQ(manager.finished().size(), 2u);
  EXPECT_EQ(manager.finished()[0]->id(), 0);
  EXPECT_EQ(manager.finished()[1]->id(), 1);
}

TEST(SubmapManager, ScanOverlappingBothSubmapsChangesBoth) {
  SubmapManager manager(5, 0.25, 4.0);
  Pose pose;
  manager.InsertScan(BoxScan(1, Eigen::Vector3d::Zero()), pose);
  // Both active submaps share the anchor here, so a fresh scan overlaps
  // both; inserting different content must change both grids.
  const size_t matching_before = manager.matching().grid().occupied().size();
  const size_t growing_before = manager.growing().grid().occupied().size();
  manager.InsertScan(BoxScan(2, Eigen::Vector3d(0.4, 0.4, 0.0)), pose);
  EXPECT_GT(manager.matching().grid().occupied().size(), matching_before);
  EXPECT_GT(manager.growing().grid().occupied().size(), growing_before);
}

}  // namespace
}  // namespace unislam

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

#include "test_utils.hpp"
#include "unislam/imu_sim.hpp"
#include "unislam/lidar_sim.hpp"
#include "unislam/trajectory.hpp"
#include "unislam/world.hpp"

namespace unislam {
namespace {

// Interior 10 m cube (x, y in [-5, 5], z in [0, 10]) enclosed by six boxes
// of 1 m thickness.
WorldModel CubicRoom() {
  WorldModel world;
  const double lo = -5.0, hi = 5.0, t = 1.0;
  world.AddBox({lo - t, lo - t, -t}, {hi + t, hi + t, 0.0});           // floor
  world.AddBox({lo - t, lo - t, 10.0}, {hi + t, hi + t, 10.0 + t});    // ceil
  world.AddBox({lo - t, lo - t, 0.0}, {lo, hi + t, 10.0});             // -x
  world.AddBox({hi, lo - t, 0.0}, {hi + t, hi + t, 10.0});             // +x
  world.AddBox({lo, lo - t, 0.0}, {hi, lo, 10.0});                     // -y
  world.AddBox({lo, hi, 0.0}, {hi, hi + t, 10.0});                     // +y
  return world;
}

// Independent ray-box oracle: intersect the ray with all six face
// rectangles of every box and keep the smallest non-negative parameter.
double FaceIntersectionOracle(const WorldModel& world,
                              const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& direction,
                              double max_range) {
  double best = kRayMiss;
  for (const Box& box : world.boxes()) {
    for (int axis = 0; axis < 3; ++axis) {
      if (std::abs(direction[axis]) < 1e-15) continue;
      for (const double plane : {box.min[axis], box.max[axis]}) {
        const double t = (plane - origin[axis]) / direction[axis];
        if (t < 0.0 || t >= best) continue;
        const Eigen::Vector3d p = origin + t * direction;
        bool inside = true;
        for (int other = 0; other < 3; ++other) {
          if (other == axis) continue;
          if (p[other] < box.min[other] - 1e-12 ||
              p[other] > box.max[other] + 1e-12) {
            inside = false;
            break;
          }
        }
        if (inside) best = t;
      }
    }
  }
  return best <= max_range ? best : kRayMiss;
}

TEST(RayCast, CubicRoomCenterAlongX) {
  const WorldModel world = CubicRoom();
  EXPECT_DOUBLE_EQ(
      RayCast(world, {0.0, 0.0, 5.0}, Eigen::Vector3d::UnitX(), 100.0), 5.0);
}

TEST(RayCast, MissesWhenPointingAway) {
  WorldModel world;
  world.AddBox({10.0, -1.0, -1.0}, {11.0, 1.0, 1.0});
  EXPECT_EQ(RayCast(world, Eigen::Vector3d::Zero(),
                    -Eigen::Vector3d::UnitX(), 100.0),
            kRayMiss);
}

TEST(RayCast, RespectsMaxRange) {
  WorldModel world;
  world.AddBox({10.0, -1.0, -1.0}, {11.0, 1.0, 1.0});
  EXPECT_EQ(RayCast(world, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(),
                    9.0),
            kRayMiss);
  EXPECT_DOUBLE_EQ(RayCast(world, Eigen::Vector3d::Zero(),
                           Eigen::Vector3d::UnitX(), 10.5),
                   10.0);
}

TEST(RayCast, MatchesFaceIntersectionOracle) {
  Rng rng(21);
  WorldModel world = CubicRoom();
  world.AddBox({-2.0, -2.0, 2.0}, {-1.0, 1.0, 4.0});
  world.AddBox({1.0, -3.0, 0.0}, {3.0, -1.0, 3.0});
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Vector3d origin(4.0 * rng.NextNormal(),
                                 4.0 * rng.NextNormal(),
                                 5.0 + 2.0 * rng.NextNormal());
    const Eigen::Vector3d direction = rng.NextNormal3().normalized();
    const double expected = FaceIntersectionOracle(world, origin, direction,
                                                   50.0);
    const double actual = RayCast(world, origin, direction, 50.0);
    if (expected == kRayMiss) {
      EXPECT_EQ(actual, kRayMiss);
    } else {
      EXPECT_NEAR(actual, expected, 1e-9);
    }
  }
}

TEST(SimulateTrajectory, HoverHoldsPose) {
  const WorldModel world = CubicRoom();
  TrajectorySpec spec;
  spec.waypoints = {{0.0, 0.0, 5.0}};
  spec.min_duration = 3.0;
  const auto samples = SimulateTrajectory(world, spec);
  ASSERT_GT(samples.size(), 400u);
  for (const TrajectorySample& s : samples) {
    EXPECT_EQ(s.pose.translation, Eigen::Vector3d(0.0, 0.0, 5.0));
    EXPECT_EQ(s.velocity, Eigen::Vector3d::Zero());
    EXPECT_EQ(s.acceleration, Eigen::Vector3d::Zero());
    EXPECT_EQ(s.angular_velocity, Eigen::Vector3d::Zero());
  }
}

TEST(SimulateTrajectory, ArrivalTimeMatchesClosedFormProfile) {
  const WorldModel world = CubicRoom();
  TrajectorySpec spec;
  spec.waypoints = {{-4.0, -4.0, 5.0}, {4.0, 2.0, 5.0}};  // 10 m apart
  spec.speed_cap = 1.0;
  spec.dwell_time = 0.0;
  spec.ramp_time = 1.0;
  spec.face_travel = false;
  const auto samples = SimulateTrajectory(world, spec);
  // Closed form: cruise at the cap with one ramp equivalent added, snapped
  // up to the sample grid.
  const double dt = 1.0 / spec.sample_rate;
  const double expected_total =
      std::ceil((10.0 / spec.speed_cap + spec.ramp_time) / dt - 1e-9) * dt;
  EXPECT_NEAR(samples.back().t, expected_total, 1e-9);
  EXPECT_NEAR(
      (samples.back().pose.translation - spec.waypoints.back()).norm(), 0.0,
      1e-9);
  EXPECT_NEAR(samples.back().velocity.norm(), 0.0, 1e-9);
}

TEST(SimulateTrajectory, RespectsSpeedCap) {
  const WorldModel world = CubicRoom();
  TrajectorySpec spec;
  spec.waypoints = {{-4.0, -4.0, 2.0}, {4.0, 4.0, 8.0}, {-4.0, 4.0, 3.0}};
  spec.speed_cap = 1.13;
  spec.dwell_time = 0.5;
  const auto samples = SimulateTrajectory(world, spec);
  double max_speed = 0.0;
  for (const TrajectorySample& s : samples) {
    max_speed = std::max(max_speed, s.velocity.norm());
  }
  EXPECT_LE(max_speed, 1.13 + 1e-9);
  EXPECT_GT(max_speed, 1.0);
}

TEST(SimulateTrajectory, RejectsWaypointInsideBox) {
  const WorldModel world = CubicRoom();
  TrajectorySpec spec;
  spec.waypoints = {{0.0, 0.0, 5.0}, {0.0, 0.0, -0.5}};
  EXPECT_THROW(SimulateTrajectory(world, spec), std::invalid_argument);
}

TEST(SynthesizeImu, StationaryReadsGravityReaction) {
  const WorldModel world = CubicRoom();
  TrajectorySpec spec;
  spec.waypoints = {{0.0, 0.0, 5.0}};
  spec.min_duration = 1.0;
  const auto trajectory = SimulateTrajectory(world, spec);
  const auto samples = SynthesizeImu(trajectory, ImuNoiseModel{0.0, 0.0}, 1);
  for (const ImuSample& s : samples) {
    EXPECT_EQ(s.angular_velocity, Eigen::Vector3d::Zero());
    EXPECT_NEAR((s.specific_force - Eigen::Vector3d(0, 0, 9.81)).norm(), 0.0,
                1e-12);
  }
}

TEST(SynthesizeImu, ConstantWorldAcceleration) {
  TrajectorySample s;
  s.acceleration = Eigen::Vector3d(1.0, 0.0, 0.0);
  const ImuSample imu = IdealImu(s);
  EXPECT_NEAR((imu.specific_force - Eigen::Vector3d(1.0, 0.0, 9.81)).norm(),
              0.0, 1e-12);
}

TEST(SynthesizeImu, BiasOnlyShiftsIdealExactly) {
  const WorldModel world = CubicRoom();
  TrajectorySpec spec;
  spec.waypoints = {{-4.0, 0.0, 5.0}, {4.0, 0.0, 5.0}};
  const auto trajectory = SimulateTrajectory(world, spec);
  ImuNoiseModel biased;
  biased.sigma_a = 0.0;
  biased.sigma_g = 0.0;
  biased.accel_bias = Eigen::Vector3d(0.1, -0.2, 0.05);
  biased.gyro_bias = Eigen::Vector3d(-0.01, 0.02, 0.005);
  const auto with_bias = SynthesizeImu(trajectory, biased, 3);
  const auto ideal = SynthesizeImu(trajectory, ImuNoiseModel{0.0, 0.0}, 3);
  ASSERT_EQ(with_bias.size(), ideal.size());
  for (size_t i = 0; i < ideal.size(); ++i) {
    EXPECT_EQ(with_bias[i].specific_force,
              ideal[i].specific_force + biased.accel_bias);
    EXPECT_EQ(with_bias[i].angular_velocity,
              ideal[i].angular_velocity + biased.gyro_bias);
  }
}

TEST(SynthesizeImu, DeterministicForFixedSeed) {
  const WorldModel world = CubicRoom();
  TrajectorySpec spec;
  spec.waypoints = {{-4.0, 0.0, 5.0}, {4.0, 0.0, 5.0}};
  const auto trajectory = SimulateTrajectory(world, spec);
  ImuNoiseModel noise;
  const auto a = SynthesizeImu(trajectory, noise, 42);
  const auto b = SynthesizeImu(trajectory, noise, 42);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].specific_force, b[i].specific_force);
    EXPECT_EQ(a[i].angular_velocity, b[i].angular_velocity);
  }
  const auto c = SynthesizeImu(trajectory, noise, 43);
  EXPECT_NE(a[0].specific_force, c[0].specific_force);
}

// Trapezoidal dead-reckoning of noiseless IMU samples, independent of the
// filter implementation.
TEST(SensorSimInvariants, NoiselessImuDoubleIntegratesToGroundTruth) {
  const WorldModel world = CubicRoom();
  TrajectorySpec spec;
  spec.waypoints = {{-4.0, -4.0, 2.0}, {4.0, -4.0, 6.0}, {4.0, 4.0, 3.0},
                    {-4.0, 4.0, 7.0}, {-4.0, -4.0, 2.0}};
  spec.speed_cap = 0.8;
  spec.dwell_time = 1.5;
  spec.min_duration = 60.0;
  const auto trajectory = SimulateTrajectory(world, spec);
  ASSERT_GE(trajectory.back().t, 60.0);
  const auto imu = SynthesizeImu(trajectory, ImuNoiseModel{0.0, 0.0}, 1);

  Eigen::Vector3d position = trajectory.front().pose.translation;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Quaterniond attitude = trajectory.front().pose.rotation;
  for (size_t i = 1; i < imu.size(); ++i) {
    const double dt = imu[i].t - imu[i - 1].t;
    const Eigen::Vector3d omega =
        0.5 * (imu[i - 1].angular_velocity + imu[i].angular_velocity);
    const Eigen::Quaterniond next_attitude =
        Canonicalized(attitude * So3Exp(omega * dt));
    const Eigen::Vector3d a0 =
        attitude * imu[i - 1].specific_force + Gravity();
    const Eigen::Vector3d a1 =
        next_attitude * imu[i].specific_force + Gravity();
    const Eigen::Vector3d a_mid = 0.5 * (a0 + a1);
    position += velocity * dt + 0.5 * a_mid * dt * dt;
    velocity += a_mid * dt;
    attitude = next_attitude;
  }
  EXPECT_NEAR((position - trajectory.back().pose.translation).norm(), 0.0,
              1e-3);
  EXPECT_NEAR(
      RotationError(attitude, trajectory.back().pose.rotation).norm(), 0.0,
      1e-4);
}

TEST(SynthesizeScan, MotorAdvancesHalfRevolutionPerSecondAt30Rpm) {
  const WorldModel world = CubicRoom();
  const LidarModel lidar = LidarModel::Rotating2d(40.0, 30.0, 30.0, 0.0);
  Pose body;
  body.translation = Eigen::Vector3d(0.0, 0.0, 5.0);
  const LineScan a = SynthesizeScan(world, body, lidar, 0.25, 1, 0);
  const LineScan b = SynthesizeScan(world, body, lidar, 1.25, 1, 40);
  EXPECT_NEAR(std::fmod(a.motor_angle + M_PI, 2.0 * M_PI), b.motor_angle,
              1e-9);
}

TEST(SynthesizeScan, FixedPayloadKeepsMotorAtZero) {
  const WorldModel world = CubicRoom();
  const LidarModel lidar = LidarModel::Fixed3d(10.0, 100.0, 0.0);
  Pose body;
  body.translation = Eigen::Vector3d(0.0, 0.0, 5.0);
  for (const double t : {0.0, 0.4, 1.7}) {
    EXPECT_EQ(SynthesizeScan(world, body, lidar, t, 1, 0).motor_angle, 0.0);
  }
}

TEST(SynthesizeScan, NoiselessScanMatchesRayCastPerBeam) {
  const WorldModel world = CubicRoom();
  LidarModel lidar = LidarModel::Rotating2d(40.0, 30.0, 30.0, 0.0);
  Pose body;
  body.translation = Eigen::Vector3d(1.0, -2.0, 4.0);
  body.rotation = So3Exp(Eigen::Vector3d(0.1, -0.2, 0.7));
  const double t = 0.625;
  const LineScan scan = SynthesizeScan(world, body, lidar, t, 9, 25);
  const Pose sensor = lidar.SensorPose(body, lidar.MotorAngleAt(t));
  const Eigen::Matrix3d sensor_rotation = sensor.rotation.toRotationMatrix();
  ASSERT_EQ(scan.ranges.size(), lidar.beam_directions.size());
  for (size_t i = 0; i < scan.ranges.size(); ++i) {
    const Eigen::Vector3d direction =
        sensor_rotation * lidar.beam_directions[i];
    EXPECT_EQ(scan.ranges[i],
              RayCast(world, sensor.translation, direction, lidar.max_range));
  }
}

TEST(SynthesizeScan, NoiselessEndpointsLieOnSurfaces) {
  const WorldModel world = CubicRoom();
  for (const LidarModel& lidar :
       {LidarModel::Rotating2d(40.0, 30.0, 30.0, 0.0),
        LidarModel::Fixed3d(10.0, 100.0, 0.0),
        LidarModel::Rotating3d(10.0, 100.0, 30.0, 0.0)}) {
    Pose body;
    body.translation = Eigen::Vector3d(0.5, 1.0, 5.0);
    const LineScan scan = SynthesizeScan(world, body, lidar, 0.35, 4, 14);
    const Pose sensor = lidar.SensorPose(body, scan.motor_angle);
    int hits = 0;
    for (size_t i = 0; i < scan.ranges.size(); ++i) {
      if (scan.ranges[i] == kRayMiss) continue;
      ++hits;
      const Eigen::Vector3d endpoint = TransformPoint(
          sensor, scan.ranges[i] * lidar.beam_directions[i]);
      EXPECT_LT(DistanceToNearestSurface(world, endpoint), 1e-6);
    }
    EXPECT_GT(hits, 100);
  }
}

TEST(SynthesizeScan, DeterministicForFixedSeed) {
  const WorldModel world = CubicRoom();
  const LidarModel lidar = LidarModel::Rotating2d();
  Pose body;
  body.translation = Eigen::Vector3d(0.0, 0.0, 5.0);
  const LineScan a = SynthesizeScan(world, body, lidar, 0.1, 5, 4);
  const LineScan b = SynthesizeScan(world, body, lidar, 0.1, 5, 4);
  EXPECT_EQ(a.ranges, b.ranges);
  const LineScan c = SynthesizeScan(world, body, lidar, 0.1, 6, 4);
  EXPECT_NE(a.ranges, c.ranges);
}

}  // namespace
}  // namespace unislam

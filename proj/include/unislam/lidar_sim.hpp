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

#ifndef UNISLAM_LIDAR_SIM_HPP_
#define UNISLAM_LIDAR_SIM_HPP_

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "unislam/geometry.hpp"
#include "unislam/random.hpp"
#include "unislam/world.hpp"

namespace unislam {

enum class LidarKind { kFixed3d, kRotating2d, kRotating3d };

inline std::string ToString(LidarKind kind) {
  switch (kind) {
    case LidarKind::kFixed3d:
      return "fixed3d";
    case LidarKind::kRotating2d:
      return "rotating2d";
    case LidarKind::kRotating3d:
      return "rotating3d";
  }
  return "unknown";
}

inline LidarKind LidarKindFromString(const std::string& s) {
  if (s == "fixed3d") return LidarKind::kFixed3d;
  if (s == "rotating2d") return LidarKind::kRotating2d;
  if (s == "rotating3d") return LidarKind::kRotating3d;
  throw std::invalid_argument("unknown lidar kind: " + s);
}

// One line scan; misses are stored as kRayMiss.
struct LineScan {
  double t = 0.0;
  double motor_angle = 0.0;  // rad, at scan start
  std::vector<double> ranges;
};

// Sensor model for all three payload types. The beam table lives in the
// sensor frame; the full chain from body to sensor is
//   body * mount * RotZ(motor_angle) * sensor_in_motor.
struct LidarModel {
  LidarKind kind = LidarKind::kRotating2d;
  std::vector<Eigen::Vector3d> beam_directions;
  double max_range = 30.0;   // m
  double scan_rate = 40.0;   // Hz
  double motor_rpm = 30.0;   // 0 for fixed payloads
  double range_noise = 0.01; // sigma_r, m
  Pose mount;                // motor base in the body frame
  Pose sensor_in_motor;      // sensor relative to the rotating motor plate

  // Hokuyo-like fan: 1081 beams over 270 degrees in the sensor x-z plane,
  // swept by the motor about the mount z axis.
  static LidarModel Rotating2d(double rate = 40.0, double range = 30.0,
                               double rpm = 30.0, double noise = 0.01) {
    LidarModel m;
    m.kind = LidarKind::kRotating2d;
    m.scan_rate = rate;
    m.max_range = range;
    m.motor_rpm = rpm;
    m.range_noise = noise;
    constexpr int kBeams = 1081;
    m.beam_directions.reserve(kBeams);
    for (int i = 0; i < kBeams; ++i) {
      const double a = (-135.0 + 270.0 * i / (kBeams - 1)) * M_PI / 180.0;
      m.beam_directions.emplace_back(std::cos(a), 0.0, std::sin(a));
    }
    return m;
  }

  // VLP-16-like: 16 rings over +/-15 degrees elevation, full azimuth.
  static LidarModel Fixed3d(double rate = 10.0, double range = 100.0,
                            double noise = 0.01, int azimuth_steps = 360) {
    LidarModel m;
    m.kind = LidarKind::kFixed3d;
    m.scan_rate = rate;
    m.max_range = range;
    m.motor_rpm = 0.0;
    m.range_noise = noise;
    m.beam_directions = Vlp16Beams(azimuth_steps);
    return m;
  }

  // The same 16-ring sensor tilted on its side and spun about the mount z
  // axis, sweeping the ring band across the full sphere.
  static LidarModel Rotating3d(double rate = 10.0, double range = 100.0,
                               double rpm = 30.0, double noise = 0.01,
                               int azimuth_steps = 360) {
    LidarModel m = Fixed3d(rate, range, noise, azimuth_steps);
    m.kind = LidarKind::kRotating3d;
    m.motor_rpm = rpm;
    m.sensor_in_motor.rotation =
        Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2.0,
                                             Eigen::Vector3d::UnitY()));
    return m;
  }

  static LidarModel MakePreset(LidarKind kind, double rate, double range,
                               double rpm, double noise) {
    switch (kind) {
      case LidarKind::kRotating2d:
        return Rotating2d(rate, range, rpm, noise);
      case LidarKind::kFixed3d:
        return Fixed3d(rate, range, noise);
      case LidarKind::kRotating3d:
        return Rotating3d(rate, range, rpm, noise);
    }
    throw std::invalid_argument("MakePreset: bad lidar kind");
  }

  double MotorAngleAt(double t) const {
    if (motor_rpm == 0.0) return 0.0;
    const double rev_per_s = motor_rpm / 60.0;
    return std::fmod(2.0 * M_PI * rev_per_s * t, 2.0 * M_PI);
  }

  // Sensor pose in the world given the body pose and the motor angle.
  Pose SensorPose(const Pose& body, double motor_angle) const {
    Pose motor;
    motor.rotation = So3Exp(Eigen::Vector3d(0.0, 0.0, motor_angle));
    return Compose(Compose(Compose(body, mount), motor), sensor_in_motor);
  }

 private:
  static std::vector<Eigen::Vector3d> Vlp16Beams(int azimuth_steps) {
    std::vector<Eigen::Vector3d> beams;
    beams.reserve(16 * azimuth_steps);
    for (int az = 0; az < azimuth_steps; ++az) {
      const double azimuth = 2.0 * M_PI * az / azimuth_steps;
      for (int ring = 0; ring < 16; ++ring) {
        const double elevation = (-15.0 + 2.0 * ring) * M_PI / 180.0;
        beams.emplace_back(std::cos(elevation) * std::cos(azimuth),
                           std::cos(elevation) * std::sin(azimuth),
                           std::sin(elevation));
      }
    }
    return beams;
  }
};

// Casts every beam from the sensor pose at time t. The scan is treated as
// instantaneous; the motor angle is sampled once per line scan.
// Deterministic for a given seed.
inline LineScan SynthesizeScan(const WorldModel& world, const Pose& body_pose,
                               const LidarModel& lidar, double t,
                               uint64_t seed, uint64_t scan_index) {
  LineScan scan;
  scan.t = t;
  scan.motor_angle = lidar.MotorAngleAt(t);
  const Pose sensor = lidar.SensorPose(body_pose, scan.motor_angle);
  const Eigen::Matrix3d rotation = sensor.rotation.toRotationMatrix();

  Rng rng(DeriveSeed(seed, "scan", scan_index));
  scan.ranges.reserve(lidar.beam_directions.size());
  for (const Eigen::Vector3d& beam : lidar.beam_directions) {
    const Eigen::Vector3d direction = rotation * beam;
    double range = RayCast(world, sensor.translation, direction,
                           lidar.max_range);
    if (range != kRayMiss && lidar.range_noise > 0.0) {
      range += lidar.range_noise * rng.NextNormal();
      range = std::min(std::max(range, 1e-6), lidar.max_range);
    }
    scan.ranges.push_back(range);
  }
  return scan;
}

// Beam endpoints in the sensor frame; misses are skipped.
inline std::vector<Eigen::Vector3d> ScanEndpointsSensorFrame(
    const LineScan& scan, const LidarModel& lidar) {
  if (scan.ranges.size() != lidar.beam_directions.size()) {
    throw std::invalid_argument(
        "ScanEndpointsSensorFrame: range count does not match beam table");
  }
  std::vector<Eigen::Vector3d> points;
  points.reserve(scan.ranges.size());
  for (size_t i = 0; i < scan.ranges.size(); ++i) {
    if (scan.ranges[i] == kRayMiss) continue;
    points.push_back(scan.ranges[i] * lidar.beam_directions[i]);
  }
  return points;
}

}  // namespace unislam

#endif  // UNISLAM_LIDAR_SIM_HPP_

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

#ifndef UNISLAM_IMU_SIM_HPP_
#define UNISLAM_IMU_SIM_HPP_

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "unislam/random.hpp"
#include "unislam/trajectory.hpp"

namespace unislam {

// World-frame gravity. A resting accelerometer reads -gravity, i.e.
// (0, 0, +9.81) in the body frame at identity attitude.
inline Eigen::Vector3d Gravity() { return Eigen::Vector3d(0.0, 0.0, -9.81); }

struct ImuSample {
  double t = 0.0;
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();  // rad/s, body
  Eigen::Vector3d specific_force = Eigen::Vector3d::Zero();    // m/s^2, body
};

struct ImuNoiseModel {
  double sigma_a = 0.02;   // accelerometer white noise density, m/s^2/sqrt(Hz)
  double sigma_g = 0.002;  // gyroscope white noise density, rad/s/sqrt(Hz)
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();  // m/s^2
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();   // rad/s
  double sigma_ba = 0.0;  // accel bias random walk density, m/s^3/sqrt(Hz)
  double sigma_bg = 0.0;  // gyro bias random walk density, rad/s^2/sqrt(Hz)
};

// Ideal IMU readings for one trajectory sample: bias-free, noise-free.
inline ImuSample IdealImu(const TrajectorySample& s) {
  ImuSample imu;
  imu.t = s.t;
  imu.angular_velocity = s.angular_velocity;
  imu.specific_force =
      s.pose.rotation.conjugate() * (s.acceleration - Gravity());
  return imu;
}

// Corrupts ideal readings with the constant biases and white noise of the
// model. White noise is scaled by sqrt(rate) so the density is respected at
// any sample rate. Deterministic for a given seed.
inline std::vector<ImuSample> SynthesizeImu(
    const std::vector<TrajectorySample>& trajectory,
    const ImuNoiseModel& noise, uint64_t seed) {
  if (trajectory.size() < 2) {
    throw std::invalid_argument("SynthesizeImu: trajectory too short");
  }
  if (noise.sigma_a < 0.0 || noise.sigma_g < 0.0 || noise.sigma_ba < 0.0 ||
      noise.sigma_bg < 0.0) {
    throw std::invalid_argument("SynthesizeImu: negative noise density");
  }
  const double rate = 1.0 / (trajectory[1].t - trajectory[0].t);
  const double accel_std = noise.sigma_a * std::sqrt(rate);
  const double gyro_std = noise.sigma_g * std::sqrt(rate);

  Rng rng(DeriveSeed(seed, "imu"));
  std::vector<ImuSample> samples;
  samples.reserve(trajectory.size());
  for (const TrajectorySample& s : trajectory) {
    ImuSample imu = IdealImu(s);
    imu.angular_velocity += noise.gyro_bias + gyro_std * rng.NextNormal3();
    imu.specific_force += noise.accel_bias + accel_std * rng.NextNormal3();
    samples.push_back(imu);
  }
  return samples;
}

}  // namespace unislam

#endif  // UNISLAM_IMU_SIM_HPP_

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

#ifndef UNISLAM_SIMULATE_HPP_
#define UNISLAM_SIMULATE_HPP_

#include <cmath>
#include <vector>

#include "unislam/config.hpp"
#include "unislam/evaluation.hpp"
#include "unislam/imu_sim.hpp"
#include "unislam/lidar_sim.hpp"
#include "unislam/sensor_log.hpp"
#include "unislam/trajectory.hpp"

namespace unislam {

struct SimulationOutput {
  SensorLog log;
  std::vector<TrajectoryPoint> ground_truth;
};

// Deterministic world replay: ground-truth trajectory at the IMU rate,
// noisy IMU samples, and line scans at the scan rate (which must divide the
// IMU rate so scan times land on trajectory samples).
inline SimulationOutput RunSimulation(const SimulationInputs& inputs) {
  const double ratio = inputs.imu_rate / inputs.lidar.scan_rate;
  const int stride = static_cast<int>(std::llround(ratio));
  if (stride < 1 || std::abs(ratio - stride) > 1e-9) {
    throw ConfigError(
        "simulation: lidar_rate must evenly divide imu_rate");
  }

  SimulationOutput output;
  const std::vector<TrajectorySample> trajectory =
      SimulateTrajectory(inputs.world, inputs.trajectory);

  output.log.lidar = inputs.lidar;
  output.log.imu_rate = inputs.imu_rate;
  output.log.world_hash = WorldHash(inputs.world);
  output.log.init_pose = trajectory.front().pose;
  output.log.imu = SynthesizeImu(trajectory, inputs.imu_noise, inputs.seed);

  output.ground_truth.reserve(trajectory.size());
  for (const TrajectorySample& s : trajectory) {
    output.ground_truth.push_back({s.t, s.pose});
  }

  uint64_t scan_index = 0;
  for (size_t i = 0; i < trajectory.size(); i += stride) {
    output.log.scans.push_back(SynthesizeScan(
        inputs.world, trajectory[i].pose, inputs.lidar, trajectory[i].t,
        inputs.seed, scan_index++));
  }
  return output;
}

}  // namespace unislam

#endif  // UNISLAM_SIMULATE_HPP_

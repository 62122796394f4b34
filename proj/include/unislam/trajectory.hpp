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

#ifndef UNISLAM_TRAJECTORY_HPP_
#define UNISLAM_TRAJECTORY_HPP_

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "unislam/geometry.hpp"
#include "unislam/world.hpp"

namespace unislam {

// One ground-truth sample, with the derivatives needed to synthesize ideal
// IMU readings.
struct TrajectorySample {
  double t = 0.0;
  Pose pose;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();      // world frame
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();  // world frame
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();  // body frame
};

struct TrajectorySpec {
  std::vector<Eigen::Vector3d> waypoints;
  double speed_cap = 1.13;        // m/s
  double dwell_time = 2.0;        // s, at every waypoint
  double ramp_time = 1.0;         // s, speed ramp duration
  double yaw_rate = 0.5;          // rad/s, cap for in-place rotations
  bool face_travel = true;        // yaw follows the direction of travel
  double min_duration = 0.0;      // pad with a final dwell if shorter
  double sample_rate = 200.0;     // Hz (the IMU rate)
};

namespace internal {

// Velocity shape used for speed ramps and yaw slews. Being C1 with zero
// slope at both ends keeps acceleration continuous across phase boundaries,
// which lets trapezoidal integration of the synthesized IMU track the
// analytic trajectory tightly.
inline double Smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }
inline double SmoothstepSlope(double u) { return 6.0 * u * (1.0 - u); }
// Integral of Smoothstep from 0 to u.
inline double SmoothstepArea(double u) {
  return u * u * u - 0.5 * u * u * u * u;
}

struct Phase {
  enum Kind { kDwell, kRotate, kTranslate } kind = kDwell;
  double duration = 0.0;
  Eigen::Vector3d start_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::Zero();  // translate only
  double distance = 0.0;
  double cruise_speed = 0.0;
  double ramp = 0.0;
  double yaw_start = 0.0;
  double yaw_delta = 0.0;  // rotate only
};

inline double WrapAngle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace internal

// Builds a piecewise trajectory through the waypoints: dwell, turn in place
// toward the next waypoint, then translate with a smooth speed profile.
// All phase durations are snapped to the sample grid so waypoint arrival
// times land exactly on samples. Throws if a waypoint is inside a solid box.
inline std::vector<TrajectorySample> SimulateTrajectory(
    const WorldModel& world, const TrajectorySpec& spec) {
  using internal::Phase;
  if (spec.waypoints.empty()) {
    throw std::invalid_argument("SimulateTrajectory: no waypoints");
  }
  if (!(spec.speed_cap > 0.0) || !(spec.sample_rate > 0.0)) {
    throw std::invalid_argument(
        "SimulateTrajectory: speed cap and sample rate must be positive");
  }
  for (const Eigen::Vector3d& wp : spec.waypoints) {
    if (world.IsOccupied(wp)) {
      throw std::invalid_argument(
          "SimulateTrajectory: waypoint inside occupied space");
    }
  }

  const double dt = 1.0 / spec.sample_rate;
  const auto snap = [dt](double duration) {
    return std::max(1.0, std::ceil(duration / dt - 1e-9)) * dt;
  };

  std::vector<Phase> phases;
  double yaw = 0.0;
  if (spec.face_travel && spec.waypoints.size() > 1) {
    const Eigen::Vector3d d0 = spec.waypoints[1] - spec.waypoints[0];
    if (d0.head<2>().norm() > 1e-9) yaw = std::atan2(d0.y(), d0.x());
  }

  const auto add_dwell = [&](const Eigen::Vector3d& position,
                             double duration) {
    if (duration <= 0.0) return;
    Phase p;
    p.kind = Phase::kDwell;
    p.duration = snap(duration);
    p.start_position = position;
    p.yaw_start = yaw;
    phases.push_back(p);
  };

  add_dwell(spec.waypoints.front(), spec.dwell_time);
  for (size_t i = 0; i + 1 < spec.waypoints.size(); ++i) {
    const Eigen::Vector3d from = spec.waypoints[i];
    const Eigen::Vector3d to = spec.waypoints[i + 1];
    const Eigen::Vector3d delta = to - from;
    const double distance = delta.norm();
    if (distance < 1e-9) continue;
    const Eigen::Vector3d direction = delta / distance;

    if (spec.face_travel && delta.head<2>().norm() > 1e-9) {
      const double target_yaw = std::atan2(delta.y(), delta.x());
      const double yaw_delta = internal::WrapAngle(target_yaw - yaw);
      if (std::abs(yaw_delta) > 1e-9) {
        Phase p;
        p.kind = Phase::kRotate;
        p.duration = snap(std::abs(yaw_delta) / spec.yaw_rate);
        p.start_position = from;
        p.yaw_start = yaw;
        p.yaw_delta = yaw_delta;
        phases.push_back(p);
        yaw = internal::WrapAngle(yaw + yaw_delta);
      }
    }

    Phase p;
    p.kind = Phase::kTranslate;
    p.start_position = from;
    p.direction = direction;
    p.distance = distance;
    p.ramp = snap(spec.ramp_time);
    const double min_total = 2.0 * p.ramp;
    const double raw_total = distance >= spec.speed_cap * p.ramp
                                 ? distance / spec.speed_cap + p.ramp
                                 : min_total;
    p.duration = std::max(snap(raw_total), min_total);
    p.cruise_speed = distance / (p.duration - p.ramp);
    p.yaw_start = yaw;
    phases.push_back(p);

    add_dwell(to, spec.dwell_time);
  }

  double total = 0.0;
  for (const Phase& p : phases) total += p.duration;
  if (total < spec.min_duration) {
    add_dwell(phases.empty() ? spec.waypoints.front()
                             : spec.waypoints.back(),
              spec.min_duration - total);
    total += phases.back().duration;
  }
  if (phases.empty()) {
    add_dwell(spec.waypoints.front(), dt);
    total = phases.back().duration;
  }

  const int sample_count = static_cast<int>(std::llround(total / dt)) + 1;
  std::vector<TrajectorySample> samples;
  samples.reserve(sample_count);

  size_t phase_index = 0;
  double phase_start = 0.0;
  for (int k = 0; k < sample_count; ++k) {
    const double t = k * dt;
    while (phase_index + 1 < phases.size() &&
           t >= phase_start + phases[phase_index].duration - 0.5 * dt) {
      phase_start += phases[phase_index].duration;
      ++phase_index;
    }
    const Phase& p = phases[phase_index];
    const double local = std::min(t - phase_start, p.duration);

    TrajectorySample s;
    s.t = t;
    double sample_yaw = p.yaw_start;
    switch (p.kind) {
      case Phase::kDwell:
        s.pose.translation = p.start_position;
        break;
      case Phase::kRotate: {
        const double u = local / p.duration;
        sample_yaw = p.yaw_start + p.yaw_delta * internal::Smoothstep(u);
        s.pose.translation = p.start_position;
        s.angular_velocity =
            Eigen::Vector3d(0.0, 0.0,
                            p.yaw_delta * internal::SmoothstepSlope(u) /
                                p.duration);
        break;
      }
      case Phase::kTranslate: {
        double offset, speed, accel;
        if (local < p.ramp) {
          const double u = local / p.ramp;
          offset = p.cruise_speed * p.ramp * internal::SmoothstepArea(u);
          speed = p.cruise_speed * internal::Smoothstep(u);
          accel = p.cruise_speed * internal::SmoothstepSlope(u) / p.ramp;
        } else if (local <= p.duration - p.ramp) {
          offset = p.cruise_speed * (0.5 * p.ramp + (local - p.ramp));
          speed = p.cruise_speed;
          accel = 0.0;
        } else {
          const double w = (p.duration - local) / p.ramp;
          offset =
              p.distance - p.cruise_speed * p.ramp * internal::SmoothstepArea(w);
          speed = p.cruise_speed * internal::Smoothstep(w);
          accel = -p.cruise_speed * internal::SmoothstepSlope(w) / p.ramp;
        }
        s.pose.translation = p.start_position + offset * p.direction;
        s.velocity = speed * p.direction;
        s.acceleration = accel * p.direction;
        break;
      }
    }
    s.pose.rotation = So3Exp(Eigen::Vector3d(0.0, 0.0, sample_yaw));
    samples.push_back(s);
  }
  return samples;
}

}  // namespace unislam

#endif  // UNISLAM_TRAJECTORY_HPP_

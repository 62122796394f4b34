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

#ifndef UNISLAM_EVALUATION_HPP_
#define UNISLAM_EVALUATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "unislam/geometry.hpp"

namespace unislam {

struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrajectoryPoint {
  double t = 0.0;
  Pose pose;
};

// TUM trajectory format: "timestamp tx ty tz qx qy qz qw" per line, nine
// significant digits.
inline void WriteTumTrajectory(const std::vector<TrajectoryPoint>& trajectory,
                               std::ostream& out) {
  char buffer[256];
  for (const TrajectoryPoint& p : trajectory) {
    std::snprintf(buffer, sizeof(buffer),
                  "%.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n", p.t,
                  p.pose.translation.x(), p.pose.translation.y(),
                  p.pose.translation.z(), p.pose.rotation.x(),
                  p.pose.rotation.y(), p.pose.rotation.z(),
                  p.pose.rotation.w());
    out << buffer;
  }
}

inline void WriteTumTrajectoryFile(
    const std::vector<TrajectoryPoint>& trajectory, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EvaluationError("cannot open trajectory file: " + path);
  WriteTumTrajectory(trajectory, out);
}

inline std::vector<TrajectoryPoint> ReadTumTrajectory(std::istream& in) {
  std::vector<TrajectoryPoint> trajectory;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    TrajectoryPoint p;
    double qx, qy, qz, qw;
    if (!(row >> p.t >> p.pose.translation.x() >> p.pose.translation.y() >>
          p.pose.translation.z() >> qx >> qy >> qz >> qw)) {
      throw EvaluationError("bad trajectory line: " + line);
    }
    p.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
    trajectory.push_back(p);
  }
  return trajectory;
}

inline std::vector<TrajectoryPoint> ReadTumTrajectoryFile(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EvaluationError("cannot open trajectory file: " + path);
  return ReadTumTrajectory(in);
}

// Linear interpolation in translation, slerp in rotation.
inline Pose InterpolatePose(const TrajectoryPoint& a,
                            const TrajectoryPoint& b, double t) {
  if (b.t <= a.t) return a.pose;
  const double u = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
  Pose pose;
  pose.translation =
      (1.0 - u) * a.pose.translation + u * b.pose.translation;
  pose.rotation = a.pose.rotation.slerp(u, b.pose.rotation);
  return pose;
}

struct EvaluationReport {
  std::vector<double> timestamps;
  std::vector<Eigen::Vector3d> position_error;   // est - gt, per axis (m)
  std::vector<Eigen::Vector3d> rotation_error;   // angle-axis vector (rad)
  double traversed_distance = 0.0;               // m, ground truth
  double final_position_error_norm = 0.0;        // m
  double translational_drift_percent = 0.0;      // % of traversed distance
  double rotational_drift_deg_per_m = 0.0;       // deg/m
  Eigen::Vector3d mean_abs_rotation_error_deg = Eigen::Vector3d::Zero();
  Eigen::Vector3d max_abs_position_error = Eigen::Vector3d::Zero();
};

// Compares an estimated trajectory against ground truth. Estimate
// timestamps must fall inside the ground-truth time range; ground truth is
// interpolated to them. The rotation error vector is the quaternion
// logarithm of (q_estimated^-1 * q_groundtruth).
inline EvaluationReport Evaluate(const std::vector<TrajectoryPoint>& estimate,
                                 const std::vector<TrajectoryPoint>& truth) {
  if (estimate.empty() || truth.empty()) {
    throw EvaluationError("Evaluate: empty trajectory");
  }
  if (estimate.front().t > truth.back().t + 1e-9 ||
      estimate.back().t < truth.front().t - 1e-9) {
    throw EvaluationError("Evaluate: non-overlapping time ranges");
  }

  EvaluationReport report;
  size_t cursor = 0;
  for (const TrajectoryPoint& est : estimate) {
    if (est.t < truth.front().t - 1e-9 || est.t > truth.back().t + 1e-9) {
      throw EvaluationError(
          "Evaluate: estimate timestamp outside ground-truth range");
    }
    while (cursor + 1 < truth.size() && truth[cursor + 1].t < est.t) {
      ++cursor;
    }
    const size_t next = std::min(cursor + 1, truth.size() - 1);
    const Pose gt = InterpolatePose(truth[cursor], truth[next], est.t);

    report.timestamps.push_back(est.t);
    report.position_error.push_back(est.pose.translation - gt.translation);
    report.rotation_error.push_back(
        RotationError(est.pose.rotation, gt.rotation));
  }

  // Traversed distance: consecutive ground-truth displacements inside the
  // evaluated window.
  for (size_t i = 1; i < truth.size(); ++i) {
    if (truth[i].t < estimate.front().t - 1e-9) continue;
    if (truth[i - 1].t > estimate.back().t + 1e-9) break;
    report.traversed_distance +=
        (truth[i].pose.translation - truth[i - 1].pose.translation).norm();
  }

  report.final_position_error_norm = report.position_error.back().norm();
  if (report.traversed_distance > 0.0) {
    report.translational_drift_percent =
        100.0 * report.final_position_error_norm / report.traversed_distance;
    report.rotational_drift_deg_per_m =
        std::abs(report.rotation_error.back().z()) * 180.0 / M_PI /
        report.traversed_distance;
  }
  Eigen::Vector3d rotation_accumulator = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < report.rotation_error.size(); ++i) {
    rotation_accumulator += report.rotation_error[i].cwiseAbs();
    report.max_abs_position_error =
        report.max_abs_position_error.cwiseMax(
            report.position_error[i].cwiseAbs());
  }
  report.mean_abs_rotation_error_deg = rotation_accumulator /
                                       report.rotation_error.size() * 180.0 /
                                       M_PI;
  return report;
}

// Machine-readable "key value" lines.
inline void WriteReportKv(const EvaluationReport& report, std::ostream& out) {
  char buffer[128];
  const auto kv = [&](const char* key, double value) {
    std::snprintf(buffer, sizeof(buffer), "%s %.9g\n", key, value);
    out << buffer;
  };
  kv("traversed_distance_m", report.traversed_distance);
  kv("final_position_error_m", report.final_position_error_norm);
  kv("translational_drift_percent", report.translational_drift_percent);
  kv("rotational_drift_deg_per_m", report.rotational_drift_deg_per_m);
  kv("mean_abs_roll_error_deg", report.mean_abs_rotation_error_deg.x());
  kv("mean_abs_pitch_error_deg", report.mean_abs_rotation_error_deg.y());
  kv("mean_abs_yaw_error_deg", report.mean_abs_rotation_error_deg.z());
  kv("max_abs_position_error_x_m", report.max_abs_position_error.x());
  kv("max_abs_position_error_y_m", report.max_abs_position_error.y());
  kv("max_abs_position_error_z_m", report.max_abs_position_error.z());
  kv("samples", static_cast<double>(report.timestamps.size()));
}

inline std::string HumanReadableReport(const EvaluationReport& report) {
  char buffer[512];
  std::snprintf(
      buffer, sizeof(buffer),
      "traversed distance: %.2f m\n"
      "final position error: %.3f m (drift %.3f%% of distance)\n"
      "rotational drift: %.5f deg/m\n"
      "mean |roll, pitch, yaw| error: %.3f, %.3f, %.3f deg\n"
      "max |x, y, z| error: %.3f, %.3f, %.3f m\n",
      report.traversed_distance, report.final_position_error_norm,
      report.translational_drift_percent, report.rotational_drift_deg_per_m,
      report.mean_abs_rotation_error_deg.x(),
      report.mean_abs_rotation_error_deg.y(),
      report.mean_abs_rotation_error_deg.z(),
      report.max_abs_position_error.x(), report.max_abs_position_error.y(),
      report.max_abs_position_error.z());
  return buffer;
}

// Per-timestamp error series as CSV with a header row; the raw material for
// error-over-time plots.
inline void WriteErrorsCsv(const EvaluationReport& report,
                           std::ostream& out) {
  out << "t,ex,ey,ez,eroll,epitch,eyaw\n";
  char buffer[256];
  for (size_t i = 0; i < report.timestamps.size(); ++i) {
    std::snprintf(buffer, sizeof(buffer),
                  "%.6f,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  report.timestamps[i], report.position_error[i].x(),
                  report.position_error[i].y(), report.position_error[i].z(),
                  report.rotation_error[i].x(), report.rotation_error[i].y(),
                  report.rotation_error[i].z());
    out << buffer;
  }
}

}  // namespace unislam

#endif  // UNISLAM_EVALUATION_HPP_

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

#ifndef UNISLAM_SENSOR_LOG_HPP_
#define UNISLAM_SENSOR_LOG_HPP_

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "unislam/config.hpp"
#include "unislam/imu_sim.hpp"
#include "unislam/lidar_sim.hpp"

namespace unislam {

struct LogFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Interleaved, timestamp-ordered IMU and line-scan recording.
//
// Text format, one event per line:
//   IMU t wx wy wz ax ay az
//   SCAN t motor_angle r1 r2 ... rB      ("inf" marks a miss)
// preceded by a "# key value" header that carries the sensor models, the
// initial pose and the world hash. At equal timestamps IMU sorts before
// SCAN.
struct SensorLog {
  LidarModel lidar;
  double imu_rate = 200.0;
  uint64_t world_hash = 0;
  Pose init_pose;
  std::vector<ImuSample> imu;
  std::vector<LineScan> scans;

  void Validate() const {
    double last_imu = -1.0;
    for (const ImuSample& s : imu) {
      if (s.t <= last_imu) {
        throw LogFormatError("sensor log: IMU timestamps not increasing");
      }
      last_imu = s.t;
    }
    double last_scan = -1.0;
    for (const LineScan& s : scans) {
      if (s.t <= last_scan) {
        throw LogFormatError("sensor log: scan timestamps not increasing");
      }
      last_scan = s.t;
    }
  }
};

namespace internal {

inline void AppendDouble(std::string& out, const char* format, double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), format, v);
  out += buffer;
}

}  // namespace internal

inline void WriteSensorLog(const SensorLog& log, std::ostream& out) {
  std::string header;
  header += "# unislam_log 1\n";
  header += "# lidar_kind " + ToString(log.lidar.kind) + "\n";
  const auto kv = [&header](const char* key, double value) {
    header += "# ";
    header += key;
    header += ' ';
    internal::AppendDouble(header, "%.9g", value);
    header += '\n';
  };
  kv("lidar_rate", log.lidar.scan_rate);
  kv("lidar_rpm", log.lidar.motor_rpm);
  kv("lidar_range", log.lidar.max_range);
  kv("lidar_noise", log.lidar.range_noise);
  kv("lidar_beams", static_cast<double>(log.lidar.beam_directions.size()));
  kv("imu_rate", log.imu_rate);
  header += "# world_hash " + std::to_string(log.world_hash) + "\n";
  header += "# init_pose";
  for (const double v :
       {log.init_pose.translation.x(), log.init_pose.translation.y(),
        log.init_pose.translation.z(), log.init_pose.rotation.x(),
        log.init_pose.rotation.y(), log.init_pose.rotation.z(),
        log.init_pose.rotation.w()}) {
    header += ' ';
    internal::AppendDouble(header, "%.17g", v);
  }
  header += '\n';
  out << header;

  size_t imu_index = 0, scan_index = 0;
  std::string line;
  while (imu_index < log.imu.size() || scan_index < log.scans.size()) {
    const bool take_imu =
        scan_index >= log.scans.size() ||
        (imu_index < log.imu.size() &&
         log.imu[imu_index].t <= log.scans[scan_index].t);
    line.clear();
    if (take_imu) {
      const ImuSample& s = log.imu[imu_index++];
      line += "IMU ";
      internal::AppendDouble(line, "%.6f", s.t);
      for (int i = 0; i < 3; ++i) {
        line += ' ';
        internal::AppendDouble(line, "%.9g", s.angular_velocity[i]);
      }
      for (int i = 0; i < 3; ++i) {
        line += ' ';
        internal::AppendDouble(line, "%.9g", s.specific_force[i]);
      }
    } else {
      const LineScan& s = log.scans[scan_index++];
      line += "SCAN ";
      internal::AppendDouble(line, "%.6f", s.t);
      line += ' ';
      internal::AppendDouble(line, "%.9g", s.motor_angle);
      for (const double r : s.ranges) {
        if (r == kRayMiss) {
          line += " inf";
        } else {
          line += ' ';
          internal::AppendDouble(line, "%.4f", r);
        }
      }
    }
    line += '\n';
    out << line;
  }
}

inline void WriteSensorLogFile(const SensorLog& log,
                               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LogFormatError("cannot open log for writing: " + path);
  WriteSensorLog(log, out);
}

inline SensorLog ReadSensorLog(std::istream& in) {
  SensorLog log;
  LidarKind kind = LidarKind::kRotating2d;
  double lidar_rate = 40.0, lidar_rpm = 30.0, lidar_range = 30.0,
         lidar_noise = 0.01;
  size_t expected_beams = 0;

  std::string line;
  bool lidar_built = false;
  const auto build_lidar = [&]() {
    if (lidar_built) return;
    log.lidar =
        LidarModel::MakePreset(kind, lidar_rate, lidar_range, lidar_rpm,
                               lidar_noise);
    if (expected_beams != 0 &&
        log.lidar.beam_directions.size() != expected_beams) {
      throw LogFormatError("sensor log: beam count does not match preset");
    }
    lidar_built = true;
  };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream header(line.substr(1));
      std::string key;
      header >> key;
      if (key == "lidar_kind") {
        std::string value;
        header >> value;
        kind = LidarKindFromString(value);
      } else if (key == "lidar_rate") {
        header >> lidar_rate;
      } else if (key == "lidar_rpm") {
        header >> lidar_rpm;
      } else if (key == "lidar_range") {
        header >> lidar_range;
      } else if (key == "lidar_noise") {
        header >> lidar_noise;
      } else if (key == "lidar_beams") {
        header >> expected_beams;
      } else if (key == "imu_rate") {
        header >> log.imu_rate;
      } else if (key == "world_hash") {
        header >> log.world_hash;
      } else if (key == "init_pose") {
        double tx, ty, tz, qx, qy, qz, qw;
        if (!(header >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
          throw LogFormatError("sensor log: bad init_pose header");
        }
        log.init_pose.translation = Eigen::Vector3d(tx, ty, tz);
        log.init_pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
      }
      continue;
    }

    build_lidar();
    const char* p = line.c_str();
    if (std::strncmp(p, "IMU ", 4) == 0) {
      p += 4;
      char* end = nullptr;
      ImuSample s;
      s.t = std::strtod(p, &end);
      p = end;
      for (int i = 0; i < 3; ++i) {
        s.angular_velocity[i] = std::strtod(p, &end);
        p = end;
      }
      for (int i = 0; i < 3; ++i) {
        s.specific_force[i] = std::strtod(p, &end);
        p = end;
      }
      log.imu.push_back(s);
    } else if (std::strncmp(p, "SCAN ", 5) == 0) {
      p += 5;
      char* end = nullptr;
      LineScan s;
      s.t = std::strtod(p, &end);
      p = end;
      s.motor_angle = std::strtod(p, &end);
      p = end;
      s.ranges.reserve(log.lidar.beam_directions.size());
      while (true) {
        while (*p == ' ') ++p;
        if (*p == '\0' || *p == '\r') break;
        const double r = std::strtod(p, &end);
        if (end == p) {
          throw LogFormatError("sensor log: bad range token");
        }
        p = end;
        s.ranges.push_back(r);
      }
      if (s.ranges.size() != log.lidar.beam_directions.size()) {
        throw LogFormatError("sensor log: scan has " +
                             std::to_string(s.ranges.size()) +
                             " ranges, expected " +
                             std::to_string(log.lidar.beam_directions.size()));
      }
      log.scans.push_back(s);
    } else {
      throw LogFormatError("sensor log: unknown record: " +
                           line.substr(0, 16));
    }
  }
  build_lidar();
  log.Validate();
  return log;
}

inline SensorLog ReadSensorLogFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LogFormatError("cannot open log for reading: " + path);
  return ReadSensorLog(in);
}

}  // namespace unislam

#endif  // UNISLAM_SENSOR_LOG_HPP_

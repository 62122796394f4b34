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

#ifndef UNISLAM_CONFIG_HPP_
#define UNISLAM_CONFIG_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "unislam/imu_sim.hpp"
#include "unislam/lidar_sim.hpp"
#include "unislam/trajectory.hpp"
#include "unislam/world.hpp"

namespace unislam {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat "key = value" configuration: UTF-8 lines, '#' comments, no nesting.
// Repeated keys (box, waypoint) accumulate in order.
class KeyValueConfig {
 public:
  static KeyValueConfig Parse(std::istream& in) {
    KeyValueConfig config;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
      ++line_number;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const size_t eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
          throw ConfigError("config line " + std::to_string(line_number) +
                            ": expected 'key = value'");
        }
        continue;
      }
      const std::string key = Trim(line.substr(0, eq));
      const std::string value = Trim(line.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError("config line " + std::to_string(line_number) +
                          ": empty key");
      }
      config.entries_[key].push_back(value);
      config.order_.push_back(key);
    }
    return config;
  }

  static KeyValueConfig FromString(const std::string& text) {
    std::istringstream in(text);
    return Parse(in);
  }

  static KeyValueConfig FromFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return Parse(in);
  }

  bool Has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string GetString(const std::string& key,
                        const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second.back();
  }

  double GetDouble(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    return ParseDouble(key, it->second.back());
  }

  int GetInt(const std::string& key, int fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
      return std::stoi(it->second.back());
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad integer '" +
                        it->second.back() + "'");
    }
  }

  uint64_t GetUint64(const std::string& key, uint64_t fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
      return std::stoull(it->second.back());
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad integer '" +
                        it->second.back() + "'");
    }
  }

  bool GetBool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second.back();
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    throw ConfigError("config key '" + key + "': bad boolean '" + v + "'");
  }

  Eigen::Vector3d GetVector3(const std::string& key,
                             const Eigen::Vector3d& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    return ParseVector3(key, it->second.back());
  }

  std::vector<std::string> GetAll(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? std::vector<std::string>{} : it->second;
  }

  std::set<std::string> Keys() const {
    std::set<std::string> keys;
    for (const auto& [key, values] : entries_) keys.insert(key);
    return keys;
  }

  static double ParseDouble(const std::string& key,
                            const std::string& value) {
    try {
      size_t used = 0;
      const double d = std::stod(value, &used);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad number '" + value +
                        "'");
    }
  }

  static Eigen::Vector3d ParseVector3(const std::string& key,
                                      const std::string& value) {
    std::istringstream in(value);
    Eigen::Vector3d v;
    if (!(in >> v.x() >> v.y() >> v.z())) {
      throw ConfigError("config key '" + key +
                        "': expected three numbers, got '" + value + "'");
    }
    return v;
  }

 private:
  static std::string Trim(const std::string& s) {
    const size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  }

  std::map<std::string, std::vector<std::string>> entries_;
  std::vector<std::string> order_;
};

// Keys that legitimately differ between sensing platforms: the localization
// and mapping parameters plus the sensor selection. Cross-payload configs
// must differ in these keys only.
inline const std::set<std::string>& PlatformParameterKeys() {
  static const std::set<std::string> keys = {
      "lidar_kind",          "lidar_rate",
      "lidar_rpm",           "lidar_range",
      "lidar_noise",         "sigma_a",
      "sigma_g",             "dmap_resolution",
      "dmap_max_range",      "scans_per_accumulation",
      "scans_per_submap",    "scans_per_optimization",
  };
  return keys;
}

// Keys whose values differ between two config files.
inline std::set<std::string> ConfigDiffKeys(const KeyValueConfig& a,
                                            const KeyValueConfig& b) {
  std::set<std::string> diff;
  std::set<std::string> keys = a.Keys();
  for (const std::string& k : b.Keys()) keys.insert(k);
  for (const std::string& k : keys) {
    if (a.GetAll(k) != b.GetAll(k)) diff.insert(k);
  }
  return diff;
}

struct SimulationInputs {
  WorldModel world;
  TrajectorySpec trajectory;
  LidarModel lidar;
  ImuNoiseModel imu_noise;
  double imu_rate = 200.0;
  uint64_t seed = 1;
};

inline LidarModel LidarFromConfig(const KeyValueConfig& config) {
  const LidarKind kind =
      LidarKindFromString(config.GetString("lidar_kind", "rotating2d"));
  const double default_rate = kind == LidarKind::kRotating2d ? 40.0 : 10.0;
  const double default_range = kind == LidarKind::kRotating2d ? 30.0 : 100.0;
  const double default_rpm = kind == LidarKind::kFixed3d ? 0.0 : 30.0;
  return LidarModel::MakePreset(
      kind, config.GetDouble("lidar_rate", default_rate),
      config.GetDouble("lidar_range", default_range),
      config.GetDouble("lidar_rpm", default_rpm),
      config.GetDouble("lidar_noise", 0.01));
}

inline SimulationInputs ParseSimulationInputs(const KeyValueConfig& config) {
  SimulationInputs inputs;
  for (const std::string& box : config.GetAll("box")) {
    std::istringstream in(box);
    Eigen::Vector3d lo, hi;
    if (!(in >> lo.x() >> lo.y() >> lo.z() >> hi.x() >> hi.y() >> hi.z())) {
      throw ConfigError("config key 'box': expected six numbers, got '" +
                        box + "'");
    }
    inputs.world.AddBox(lo, hi);
  }
  for (const std::string& wp : config.GetAll("waypoint")) {
    inputs.trajectory.waypoints.push_back(
        KeyValueConfig::ParseVector3("waypoint", wp));
  }
  if (inputs.trajectory.waypoints.empty()) {
    throw ConfigError("config: at least one 'waypoint' is required");
  }
  inputs.trajectory.speed_cap = config.GetDouble("speed_cap", 1.13);
  inputs.trajectory.dwell_time = config.GetDouble("dwell_time", 2.0);
  inputs.trajectory.ramp_time = config.GetDouble("ramp_time", 1.0);
  inputs.trajectory.yaw_rate = config.GetDouble("yaw_rate", 0.5);
  inputs.trajectory.face_travel = config.GetBool("face_travel", true);
  inputs.trajectory.min_duration = config.GetDouble("min_duration", 0.0);
  inputs.imu_rate = config.GetDouble("imu_rate", 200.0);
  inputs.trajectory.sample_rate = inputs.imu_rate;

  inputs.lidar = LidarFromConfig(config);
  inputs.imu_noise.sigma_a = config.GetDouble("sigma_a", 0.02);
  inputs.imu_noise.sigma_g = config.GetDouble("sigma_g", 0.002);
  inputs.imu_noise.accel_bias =
      config.GetVector3("accel_bias", Eigen::Vector3d::Zero());
  inputs.imu_noise.gyro_bias =
      config.GetVector3("gyro_bias", Eigen::Vector3d::Zero());
  inputs.imu_noise.sigma_ba = config.GetDouble("sigma_ba", 0.0);
  inputs.imu_noise.sigma_bg = config.GetDouble("sigma_bg", 0.0);
  inputs.seed = config.GetUint64("seed", 1);
  return inputs;
}

// FNV-1a over the canonical box list; stored in sensor logs so mismatched
// worlds are detectable.
inline uint64_t WorldHash(const WorldModel& world) {
  uint64_t h = 0xCBF29CE484222325ULL;
  const auto mix = [&h](double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.9g", value);
    for (const char* p = buffer; *p; ++p) {
      h ^= static_cast<uint8_t>(*p);
      h *= 0x100000001B3ULL;
    }
  };
  for (const Box& box : world.boxes()) {
    for (int i = 0; i < 3; ++i) mix(box.min[i]);
    for (int i = 0; i < 3; ++i) mix(box.max[i]);
  }
  return h;
}

}  // namespace unislam

#endif  // UNISLAM_CONFIG_HPP_

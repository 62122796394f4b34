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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "unislam/config.hpp"
#include "unislam/evaluation.hpp"
#include "unislam/outputs.hpp"
#include "unislam/pipeline.hpp"
#include "unislam/sensor_log.hpp"
#include "unislam/simulate.hpp"

namespace {

namespace fs = std::filesystem;
using namespace unislam;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

void EnsureDirectory(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory: " + path);
  }
}

int RunSimulate(const std::string& config_path, const std::string& out_dir,
                uint64_t seed_override, bool has_seed) {
  const KeyValueConfig kv = KeyValueConfig::FromFile(config_path);
  SimulationInputs inputs = ParseSimulationInputs(kv);
  if (has_seed) inputs.seed = seed_override;
  const SimulationOutput output = RunSimulation(inputs);

  EnsureDirectory(out_dir);
  WriteSensorLogFile(output.log, out_dir + "/sensor.log");
  WriteTumTrajectoryFile(output.ground_truth, out_dir + "/groundtruth.tum");
  std::cerr << "simulate: " << output.log.imu.size() << " imu samples, "
            << output.log.scans.size() << " scans, world hash "
            << output.log.world_hash << "\n";
  return kExitOk;
}

int RunSlam(const std::string& config_path, const std::string& log_path,
            const std::string& out_dir, uint64_t seed_override, bool has_seed,
            bool single_thread) {
  const KeyValueConfig kv = KeyValueConfig::FromFile(config_path);
  PipelineConfig config = ParsePipelineConfig(kv);
  if (has_seed) config.seed = seed_override;
  const SensorLog log = ReadSensorLogFile(log_path);

  const PipelineResult result = RunPipeline(log, config, single_thread);

  EnsureDirectory(out_dir);
  WriteTumTrajectoryFile(result.trajectory, out_dir + "/trajectory.tum");
  WriteMapPlyFile(result.submaps, result.graph, out_dir + "/map.ply");
  WriteGraphDumpFile(result.graph, out_dir + "/graph.txt");
  WriteSubmapsDumpFile(result.submaps, out_dir + "/submaps.txt");
  std::ofstream stats(out_dir + "/stats.txt", std::ios::binary);
  WriteStats(result.stats, stats);
  std::cerr << "slam: " << result.stats.accumulated_scans
            << " accumulated scans, " << result.stats.submaps_created
            << " submaps, " << result.stats.optimization_passes
            << " optimization passes\n";
  return kExitOk;
}

int RunEval(const std::string& estimate_path, const std::string& truth_path,
            const std::string& out_dir) {
  const auto estimate = ReadTumTrajectoryFile(estimate_path);
  const auto truth = ReadTumTrajectoryFile(truth_path);
  const EvaluationReport report = Evaluate(estimate, truth);
  std::cout << HumanReadableReport(report);
  WriteReportKv(report, std::cout);
  if (!out_dir.empty()) {
    EnsureDirectory(out_dir);
    std::ofstream kv(out_dir + "/report.kv", std::ios::binary);
    WriteReportKv(report, kv);
    std::ofstream csv(out_dir + "/errors.csv", std::ios::binary);
    WriteErrorsCsv(report, csv);
  }
  return kExitOk;
}

int RunExportMap(const std::string& in_dir, const std::string& out_path) {
  const PoseGraph graph = ReadGraphDumpFile(in_dir + "/graph.txt");
  const std::vector<SubmapDump> submaps =
      ReadSubmapsDumpFile(in_dir + "/submaps.txt");
  WriteMapPlyFile(submaps, graph, out_path);
  std::cerr << "export-map: wrote " << out_path << "\n";
  return kExitOk;
}

int RunExportPlots(const std::string& estimate_path,
                   const std::string& truth_path,
                   const std::string& out_path) {
  const auto estimate = ReadTumTrajectoryFile(estimate_path);
  const auto truth = ReadTumTrajectoryFile(truth_path);
  const EvaluationReport report = Evaluate(estimate, truth);
  std::ofstream csv(out_path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open " + out_path);
  WriteErrorsCsv(report, csv);
  std::cerr << "export-plots: wrote " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "unislam: unified LiDAR SLAM for fixed and rotating payloads.\n"
      "Simulation, localization and mapping, and evaluation in one tool."};
  app.require_subcommand(1);

  std::string config_path, log_path, out_dir, truth_path, estimate_path;
  std::string in_dir, out_path;
  uint64_t seed = 0;
  bool single_thread = false;

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate a sensor log and ground truth from a world");
  simulate->add_option("--config", config_path, "world + sensor config file")
      ->required();
  simulate->add_option("--out", out_dir, "output directory")->required();
  CLI::Option* sim_seed = simulate->add_option("--seed", seed, "RNG seed");

  CLI::App* slam = app.add_subcommand(
      "slam", "Run the localization and mapping pipeline on a sensor log");
  slam->add_option("--config", config_path, "pipeline config file")
      ->required();
  slam->add_option("--log", log_path, "sensor log")->required();
  slam->add_option("--out", out_dir, "output directory")->required();
  CLI::Option* slam_seed = slam->add_option("--seed", seed, "RNG seed");
  slam->add_flag("--single-thread", single_thread,
                 "run every stage inline (determinism debugging)");

  CLI::App* eval = app.add_subcommand(
      "eval", "Compare an estimated trajectory against ground truth");
  eval->add_option("--estimate", estimate_path, "estimated trajectory (TUM)")
      ->required();
  eval->add_option("--ground-truth", truth_path, "ground truth (TUM)")
      ->required();
  eval->add_option("--out", out_dir, "directory for report.kv + errors.csv");

  CLI::App* export_map = app.add_subcommand(
      "export-map", "Rebuild the map PLY from a slam output directory");
  export_map->add_option("--in", in_dir, "slam output directory")->required();
  export_map->add_option("--out", out_path, "output PLY path")->required();

  CLI::App* export_plots = app.add_subcommand(
      "export-plots", "Write per-timestamp error series as CSV");
  export_plots
      ->add_option("--estimate", estimate_path, "estimated trajectory (TUM)")
      ->required();
  export_plots
      ->add_option("--ground-truth", truth_path, "ground truth (TUM)")
      ->required();
  export_plots->add_option("--out", out_path, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) {
      return RunSimulate(config_path, out_dir, seed, !sim_seed->empty());
    }
    if (slam->parsed()) {
      return RunSlam(config_path, log_path, out_dir, seed,
                     !slam_seed->empty(), single_thread);
    }
    if (eval->parsed()) {
      return RunEval(estimate_path, truth_path, out_dir);
    }
    if (export_map->parsed()) {
      return RunExportMap(in_dir, out_path);
    }
    if (export_plots->parsed()) {
      return RunExportPlots(estimate_path, truth_path, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

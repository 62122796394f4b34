// Parameter sweep harness for the room scenario; development aid, not part
// of the shipped CLI.
#include <cstdio>

#include "unislam/evaluation.hpp"
#include "unislam/pipeline.hpp"
#include "unislam/simulate.hpp"

using namespace unislam;

namespace {

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

SimulationInputs RoomSimulation(double duration, uint64_t seed) {
  SimulationInputs inputs;
  inputs.world = CubicRoom();
  inputs.trajectory.waypoints = {{-3.0, 0.0, 5.0}, {3.0, 0.0, 5.0}};
  inputs.trajectory.speed_cap = 0.5;
  inputs.trajectory.dwell_time = 1.0;
  inputs.trajectory.min_duration = duration;
  inputs.lidar = LidarModel::Rotating2d(40.0, 30.0, 30.0, 0.01);
  inputs.imu_noise.accel_bias = Eigen::Vector3d(0.02, -0.01, 0.015);
  inputs.imu_noise.gyro_bias = Eigen::Vector3d(0.001, 0.002, -0.001);
  inputs.seed = seed;
  return inputs;
}

}  // namespace

int main() {
  const SimulationOutput sim = RunSimulation(RoomSimulation(20.0, 13));

  struct Variant {
    const char* name;
    double resolution;
    double floor_factor;
    double r_scale;
    double target_ess;
    int opt_every;
  };
  const Variant variants[] = {
      {"res.25 fl.5 rs1", 0.25, 0.5, 1.0, 50, 10},
      {"res.15 fl.25 rs1", 0.15, 0.25, 1.0, 50, 10},
      {"res.15 fl.5 rs1", 0.15, 0.5, 1.0, 50, 10},
      {"res.15 fl.5 rs2", 0.15, 0.5, 2.0, 50, 10},
      {"res.15 fl.25 rs2", 0.15, 0.25, 2.0, 50, 10},
      {"res.10 fl.5 rs1", 0.10, 0.5, 1.0, 50, 10},
      {"res.15 fl.25 rs1 ess100", 0.15, 0.25, 1.0, 100, 10},
      {"res.15 fl.25 rs1 opt5", 0.15, 0.25, 1.0, 50, 5},
  };
  for (const Variant& v : variants) {
    PipelineConfig config;
    config.scans_per_accumulation = 8;
    config.scans_per_submap = 10;
    config.scans_per_optimization = 10;
    config.seed = 13;
    config.gpf_r_scale = v.r_scale;
    config.dmap_resolution = v.resolution;
    config.gpf_r_floor_pos = v.floor_factor * v.resolution;
    config.gpf_target_ess = v.target_ess;
    config.scans_per_optimization = v.opt_every;
    try {
      const PipelineResult result = RunPipeline(sim.log, config, false);
      const EvaluationReport report =
          Evaluate(result.trajectory, sim.ground_truth);
      std::printf(
          "%-45s final=%.3f m drift=%.2f%% rot=(%.2f %.2f %.2f) deg "
          "upd=%d rej=%d deg=%d\n",
          v.name, report.final_position_error_norm,
          report.translational_drift_percent,
          report.mean_abs_rotation_error_deg.x(),
          report.mean_abs_rotation_error_deg.y(),
          report.mean_abs_rotation_error_deg.z(), result.stats.gpf_updates,
          result.stats.gpf_rejected, result.stats.gpf_degenerate);
    } catch (const std::exception& e) {
      std::printf("%-45s FAILED: %s\n", v.name, e.what());
    }
  }
  return 0;
}

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

#ifndef UNISLAM_PIPELINE_HPP_
#define UNISLAM_PIPELINE_HPP_

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "unislam/config.hpp"
#include "unislam/eskf.hpp"
#include "unislam/evaluation.hpp"
#include "unislam/gpf.hpp"
#include "unislam/pose_graph.hpp"
#include "unislam/sensor_log.hpp"
#include "unislam/submap.hpp"

namespace unislam {

// The full parameter surface. The platform-dependent subset (see
// PlatformParameterKeys) is what changes between sensing payloads;
// everything else is shared machinery tuning.
struct PipelineConfig {
  // Scan accumulation, submap lifecycle, optimization cadence.
  int scans_per_accumulation = 8;   // N
  int scans_per_submap = 10;        // M
  int scans_per_optimization = 20;  // I
  // IMU noise densities used as filter process noise.
  double sigma_a = 0.02;
  double sigma_g = 0.002;
  double sigma_ba = 1e-4;
  double sigma_bg = 1e-5;
  // Distance map.
  double dmap_resolution = 0.25;
  double dmap_max_range = 8.0;
  // Particle filter.
  int gpf_particles = 500;    // K
  int gpf_max_beams = 300;    // B
  double gpf_sigma = 0.0;     // sigma_L; 0 means 2 x dmap_resolution
  // Hold filter updates back until the first submap is finished: the first
  // M scans build the map that later scans localize against, which matters
  // for rotating payloads whose individual 3D scans cover only part of the
  // sphere.
  bool gpf_defer_until_first_finished = true;
  // Guards against sampling-noise overconfidence: the weighted sample
  // covariance is debiased by 1/(1 - sum w^2), the recovered measurement
  // variance is floored at the map discretization limit, and updates whose
  // effective sample size falls below the threshold are skipped.
  bool gpf_debias_covariance = true;
  double gpf_r_scale = 2.0;      // inflate the recovered measurement noise
  double gpf_r_floor_pos = 0.0;  // m; 0 means 0.5 x dmap_resolution
  double gpf_r_floor_rot = 0.01;  // rad
  double gpf_min_ess = 10.0;
  double gpf_target_ess = 50.0;  // temper the weights up to this ESS
  int gpf_rounds = 3;            // proposal refinement rounds per update
  // Information gains below this fraction of the prior information are
  // treated as no information; roughly 2 sqrt(2 / target ESS).
  double gpf_relative_epsilon = 0.1;
  double gpf_saturation = 0.0;   // m; 0 means 1.5 x the likelihood sigma
  // Innovation gate; chi-square 0.999 quantile for the 6-dof measurement.
  double eskf_gate = kChi2Gate6Dof999;
  // Filter initial uncertainty. Attitude and bias priors assume a leveled,
  // briefly static start.
  double init_pos_std = 0.01;
  double init_vel_std = 0.01;
  double init_att_std = 0.005;
  double init_ba_std = 0.02;
  double init_bg_std = 0.002;
  // Fallback information for insertion constraints (bootstrap scan and
  // rejected updates).
  double insertion_info_pos_std = 0.05;
  double insertion_info_rot_std = 0.02;
  // Loop closure search.
  bool loop_closure = true;
  double loop_radius = 0.0;  // 0 means dmap_max_range
  double loop_translation_window = 2.0;
  double loop_yaw_window_deg = 10.0;
  double loop_yaw_step_deg = 2.0;
  double loop_accept_factor = 1.5;  // x dmap_resolution
  int loop_max_points = 150;
  int loop_min_scan_gap = 0;   // 0 means 2 x scans_per_submap
  int loop_max_candidates = 3; // nearest submaps searched per trigger
  double loop_info_pos_std = 0.1;
  double loop_info_rot_std = 0.05;

  uint64_t seed = 1;

  void Validate() const {
    if (scans_per_accumulation < 1 || scans_per_submap < 1 ||
        scans_per_optimization < 1) {
      throw ConfigError("pipeline config: N, M, I must all be >= 1");
    }
    if (!(dmap_resolution > 0.0)) {
      throw ConfigError("pipeline config: dmap_resolution must be > 0");
    }
    if (!(dmap_max_range > dmap_resolution)) {
      throw ConfigError(
          "pipeline config: dmap_max_range must exceed dmap_resolution");
    }
    if (gpf_particles < 2 || gpf_max_beams < 1) {
      throw ConfigError("pipeline config: bad particle filter parameters");
    }
  }

  double GpfSigma() const {
    return gpf_sigma > 0.0 ? gpf_sigma : 2.0 * dmap_resolution;
  }
  double GpfRFloorPos() const {
    return gpf_r_floor_pos > 0.0 ? gpf_r_floor_pos : 0.5 * dmap_resolution;
  }
  double LoopRadius() const {
    return loop_radius > 0.0 ? loop_radius : dmap_max_range;
  }
  int LoopMinScanGap() const {
    return loop_min_scan_gap > 0 ? loop_min_scan_gap
                                 : 2 * scans_per_submap;
  }
};

inline PipelineConfig ParsePipelineConfig(const KeyValueConfig& kv) {
  PipelineConfig c;
  c.scans_per_accumulation =
      kv.GetInt("scans_per_accumulation", c.scans_per_accumulation);
  c.scans_per_submap = kv.GetInt("scans_per_submap", c.scans_per_submap);
  c.scans_per_optimization =
      kv.GetInt("scans_per_optimization", c.scans_per_optimization);
  c.sigma_a = kv.GetDouble("sigma_a", c.sigma_a);
  c.sigma_g = kv.GetDouble("sigma_g", c.sigma_g);
  c.sigma_ba = kv.GetDouble("sigma_ba_process", c.sigma_ba);
  c.sigma_bg = kv.GetDouble("sigma_bg_process", c.sigma_bg);
  c.dmap_resolution = kv.GetDouble("dmap_resolution", c.dmap_resolution);
  c.dmap_max_range = kv.GetDouble("dmap_max_range", c.dmap_max_range);
  c.gpf_particles = kv.GetInt("gpf_particles", c.gpf_particles);
  c.gpf_max_beams = kv.GetInt("gpf_max_beams", c.gpf_max_beams);
  c.gpf_sigma = kv.GetDouble("gpf_sigma", c.gpf_sigma);
  c.gpf_defer_until_first_finished = kv.GetBool(
      "gpf_defer_until_first_finished", c.gpf_defer_until_first_finished);
  c.gpf_debias_covariance =
      kv.GetBool("gpf_debias_covariance", c.gpf_debias_covariance);
  c.gpf_r_scale = kv.GetDouble("gpf_r_scale", c.gpf_r_scale);
  c.gpf_r_floor_pos = kv.GetDouble("gpf_r_floor_pos", c.gpf_r_floor_pos);
  c.gpf_r_floor_rot = kv.GetDouble("gpf_r_floor_rot", c.gpf_r_floor_rot);
  c.gpf_min_ess = kv.GetDouble("gpf_min_ess", c.gpf_min_ess);
  c.gpf_target_ess = kv.GetDouble("gpf_target_ess", c.gpf_target_ess);
  c.gpf_rounds = kv.GetInt("gpf_rounds", c.gpf_rounds);
  c.gpf_relative_epsilon =
      kv.GetDouble("gpf_relative_epsilon", c.gpf_relative_epsilon);
  c.gpf_saturation = kv.GetDouble("gpf_saturation", c.gpf_saturation);
  c.eskf_gate = kv.GetDouble("eskf_gate", c.eskf_gate);
  c.init_pos_std = kv.GetDouble("init_pos_std", c.init_pos_std);
  c.init_vel_std = kv.GetDouble("init_vel_std", c.init_vel_std);
  c.init_att_std = kv.GetDouble("init_att_std", c.init_att_std);
  c.init_ba_std = kv.GetDouble("init_ba_std", c.init_ba_std);
  c.init_bg_std = kv.GetDouble("init_bg_std", c.init_bg_std);
  c.insertion_info_pos_std =
      kv.GetDouble("insertion_info_pos_std", c.insertion_info_pos_std);
  c.insertion_info_rot_std =
      kv.GetDouble("insertion_info_rot_std", c.insertion_info_rot_std);
  c.loop_closure = kv.GetBool("loop_closure", c.loop_closure);
  c.loop_radius = kv.GetDouble("loop_radius", c.loop_radius);
  c.loop_translation_window =
      kv.GetDouble("loop_translation_window", c.loop_translation_window);
  c.loop_yaw_window_deg =
      kv.GetDouble("loop_yaw_window_deg", c.loop_yaw_window_deg);
  c.loop_yaw_step_deg = kv.GetDouble("loop_yaw_step_deg", c.loop_yaw_step_deg);
  c.loop_accept_factor =
      kv.GetDouble("loop_accept_factor", c.loop_accept_factor);
  c.loop_max_points = kv.GetInt("loop_max_points", c.loop_max_points);
  c.loop_min_scan_gap = kv.GetInt("loop_min_scan_gap", c.loop_min_scan_gap);
  c.loop_max_candidates =
      kv.GetInt("loop_max_candidates", c.loop_max_candidates);
  c.loop_info_pos_std = kv.GetDouble("loop_info_pos_std", c.loop_info_pos_std);
  c.loop_info_rot_std = kv.GetDouble("loop_info_rot_std", c.loop_info_rot_std);
  c.seed = kv.GetUint64("seed", c.seed);
  c.Validate();
  return c;
}

namespace internal {

// Owns the submap manager. In threaded mode a dedicated thread voxelizes
// scans and refreshes distance maps while the foreground keeps localizing
// against the last published snapshot; in single-thread mode the same calls
// run inline. Both modes process the identical job sequence, so outputs are
// byte-identical.
class MapWorker {
 public:
  MapWorker(int scans_per_submap, double resolution, double max_distance,
            bool threaded)
      : manager_(scans_per_submap, resolution, max_distance),
        threaded_(threaded) {
    if (threaded_) {
      thread_ = std::thread([this] { Loop(); });
    }
  }

  ~MapWorker() { Shutdown(); }

  void Shutdown() {
    if (threaded_ && thread_.joinable()) {
      {
        std::lock_guard<std::mutex> lock(mutex_);
        stop_ = true;
      }
      job_ready_.notify_all();
      thread_.join();
    }
  }

  void Enqueue(AccumulatedScan scan, const Pose& pose) {
    if (!threaded_) {
      Process(scan, pose);
      return;
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      jobs_.push_back({std::move(scan), pose});
    }
    job_ready_.notify_one();
  }

  // Blocks until every scan with id <= scan_id has been inserted and its
  // distance maps published.
  void WaitUntilApplied(int scan_id) {
    if (!threaded_) return;
    std::unique_lock<std::mutex> lock(mutex_);
    job_done_.wait(lock, [&] { return applied_ >= scan_id; });
  }

  std::vector<LifecycleEvent> DrainEvents() {
    std::lock_guard<std::mutex> lock(mutex_);
    return std::exchange(events_, {});
  }

  struct MatchingView {
    int submap_id = -1;
    Pose anchor;
    std::shared_ptr<const DistanceMap> distance_map;
  };

  MatchingView Matching() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return published_;
  }

  bool initialized() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return published_.submap_id >= 0;
  }

  // Only valid while the worker is idle (after WaitUntilApplied of the last
  // enqueued scan).
  void SetActiveAnchor(int submap_id, const Pose& anchor) {
    std::lock_guard<std::mutex> lock(mutex_);
    manager_.SetActiveAnchor(submap_id, anchor);
    if (published_.submap_id == submap_id) published_.anchor = anchor;
  }

  // Only valid while the worker is idle.
  const SubmapManager& manager() const { return manager_; }

 private:
  struct Job {
    AccumulatedScan scan;
    Pose pose;
  };

  void Process(const AccumulatedScan& scan, const Pose& pose) {
    std::vector<LifecycleEvent> events = manager_.InsertScan(scan, pose);
    std::lock_guard<std::mutex> lock(mutex_);
    events_.insert(events_.end(), events.begin(), events.end());
    published_.submap_id = manager_.matching().id();
    published_.anchor = manager_.matching().anchor();
    published_.distance_map = manager_.matching().distance_map();
    applied_ = scan.id;
  }

  void Loop() {
    while (true) {
      Job job;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        job_ready_.wait(lock, [&] { return stop_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      Process(job.scan, job.pose);
      job_done_.notify_all();
    }
  }

  SubmapManager manager_;
  const bool threaded_;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::condition_variable job_ready_;
  std::condition_variable job_done_;
  std::deque<Job> jobs_;
  std::vector<LifecycleEvent> events_;
  MatchingView published_;
  int applied_ = 0;
  bool stop_ = false;
};

}  // namespace internal

struct SubmapDump {
  int submap_id = -1;
  int node_id = -1;
  double resolution = 0.0;
  std::vector<Eigen::Vector3d> voxel_centers;  // submap frame, sorted
};

struct PipelineStats {
  int line_scans = 0;
  int accumulated_scans = 0;
  int submaps_created = 0;
  int submaps_finished = 0;
  int optimization_passes = 0;
  int gpf_updates = 0;
  int gpf_rejected = 0;
  int gpf_degenerate = 0;
  int gpf_clamped_directions = 0;
  int loop_constraints = 0;
};

struct PipelineResult {
  std::vector<TrajectoryPoint> trajectory;
  PoseGraph graph;
  std::vector<SubmapDump> submaps;
  PipelineStats stats;
};

// Replays a sensor log through the full stack: IMU samples drive the
// filter; every N line scans form a 3D scan that is weighted against the
// matching submap's distance map, fused as a pseudo pose measurement,
// registered in the pose graph and inserted into both active submaps; every
// I accumulated scans the background optimizer refines the graph and the
// result is merged at the next deterministic sync point. The first
// accumulated scan bootstraps the map without a filter update.
class Pipeline {
 public:
  Pipeline(const SensorLog& log, const PipelineConfig& config,
           bool single_thread)
      : log_(log), config_(config), single_thread_(single_thread) {
    config_.Validate();
    next_trigger_ = config_.scans_per_optimization;
    if (log.imu.empty() && log.scans.empty()) {
      throw ConfigError("RunPipeline: empty sensor log");
    }
    EskfConfig eskf_config;
    eskf_config.noise.sigma_a = config_.sigma_a;
    eskf_config.noise.sigma_g = config_.sigma_g;
    eskf_config.noise.sigma_ba = config_.sigma_ba;
    eskf_config.noise.sigma_bg = config_.sigma_bg;
    eskf_config.gate = config_.eskf_gate;
    eskf_config.init_pos_std = config_.init_pos_std;
    eskf_config.init_vel_std = config_.init_vel_std;
    eskf_config.init_att_std = config_.init_att_std;
    eskf_config.init_ba_std = config_.init_ba_std;
    eskf_config.init_bg_std = config_.init_bg_std;
    eskf_ = Eskf(eskf_config);
    worker_ = std::make_unique<internal::MapWorker>(
        config_.scans_per_submap, config_.dmap_resolution,
        config_.dmap_max_range, !single_thread);

    default_insertion_info_ = Matrix6d::Identity();
    default_insertion_info_.topLeftCorner<3, 3>() /=
        config_.insertion_info_pos_std * config_.insertion_info_pos_std;
    default_insertion_info_.bottomRightCorner<3, 3>() /=
        config_.insertion_info_rot_std * config_.insertion_info_rot_std;

    loop_config_.radius = config_.LoopRadius();
    loop_config_.translation_window = config_.loop_translation_window;
    loop_config_.translation_step = config_.dmap_resolution;
    loop_config_.yaw_window = config_.loop_yaw_window_deg * M_PI / 180.0;
    loop_config_.yaw_step = config_.loop_yaw_step_deg * M_PI / 180.0;
    loop_config_.acceptance_mean_distance =
        config_.loop_accept_factor * config_.dmap_resolution;
    loop_config_.max_points = config_.loop_max_points;
    loop_config_.information = Matrix6d::Identity();
    loop_config_.information.topLeftCorner<3, 3>() /=
        config_.loop_info_pos_std * config_.loop_info_pos_std;
    loop_config_.information.bottomRightCorner<3, 3>() /=
        config_.loop_info_rot_std * config_.loop_info_rot_std;
  }

  PipelineResult Run() {
    const double t0 = FirstEventTime();
    eskf_.Initialize(log_.init_pose, t0);

    size_t imu_index = 0, scan_index = 0;
    bool imu_seeded = false;
    while (imu_index < log_.imu.size() || scan_index < log_.scans.size()) {
      const bool take_imu =
          scan_index >= log_.scans.size() ||
          (imu_index < log_.imu.size() &&
           log_.imu[imu_index].t <= log_.scans[scan_index].t);
      if (take_imu) {
        const ImuSample& sample = log_.imu[imu_index++];
        if (!imu_seeded && sample.t <= t0 + 1e-12) {
          eskf_.SeedImu(sample);
          imu_seeded = true;
          continue;
        }
        eskf_.Propagate(sample);
        if (accumulated_count_ == 0 && log_.scans.empty()) {
          dead_reckoning_.push_back({sample.t, eskf_.state().BodyPose()});
        }
      } else {
        const LineScan& scan = log_.scans[scan_index++];
        ++stats_.line_scans;
        const Pose body = eskf_.state().BodyPose();
        scan_buffer_.push_back(scan);
        sensor_pose_buffer_.push_back(
            log_.lidar.SensorPose(body, scan.motor_angle));
        if (static_cast<int>(scan_buffer_.size()) ==
            config_.scans_per_accumulation) {
          ProcessAccumulatedScan();
          scan_buffer_.clear();
          sensor_pose_buffer_.clear();
        }
      }
    }
    return Finalize();
  }

 private:
  double FirstEventTime() const {
    if (log_.imu.empty()) return log_.scans.front().t;
    if (log_.scans.empty()) return log_.imu.front().t;
    return std::min(log_.imu.front().t, log_.scans.front().t);
  }

  void ProcessAccumulatedScan() {
    const int k = ++accumulated_count_;
    stats_.accumulated_scans = k;

    worker_->WaitUntilApplied(k - 1);
    ProcessEvents(worker_->DrainEvents());
    MergeIfDue(k);
    MaybeLaunchOptimization(k);

    AccumulatedScan scan =
        AccumulateScans(k, scan_buffer_, sensor_pose_buffer_, log_.lidar,
                        eskf_.state().BodyPose());

    const bool gpf_ready =
        k > 1 && worker_->initialized() &&
        (!config_.gpf_defer_until_first_finished ||
         stats_.submaps_finished > 0);
    if (gpf_ready) {
      RunGpfUpdate(k, scan);
    } else {
      scan_info_[k] = default_insertion_info_;
    }

    const Pose scan_pose = eskf_.state().BodyPose();
    const int node_id = graph_.AddNode(SpgNode::kScan, scan_pose, scan.t);
    scan_node_of_[k] = node_id;

    if (config_.loop_closure && k % config_.scans_per_optimization == 0) {
      SearchLoopClosures(k, scan, node_id, scan_pose);
    }

    worker_->Enqueue(std::move(scan), scan_pose);
  }

  void RunGpfUpdate(int k, const AccumulatedScan& scan) {
    const internal::MapWorker::MatchingView view = worker_->Matching();
    const Matrix6d prior_cov = eskf_.PoseCovariance();
    LikelihoodConfig likelihood{config_.GpfSigma(), config_.gpf_max_beams};
    likelihood.saturation = config_.gpf_saturation > 0.0
                                ? config_.gpf_saturation
                                : 1.5 * config_.GpfSigma();
    const Pose world_to_map = Inverse(view.anchor);
    const auto evaluate = [&](ParticleSet& set) {
      set.log_weights =
          WeightParticles(set, scan.points, *view.distance_map, world_to_map,
                          likelihood)
              .log_weights;
    };
    const IteratedPosterior estimate = IteratePosteriorEstimate(
        eskf_.state().BodyPose(), prior_cov, config_.gpf_particles,
        config_.gpf_rounds, config_.gpf_target_ess,
        DeriveSeed(config_.seed, "gpf", static_cast<uint64_t>(k)), evaluate);
    try {
      if (estimate.effective_sample_size < config_.gpf_min_ess) {
        throw DegeneratePosteriorError("effective sample size below floor");
      }
      Vector6d posterior_mean = estimate.mean;
      Matrix6d posterior_cov = estimate.covariance;
      if (config_.gpf_debias_covariance) {
        posterior_cov /=
            std::max(1e-9, 1.0 - 1.0 / estimate.effective_sample_size);
      }
      RecoveredMeasurement recovered = RecoverPseudoMeasurement(
          Vector6d::Zero(), prior_cov, posterior_mean, posterior_cov, 1e-6,
          config_.gpf_relative_epsilon);
      stats_.gpf_clamped_directions += recovered.clamped_directions;
      // A discretized likelihood field cannot pin the pose better than a
      // fraction of a voxel per scan; floor (and optionally inflate) the
      // measurement variance accordingly.
      recovered.measurement.covariance *= config_.gpf_r_scale;
      const double floor_pos =
          config_.GpfRFloorPos() * config_.GpfRFloorPos();
      const double floor_rot =
          config_.gpf_r_floor_rot * config_.gpf_r_floor_rot;
      recovered.measurement.covariance.topLeftCorner<3, 3>() +=
          floor_pos * Eigen::Matrix3d::Identity();
      recovered.measurement.covariance.bottomRightCorner<3, 3>() +=
          floor_rot * Eigen::Matrix3d::Identity();
      const UpdateResult update = eskf_.Update(recovered.measurement);
      if (std::getenv("UNISLAM_DEBUG")) {
        std::fprintf(
            stderr,
            "scan %d ess=%.1f alpha=%.3f clamp=%d |postmean|=%.4f md=%.2f "
            "acc=%d p=(%.3f %.3f %.3f) prior_sd=%.4f\n",
            k, estimate.effective_sample_size, estimate.final_alpha,
            recovered.clamped_directions, posterior_mean.head<3>().norm(),
            update.mahalanobis_squared, update.accepted ? 1 : 0,
            eskf_.state().position.x(), eskf_.state().position.y(),
            eskf_.state().position.z(), std::sqrt(prior_cov(0, 0)));
      }
      if (update.accepted) {
        ++stats_.gpf_updates;
        const Matrix6d regularized =
            posterior_cov + 1e-8 * Matrix6d::Identity();
        scan_info_[k] = regularized.ldlt().solve(Matrix6d::Identity());
      } else {
        ++stats_.gpf_rejected;
        scan_info_[k] = default_insertion_info_;
      }
    } catch (const DegeneratePosteriorError&) {
      ++stats_.gpf_degenerate;
      scan_info_[k] = default_insertion_info_;
    }
  }

  void ProcessEvents(const std::vector<LifecycleEvent>& events) {
    for (const LifecycleEvent& e : events) {
      switch (e.kind) {
        case LifecycleEvent::kSubmapCreated: {
          const int node_id = graph_.AddNode(SpgNode::kSubmap, e.anchor);
          submap_node_of_[e.submap_id] = node_id;
          active_submaps_.insert(e.submap_id);
          ++stats_.submaps_created;
          break;
        }
        case LifecycleEvent::kSubmapFinished: {
          active_submaps_.erase(e.submap_id);
          finished_at_scan_[e.submap_id] = e.scan_id;
          ++stats_.submaps_finished;
          break;
        }
        case LifecycleEvent::kScanInserted: {
          graph_.AddConstraint(submap_node_of_.at(e.submap_id),
                               scan_node_of_.at(e.scan_id), e.scan_in_submap,
                               scan_info_.at(e.scan_id));
          break;
        }
      }
    }
  }

  void MaybeLaunchOptimization(int k) {
    const int complete = k - 1;  // scans fully inserted and registered
    if (optimization_ || complete < next_trigger_) return;
    const int last_constrained = graph_.LastConstrainedNode();
    if (last_constrained < 0) return;
    next_trigger_ += config_.scans_per_optimization;
    PoseGraph snapshot = graph_.PrefixSnapshot(last_constrained + 1);
    merge_at_scan_ = k + 1;
    // Deferred launch keeps single-thread mode genuinely single-threaded;
    // the optimizer input is the snapshot either way, so both modes compute
    // identical poses.
    optimization_ = std::async(
        single_thread_ ? std::launch::deferred : std::launch::async,
        [snapshot]() mutable {
          snapshot.Optimize();
          return snapshot.NodePoses();
        });
  }

  void MergeIfDue(int k) {
    if (!optimization_ || k < merge_at_scan_) return;
    MergeNow();
  }

  void MergeNow() {
    const std::vector<Pose> optimized = optimization_->get();
    optimization_.reset();
    const Pose correction = graph_.ApplyOptimizedSnapshot(optimized);
    eskf_.ApplyWorldCorrection(correction);
    for (const int submap_id : active_submaps_) {
      const auto it = submap_node_of_.find(submap_id);
      if (it != submap_node_of_.end()) {
        worker_->SetActiveAnchor(submap_id, graph_.NodePose(it->second));
      }
    }
    ++stats_.optimization_passes;
  }

  void SearchLoopClosures(int k, const AccumulatedScan& scan, int node_id,
                          const Pose& scan_pose) {
    // Candidates: finished submaps that are neither too recent nor on a
    // re-search cooldown, nearest anchors first, capped per trigger. The
    // grid search is expensive, so frequency is throttled here rather than
    // inside the search itself.
    struct Scored {
      double distance;
      int submap_id;
      LoopCandidate candidate;
    };
    std::vector<Scored> scored;
    for (const auto& submap : worker_->manager().finished()) {
      const auto finished_it = finished_at_scan_.find(submap->id());
      if (finished_it == finished_at_scan_.end() ||
          k - finished_it->second < config_.LoopMinScanGap()) {
        continue;
      }
      const auto searched_it = loop_searched_at_scan_.find(submap->id());
      if (searched_it != loop_searched_at_scan_.end() &&
          k - searched_it->second < config_.LoopMinScanGap()) {
        continue;
      }
      Scored s;
      s.submap_id = submap->id();
      s.candidate.node_id = submap_node_of_.at(submap->id());
      s.candidate.node_pose = graph_.NodePose(s.candidate.node_id);
      s.candidate.distance_map = submap->distance_map();
      s.distance = (s.candidate.node_pose.translation -
                    scan_pose.translation).norm();
      if (s.distance > loop_config_.radius) continue;
      scored.push_back(std::move(s));
    }
    if (scored.empty()) return;
    std::sort(scored.begin(), scored.end(),
              [](const Scored& a, const Scored& b) {
                return a.distance < b.distance ||
                       (a.distance == b.distance &&
                        a.submap_id < b.submap_id);
              });
    if (static_cast<int>(scored.size()) > config_.loop_max_candidates) {
      scored.resize(config_.loop_max_candidates);
    }
    std::vector<LoopCandidate> candidates;
    for (Scored& s : scored) {
      loop_searched_at_scan_[s.submap_id] = k;
      candidates.push_back(std::move(s.candidate));
    }
    const std::vector<SpgConstraint> found = FindLoopClosures(
        candidates, scan.points, node_id, scan_pose, loop_config_);
    for (const SpgConstraint& c : found) {
      graph_.AddConstraint(c);
      ++stats_.loop_constraints;
    }
  }

  PipelineResult Finalize() {
    worker_->WaitUntilApplied(accumulated_count_);
    ProcessEvents(worker_->DrainEvents());
    if (optimization_) MergeNow();

    PipelineResult result;
    for (const SpgNode& node : graph_.nodes()) {
      if (node.kind == SpgNode::kScan) {
        result.trajectory.push_back({node.t, node.pose});
      }
    }
    if (result.trajectory.empty()) {
      // Degenerate pipeline (no scans): pure dead reckoning.
      result.trajectory = dead_reckoning_;
    }

    const SubmapManager& manager = worker_->manager();
    const auto dump = [&](const Submap& submap) {
      SubmapDump d;
      d.submap_id = submap.id();
      d.node_id = submap_node_of_.at(submap.id());
      d.resolution = submap.grid().resolution();
      for (const VoxelIndex& v : submap.grid().SortedOccupied()) {
        d.voxel_centers.push_back(submap.grid().CenterOf(v));
      }
      result.submaps.push_back(std::move(d));
    };
    for (const auto& submap : manager.finished()) dump(*submap);
    if (manager.initialized()) {
      dump(manager.matching());
      dump(manager.growing());
    }
    std::sort(result.submaps.begin(), result.submaps.end(),
              [](const SubmapDump& a, const SubmapDump& b) {
                return a.submap_id < b.submap_id;
              });

    result.graph = std::move(graph_);
    result.stats = stats_;
    worker_->Shutdown();
    return result;
  }

  SensorLog log_;
  PipelineConfig config_;
  bool single_thread_ = false;
  Eskf eskf_;
  std::unique_ptr<internal::MapWorker> worker_;
  PoseGraph graph_;
  LoopSearchConfig loop_config_;
  Matrix6d default_insertion_info_;

  std::vector<LineScan> scan_buffer_;
  std::vector<Pose> sensor_pose_buffer_;
  std::vector<TrajectoryPoint> dead_reckoning_;
  std::map<int, int> scan_node_of_;
  std::map<int, int> submap_node_of_;
  std::map<int, Matrix6d> scan_info_;
  std::map<int, int> finished_at_scan_;
  std::map<int, int> loop_searched_at_scan_;
  std::set<int> active_submaps_;
  std::optional<std::future<std::vector<Pose>>> optimization_;
  int accumulated_count_ = 0;
  int next_trigger_ = 0;
  int merge_at_scan_ = 0;
  PipelineStats stats_;
};

inline PipelineResult RunPipeline(const SensorLog& log,
                                  const PipelineConfig& config,
                                  bool single_thread = false) {
  Pipeline pipeline(log, config, single_thread);
  return pipeline.Run();
}

}  // namespace unislam

#endif  // UNISLAM_PIPELINE_HPP_

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

#ifndef UNISLAM_POSE_GRAPH_HPP_
#define UNISLAM_POSE_GRAPH_HPP_

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "unislam/distance_map.hpp"
#include "unislam/geometry.hpp"
#include "unislam/gpf.hpp"

namespace unislam {

struct DisconnectedGraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SpgNode {
  int id = -1;
  enum Kind { kScan, kSubmap } kind = kScan;
  Pose pose;
  bool fixed = false;
  double t = 0.0;
};

struct SpgConstraint {
  int from_node = -1;
  int to_node = -1;
  Pose relative;  // measured pose of `to` in the frame of `from`
  Matrix6d information = Matrix6d::Identity();
  enum Kind { kInsertion, kLoop } kind = kInsertion;
};

// Residual of one constraint: with D = measured^-1 * (X_from^-1 * X_to),
// the residual is (D.translation, QuatLog(D.rotation)). Zero exactly when
// the predicted relative pose equals the measurement.
inline Vector6d ConstraintResidual(const Pose& from, const Pose& to,
                                   const Pose& measured) {
  const Pose predicted = Compose(Inverse(from), to);
  const Pose d = Compose(Inverse(measured), predicted);
  Vector6d r;
  r.head<3>() = d.translation;
  r.tail<3>() = QuatLog(d.rotation);
  return r;
}

// Analytic Jacobians of the residual with respect to local perturbations
// (dt, dtheta) of the two node poses, where X <- (t + dt, q * Exp(dtheta)).
inline void ConstraintJacobians(const Pose& from, const Pose& to,
                                const Pose& measured,
                                Eigen::Ref<Matrix6d> j_from,
                                Eigen::Ref<Matrix6d> j_to) {
  const Eigen::Matrix3d rot_from_t =
      from.rotation.toRotationMatrix().transpose();
  const Eigen::Matrix3d rot_meas_t =
      measured.rotation.toRotationMatrix().transpose();
  const Eigen::Vector3d a = rot_from_t * (to.translation - from.translation);
  const Eigen::Vector3d r_theta =
      QuatLog(measured.rotation.conjugate() * from.rotation.conjugate() *
              to.rotation);
  const Eigen::Matrix3d jr_inv = RightJacobianInverseSo3(r_theta);
  const Eigen::Matrix3d jl_inv = jr_inv.transpose();

  j_to.setZero();
  j_to.block<3, 3>(0, 0) = rot_meas_t * rot_from_t;
  j_to.block<3, 3>(3, 3) = jr_inv;

  j_from.setZero();
  j_from.block<3, 3>(0, 0) = -rot_meas_t * rot_from_t;
  j_from.block<3, 3>(0, 3) = rot_meas_t * Skew(a);
  j_from.block<3, 3>(3, 3) = -jl_inv * rot_meas_t;
}

struct OptimizationReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Sparse pose graph over scan and submap nodes, optimized in batch by
// Levenberg-Marquardt on the tangent-space parameterization; the normal
// equations are solved by sparse Cholesky. The first node added is held
// fixed.
class PoseGraph {
 public:
  int AddNode(SpgNode::Kind kind, const Pose& pose, double t = 0.0,
              bool fixed = false) {
    if (fixed && has_fixed_node_) {
      throw std::invalid_argument("PoseGraph::AddNode: duplicate fixed node");
    }
    SpgNode node;
    node.id = static_cast<int>(nodes_.size());
    node.kind = kind;
    node.pose = pose;
    node.t = t;
    node.fixed = fixed || !has_fixed_node_;
    has_fixed_node_ = has_fixed_node_ || node.fixed;
    nodes_.push_back(node);
    return node.id;
  }

  void AddConstraint(int from_node, int to_node, const Pose& relative,
                     const Matrix6d& information,
                     SpgConstraint::Kind kind = SpgConstraint::kInsertion) {
    if (from_node < 0 || to_node < 0 ||
        from_node >= static_cast<int>(nodes_.size()) ||
        to_node >= static_cast<int>(nodes_.size())) {
      throw std::invalid_argument(
          "PoseGraph::AddConstraint: dangling endpoint");
    }
    SpgConstraint c;
    c.from_node = from_node;
    c.to_node = to_node;
    c.relative = relative;
    c.information = information;
    c.kind = kind;
    constraints_.push_back(c);
  }

  void AddConstraint(const SpgConstraint& c) {
    AddConstraint(c.from_node, c.to_node, c.relative, c.information, c.kind);
  }

  const std::vector<SpgNode>& nodes() const { return nodes_; }
  const std::vector<SpgConstraint>& constraints() const {
    return constraints_;
  }
  const Pose& NodePose(int id) const { return nodes_.at(id).pose; }
  void SetNodePose(int id, const Pose& pose) { nodes_.at(id).pose = pose; }

  double Cost() const {
    double cost = 0.0;
    for (const SpgConstraint& c : constraints_) {
      const Vector6d r = ConstraintResidual(
          nodes_[c.from_node].pose, nodes_[c.to_node].pose, c.relative);
      cost += r.dot(c.information * r);
    }
    return cost;
  }

  OptimizationReport Optimize(int max_iterations = 50,
                              double tolerance = 1e-12) {
    CheckConnectivity();
    const int n = static_cast<int>(nodes_.size());
    std::vector<int> block_of(n, -1);
    int blocks = 0;
    for (const SpgNode& node : nodes_) {
      if (!node.fixed) block_of[node.id] = blocks++;
    }

    OptimizationReport report;
    report.initial_cost = Cost();
    report.final_cost = report.initial_cost;
    if (blocks == 0 || constraints_.empty()) {
      report.converged = true;
      return report;
    }

    double lambda = 1e-4;
    for (int iteration = 0; iteration < max_iterations; ++iteration) {
      const double current_cost = Cost();
      if (current_cost < tolerance) {
        report.converged = true;
        break;
      }

      // Normal equations H dx = -b on the free blocks.
      std::vector<Eigen::Triplet<double>> triplets;
      Eigen::VectorXd b = Eigen::VectorXd::Zero(6 * blocks);
      Matrix6d j_from, j_to;
      for (const SpgConstraint& c : constraints_) {
        const SpgNode& from = nodes_[c.from_node];
        const SpgNode& to = nodes_[c.to_node];
        const Vector6d r =
            ConstraintResidual(from.pose, to.pose, c.relative);
        ConstraintJacobians(from.pose, to.pose, c.relative, j_from, j_to);
        const int bf = block_of[c.from_node];
        const int bt = block_of[c.to_node];
        const auto add_block = [&triplets](int row_block, int col_block,
                                           const Matrix6d& m) {
          for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) {
              triplets.emplace_back(6 * row_block + i, 6 * col_block + j,
                                    m(i, j));
            }
          }
        };
        if (bf >= 0) {
          add_block(bf, bf, j_from.transpose() * c.information * j_from);
          b.segment<6>(6 * bf) += j_from.transpose() * c.information * r;
        }
        if (bt >= 0) {
          add_block(bt, bt, j_to.transpose() * c.information * j_to);
          b.segment<6>(6 * bt) += j_to.transpose() * c.information * r;
        }
        if (bf >= 0 && bt >= 0) {
          const Matrix6d cross = j_from.transpose() * c.information * j_to;
          add_block(bf, bt, cross);
          add_block(bt, bf, cross.transpose());
        }
      }
      Eigen::SparseMatrix<double> h(6 * blocks, 6 * blocks);
      h.setFromTriplets(triplets.begin(), triplets.end());
      const Eigen::VectorXd diagonal = h.diagonal();

      bool stepped = false;
      while (lambda <= 1e8) {
        // lambda * I damping; equivariant under a rigid gauge shift of the
        // whole graph.
        Eigen::SparseMatrix<double> damped = h;
        for (int i = 0; i < 6 * blocks; ++i) {
          damped.coeffRef(i, i) = diagonal[i] + lambda;
        }
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
        if (solver.info() == Eigen::Success) {
          const Eigen::VectorXd dx = solver.solve(-b);
          std::vector<Pose> candidate(nodes_.size());
          for (const SpgNode& node : nodes_) {
            if (block_of[node.id] < 0) {
              candidate[node.id] = node.pose;
            } else {
              const Vector6d d = dx.segment<6>(6 * block_of[node.id]);
              candidate[node.id] =
                  Pose{node.pose.translation + d.head<3>(),
                       Canonicalized(node.pose.rotation *
                                     So3Exp(d.tail<3>()))};
            }
          }
          const double candidate_cost = CostWith(candidate);
          if (candidate_cost < current_cost) {
            for (SpgNode& node : nodes_) node.pose = candidate[node.id];
            lambda = std::max(lambda * 0.1, 1e-12);
            report.final_cost = candidate_cost;
            stepped = true;
            if (current_cost - candidate_cost < tolerance) {
              report.converged = true;
            }
            break;
          }
        }
        lambda *= 10.0;
      }
      ++report.iterations;
      if (!stepped) {
        report.converged = true;
        break;
      }
      if (report.converged) break;
    }
    report.final_cost = Cost();
    return report;
  }

  // Folds an optimizer result computed on a snapshot back into this graph.
  // Nodes that existed in the snapshot take their optimized poses; nodes
  // added afterwards are moved rigidly by the correction of the last
  // optimized node. Returns that correction so the caller can shift the live
  // filter state the same way.
  Pose ApplyOptimizedSnapshot(const std::vector<Pose>& optimized_poses) {
    if (optimized_poses.empty() ||
        optimized_poses.size() > nodes_.size()) {
      throw std::invalid_argument(
          "PoseGraph::ApplyOptimizedSnapshot: bad snapshot size");
    }
    const int horizon = static_cast<int>(optimized_poses.size()) - 1;
    const Pose correction =
        Compose(optimized_poses[horizon], Inverse(nodes_[horizon].pose));
    for (SpgNode& node : nodes_) {
      if (node.id <= horizon) {
        node.pose = optimized_poses[node.id];
      } else {
        node.pose = Compose(correction, node.pose);
      }
    }
    return correction;
  }

  std::vector<Pose> NodePoses() const {
    std::vector<Pose> poses;
    poses.reserve(nodes_.size());
    for (const SpgNode& node : nodes_) poses.push_back(node.pose);
    return poses;
  }

  // Copy of the first node_count nodes and every constraint among them; the
  // optimizer snapshots the graph up to the last constrained node so that a
  // freshly created submap node (whose first constraint is still in flight)
  // never appears as a disconnected component.
  PoseGraph PrefixSnapshot(int node_count) const {
    PoseGraph snapshot;
    snapshot.nodes_.assign(nodes_.begin(), nodes_.begin() + node_count);
    snapshot.has_fixed_node_ = !snapshot.nodes_.empty();
    for (const SpgConstraint& c : constraints_) {
      if (c.from_node < node_count && c.to_node < node_count) {
        snapshot.constraints_.push_back(c);
      }
    }
    return snapshot;
  }

  // Highest node id referenced by any constraint, or -1.
  int LastConstrainedNode() const {
    int last = -1;
    for (const SpgConstraint& c : constraints_) {
      last = std::max({last, c.from_node, c.to_node});
    }
    return last;
  }

 private:
  double CostWith(const std::vector<Pose>& poses) const {
    double cost = 0.0;
    for (const SpgConstraint& c : constraints_) {
      const Vector6d r = ConstraintResidual(poses[c.from_node],
                                            poses[c.to_node], c.relative);
      cost += r.dot(c.information * r);
    }
    return cost;
  }

  void CheckConnectivity() const {
    if (nodes_.empty()) return;
    int fixed_id = -1;
    for (const SpgNode& node : nodes_) {
      if (node.fixed) fixed_id = node.id;
    }
    std::vector<std::vector<int>> adjacency(nodes_.size());
    for (const SpgConstraint& c : constraints_) {
      adjacency[c.from_node].push_back(c.to_node);
      adjacency[c.to_node].push_back(c.from_node);
    }
    std::vector<bool> reached(nodes_.size(), false);
    std::deque<int> queue{fixed_id};
    reached[fixed_id] = true;
    while (!queue.empty()) {
      const int id = queue.front();
      queue.pop_front();
      for (const int next : adjacency[id]) {
        if (!reached[next]) {
          reached[next] = true;
          queue.push_back(next);
        }
      }
    }
    std::string unreachable;
    for (const SpgNode& node : nodes_) {
      if (!reached[node.id]) {
        unreachable += (unreachable.empty() ? "" : ", ") +
                       std::to_string(node.id);
      }
    }
    if (!unreachable.empty()) {
      throw DisconnectedGraphError(
          "PoseGraph::Optimize: nodes unreachable from the fixed node: " +
          unreachable);
    }
  }

  std::vector<SpgNode> nodes_;
  std::vector<SpgConstraint> constraints_;
  bool has_fixed_node_ = false;
};

struct LoopSearchConfig {
  double radius = 8.0;              // candidate anchors within this range, m
  double translation_window = 2.0;  // +/- m around the predicted offset
  double translation_step = 0.25;   // m; the distance map resolution
  double yaw_window = 10.0 * M_PI / 180.0;
  double yaw_step = 2.0 * M_PI / 180.0;
  double acceptance_mean_distance = 0.375;  // m; 1.5 x resolution
  int max_points = 150;
  Matrix6d information = Matrix6d::Identity();
};

struct LoopCandidate {
  int node_id = -1;   // submap node in the graph
  Pose node_pose;     // current graph pose of the submap
  std::shared_ptr<const DistanceMap> distance_map;
};

// Deterministic grid search for loop constraints: for every finished submap
// whose anchor lies within the radius, candidate relative poses around the
// predicted one are scored by the mean clamped distance of the transformed
// endpoints, and a constraint is emitted when the best mean clears the
// acceptance bar.
inline std::vector<SpgConstraint> FindLoopClosures(
    const std::vector<LoopCandidate>& candidates,
    const std::vector<Eigen::Vector3d>& scan_points, int scan_node_id,
    const Pose& scan_pose, const LoopSearchConfig& config) {
  std::vector<SpgConstraint> found;
  if (scan_points.empty()) return found;
  const std::vector<int> subsample = SubsampleIndices(
      static_cast<int>(scan_points.size()), config.max_points);

  const int t_steps = static_cast<int>(
      std::floor(config.translation_window / config.translation_step + 1e-9));
  const int yaw_steps =
      static_cast<int>(std::floor(config.yaw_window / config.yaw_step + 1e-9));

  for (const LoopCandidate& candidate : candidates) {
    if ((candidate.node_pose.translation - scan_pose.translation).norm() >
        config.radius) {
      continue;
    }
    const Pose predicted = Compose(Inverse(candidate.node_pose), scan_pose);
    double best_mean = std::numeric_limits<double>::infinity();
    Pose best_pose = predicted;
    for (int iy = -yaw_steps; iy <= yaw_steps; ++iy) {
      const Eigen::Quaterniond yawed =
          So3Exp(Eigen::Vector3d(0.0, 0.0, iy * config.yaw_step)) *
          predicted.rotation;
      const Eigen::Matrix3d rotation = yawed.toRotationMatrix();
      for (int ix = -t_steps; ix <= t_steps; ++ix) {
        for (int jy = -t_steps; jy <= t_steps; ++jy) {
          for (int kz = -t_steps; kz <= t_steps; ++kz) {
            const Eigen::Vector3d translation =
                predicted.translation +
                config.translation_step * Eigen::Vector3d(ix, jy, kz);
            double total = 0.0;
            for (const int j : subsample) {
              total += candidate.distance_map->Distance(
                  rotation * scan_points[j] + translation);
            }
            const double mean = total / subsample.size();
            if (mean < best_mean) {
              best_mean = mean;
              best_pose = Pose{translation, Canonicalized(yawed)};
            }
          }
        }
      }
    }
    if (best_mean < config.acceptance_mean_distance) {
      SpgConstraint c;
      c.from_node = candidate.node_id;
      c.to_node = scan_node_id;
      c.relative = best_pose;
      c.information = config.information;
      c.kind = SpgConstraint::kLoop;
      found.push_back(c);
    }
  }
  return found;
}

}  // namespace unislam

#endif  // UNISLAM_POSE_GRAPH_HPP_

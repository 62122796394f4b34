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

#ifndef UNISLAM_OUTPUTS_HPP_
#define UNISLAM_OUTPUTS_HPP_

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "unislam/pipeline.hpp"
#include "unislam/pose_graph.hpp"

namespace unislam {

// Map export: ASCII PLY of occupied voxel centers, re-anchored at export
// time with the submaps' current graph poses. Voxels are ordered by submap
// id, then lexicographically by index, so files are reproducible.
inline void WriteMapPly(const std::vector<SubmapDump>& submaps,
                        const PoseGraph& graph, std::ostream& out) {
  size_t vertex_count = 0;
  for (const SubmapDump& d : submaps) vertex_count += d.voxel_centers.size();
  out << "ply\nformat ascii 1.0\nelement vertex " << vertex_count
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "end_header\n";
  char buffer[128];
  for (const SubmapDump& d : submaps) {
    const Pose anchor = graph.NodePose(d.node_id);
    for (const Eigen::Vector3d& center : d.voxel_centers) {
      const Eigen::Vector3d world = TransformPoint(anchor, center);
      std::snprintf(buffer, sizeof(buffer), "%.6f %.6f %.6f\n", world.x(),
                    world.y(), world.z());
      out << buffer;
    }
  }
}

inline void WriteMapPlyFile(const std::vector<SubmapDump>& submaps,
                            const PoseGraph& graph, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open map file: " + path);
  WriteMapPly(submaps, graph, out);
}

// Text dump of the pose graph: nodes with their kinds and poses, edges with
// relative poses and the upper triangle of the information matrix.
inline void WriteGraphDump(const PoseGraph& graph, std::ostream& out) {
  char buffer[640];
  for (const SpgNode& node : graph.nodes()) {
    std::snprintf(buffer, sizeof(buffer),
                  "NODE %d %s %d %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                  node.id, node.kind == SpgNode::kScan ? "scan" : "submap",
                  node.fixed ? 1 : 0, node.t, node.pose.translation.x(),
                  node.pose.translation.y(), node.pose.translation.z(),
                  node.pose.rotation.x(), node.pose.rotation.y(),
                  node.pose.rotation.z(), node.pose.rotation.w());
    out << buffer;
  }
  for (const SpgConstraint& c : graph.constraints()) {
    int offset = std::snprintf(
        buffer, sizeof(buffer), "EDGE %s %d %d %.9g %.9g %.9g %.9g %.9g %.9g %.9g",
        c.kind == SpgConstraint::kInsertion ? "insertion" : "loop",
        c.from_node, c.to_node, c.relative.translation.x(),
        c.relative.translation.y(), c.relative.translation.z(),
        c.relative.rotation.x(), c.relative.rotation.y(),
        c.relative.rotation.z(), c.relative.rotation.w());
    for (int i = 0; i < 6; ++i) {
      for (int j = i; j < 6; ++j) {
        offset += std::snprintf(buffer + offset, sizeof(buffer) - offset,
                                " %.9g", c.information(i, j));
      }
    }
    std::snprintf(buffer + offset, sizeof(buffer) - offset, "\n");
    out << buffer;
  }
}

inline void WriteGraphDumpFile(const PoseGraph& graph,
                               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open graph file: " + path);
  WriteGraphDump(graph, out);
}

inline PoseGraph ReadGraphDump(std::istream& in) {
  PoseGraph graph;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tag;
    row >> tag;
    if (tag == "NODE") {
      int id = 0, fixed = 0;
      std::string kind;
      double t, tx, ty, tz, qx, qy, qz, qw;
      if (!(row >> id >> kind >> fixed >> t >> tx >> ty >> tz >> qx >> qy >>
            qz >> qw)) {
        throw std::runtime_error("bad NODE line: " + line);
      }
      Pose pose{Eigen::Vector3d(tx, ty, tz),
                Eigen::Quaterniond(qw, qx, qy, qz).normalized()};
      const int added = graph.AddNode(
          kind == "scan" ? SpgNode::kScan : SpgNode::kSubmap, pose, t);
      if (added != id) {
        throw std::runtime_error("graph dump: non-contiguous node ids");
      }
    } else if (tag == "EDGE") {
      std::string kind;
      int from = 0, to = 0;
      double tx, ty, tz, qx, qy, qz, qw;
      if (!(row >> kind >> from >> to >> tx >> ty >> tz >> qx >> qy >> qz >>
            qw)) {
        throw std::runtime_error("bad EDGE line: " + line);
      }
      Matrix6d info = Matrix6d::Zero();
      for (int i = 0; i < 6; ++i) {
        for (int j = i; j < 6; ++j) {
          double v;
          if (!(row >> v)) {
            throw std::runtime_error("bad EDGE information: " + line);
          }
          info(i, j) = v;
          info(j, i) = v;
        }
      }
      graph.AddConstraint(from, to,
                          Pose{Eigen::Vector3d(tx, ty, tz),
                               Eigen::Quaterniond(qw, qx, qy, qz).normalized()},
                          info,
                          kind == "loop" ? SpgConstraint::kLoop
                                         : SpgConstraint::kInsertion);
    } else {
      throw std::runtime_error("graph dump: unknown record " + tag);
    }
  }
  return graph;
}

inline PoseGraph ReadGraphDumpFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file: " + path);
  return ReadGraphDump(in);
}

// Per-submap voxel centers in the submap frame; together with the graph
// dump this is enough to re-export the map after pose corrections.
inline void WriteSubmapsDump(const std::vector<SubmapDump>& submaps,
                             std::ostream& out) {
  char buffer[128];
  for (const SubmapDump& d : submaps) {
    std::snprintf(buffer, sizeof(buffer), "SUBMAP %d %d %zu %.9g\n",
                  d.submap_id, d.node_id, d.voxel_centers.size(),
                  d.resolution);
    out << buffer;
    for (const Eigen::Vector3d& center : d.voxel_centers) {
      std::snprintf(buffer, sizeof(buffer), "V %.6f %.6f %.6f\n", center.x(),
                    center.y(), center.z());
      out << buffer;
    }
  }
}

inline void WriteSubmapsDumpFile(const std::vector<SubmapDump>& submaps,
                                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open submaps file: " + path);
  WriteSubmapsDump(submaps, out);
}

inline std::vector<SubmapDump> ReadSubmapsDump(std::istream& in) {
  std::vector<SubmapDump> submaps;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tag;
    row >> tag;
    if (tag == "SUBMAP") {
      SubmapDump d;
      size_t count = 0;
      if (!(row >> d.submap_id >> d.node_id >> count >> d.resolution)) {
        throw std::runtime_error("bad SUBMAP line: " + line);
      }
      d.voxel_centers.reserve(count);
      submaps.push_back(std::move(d));
    } else if (tag == "V") {
      if (submaps.empty()) {
        throw std::runtime_error("submaps dump: vertex before SUBMAP");
      }
      Eigen::Vector3d center;
      if (!(row >> center.x() >> center.y() >> center.z())) {
        throw std::runtime_error("bad V line: " + line);
      }
      submaps.back().voxel_centers.push_back(center);
    } else {
      throw std::runtime_error("submaps dump: unknown record " + tag);
    }
  }
  return submaps;
}

inline std::vector<SubmapDump> ReadSubmapsDumpFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open submaps file: " + path);
  return ReadSubmapsDump(in);
}

inline void WriteStats(const PipelineStats& stats, std::ostream& out) {
  out << "line_scans " << stats.line_scans << '\n'
      << "accumulated_scans " << stats.accumulated_scans << '\n'
      << "submaps_created " << stats.submaps_created << '\n'
      << "submaps_finished " << stats.submaps_finished << '\n'
      << "optimization_passes " << stats.optimization_passes << '\n'
      << "gpf_updates " << stats.gpf_updates << '\n'
      << "gpf_rejected " << stats.gpf_rejected << '\n'
      << "gpf_degenerate " << stats.gpf_degenerate << '\n'
      << "gpf_clamped_directions " << stats.gpf_clamped_directions << '\n'
      << "loop_constraints " << stats.loop_constraints << '\n';
}

}  // namespace unislam

#endif  // UNISLAM_OUTPUTS_HPP_

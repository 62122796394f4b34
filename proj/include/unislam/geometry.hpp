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

#ifndef UNISLAM_GEOMETRY_HPP_
#define UNISLAM_GEOMETRY_HPP_

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace unislam {

// Quaternions are Hamilton convention, body-to-world, stored (w, x, y, z).
// Rotation deviations are body-side: q_true = q_nominal * Exp(delta_theta).

// Below this rotation angle, Exp/Log switch to their series expansions.
constexpr double kSmallAngle = 1e-6;

inline Eigen::Matrix3d Skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

// Normalizes and resolves the double cover so that w >= 0.
inline Eigen::Quaterniond Canonicalized(const Eigen::Quaterniond& q) {
  const double norm = q.norm();
  if (!(norm > 1e-12)) {
    throw std::invalid_argument("Canonicalized: zero-norm quaternion");
  }
  Eigen::Quaterniond result(q.coeffs() / norm);
  if (result.w() < 0.0) {
    result.coeffs() = -result.coeffs();
  }
  return result;
}

// Maps a unit quaternion to its angle-axis vector (axis times angle, rad).
// The result has magnitude in [0, pi]; inputs are normalized first.
inline Eigen::Vector3d QuatLog(const Eigen::Quaterniond& q_in) {
  const Eigen::Quaterniond q = Canonicalized(q_in);
  const Eigen::Vector3d vec(q.x(), q.y(), q.z());
  const double vec_norm = vec.norm();
  const double angle = 2.0 * std::atan2(vec_norm, q.w());
  if (angle < kSmallAngle) {
    // log(q) ~= 2 v / w * (1 - |v|^2 / (3 w^2)) near identity.
    const double w2 = q.w() * q.w();
    return vec * (2.0 / q.w()) * (1.0 - vec_norm * vec_norm / (3.0 * w2));
  }
  return vec * (angle / vec_norm);
}

// Exponential map so(3) -> unit quaternion.
inline Eigen::Quaterniond So3Exp(const Eigen::Vector3d& phi) {
  const double angle = phi.norm();
  double scale;
  if (angle < kSmallAngle) {
    scale = 0.5 - angle * angle / 48.0;
  } else {
    scale = std::sin(0.5 * angle) / angle;
  }
  Eigen::Quaterniond q(std::cos(0.5 * angle), scale * phi.x(), scale * phi.y(),
                       scale * phi.z());
  q.normalize();
  return q;
}

// Orientation error log(q_estimated^-1 * q_groundtruth). Components are
// reported as roll/pitch/yaw error.
inline Eigen::Vector3d RotationError(const Eigen::Quaterniond& q_estimated,
                                     const Eigen::Quaterniond& q_groundtruth) {
  return QuatLog(Canonicalized(q_estimated).conjugate() *
                 Canonicalized(q_groundtruth));
}

struct Pose {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  static Pose Identity() { return Pose{}; }
};

inline Pose Compose(const Pose& a, const Pose& b) {
  return Pose{a.translation + a.rotation * b.translation,
              (a.rotation * b.rotation).normalized()};
}

inline Pose Inverse(const Pose& a) {
  const Eigen::Quaterniond inv = a.rotation.conjugate();
  return Pose{inv * -a.translation, inv};
}

inline Eigen::Vector3d TransformPoint(const Pose& a, const Eigen::Vector3d& p) {
  return a.translation + a.rotation * p;
}

// Inverse of the right Jacobian of SO(3) at phi; needed for pose-graph
// residual Jacobians.
inline Eigen::Matrix3d RightJacobianInverseSo3(const Eigen::Vector3d& phi) {
  const double angle = phi.norm();
  const Eigen::Matrix3d skew = Skew(phi);
  if (angle < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + 0.5 * skew + skew * skew / 12.0;
  }
  const double c =
      1.0 / (angle * angle) -
      (1.0 + std::cos(angle)) / (2.0 * angle * std::sin(angle));
  return Eigen::Matrix3d::Identity() + 0.5 * skew + c * skew * skew;
}

}  // namespace unislam

#endif  // UNISLAM_GEOMETRY_HPP_

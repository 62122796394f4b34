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

#ifndef UNISLAM_ESKF_HPP_
#define UNISLAM_ESKF_HPP_

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Geometry>

#include "unislam/geometry.hpp"
#include "unislam/imu_sim.hpp"

namespace unislam {

// Error state layout: (dp 0:2, dv 3:5, dtheta 6:8, dba 9:11, dbg 12:14).
// dtheta is a body-side rotation deviation: q_true = q_nominal * Exp(dtheta).
constexpr int kErrorStateDim = 15;
constexpr int kPosIdx = 0;
constexpr int kVelIdx = 3;
constexpr int kAttIdx = 6;
constexpr int kBaIdx = 9;
constexpr int kBgIdx = 12;

using Matrix15d = Eigen::Matrix<double, kErrorStateDim, kErrorStateDim>;
using Vector15d = Eigen::Matrix<double, kErrorStateDim, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

// chi-square 0.999 quantile with 6 degrees of freedom; innovation gate.
constexpr double kChi2Gate6Dof999 = 22.457744484825323;

struct EskfState {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  Matrix15d covariance = Matrix15d::Zero();

  Pose BodyPose() const { return Pose{position, orientation}; }
};

// Pose measurement expressed as a deviation from the nominal state at update
// time: (position deviation in the world frame, body-side rotation
// deviation as an angle-axis vector).
struct PseudoPoseMeasurement {
  Vector6d deviation = Vector6d::Zero();
  Matrix6d covariance = Matrix6d::Identity();
};

struct EskfConfig {
  ImuNoiseModel noise;          // densities used as process noise
  double max_step = 0.05;       // s; longer IMU gaps are split internally
  double gate = kChi2Gate6Dof999;
  double init_pos_std = 0.01;   // m
  double init_vel_std = 0.01;   // m/s
  double init_att_std = 0.01;   // rad
  double init_ba_std = 0.0;     // m/s^2
  double init_bg_std = 0.0;     // rad/s
};

struct UpdateResult {
  bool accepted = true;
  double mahalanobis_squared = 0.0;
};

struct StaleImuSampleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Folds an error-state vector into the nominal state and resets the error
// mean to zero. The covariance reset Jacobian is taken as identity
// (first-order; deviations are small after an update).
inline void InjectErrorAndReset(EskfState& state, const Vector15d& error) {
  state.position += error.segment<3>(kPosIdx);
  state.velocity += error.segment<3>(kVelIdx);
  state.orientation = Canonicalized(state.orientation *
                                    So3Exp(error.segment<3>(kAttIdx)));
  state.accel_bias += error.segment<3>(kBaIdx);
  state.gyro_bias += error.segment<3>(kBgIdx);
}

// Error-state Kalman filter: strapdown IMU integration for the nominal
// state, first-order discrete error propagation for the covariance, and a
// 6-dof pose update fed by the particle-filter pseudo measurement.
class Eskf {
 public:
  explicit Eskf(const EskfConfig& config = {}) : config_(config) {}

  void Initialize(const Pose& pose, double t) {
    state_ = EskfState{};
    state_.t = t;
    state_.position = pose.translation;
    state_.orientation = Canonicalized(pose.rotation);
    Vector15d diag;
    diag.segment<3>(kPosIdx).setConstant(config_.init_pos_std);
    diag.segment<3>(kVelIdx).setConstant(config_.init_vel_std);
    diag.segment<3>(kAttIdx).setConstant(config_.init_att_std);
    diag.segment<3>(kBaIdx).setConstant(config_.init_ba_std);
    diag.segment<3>(kBgIdx).setConstant(config_.init_bg_std);
    state_.covariance = diag.cwiseProduct(diag).asDiagonal();
    has_last_imu_ = false;
  }

  const EskfState& state() const { return state_; }
  EskfState& mutable_state() { return state_; }

  // Registers the IMU reading taken at the initialization timestamp so the
  // first propagation step can use the midpoint rule.
  void SeedImu(const ImuSample& imu) {
    last_imu_ = imu;
    has_last_imu_ = true;
  }

  // Left-multiplies a rigid correction onto the nominal pose (used when the
  // background optimizer adjusts the trajectory). Body-side quantities and
  // the body-side attitude deviation are unaffected; world-frame error
  // components rotate with the correction.
  void ApplyWorldCorrection(const Pose& correction) {
    state_.position = TransformPoint(correction, state_.position);
    state_.velocity = correction.rotation * state_.velocity;
    state_.orientation =
        Canonicalized(correction.rotation * state_.orientation);
    const Eigen::Matrix3d rot = correction.rotation.toRotationMatrix();
    Matrix15d transform = Matrix15d::Identity();
    transform.block<3, 3>(kPosIdx, kPosIdx) = rot;
    transform.block<3, 3>(kVelIdx, kVelIdx) = rot;
    state_.covariance =
        transform * state_.covariance * transform.transpose();
    Symmetrize();
  }

  // Advances the state to the sample's timestamp. Attitude uses the midpoint
  // gyro rate, velocity and position use trapezoidal integration of the
  // world-frame acceleration. Gaps longer than max_step are split with
  // linear interpolation between the previous and current readings.
  void Propagate(const ImuSample& imu) {
    const double dt_total = imu.t - state_.t;
    if (dt_total <= 0.0) {
      throw StaleImuSampleError("Eskf::Propagate: non-increasing timestamp");
    }
    const ImuSample previous = has_last_imu_ ? last_imu_ : imu;
    const int steps =
        std::max(1, static_cast<int>(std::ceil(dt_total / config_.max_step -
                                               1e-9)));
    const double h = dt_total / steps;
    for (int k = 0; k < steps; ++k) {
      const double f0 = static_cast<double>(k) / steps;
      const double f1 = static_cast<double>(k + 1) / steps;
      ImuSample a, b;
      a.angular_velocity = previous.angular_velocity +
                           f0 * (imu.angular_velocity -
                                 previous.angular_velocity);
      a.specific_force =
          previous.specific_force +
          f0 * (imu.specific_force - previous.specific_force);
      b.angular_velocity = previous.angular_velocity +
                           f1 * (imu.angular_velocity -
                                 previous.angular_velocity);
      b.specific_force =
          previous.specific_force +
          f1 * (imu.specific_force - previous.specific_force);
      Step(a, b, h);
    }
    state_.t = imu.t;
    last_imu_ = imu;
    has_last_imu_ = true;
  }

  // Kalman update with the pseudo pose measurement. The observation picks
  // (dp, dtheta) out of the error state; the innovation is the measured
  // deviation itself since the error mean is zero between updates.
  // Joseph-form covariance update, then error injection and reset.
  UpdateResult Update(const PseudoPoseMeasurement& measurement) {
    const Vector6d innovation = measurement.deviation;
    Eigen::Matrix<double, 6, kErrorStateDim> obs =
        Eigen::Matrix<double, 6, kErrorStateDim>::Zero();
    obs.block<3, 3>(0, kPosIdx).setIdentity();
    obs.block<3, 3>(3, kAttIdx).setIdentity();

    const Matrix6d innovation_cov =
        obs * state_.covariance * obs.transpose() + measurement.covariance;
    const Eigen::LDLT<Matrix6d> ldlt(innovation_cov);
    const double mahalanobis =
        innovation.dot(ldlt.solve(innovation));
    UpdateResult result;
    result.mahalanobis_squared = mahalanobis;
    if (mahalanobis > config_.gate) {
      result.accepted = false;
      return result;
    }

    const Eigen::Matrix<double, kErrorStateDim, 6> gain =
        ldlt.solve(obs * state_.covariance).transpose();
    const Vector15d error = gain * innovation;
    const Matrix15d identity_minus_kh =
        Matrix15d::Identity() - gain * obs;
    state_.covariance =
        identity_minus_kh * state_.covariance *
            identity_minus_kh.transpose() +
        gain * measurement.covariance * gain.transpose();
    Symmetrize();
    InjectErrorAndReset(state_, error);
    return result;
  }

  // Pose block (dp, dtheta) of the covariance; the particle filter samples
  // its hypotheses from this.
  Matrix6d PoseCovariance() const {
    Matrix6d cov;
    cov.block<3, 3>(0, 0) = state_.covariance.block<3, 3>(kPosIdx, kPosIdx);
    cov.block<3, 3>(0, 3) = state_.covariance.block<3, 3>(kPosIdx, kAttIdx);
    cov.block<3, 3>(3, 0) = state_.covariance.block<3, 3>(kAttIdx, kPosIdx);
    cov.block<3, 3>(3, 3) = state_.covariance.block<3, 3>(kAttIdx, kAttIdx);
    return cov;
  }

 private:
  void Step(const ImuSample& a, const ImuSample& b, double h) {
    const Eigen::Vector3d omega_mid =
        0.5 * (a.angular_velocity + b.angular_velocity) - state_.gyro_bias;
    const Eigen::Quaterniond q0 = state_.orientation;
    const Eigen::Quaterniond q1 =
        Canonicalized(q0 * So3Exp(omega_mid * h));

    const Eigen::Vector3d accel_world_0 =
        q0 * (a.specific_force - state_.accel_bias) + Gravity();
    const Eigen::Vector3d accel_world_1 =
        q1 * (b.specific_force - state_.accel_bias) + Gravity();
    const Eigen::Vector3d accel_mid = 0.5 * (accel_world_0 + accel_world_1);

    state_.position += state_.velocity * h + 0.5 * accel_mid * h * h;
    state_.velocity += accel_mid * h;
    state_.orientation = q1;

    // First-order discrete error transition.
    const Eigen::Matrix3d rot = q0.toRotationMatrix();
    const Eigen::Vector3d force_mid =
        0.5 * (a.specific_force + b.specific_force) - state_.accel_bias;
    Matrix15d f = Matrix15d::Identity();
    f.block<3, 3>(kPosIdx, kVelIdx) = h * Eigen::Matrix3d::Identity();
    f.block<3, 3>(kVelIdx, kAttIdx) = -rot * Skew(force_mid) * h;
    f.block<3, 3>(kVelIdx, kBaIdx) = -rot * h;
    f.block<3, 3>(kAttIdx, kAttIdx) =
        So3Exp(-omega_mid * h).toRotationMatrix();
    f.block<3, 3>(kAttIdx, kBgIdx) = -h * Eigen::Matrix3d::Identity();

    Matrix15d process = Matrix15d::Zero();
    const double va = config_.noise.sigma_a * config_.noise.sigma_a * h;
    const double vg = config_.noise.sigma_g * config_.noise.sigma_g * h;
    const double vba = config_.noise.sigma_ba * config_.noise.sigma_ba * h;
    const double vbg = config_.noise.sigma_bg * config_.noise.sigma_bg * h;
    process.block<3, 3>(kVelIdx, kVelIdx) =
        va * Eigen::Matrix3d::Identity();
    process.block<3, 3>(kAttIdx, kAttIdx) =
        vg * Eigen::Matrix3d::Identity();
    process.block<3, 3>(kBaIdx, kBaIdx) = vba * Eigen::Matrix3d::Identity();
    process.block<3, 3>(kBgIdx, kBgIdx) = vbg * Eigen::Matrix3d::Identity();

    state_.covariance =
        f * state_.covariance * f.transpose() + process;
    Symmetrize();
  }

  void Symmetrize() {
    state_.covariance =
        0.5 * (state_.covariance + state_.covariance.transpose());
  }

  EskfConfig config_;
  EskfState state_;
  ImuSample last_imu_;
  bool has_last_imu_ = false;
};

}  // namespace unislam

#endif  // UNISLAM_ESKF_HPP_

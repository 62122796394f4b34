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

#ifndef UNISLAM_GPF_HPP_
#define UNISLAM_GPF_HPP_

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "unislam/distance_map.hpp"
#include "unislam/eskf.hpp"
#include "unislam/geometry.hpp"
#include "unislam/random.hpp"

namespace unislam {

struct NonPsdCovarianceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegeneratePosteriorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Likelihood-field scan weighting parameters. The distance clamp is the
// distance map's own max range; saturation, when set, additionally caps the
// per-point distance so endpoints in unmapped space cost a bounded constant
// instead of annihilating the particle.
struct LikelihoodConfig {
  double sigma_hit = 0.5;    // m; likelihood-field standard deviation
  int max_points = 300;      // endpoint subsampling budget per scan
  double saturation = 0.0;   // m; 0 means the map's max range (no cap)
};

// Pose hypotheses around the filter prediction. Deviations are
// (dp world, dtheta body-side), the same coordinates the filter's pose
// covariance lives in; poses are the corresponding absolute hypotheses.
struct ParticleSet {
  std::vector<Vector6d> deviations;
  std::vector<Pose> poses;
  Eigen::VectorXd weights;
  Eigen::VectorXd log_weights;  // unnormalized, filled by WeightParticles
  bool underflow_fallback = false;

  int size() const { return static_cast<int>(poses.size()); }
};

// Draws count pose hypotheses from N(prior_mean, prior_cov), Cholesky
// preferred with an eigenvalue fallback near the PSD boundary. Weights start
// uniform. Deterministic for a given seed.
inline ParticleSet SampleParticles(const Pose& prior_mean,
                                   const Matrix6d& prior_cov, int count,
                                   uint64_t seed) {
  if (count < 2) {
    throw std::invalid_argument("SampleParticles: need at least 2 particles");
  }
  Matrix6d factor;
  const Eigen::LLT<Matrix6d> llt(prior_cov);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(prior_cov);
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-9 * scale) {
      throw NonPsdCovarianceError(
          "SampleParticles: prior covariance is not positive semdefinite");
    }
    factor = eig.eigenvectors() *
             eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  Rng rng(seed);
  ParticleSet set;
  set.deviations.reserve(count);
  set.poses.reserve(count);
  for (int i = 0; i < count; ++i) {
    Vector6d normal;
    for (int k = 0; k < 6; ++k) normal[k] = rng.NextNormal();
    const Vector6d deviation = factor * normal;
    set.deviations.push_back(deviation);
    set.poses.push_back(
        Pose{prior_mean.translation + deviation.head<3>(),
             Canonicalized(prior_mean.rotation * So3Exp(deviation.tail<3>()))});
  }
  set.weights = Eigen::VectorXd::Constant(count, 1.0 / count);
  return set;
}

// Deterministic endpoint subsample: a fixed stride over the scan.
inline std::vector<int> SubsampleIndices(int point_count, int max_points) {
  std::vector<int> indices;
  const int stride = std::max(1, (point_count + max_points - 1) / max_points);
  for (int i = 0; i < point_count && static_cast<int>(indices.size()) <
                                         max_points;
       i += stride) {
    indices.push_back(i);
  }
  return indices;
}

// Reweights the hypotheses against the distance map: per particle, the log
// weight is the sum over subsampled endpoints of -d(T x)^2 / (2 sigma^2),
// where d is the clamped distance lookup and T maps the endpoint through the
// particle pose into the map frame. Weights are normalized after a max-log
// shift.
inline ParticleSet WeightParticles(const ParticleSet& particles,
                                   const std::vector<Eigen::Vector3d>& points,
                                   const DistanceMap& dmap,
                                   const Pose& world_to_map,
                                   const LikelihoodConfig& config) {
  if (points.empty()) {
    throw std::invalid_argument("WeightParticles: empty scan");
  }
  if (!(config.sigma_hit > 0.0) || config.max_points < 1) {
    throw std::invalid_argument("WeightParticles: bad likelihood config");
  }
  const std::vector<int> subsample =
      SubsampleIndices(static_cast<int>(points.size()), config.max_points);

  const int count = particles.size();
  Eigen::VectorXd log_weights(count);
  const double inv_two_sigma_sq =
      1.0 / (2.0 * config.sigma_hit * config.sigma_hit);
  const double saturation = config.saturation > 0.0
                                ? config.saturation
                                : dmap.max_distance();
  for (int i = 0; i < count; ++i) {
    const Pose to_map = Compose(world_to_map, particles.poses[i]);
    const Eigen::Matrix3d rotation = to_map.rotation.toRotationMatrix();
    double log_weight = 0.0;
    for (const int j : subsample) {
      const Eigen::Vector3d p = rotation * points[j] + to_map.translation;
      const double d = std::min(dmap.Distance(p), saturation);
      log_weight -= d * d * inv_two_sigma_sq;
    }
    log_weights[i] = log_weight;
  }

  ParticleSet result = particles;
  result.log_weights = log_weights;
  const double max_log = log_weights.maxCoeff();
  Eigen::VectorXd weights = (log_weights.array() - max_log).exp();
  const double sum = weights.sum();
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    result.weights = Eigen::VectorXd::Constant(count, 1.0 / count);
    result.underflow_fallback = true;
    return result;
  }
  result.weights = weights / sum;
  result.underflow_fallback = false;
  return result;
}

// Flattens the weights to w_i ~ exp(alpha * log w_i) with the largest alpha
// in (0, 1] whose effective sample size reaches the target. Tempering the
// likelihood this way is equivalent to inflating the measurement noise by
// 1/alpha, which the recovered pseudo-measurement covariance then reflects;
// it keeps the moment estimates usable when a sharply peaked likelihood
// starves the particle set. Returns the chosen alpha.
inline double AnnealToTargetEss(ParticleSet& particles, double target_ess) {
  const int count = particles.size();
  if (count < 2 || particles.log_weights.size() != count) return 1.0;
  target_ess = std::min(target_ess, 0.9 * count);

  const auto ess_at = [&](double alpha) {
    Eigen::VectorXd scaled = alpha * particles.log_weights;
    Eigen::VectorXd w = (scaled.array() - scaled.maxCoeff()).exp();
    w /= w.sum();
    return 1.0 / w.squaredNorm();
  };

  if (ess_at(1.0) >= target_ess) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int iter = 0; iter < 50; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (ess_at(mid) >= target_ess) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  Eigen::VectorXd scaled = lo * particles.log_weights;
  Eigen::VectorXd w = (scaled.array() - scaled.maxCoeff()).exp();
  particles.weights = w / w.sum();
  return lo;
}

inline double EffectiveSampleSize(const ParticleSet& particles) {
  return 1.0 / particles.weights.squaredNorm();
}

// Weighted mean and covariance of the particle deviations. Rotation
// deviations already live in the tangent space at the prior mean, so plain
// weighted averaging is tangent-space averaging.
inline std::pair<Vector6d, Matrix6d> ComputeMoments(
    const ParticleSet& particles) {
  Vector6d mean = Vector6d::Zero();
  for (int i = 0; i < particles.size(); ++i) {
    mean += particles.weights[i] * particles.deviations[i];
  }
  Matrix6d cov = Matrix6d::Zero();
  for (int i = 0; i < particles.size(); ++i) {
    const Vector6d centered = particles.deviations[i] - mean;
    cov += particles.weights[i] * (centered * centered.transpose());
  }
  cov = 0.5 * (cov + cov.transpose());
  return {mean, cov};
}

// ComputeMoments guarded by the effective-sample-size check; a degenerate
// posterior tells the caller to skip the filter update for this scan.
inline std::pair<Vector6d, Matrix6d> PosteriorMoments(
    const ParticleSet& particles) {
  if (!(EffectiveSampleSize(particles) >= 2.0)) {
    throw DegeneratePosteriorError(
        "PosteriorMoments: effective sample size below 2");
  }
  return ComputeMoments(particles);
}

struct RecoveredMeasurement {
  PseudoPoseMeasurement measurement;
  int clamped_directions = 0;  // directions that carried no information
};

struct IteratedPosterior {
  Vector6d mean = Vector6d::Zero();
  Matrix6d covariance = Matrix6d::Identity();
  double final_alpha = 0.0;        // likelihood temper reached in the last round
  double effective_sample_size = 0.0;
};

// Posterior moments by iterated importance sampling: each round samples
// hypotheses from the current Gaussian proposal, weights them by the
// tempered likelihood times the prior-over-proposal correction, and refits
// the Gaussian. The temper is raised as far as the target effective sample
// size allows, so a sharply peaked likelihood is approached over a few
// rounds instead of starving a single particle set, while directions the
// scan does not constrain keep their prior spread. Round one with a unit
// temper is exactly the classic sample-weight-average scheme.
//
// The likelihood functor receives the particle set and must fill
// log_weights (WeightParticles does this).
template <typename LikelihoodFn>
IteratedPosterior IteratePosteriorEstimate(const Pose& prior_mean_pose,
                                           const Matrix6d& prior_cov,
                                           int particle_count, int rounds,
                                           double target_ess, uint64_t seed,
                                           LikelihoodFn&& likelihood) {
  const Matrix6d prior_reg =
      prior_cov + 1e-12 * Matrix6d::Identity();
  const Eigen::LLT<Matrix6d> prior_llt(prior_reg);

  const auto log_density = [](const Eigen::LLT<Matrix6d>& llt,
                              const Vector6d& x, const Vector6d& mean) {
    // Up to the shared constant; only differences matter.
    const Vector6d centered = x - mean;
    const Vector6d solved = llt.solve(centered);
    double log_det = 0.0;
    for (int i = 0; i < 6; ++i) {
      log_det += std::log(llt.matrixLLT()(i, i));
    }
    return -0.5 * centered.dot(solved) - log_det;
  };

  IteratedPosterior estimate;
  Vector6d q_mean = Vector6d::Zero();
  Matrix6d q_cov = prior_reg;
  for (int round = 0; round < rounds; ++round) {
    const Matrix6d q_reg = q_cov + 1e-12 * Matrix6d::Identity();
    ParticleSet set =
        SampleParticles(prior_mean_pose, q_reg, particle_count,
                        DeriveSeed(seed, "gpf_round", round));
    // SampleParticles draws around zero deviation; recenter on the proposal
    // mean.
    const Eigen::LLT<Matrix6d> q_llt(q_reg);
    for (int i = 0; i < particle_count; ++i) {
      set.deviations[i] += q_mean;
      set.poses[i] =
          Pose{prior_mean_pose.translation + set.deviations[i].head<3>(),
               Canonicalized(prior_mean_pose.rotation *
                             So3Exp(set.deviations[i].tail<3>()))};
    }
    likelihood(set);  // fills set.log_weights

    Eigen::VectorXd correction(particle_count);
    for (int i = 0; i < particle_count; ++i) {
      correction[i] =
          log_density(prior_llt, set.deviations[i], Vector6d::Zero()) -
          log_density(q_llt, set.deviations[i], q_mean);
    }

    const auto ess_at = [&](double alpha) {
      Eigen::VectorXd logw = alpha * set.log_weights + correction;
      Eigen::VectorXd w = (logw.array() - logw.maxCoeff()).exp();
      w /= w.sum();
      return 1.0 / w.squaredNorm();
    };
    double alpha = 1.0;
    if (ess_at(1.0) < target_ess) {
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ess_at(mid) >= target_ess ? lo : hi) = mid;
      }
      alpha = lo;
    }
    Eigen::VectorXd logw = alpha * set.log_weights + correction;
    Eigen::VectorXd w = (logw.array() - logw.maxCoeff()).exp();
    set.weights = w / w.sum();

    auto [mean, cov] = ComputeMoments(set);
    estimate.mean = mean;
    estimate.covariance = cov;
    estimate.final_alpha = alpha;
    estimate.effective_sample_size = 1.0 / set.weights.squaredNorm();
    q_mean = mean;
    q_cov = cov;
  }
  return estimate;
}

// Recovers the pseudo pose measurement (z, R) such that a standard Kalman
// update of the prior (x_bar, prior_cov) with identity observation
// reproduces the posterior (x_hat, posterior_cov):
//   R = (post_info - prior_info)^-1
//   z = x_bar + (I + R prior_cov^-1) (x_hat - x_bar)
// The two z expressions (information form and the innovation form used
// here) coincide whenever R is the exact information gap; the innovation
// form additionally degrades gracefully when the gap is clamped.
//
// Directions where the posterior gained no information (gap eigenvalue
// below epsilon) are clamped to epsilon, yielding a near-infinite variance
// there, and their mean contribution is projected out; the
// under-constrained axis of a tunnel shows up exactly this way.
// relative_epsilon additionally clamps directions whose information gain is
// a small fraction of the prior information there: a finite particle set
// cannot certify such gains (the moment noise scales with the prior), and
// passing them through would amplify sampling noise by the near-singular
// inverse gap.
inline RecoveredMeasurement RecoverPseudoMeasurement(
    const Vector6d& prior_mean, const Matrix6d& prior_cov,
    const Vector6d& posterior_mean, const Matrix6d& posterior_cov,
    double epsilon = 1e-6, double relative_epsilon = 0.0) {
  const Matrix6d prior_info = prior_cov.ldlt().solve(Matrix6d::Identity());
  const Matrix6d posterior_info =
      posterior_cov.ldlt().solve(Matrix6d::Identity());
  Matrix6d gap = posterior_info - prior_info;
  gap = 0.5 * (gap + gap.transpose());

  const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(gap);
  RecoveredMeasurement result;
  Eigen::Matrix<double, 6, 1> clamped = eig.eigenvalues();
  Eigen::Matrix<double, 6, 1> keep = Eigen::Matrix<double, 6, 1>::Ones();
  for (int i = 0; i < 6; ++i) {
    const Eigen::Matrix<double, 6, 1> direction = eig.eigenvectors().col(i);
    const double floor = std::max(
        epsilon, relative_epsilon * direction.dot(prior_info * direction));
    if (clamped[i] < floor) {
      clamped[i] = floor;
      keep[i] = 0.0;
      ++result.clamped_directions;
    }
  }
  const Matrix6d r = eig.eigenvectors() *
                     clamped.cwiseInverse().asDiagonal() *
                     eig.eigenvectors().transpose();
  // Innovation built from the informative subspace only: the kept-direction
  // projection of the mean shift, pushed through the inverse gap with the
  // clamped directions zeroed. For a strictly shrinking pair this equals
  // the information-form z exactly; when directions are clamped it stays
  // bounded instead of amplifying the near-infinite variance.
  const Matrix6d keep_projection = eig.eigenvectors() * keep.asDiagonal() *
                                   eig.eigenvectors().transpose();
  const Matrix6d r_kept = eig.eigenvectors() *
                          (keep.array() / clamped.array())
                              .matrix()
                              .asDiagonal() *
                          eig.eigenvectors().transpose();
  const Vector6d shift_kept =
      keep_projection * (posterior_mean - prior_mean);
  result.measurement.covariance = 0.5 * (r + r.transpose());
  result.measurement.deviation =
      prior_mean + shift_kept + r_kept * (prior_info * shift_kept);
  return result;
}

}  // namespace unislam

#endif  // UNISLAM_GPF_HPP_

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

#include "unislam/gpf.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_utils.hpp"
#include "unislam/distance_map.hpp"

namespace unislam {
namespace {

using testing::RandomPsdMatrix6;

// Kalman update of (mean, cov) with measurement (z, R) under identity
// observation; the round-trip oracle for the recovered pseudo measurement.
std::pair<Vector6d, Matrix6d> KalmanUpdateIdentity(
    const Vector6d& mean, const Matrix6d& cov, const Vector6d& z,
    const Matrix6d& r) {
  const Matrix6d gain = cov * (cov + r).inverse();
  const Vector6d posterior_mean = mean + gain * (z - mean);
  const Matrix6d joseph = Matrix6d::Identity() - gain;
  const Matrix6d posterior_cov =
      joseph * cov * joseph.transpose() + gain * r * gain.transpose();
  return {posterior_mean, posterior_cov};
}

TEST(SampleParticles, ZeroCovarianceCollapsesToPriorMean) {
  Rng rng(41);
  const Pose prior = testing::RandomPose(rng);
  const ParticleSet set =
      SampleParticles(prior, Matrix6d::Zero(), 50, 1234);
  for (int i = 0; i < set.size(); ++i) {
    EXPECT_EQ(set.deviations[i], Vector6d::Zero());
    EXPECT_EQ(set.poses[i].translation, prior.translation);
    EXPECT_NEAR(set.weights[i], 1.0 / 50.0, 1e-15);
  }
}

TEST(SampleParticles, SampleMeanConvergesToPrior) {
  Rng rng(42);
  const Pose prior = testing::RandomPose(rng, 1.0);
  Matrix6d cov = Matrix6d::Zero();
  cov.diagonal() << 0.04, 0.09, 0.01, 0.004, 0.002, 0.003;
  const int count = 10000;
  const ParticleSet set = SampleParticles(prior, cov, count, 99);
  Vector6d mean = Vector6d::Zero();
  for (const Vector6d& d : set.deviations) mean += d;
  mean /= count;
  for (int axis = 0; axis < 6; ++axis) {
    const double sigma = std::sqrt(cov(axis, axis));
    EXPECT_LT(std::abs(mean[axis]), 3.0 * sigma / std::sqrt(count))
        << "axis " << axis;
  }
}

TEST(SampleParticles, DeterministicForFixedSeed) {
  Rng rng(43);
  const Pose prior = testing::RandomPose(rng);
  const Matrix6d cov = RandomPsdMatrix6(rng, 0.01);
  const ParticleSet a = SampleParticles(prior, cov, 100, 7);
  const ParticleSet b = SampleParticles(prior, cov, 100, 7);
  for (int i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.deviations[i], b.deviations[i]);
    EXPECT_EQ(a.poses[i].translation, b.poses[i].translation);
    EXPECT_EQ(a.poses[i].rotation.coeffs(), b.poses[i].rotation.coeffs());
  }
}

TEST(SampleParticles, RejectsIndefiniteCovariance) {
  Matrix6d bad = Matrix6d::Identity();
  bad(2, 2) = -0.5;
  EXPECT_THROW(SampleParticles(Pose::Identity(), bad, 10, 1),
               NonPsdCovarianceError);
}

// A tiny map with a single occupied voxel at a known center.
std::shared_ptr<const DistanceMap> OneVoxelMap() {
  auto map = std::make_shared<const DistanceMap>(
      1.0, Eigen::Vector3d(-4.0, -4.0, -4.0), Eigen::Vector3i(8, 8, 8), 3.0);
  return UpdateDistanceMap(map, {VoxelIndex{4, 4, 4}});  // center (0.5,...)
}

TEST(WeightParticles, EqualLikelihoodGivesUniformWeights) {
  const auto map = OneVoxelMap();
  // Both particles put the endpoint exactly on the occupied voxel center.
  const Eigen::Vector3d center(0.5, 0.5, 0.5);
  ParticleSet set;
  set.deviations.assign(2, Vector6d::Zero());
  Pose a;  // endpoint measured in the particle frame
  a.translation = Eigen::Vector3d(0.0, 0.0, 0.0);
  Pose b;
  b.translation = Eigen::Vector3d(0.2, -0.1, 0.0);
  set.poses = {a, b};
  set.weights = Eigen::VectorXd::Constant(2, 0.5);

  const std::vector<Eigen::Vector3d> points_a = {center - a.translation};
  // Use per-particle-consistent endpoints: give each particle the same
  // zero-distance observation by weighting two single-point scans.
  const ParticleSet wa = WeightParticles(set, {center - a.translation},
                                         *map, Pose::Identity(),
                                         LikelihoodConfig{0.5, 10});
  // Particle b sees the point at center - a.translation + b.translation,
  // still inside the same voxel (distance zero), so weights stay equal.
  EXPECT_NEAR(wa.weights[0], 0.5, 1e-12);
  EXPECT_NEAR(wa.weights[1], 0.5, 1e-12);
}

TEST(WeightParticles, AlignedParticleOutweighsOffsetParticle) {
  const auto map = OneVoxelMap();
  ParticleSet set;
  set.deviations.assign(2, Vector6d::Zero());
  Pose aligned;  // identity: endpoint lands on the occupied voxel
  Pose offset;
  offset.translation = Eigen::Vector3d(0.0, 1.0, 0.0);  // 1 m into free space
  set.poses = {aligned, offset};
  set.weights = Eigen::VectorXd::Constant(2, 0.5);

  const std::vector<Eigen::Vector3d> points = {{0.5, 0.5, 0.5}};
  const ParticleSet weighted = WeightParticles(
      set, points, *map, Pose::Identity(), LikelihoodConfig{0.5, 10});
  EXPECT_GT(weighted.weights[0], weighted.weights[1]);
  // Hand evaluation: d = 0 for the aligned particle, d = 1 for the offset
  // one, so the log-weight gap is 1 / (2 * 0.25) = 2.
  EXPECT_NEAR(weighted.weights[1] / weighted.weights[0], std::exp(-2.0),
              1e-12);
}

TEST(WeightParticles, MatchesBruteForceReimplementation) {
  Rng rng(44);
  auto map = std::make_shared<const DistanceMap>(
      0.5, Eigen::Vector3d(-4.0, -4.0, -4.0), Eigen::Vector3i(16, 16, 16),
      3.0);
  std::vector<VoxelIndex> occupied;
  for (int i = 0; i < 30; ++i) {
    occupied.push_back(VoxelIndex{
        static_cast<int32_t>(rng.NextU64() % 16),
        static_cast<int32_t>(rng.NextU64() % 16),
        static_cast<int32_t>(rng.NextU64() % 16)});
  }
  map = std::dynamic_pointer_cast<const DistanceMap>(
      UpdateDistanceMap(map, occupied));

  Pose prior;
  prior.translation = Eigen::Vector3d(0.3, -0.2, 0.1);
  Matrix6d cov = 0.01 * Matrix6d::Identity();
  ParticleSet set = SampleParticles(prior, cov, 20, 5);
  std::vector<Eigen::Vector3d> points;
  for (int i = 0; i < 25; ++i) points.push_back(rng.NextNormal3());

  LikelihoodConfig config{0.4, 15};
  const ParticleSet weighted =
      WeightParticles(set, points, *map, Pose::Identity(), config);

  // Brute force: recompute the stated formula directly.
  const std::vector<int> subsample =
      SubsampleIndices(static_cast<int>(points.size()), config.max_points);
  Eigen::VectorXd log_w(set.size());
  for (int i = 0; i < set.size(); ++i) {
    double acc = 0.0;
    for (const int j : subsample) {
      const Eigen::Vector3d p = TransformPoint(set.poses[i], points[j]);
      const double d = map->Distance(p);
      acc += -d * d / (2.0 * config.sigma_hit * config.sigma_hit);
    }
    log_w[i] = acc;
  }
  Eigen::VectorXd expected = (log_w.array() - log_w.maxCoeff()).exp();
  expected /= expected.sum();
  for (int i = 0; i < set.size(); ++i) {
    EXPECT_NEAR(weighted.weights[i], expected[i], 1e-12);
  }
}

TEST(WeightParticles, DeterministicAcrossRepeatedCalls) {
  const auto map = OneVoxelMap();
  Rng rng(45);
  ParticleSet set = SampleParticles(testing::RandomPose(rng, 0.5),
                                    0.04 * Matrix6d::Identity(), 50, 11);
  std::vector<Eigen::Vector3d> points;
  for (int i = 0; i < 40; ++i) points.push_back(rng.NextNormal3());
  const LikelihoodConfig config{0.5, 16};
  const ParticleSet a =
      WeightParticles(set, points, *map, Pose::Identity(), config);
  const ParticleSet b =
      WeightParticles(set, points, *map, Pose::Identity(), config);
  for (int i = 0; i < a.size(); ++i) EXPECT_EQ(a.weights[i], b.weights[i]);
}

TEST(WeightParticles, TruePoseParticleWinsOnNoiselessScan) {
  // Map voxels along two walls; scan endpoints generated from the true
  // pose land exactly on occupied voxel centers.
  auto map = std::make_shared<const DistanceMap>(
      0.25, Eigen::Vector3d(-8.0, -8.0, -8.0), Eigen::Vector3i(64, 64, 64),
      4.0);
  std::vector<VoxelIndex> wall;
  for (int i = 8; i < 56; ++i) {
    wall.push_back(VoxelIndex{i, 8, 32});
    wall.push_back(VoxelIndex{8, i, 32});
  }
  map = std::dynamic_pointer_cast<const DistanceMap>(
      UpdateDistanceMap(map, wall));

  Pose truth;
  truth.translation = Eigen::Vector3d(0.4, 0.6, 0.0);
  // Endpoints in the truth frame hitting occupied voxel centers.
  std::vector<Eigen::Vector3d> points;
  const Pose world_to_truth = Inverse(truth);
  for (int i = 10; i < 50; i += 2) {
    const Eigen::Vector3d center_a(-8.0 + 0.25 * (i + 0.5),
                                   -8.0 + 0.25 * 8.5, 0.125);
    const Eigen::Vector3d center_b(-8.0 + 0.25 * 8.5,
                                   -8.0 + 0.25 * (i + 0.5), 0.125);
    points.push_back(TransformPoint(world_to_truth, center_a));
    points.push_back(TransformPoint(world_to_truth, center_b));
  }

  ParticleSet set = SampleParticles(truth, 0.04 * Matrix6d::Identity(), 200,
                                    31);
  // Plant the exact truth as one hypothesis.
  set.deviations[0] = Vector6d::Zero();
  set.poses[0] = truth;
  const ParticleSet weighted = WeightParticles(
      set, points, *map, Pose::Identity(), LikelihoodConfig{0.125, 100});
  int argmax = 0;
  weighted.weights.maxCoeff(&argmax);
  EXPECT_EQ(argmax, 0);
}

TEST(PosteriorMoments, UniformWeightsGiveSampleMoments) {
  Rng rng(46);
  ParticleSet set = SampleParticles(testing::RandomPose(rng),
                                    RandomPsdMatrix6(rng, 0.01), 500, 3);
  const auto [mean, cov] = PosteriorMoments(set);
  Vector6d expected_mean = Vector6d::Zero();
  for (const Vector6d& d : set.deviations) expected_mean += d;
  expected_mean /= set.size();
  EXPECT_LT((mean - expected_mean).cwiseAbs().maxCoeff(), 1e-12);
  Matrix6d expected_cov = Matrix6d::Zero();
  for (const Vector6d& d : set.deviations) {
    expected_cov += (d - expected_mean) * (d - expected_mean).transpose();
  }
  expected_cov /= set.size();
  EXPECT_LT((cov - expected_cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PosteriorMoments, SingleSurvivorCollapsesMoments) {
  Rng rng(47);
  ParticleSet set = SampleParticles(testing::RandomPose(rng),
                                    RandomPsdMatrix6(rng, 0.01), 10, 4);
  set.weights.setZero();
  set.weights[3] = 1.0;
  // The unguarded moments collapse onto the surviving particle...
  const auto [mean, cov] = ComputeMoments(set);
  EXPECT_LT((mean - set.deviations[3]).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(cov.cwiseAbs().maxCoeff(), 1e-15);
  // ...while the guarded entry point reports the degenerate posterior.
  EXPECT_THROW(PosteriorMoments(set), DegeneratePosteriorError);
}

TEST(PosteriorMoments, MatchesDirectSummationOracle) {
  Rng rng(48);
  ParticleSet set = SampleParticles(testing::RandomPose(rng),
                                    RandomPsdMatrix6(rng, 0.02), 100, 6);
  Eigen::VectorXd w(100);
  for (int i = 0; i < 100; ++i) w[i] = rng.NextUniform();
  set.weights = w / w.sum();
  const auto [mean, cov] = PosteriorMoments(set);

  Vector6d oracle_mean = Vector6d::Zero();
  for (int i = 0; i < 100; ++i) {
    oracle_mean += set.weights[i] * set.deviations[i];
  }
  Matrix6d oracle_cov = Matrix6d::Zero();
  for (int i = 0; i < 100; ++i) {
    const Vector6d c = set.deviations[i] - oracle_mean;
    oracle_cov += set.weights[i] * c * c.transpose();
  }
  EXPECT_LT((mean - oracle_mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((cov - oracle_cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RecoverPseudoMeasurement, HalvedCovarianceGivesPriorAsMeasurement) {
  Rng rng(49);
  const Matrix6d prior_cov = RandomPsdMatrix6(rng, 1.0);
  Vector6d mean;
  for (int i = 0; i < 6; ++i) mean[i] = rng.NextNormal();
  const RecoveredMeasurement rec = RecoverPseudoMeasurement(
      mean, prior_cov, mean, (0.5 * prior_cov).eval());
  EXPECT_EQ(rec.clamped_directions, 0);
  EXPECT_LT((rec.measurement.deviation - mean).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((rec.measurement.covariance - prior_cov).cwiseAbs().maxCoeff(),
            1e-8);
}

TEST(RecoverPseudoMeasurement, ScalarHandAlgebra) {
  // Prior (0, 1), posterior (0.3, 0.5) on one axis: r = 1, z = 0.6.
  Matrix6d prior_cov = Matrix6d::Identity();
  Matrix6d posterior_cov = Matrix6d::Identity();
  posterior_cov(0, 0) = 0.5;
  // The remaining axes keep their prior (clamped, no information).
  Vector6d prior_mean = Vector6d::Zero();
  Vector6d posterior_mean = Vector6d::Zero();
  posterior_mean[0] = 0.3;
  const RecoveredMeasurement rec = RecoverPseudoMeasurement(
      prior_mean, prior_cov, posterior_mean, posterior_cov);
  EXPECT_NEAR(rec.measurement.deviation[0], 0.6, 1e-9);
  EXPECT_NEAR(rec.measurement.covariance(0, 0), 1.0, 1e-9);
  EXPECT_EQ(rec.clamped_directions, 5);
}

TEST(RecoverPseudoMeasurement, NoInformationLimitIsNearNoOp) {
  Rng rng(50);
  const Matrix6d cov = RandomPsdMatrix6(rng, 0.02);
  Vector6d mean;
  for (int i = 0; i < 6; ++i) mean[i] = rng.NextNormal();
  const RecoveredMeasurement rec =
      RecoverPseudoMeasurement(mean, cov, mean, cov);
  EXPECT_EQ(rec.clamped_directions, 6);
  EXPECT_LT((rec.measurement.deviation - mean).cwiseAbs().maxCoeff(), 1e-9);
  // Near-infinite measurement variance: the subsequent update is a no-op.
  EXPECT_GT(rec.measurement.covariance.eigenvalues().real().minCoeff(),
            1e5);
  const auto [post_mean, post_cov] = KalmanUpdateIdentity(
      mean, cov, rec.measurement.deviation, rec.measurement.covariance);
  EXPECT_LT((post_mean - mean).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT((post_cov - cov).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(RecoverPseudoMeasurement, RoundTripReproducesPosterior) {
  Rng rng(51);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto [prior_cov, posterior_cov] =
        testing::RandomShrinkingPair(rng);
    Vector6d prior_mean, posterior_mean;
    for (int i = 0; i < 6; ++i) {
      prior_mean[i] = rng.NextNormal();
      posterior_mean[i] = rng.NextNormal();
    }
    const RecoveredMeasurement rec = RecoverPseudoMeasurement(
        prior_mean, prior_cov, posterior_mean, posterior_cov);
    ASSERT_EQ(rec.clamped_directions, 0);
    const auto [post_mean, post_cov] = KalmanUpdateIdentity(
        prior_mean, prior_cov, rec.measurement.deviation,
        rec.measurement.covariance);
    EXPECT_LT((post_mean - posterior_mean).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((post_cov - posterior_cov).cwiseAbs().maxCoeff(), 1e-9);
  }
}

}  // namespace
}  // namespace unislam

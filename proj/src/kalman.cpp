// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/kalman.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "lumentrack/errors.hpp"

namespace lumentrack {
namespace {

using MeasurementMatrix = Eigen::Matrix<double, 4, 7>;
using MeasurementCovariance = Eigen::Matrix<double, 4, 4>;

StateCovariance transition() {
  StateCovariance f = StateCovariance::Identity();
  f(0, 4) = 1.0;
  f(1, 5) = 1.0;
  f(2, 6) = 1.0;
  return f;
}

MeasurementMatrix observation() {
  MeasurementMatrix h = MeasurementMatrix::Zero();
  for (int i = 0; i < 4; ++i) h(i, i) = 1.0;
  return h;
}

StateCovariance process_noise(double height, const KalmanNoise& noise) {
  const double sp = noise.position_weight * height;
  const double sv = noise.velocity_weight * height;
  StateVector diag;
  diag << sp * sp, sp * sp, sp * sp, noise.aspect_std * noise.aspect_std, sv * sv, sv * sv,
      sv * sv;
  return diag.asDiagonal();
}

void symmetrize(StateCovariance& p) { p = 0.5 * (p + p.transpose()).eval(); }

void clamp_shape(StateVector& x) {
  x(2) = std::max(x(2), kMinHeight);
  x(3) = std::max(x(3), kMinAspect);
}

}  // namespace

BoxMeasurement BoxMeasurement::from_box(const BoundingBox& box) {
  BoxMeasurement m;
  m.z << box.x_c, box.y_c, box.h, box.w / box.h;
  return m;
}

MotionState kf_init(const BoxMeasurement& m, const KalmanNoise& noise) {
  MotionState s;
  s.mean.setZero();
  s.mean.head<4>() = m.z;
  clamp_shape(s.mean);
  s.cov = process_noise(s.mean(2), noise);
  return s;
}

MotionState kf_predict(const MotionState& s, const KalmanNoise& noise) {
  static const StateCovariance f = transition();
  MotionState out;
  out.mean = f * s.mean;
  out.cov = f * s.cov * f.transpose() + process_noise(std::max(s.mean(2), kMinHeight), noise);
  symmetrize(out.cov);
  return out;
}

MotionState kf_update(const MotionState& s, const BoxMeasurement& m, const KalmanNoise& noise) {
  static const MeasurementMatrix h = observation();
  const double height = std::max(s.mean(2), kMinHeight);
  const double sr = noise.measurement_weight * height;
  Eigen::Vector4d r_diag(sr * sr, sr * sr, sr * sr,
                         noise.measurement_aspect_std * noise.measurement_aspect_std);

  const MeasurementCovariance innovation_cov =
      h * s.cov * h.transpose() + MeasurementCovariance(r_diag.asDiagonal());
  const Eigen::LDLT<MeasurementCovariance> ldlt(innovation_cov);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, innovation_cov.diagonal().maxCoeff())) {
    throw SingularInnovation("kf_update: innovation covariance is not invertible");
  }

  // K = P H^T S^-1, solved as S K^T = H P.
  const Eigen::Matrix<double, 4, 7> kt = ldlt.solve(h * s.cov);
  const Eigen::Matrix<double, 7, 4> gain = kt.transpose();
  const MeasurementVector innovation = m.z - h * s.mean;

  MotionState out;
  out.mean = s.mean + gain * innovation;
  out.cov = s.cov - gain * innovation_cov * gain.transpose();
  symmetrize(out.cov);
  for (int i = 0; i < 7; ++i) out.cov(i, i) = std::max(out.cov(i, i), 0.0);
  clamp_shape(out.mean);
  return out;
}

BoundingBox kf_predicted_box(const MotionState& s) {
  const double h = std::max(s.mean(2), 1.0);
  const double a = std::max(s.mean(3), kMinAspect);
  return {s.mean(0), s.mean(1), a * h, h};
}

}  // namespace lumentrack

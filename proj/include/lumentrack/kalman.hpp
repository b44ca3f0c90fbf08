// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "lumentrack/geometry.hpp"

namespace lumentrack {

using StateVector = Eigen::Matrix<double, 7, 1>;
using StateCovariance = Eigen::Matrix<double, 7, 7>;
using MeasurementVector = Eigen::Matrix<double, 4, 1>;

/// State layout: [x_c, y_c, h, a, vx, vy, vh]. The aspect ratio a = w / h has
/// no velocity term and evolves as a random walk.
struct MotionState {
  StateVector mean = StateVector::Zero();
  StateCovariance cov = StateCovariance::Identity();
};

/// [x_c, y_c, h, a]
struct BoxMeasurement {
  MeasurementVector z = MeasurementVector::Zero();

  static BoxMeasurement from_box(const BoundingBox& box);
};

/// Noise scales relative to box height. Defaults are the usual box-space
/// constant-velocity settings (1/20 and 1/160 of the height).
struct KalmanNoise {
  double position_weight = 1.0 / 20.0;
  double velocity_weight = 1.0 / 160.0;
  double aspect_std = 1e-2;
  double measurement_weight = 1.0 / 20.0;
  double measurement_aspect_std = 1e-2;
};

inline constexpr double kMinHeight = 1e-3;
inline constexpr double kMinAspect = 1e-3;

MotionState kf_init(const BoxMeasurement& m, const KalmanNoise& noise = {});
MotionState kf_predict(const MotionState& s, const KalmanNoise& noise = {});

/// Throws SingularInnovation if the innovation covariance cannot be inverted.
MotionState kf_update(const MotionState& s, const BoxMeasurement& m,
                      const KalmanNoise& noise = {});

/// Box of the current mean; height clamped to at least 1 px.
BoundingBox kf_predicted_box(const MotionState& s);

}  // namespace lumentrack

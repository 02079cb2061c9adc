#pragma once

#include <Eigen/Dense>

#include "aiv/geom.hpp"

namespace aiv {

/// Constant-velocity box state: (cx, cy, w, h, vcx, vcy, vw, vh), pixels and
/// pixels per frame.
struct KalmanState {
    using Vector = Eigen::Matrix<double, 8, 1>;
    using Covariance = Eigen::Matrix<double, 8, 8>;

    Vector mean = Vector::Zero();
    Covariance covariance = Covariance::Identity();

    BBox box() const noexcept;
};

namespace kalman {

// Noise standard deviations are relative to the box height.
inline constexpr double kPositionStd = 1.0 / 20.0;
inline constexpr double kVelocityStd = 1.0 / 160.0;
// Birth prior on velocity, also height-relative. Wide enough to be
// uninformative: the first two measurements pin the velocity down.
inline constexpr double kInitialVelocityStd = 1000.0;
inline constexpr double kMinExtent = 1e-3;

KalmanState initiate(const BBox& measurement);
KalmanState predict(const KalmanState& state);
/// Throws GeometryError when the measurement has a non-positive size.
KalmanState update(const KalmanState& state, const BBox& measurement);

}  // namespace kalman

}  // namespace aiv

#include "aiv/kalman.hpp"

#include <algorithm>

namespace aiv {

namespace {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat48 = Eigen::Matrix<double, 4, 8>;

Vec4 to_measurement(const BBox& b) { return {b.x + b.w / 2.0, b.y + b.h / 2.0, b.w, b.h}; }

KalmanState::Covariance symmetrized(const KalmanState::Covariance& p) { return (p + p.transpose()) / 2.0; }

void clamp_extent(KalmanState::Vector& mean) {
    mean(2) = std::max(mean(2), kalman::kMinExtent);
    mean(3) = std::max(mean(3), kalman::kMinExtent);
}

}  // namespace

BBox KalmanState::box() const noexcept {
    const double w = std::max(mean(2), kalman::kMinExtent);
    const double h = std::max(mean(3), kalman::kMinExtent);
    return {mean(0) - w / 2.0, mean(1) - h / 2.0, w, h};
}

namespace kalman {

KalmanState initiate(const BBox& measurement) {
    if (!measurement.valid()) throw GeometryError("degenerate measurement");
    KalmanState s;
    s.mean.head<4>() = to_measurement(measurement);
    s.mean.tail<4>().setZero();
    const double h = measurement.h;
    KalmanState::Vector std;
    std << 2 * kPositionStd * h, 2 * kPositionStd * h, 2 * kPositionStd * h, 2 * kPositionStd * h,
        kInitialVelocityStd * h, kInitialVelocityStd * h, kInitialVelocityStd * h, kInitialVelocityStd * h;
    s.covariance = std.array().square().matrix().asDiagonal();
    return s;
}

KalmanState predict(const KalmanState& state) {
    KalmanState::Covariance f = KalmanState::Covariance::Identity();
    f.topRightCorner<4, 4>().setIdentity();

    const double h = state.mean(3);
    KalmanState::Vector std;
    std << kPositionStd * h, kPositionStd * h, kPositionStd * h, kPositionStd * h, kVelocityStd * h,
        kVelocityStd * h, kVelocityStd * h, kVelocityStd * h;
    const KalmanState::Covariance q = std.array().square().matrix().asDiagonal();

    KalmanState out;
    out.mean = f * state.mean;
    clamp_extent(out.mean);
    out.covariance = symmetrized(f * state.covariance * f.transpose() + q);
    return out;
}

KalmanState update(const KalmanState& state, const BBox& measurement) {
    if (!measurement.valid()) throw GeometryError("degenerate measurement");
    Mat48 hmat = Mat48::Zero();
    hmat.leftCols<4>().setIdentity();

    const double r_std = kPositionStd * state.mean(3);
    const Mat4 r = Vec4::Constant(r_std * r_std).asDiagonal();

    const Vec4 projected = hmat * state.mean;
    const Mat4 s = hmat * state.covariance * hmat.transpose() + r;
    // K = P H^T S^-1, solved through the Cholesky factor of S.
    const Eigen::LLT<Mat4> llt(s);
    const Eigen::Matrix<double, 8, 4> gain = llt.solve(hmat * state.covariance).transpose();

    KalmanState out;
    out.mean = state.mean + gain * (to_measurement(measurement) - projected);
    clamp_extent(out.mean);
    out.covariance = symmetrized(state.covariance - gain * s * gain.transpose());
    return out;
}

}  // namespace kalman

}  // namespace aiv

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>

namespace aslam
{

template <typename Scalar>
using Pose2 = Eigen::Matrix<Scalar, 3, 1>;  // x, y, theta

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

using Pose2d = Pose2<double>;
using Vec2d = Vec2<double>;

/// Body-frame velocity command (u_x, u_y, u_theta).
template <typename Scalar>
using Twist = Eigen::Matrix<Scalar, 3, 1>;
using Twistd = Twist<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a)
{
    using std::fmod;
    const Scalar two_pi = Scalar(kTwoPi);
    a = fmod(a + Scalar(kPi), two_pi);
    if (a <= Scalar(0))
        a += two_pi;
    return a - Scalar(kPi);
}

template <typename Scalar>
Scalar angle_diff(Scalar a, Scalar b)
{
    return wrap_angle<Scalar>(a - b);
}

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

template <typename Derived>
auto position_of(const Eigen::MatrixBase<Derived>& pose)
{
    return pose.template head<2>();
}

}  // namespace aslam

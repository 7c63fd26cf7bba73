#pragma once

#include "aslam/geometry.hpp"
#include "aslam/grid_map.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace aslam
{

struct RobotLimits
{
    Eigen::Vector3d u_max{1.0, 1.0, 1.0};  // |u_x|, |u_y| in m/s, |u_theta| in rad/s
    double v_tr_max = 1.0;
    double d_min = 0.25;

    void validate() const;
};

struct WheelGeometry
{
    double wheel_radius = 0.04;
    double base_radius = 0.175;
    std::array<double, 3> wheel_angles{kPi / 2.0, 7.0 * kPi / 6.0, 11.0 * kPi / 6.0};

    void validate() const;
};

struct OdometryNoise
{
    double sigma_floor = 1e-4;          // per axis, per reading
    double sigma_trans_ratio = 0.02;    // xy sigma per metre moved
    double sigma_rot_ratio = 0.02;      // theta sigma per radian turned
    double sigma_rot_per_trans = 0.005; // theta sigma per metre moved
    double bias_scale = 0.005;          // fractional forward scale error
    double bias_yaw_per_m = 0.001;      // rad of heading bias per metre moved

    static OdometryNoise noiseless() { return {0, 0, 0, 0, 0, 0}; }
};

class CollisionError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Omnidirectional kinematics, world frame:
///   xdot = u_x cos(th) - u_y sin(th),  ydot = u_x sin(th) + u_y cos(th),  thdot = u_th
/// advanced with the midpoint rule; heading wrapped to (-pi, pi].
template <typename Scalar>
Pose2<Scalar> step_kinematics(const Pose2<Scalar>& pose, const Twist<Scalar>& u, Scalar dt)
{
    using std::cos;
    using std::sin;
    const Scalar th_mid = pose.z() + Scalar(0.5) * dt * u.z();
    const Scalar c = cos(th_mid);
    const Scalar s = sin(th_mid);
    Pose2<Scalar> next;
    next.x() = pose.x() + dt * (u.x() * c - u.y() * s);
    next.y() = pose.y() + dt * (u.x() * s + u.y() * c);
    next.z() = wrap_angle<Scalar>(pose.z() + dt * u.z());
    return next;
}

/// Body-frame displacement taking `from` to `to`.
template <typename Scalar>
Pose2<Scalar> relative_pose(const Pose2<Scalar>& from, const Pose2<Scalar>& to)
{
    using std::cos;
    using std::sin;
    const Scalar c = cos(from.z());
    const Scalar s = sin(from.z());
    const Scalar dx = to.x() - from.x();
    const Scalar dy = to.y() - from.y();
    return {c * dx + s * dy, -s * dx + c * dy, wrap_angle<Scalar>(to.z() - from.z())};
}

template <typename Scalar>
Pose2<Scalar> compose_pose(const Pose2<Scalar>& base, const Pose2<Scalar>& delta)
{
    using std::cos;
    using std::sin;
    const Scalar c = cos(base.z());
    const Scalar s = sin(base.z());
    return {base.x() + c * delta.x() - s * delta.y(), base.y() + s * delta.x() + c * delta.y(),
            wrap_angle<Scalar>(base.z() + delta.z())};
}

/// Sum over the three wheels of |wheel angle travelled| for command u held for dt.
template <typename Scalar>
Scalar wheel_rotation_increment(const Twist<Scalar>& u, Scalar dt, const WheelGeometry& geometry)
{
    using std::abs;
    using std::cos;
    using std::sin;
    Scalar total = Scalar(0);
    for (const double alpha : geometry.wheel_angles)
    {
        const Scalar speed = (-Scalar(sin(alpha)) * u.x() + Scalar(cos(alpha)) * u.y() +
                              Scalar(geometry.base_radius) * u.z()) /
                             Scalar(geometry.wheel_radius);
        total += abs(speed) * dt;
    }
    return total;
}

struct Feature
{
    int id = 0;
    Vec2d position = Vec2d::Zero();
};

struct FeaturePlacement
{
    std::uint64_t seed = 1;
    double density = 0.35;  // probability of a feature per free-facing wall face
    double offset = 0.1;    // max distance from the occupied cell
};

/// Features near obstacle boundaries: for each occupied cell face that borders a
/// free cell, a Bernoulli(density) draw places one feature inside the free cell,
/// jittered along the wall.
std::vector<Feature> place_features(const GroundTruthMap& truth, const FeaturePlacement& placement);

struct WorldModel
{
    std::string name;
    GroundTruthMap truth;
    std::vector<Feature> features;
    Pose2d start = Pose2d::Zero();
    Pose2d true_pose = Pose2d::Zero();

    bool in_collision(const Vec2d& p) const;
    /// Integrates u on the true pose. Throws CollisionError if the robot would end
    /// up inside an occupied cell or off the map.
    Pose2d advance(const Twistd& u, double dt);
};

struct SensorConfig
{
    double fov = deg2rad(69.4);
    double max_range = 4.0;
    int n_rays = 87;
};

DepthScan depth_scan(const WorldModel& world, const Pose2d& pose, double fov, double max_range, int n_rays);
inline DepthScan depth_scan(const WorldModel& world, const Pose2d& pose, const SensorConfig& s)
{
    return depth_scan(world, pose, s.fov, s.max_range, s.n_rays);
}

/// Ids (ascending) of features within range, inside the FOV wedge and with a
/// clear line of sight on the ground truth.
std::vector<int> visible_features(const WorldModel& world, const Pose2d& pose, double fov, double max_range);

/// Seeded odometry corruption.
class OdometryModel
{
public:
    OdometryModel(OdometryNoise noise, std::uint64_t seed) : noise_(noise), rng_(seed) {}

    Pose2d reading(const Pose2d& true_delta);
    const OdometryNoise& noise() const { return noise_; }

private:
    OdometryNoise noise_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Loads a world sidecar (key-value text) and its ground-truth PGM.
WorldModel load_world(const std::filesystem::path& sidecar);

GroundTruthMap ground_truth_from_pgm(const PgmImage& image, double resolution, const Vec2d& origin);

}  // namespace aslam

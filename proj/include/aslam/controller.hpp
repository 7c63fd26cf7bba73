#pragma once

#include "aslam/geometry.hpp"
#include "aslam/grid_map.hpp"
#include "aslam/utility.hpp"
#include "aslam/world_sim.hpp"

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace aslam
{

struct NmpcConfig
{
    int horizon = 20;
    double dt = 0.1;
    Eigen::Vector3d q_x{5.0, 5.0, 2.0};
    Eigen::Vector3d r{0.5, 0.5, 0.5};
    double q_obs = 1.0;
    RobotLimits limits;
    int max_obstacles = 10;
    int max_iterations = 30;
    double penalty_initial = 1e3;
    double penalty_growth = 10.0;
    double penalty_max = 1e7;

    void validate() const;
};

struct ObstacleTrack
{
    Vec2d position = Vec2d::Zero();   // nearest vertex now
    std::vector<Vec2d> predicted;     // one per horizon step, index n = state n+1
    bool dynamic = false;

    static ObstacleTrack stationary(const Vec2d& p, int horizon)
    {
        return {p, std::vector<Vec2d>(static_cast<std::size_t>(horizon), p), false};
    }
};

/// Obstacle "force" term h = -(1 - exp(0.1/d^2)).
template <typename Scalar>
Scalar obstacle_force(Scalar d)
{
    using std::exp;
    return -(Scalar(1) - exp(Scalar(0.1) / (d * d)));
}

/// Dynamic tracks first, then ascending distance to the predicted robot states
/// (input order on ties); truncated to `max_count`.
std::vector<ObstacleTrack> obstacle_selection(std::span<const ObstacleTrack> tracks,
                                              std::span<const Pose2d> predicted_states, int max_count);

/// Static tracks from the occupied cells of the estimated grid near `pose`: cells
/// are grouped into square tiles and each tile contributes its nearest cell centre.
std::vector<ObstacleTrack> obstacles_from_grid(const OccupancyGrid& grid, const Pose2d& pose, double radius,
                                               double tile, int horizon);

/// Box bounds, then the translational-speed bound (radial scaling keeps the box).
Twistd project_control(const Twistd& u, const RobotLimits& limits);

/// Control sequence stacked as [u_0; u_1; ...; u_{N-1}].
using ControlSequence = Eigen::VectorXd;

/// Horizon cost of a control sequence plus `penalty` times the squared clearance
/// violations (d < d_min) over the predicted states.
double nmpc_cost(const Pose2d& x0, const ControlSequence& controls, const Pose2d& target,
                 std::span<const ObstacleTrack> obstacles, const NmpcConfig& config, double penalty);

std::vector<Pose2d> rollout(const Pose2d& x0, const ControlSequence& controls, double dt);

struct NmpcResult
{
    Twistd u = Twistd::Zero();
    bool recovery = false;            // start already within d_min of an obstacle
    int iterations = 0;
    std::vector<double> cost_history; // accepted costs, first entry = warm start
    ControlSequence plan;
};

/// Receding-horizon controller with a shifted warm start.
class Nmpc
{
public:
    explicit Nmpc(NmpcConfig config = {});

    NmpcResult step(const Pose2d& state, const Pose2d& target, std::span<const ObstacleTrack> obstacles);
    void reset();
    const NmpcConfig& config() const { return config_; }
    /// Predicted states of the last solution (for obstacle prioritisation).
    const std::vector<Pose2d>& predicted() const { return predicted_; }

private:
    NmpcConfig config_;
    ControlSequence warm_;
    std::vector<Pose2d> predicted_;
};

/// Exp-weighted blend of the refined waypoint heading and the feature heading,
/// evaluated on the circle: beta is moved to the branch within pi of theta_star.
template <typename Scalar>
Scalar blended_heading(Scalar theta_star, Scalar beta, Scalar d_t, Scalar kappa2, Scalar kappa3)
{
    using std::exp;
    if (!(d_t > Scalar(0)))
        return wrap_angle<Scalar>(theta_star);
    const Scalar beta_near = theta_star + wrap_angle<Scalar>(beta - theta_star);
    const Scalar w_star = exp(kappa2 * d_t);
    const Scalar w_beta = exp(kappa3 / d_t);
    return wrap_angle<Scalar>((theta_star * w_star + beta_near * w_beta) / (w_star + w_beta));
}

struct HeadingBlend
{
    double kappa2 = -6.0;
    double kappa3 = -0.5;

    void validate() const;
};

/// Heading that keeps the most features (range, wedge, grid occlusion) in view
/// from `position`; the current heading when nothing is visible.
double feature_heading(std::span<const Vec2d> features, const Vec2d& position, double current_heading,
                       const OccupancyGrid& grid, const ViewConfig& view);

/// Second-level refinement: optimal heading of the next waypoint on the current
/// grid, excluding cells already covered during this segment.
HeadingChoice refine_next_heading(const OccupancyGrid& grid, const Vec2d& next_waypoint, const UtilityMode& mode,
                                  const std::optional<Vec2d>& goal, const ViewConfig& view,
                                  const CellMask* covered_so_far);

enum class ControllerStatus
{
    waiting,
    operating,
    goal_reached,
    recovery
};

const char* to_string(ControllerStatus s);

struct FollowerConfig
{
    double reach_position = 0.15;
    double reach_heading = 0.15;
    double stuck_eps = 0.05;
    double stuck_window = 5.0;
};

/// Waypoint executor around the NMPC: tracks one target, reports arrival and
/// raises RECOVERY on infeasible starts or stalls.
class PathFollower
{
public:
    PathFollower(NmpcConfig nmpc, FollowerConfig follower);

    ControllerStatus status() const { return status_; }
    void dispatch(const Pose2d& target, double now);
    void idle();
    /// One control step; `heading_target` overrides the target heading (third level).
    Twistd step(const Pose2d& estimate, double heading_target, std::span<const ObstacleTrack> obstacles, double now);
    const Pose2d& target() const { return target_; }
    bool reached(const Pose2d& estimate, double heading_target) const;
    Nmpc& nmpc() { return nmpc_; }
    int last_iterations() const { return last_iterations_; }

private:
    Nmpc nmpc_;
    FollowerConfig config_;
    ControllerStatus status_ = ControllerStatus::waiting;
    Pose2d target_ = Pose2d::Zero();
    double progress_time_ = 0.0;
    Pose2d progress_pose_ = Pose2d::Zero();
    int last_iterations_ = 0;
};

}  // namespace aslam

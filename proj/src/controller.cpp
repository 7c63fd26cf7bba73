#include "aslam/controller.hpp"

#include "aslam/keyvalue.hpp"
#include "aslam/raycast.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <limits>
#include <map>

namespace aslam
{

void NmpcConfig::validate() const
{
    if (horizon < 1)
        throw ConfigError("nmpc: horizon must be >= 1");
    if (!(dt > 0.0))
        throw ConfigError("nmpc: dt must be positive");
    if (!(q_x.head<2>().minCoeff() > 0.0) || !(q_x.z() >= 0.0) || !(r.minCoeff() >= 0.0) || !(q_obs >= 0.0))
        throw ConfigError("nmpc: weights must be nonnegative, position weights positive");
    if (max_iterations < 1 || max_obstacles < 0)
        throw ConfigError("nmpc: bad iteration or obstacle cap");
    limits.validate();
}

void HeadingBlend::validate() const
{
    if (!(kappa2 < 0.0 && kappa3 < 0.0))
        throw ConfigError("heading blend: kappa2 and kappa3 must be negative");
}

std::vector<ObstacleTrack> obstacle_selection(std::span<const ObstacleTrack> tracks,
                                              std::span<const Pose2d> predicted_states, int max_count)
{
    struct Ranked
    {
        std::size_t index;
        double distance;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(tracks.size());
    for (std::size_t i = 0; i < tracks.size(); ++i)
    {
        const ObstacleTrack& t = tracks[i];
        double best = std::numeric_limits<double>::infinity();
        if (predicted_states.empty())
            best = t.position.norm();
        for (std::size_t n = 0; n < predicted_states.size(); ++n)
        {
            const Vec2d o = t.predicted.empty() ? t.position : t.predicted[std::min(n, t.predicted.size() - 1)];
            best = std::min(best, (predicted_states[n].head<2>() - o).norm());
        }
        ranked.push_back({i, best});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [&](const Ranked& a, const Ranked& b) {
        const bool da = tracks[a.index].dynamic;
        const bool db = tracks[b.index].dynamic;
        if (da != db)
            return da;
        return a.distance < b.distance;
    });
    std::vector<ObstacleTrack> out;
    for (std::size_t k = 0; k < ranked.size() && static_cast<int>(out.size()) < max_count; ++k)
        out.push_back(tracks[ranked[k].index]);
    return out;
}

std::vector<ObstacleTrack> obstacles_from_grid(const OccupancyGrid& grid, const Pose2d& pose, double radius,
                                               double tile, int horizon)
{
    const GridGeometry& g = grid.geometry();
    const Vec2d p = pose.head<2>();
    const CellIndex c = g.to_cell_unchecked(p);
    const int reach = static_cast<int>(std::ceil(radius / g.resolution()));
    // tile key -> (distance, cell centre); ordered map keeps the output deterministic
    std::map<std::pair<long, long>, std::pair<double, Vec2d>> tiles;
    for (int y = c.y - reach; y <= c.y + reach; ++y)
        for (int x = c.x - reach; x <= c.x + reach; ++x)
        {
            const CellIndex m{x, y};
            if (!g.contains(m) || !grid.is_occupied(g.linear(m)))
                continue;
            const Vec2d centre = g.center(m);
            const double d = (centre - p).norm();
            if (d > radius)
                continue;
            const std::pair<long, long> key{static_cast<long>(std::floor(centre.x() / tile)),
                                            static_cast<long>(std::floor(centre.y() / tile))};
            auto it = tiles.find(key);
            if (it == tiles.end() || d < it->second.first)
                tiles[key] = {d, centre};
        }
    std::vector<std::pair<double, Vec2d>> sorted;
    for (const auto& [key, v] : tiles)
        sorted.push_back(v);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ObstacleTrack> tracks;
    for (const auto& [d, centre] : sorted)
        tracks.push_back(ObstacleTrack::stationary(centre, horizon));
    return tracks;
}

Twistd project_control(const Twistd& u, const RobotLimits& limits)
{
    Twistd out = u.cwiseMax(-limits.u_max).cwiseMin(limits.u_max);
    const double v = out.head<2>().norm();
    if (v > limits.v_tr_max)
    {
        const Vec2d xy = out.head<2>();
        double scale = limits.v_tr_max / v;
        out.head<2>() = xy * scale;
        // rounding can leave the norm an ulp above the bound
        while (out.head<2>().norm() > limits.v_tr_max)
        {
            scale = std::nextafter(scale, 0.0);
            out.head<2>() = xy * scale;
        }
    }
    return out;
}

std::vector<Pose2d> rollout(const Pose2d& x0, const ControlSequence& controls, double dt)
{
    const auto n = controls.size() / 3;
    std::vector<Pose2d> states;
    states.reserve(static_cast<std::size_t>(n) + 1);
    states.push_back(x0);
    for (Eigen::Index k = 0; k < n; ++k)
        states.push_back(step_kinematics<double>(states.back(), controls.segment<3>(3 * k), dt));
    return states;
}

namespace
{

Vec2d obstacle_at(const ObstacleTrack& t, int state_index)
{
    if (t.predicted.empty() || state_index <= 0)
        return t.position;
    return t.predicted[std::min<std::size_t>(static_cast<std::size_t>(state_index - 1), t.predicted.size() - 1)];
}

Pose2d tracking_error(const Pose2d& x, const Pose2d& target)
{
    return {x.x() - target.x(), x.y() - target.y(), angle_diff(x.z(), target.z())};
}

double max_violation(const std::vector<Pose2d>& states, std::span<const ObstacleTrack> obstacles, double d_min)
{
    double worst = 0.0;
    for (std::size_t n = 1; n < states.size(); ++n)
        for (const ObstacleTrack& o : obstacles)
            worst = std::max(worst, d_min - (states[n].head<2>() - obstacle_at(o, static_cast<int>(n))).norm());
    return worst;
}

ControlSequence project_sequence(ControlSequence u, const RobotLimits& limits)
{
    for (Eigen::Index k = 0; k < u.size() / 3; ++k)
        u.segment<3>(3 * k) = project_control(u.segment<3>(3 * k), limits);
    return u;
}

}  // namespace

double nmpc_cost(const Pose2d& x0, const ControlSequence& controls, const Pose2d& target,
                 std::span<const ObstacleTrack> obstacles, const NmpcConfig& config, double penalty)
{
    const std::vector<Pose2d> states = rollout(x0, controls, config.dt);
    const int n_steps = static_cast<int>(states.size()) - 1;
    double cost = 0.0;
    for (int n = 1; n <= n_steps; ++n)
    {
        const Pose2d e = tracking_error(states[n], target);
        cost += e.cwiseProduct(e).dot(config.q_x);
        for (const ObstacleTrack& o : obstacles)
        {
            const double d = (states[n].head<2>() - obstacle_at(o, n)).norm();
            if (n < n_steps)
            {
                const double h = obstacle_force(std::max(d, 1e-3));
                cost += config.q_obs * h * h;
            }
            if (d < config.limits.d_min)
                cost += penalty * (config.limits.d_min - d) * (config.limits.d_min - d);
        }
    }
    for (int k = 0; k < n_steps; ++k)
    {
        const Eigen::Vector3d u = controls.segment<3>(3 * k);
        cost += u.cwiseProduct(u).dot(config.r);
    }
    return cost;
}

Nmpc::Nmpc(NmpcConfig config) : config_(std::move(config))
{
    config_.validate();
    reset();
}

void Nmpc::reset()
{
    warm_ = ControlSequence::Zero(3 * config_.horizon);
    predicted_.clear();
}

NmpcResult Nmpc::step(const Pose2d& state, const Pose2d& target, std::span<const ObstacleTrack> obstacles)
{
    const int N = config_.horizon;
    const double dt = config_.dt;
    const double d_min = config_.limits.d_min;
    NmpcResult result;

    for (const ObstacleTrack& o : obstacles)
        if ((state.head<2>() - o.position).norm() < d_min)
        {
            result.recovery = true;
            result.plan = warm_;
            return result;
        }

    // shifted warm start
    ControlSequence u(3 * N);
    u.head(3 * (N - 1)) = warm_.tail(3 * (N - 1));
    u.tail<3>() = warm_.tail<3>();
    u = project_sequence(u, config_.limits);

    double penalty = config_.penalty_initial;
    double cost = nmpc_cost(state, u, target, obstacles, config_, penalty);
    result.cost_history.push_back(cost);
    double damping = 1e-3;

    const Eigen::Index dim = 3 * N;
    std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> sens(static_cast<std::size_t>(N) + 1,
                                                              Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, dim));
    Eigen::MatrixXd H(dim, dim);
    Eigen::VectorXd grad(dim);

    int it = 0;
    while (it < config_.max_iterations)
    {
        ++it;
        const std::vector<Pose2d> xs = rollout(state, u, dt);
        // forward sensitivities S_n = dx_n / dU
        sens[0].setZero();
        for (int n = 0; n < N; ++n)
        {
            const double th = xs[n].z() + 0.5 * dt * u(3 * n + 2);
            const double c = std::cos(th);
            const double s = std::sin(th);
            const double ux = u(3 * n);
            const double uy = u(3 * n + 1);
            Eigen::Matrix3d A = Eigen::Matrix3d::Identity();
            A(0, 2) = dt * (-ux * s - uy * c);
            A(1, 2) = dt * (ux * c - uy * s);
            Eigen::Matrix3d B;
            B << dt * c, -dt * s, 0.5 * dt * dt * (-ux * s - uy * c), dt * s, dt * c, 0.5 * dt * dt * (ux * c - uy * s),
                0.0, 0.0, dt;
            sens[n + 1].leftCols(3 * n) = A * sens[n].leftCols(3 * n);
            sens[n + 1].block<3, 3>(0, 3 * n) = B;
        }

        H.setZero();
        grad.setZero();
        for (int n = 1; n <= N; ++n)
        {
            Eigen::Matrix3d Hn = config_.q_x.asDiagonal();
            const Pose2d e = tracking_error(xs[n], target);
            Eigen::Vector3d gn = config_.q_x.cwiseProduct(e);
            for (const ObstacleTrack& o : obstacles)
            {
                const Vec2d diff = xs[n].head<2>() - obstacle_at(o, n);
                const double d = std::max(diff.norm(), 1e-3);
                const Vec2d dir = diff / d;
                if (n < N && config_.q_obs > 0.0)
                {
                    const double sq = std::sqrt(config_.q_obs);
                    const double h = obstacle_force(d);
                    // dh/dd = -exp(0.1/d^2) * 0.2/d^3
                    const double dh = -std::exp(0.1 / (d * d)) * 0.2 / (d * d * d);
                    const Vec2d a = sq * dh * dir;
                    Hn.topLeftCorner<2, 2>() += a * a.transpose();
                    gn.head<2>() += a * (sq * h);
                }
                if (d < d_min)
                {
                    const double sp = std::sqrt(penalty);
                    const Vec2d a = -sp * dir;
                    Hn.topLeftCorner<2, 2>() += a * a.transpose();
                    gn.head<2>() += a * (sp * (d_min - d));
                }
            }
            const auto S = sens[n].leftCols(3 * n);
            H.topLeftCorner(3 * n, 3 * n).noalias() += S.transpose() * Hn * S;
            grad.head(3 * n).noalias() += S.transpose() * gn;
        }
        for (int k = 0; k < N; ++k)
        {
            H.diagonal().segment<3>(3 * k) += config_.r;
            grad.segment<3>(3 * k) += config_.r.cwiseProduct(u.segment<3>(3 * k));
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 8 && !accepted; ++attempt)
        {
            Eigen::MatrixXd M = H;
            M.diagonal() += damping * (H.diagonal().array() + 1e-6).matrix();
            const Eigen::VectorXd delta = M.ldlt().solve(-grad);
            const ControlSequence trial = project_sequence(u + delta, config_.limits);
            const double trial_cost = nmpc_cost(state, trial, target, obstacles, config_, penalty);
            if (trial_cost < cost)
            {
                const double improvement = cost - trial_cost;
                u = trial;
                cost = trial_cost;
                result.cost_history.push_back(cost);
                damping = std::max(damping / 3.0, 1e-9);
                accepted = true;
                if (improvement < 1e-9 * std::max(1.0, cost))
                    attempt = 100;
            }
            else
            {
                damping *= 10.0;
            }
        }
        const bool converged = !accepted || (result.cost_history.size() >= 2 &&
                                             result.cost_history[result.cost_history.size() - 2] - cost <
                                                 1e-6 * std::max(1.0, cost));
        if (converged)
        {
            const double violation = max_violation(rollout(state, u, dt), obstacles, d_min);
            if (violation > 1e-3 && penalty < config_.penalty_max)
            {
                penalty = std::min(penalty * config_.penalty_growth, config_.penalty_max);
                cost = nmpc_cost(state, u, target, obstacles, config_, penalty);
                result.cost_history.assign(1, cost);
                damping = 1e-3;
                continue;
            }
            break;
        }
    }
    result.iterations = it;

    // first control must keep the next state clear of every obstacle: shrink the
    // translational part until it does (zero translation keeps the current clearance)
    Twistd u0 = u.head<3>();
    auto next_clear = [&](const Twistd& cmd) {
        const Pose2d x1 = step_kinematics<double>(state, cmd, dt);
        for (const ObstacleTrack& o : obstacles)
            if ((x1.head<2>() - obstacle_at(o, 1)).norm() < d_min)
                return false;
        return true;
    };
    if (!next_clear(u0))
    {
        double lo = 0.0;
        double hi = 1.0;
        for (int k = 0; k < 30; ++k)
        {
            const double mid = 0.5 * (lo + hi);
            Twistd cmd = u0;
            cmd.head<2>() *= mid;
            (next_clear(cmd) ? lo : hi) = mid;
        }
        u0.head<2>() *= lo;
        if (!next_clear(u0))
            u0.head<2>().setZero();
        u.head<3>() = u0;
    }

    result.u = project_control(u0, config_.limits);
    result.plan = u;
    warm_ = u;
    predicted_ = rollout(state, u, dt);
    return result;
}

double feature_heading(std::span<const Vec2d> features, const Vec2d& position, double current_heading,
                       const OccupancyGrid& grid, const ViewConfig& view)
{
    const GridGeometry& g = grid.geometry();
    std::vector<double> bearings;
    for (const Vec2d& f : features)
    {
        const Vec2d d = f - position;
        const double dist = d.norm();
        if (dist > view.d_thr || dist <= 0.0)
            continue;
        const bool clear = walk_segment_interior(g, position, f, [&](CellIndex c) {
            return !g.contains(c) || !grid.occludes(g.linear(c));
        });
        if (clear)
            bearings.push_back(std::atan2(d.y(), d.x()));
    }
    if (bearings.empty())
        return current_heading;
    int best_count = 0;
    double best = current_heading;
    for (int k = 0; k < view.n_headings; ++k)
    {
        const double theta = wrap_angle(kTwoPi * k / view.n_headings);
        int count = 0;
        for (const double b : bearings)
            if (std::abs(angle_diff(b, theta)) <= 0.5 * view.fov)
                ++count;
        if (count > best_count)
        {
            best_count = count;
            best = theta;
        }
    }
    return best;
}

HeadingChoice refine_next_heading(const OccupancyGrid& grid, const Vec2d& next_waypoint, const UtilityMode& mode,
                                  const std::optional<Vec2d>& goal, const ViewConfig& view,
                                  const CellMask* covered_so_far)
{
    return optimal_heading(grid, next_waypoint, mode, goal, view, covered_so_far);
}

const char* to_string(ControllerStatus s)
{
    switch (s)
    {
    case ControllerStatus::waiting: return "WAITING";
    case ControllerStatus::operating: return "OPERATING";
    case ControllerStatus::goal_reached: return "GOAL_REACHED";
    case ControllerStatus::recovery: return "RECOVERY";
    }
    return "?";
}

PathFollower::PathFollower(NmpcConfig nmpc, FollowerConfig follower) : nmpc_(std::move(nmpc)), config_(follower) {}

void PathFollower::dispatch(const Pose2d& target, double now)
{
    target_ = target;
    status_ = ControllerStatus::operating;
    progress_time_ = now;
    progress_pose_ = Pose2d::Constant(std::numeric_limits<double>::quiet_NaN());
}

void PathFollower::idle()
{
    status_ = ControllerStatus::waiting;
    nmpc_.reset();
}

bool PathFollower::reached(const Pose2d& estimate, double heading_target) const
{
    return (estimate.head<2>() - target_.head<2>()).norm() <= config_.reach_position &&
           std::abs(angle_diff(estimate.z(), heading_target)) <= config_.reach_heading;
}

Twistd PathFollower::step(const Pose2d& estimate, double heading_target, std::span<const ObstacleTrack> obstacles,
                          double now)
{
    last_iterations_ = 0;
    if (status_ != ControllerStatus::operating)
        return Twistd::Zero();
    if (reached(estimate, heading_target))
    {
        status_ = ControllerStatus::goal_reached;
        return Twistd::Zero();
    }
    if (!progress_pose_.allFinite())
        progress_pose_ = estimate;
    if (now - progress_time_ >= config_.stuck_window)
    {
        const bool moved = (estimate.head<2>() - progress_pose_.head<2>()).norm() >= config_.stuck_eps ||
                           std::abs(angle_diff(estimate.z(), progress_pose_.z())) >= 0.1;
        if (!moved)
        {
            status_ = ControllerStatus::recovery;
            return Twistd::Zero();
        }
        progress_pose_ = estimate;
        progress_time_ = now;
    }
    const Pose2d goal(target_.x(), target_.y(), heading_target);
    const NmpcResult r = nmpc_.step(estimate, goal, obstacles);
    last_iterations_ = r.iterations;
    if (r.recovery)
    {
        status_ = ControllerStatus::recovery;
        return Twistd::Zero();
    }
    return r.u;
}

}  // namespace aslam

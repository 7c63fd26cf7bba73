#include "aslam/slam_proxy.hpp"

#include "aslam/keyvalue.hpp"
#include "aslam/world_sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace aslam
{

void SlamConfig::validate() const
{
    if (!(node_linear_spacing > 0.0) || !(node_angular_spacing > 0.0))
        throw ConfigError("slam: node spacing must be positive");
    if (n_match < 1)
        throw ConfigError("slam: n_match must be >= 1");
    if (!(recency_window >= 0.0))
        throw ConfigError("slam: recency_window must be >= 0");
    if (!(epsilon_lc >= 0.0 && epsilon_lc <= 1.0))
        throw ConfigError("slam: epsilon_lc must lie in [0, 1]");
}

Pose2d GraphNode::error() const
{
    return {estimate.x() - truth.x(), estimate.y() - truth.y(), angle_diff(estimate.z(), truth.z())};
}

PoseGraph::PoseGraph(SlamConfig config, Pose2d start) : config_(config), estimate_(std::move(start))
{
    config_.validate();
    merged_into_.push_back(0);
}

void PoseGraph::integrate_odometry(const Pose2d& noisy_delta)
{
    estimate_ = compose_pose<double>(estimate_, noisy_delta);
}

int PoseGraph::root(int session) const
{
    while (merged_into_[static_cast<std::size_t>(session)] != session)
        session = merged_into_[static_cast<std::size_t>(session)];
    return session;
}

std::optional<std::size_t> PoseGraph::maybe_add_node(double stamp, const Pose2d& true_pose, std::vector<int> features,
                                                     const DepthScan& scan)
{
    if (last_node_)
    {
        const Pose2d& last = nodes_[*last_node_].estimate;
        const bool moved = (estimate_.head<2>() - last.head<2>()).norm() >= config_.node_linear_spacing;
        const bool turned = std::abs(angle_diff(estimate_.z(), last.z())) >= config_.node_angular_spacing;
        if (!moved && !turned)
            return std::nullopt;
    }
    return add_node(stamp, true_pose, std::move(features), scan);
}

std::size_t PoseGraph::add_node(double stamp, const Pose2d& true_pose, std::vector<int> features,
                                const DepthScan& scan)
{
    GraphNode n;
    n.id = static_cast<int>(nodes_.size());
    n.session = session_;
    n.stamp = stamp;
    n.estimate = estimate_;
    n.truth = true_pose;
    std::sort(features.begin(), features.end());
    n.features = std::move(features);
    if (last_node_ && nodes_[*last_node_].session == session_)
        edges_.emplace_back(nodes_[*last_node_].id, n.id);
    nodes_.push_back(std::move(n));
    last_node_ = nodes_.size() - 1;
    if (config_.scan_buffer > 0)
    {
        scans_.push_back({nodes_.back().id, scan});
        while (scans_.size() > config_.scan_buffer)
            scans_.pop_front();
    }
    return *last_node_;
}

std::optional<std::size_t> PoseGraph::detect_loop_closure(std::span<const int> features, double stamp) const
{
    std::vector<int> view(features.begin(), features.end());
    std::sort(view.begin(), view.end());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
    {
        const GraphNode& n = nodes_[i];
        if (stamp - n.stamp < config_.recency_window)
            break;  // nodes are stored in time order
        std::size_t shared = 0;
        auto a = n.features.begin();
        auto b = view.begin();
        while (a != n.features.end() && b != view.end())
        {
            if (*a < *b)
                ++a;
            else if (*b < *a)
                ++b;
            else
            {
                ++shared;
                ++a;
                ++b;
            }
        }
        if (static_cast<int>(shared) >= config_.n_match)
            return i;
    }
    return std::nullopt;
}

namespace
{

Pose2d contracted(const Pose2d& e, const Pose2d& target, double factor)
{
    return {e.x() - factor * (e.x() - target.x()), e.y() - factor * (e.y() - target.y()),
            e.z() - factor * angle_diff(e.z(), target.z())};
}

Pose2d with_error(const Pose2d& truth, const Pose2d& error)
{
    return {truth.x() + error.x(), truth.y() + error.y(), wrap_angle(truth.z() + error.z())};
}

}  // namespace

ClosureRecord PoseGraph::apply_closure(std::size_t matched, const Pose2d& true_pose, double stamp)
{
    ClosureRecord rec;
    rec.matched = nodes_.at(matched).id;
    rec.current = last_node_ ? nodes_[*last_node_].id : rec.matched;
    rec.stamp = stamp;
    rec.ate_before = ate_rmse();

    const Pose2d e_m = nodes_[matched].error();
    const double eps = config_.epsilon_lc;

    const Pose2d e_now{estimate_.x() - true_pose.x(), estimate_.y() - true_pose.y(),
                       angle_diff(estimate_.z(), true_pose.z())};
    const Pose2d e_new = contracted(e_now, e_m, eps);
    if (e_new.head<2>().norm() <= e_now.head<2>().norm())
        estimate_ = with_error(true_pose, e_new);

    // nodes after the match, weighted linearly from 0 at the match to 1 now
    const std::size_t last = last_node_.value_or(matched);
    if (last > matched)
    {
        const double span = static_cast<double>(last - matched);
        for (std::size_t k = matched + 1; k <= last; ++k)
        {
            GraphNode& n = nodes_[k];
            const double alpha = static_cast<double>(k - matched) / span;
            const Pose2d e = n.error();
            const Pose2d corrected = contracted(e, e_m, eps * alpha);
            if (corrected.head<2>().norm() <= e.head<2>().norm())
                n.estimate = with_error(n.truth, corrected);
        }
    }

    const int matched_root = root(nodes_[matched].session);
    const int current_root = root(session_);
    if (matched_root != current_root)
    {
        merged_into_[static_cast<std::size_t>(current_root)] = matched_root;
        rec.merged_sessions = true;
    }
    rec.ate_after = ate_rmse();
    closures_.push_back(rec);
    return rec;
}

void PoseGraph::rebuild_grid(OccupancyGrid& grid) const
{
    grid.clear();
    const int current = root(session_);
    for (const BufferedScan& b : scans_)
    {
        const GraphNode& n = nodes_[static_cast<std::size_t>(b.node)];
        if (root(n.session) == current)
            update_from_scan(grid, n.estimate, b.scan);
    }
}

void PoseGraph::start_session()
{
    session_ = static_cast<int>(merged_into_.size());
    merged_into_.push_back(session_);
    last_node_.reset();
}

std::vector<Pose2d> PoseGraph::session_poses() const
{
    std::vector<Pose2d> out;
    const int current = root(session_);
    for (const GraphNode& n : nodes_)
        if (root(n.session) == current)
            out.push_back(n.estimate);
    return out;
}

double PoseGraph::ate_rmse() const
{
    if (nodes_.empty())
        return 0.0;
    double sum = 0.0;
    for (const GraphNode& n : nodes_)
        sum += n.error().head<2>().squaredNorm();
    return std::sqrt(sum / static_cast<double>(nodes_.size()));
}

void PoseGraph::write_dump(std::ostream& out) const
{
    out << std::setprecision(9);
    for (const GraphNode& n : nodes_)
    {
        out << "node " << n.id << ' ' << n.session << ' ' << n.stamp << ' ' << n.estimate.x() << ' '
            << n.estimate.y() << ' ' << n.estimate.z() << ' ' << n.truth.x() << ' ' << n.truth.y() << ' '
            << n.truth.z() << " features";
        for (const int f : n.features)
            out << ' ' << f;
        out << '\n';
    }
    for (const auto& [a, b] : edges_)
        out << "edge " << a << ' ' << b << '\n';
    for (const ClosureRecord& c : closures_)
        out << "closure " << c.current << ' ' << c.matched << ' ' << c.stamp << ' ' << c.ate_before << ' '
            << c.ate_after << ' ' << (c.merged_sessions ? 1 : 0) << '\n';
}

}  // namespace aslam

#pragma once

#include "aslam/geometry.hpp"
#include "aslam/grid_map.hpp"

#include <cstddef>
#include <deque>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace aslam
{

struct SlamConfig
{
    double node_linear_spacing = 0.3;
    double node_angular_spacing = 0.3;
    int n_match = 8;
    double recency_window = 10.0;
    double epsilon_lc = 0.8;
    std::size_t scan_buffer = 2000;

    void validate() const;
};

struct GraphNode
{
    int id = 0;
    int session = 0;
    double stamp = 0.0;
    Pose2d estimate = Pose2d::Zero();
    Pose2d truth = Pose2d::Zero();
    std::vector<int> features;  // ascending ids seen from this node

    /// Estimate minus truth, heading wrapped.
    Pose2d error() const;
};

struct ClosureRecord
{
    int current = 0;
    int matched = 0;
    double stamp = 0.0;
    double ate_before = 0.0;
    double ate_after = 0.0;
    bool merged_sessions = false;
};

/// Pose estimate driven by noisy odometry plus a graph of visited nodes.
/// Ground truth is kept alongside so closures can contract the drift.
class PoseGraph
{
public:
    explicit PoseGraph(SlamConfig config = {}, Pose2d start = Pose2d::Zero());

    const SlamConfig& config() const { return config_; }
    const Pose2d& estimate() const { return estimate_; }
    void integrate_odometry(const Pose2d& noisy_delta);

    /// Adds a node when the estimate moved or turned enough since the last one.
    /// The scan is buffered (bounded) for later map rebuilds. Returns the node index.
    std::optional<std::size_t> maybe_add_node(double stamp, const Pose2d& true_pose, std::vector<int> features,
                                              const DepthScan& scan);
    std::size_t add_node(double stamp, const Pose2d& true_pose, std::vector<int> features, const DepthScan& scan);

    /// Oldest node at least recency_window older than `stamp` sharing at least
    /// n_match of `features`.
    std::optional<std::size_t> detect_loop_closure(std::span<const int> features, double stamp) const;

    /// Contracts the current error toward the matched node's recorded error and
    /// spreads the adjustment linearly over the nodes since the match. No node's
    /// error grows. Merges sessions when the match lies in an archived one.
    ClosureRecord apply_closure(std::size_t matched, const Pose2d& true_pose, double stamp);

    /// Clears `grid` and replays the buffered scans of the current session at
    /// the corrected node estimates.
    void rebuild_grid(OccupancyGrid& grid) const;

    /// Starts a fresh session at the current estimate; earlier nodes stay
    /// available for closures.
    void start_session();

    int session() const { return session_; }
    const std::vector<GraphNode>& nodes() const { return nodes_; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<ClosureRecord>& closures() const { return closures_; }
    std::vector<Pose2d> session_poses() const;

    /// RMSE of node position errors over all nodes.
    double ate_rmse() const;

    void write_dump(std::ostream& out) const;

private:
    struct BufferedScan
    {
        int node;
        DepthScan scan;
    };

    SlamConfig config_;
    Pose2d estimate_;
    int session_ = 0;
    std::vector<int> merged_into_;  // session -> representative session
    std::vector<GraphNode> nodes_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<ClosureRecord> closures_;
    std::deque<BufferedScan> scans_;
    std::optional<std::size_t> last_node_;

    int root(int session) const;
};

}  // namespace aslam

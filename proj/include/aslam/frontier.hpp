#pragma once

#include "aslam/grid_map.hpp"
#include "aslam/planner.hpp"

#include <optional>
#include <random>
#include <span>
#include <vector>

namespace aslam
{

struct FrontierConfig
{
    double robot_radius = 0.2;
    int goal_merge_cells = 2;

    /// Smallest cluster that still fits the robot through the opening.
    int min_cluster_cells(double resolution) const
    {
        return static_cast<int>(std::ceil(2.0 * robot_radius / resolution - 1e-9));
    }
};

struct FrontierCluster
{
    std::vector<CellIndex> cells;
    Vec2d centroid = Vec2d::Zero();
};

/// Free cell with at least one unknown 8-neighbour and no occupied cell within the robot radius.
bool is_frontier_cell(const OccupancyGrid& grid, CellIndex c, double robot_radius);

/// 8-connected frontier components, small ones dropped, ordered by distance of
/// the centroid to the robot (ties by first cell in scan order).
std::vector<FrontierCluster> extract_frontiers(const OccupancyGrid& grid, const Vec2d& robot_position,
                                               const FrontierConfig& config);

/// One goal per cluster: the centroid when it is a reachable free cell, else the
/// member closest to the centroid that is reachable. Goals within
/// goal_merge_cells of the previous goal are dropped.
std::vector<Vec2d> candidate_goals(std::span<const FrontierCluster> clusters, const OccupancyGrid& grid,
                                   const Vec2d& robot_position, const std::optional<Vec2d>& previous_goal,
                                   const FrontierConfig& config, const PlannerConfig& planner);

struct FallbackAction
{
    enum class Kind
    {
        rotate_in_place_360,
        goto_node
    };
    Kind kind = Kind::rotate_in_place_360;
    std::size_t node = 0;
    Vec2d target = Vec2d::Zero();
};

/// No-frontier policy: spin in place on an empty graph, otherwise head to a
/// uniformly drawn previously visited node.
FallbackAction fallback_action(std::span<const Pose2d> graph_nodes, std::mt19937_64& rng);

}  // namespace aslam

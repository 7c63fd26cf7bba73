#pragma once

#include "aslam/grid_map.hpp"
#include "aslam/utility.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace aslam
{

struct PlannerConfig
{
    double robot_radius = 0.2;
    double unknown_cost = 1.2;  // multiplier on moves into unknown cells
    double waypoint_spacing = 1.0;

    double inflation_radius(double resolution) const { return robot_radius + resolution; }
};

class UnreachableError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Blocked cells (occupied, inflated) plus unknown flags, snapshotted from a grid.
/// Cells inside the inflation zone but within the inflation radius of `start`
/// stay passable so a robot that drifted close to a wall can still leave.
class Traversability
{
public:
    Traversability(const OccupancyGrid& grid, const PlannerConfig& config, std::optional<CellIndex> start = {});

    const GridGeometry& geometry() const { return geometry_; }
    bool passable(std::size_t i) const { return !blocked_[i]; }
    bool passable(CellIndex c) const { return geometry_.contains(c) && passable(geometry_.linear(c)); }
    bool inflated(std::size_t i) const { return inflated_[i] != 0; }
    bool unknown(std::size_t i) const { return unknown_[i] != 0; }
    double unknown_cost() const { return unknown_cost_; }

    /// 8-connected moves; a diagonal move needs both orthogonal neighbours passable.
    template <typename Fn>
    void for_each_move(CellIndex c, Fn&& fn) const
    {
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
            {
                if (dx == 0 && dy == 0)
                    continue;
                const CellIndex n{c.x + dx, c.y + dy};
                if (!passable(n))
                    continue;
                const bool diagonal = dx != 0 && dy != 0;
                if (diagonal && (!passable(CellIndex{c.x + dx, c.y}) || !passable(CellIndex{c.x, c.y + dy})))
                    continue;
                fn(n, diagonal);
            }
    }

private:
    GridGeometry geometry_;
    std::vector<std::uint8_t> blocked_;
    std::vector<std::uint8_t> inflated_;
    std::vector<std::uint8_t> unknown_;
    double unknown_cost_ = 1.2;
};

/// Move counts of a path; its cost is a fixed function of the counts so equal
/// paths always report bit-identical costs.
struct PathCost
{
    int straight_known = 0;
    int diagonal_known = 0;
    int straight_unknown = 0;
    int diagonal_unknown = 0;

    double value(double resolution, double unknown_cost) const;
    void add(bool diagonal, bool into_unknown);
};

struct CellPath
{
    std::vector<CellIndex> cells;
    PathCost moves;
    double cost = 0.0;  // metres, unknown moves scaled
};

/// A* over the 8-connected traversable graph; octile move costs, Euclidean heuristic.
CellPath astar(const Traversability& trav, CellIndex start, CellIndex goal);
CellPath astar(const OccupancyGrid& grid, CellIndex start, CellIndex goal, const PlannerConfig& config);

/// Cells connected to `start` through passable moves.
std::vector<std::uint8_t> reachable_mask(const Traversability& trav, CellIndex start);

/// Samples the path (robot position, interior cell centres, goal centre) at arc-length
/// multiples of `spacing`, always ending at the goal. Headings default to the path tangent.
std::vector<Waypoint> reduce_to_waypoints(const CellPath& path, const GridGeometry& geometry, const Pose2d& robot,
                                          double spacing);

/// Heading policy used to turn a path into executable waypoints.
struct PathScoring
{
    bool optimize_intermediate = true;  // first-level activeness
    UtilityMode utility;
    AggregationMode aggregation;
};

struct PlanResult
{
    std::size_t candidate = 0;
    Vec2d goal = Vec2d::Zero();
    std::vector<Waypoint> waypoints;
    double utility = 0.0;
    CellPath path;
};

/// Assigns headings and utilities to `waypoints` in place and returns the path utility.
double score_waypoints(std::vector<Waypoint>& waypoints, const OccupancyGrid& grid, const PathScoring& scoring,
                       const ViewConfig& view);

/// For every candidate: A*, waypoint reduction, heading assignment and path utility;
/// returns the best (ties by candidate order). Throws UnreachableError if no
/// candidate can be reached.
PlanResult plan_informative_path(const OccupancyGrid& grid, const Pose2d& robot, const std::vector<Vec2d>& candidates,
                                 const PathScoring& scoring, const ViewConfig& view, const PlannerConfig& config);

}  // namespace aslam

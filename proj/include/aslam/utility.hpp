#pragma once

#include "aslam/geometry.hpp"
#include "aslam/grid_map.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace aslam
{

enum class UtilityVariant
{
    u1,  // plain entropy
    u2,  // entropy + obstacle bonus
    u3   // goal-distance weighted exploration/re-observation + obstacle bonus
};

struct UtilityMode
{
    UtilityVariant variant = UtilityVariant::u1;
    double kappa1 = 1.0;
    double p_thr = 0.7;
    double d_l = 0.2;
    double d_h = 0.8;

    void validate() const;
};

enum class AggregationKind
{
    weighted_average,
    weighted_sum,
    goal_only,
    interpolated
};

struct AggregationMode
{
    AggregationKind kind = AggregationKind::weighted_average;
    double rho = 0.25;
};

struct ViewConfig
{
    double fov = deg2rad(69.4);
    double d_thr = 4.0;
    int n_headings = 16;
};

/// Membership bitmap over the cells of one grid.
class CellMask
{
public:
    CellMask() = default;
    explicit CellMask(std::size_t n) : bits_(n, 0) {}

    bool contains(std::size_t i) const { return i < bits_.size() && bits_[i]; }
    void insert(std::size_t i)
    {
        if (!bits_[i])
        {
            bits_[i] = 1;
            ++count_;
        }
    }
    template <typename Range>
    void insert_all(const Range& cells)
    {
        for (const std::size_t i : cells)
            insert(i);
    }
    std::size_t count() const { return count_; }
    std::size_t capacity() const { return bits_.size(); }

private:
    std::vector<std::uint8_t> bits_;
    std::size_t count_ = 0;
};

struct VisibleCellSet
{
    Pose2d source = Pose2d::Zero();
    std::vector<std::size_t> cells;  // ascending linear indices
};

/// Re-observation weight j, clamped to [d_l, d_h].
template <typename Scalar>
Scalar reobservation_weight(Scalar distance_to_goal, Scalar d_l, Scalar d_h)
{
    using std::max;
    using std::min;
    return max(d_l, min(d_h, d_l * distance_to_goal));
}

/// Cells around a position that have an unobstructed ray to it, within range.
/// Occlusion does not depend on heading, so one disc serves every heading.
struct VisibilityDisc
{
    struct Entry
    {
        std::size_t cell;
        double bearing;
        double utility;
    };
    Vec2d position = Vec2d::Zero();
    std::vector<Entry> entries;
};

/// Rays stop at cells with p_o above the threshold; unknown cells are transparent.
/// Utilities are left at zero.
VisibilityDisc visibility_disc(const OccupancyGrid& grid, const Vec2d& position, double d_thr);

/// Fills the per-entry utility for the given mode.
void assign_utilities(VisibilityDisc& disc, const OccupancyGrid& grid, const UtilityMode& mode,
                      const std::optional<Vec2d>& goal);

VisibleCellSet visible_cells(const OccupancyGrid& grid, const Pose2d& pose, double fov, double d_thr,
                             const CellMask* excluded = nullptr);

class UtilityError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

double cell_utility(const OccupancyGrid& grid, std::size_t cell, const UtilityMode& mode, const Vec2d& query,
                    const std::optional<Vec2d>& goal);

double pose_utility(const OccupancyGrid& grid, const Pose2d& pose, const UtilityMode& mode,
                    const std::optional<Vec2d>& goal, const ViewConfig& view, const CellMask* excluded = nullptr);

struct HeadingChoice
{
    double theta = 0.0;  // wrapped to (-pi, pi]
    int index = 0;
    double utility = 0.0;
    VisibleCellSet covered;
};

/// Sum of entry utilities inside the wedge around `heading`, skipping excluded cells.
double wedge_utility(const VisibilityDisc& disc, double heading, double fov, const CellMask* excluded);

/// Exhaustive search over n_headings headings 2*pi*k/n; first maximum wins.
HeadingChoice optimal_heading(const OccupancyGrid& grid, const Vec2d& position, const UtilityMode& mode,
                              const std::optional<Vec2d>& goal, const ViewConfig& view,
                              const CellMask* excluded = nullptr);
HeadingChoice optimal_heading(const VisibilityDisc& disc, const Pose2d& source_hint, const ViewConfig& view,
                              const CellMask* excluded);

/// Discounted aggregation of per-waypoint utilities.
/// weighted_average: sum(k_i U_i)/sum(k_i); weighted_sum: sum(k_i U_i), k_i = exp(-rho d_i);
/// goal_only: last U; interpolated: plain sum.
double aggregate_path_utility(std::span<const double> utilities, std::span<const double> distances,
                              const AggregationMode& aggregation);

struct Waypoint
{
    Pose2d pose = Pose2d::Zero();
    double d = 0.0;  // cumulative path distance from the robot
    double utility = 0.0;
    VisibleCellSet covered;
};

/// Recomputes per-waypoint utilities from the waypoint headings, chaining the
/// frustum-overlap exclusion (except for goal_only and interpolated), then aggregates.
double path_utility(std::span<const Waypoint> waypoints, const OccupancyGrid& grid, const UtilityMode& mode,
                    const AggregationMode& aggregation, const std::optional<Vec2d>& goal, const ViewConfig& view);

}  // namespace aslam

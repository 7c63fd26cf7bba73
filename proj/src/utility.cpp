#include "aslam/utility.hpp"

#include "aslam/keyvalue.hpp"
#include "aslam/raycast.hpp"

#include <cmath>

namespace aslam
{

void UtilityMode::validate() const
{
    if (!(d_l > 0.0 && d_l < 1.0 && d_h > 0.0 && d_h < 1.0 && d_l < d_h))
        throw ConfigError("utility: need 0 < d_l < d_h < 1");
    if (!(kappa1 >= 0.0))
        throw ConfigError("utility: kappa1 must be nonnegative");
}

VisibilityDisc visibility_disc(const OccupancyGrid& grid, const Vec2d& position, double d_thr)
{
    const GridGeometry& g = grid.geometry();
    VisibilityDisc disc;
    disc.position = position;
    const CellIndex source = g.to_cell_unchecked(position);
    const int reach = static_cast<int>(std::ceil(d_thr / g.resolution())) + 1;
    const int x0 = std::max(0, source.x - reach);
    const int x1 = std::min(g.width() - 1, source.x + reach);
    const int y0 = std::max(0, source.y - reach);
    const int y1 = std::min(g.height() - 1, source.y + reach);
    const double d2 = d_thr * d_thr;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
        {
            const CellIndex c{x, y};
            if (c == source)
                continue;
            const Vec2d d = g.center(c) - position;
            if (d.squaredNorm() > d2)
                continue;
            const bool clear =
                walk_segment_interior(g, position, g.center(c), [&](CellIndex m) { return !grid.occludes(g.linear(m)); });
            if (clear)
                disc.entries.push_back({g.linear(c), std::atan2(d.y(), d.x()), 0.0});
        }
    return disc;
}

double cell_utility(const OccupancyGrid& grid, std::size_t cell, const UtilityMode& mode, const Vec2d& query,
                    const std::optional<Vec2d>& goal)
{
    const double entropy = grid.entropy(cell);
    const bool obstacle = grid.explored(cell) && grid.probability(cell) >= mode.p_thr;
    switch (mode.variant)
    {
    case UtilityVariant::u1:
        return entropy;
    case UtilityVariant::u2:
        return entropy + (obstacle ? mode.kappa1 : 0.0);
    case UtilityVariant::u3:
    {
        if (!goal)
            throw UtilityError("cell_utility: u3 needs a goal position");
        const double j = reobservation_weight((query - *goal).norm(), mode.d_l, mode.d_h);
        const double lambda = grid.explored(cell) ? j : 1.0 - j;
        return lambda * entropy + (obstacle ? mode.kappa1 : 0.0);
    }
    }
    return entropy;
}

void assign_utilities(VisibilityDisc& disc, const OccupancyGrid& grid, const UtilityMode& mode,
                      const std::optional<Vec2d>& goal)
{
    if (mode.variant == UtilityVariant::u3 && !goal)
        throw UtilityError("assign_utilities: u3 needs a goal position");
    for (auto& e : disc.entries)
        e.utility = cell_utility(grid, e.cell, mode, disc.position, goal);
}

VisibleCellSet visible_cells(const OccupancyGrid& grid, const Pose2d& pose, double fov, double d_thr,
                             const CellMask* excluded)
{
    const VisibilityDisc disc = visibility_disc(grid, pose.head<2>(), d_thr);
    VisibleCellSet out;
    out.source = pose;
    for (const auto& e : disc.entries)
    {
        if (std::abs(angle_diff(e.bearing, pose.z())) > 0.5 * fov)
            continue;
        if (excluded && excluded->contains(e.cell))
            continue;
        out.cells.push_back(e.cell);
    }
    std::sort(out.cells.begin(), out.cells.end());
    return out;
}

double wedge_utility(const VisibilityDisc& disc, double heading, double fov, const CellMask* excluded)
{
    double sum = 0.0;
    for (const auto& e : disc.entries)
    {
        if (std::abs(angle_diff(e.bearing, heading)) > 0.5 * fov)
            continue;
        if (excluded && excluded->contains(e.cell))
            continue;
        sum += e.utility;
    }
    return sum;
}

double pose_utility(const OccupancyGrid& grid, const Pose2d& pose, const UtilityMode& mode,
                    const std::optional<Vec2d>& goal, const ViewConfig& view, const CellMask* excluded)
{
    VisibilityDisc disc = visibility_disc(grid, pose.head<2>(), view.d_thr);
    assign_utilities(disc, grid, mode, goal);
    return wedge_utility(disc, pose.z(), view.fov, excluded);
}

HeadingChoice optimal_heading(const VisibilityDisc& disc, const Pose2d& source_hint, const ViewConfig& view,
                              const CellMask* excluded)
{
    if (view.n_headings < 1)
        throw UtilityError("optimal_heading: n_headings must be positive");
    HeadingChoice best;
    best.utility = -1.0;
    for (int k = 0; k < view.n_headings; ++k)
    {
        const double theta = wrap_angle(kTwoPi * k / view.n_headings);
        const double u = wedge_utility(disc, theta, view.fov, excluded);
        // relative tolerance so that summation order cannot break the index tie rule
        if (u > best.utility + 1e-9 * std::max(1.0, std::abs(best.utility)))
        {
            best.utility = u;
            best.index = k;
            best.theta = theta;
        }
    }
    best.covered.source = Pose2d(source_hint.x(), source_hint.y(), best.theta);
    for (const auto& e : disc.entries)
    {
        if (std::abs(angle_diff(e.bearing, best.theta)) > 0.5 * view.fov)
            continue;
        if (excluded && excluded->contains(e.cell))
            continue;
        best.covered.cells.push_back(e.cell);
    }
    std::sort(best.covered.cells.begin(), best.covered.cells.end());
    return best;
}

HeadingChoice optimal_heading(const OccupancyGrid& grid, const Vec2d& position, const UtilityMode& mode,
                              const std::optional<Vec2d>& goal, const ViewConfig& view, const CellMask* excluded)
{
    VisibilityDisc disc = visibility_disc(grid, position, view.d_thr);
    assign_utilities(disc, grid, mode, goal);
    return optimal_heading(disc, Pose2d(position.x(), position.y(), 0.0), view, excluded);
}

double aggregate_path_utility(std::span<const double> utilities, std::span<const double> distances,
                              const AggregationMode& aggregation)
{
    if (utilities.empty())
        throw UtilityError("aggregate_path_utility: no waypoints");
    if (utilities.size() != distances.size())
        throw UtilityError("aggregate_path_utility: size mismatch");
    switch (aggregation.kind)
    {
    case AggregationKind::goal_only:
        return utilities.back();
    case AggregationKind::interpolated:
    {
        double sum = 0.0;
        for (const double u : utilities)
            sum += u;
        return sum;
    }
    case AggregationKind::weighted_average:
    case AggregationKind::weighted_sum:
    {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < utilities.size(); ++i)
        {
            const double k = std::exp(-aggregation.rho * distances[i]);
            num += k * utilities[i];
            den += k;
        }
        return aggregation.kind == AggregationKind::weighted_sum ? num : num / den;
    }
    }
    return 0.0;
}

double path_utility(std::span<const Waypoint> waypoints, const OccupancyGrid& grid, const UtilityMode& mode,
                    const AggregationMode& aggregation, const std::optional<Vec2d>& goal, const ViewConfig& view)
{
    if (waypoints.empty())
        throw UtilityError("path_utility: no waypoints");
    std::vector<double> u;
    std::vector<double> d;
    if (aggregation.kind == AggregationKind::goal_only)
    {
        const Waypoint& last = waypoints.back();
        return pose_utility(grid, last.pose, mode, goal, view, nullptr);
    }
    const bool chain = aggregation.kind != AggregationKind::interpolated;
    CellMask excluded(grid.geometry().size());
    for (const Waypoint& w : waypoints)
    {
        VisibilityDisc disc = visibility_disc(grid, w.pose.head<2>(), view.d_thr);
        assign_utilities(disc, grid, mode, goal);
        const CellMask* ex = chain ? &excluded : nullptr;
        u.push_back(wedge_utility(disc, w.pose.z(), view.fov, ex));
        d.push_back(w.d);
        if (chain)
            for (const auto& e : disc.entries)
                if (std::abs(angle_diff(e.bearing, w.pose.z())) <= 0.5 * view.fov)
                    excluded.insert(e.cell);
    }
    return aggregate_path_utility(u, d, aggregation);
}

}  // namespace aslam

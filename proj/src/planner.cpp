#include "aslam/planner.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

namespace aslam
{

Traversability::Traversability(const OccupancyGrid& grid, const PlannerConfig& config, std::optional<CellIndex> start)
    : geometry_(grid.geometry()), unknown_cost_(config.unknown_cost)
{
    const GridGeometry& g = geometry_;
    const std::size_t n = g.size();
    blocked_.assign(n, 0);
    inflated_.assign(n, 0);
    unknown_.assign(n, 0);
    const double res = g.resolution();
    const double radius = config.inflation_radius(res);
    const int reach = static_cast<int>(std::ceil(radius / res));
    std::vector<CellIndex> stencil;
    for (int dy = -reach; dy <= reach; ++dy)
        for (int dx = -reach; dx <= reach; ++dx)
            if (res * std::hypot(dx, dy) <= radius + 1e-9)
                stencil.push_back({dx, dy});

    for (std::size_t i = 0; i < n; ++i)
    {
        if (!grid.explored(i))
            unknown_[i] = 1;
        if (!grid.is_occupied(i))
            continue;
        const CellIndex c = g.cell(i);
        for (const CellIndex& s : stencil)
        {
            const CellIndex m{c.x + s.x, c.y + s.y};
            if (g.contains(m))
                inflated_[g.linear(m)] = 1;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        blocked_[i] = inflated_[i];
    if (start && g.contains(*start))
    {
        for (const CellIndex& s : stencil)
        {
            const CellIndex m{start->x + s.x, start->y + s.y};
            if (g.contains(m) && !grid.is_occupied(g.linear(m)))
                blocked_[g.linear(m)] = 0;
        }
    }
}

double PathCost::value(double resolution, double unknown_cost) const
{
    const double diag = std::numbers::sqrt2;
    return resolution * ((straight_known + diag * diagonal_known) +
                         unknown_cost * (straight_unknown + diag * diagonal_unknown));
}

void PathCost::add(bool diagonal, bool into_unknown)
{
    if (diagonal)
        ++(into_unknown ? diagonal_unknown : diagonal_known);
    else
        ++(into_unknown ? straight_unknown : straight_known);
}

CellPath astar(const Traversability& trav, CellIndex start, CellIndex goal)
{
    const GridGeometry& g = trav.geometry();
    if (!g.contains(start) || !g.contains(goal))
        throw UnreachableError("astar: start or goal outside the grid");
    if (!trav.passable(goal))
        throw UnreachableError("astar: goal cell is blocked");
    const double res = g.resolution();
    const std::size_t n = g.size();
    const std::size_t s = g.linear(start);
    const std::size_t t = g.linear(goal);

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cost(n, inf);
    std::vector<std::size_t> parent(n, n);
    std::vector<std::uint8_t> closed(n, 0);
    auto heuristic = [&](CellIndex c) { return res * std::hypot(c.x - goal.x, c.y - goal.y); };

    struct Item
    {
        double f;
        double g;
        std::size_t cell;
        bool operator>(const Item& o) const
        {
            if (f != o.f)
                return f > o.f;
            return cell > o.cell;
        }
    };
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    cost[s] = 0.0;
    open.push({heuristic(start), 0.0, s});
    while (!open.empty())
    {
        const Item top = open.top();
        open.pop();
        if (closed[top.cell])
            continue;
        closed[top.cell] = 1;
        if (top.cell == t)
            break;
        const CellIndex c = g.cell(top.cell);
        trav.for_each_move(c, [&](CellIndex m, bool diagonal) {
            const std::size_t j = g.linear(m);
            if (closed[j])
                return;
            const double step = res * (diagonal ? std::numbers::sqrt2 : 1.0) * (trav.unknown(j) ? trav.unknown_cost() : 1.0);
            const double candidate = cost[top.cell] + step;
            if (candidate < cost[j])
            {
                cost[j] = candidate;
                parent[j] = top.cell;
                open.push({candidate + heuristic(m), candidate, j});
            }
        });
    }
    if (!closed[t])
        throw UnreachableError("astar: no path to goal");

    CellPath path;
    for (std::size_t c = t; c != n; c = parent[c])
    {
        path.cells.push_back(g.cell(c));
        if (c == s)
            break;
    }
    std::reverse(path.cells.begin(), path.cells.end());
    for (std::size_t k = 1; k < path.cells.size(); ++k)
    {
        const CellIndex a = path.cells[k - 1];
        const CellIndex b = path.cells[k];
        path.moves.add(a.x != b.x && a.y != b.y, trav.unknown(g.linear(b)));
    }
    path.cost = path.moves.value(res, trav.unknown_cost());
    return path;
}

CellPath astar(const OccupancyGrid& grid, CellIndex start, CellIndex goal, const PlannerConfig& config)
{
    return astar(Traversability(grid, config, start), start, goal);
}

std::vector<std::uint8_t> reachable_mask(const Traversability& trav, CellIndex start)
{
    const GridGeometry& g = trav.geometry();
    std::vector<std::uint8_t> seen(g.size(), 0);
    if (!g.contains(start))
        return seen;
    std::queue<CellIndex> q;
    seen[g.linear(start)] = 1;
    q.push(start);
    while (!q.empty())
    {
        const CellIndex c = q.front();
        q.pop();
        trav.for_each_move(c, [&](CellIndex m, bool) {
            const std::size_t j = g.linear(m);
            if (!seen[j])
            {
                seen[j] = 1;
                q.push(m);
            }
        });
    }
    return seen;
}

std::vector<Waypoint> reduce_to_waypoints(const CellPath& path, const GridGeometry& geometry, const Pose2d& robot,
                                          double spacing)
{
    if (path.cells.empty())
        throw std::invalid_argument("reduce_to_waypoints: empty path");
    if (!(spacing > 0.0))
        throw std::invalid_argument("reduce_to_waypoints: spacing must be positive");

    std::vector<Vec2d> polyline;
    polyline.push_back(robot.head<2>());
    for (std::size_t k = 1; k + 1 < path.cells.size(); ++k)
        polyline.push_back(geometry.center(path.cells[k]));
    const Vec2d goal = geometry.center(path.cells.back());
    if ((goal - robot.head<2>()).norm() > 1e-9)
        polyline.push_back(goal);

    std::vector<Waypoint> out;
    Waypoint first;
    first.pose = robot;
    out.push_back(first);
    double travelled = 0.0;
    double next_mark = spacing;
    const double merge = 0.5 * geometry.resolution();
    for (std::size_t k = 1; k < polyline.size(); ++k)
    {
        const Vec2d a = polyline[k - 1];
        const Vec2d b = polyline[k];
        const double len = (b - a).norm();
        while (len > 0.0 && travelled + len >= next_mark - 1e-12)
        {
            const double along = next_mark - travelled;
            const Vec2d p = a + (b - a) * (along / len);
            Waypoint w;
            w.pose << p, 0.0;
            w.d = next_mark;
            out.push_back(w);
            next_mark += spacing;
        }
        travelled += len;
    }
    if (polyline.size() > 1)
    {
        // the goal closes the list; a sample within half a cell of it is replaced
        if (out.size() > 1 && travelled - out.back().d < merge)
            out.pop_back();
        Waypoint last;
        last.pose << polyline.back(), 0.0;
        last.d = travelled;
        out.push_back(last);
    }
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        if (out.size() == 1)
        {
            out[i].pose.z() = robot.z();
            break;
        }
        const Vec2d dir = i == 0 ? Vec2d(out[1].pose.head<2>() - out[0].pose.head<2>())
                                 : Vec2d(out[i].pose.head<2>() - out[i - 1].pose.head<2>());
        out[i].pose.z() = wrap_angle(std::atan2(dir.y(), dir.x()));
    }
    return out;
}

namespace
{

VisibilityDisc disc_with_utilities(const OccupancyGrid& grid, const Vec2d& position, const PathScoring& scoring,
                                   const std::optional<Vec2d>& goal, const ViewConfig& view)
{
    VisibilityDisc disc = visibility_disc(grid, position, view.d_thr);
    assign_utilities(disc, grid, scoring.utility, goal);
    return disc;
}

void fill_covered(Waypoint& w, const VisibilityDisc& disc, const ViewConfig& view, const CellMask* excluded)
{
    w.covered.source = w.pose;
    w.covered.cells.clear();
    for (const auto& e : disc.entries)
        if (std::abs(angle_diff(e.bearing, w.pose.z())) <= 0.5 * view.fov && !(excluded && excluded->contains(e.cell)))
            w.covered.cells.push_back(e.cell);
    std::sort(w.covered.cells.begin(), w.covered.cells.end());
}

}  // namespace

double score_waypoints(std::vector<Waypoint>& waypoints, const OccupancyGrid& grid, const PathScoring& scoring,
                       const ViewConfig& view)
{
    if (waypoints.empty())
        throw std::invalid_argument("score_waypoints: no waypoints");
    const std::optional<Vec2d> goal = waypoints.back().pose.head<2>();
    const std::size_t n = waypoints.size();
    std::vector<double> u(n, 0.0);
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        d[i] = waypoints[i].d;

    switch (scoring.aggregation.kind)
    {
    case AggregationKind::weighted_average:
    case AggregationKind::weighted_sum:
    {
        CellMask excluded(grid.geometry().size());
        for (std::size_t i = 0; i < n; ++i)
        {
            Waypoint& w = waypoints[i];
            const VisibilityDisc disc = disc_with_utilities(grid, w.pose.head<2>(), scoring, goal, view);
            if (scoring.optimize_intermediate)
            {
                HeadingChoice best = optimal_heading(disc, w.pose, view, &excluded);
                w.pose.z() = best.theta;
                w.covered = std::move(best.covered);
                w.utility = best.utility;
            }
            else
            {
                w.utility = wedge_utility(disc, w.pose.z(), view.fov, &excluded);
                fill_covered(w, disc, view, &excluded);
            }
            excluded.insert_all(w.covered.cells);
            u[i] = w.utility;
        }
        break;
    }
    case AggregationKind::goal_only:
    {
        CellMask excluded(grid.geometry().size());
        for (std::size_t i = 0; i < n; ++i)
        {
            Waypoint& w = waypoints[i];
            const VisibilityDisc disc = disc_with_utilities(grid, w.pose.head<2>(), scoring, goal, view);
            if (i + 1 == n)
            {
                HeadingChoice best = optimal_heading(disc, w.pose, view, nullptr);
                w.pose.z() = best.theta;
                w.covered = std::move(best.covered);
                w.utility = best.utility;
            }
            else if (scoring.optimize_intermediate)
            {
                HeadingChoice best = optimal_heading(disc, w.pose, view, &excluded);
                w.pose.z() = best.theta;
                w.covered = std::move(best.covered);
                w.utility = best.utility;
                excluded.insert_all(w.covered.cells);
            }
            else
            {
                w.utility = wedge_utility(disc, w.pose.z(), view.fov, nullptr);
                fill_covered(w, disc, view, nullptr);
            }
            u[i] = w.utility;
        }
        break;
    }
    case AggregationKind::interpolated:
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            Waypoint& w = waypoints[i];
            const VisibilityDisc disc = disc_with_utilities(grid, w.pose.head<2>(), scoring, goal, view);
            w.utility = wedge_utility(disc, w.pose.z(), view.fov, nullptr);
            fill_covered(w, disc, view, nullptr);
            u[i] = w.utility;
        }
        break;
    }
    }
    return aggregate_path_utility(u, d, scoring.aggregation);
}

PlanResult plan_informative_path(const OccupancyGrid& grid, const Pose2d& robot, const std::vector<Vec2d>& candidates,
                                 const PathScoring& scoring, const ViewConfig& view, const PlannerConfig& config)
{
    if (candidates.empty())
        throw UnreachableError("plan_informative_path: no candidates");
    const GridGeometry& g = grid.geometry();
    const auto start = g.to_cell(robot.head<2>());
    if (!start)
        throw UnreachableError("plan_informative_path: robot outside the grid");
    const Traversability trav(grid, config, *start);

    std::optional<PlanResult> best;
    for (std::size_t k = 0; k < candidates.size(); ++k)
    {
        const auto goal_cell = g.to_cell(candidates[k]);
        if (!goal_cell)
            continue;
        CellPath path;
        try
        {
            path = astar(trav, *start, *goal_cell);
        }
        catch (const UnreachableError&)
        {
            continue;
        }
        PlanResult r;
        r.candidate = k;
        r.goal = g.center(*goal_cell);
        r.waypoints = reduce_to_waypoints(path, g, robot, config.waypoint_spacing);
        r.utility = score_waypoints(r.waypoints, grid, scoring, view);
        r.path = std::move(path);
        if (!best || r.utility > best->utility)
            best = std::move(r);
    }
    if (!best)
        throw UnreachableError("plan_informative_path: every candidate is unreachable");
    return std::move(*best);
}

}  // namespace aslam

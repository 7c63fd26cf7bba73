#include "aslam/frontier.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace aslam
{

bool is_frontier_cell(const OccupancyGrid& grid, CellIndex c, double robot_radius)
{
    const GridGeometry& g = grid.geometry();
    if (!g.contains(c) || grid.classify(c) != CellClass::free)
        return false;
    bool borders_unknown = false;
    for (int dy = -1; dy <= 1 && !borders_unknown; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
        {
            const CellIndex n{c.x + dx, c.y + dy};
            if ((dx != 0 || dy != 0) && g.contains(n) && grid.classify(n) == CellClass::unknown)
            {
                borders_unknown = true;
                break;
            }
        }
    if (!borders_unknown)
        return false;
    const double res = g.resolution();
    const int reach = static_cast<int>(std::ceil(robot_radius / res));
    for (int dy = -reach; dy <= reach; ++dy)
        for (int dx = -reach; dx <= reach; ++dx)
        {
            const CellIndex n{c.x + dx, c.y + dy};
            if (g.contains(n) && res * std::hypot(dx, dy) <= robot_radius + 1e-9 &&
                grid.classify(n) == CellClass::occupied)
                return false;
        }
    return true;
}

std::vector<FrontierCluster> extract_frontiers(const OccupancyGrid& grid, const Vec2d& robot_position,
                                               const FrontierConfig& config)
{
    const GridGeometry& g = grid.geometry();
    std::vector<std::uint8_t> frontier(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i)
        frontier[i] = is_frontier_cell(grid, g.cell(i), config.robot_radius) ? 1 : 0;

    const int min_cells = config.min_cluster_cells(g.resolution());
    std::vector<std::uint8_t> seen(g.size(), 0);
    std::vector<std::pair<std::size_t, FrontierCluster>> found;
    for (std::size_t i = 0; i < g.size(); ++i)
    {
        if (!frontier[i] || seen[i])
            continue;
        FrontierCluster cluster;
        std::queue<CellIndex> q;
        q.push(g.cell(i));
        seen[i] = 1;
        while (!q.empty())
        {
            const CellIndex c = q.front();
            q.pop();
            cluster.cells.push_back(c);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                {
                    const CellIndex n{c.x + dx, c.y + dy};
                    if (!g.contains(n))
                        continue;
                    const std::size_t j = g.linear(n);
                    if (frontier[j] && !seen[j])
                    {
                        seen[j] = 1;
                        q.push(n);
                    }
                }
        }
        if (static_cast<int>(cluster.cells.size()) < min_cells)
            continue;
        Vec2d sum = Vec2d::Zero();
        for (const CellIndex& c : cluster.cells)
            sum += g.center(c);
        cluster.centroid = sum / static_cast<double>(cluster.cells.size());
        found.emplace_back(i, std::move(cluster));
    }
    std::stable_sort(found.begin(), found.end(), [&](const auto& a, const auto& b) {
        return (a.second.centroid - robot_position).squaredNorm() < (b.second.centroid - robot_position).squaredNorm();
    });
    std::vector<FrontierCluster> out;
    out.reserve(found.size());
    for (auto& f : found)
        out.push_back(std::move(f.second));
    return out;
}

std::vector<Vec2d> candidate_goals(std::span<const FrontierCluster> clusters, const OccupancyGrid& grid,
                                   const Vec2d& robot_position, const std::optional<Vec2d>& previous_goal,
                                   const FrontierConfig& config, const PlannerConfig& planner)
{
    std::vector<Vec2d> goals;
    const GridGeometry& g = grid.geometry();
    const auto start = g.to_cell(robot_position);
    if (!start || clusters.empty())
        return goals;
    const Traversability trav(grid, planner, *start);
    const std::vector<std::uint8_t> reachable = reachable_mask(trav, *start);
    auto usable = [&](CellIndex c) {
        return g.contains(c) && reachable[g.linear(c)] && grid.classify(c) == CellClass::free;
    };

    for (const FrontierCluster& cluster : clusters)
    {
        std::optional<CellIndex> goal;
        const CellIndex centroid_cell = g.to_cell_unchecked(cluster.centroid);
        if (usable(centroid_cell))
            goal = centroid_cell;
        else
        {
            // greedy search: nearest reachable member of this cluster
            std::vector<CellIndex> members = cluster.cells;
            std::stable_sort(members.begin(), members.end(), [&](CellIndex a, CellIndex b) {
                const double da = (g.center(a) - cluster.centroid).squaredNorm();
                const double db = (g.center(b) - cluster.centroid).squaredNorm();
                if (da != db)
                    return da < db;
                return g.linear(a) < g.linear(b);
            });
            for (const CellIndex& m : members)
                if (usable(m))
                {
                    goal = m;
                    break;
                }
        }
        if (!goal)
            continue;
        const Vec2d p = g.center(*goal);
        if (previous_goal && (p - *previous_goal).norm() <= config.goal_merge_cells * g.resolution() + 1e-9)
            continue;
        goals.push_back(p);
    }
    return goals;
}

FallbackAction fallback_action(std::span<const Pose2d> graph_nodes, std::mt19937_64& rng)
{
    FallbackAction a;
    if (graph_nodes.empty())
        return a;
    std::uniform_int_distribution<std::size_t> pick(0, graph_nodes.size() - 1);
    a.kind = FallbackAction::Kind::goto_node;
    a.node = pick(rng);
    a.target = graph_nodes[a.node].head<2>();
    return a;
}

}  // namespace aslam

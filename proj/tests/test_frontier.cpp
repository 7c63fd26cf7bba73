#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace aslam;

namespace
{

// mark, connect (union-find), filter
std::set<std::vector<std::size_t>> brute_clusters(const OccupancyGrid& grid, double robot_radius, int min_cells)
{
    const GridGeometry& g = grid.geometry();
    const double res = g.resolution();
    std::vector<std::uint8_t> mark(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i)
    {
        if (grid.classify(i) != CellClass::free)
            continue;
        const CellIndex c = g.cell(i);
        bool unknown = false;
        bool near_obstacle = false;
        for (std::size_t j = 0; j < g.size(); ++j)
        {
            const CellIndex n = g.cell(j);
            const int dx = n.x - c.x;
            const int dy = n.y - c.y;
            if (j != i && std::abs(dx) <= 1 && std::abs(dy) <= 1 && grid.classify(j) == CellClass::unknown)
                unknown = true;
            if (grid.classify(j) == CellClass::occupied && res * std::sqrt(double(dx * dx + dy * dy)) <= robot_radius + 1e-9)
                near_obstacle = true;
        }
        mark[i] = unknown && !near_obstacle;
    }
    std::vector<std::size_t> parent(g.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j)
        {
            if (!mark[i] || !mark[j])
                continue;
            const CellIndex a = g.cell(i);
            const CellIndex b = g.cell(j);
            if (std::abs(a.x - b.x) <= 1 && std::abs(a.y - b.y) <= 1)
                parent[find(i)] = find(j);
        }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (mark[i])
            groups[find(i)].push_back(i);
    std::set<std::vector<std::size_t>> out;
    for (auto& [root, cells] : groups)
        if (static_cast<int>(cells.size()) >= min_cells)
            out.insert(cells);
    return out;
}

std::set<std::vector<std::size_t>> as_sets(const std::vector<FrontierCluster>& clusters, const GridGeometry& g)
{
    std::set<std::vector<std::size_t>> out;
    for (const auto& c : clusters)
    {
        std::vector<std::size_t> cells;
        for (const CellIndex& m : c.cells)
            cells.push_back(g.linear(m));
        std::sort(cells.begin(), cells.end());
        out.insert(cells);
    }
    return out;
}

}  // namespace

TEST_CASE("half-explored room has one frontier")
{
    auto rows = test::box_rows(30, 20);
    for (int r = 1; r < 19; ++r)
        for (int c = 15; c < 29; ++c)
            rows[r][c] = '?';
    for (int r = 0; r < 20; ++r)
        rows[r][29] = rows[r][28] = '?';
    for (int c = 15; c < 30; ++c)
        rows[0][c] = rows[19][c] = '?';
    const OccupancyGrid grid = test::grid_from_ascii(rows);
    const auto clusters = extract_frontiers(grid, Vec2d(0.5, 1.0), FrontierConfig{});
    REQUIRE(clusters.size() == 1);
    for (const CellIndex& c : clusters[0].cells)
        CHECK(c.x == 14);

    const OccupancyGrid done = test::grid_from_ascii(test::box_rows(30, 20));
    CHECK(extract_frontiers(done, Vec2d(0.5, 1.0), FrontierConfig{}).empty());
}

TEST_CASE("two rooms with unexplored doors give two clusters")
{
    // two explored rooms stacked vertically; each has a door in its east wall leading into unknown space
    std::vector<std::string> rows(25, std::string(40, '?'));
    auto room = [&](int top) {
        for (int r = top; r < top + 10; ++r)
            for (int c = 0; c < 15; ++c)
                rows[r][c] = (r == top || r == top + 9 || c == 0 || c == 14) ? '#' : '.';
        for (int r = top + 3; r < top + 7; ++r)
            rows[r][14] = '.';
    };
    room(0);
    room(14);
    const OccupancyGrid grid = test::grid_from_ascii(rows);
    FrontierConfig cfg;
    cfg.robot_radius = 0.1;
    const auto clusters = extract_frontiers(grid, Vec2d(0.5, 0.5), cfg);
    CHECK(clusters.size() == 2);
    CHECK(as_sets(clusters, grid.geometry()) == brute_clusters(grid, cfg.robot_radius, cfg.min_cluster_cells(0.1)));
}

TEST_CASE("frontiers match the three-pass oracle on partially explored bundled worlds")
{
    for (const std::string name : {"toy_room", "loop"})
    {
        const WorldModel world = load_world(resolve_world(name, default_worlds_dir()));
        OccupancyGrid grid(world.truth.geometry);
        Pose2d pose = world.start;
        for (int k = 0; k < 8; ++k)
        {
            pose.z() = k * kPi / 4;
            update_from_scan(grid, pose, depth_scan(world, pose, SensorConfig{}));
        }
        const FrontierConfig cfg;
        const auto clusters = extract_frontiers(grid, world.start.head<2>(), cfg);
        CHECK_FALSE(clusters.empty());
        CHECK(as_sets(clusters, grid.geometry()) == brute_clusters(grid, cfg.robot_radius, cfg.min_cluster_cells(0.1)));
        // ordered by centroid distance to the robot
        for (std::size_t k = 1; k < clusters.size(); ++k)
            CHECK((clusters[k - 1].centroid - world.start.head<2>()).norm() <=
                  (clusters[k].centroid - world.start.head<2>()).norm());

        const PlannerConfig planner;
        const auto goals = candidate_goals(clusters, grid, world.start.head<2>(), std::nullopt, cfg, planner);
        CHECK_FALSE(goals.empty());
        for (const Vec2d& goal : goals)
        {
            const CellPath p = astar(grid, *grid.geometry().to_cell(world.start.head<2>()),
                                     *grid.geometry().to_cell(goal), planner);
            CHECK_FALSE(p.cells.empty());
        }
    }
}

TEST_CASE("candidate goals")
{
    // frontier arc around a concave unknown pocket: the centroid falls into unknown space
    std::vector<std::string> rows(30, std::string(30, '.'));
    for (int r = 5; r < 25; ++r)
        for (int c = 10; c < 30; ++c)
            if ((r - 15) * (r - 15) + (c - 29) * (c - 29) <= 100)
                rows[r][c] = '?';
    const OccupancyGrid grid = test::grid_from_ascii(rows);
    const FrontierConfig cfg;
    const PlannerConfig planner;
    const auto clusters = extract_frontiers(grid, Vec2d(0.5, 1.5), cfg);
    REQUIRE(clusters.size() == 1);
    CHECK(grid.classify(*grid.geometry().to_cell(clusters[0].centroid)) == CellClass::unknown);
    const auto goals = candidate_goals(clusters, grid, Vec2d(0.5, 1.5), std::nullopt, cfg, planner);
    REQUIRE(goals.size() == 1);
    // nearest member to the centroid
    double best = 1e9;
    for (const CellIndex& c : clusters[0].cells)
        best = std::min(best, (grid.geometry().center(c) - clusters[0].centroid).norm());
    CHECK((goals[0] - clusters[0].centroid).norm() == doctest::Approx(best));
    CHECK(grid.classify(*grid.geometry().to_cell(goals[0])) == CellClass::free);

    // the previous goal is dropped
    CHECK(candidate_goals(clusters, grid, Vec2d(0.5, 1.5), goals[0], cfg, planner).empty());
    CHECK(candidate_goals(clusters, grid, Vec2d(0.5, 1.5), goals[0] + Vec2d(0.3, 0.0), cfg, planner).size() == 1);

    // sealed robot: nothing reachable
    auto sealed = rows;
    for (int r = 0; r < 30; ++r)
        sealed[r][5] = '#';
    const OccupancyGrid boxed = test::grid_from_ascii(sealed);
    const auto c2 = extract_frontiers(boxed, Vec2d(0.15, 1.5), cfg);
    CHECK(candidate_goals(c2, boxed, Vec2d(0.15, 1.5), std::nullopt, cfg, planner).empty());
}

TEST_CASE("no frontier cell lies within the robot radius of an obstacle")
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial)
    {
        auto rows = test::random_rows(30, 30, 0.05, rng);
        for (int r = 0; r < 30; ++r)
            for (int c = 15; c < 30; ++c)
                rows[r][c] = '?';
        const OccupancyGrid grid = test::grid_from_ascii(rows);
        const FrontierConfig cfg;
        const GridGeometry& g = grid.geometry();
        for (const auto& cluster : extract_frontiers(grid, Vec2d(0.5, 0.5), cfg))
            for (const CellIndex& c : cluster.cells)
                for (std::size_t j = 0; j < g.size(); ++j)
                    if (grid.classify(j) == CellClass::occupied)
                        CHECK((g.center(j) - g.center(c)).norm() > cfg.robot_radius);
    }
}

TEST_CASE("fallback action")
{
    std::mt19937_64 rng(1);
    CHECK(fallback_action(std::vector<Pose2d>{}, rng).kind == FallbackAction::Kind::rotate_in_place_360);

    std::vector<Pose2d> nodes;
    for (int k = 0; k < 5; ++k)
        nodes.emplace_back(k, 0.0, 0.0);
    std::vector<int> hits(5, 0);
    for (std::uint64_t seed = 0; seed < 5000; ++seed)
    {
        std::mt19937_64 a(seed);
        std::mt19937_64 b(seed);
        const FallbackAction fa = fallback_action(nodes, a);
        const FallbackAction fb = fallback_action(nodes, b);
        CHECK(fa.kind == FallbackAction::Kind::goto_node);
        CHECK(fa.node == fb.node);
        CHECK(fa.target == nodes[fa.node].head<2>());
        ++hits[fa.node];
    }
    for (const int h : hits)
        CHECK(std::abs(h - 1000) < 150);
}

#pragma once

#include "aslam/experiments.hpp"

#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <vector>

namespace aslam::test
{

/// Rows are listed top (max y) first. '#' occupied, '.' free, '?' unknown.
inline GridGeometry geometry_of(const std::vector<std::string>& rows, double res = 0.1)
{
    return GridGeometry(static_cast<int>(rows.front().size()), static_cast<int>(rows.size()), res);
}

inline OccupancyGrid grid_from_ascii(const std::vector<std::string>& rows, double res = 0.1)
{
    OccupancyGrid grid(geometry_of(rows, res));
    const int h = static_cast<int>(rows.size());
    for (int r = 0; r < h; ++r)
        for (int x = 0; x < static_cast<int>(rows[r].size()); ++x)
        {
            const std::size_t i = grid.geometry().linear({x, h - 1 - r});
            if (rows[r][x] == '#')
                grid.update_cell(i, 10.0);
            else if (rows[r][x] == '.')
                grid.update_cell(i, -10.0);
        }
    return grid;
}

inline GroundTruthMap truth_from_ascii(const std::vector<std::string>& rows, double res = 0.1)
{
    GroundTruthMap t;
    t.geometry = geometry_of(rows, res);
    t.classes.assign(t.geometry.size(), CellClass::free);
    t.hidden.assign(t.geometry.size(), 0);
    const int h = static_cast<int>(rows.size());
    for (int r = 0; r < h; ++r)
        for (int x = 0; x < static_cast<int>(rows[r].size()); ++x)
            if (rows[r][x] == '#')
                t.classes[t.geometry.linear({x, h - 1 - r})] = CellClass::occupied;
    return t;
}

inline WorldModel world_from_ascii(const std::vector<std::string>& rows, const Pose2d& start, double res = 0.1)
{
    WorldModel w;
    w.name = "test";
    w.truth = truth_from_ascii(rows, res);
    w.start = start;
    w.true_pose = start;
    return w;
}

/// Empty room of w x h cells with a one-cell wall border.
inline std::vector<std::string> box_rows(int w, int h)
{
    std::vector<std::string> rows(h, std::string(w, '.'));
    rows.front() = rows.back() = std::string(w, '#');
    for (auto& r : rows)
        r.front() = r.back() = '#';
    return rows;
}

/// Random map with roughly `density` occupied cells, everything else free.
inline std::vector<std::string> random_rows(int w, int h, double density, std::mt19937_64& rng)
{
    std::bernoulli_distribution occ(density);
    std::vector<std::string> rows(h, std::string(w, '.'));
    for (auto& r : rows)
        for (char& c : r)
            c = occ(rng) ? '#' : '.';
    return rows;
}

/// Segment against axis-aligned square, positive-length overlap only (slab test).
inline bool segment_crosses_square(const Vec2d& a, const Vec2d& b, const Vec2d& lo, const Vec2d& hi)
{
    double t0 = 0.0;
    double t1 = 1.0;
    const Vec2d d = b - a;
    for (int k = 0; k < 2; ++k)
    {
        if (std::abs(d[k]) < 1e-15)
        {
            if (a[k] <= lo[k] || a[k] >= hi[k])
                return false;
            continue;
        }
        double ta = (lo[k] - a[k]) / d[k];
        double tb = (hi[k] - a[k]) / d[k];
        if (ta > tb)
            std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return (t1 - t0) * d.norm() > 1e-9;
}

// Cells whose centre is in range and wedge, with no occluding square crossed by
// the segment from the position to the centre (source and target cells aside).
inline std::vector<std::size_t> brute_visible(const OccupancyGrid& grid, const Pose2d& pose, double fov, double d_thr)
{
    const GridGeometry& g = grid.geometry();
    const CellIndex src = g.to_cell_unchecked(pose.head<2>());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < g.size(); ++i)
    {
        const CellIndex c = g.cell(i);
        if (c == src)
            continue;
        const Vec2d d = g.center(c) - pose.head<2>();
        if (d.norm() > d_thr)
            continue;
        if (std::abs(angle_diff(std::atan2(d.y(), d.x()), pose.z())) > 0.5 * fov)
            continue;
        bool clear = true;
        for (std::size_t j = 0; j < g.size() && clear; ++j)
        {
            if (j == i || g.cell(j) == src)
                continue;
            if (!(grid.explored(j) && grid.probability(j) > 0.7))
                continue;
            const CellIndex m = g.cell(j);
            const Vec2d lo = g.origin() + g.resolution() * Vec2d(m.x, m.y);
            clear = !segment_crosses_square(pose.head<2>(), g.center(c), lo, lo + Vec2d::Constant(g.resolution()));
        }
        if (clear)
            out.push_back(i);
    }
    return out;
}

/// Five constructed 20 x 20 maps for visibility checks.
inline std::vector<std::string> visibility_rows(int which)
{
    std::vector<std::string> rows(20, std::string(20, '?'));
    switch (which)
    {
    case 0:  // open, unknown
        break;
    case 1:  // vertical wall with a gap
        for (int r = 0; r < 20; ++r)
            if (r < 8 || r > 10)
                rows[r][12] = '#';
        break;
    case 2:  // pillars
        for (int r = 2; r < 20; r += 4)
            for (int c = 3; c < 20; c += 4)
                rows[r][c] = '#';
        break;
    case 3:  // room with free interior and a door
        rows = box_rows(20, 20);
        for (int r = 8; r < 12; ++r)
            rows[r][19] = '?';
        for (int r = 4; r < 16; ++r)
            rows[r][10] = r == 9 ? '.' : '#';
        break;
    case 4:  // diagonal wall and mixed classes
        for (int k = 0; k < 20; ++k)
        {
            rows[k][k] = '#';
            if (k + 1 < 20)
                rows[k][k + 1] = k % 3 == 0 ? '.' : '#';
        }
        for (int r = 12; r < 20; ++r)
            for (int c = 0; c < 6; ++c)
                rows[r][c] = '.';
        break;
    }
    return rows;
}

// Plain Dijkstra over 8-connected moves without corner cutting.
inline double dijkstra_cost(const Traversability& trav, CellIndex start, CellIndex goal, double res, double unknown_cost)
{
    const GridGeometry& g = trav.geometry();
    std::vector<double> dist(g.size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    dist[g.linear(start)] = 0.0;
    open.push({0.0, g.linear(start)});
    while (!open.empty())
    {
        const auto [d, i] = open.top();
        open.pop();
        if (d > dist[i])
            continue;
        const CellIndex c = g.cell(i);
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
            {
                if (dx == 0 && dy == 0)
                    continue;
                const CellIndex n{c.x + dx, c.y + dy};
                if (!trav.passable(n))
                    continue;
                if (dx != 0 && dy != 0 && (!trav.passable(CellIndex{c.x + dx, c.y}) || !trav.passable(CellIndex{c.x, c.y + dy})))
                    continue;
                const std::size_t j = g.linear(n);
                double step = (dx != 0 && dy != 0) ? std::sqrt(2.0) * res : res;
                if (trav.unknown(j))
                    step *= unknown_cost;
                if (d + step < dist[j])
                {
                    dist[j] = d + step;
                    open.push({dist[j], j});
                }
            }
    }
    return dist[g.linear(goal)];
}

}  // namespace aslam::test

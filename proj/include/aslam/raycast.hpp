#pragma once

#include "aslam/grid_map.hpp"

#include <cmath>
#include <limits>

namespace aslam
{

/// Grid line-stepping (Amanatides-Woo). Calls visit(cell, t_enter, t_exit) for
/// every cell crossed by the ray origin + t*dir, t in [0, max_t], starting with
/// the origin cell. `dir` must be unit length. Stops when the visitor returns
/// false or the ray leaves the grid.
template <typename Visitor>
void traverse_ray(const GridGeometry& g, const Vec2d& origin, const Vec2d& dir, double max_t, Visitor&& visit)
{
    const double res = g.resolution();
    const double gx = (origin.x() - g.origin().x()) / res;
    const double gy = (origin.y() - g.origin().y()) / res;
    CellIndex c{static_cast<int>(std::floor(gx)), static_cast<int>(std::floor(gy))};
    if (!g.contains(c))
        return;

    constexpr double inf = std::numeric_limits<double>::infinity();
    const int step_x = dir.x() > 0 ? 1 : (dir.x() < 0 ? -1 : 0);
    const int step_y = dir.y() > 0 ? 1 : (dir.y() < 0 ? -1 : 0);
    const double delta_x = step_x != 0 ? res / std::abs(dir.x()) : inf;
    const double delta_y = step_y != 0 ? res / std::abs(dir.y()) : inf;
    double next_x = inf;
    double next_y = inf;
    if (step_x > 0)
        next_x = (std::floor(gx) + 1.0 - gx) * res / dir.x();
    else if (step_x < 0)
        next_x = (gx - std::floor(gx)) * res / -dir.x();
    if (step_y > 0)
        next_y = (std::floor(gy) + 1.0 - gy) * res / dir.y();
    else if (step_y < 0)
        next_y = (gy - std::floor(gy)) * res / -dir.y();

    double t_enter = 0.0;
    while (true)
    {
        const double t_exit = std::min(next_x, next_y);
        if (!visit(c, t_enter, std::min(t_exit, max_t)))
            return;
        if (t_exit >= max_t)
            return;
        if (next_x <= next_y)
        {
            c.x += step_x;
            t_enter = next_x;
            next_x += delta_x;
        }
        else
        {
            c.y += step_y;
            t_enter = next_y;
            next_y += delta_y;
        }
        if (!g.contains(c))
            return;
    }
}

/// Calls visit(cell) for every cell strictly between the cells of `from` and
/// `to` along the segment; returns false as soon as visit does.
template <typename Visitor>
bool walk_segment_interior(const GridGeometry& g, const Vec2d& from, const Vec2d& to, Visitor&& visit)
{
    const Vec2d delta = to - from;
    const double length = delta.norm();
    const CellIndex target = g.to_cell_unchecked(to);
    const CellIndex source = g.to_cell_unchecked(from);
    if (length <= 0.0 || source == target)
        return true;
    bool clear = true;
    traverse_ray(g, from, delta / length, length, [&](CellIndex c, double, double) {
        if (c == target)
            return false;
        if (c == source)
            return true;
        if (!visit(c))
        {
            clear = false;
            return false;
        }
        return true;
    });
    return clear;
}

}  // namespace aslam

#include "aslam/grid_map.hpp"

#include "aslam/raycast.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace aslam
{

GridGeometry::GridGeometry(int width, int height, double resolution, Vec2d origin)
    : width_(width), height_(height), resolution_(resolution), origin_(std::move(origin))
{
    if (width <= 0 || height <= 0)
        throw GridError("grid dimensions must be positive");
    if (!(resolution > 0.0))
        throw GridError("grid resolution must be positive");
}

CellIndex GridGeometry::to_cell_unchecked(const Vec2d& p) const
{
    return {static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_)),
            static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_))};
}

std::optional<CellIndex> GridGeometry::to_cell(const Vec2d& p) const
{
    if (!p.allFinite())
        return std::nullopt;
    const CellIndex c = to_cell_unchecked(p);
    if (!contains(c))
        return std::nullopt;
    return c;
}

Vec2d GridGeometry::center(CellIndex c) const
{
    return origin_ + resolution_ * Vec2d(c.x + 0.5, c.y + 0.5);
}

bool GridGeometry::same_layout(const GridGeometry& other) const
{
    return width_ == other.width_ && height_ == other.height_ &&
           std::abs(resolution_ - other.resolution_) < 1e-12 && (origin_ - other.origin_).norm() < 1e-9;
}

double DepthScan::ray_angle(std::size_t i) const
{
    if (ranges.size() < 2)
        return 0.0;
    return -0.5 * fov + fov * static_cast<double>(i) / static_cast<double>(ranges.size() - 1);
}

OccupancyGrid::OccupancyGrid(GridGeometry geometry, LogOddsModel model, double p_thr)
    : geometry_(std::move(geometry)), model_(model), p_thr_(p_thr)
{
    if (!(model_.clamp > 0.0))
        throw GridError("log-odds clamp must be positive");
    const std::size_t n = geometry_.size();
    logodds_.assign(n, 0.0);
    touched_.assign(n, 0);
    entropy_.assign(n, 1.0);
    stamp_.assign(n, 0);
    scan_kind_.assign(n, 0);
}

CellClass OccupancyGrid::classify(std::size_t i) const
{
    if (!touched_[i])
        return CellClass::unknown;
    return probability(i) >= p_thr_ ? CellClass::occupied : CellClass::free;
}

void OccupancyGrid::add_entropy(double delta)
{
    const double t = total_entropy_ + delta;
    if (std::abs(total_entropy_) >= std::abs(delta))
        entropy_compensation_ += (total_entropy_ - t) + delta;
    else
        entropy_compensation_ += (delta - t) + total_entropy_;
    total_entropy_ = t;
}

void OccupancyGrid::update_cell(std::size_t i, double delta)
{
    const double l = std::clamp(logodds_[i] + delta, -model_.clamp, model_.clamp);
    const double e = cell_entropy(logodds_to_probability(l));
    if (touched_[i])
    {
        add_entropy(e - entropy_[i]);
    }
    else
    {
        touched_[i] = 1;
        ++explored_count_;
        add_entropy(e);
    }
    logodds_[i] = l;
    entropy_[i] = e;
}

double OccupancyGrid::explored_area() const
{
    return static_cast<double>(explored_count_) * geometry_.resolution() * geometry_.resolution();
}

double OccupancyGrid::recompute_total_entropy() const
{
    double total = 0.0;
    for (std::size_t i = 0; i < logodds_.size(); ++i)
        if (touched_[i])
            total += cell_entropy(logodds_to_probability(logodds_[i]));
    return total;
}

void OccupancyGrid::clear()
{
    std::fill(logodds_.begin(), logodds_.end(), 0.0);
    std::fill(touched_.begin(), touched_.end(), 0);
    std::fill(entropy_.begin(), entropy_.end(), 1.0);
    total_entropy_ = 0.0;
    entropy_compensation_ = 0.0;
    explored_count_ = 0;
}

std::vector<std::size_t> update_from_scan(OccupancyGrid& grid, const Pose2d& pose, const DepthScan& scan)
{
    std::vector<std::size_t> changed;
    if (scan.ranges.empty())
        return changed;
    const GridGeometry& g = grid.geometry();
    const auto origin_cell = g.to_cell(pose.head<2>());
    if (!origin_cell)
        throw GridError("update_from_scan: pose outside the grid");
    const std::size_t origin_linear = g.linear(*origin_cell);

    // 0 = untouched this scan, 1 = free, 2 = hit
    if (++grid.scan_counter_ == 0)
    {
        std::fill(grid.stamp_.begin(), grid.stamp_.end(), 0);
        grid.scan_counter_ = 1;
    }
    const std::uint32_t base = grid.scan_counter_;
    std::vector<std::size_t> touched_order;

    auto mark = [&](std::size_t i, std::uint8_t k) {
        if (grid.stamp_[i] != base)
        {
            grid.stamp_[i] = base;
            grid.scan_kind_[i] = k;
            touched_order.push_back(i);
        }
        else if (k == 2)
        {
            grid.scan_kind_[i] = 2;
        }
    };

    for (std::size_t r = 0; r < scan.size(); ++r)
    {
        const double angle = pose.z() + scan.ray_angle(r);
        const Vec2d dir(std::cos(angle), std::sin(angle));
        const double range = scan.ranges[r];
        const bool hit = DepthScan::is_hit(range) && range <= scan.max_range;
        const double reach = hit ? range : scan.max_range;
        std::optional<CellIndex> hit_cell;
        if (hit)
            hit_cell = g.to_cell(pose.head<2>() + (range + 1e-6) * dir);

        traverse_ray(g, pose.head<2>(), dir, reach + 1e-6, [&](CellIndex c, double t_enter, double) {
            const std::size_t i = g.linear(c);
            if (hit_cell && c == *hit_cell)
            {
                mark(i, 2);
                return false;
            }
            if (t_enter >= reach)
                return false;
            if (i != origin_linear)
                mark(i, 1);
            return true;
        });
    }

    changed.reserve(touched_order.size());
    for (const std::size_t i : touched_order)
    {
        if (i == origin_linear)
            continue;
        grid.update_cell(i, grid.scan_kind_[i] == 2 ? grid.model_.hit : grid.model_.miss);
        changed.push_back(i);
    }
    return changed;
}

EntropySummary map_entropy(const OccupancyGrid& grid)
{
    EntropySummary s;
    s.total = grid.cached_total_entropy();
    s.normalized = grid.explored_count() == 0 ? 1.0 : s.total / static_cast<double>(grid.explored_count());
    return s;
}

double balanced_accuracy(const OccupancyGrid& grid, const GroundTruthMap& truth)
{
    if (!grid.geometry().same_layout(truth.geometry))
        throw GridError("balanced_accuracy: grid layouts differ");
    std::array<std::size_t, 3> truth_count{};
    std::array<std::size_t, 3> hits{};
    for (std::size_t i = 0; i < truth.classes.size(); ++i)
    {
        if (!truth.hidden.empty() && truth.hidden[i])
            continue;
        const auto t = static_cast<std::size_t>(truth.classes[i]);
        ++truth_count[t];
        if (grid.classify(i) == truth.classes[i])
            ++hits[t];
    }
    double sum = 0.0;
    int present = 0;
    for (std::size_t k = 0; k < 3; ++k)
    {
        if (truth_count[k] == 0)
            continue;
        sum += static_cast<double>(hits[k]) / static_cast<double>(truth_count[k]);
        ++present;
    }
    return present == 0 ? 1.0 : sum / present;
}

PgmImage read_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw GridError("cannot open PGM: " + path.string());
    auto next_token = [&]() {
        std::string tok;
        while (in >> tok)
        {
            if (tok[0] == '#')
            {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw GridError("truncated PGM header: " + path.string());
    };
    if (next_token() != "P5")
        throw GridError("not a binary PGM (P5): " + path.string());
    PgmImage img;
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval != 255 || img.width <= 0 || img.height <= 0)
        throw GridError("unsupported PGM layout: " + path.string());
    in.get();  // single whitespace before raster
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw GridError("truncated PGM raster: " + path.string());
    return img;
}

void write_pgm(const std::filesystem::path& path, const PgmImage& image)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw GridError("cannot write PGM: " + path.string());
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

PgmImage to_pgm(const OccupancyGrid& grid)
{
    const GridGeometry& g = grid.geometry();
    PgmImage img{g.width(), g.height(), std::vector<std::uint8_t>(g.size())};
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x)
        {
            const std::size_t i = g.linear({x, y});
            std::uint8_t v = kPgmUnknown;
            switch (grid.classify(i))
            {
            case CellClass::occupied: v = kPgmOccupied; break;
            case CellClass::free: v = kPgmFree; break;
            case CellClass::unknown: v = kPgmUnknown; break;
            }
            img.pixels[static_cast<std::size_t>(g.height() - 1 - y) * g.width() + x] = v;
        }
    return img;
}

void save_grid(const std::filesystem::path& path, const OccupancyGrid& grid)
{
    write_pgm(path, to_pgm(grid));
    std::filesystem::path meta = path;
    meta.replace_extension(".meta");
    std::ofstream out(meta);
    if (!out)
        throw GridError("cannot write grid sidecar: " + meta.string());
    out.precision(17);
    out << "image = " << path.filename().string() << '\n'
        << "resolution = " << grid.geometry().resolution() << '\n'
        << "origin = " << grid.geometry().origin().x() << ' ' << grid.geometry().origin().y() << '\n';
}

}  // namespace aslam

#pragma once

#include "aslam/geometry.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aslam
{

struct CellIndex
{
    int x = 0;
    int y = 0;

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

enum class CellClass : std::uint8_t
{
    free,
    occupied,
    unknown
};

/// Row-major cell layout shared by the estimated map and the ground truth.
class GridGeometry
{
public:
    GridGeometry() = default;
    GridGeometry(int width, int height, double resolution, Vec2d origin = Vec2d::Zero());

    int width() const { return width_; }
    int height() const { return height_; }
    double resolution() const { return resolution_; }
    const Vec2d& origin() const { return origin_; }
    std::size_t size() const { return static_cast<std::size_t>(width_) * height_; }

    bool contains(CellIndex c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
    bool contains(const Vec2d& p) const { return to_cell(p).has_value(); }
    std::optional<CellIndex> to_cell(const Vec2d& p) const;
    /// Cell for an arbitrary point, without bounds checking.
    CellIndex to_cell_unchecked(const Vec2d& p) const;
    Vec2d center(CellIndex c) const;
    Vec2d center(std::size_t linear) const { return center(cell(linear)); }

    std::size_t linear(CellIndex c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }
    CellIndex cell(std::size_t linear) const
    {
        return {static_cast<int>(linear % width_), static_cast<int>(linear / width_)};
    }

    bool same_layout(const GridGeometry& other) const;

private:
    int width_ = 0;
    int height_ = 0;
    double resolution_ = 0.1;
    Vec2d origin_ = Vec2d::Zero();
};

/// Shannon entropy in bits of a binary cell with occupancy probability p.
template <typename Scalar>
Scalar cell_entropy(Scalar p)
{
    using std::log2;
    if (!(p >= Scalar(0) && p <= Scalar(1)))
        throw std::domain_error("cell_entropy: probability outside [0,1]");
    Scalar e = Scalar(0);
    if (p > Scalar(0))
        e -= p * log2(p);
    if (p < Scalar(1))
        e -= (Scalar(1) - p) * log2(Scalar(1) - p);
    return e;
}

template <typename Scalar>
Scalar logodds_to_probability(Scalar l)
{
    using std::exp;
    return Scalar(1) / (Scalar(1) + exp(-l));
}

struct LogOddsModel
{
    double hit = 0.85;
    double miss = -0.4;
    double clamp = 3.5;
};

/// Simulated depth reading: one range per ray, rays spread uniformly across the FOV.
/// A ray without a return inside max_range stores +infinity.
struct DepthScan
{
    double fov = 0.0;
    double max_range = 0.0;
    std::vector<double> ranges;

    std::size_t size() const { return ranges.size(); }
    double ray_angle(std::size_t i) const;  // relative to the sensor heading
    static bool is_hit(double r) { return std::isfinite(r); }
};

struct EntropySummary
{
    double total = 0.0;
    double normalized = 1.0;
};

/// Estimated occupancy map. Cells keep log-odds plus a touched flag; entropy of
/// the explored cells is cached and kept in sync with every update.
class OccupancyGrid
{
public:
    OccupancyGrid() = default;
    explicit OccupancyGrid(GridGeometry geometry, LogOddsModel model = {}, double p_thr = 0.7);

    const GridGeometry& geometry() const { return geometry_; }
    const LogOddsModel& model() const { return model_; }
    double occupied_threshold() const { return p_thr_; }

    double logodds(std::size_t i) const { return logodds_[i]; }
    double probability(std::size_t i) const { return logodds_to_probability(logodds_[i]); }
    double probability(CellIndex c) const { return probability(geometry_.linear(c)); }
    bool explored(std::size_t i) const { return touched_[i] != 0; }
    CellClass classify(std::size_t i) const;
    CellClass classify(CellIndex c) const { return classify(geometry_.linear(c)); }
    /// Blocks visibility rays: strictly above the occupancy threshold.
    bool occludes(std::size_t i) const { return touched_[i] && probability(i) > p_thr_; }
    bool is_occupied(std::size_t i) const { return classify(i) == CellClass::occupied; }
    double entropy(std::size_t i) const { return entropy_[i]; }

    /// Adds a log-odds increment and refreshes the entropy cache for that cell.
    void update_cell(std::size_t i, double delta);

    std::size_t explored_count() const { return explored_count_; }
    double explored_area() const;
    double cached_total_entropy() const { return total_entropy_ + entropy_compensation_; }
    /// Full recomputation, independent of the incremental cache.
    double recompute_total_entropy() const;
    /// Resets every cell to unknown.
    void clear();

private:
    GridGeometry geometry_;
    LogOddsModel model_;
    double p_thr_ = 0.7;
    std::vector<double> logodds_;
    std::vector<std::uint8_t> touched_;
    std::vector<double> entropy_;
    double total_entropy_ = 0.0;
    double entropy_compensation_ = 0.0;  // Neumaier running error
    std::size_t explored_count_ = 0;
    // per-scan dedupe
    std::vector<std::uint32_t> stamp_;
    std::vector<std::uint8_t> scan_kind_;
    std::uint32_t scan_counter_ = 0;

    void add_entropy(double delta);

    friend std::vector<std::size_t> update_from_scan(OccupancyGrid&, const Pose2d&, const DepthScan&);
};

class GridError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Integrates one depth scan taken from the estimated pose. Each touched cell is
/// updated once per scan; a hit outranks a pass-through. The robot's own cell is
/// not updated. Returns the changed cells in first-touch order.
std::vector<std::size_t> update_from_scan(OccupancyGrid& grid, const Pose2d& pose, const DepthScan& scan);

EntropySummary map_entropy(const OccupancyGrid& grid);

/// Ground truth used for scoring: per-cell class plus a mask of cells that can
/// never be mapped (excluded from scoring).
struct GroundTruthMap
{
    GridGeometry geometry;
    std::vector<CellClass> classes;
    std::vector<std::uint8_t> hidden;

    bool occupied(std::size_t i) const { return classes[i] == CellClass::occupied; }
    bool occupied(CellIndex c) const { return geometry.contains(c) && occupied(geometry.linear(c)); }
};

/// Mean per-class recall over {free, occupied, unknown}; classes absent from the
/// ground truth are left out of the mean. Hidden cells are ignored.
double balanced_accuracy(const OccupancyGrid& grid, const GroundTruthMap& truth);

// PGM I/O: 0 occupied, 254 free, 205 unknown. Row 0 of the image is the top (max y).
inline constexpr std::uint8_t kPgmOccupied = 0;
inline constexpr std::uint8_t kPgmFree = 254;
inline constexpr std::uint8_t kPgmUnknown = 205;

struct PgmImage
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, top row first
};

PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const PgmImage& image);

PgmImage to_pgm(const OccupancyGrid& grid);
/// Writes <path> plus a sidecar <path with .meta> holding resolution and origin.
void save_grid(const std::filesystem::path& path, const OccupancyGrid& grid);

}  // namespace aslam

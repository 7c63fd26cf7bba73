#include "aslam/world_sim.hpp"

#include "aslam/keyvalue.hpp"
#include "aslam/raycast.hpp"

#include <algorithm>
#include <limits>

namespace aslam
{

void RobotLimits::validate() const
{
    if (!(u_max.minCoeff() > 0.0) || !(v_tr_max > 0.0) || !(d_min > 0.0))
        throw ConfigError("robot limits must be strictly positive");
}

void WheelGeometry::validate() const
{
    if (!(wheel_radius > 0.0) || !(base_radius > 0.0))
        throw ConfigError("wheel geometry radii must be positive");
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j)
            if (std::abs(wrap_angle(wheel_angles[i] - wheel_angles[j])) < 1e-9)
                throw ConfigError("wheel mount angles must be distinct");
}

std::vector<Feature> place_features(const GroundTruthMap& truth, const FeaturePlacement& placement)
{
    const GridGeometry& g = truth.geometry;
    std::mt19937_64 rng(placement.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double res = g.resolution();
    // keep features strictly inside the free cell and within `offset` of the wall face
    const double depth = std::min(0.5 * res, 0.999 * placement.offset);

    std::vector<Feature> features;
    static constexpr std::array<std::array<int, 2>, 4> kFaces{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x)
        {
            if (!truth.occupied(CellIndex{x, y}))
                continue;
            for (const auto& f : kFaces)
            {
                const CellIndex n{x + f[0], y + f[1]};
                if (!g.contains(n) || truth.classes[g.linear(n)] != CellClass::free)
                    continue;
                const double draw = unit(rng);
                const double jitter = (unit(rng) - 0.5) * 0.8 * res;
                if (draw >= placement.density)
                    continue;
                const Vec2d normal(f[0], f[1]);
                const Vec2d tangent(-f[1], f[0]);
                const Vec2d face = g.center(CellIndex{x, y}) + 0.5 * res * normal;
                features.push_back({static_cast<int>(features.size()), face + depth * normal + jitter * tangent});
            }
        }
    return features;
}

bool WorldModel::in_collision(const Vec2d& p) const
{
    const auto c = truth.geometry.to_cell(p);
    return !c || truth.occupied(truth.geometry.linear(*c));
}

Pose2d WorldModel::advance(const Twistd& u, double dt)
{
    if (!(dt > 0.0))
        throw std::invalid_argument("advance: dt must be positive");
    const Pose2d next = step_kinematics<double>(true_pose, u, dt);
    if (in_collision(next.head<2>()))
        throw CollisionError("robot collided with the environment");
    true_pose = next;
    return true_pose;
}

DepthScan depth_scan(const WorldModel& world, const Pose2d& pose, double fov, double max_range, int n_rays)
{
    if (n_rays < 2)
        throw std::invalid_argument("depth_scan: need at least two rays");
    if (world.in_collision(pose.head<2>()))
        throw CollisionError("depth_scan: pose inside an obstacle");
    DepthScan scan;
    scan.fov = fov;
    scan.max_range = max_range;
    scan.ranges.assign(static_cast<std::size_t>(n_rays), std::numeric_limits<double>::infinity());
    const GridGeometry& g = world.truth.geometry;
    for (std::size_t i = 0; i < scan.ranges.size(); ++i)
    {
        const double a = pose.z() + scan.ray_angle(i);
        const Vec2d dir(std::cos(a), std::sin(a));
        traverse_ray(g, pose.head<2>(), dir, max_range, [&](CellIndex c, double t_enter, double) {
            if (t_enter > max_range)
                return false;
            if (world.truth.occupied(g.linear(c)))
            {
                scan.ranges[i] = t_enter;
                return false;
            }
            return true;
        });
    }
    return scan;
}

std::vector<int> visible_features(const WorldModel& world, const Pose2d& pose, double fov, double max_range)
{
    std::vector<int> ids;
    const GridGeometry& g = world.truth.geometry;
    for (const Feature& f : world.features)
    {
        const Vec2d d = f.position - pose.head<2>();
        const double dist = d.norm();
        if (dist > max_range)
            continue;
        if (dist > 0.0 && std::abs(angle_diff(std::atan2(d.y(), d.x()), pose.z())) > 0.5 * fov)
            continue;
        const bool clear = walk_segment_interior(g, pose.head<2>(), f.position,
                                                 [&](CellIndex c) { return !world.truth.occupied(g.linear(c)); });
        if (clear)
            ids.push_back(f.id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

Pose2d OdometryModel::reading(const Pose2d& true_delta)
{
    const double trans = true_delta.head<2>().norm();
    const double rot = std::abs(true_delta.z());
    const double sigma_xy = noise_.sigma_floor + noise_.sigma_trans_ratio * trans;
    const double sigma_th = noise_.sigma_floor + noise_.sigma_rot_ratio * rot + noise_.sigma_rot_per_trans * trans;
    // draw all three every call so the stream stays aligned across noise settings
    const double nx = normal_(rng_);
    const double ny = normal_(rng_);
    const double nt = normal_(rng_);
    Pose2d out;
    out.x() = true_delta.x() * (1.0 + noise_.bias_scale) + sigma_xy * nx;
    out.y() = true_delta.y() * (1.0 + noise_.bias_scale) + sigma_xy * ny;
    out.z() = true_delta.z() + noise_.bias_yaw_per_m * trans + sigma_th * nt;
    return out;
}

GroundTruthMap ground_truth_from_pgm(const PgmImage& image, double resolution, const Vec2d& origin)
{
    GroundTruthMap truth;
    truth.geometry = GridGeometry(image.width, image.height, resolution, origin);
    truth.classes.resize(truth.geometry.size());
    for (int row = 0; row < image.height; ++row)
        for (int x = 0; x < image.width; ++x)
        {
            const std::uint8_t v = image.pixels[static_cast<std::size_t>(row) * image.width + x];
            const int y = image.height - 1 - row;
            CellClass c = CellClass::unknown;
            if (v < 100)
                c = CellClass::occupied;
            else if (v > 230)
                c = CellClass::free;
            truth.classes[truth.geometry.linear({x, y})] = c;
        }
    truth.hidden.assign(truth.geometry.size(), 0);
    return truth;
}

WorldModel load_world(const std::filesystem::path& sidecar)
{
    const KeyValueList kv = read_key_value_file(sidecar);
    const auto dir = sidecar.parent_path();
    std::string image;
    std::string hidden;
    double resolution = 0.1;
    Vec2d origin = Vec2d::Zero();
    Pose2d start = Pose2d::Zero();
    FeaturePlacement placement;
    std::vector<Vec2d> explicit_features;
    for (const auto& [key, value] : kv)
    {
        if (key == "image")
            image = value;
        else if (key == "hidden")
            hidden = value;
        else if (key == "resolution")
            resolution = parse_double(value, key);
        else if (key == "origin")
        {
            const auto v = parse_doubles(value, key);
            if (v.size() != 2)
                throw ConfigError("origin expects two numbers");
            origin = Vec2d(v[0], v[1]);
        }
        else if (key == "start")
        {
            const auto v = parse_doubles(value, key);
            if (v.size() != 3)
                throw ConfigError("start expects x y theta");
            start = Pose2d(v[0], v[1], v[2]);
        }
        else if (key == "feature_seed")
            placement.seed = static_cast<std::uint64_t>(parse_double(value, key));
        else if (key == "feature_density")
            placement.density = parse_double(value, key);
        else if (key == "feature_offset")
            placement.offset = parse_double(value, key);
        else if (key == "feature")
        {
            const auto v = parse_doubles(value, key);
            if (v.size() != 2)
                throw ConfigError("feature expects x y");
            explicit_features.emplace_back(v[0], v[1]);
        }
        else if (key != "name" && key != "description")
            throw ConfigError("unknown world key '" + key + "' in " + sidecar.string());
    }
    if (image.empty())
        throw ConfigError("world file lacks 'image': " + sidecar.string());

    WorldModel world;
    world.name = sidecar.stem().string();
    for (const auto& [key, value] : kv)
        if (key == "name")
            world.name = value;
    world.truth = ground_truth_from_pgm(read_pgm(dir / image), resolution, origin);
    if (!hidden.empty())
    {
        const PgmImage mask = read_pgm(dir / hidden);
        if (mask.width != world.truth.geometry.width() || mask.height != world.truth.geometry.height())
            throw ConfigError("hidden mask size differs from the world image");
        for (int row = 0; row < mask.height; ++row)
            for (int x = 0; x < mask.width; ++x)
                if (mask.pixels[static_cast<std::size_t>(row) * mask.width + x] < 128)
                    world.truth.hidden[world.truth.geometry.linear({x, mask.height - 1 - row})] = 1;
    }
    if (explicit_features.empty())
        world.features = place_features(world.truth, placement);
    else
        for (std::size_t i = 0; i < explicit_features.size(); ++i)
            world.features.push_back({static_cast<int>(i), explicit_features[i]});
    world.start = start;
    world.true_pose = start;
    if (world.in_collision(start.head<2>()))
        throw ConfigError("world start pose is not in free space: " + sidecar.string());
    return world;
}

}  // namespace aslam

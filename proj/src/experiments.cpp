#include "aslam/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>
#include <atomic>

#ifndef ASLAM_WORLDS_DIR
#define ASLAM_WORLDS_DIR "worlds"
#endif

namespace aslam
{

const std::vector<std::string>& method_names()
{
    static const std::vector<std::string> names{"A",    "A_L",  "A_S",    "A_1",  "OL_0",    "OL_1",
                                                "OL_1_3", "OL_2", "OL_2_3", "INTER_0", "A_O", "A_DW_O"};
    return names;
}

MethodConfig method_config(const std::string& name, double extended_factor)
{
    MethodConfig m;
    m.name = name;
    const ActivenessLevels all{true, true, true};
    const ActivenessLevels none{false, false, false};
    if (name == "A" || name == "A_L" || name == "A_S" || name == "A_O" || name == "A_DW_O")
    {
        m.levels = all;
        if (name == "A_L")
            m.duration_factor = extended_factor;
        if (name == "A_S")
            m.aggregation = AggregationKind::weighted_sum;
        if (name == "A_O")
            m.utility = UtilityVariant::u2;
        if (name == "A_DW_O")
            m.utility = UtilityVariant::u3;
    }
    else if (name == "A_1")
        m.levels = {true, false, false};
    else if (name.rfind("OL_", 0) == 0)
    {
        m.aggregation = AggregationKind::goal_only;
        if (name == "OL_0")
            m.levels = none;
        else if (name == "OL_1")
            m.levels = {true, false, false};
        else if (name == "OL_1_3")
            m.levels = {true, false, true};
        else if (name == "OL_2")
            m.levels = {false, true, false};
        else if (name == "OL_2_3")
            m.levels = {false, true, true};
        else
            throw ConfigError("unknown method '" + name + "'");
    }
    else if (name == "INTER_0")
    {
        m.levels = none;
        m.aggregation = AggregationKind::interpolated;
    }
    else
        throw ConfigError("unknown method '" + name + "'");
    return m;
}

// ---------------------------------------------------------------------------
// configuration

namespace
{

struct ParamVisitor
{
    std::function<void(const char*, double&, double)> real;  // scale: stored = shown * scale
    std::function<void(const char*, int&)> integer;
};

void visit_params(TrialConfig& c, const ParamVisitor& v)
{
    const double deg = kPi / 180.0;
    v.real("sensor.fov_deg", c.sensor.fov, deg);
    v.real("sensor.max_range", c.sensor.max_range, 1.0);
    v.integer("sensor.rays", c.sensor.n_rays);
    v.real("map.hit", c.logodds.hit, 1.0);
    v.real("map.miss", c.logodds.miss, 1.0);
    v.real("map.clamp", c.logodds.clamp, 1.0);
    v.real("map.p_thr", c.p_thr, 1.0);
    v.real("odom.sigma_floor", c.odometry.sigma_floor, 1.0);
    v.real("odom.sigma_trans_ratio", c.odometry.sigma_trans_ratio, 1.0);
    v.real("odom.sigma_rot_ratio", c.odometry.sigma_rot_ratio, 1.0);
    v.real("odom.sigma_rot_per_trans", c.odometry.sigma_rot_per_trans, 1.0);
    v.real("odom.bias_scale", c.odometry.bias_scale, 1.0);
    v.real("odom.bias_yaw_per_m", c.odometry.bias_yaw_per_m, 1.0);
    v.real("robot.u_max_x", c.limits.u_max.x(), 1.0);
    v.real("robot.u_max_y", c.limits.u_max.y(), 1.0);
    v.real("robot.u_max_theta", c.limits.u_max.z(), 1.0);
    v.real("robot.v_tr_max", c.limits.v_tr_max, 1.0);
    v.real("robot.d_min", c.limits.d_min, 1.0);
    v.real("robot.radius", c.robot_radius, 1.0);
    v.real("wheel.radius", c.wheels.wheel_radius, 1.0);
    v.real("wheel.base_radius", c.wheels.base_radius, 1.0);
    v.integer("nmpc.horizon", c.nmpc.horizon);
    v.real("nmpc.dt", c.nmpc.dt, 1.0);
    v.real("nmpc.q_x", c.nmpc.q_x.x(), 1.0);
    v.real("nmpc.q_y", c.nmpc.q_x.y(), 1.0);
    v.real("nmpc.q_theta", c.nmpc.q_x.z(), 1.0);
    v.real("nmpc.r_x", c.nmpc.r.x(), 1.0);
    v.real("nmpc.r_y", c.nmpc.r.y(), 1.0);
    v.real("nmpc.r_theta", c.nmpc.r.z(), 1.0);
    v.real("nmpc.q_obs", c.nmpc.q_obs, 1.0);
    v.integer("nmpc.max_obstacles", c.nmpc.max_obstacles);
    v.integer("nmpc.max_iterations", c.nmpc.max_iterations);
    v.real("nmpc.penalty_initial", c.nmpc.penalty_initial, 1.0);
    v.real("nmpc.penalty_growth", c.nmpc.penalty_growth, 1.0);
    v.real("nmpc.penalty_max", c.nmpc.penalty_max, 1.0);
    v.real("nmpc.obstacle_radius", c.obstacle_radius, 1.0);
    v.real("nmpc.obstacle_tile", c.obstacle_tile, 1.0);
    v.real("utility.kappa1", c.utility.kappa1, 1.0);
    v.real("utility.p_thr", c.utility.p_thr, 1.0);
    v.real("utility.d_l", c.utility.d_l, 1.0);
    v.real("utility.d_h", c.utility.d_h, 1.0);
    v.real("utility.rho", c.rho, 1.0);
    v.integer("utility.n_headings", c.n_headings);
    v.real("blend.kappa2", c.blend.kappa2, 1.0);
    v.real("blend.kappa3", c.blend.kappa3, 1.0);
    v.real("planner.unknown_cost", c.planner.unknown_cost, 1.0);
    v.real("planner.waypoint_spacing", c.planner.waypoint_spacing, 1.0);
    v.integer("frontier.goal_merge_cells", c.goal_merge_cells);
    v.real("follower.reach_position", c.follower.reach_position, 1.0);
    v.real("follower.reach_heading", c.follower.reach_heading, 1.0);
    v.real("follower.stuck_eps", c.follower.stuck_eps, 1.0);
    v.real("follower.stuck_window", c.follower.stuck_window, 1.0);
    v.real("recovery.turn_deg", c.recovery_turn, deg);
    v.real("recovery.backoff", c.recovery_backoff, 1.0);
    v.real("recovery.speed", c.recovery_speed, 1.0);
    v.integer("recovery.max_easy", c.max_easy_attempts);
    v.integer("recovery.max_hard", c.max_hard_attempts);
    v.real("slam.node_linear_spacing", c.slam.node_linear_spacing, 1.0);
    v.real("slam.node_angular_spacing", c.slam.node_angular_spacing, 1.0);
    v.integer("slam.n_match", c.slam.n_match);
    v.real("slam.recency_window", c.slam.recency_window, 1.0);
    v.real("slam.epsilon_lc", c.slam.epsilon_lc, 1.0);
    int buffer = static_cast<int>(c.slam.scan_buffer);
    v.integer("slam.scan_buffer", buffer);
    c.slam.scan_buffer = static_cast<std::size_t>(std::max(buffer, 0));
    v.integer("trial.max_collisions", c.max_collisions);
    v.real("trial.extended_factor", c.extended_factor, 1.0);
    v.real("metrics.bucket", c.bucket, 1.0);
    v.real("metrics.coverage_target", c.coverage_target, 1.0);
}

std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

void TrialConfig::apply(const KeyValueList& kv)
{
    TrialConfig next = *this;
    for (const auto& [key, value] : kv)
    {
        bool found = false;
        visit_params(next, {[&](const char* k, double& ref, double scale) {
                                 if (key == k)
                                 {
                                     ref = parse_double(value, key) * scale;
                                     found = true;
                                 }
                             },
                             [&](const char* k, int& ref) {
                                 if (key == k)
                                 {
                                     const double d = parse_double(value, key);
                                     if (d != std::floor(d))
                                         throw ConfigError("parameter '" + key + "' must be an integer");
                                     ref = static_cast<int>(d);
                                     found = true;
                                 }
                             }});
        if (!found)
            throw ConfigError("unknown parameter '" + key + "'");
    }
    next.nmpc.limits = next.limits;
    next.validate();
    *this = next;
}

void TrialConfig::echo(std::ostream& out) const
{
    TrialConfig copy = *this;
    visit_params(copy, {[&](const char* k, double& ref, double scale) { out << k << " = " << format_number(ref / scale) << '\n'; },
                        [&](const char* k, int& ref) { out << k << " = " << ref << '\n'; }});
}

void TrialConfig::validate() const
{
    if (sensor.n_rays < 2 || !(sensor.fov > 0.0) || !(sensor.max_range > 0.0))
        throw ConfigError("sensor: need >= 2 rays, positive fov and range");
    if (!(logodds.hit > 0.0) || !(logodds.miss < 0.0) || !(logodds.clamp > 0.0))
        throw ConfigError("map: hit must be positive, miss negative, clamp positive");
    if (!(p_thr > 0.5 && p_thr < 1.0))
        throw ConfigError("map: p_thr must lie in (0.5, 1)");
    limits.validate();
    wheels.validate();
    nmpc.validate();
    utility.validate();
    blend.validate();
    slam.validate();
    if (!(robot_radius > 0.0) || !(planner.waypoint_spacing > 0.0) || !(planner.unknown_cost >= 1.0))
        throw ConfigError("planner: radius and spacing must be positive, unknown_cost >= 1");
    if (n_headings < 1 || !(rho >= 0.0))
        throw ConfigError("utility: n_headings >= 1 and rho >= 0 required");
    if (!(bucket > 0.0) || !(coverage_target > 0.0 && coverage_target <= 1.0))
        throw ConfigError("metrics: bucket must be positive, coverage target in (0, 1]");
    if (!(obstacle_radius > 0.0) || !(obstacle_tile > 0.0))
        throw ConfigError("nmpc: obstacle radius and tile must be positive");
    if (!(extended_factor >= 1.0))
        throw ConfigError("trial: extended_factor must be >= 1");
}

TrialConfig load_trial_config(const std::filesystem::path& file)
{
    TrialConfig c;
    c.apply(read_key_value_file(file));
    return c;
}

// ---------------------------------------------------------------------------
// metrics

std::vector<MetricSample> bucket_metrics(const std::vector<MetricSample>& raw, double bin)
{
    if (!(bin > 0.0))
        throw std::invalid_argument("bucket_metrics: bin must be positive");
    std::vector<MetricSample> out;
    if (raw.empty())
        return out;
    for (std::size_t i = 1; i < raw.size(); ++i)
        if (raw[i].t < raw[i - 1].t)
            throw std::invalid_argument("bucket_metrics: timestamps must be nondecreasing");
    // a tiny slack keeps samples stamped exactly on a boundary (accumulated steps) in the later bin
    auto bin_of = [&](double t) { return static_cast<long>(std::floor(t / bin + 1e-9)); };
    const long first = bin_of(raw.front().t);
    const long last = bin_of(raw.back().t);
    out.reserve(static_cast<std::size_t>(last - first + 1));
    std::size_t i = 0;
    MetricSample carry = raw.front();
    for (long b = first; b <= last; ++b)
    {
        while (i < raw.size() && bin_of(raw[i].t) == b)
            carry = raw[i++];
        MetricSample row = carry;
        row.t = static_cast<double>(b + 1) * bin;
        out.push_back(row);
    }
    return out;
}

std::vector<std::uint8_t> reachable_free(const GroundTruthMap& truth, const Vec2d& start)
{
    const GridGeometry& g = truth.geometry;
    std::vector<std::uint8_t> seen(g.size(), 0);
    const auto s = g.to_cell(start);
    if (!s || truth.classes[g.linear(*s)] != CellClass::free)
        return seen;
    std::vector<CellIndex> stack{*s};
    seen[g.linear(*s)] = 1;
    while (!stack.empty())
    {
        const CellIndex c = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
            {
                const CellIndex n{c.x + dx, c.y + dy};
                if (!g.contains(n))
                    continue;
                const std::size_t j = g.linear(n);
                if (!seen[j] && truth.classes[j] == CellClass::free)
                {
                    seen[j] = 1;
                    stack.push_back(n);
                }
            }
    }
    return seen;
}

// ---------------------------------------------------------------------------
// CSV

namespace
{

const char* kMetricsHeader =
    "t,explored_area_m2,coverage,normalized_entropy,bac,path_length_m,wheel_rotation_rad,loop_closures,ate_rmse_m";

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, ','))
        out.push_back(cur);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

void write_sample(std::ostream& out, const MetricSample& s)
{
    out << format_number(s.t) << ',' << format_number(s.explored_area) << ',' << format_number(s.coverage) << ','
        << format_number(s.normalized_entropy) << ',' << format_number(s.bac) << ',' << format_number(s.path_length)
        << ',' << format_number(s.wheel_rotation) << ',' << format_number(s.loop_closures) << ','
        << format_number(s.ate_rmse);
}

MetricSample read_sample(const std::vector<std::string>& f, std::size_t at)
{
    if (f.size() < at + 9)
        throw ConfigError("metrics row has too few columns");
    MetricSample s;
    s.t = parse_double(f[at], "t");
    s.explored_area = parse_double(f[at + 1], "explored_area_m2");
    s.coverage = parse_double(f[at + 2], "coverage");
    s.normalized_entropy = parse_double(f[at + 3], "normalized_entropy");
    s.bac = parse_double(f[at + 4], "bac");
    s.path_length = parse_double(f[at + 5], "path_length_m");
    s.wheel_rotation = parse_double(f[at + 6], "wheel_rotation_rad");
    s.loop_closures = parse_double(f[at + 7], "loop_closures");
    s.ate_rmse = parse_double(f[at + 8], "ate_rmse_m");
    return s;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricSample>& rows)
{
    out << kMetricsHeader << '\n';
    for (const MetricSample& s : rows)
    {
        write_sample(out, s);
        out << '\n';
    }
}

std::vector<MetricSample> read_metrics_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw ConfigError("metrics csv: unexpected header");
    std::vector<MetricSample> rows;
    while (std::getline(in, line))
        if (!line.empty())
            rows.push_back(read_sample(split_csv(line), 0));
    return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<TrialSummary>& rows)
{
    out << "world,method,seed,duration,status,failure," << kMetricsHeader
        << ",loops_per_m,wheel_per_m,reached_target,t_target,path_length_target_m,entropy_target,collisions,"
           "recoveries_easy,recoveries_hard,sessions\n";
    for (const TrialSummary& s : rows)
    {
        out << s.world << ',' << s.method << ',' << s.seed << ',' << format_number(s.duration) << ','
            << (s.failed ? "failed" : "ok") << ',' << s.failure << ',';
        write_sample(out, s.final);
        out << ',' << format_number(s.loops_per_m) << ',' << format_number(s.wheel_per_m) << ','
            << (s.reached_target ? 1 : 0) << ',' << format_number(s.t_target) << ','
            << format_number(s.path_length_target) << ',' << format_number(s.entropy_target) << ',' << s.collisions
            << ',' << s.recoveries_easy << ',' << s.recoveries_hard << ',' << s.sessions << '\n';
    }
}

std::vector<TrialSummary> read_summary_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line.rfind("world,method,seed", 0) != 0)
        throw ConfigError("summary csv: unexpected header");
    std::vector<TrialSummary> rows;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        const std::vector<std::string> f = split_csv(line);
        if (f.size() < 25)
            throw ConfigError("summary csv: row has too few columns");
        TrialSummary s;
        s.world = f[0];
        s.method = f[1];
        s.seed = static_cast<std::uint64_t>(std::stoull(f[2]));
        s.duration = parse_double(f[3], "duration");
        s.failed = f[4] == "failed";
        s.failure = f[5];
        s.final = read_sample(f, 6);
        s.loops_per_m = parse_double(f[15], "loops_per_m");
        s.wheel_per_m = parse_double(f[16], "wheel_per_m");
        s.reached_target = f[17] == "1";
        s.t_target = parse_double(f[18], "t_target");
        s.path_length_target = parse_double(f[19], "path_length_target_m");
        s.entropy_target = parse_double(f[20], "entropy_target");
        s.collisions = std::stoi(f[21]);
        s.recoveries_easy = std::stoi(f[22]);
        s.recoveries_hard = std::stoi(f[23]);
        s.sessions = std::stoi(f[24]);
        rows.push_back(std::move(s));
    }
    return rows;
}

void write_trial_outputs(const std::filesystem::path& dir, const TrialResult& r, const TrialConfig& config)
{
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("metrics.csv");
        write_metrics_csv(f, r.bucketed);
    }
    {
        auto f = open("summary.csv");
        write_summary_csv(f, {r.summary});
    }
    {
        auto f = open("graph.txt");
        r.graph.write_dump(f);
    }
    {
        auto f = open("events.log");
        r.events.write(f);
    }
    {
        auto f = open("params.txt");
        f << "world = " << r.summary.world << "\nmethod = " << r.summary.method << "\nseed = " << r.summary.seed
          << "\nduration = " << format_number(r.summary.duration) << '\n';
        config.echo(f);
    }
    save_grid(dir / "grid.pgm", r.grid);
}

// ---------------------------------------------------------------------------
// aggregation

Stat mean_std(const std::vector<double>& values)
{
    Stat s;
    s.n = static_cast<int>(values.size());
    if (values.empty())
        return s;
    double sum = 0.0;
    for (const double v : values)
        sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1)
    {
        double sq = 0.0;
        for (const double v : values)
            sq += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return s;
}

const std::vector<std::string>& summary_metrics()
{
    static const std::vector<std::string> names{"bac",         "ate_rmse_m",          "loops_per_m",
                                                "wheel_per_m", "path_length_m",       "normalized_entropy",
                                                "explored_area_m2", "path_length_target_m", "entropy_target"};
    return names;
}

double summary_metric(const TrialSummary& s, const std::string& name)
{
    if (name == "bac")
        return s.final.bac;
    if (name == "ate_rmse_m")
        return s.final.ate_rmse;
    if (name == "loops_per_m")
        return s.loops_per_m;
    if (name == "wheel_per_m")
        return s.wheel_per_m;
    if (name == "path_length_m")
        return s.final.path_length;
    if (name == "normalized_entropy")
        return s.final.normalized_entropy;
    if (name == "explored_area_m2")
        return s.final.explored_area;
    if (name == "path_length_target_m")
        return s.path_length_target;
    if (name == "entropy_target")
        return s.entropy_target;
    throw std::invalid_argument("unknown summary metric '" + name + "'");
}

std::vector<MethodSummary> compare_methods(const std::vector<TrialSummary>& trials)
{
    std::map<std::pair<std::string, std::string>, std::vector<const TrialSummary*>> groups;
    for (const TrialSummary& t : trials)
        groups[{t.world, t.method}].push_back(&t);
    std::vector<MethodSummary> out;
    for (const auto& [key, members] : groups)
    {
        MethodSummary m;
        m.world = key.first;
        m.method = key.second;
        m.trials = static_cast<int>(members.size());
        for (const TrialSummary* t : members)
        {
            m.failures += t->failed ? 1 : 0;
            m.reached_target += t->reached_target ? 1 : 0;
        }
        for (const std::string& name : summary_metrics())
        {
            std::vector<double> values;
            for (const TrialSummary* t : members)
                values.push_back(summary_metric(*t, name));
            m.stats[name] = mean_std(values);
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::optional<double> relative_delta(const std::vector<MethodSummary>& table, const std::string& world,
                                     const std::string& reference, const std::string& other,
                                     const std::string& metric)
{
    const MethodSummary* ref = nullptr;
    const MethodSummary* oth = nullptr;
    for (const MethodSummary& m : table)
    {
        if (m.world != world)
            continue;
        if (m.method == reference)
            ref = &m;
        if (m.method == other)
            oth = &m;
    }
    if (!ref || !oth)
        return std::nullopt;
    const double r = ref->stats.at(metric).mean;
    if (r == 0.0)
        return std::nullopt;
    return (oth->stats.at(metric).mean - r) / r;
}

void write_comparison_csv(std::ostream& out, const std::vector<MethodSummary>& table)
{
    out << "world,method,trials,failures,reached_target";
    for (const std::string& name : summary_metrics())
        out << ',' << name << "_mean," << name << "_std";
    out << '\n';
    for (const MethodSummary& m : table)
    {
        out << m.world << ',' << m.method << ',' << m.trials << ',' << m.failures << ',' << m.reached_target;
        for (const std::string& name : summary_metrics())
        {
            const Stat& s = m.stats.at(name);
            out << ',' << format_number(s.mean) << ',' << format_number(s.std);
        }
        out << '\n';
    }
}

void write_comparison_text(std::ostream& out, const std::vector<MethodSummary>& table, const std::string& reference)
{
    const std::vector<std::string> columns{"bac", "ate_rmse_m", "loops_per_m", "wheel_per_m",
                                           "path_length_m", "normalized_entropy", "path_length_target_m",
                                           "entropy_target"};
    std::string world;
    for (const MethodSummary& m : table)
    {
        if (m.world != world)
        {
            world = m.world;
            out << "\nworld " << world << '\n';
            out << std::left << std::setw(9) << "method" << std::right << std::setw(7) << "trials" << std::setw(6)
                << "fail" << std::setw(6) << "tgt";
            for (const std::string& c : columns)
                out << std::setw(26) << c;
            out << '\n';
        }
        out << std::left << std::setw(9) << m.method << std::right << std::setw(7) << m.trials << std::setw(6)
            << m.failures << std::setw(6) << m.reached_target;
        for (const std::string& c : columns)
        {
            const Stat& s = m.stats.at(c);
            std::ostringstream cell;
            cell << std::fixed << std::setprecision(4) << s.mean << " +- " << s.std;
            out << std::setw(26) << cell.str();
        }
        out << '\n';
    }
    std::vector<std::string> worlds;
    for (const MethodSummary& m : table)
        if (std::find(worlds.begin(), worlds.end(), m.world) == worlds.end())
            worlds.push_back(m.world);
    for (const std::string& w : worlds)
    {
        bool header = false;
        for (const MethodSummary& m : table)
        {
            if (m.world != w || m.method == reference)
                continue;
            const auto d = relative_delta(table, w, reference, m.method, "path_length_target_m");
            if (!d)
                continue;
            if (!header)
            {
                out << "\npath length to coverage target relative to " << reference << " (" << w << ")\n";
                header = true;
            }
            char buf[64];
            std::snprintf(buf, sizeof buf, "%+.1f%%", 100.0 * *d);
            out << "  " << std::left << std::setw(9) << m.method << ' ' << buf << (*d > 0 ? " longer" : " shorter")
                << '\n';
        }
    }
}

std::vector<TrialSummary> collect_summaries(const std::filesystem::path& dir)
{
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() == "summary.csv")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<TrialSummary> out;
    for (const auto& f : files)
    {
        std::ifstream in(f);
        for (TrialSummary& s : read_summary_csv(in))
            out.push_back(std::move(s));
    }
    return out;
}

std::vector<TrialResult> run_trials_parallel(const std::vector<std::function<TrialResult()>>& jobs, unsigned threads)
{
    std::vector<std::optional<TrialResult>> slots(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++)
        {
            try
            {
                slots[i] = jobs[i]();
            }
            catch (...)
            {
                errors[i] = std::current_exception();
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
    if (threads == 1)
        worker();
    else
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(worker);
    }
    std::vector<TrialResult> out;
    out.reserve(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i)
    {
        if (errors[i])
            std::rethrow_exception(errors[i]);
        out.push_back(std::move(*slots[i]));
    }
    return out;
}

std::filesystem::path default_worlds_dir()
{
    if (const char* env = std::getenv("ASLAM_WORLDS_DIR"))
        return env;
    return ASLAM_WORLDS_DIR;
}

std::vector<std::filesystem::path> list_worlds(const std::filesystem::path& dir)
{
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir))
        return out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".world")
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::filesystem::path resolve_world(const std::string& name_or_path, const std::filesystem::path& dir)
{
    const std::filesystem::path p(name_or_path);
    if (std::filesystem::is_regular_file(p))
        return p;
    const std::filesystem::path named = dir / (name_or_path + ".world");
    if (std::filesystem::is_regular_file(named))
        return named;
    throw ConfigError("unknown world '" + name_or_path + "'");
}

}  // namespace aslam

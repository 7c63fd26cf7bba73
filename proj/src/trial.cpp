#include "aslam/experiments.hpp"

#include <cmath>
#include <deque>
#include <unordered_map>

namespace aslam
{

namespace
{

struct Script
{
    std::deque<ScriptedMotion> motions;
    bool active() const { return !motions.empty(); }
    Twistd next()
    {
        ScriptedMotion& m = motions.front();
        const Twistd u = m.u;
        if (--m.steps <= 0)
            motions.pop_front();
        return u;
    }
};

FsmConfig fsm_config(const MethodConfig& method, const TrialConfig& c)
{
    FsmConfig f;
    f.levels = method.levels;
    f.scoring.utility = c.utility;
    f.scoring.utility.variant = method.utility;
    f.scoring.aggregation = {method.aggregation, c.rho};
    f.view = {c.sensor.fov, c.sensor.max_range, c.n_headings};
    f.planner = c.planner;
    f.planner.robot_radius = c.robot_radius;
    f.frontier.robot_radius = c.robot_radius;
    f.frontier.goal_merge_cells = c.goal_merge_cells;
    f.stuck_eps = c.follower.stuck_eps;
    f.recovery_turn = c.recovery_turn;
    f.recovery_backoff = c.recovery_backoff;
    f.recovery_speed = c.recovery_speed;
    f.max_easy_attempts = c.max_easy_attempts;
    f.max_hard_attempts = c.max_hard_attempts;
    return f;
}

}  // namespace

TrialResult run_trial(const WorldModel& world_in, const MethodConfig& method, std::uint64_t seed, double duration,
                      const TrialConfig& config)
{
    config.validate();
    if (!(duration > 0.0))
        throw ConfigError("trial duration must be positive");
    WorldModel world = world_in;
    world.true_pose = world.start;
    if (world.in_collision(world.start.head<2>()))
        throw ConfigError("world start lies inside an obstacle");

    const double dt = config.nmpc.dt;
    const double total = duration * method.duration_factor;
    const long steps = std::lround(total / dt);

    // independent streams for odometry noise and the fallback draws
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
    std::array<std::uint64_t, 2> streams{};
    {
        std::array<std::uint32_t, 4> words{};
        seq.generate(words.begin(), words.end());
        streams[0] = (std::uint64_t{words[0]} << 32) | words[1];
        streams[1] = (std::uint64_t{words[2]} << 32) | words[3];
    }
    OdometryModel odometry(config.odometry, streams[0]);
    std::mt19937_64 rng(streams[1]);

    TrialResult result;
    TrialSummary& summary = result.summary;
    summary.world = world.name;
    summary.method = method.name;
    summary.seed = seed;
    summary.duration = total;

    OccupancyGrid& grid = result.grid;
    grid = OccupancyGrid(world.truth.geometry, config.logodds, config.p_thr);
    PoseGraph& graph = result.graph;
    graph = PoseGraph(config.slam, world.start);
    EventLog& log = result.events;

    NmpcConfig nmpc = config.nmpc;
    nmpc.limits = config.limits;
    PathFollower follower(nmpc, config.follower);
    Fsm fsm(fsm_config(method, config), dt);
    const ViewConfig feature_view{config.sensor.fov, config.sensor.max_range, config.n_headings};

    std::unordered_map<int, Vec2d> feature_at;
    for (const Feature& f : world.features)
        feature_at[f.id] = f.position;

    const std::vector<std::uint8_t> reachable = reachable_free(world.truth, world.start.head<2>());
    std::size_t reachable_count = 0;
    for (const std::uint8_t r : reachable)
        reachable_count += r;

    double path_length = 0.0;
    double wheel = 0.0;
    std::vector<Vec2d> latest_features;  // features of the newest node, map frame
    bool level3_logged = false;
    Script script;

    auto sense = [&](double t) {
        const Pose2d& truth = world.true_pose;
        const DepthScan scan = depth_scan(world, truth, config.sensor);
        const std::vector<std::size_t> touched = update_from_scan(grid, graph.estimate(), scan);
        fsm.observe(touched, grid.geometry().size());
        std::vector<int> seen = visible_features(world, truth, config.sensor.fov, config.sensor.max_range);
        const auto added = graph.maybe_add_node(t, truth, seen, scan);
        if (!added)
            return;
        const GraphNode& node = graph.nodes()[*added];
        latest_features.clear();
        for (const int id : node.features)
        {
            const Pose2d rel = relative_pose<double>(node.truth, Pose2d(feature_at[id].x(), feature_at[id].y(), 0.0));
            latest_features.push_back(compose_pose<double>(node.estimate, rel).head<2>());
        }
        const auto match = graph.detect_loop_closure(node.features, t);
        if (!match || *match == *added)
            return;
        const double entropy_before = map_entropy(grid).normalized;
        const double area_before = grid.explored_area();
        const ClosureRecord rec = graph.apply_closure(*match, truth, t);
        graph.rebuild_grid(grid);
        log.emit(t, "closure",
                 {{"node", std::to_string(rec.current)},
                  {"matched", std::to_string(rec.matched)},
                  {"entropy_before", EventLog::num(entropy_before)},
                  {"entropy_after", EventLog::num(map_entropy(grid).normalized)},
                  {"area_before", EventLog::num(area_before)},
                  {"area_after", EventLog::num(grid.explored_area())},
                  {"ate_before", EventLog::num(rec.ate_before)},
                  {"ate_after", EventLog::num(rec.ate_after)},
                  {"merged", rec.merged_sessions ? "1" : "0"}});
    };

    auto sample = [&](double t) {
        MetricSample s;
        s.t = t;
        s.explored_area = grid.explored_area();
        std::size_t covered = 0;
        for (std::size_t i = 0; i < reachable.size(); ++i)
            covered += (reachable[i] && grid.explored(i)) ? 1 : 0;
        s.coverage = reachable_count ? static_cast<double>(covered) / static_cast<double>(reachable_count) : 0.0;
        s.normalized_entropy = map_entropy(grid).normalized;
        s.bac = balanced_accuracy(grid, world.truth);
        s.path_length = path_length;
        s.wheel_rotation = wheel;
        s.loop_closures = static_cast<double>(graph.closures().size());
        s.ate_rmse = graph.ate_rmse();
        result.raw.push_back(s);
        if (!summary.reached_target && s.coverage >= config.coverage_target)
        {
            summary.reached_target = true;
            summary.t_target = t;
            summary.path_length_target = s.path_length;
            summary.entropy_target = s.normalized_entropy;
        }
    };

    auto handle = [&](const FsmAction& a, double now) {
        switch (a.kind)
        {
        case FsmAction::Kind::none:
            break;
        case FsmAction::Kind::dispatch:
            follower.dispatch(a.waypoint.pose, now);
            level3_logged = false;
            break;
        case FsmAction::Kind::scripted:
            follower.idle();
            if (a.new_session)
            {
                graph.start_session();
                grid.clear();
                ++summary.sessions;
                log.emit(now, "session", {{"id", std::to_string(graph.session())}});
            }
            script.motions.assign(a.script.begin(), a.script.end());
            break;
        case FsmAction::Kind::fail:
            follower.idle();
            summary.failed = true;
            summary.failure = "recovery_exhausted";
            break;
        }
    };

    sense(0.0);
    sample(0.0);
    log.emit(0.0, "start", {{"method", method.name}, {"seed", std::to_string(seed)}});

    for (long k = 0; k < steps && !summary.failed; ++k)
    {
        const double now = static_cast<double>(k) * dt;
        const Pose2d estimate = graph.estimate();
        Twistd u = Twistd::Zero();
        bool scripted = false;

        if (script.active())
        {
            u = script.next();
            scripted = true;
        }
        else
        {
            if (follower.status() == ControllerStatus::operating && fsm.target_blocked(grid, now, log))
                follower.idle();
            const ControllerStatus before = follower.status();
            const FsmAction action = fsm.tick(before, grid, graph, estimate, rng, now, log);
            handle(action, now);
            if (summary.failed)
                break;
            if (script.active())
            {
                u = script.next();
                scripted = true;
            }
            else if (follower.status() == ControllerStatus::operating && fsm.current())
            {
                const QueuedWaypoint& wp = *fsm.current();
                double heading = wp.pose.z();
                if (method.levels.third)
                {
                    const double beta = feature_heading(latest_features, wp.pose.head<2>(), estimate.z(), grid,
                                                        feature_view);
                    const double d_t = (estimate.head<2>() - wp.pose.head<2>()).norm();
                    heading = blended_heading(wp.pose.z(), beta, d_t, config.blend.kappa2, config.blend.kappa3);
                    if (!level3_logged)
                    {
                        log.emit(now, "level3", {{"theta_star", EventLog::num(wp.pose.z())},
                                                 {"beta", EventLog::num(beta)},
                                                 {"gamma", EventLog::num(heading)}});
                        level3_logged = true;
                    }
                }
                const std::vector<ObstacleTrack> tracks =
                    obstacles_from_grid(grid, estimate, config.obstacle_radius, config.obstacle_tile, nmpc.horizon);
                const std::vector<ObstacleTrack> selected =
                    obstacle_selection(tracks, follower.nmpc().predicted(), nmpc.max_obstacles);
                u = follower.step(estimate, heading, selected, now);
                if (follower.status() == ControllerStatus::recovery)
                    log.emit(now, "controller_recovery", {{"x", EventLog::num(estimate.x())},
                                                          {"y", EventLog::num(estimate.y())}});
            }
        }

        // physics: a command that would put the robot into an obstacle is a bump
        const Pose2d before = world.true_pose;
        const Pose2d after = step_kinematics<double>(before, u, dt);
        if (world.in_collision(after.head<2>()))
        {
            ++summary.collisions;
            log.emit(now, "collision", {{"x", EventLog::num(before.x())}, {"y", EventLog::num(before.y())}});
            u = Twistd::Zero();
            if (summary.collisions > config.max_collisions)
            {
                summary.failed = true;
                summary.failure = "collisions";
                log.emit(now, "trial_failed", {{"reason", "collisions"}});
                break;
            }
            if (!scripted)
            {
                follower.idle();
                handle(fsm.recovery(grid, estimate, now, log), now);
            }
        }
        else
            world.true_pose = after;

        wheel += wheel_rotation_increment<double>(u, dt, config.wheels);
        path_length += (world.true_pose.head<2>() - before.head<2>()).norm();
        graph.integrate_odometry(odometry.reading(relative_pose<double>(before, world.true_pose)));

        const double t_next = static_cast<double>(k + 1) * dt;
        sense(t_next);

        if (scripted && !script.active())
            handle(fsm.script_finished(graph.estimate(), t_next, log), t_next);
        sample(t_next);
    }

    summary.recoveries_easy = static_cast<int>(log.count("recovery_easy"));
    summary.recoveries_hard = static_cast<int>(log.count("recovery_hard"));
    const MetricSample& last = result.raw.back();
    summary.final = last;
    summary.loops_per_m = last.path_length > 0.0 ? last.loop_closures / last.path_length : 0.0;
    summary.wheel_per_m = last.path_length > 0.0 ? last.wheel_rotation / last.path_length : 0.0;
    if (!summary.reached_target)
    {
        summary.t_target = last.t;
        summary.path_length_target = last.path_length;
        summary.entropy_target = last.normalized_entropy;
    }
    log.emit(last.t, "end", {{"status", summary.failed ? "failed" : "ok"},
                             {"closures", std::to_string(graph.closures().size())},
                             {"path_length", EventLog::num(path_length)}});
    result.bucketed = bucket_metrics(result.raw, config.bucket);
    return result;
}

}  // namespace aslam

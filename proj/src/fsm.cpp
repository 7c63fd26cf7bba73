#include "aslam/fsm.hpp"

#include "aslam/keyvalue.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace aslam
{

std::string EventLog::num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void EventLog::emit(double t, std::string_view kind, const Fields& fields)
{
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "t=%.2f", t);
    std::string line = stamp;
    line += " event=";
    line += kind;
    for (const auto& [k, v] : fields)
    {
        line += ' ';
        line += k;
        line += '=';
        line += v;
    }
    lines_.push_back(std::move(line));
}

std::size_t EventLog::count(std::string_view kind) const
{
    std::size_t n = 0;
    for (const std::string& l : lines_)
        if (parse_event(l).first == kind)
            ++n;
    return n;
}

void EventLog::write(std::ostream& out) const
{
    for (const std::string& l : lines_)
        out << l << '\n';
}

std::pair<std::string, EventLog::Fields> parse_event(std::string_view line)
{
    std::pair<std::string, EventLog::Fields> out;
    std::size_t pos = 0;
    while (pos < line.size())
    {
        const std::size_t end = std::min(line.find(' ', pos), line.size());
        const std::string_view token = line.substr(pos, end - pos);
        const std::size_t eq = token.find('=');
        if (eq != std::string_view::npos)
        {
            std::string key(token.substr(0, eq));
            std::string value(token.substr(eq + 1));
            if (key == "event")
                out.first = std::move(value);
            else
                out.second.emplace_back(std::move(key), std::move(value));
        }
        pos = end + 1;
    }
    return out;
}

std::optional<std::string> event_field(const EventLog::Fields& fields, std::string_view key)
{
    for (const auto& [k, v] : fields)
        if (k == key)
            return v;
    return std::nullopt;
}

void FsmConfig::validate() const
{
    if (!(stuck_eps > 0.0) || !(recovery_speed > 0.0) || !(recovery_backoff >= 0.0))
        throw ConfigError("fsm: recovery parameters must be positive");
    if (max_easy_attempts < 0 || max_hard_attempts < 0)
        throw ConfigError("fsm: attempt limits must be >= 0");
    if (view.n_headings < 1 || !(view.fov > 0.0) || !(view.d_thr > 0.0))
        throw ConfigError("fsm: bad view configuration");
    scoring.utility.validate();
}

Fsm::Fsm(FsmConfig config, double dt) : config_(std::move(config)), dt_(dt)
{
    config_.validate();
    if (!(dt_ > 0.0))
        throw ConfigError("fsm: dt must be positive");
}

bool Fsm::blocked(const OccupancyGrid& grid, const Vec2d& p) const
{
    const GridGeometry& g = grid.geometry();
    const auto c = g.to_cell(p);
    if (!c)
        return true;
    const double res = g.resolution();
    const double r = config_.planner.robot_radius;
    const int reach = static_cast<int>(std::ceil(r / res));
    for (int dy = -reach; dy <= reach; ++dy)
        for (int dx = -reach; dx <= reach; ++dx)
        {
            const CellIndex n{c->x + dx, c->y + dy};
            if (g.contains(n) && res * std::hypot(dx, dy) <= r + 1e-9 && grid.is_occupied(g.linear(n)))
                return true;
        }
    return false;
}

FsmAction Fsm::tick(ControllerStatus status, const OccupancyGrid& grid, const PoseGraph& graph,
                    const Pose2d& estimate, std::mt19937_64& rng, double now, EventLog& log)
{
    switch (status)
    {
    case ControllerStatus::operating:
        return {};
    case ControllerStatus::recovery:
        return recovery(grid, estimate, now, log);
    case ControllerStatus::goal_reached:
        escalation_ = 0;
        hard_attempts_ = 0;
        log.emit(now, "arrived", {{"x", EventLog::num(estimate.x())}, {"y", EventLog::num(estimate.y())}});
        [[fallthrough]];
    case ControllerStatus::waiting:
        break;
    }
    current_.reset();
    while (!queue_.empty() && blocked(grid, queue_.front().pose.head<2>()))
    {
        log.emit(now, "skip_blocked", {{"x", EventLog::num(queue_.front().pose.x())},
                                       {"y", EventLog::num(queue_.front().pose.y())}});
        queue_.pop_front();
    }
    if (!queue_.empty())
        return dispatch_next(grid, now, log);
    return plan(grid, graph, estimate, rng, now, log);
}

FsmAction Fsm::dispatch_next(const OccupancyGrid& grid, double now, EventLog& log)
{
    QueuedWaypoint w = queue_.front();
    queue_.pop_front();
    if (config_.levels.second)
    {
        if (segment_covered_.capacity() != grid.geometry().size())
            segment_covered_ = CellMask(grid.geometry().size());
        const HeadingChoice h = refine_next_heading(grid, w.pose.head<2>(), config_.scoring.utility, plan_goal_,
                                                    config_.view, &segment_covered_);
        log.emit(now, "level2", {{"before", EventLog::num(w.pose.z())}, {"after", EventLog::num(h.theta)}});
        w.pose.z() = h.theta;
    }
    current_ = w;
    log.emit(now, "dispatch",
             {{"x", EventLog::num(w.pose.x())},
              {"y", EventLog::num(w.pose.y())},
              {"heading", EventLog::num(w.pose.z())},
              {"tangent", EventLog::num(w.tangent)},
              {"remaining", std::to_string(queue_.size())}});
    FsmAction a;
    a.kind = FsmAction::Kind::dispatch;
    a.waypoint = w;
    return a;
}

FsmAction Fsm::rotate_full(double now, EventLog& log, std::string_view reason)
{
    log.emit(now, "rotate360", {{"reason", std::string(reason)}});
    FsmAction a;
    a.kind = FsmAction::Kind::scripted;
    const double rate = 1.0;
    a.script.push_back({Twistd(0.0, 0.0, rate), static_cast<int>(std::ceil(kTwoPi / (rate * dt_) - 1e-9))});
    return a;
}

FsmAction Fsm::plan(const OccupancyGrid& grid, const PoseGraph& graph, const Pose2d& estimate, std::mt19937_64& rng,
                    double now, EventLog& log)
{
    const Vec2d here = estimate.head<2>();
    const std::vector<FrontierCluster> clusters = extract_frontiers(grid, here, config_.frontier);
    std::vector<Vec2d> candidates =
        candidate_goals(clusters, grid, here, previous_goal_, config_.frontier, config_.planner);
    bool fallback = false;
    if (candidates.empty())
    {
        const std::vector<Pose2d> nodes = graph.session_poses();
        const FallbackAction f = fallback_action(nodes, rng);
        if (f.kind == FallbackAction::Kind::rotate_in_place_360)
            return rotate_full(now, log, "empty_graph");
        log.emit(now, "fallback_node", {{"node", std::to_string(f.node)},
                                        {"x", EventLog::num(f.target.x())},
                                        {"y", EventLog::num(f.target.y())}});
        candidates.push_back(f.target);
        fallback = true;
    }

    PathScoring scoring = config_.scoring;
    scoring.optimize_intermediate = config_.levels.first;
    PlanResult result;
    try
    {
        result = plan_informative_path(grid, estimate, candidates, scoring, config_.view, config_.planner);
    }
    catch (const UnreachableError&)
    {
        return rotate_full(now, log, fallback ? "fallback_unreachable" : "unreachable");
    }
    previous_goal_ = result.goal;
    plan_goal_ = result.waypoints.back().pose.head<2>();
    log.emit(now, "plan", {{"candidates", std::to_string(candidates.size())},
                           {"goal_x", EventLog::num(result.goal.x())},
                           {"goal_y", EventLog::num(result.goal.y())},
                           {"waypoints", std::to_string(result.waypoints.size())},
                           {"utility", EventLog::num(result.utility)},
                           {"fallback", fallback ? "1" : "0"}});

    queue_.clear();
    segment_covered_ = CellMask(grid.geometry().size());
    const std::vector<Waypoint>& wps = result.waypoints;
    for (std::size_t i = 0; i < wps.size(); ++i)
    {
        // direction of travel: towards the next waypoint for the first, from the previous one otherwise
        Vec2d step = Vec2d::Zero();
        if (i > 0)
            step = wps[i].pose.head<2>() - wps[i - 1].pose.head<2>();
        else if (wps.size() > 1)
            step = wps[1].pose.head<2>() - wps[0].pose.head<2>();
        const double tangent = step.squaredNorm() > 0.0 ? wrap_angle(std::atan2(step.y(), step.x())) : estimate.z();
        queue_.push_back({wps[i].pose, tangent});
    }

    // first waypoint goes out as planned
    QueuedWaypoint w = queue_.front();
    queue_.pop_front();
    current_ = w;
    log.emit(now, "dispatch",
             {{"x", EventLog::num(w.pose.x())},
              {"y", EventLog::num(w.pose.y())},
              {"heading", EventLog::num(w.pose.z())},
              {"tangent", EventLog::num(w.tangent)},
              {"remaining", std::to_string(queue_.size())}});
    FsmAction a;
    a.kind = FsmAction::Kind::dispatch;
    a.waypoint = w;
    return a;
}

FsmAction Fsm::recovery(const OccupancyGrid& grid, const Pose2d& estimate, double now, EventLog& log)
{
    queue_.clear();
    current_.reset();
    ++escalation_;
    if (escalation_ > config_.max_easy_attempts)
        return hard_recovery(estimate, now, log);

    phase_ = Phase::easy;
    recovery_anchor_ = estimate;
    FsmAction a;
    a.kind = FsmAction::Kind::scripted;
    const double turn_steps = std::ceil(config_.recovery_turn / dt_ - 1e-9);
    if (turn_steps > 0)
        a.script.push_back({Twistd(0.0, 0.0, config_.recovery_turn / (turn_steps * dt_)), static_cast<int>(turn_steps)});

    // direction away from the nearest mapped obstacle within 1 m
    const GridGeometry& g = grid.geometry();
    const Vec2d p = estimate.head<2>();
    const auto c = g.to_cell(p);
    std::optional<Vec2d> nearest;
    double best = std::numeric_limits<double>::infinity();
    if (c)
    {
        const int reach = static_cast<int>(std::ceil(1.0 / g.resolution()));
        for (int dy = -reach; dy <= reach; ++dy)
            for (int dx = -reach; dx <= reach; ++dx)
            {
                const CellIndex n{c->x + dx, c->y + dy};
                if (!g.contains(n) || !grid.is_occupied(g.linear(n)))
                    continue;
                const double d = (g.center(n) - p).norm();
                if (d < best && d > 0.0)
                {
                    best = d;
                    nearest = g.center(n);
                }
            }
    }
    if (nearest && config_.recovery_backoff > 0.0)
    {
        const Vec2d away = (p - *nearest).normalized();
        const double heading_after = wrap_angle(estimate.z() + config_.recovery_turn);
        const double ch = std::cos(heading_after);
        const double sh = std::sin(heading_after);
        const Vec2d body(ch * away.x() + sh * away.y(), -sh * away.x() + ch * away.y());
        const int steps = static_cast<int>(std::ceil(config_.recovery_backoff / (config_.recovery_speed * dt_) - 1e-9));
        a.script.push_back({Twistd(body.x() * config_.recovery_speed, body.y() * config_.recovery_speed, 0.0), steps});
    }
    log.emit(now, "recovery_easy", {{"attempt", std::to_string(escalation_)},
                                    {"obstacle", nearest ? EventLog::num(best) : std::string("none")}});
    return a;
}

FsmAction Fsm::hard_recovery(const Pose2d& estimate, double now, EventLog& log)
{
    ++hard_attempts_;
    if (hard_attempts_ > config_.max_hard_attempts)
    {
        phase_ = Phase::none;
        log.emit(now, "trial_failed", {{"reason", "recovery_exhausted"}});
        FsmAction a;
        a.kind = FsmAction::Kind::fail;
        return a;
    }
    phase_ = Phase::hard;
    recovery_anchor_ = estimate;
    previous_goal_.reset();
    plan_goal_.reset();
    log.emit(now, "recovery_hard", {{"attempt", std::to_string(hard_attempts_)}});
    FsmAction a = rotate_full(now, log, "new_session");
    a.new_session = true;
    return a;
}

FsmAction Fsm::script_finished(const Pose2d& estimate, double now, EventLog& log)
{
    const Phase finished = phase_;
    phase_ = Phase::none;
    if (finished == Phase::easy)
    {
        const double moved = (estimate.head<2>() - recovery_anchor_.head<2>()).norm();
        if (moved < config_.stuck_eps)
        {
            log.emit(now, "recovery_easy_failed", {{"moved", EventLog::num(moved)}});
            return hard_recovery(estimate, now, log);
        }
    }
    return {};
}

void Fsm::observe(std::span<const std::size_t> cells, std::size_t grid_size)
{
    if (segment_covered_.capacity() != grid_size)
        segment_covered_ = CellMask(grid_size);
    segment_covered_.insert_all(cells);
}

bool Fsm::target_blocked(const OccupancyGrid& grid, double now, EventLog& log)
{
    if (!current_ || !blocked(grid, current_->pose.head<2>()))
        return false;
    log.emit(now, "target_blocked", {{"x", EventLog::num(current_->pose.x())},
                                     {"y", EventLog::num(current_->pose.y())}});
    current_.reset();
    queue_.clear();
    return true;
}

}  // namespace aslam

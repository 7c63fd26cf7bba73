#pragma once

#include "aslam/controller.hpp"
#include "aslam/frontier.hpp"
#include "aslam/grid_map.hpp"
#include "aslam/planner.hpp"
#include "aslam/slam_proxy.hpp"

#include <deque>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aslam
{

/// Line-delimited event records: `t=<sim time> event=<kind> key=value ...`.
class EventLog
{
public:
    using Fields = std::vector<std::pair<std::string, std::string>>;

    void emit(double t, std::string_view kind, const Fields& fields = {});
    const std::vector<std::string>& lines() const { return lines_; }
    std::size_t count(std::string_view kind) const;
    void write(std::ostream& out) const;

    static std::string num(double v);

private:
    std::vector<std::string> lines_;
};

/// Parses one record back into (kind, fields); `t` is returned as a field.
std::pair<std::string, EventLog::Fields> parse_event(std::string_view line);
std::optional<std::string> event_field(const EventLog::Fields& fields, std::string_view key);

struct ActivenessLevels
{
    bool first = true;
    bool second = true;
    bool third = true;
};

struct FsmConfig
{
    ActivenessLevels levels;
    PathScoring scoring;
    ViewConfig view;
    PlannerConfig planner;
    FrontierConfig frontier;
    double stuck_eps = 0.05;
    double recovery_turn = kPi / 2.0;   // rad, easy recovery rotation
    double recovery_backoff = 0.3;      // m, easy recovery translation
    double recovery_speed = 0.3;        // m/s
    int max_easy_attempts = 2;          // consecutive, reset on arrival
    int max_hard_attempts = 2;

    void validate() const;
};

struct ScriptedMotion
{
    Twistd u = Twistd::Zero();
    int steps = 0;
};

struct QueuedWaypoint
{
    Pose2d pose = Pose2d::Zero();
    double tangent = 0.0;
};

struct FsmAction
{
    enum class Kind
    {
        none,
        dispatch,
        scripted,
        fail
    };
    Kind kind = Kind::none;
    QueuedWaypoint waypoint;
    bool new_session = false;
    std::vector<ScriptedMotion> script;
};

/// Decision logic of the exploration loop. One tick per control step; the trial
/// loop executes the returned action.
class Fsm
{
public:
    explicit Fsm(FsmConfig config, double dt = 0.1);

    const FsmConfig& config() const { return config_; }

    FsmAction tick(ControllerStatus status, const OccupancyGrid& grid, const PoseGraph& graph, const Pose2d& estimate,
                   std::mt19937_64& rng, double now, EventLog& log);

    /// Easy recovery (turn, then back away from the nearest known obstacle) until
    /// the attempts are used up, then a new mapping session; fails after that.
    FsmAction recovery(const OccupancyGrid& grid, const Pose2d& estimate, double now, EventLog& log);

    /// Called when a scripted motion ends; escalates a stuck easy recovery.
    FsmAction script_finished(const Pose2d& estimate, double now, EventLog& log);

    /// True when the dispatched waypoint now lies on or next to a mapped obstacle;
    /// the queue is dropped so the next tick replans.
    bool target_blocked(const OccupancyGrid& grid, double now, EventLog& log);

    /// Cells updated by the sensor since the current plan was made; level-2
    /// refinement excludes them.
    void observe(std::span<const std::size_t> cells, std::size_t grid_size);
    const CellMask& segment_covered() const { return segment_covered_; }

    const std::deque<QueuedWaypoint>& queue() const { return queue_; }
    const std::optional<QueuedWaypoint>& current() const { return current_; }
    const std::optional<Vec2d>& previous_goal() const { return previous_goal_; }
    int escalation() const { return escalation_; }

private:
    enum class Phase
    {
        none,
        easy,
        hard
    };

    FsmConfig config_;
    double dt_;
    std::deque<QueuedWaypoint> queue_;
    std::optional<QueuedWaypoint> current_;
    std::optional<Vec2d> previous_goal_;
    std::optional<Vec2d> plan_goal_;
    int escalation_ = 0;
    int hard_attempts_ = 0;
    Phase phase_ = Phase::none;
    Pose2d recovery_anchor_ = Pose2d::Zero();
    CellMask segment_covered_{0};

    FsmAction dispatch_next(const OccupancyGrid& grid, double now, EventLog& log);
    FsmAction plan(const OccupancyGrid& grid, const PoseGraph& graph, const Pose2d& estimate, std::mt19937_64& rng,
                   double now, EventLog& log);
    FsmAction rotate_full(double now, EventLog& log, std::string_view reason);
    FsmAction hard_recovery(const Pose2d& estimate, double now, EventLog& log);
    bool blocked(const OccupancyGrid& grid, const Vec2d& p) const;
};

}  // namespace aslam

#pragma once

#include "aslam/controller.hpp"
#include "aslam/fsm.hpp"
#include "aslam/grid_map.hpp"
#include "aslam/keyvalue.hpp"
#include "aslam/slam_proxy.hpp"
#include "aslam/world_sim.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace aslam
{

struct MethodConfig
{
    std::string name;
    ActivenessLevels levels;
    UtilityVariant utility = UtilityVariant::u1;
    AggregationKind aggregation = AggregationKind::weighted_average;
    double duration_factor = 1.0;  // applied to the requested trial duration
};

const std::vector<std::string>& method_names();
/// Throws ConfigError for names outside the matrix.
MethodConfig method_config(const std::string& name, double extended_factor = 2.0);

/// Every physical and algorithmic parameter of a trial.
struct TrialConfig
{
    SensorConfig sensor;
    LogOddsModel logodds;
    double p_thr = 0.7;
    OdometryNoise odometry;
    RobotLimits limits;
    WheelGeometry wheels;
    double robot_radius = 0.2;
    NmpcConfig nmpc;
    double obstacle_radius = 2.0;
    double obstacle_tile = 0.5;
    UtilityMode utility;
    double rho = 0.25;
    int n_headings = 16;
    HeadingBlend blend;
    PlannerConfig planner;
    int goal_merge_cells = 2;
    FollowerConfig follower;
    double recovery_turn = kPi / 2.0;
    double recovery_backoff = 0.3;
    double recovery_speed = 0.3;
    int max_easy_attempts = 2;
    int max_hard_attempts = 2;
    SlamConfig slam;
    int max_collisions = 10;
    double bucket = 2.0;
    double coverage_target = 0.85;
    double extended_factor = 2.0;

    /// Overrides from `key = value` pairs; unknown keys are errors. On error nothing changes.
    void apply(const KeyValueList& kv);
    /// All parameters as `key = value` lines, in a fixed order.
    void echo(std::ostream& out) const;
    void validate() const;
};

TrialConfig load_trial_config(const std::filesystem::path& file);

struct MetricSample
{
    double t = 0.0;
    double explored_area = 0.0;
    double coverage = 0.0;
    double normalized_entropy = 0.0;
    double bac = 0.0;
    double path_length = 0.0;
    double wheel_rotation = 0.0;
    double loop_closures = 0.0;
    double ate_rmse = 0.0;
};

/// Last sample per `bin`-second window; empty windows repeat the previous one.
/// Bin k covers [k*bin, (k+1)*bin) and is stamped with its end time.
std::vector<MetricSample> bucket_metrics(const std::vector<MetricSample>& raw, double bin);

struct TrialSummary
{
    std::string world;
    std::string method;
    std::uint64_t seed = 0;
    double duration = 0.0;
    bool failed = false;
    std::string failure;
    MetricSample final;
    double loops_per_m = 0.0;
    double wheel_per_m = 0.0;
    bool reached_target = false;  // coverage target reached
    double t_target = 0.0;
    double path_length_target = 0.0;       // final value when the target was never reached
    double entropy_target = 0.0;
    int collisions = 0;
    int recoveries_easy = 0;
    int recoveries_hard = 0;
    int sessions = 1;
};

struct TrialResult
{
    TrialSummary summary;
    std::vector<MetricSample> raw;
    std::vector<MetricSample> bucketed;
    OccupancyGrid grid;
    PoseGraph graph;
    EventLog events;
};

/// Closed-loop simulation of one (world, method, seed). Deterministic.
TrialResult run_trial(const WorldModel& world, const MethodConfig& method, std::uint64_t seed, double duration,
                      const TrialConfig& config);

/// Cells of the ground truth reachable through free cells from the start (8-connected).
std::vector<std::uint8_t> reachable_free(const GroundTruthMap& truth, const Vec2d& start);

void write_metrics_csv(std::ostream& out, const std::vector<MetricSample>& rows);
std::vector<MetricSample> read_metrics_csv(std::istream& in);
void write_summary_csv(std::ostream& out, const std::vector<TrialSummary>& rows);
std::vector<TrialSummary> read_summary_csv(std::istream& in);

/// Writes metrics.csv, summary.csv, grid.pgm (+ .meta), graph.txt, events.log and params.txt.
void write_trial_outputs(const std::filesystem::path& dir, const TrialResult& result, const TrialConfig& config);

struct Stat
{
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for one trial
    int n = 0;
};

Stat mean_std(const std::vector<double>& values);

struct MethodSummary
{
    std::string world;
    std::string method;
    int trials = 0;
    int failures = 0;
    int reached_target = 0;
    std::map<std::string, Stat> stats;  // keyed by metric name
};

/// Metric names reported per (world, method).
const std::vector<std::string>& summary_metrics();
double summary_metric(const TrialSummary& s, const std::string& name);

/// Groups trials by (world, method); failed trials are counted, and included in the
/// statistics so nothing is silently dropped.
std::vector<MethodSummary> compare_methods(const std::vector<TrialSummary>& trials);

/// Relative difference of `metric` means, (other - reference) / reference.
std::optional<double> relative_delta(const std::vector<MethodSummary>& table, const std::string& world,
                                     const std::string& reference, const std::string& other,
                                     const std::string& metric);

void write_comparison_csv(std::ostream& out, const std::vector<MethodSummary>& table);
void write_comparison_text(std::ostream& out, const std::vector<MethodSummary>& table,
                           const std::string& reference = "A");

/// Finds every summary.csv below `dir`.
std::vector<TrialSummary> collect_summaries(const std::filesystem::path& dir);

/// Runs jobs on a fixed pool of worker threads; results keep the input order.
std::vector<TrialResult> run_trials_parallel(const std::vector<std::function<TrialResult()>>& jobs, unsigned threads);

/// Directory holding the bundled worlds (ASLAM_WORLDS_DIR env var overrides).
std::filesystem::path default_worlds_dir();
std::vector<std::filesystem::path> list_worlds(const std::filesystem::path& dir);
std::filesystem::path resolve_world(const std::string& name_or_path, const std::filesystem::path& dir);

}  // namespace aslam

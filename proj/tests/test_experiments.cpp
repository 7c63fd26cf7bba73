#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace aslam;

namespace
{

MetricSample at(double t, double v)
{
    MetricSample s;
    s.t = t;
    s.explored_area = v;
    s.path_length = v;
    return s;
}

const WorldModel& toy_room()
{
    static const WorldModel w = load_world(resolve_world("toy_room", default_worlds_dir()));
    return w;
}

std::string metrics_text(const TrialResult& r)
{
    std::ostringstream out;
    write_metrics_csv(out, r.bucketed);
    return out.str();
}

std::vector<std::pair<std::string, EventLog::Fields>> events_of(const TrialResult& r, std::string_view kind)
{
    std::vector<std::pair<std::string, EventLog::Fields>> out;
    for (const std::string& l : r.events.lines())
    {
        auto e = parse_event(l);
        if (e.first == kind)
            out.push_back(std::move(e));
    }
    return out;
}

TrialSummary summary(const std::string& method, double bac, double loops, bool failed = false)
{
    TrialSummary s;
    s.world = "w";
    s.method = method;
    s.final.bac = bac;
    s.loops_per_m = loops;
    s.failed = failed;
    return s;
}

}  // namespace

TEST_CASE("method matrix")
{
    CHECK(method_names().size() == 12);
    const MethodConfig a = method_config("A");
    CHECK((a.levels.first && a.levels.second && a.levels.third));
    CHECK(a.utility == UtilityVariant::u1);
    CHECK(a.aggregation == AggregationKind::weighted_average);
    CHECK(a.duration_factor == 1.0);
    CHECK(method_config("A_L", 2.5).duration_factor == 2.5);
    CHECK(method_config("A_S").aggregation == AggregationKind::weighted_sum);
    CHECK(method_config("A_O").utility == UtilityVariant::u2);
    CHECK(method_config("A_DW_O").utility == UtilityVariant::u3);
    const MethodConfig a1 = method_config("A_1");
    CHECK((a1.levels.first && !a1.levels.second && !a1.levels.third));
    const MethodConfig ol23 = method_config("OL_2_3");
    CHECK((!ol23.levels.first && ol23.levels.second && ol23.levels.third));
    CHECK(ol23.aggregation == AggregationKind::goal_only);
    const MethodConfig ol0 = method_config("OL_0");
    CHECK((!ol0.levels.first && !ol0.levels.second && !ol0.levels.third));
    const MethodConfig inter = method_config("INTER_0");
    CHECK((!inter.levels.first && !inter.levels.second && !inter.levels.third));
    CHECK(inter.aggregation == AggregationKind::interpolated);
    CHECK_THROWS_AS(method_config("B"), ConfigError);
    CHECK_THROWS_AS(method_config("OL_3"), ConfigError);
}

TEST_CASE("bucket metrics")
{
    CHECK(bucket_metrics({}, 2.0).empty());

    const auto one = bucket_metrics({at(0.3, 1.0), at(1.9, 2.0)}, 2.0);
    REQUIRE(one.size() == 1);
    CHECK(one[0].t == 2.0);
    CHECK(one[0].explored_area == 2.0);

    // a gap spanning three bins: the middle bins repeat the prior value
    const auto gap = bucket_metrics({at(0.5, 1.0), at(7.0, 5.0)}, 2.0);
    REQUIRE(gap.size() == 4);
    CHECK(gap[0].explored_area == 1.0);
    CHECK(gap[1].explored_area == 1.0);
    CHECK(gap[2].explored_area == 1.0);
    CHECK(gap[3].explored_area == 5.0);
    CHECK(gap[3].t == 8.0);

    // boundary samples belong to the later bin
    const auto edge = bucket_metrics({at(0.0, 1.0), at(2.0, 2.0), at(3.9, 3.0)}, 2.0);
    REQUIRE(edge.size() == 2);
    CHECK(edge[0].explored_area == 1.0);
    CHECK(edge[1].explored_area == 3.0);

    CHECK_THROWS_AS(bucket_metrics({at(1.0, 1.0), at(0.5, 1.0)}, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(bucket_metrics({at(1.0, 1.0)}, 0.0), std::invalid_argument);

    // against a direct oracle on a dense series
    std::vector<MetricSample> raw;
    for (int k = 0; k <= 1000; ++k)
        raw.push_back(at(0.1 * k, k));
    const auto b = bucket_metrics(raw, 2.0);
    REQUIRE(b.size() == 51);
    for (std::size_t i = 0; i + 1 < b.size(); ++i)
        CHECK(b[i].explored_area == 20.0 * i + 19.0);
    CHECK(b.back().explored_area == 1000.0);
}

TEST_CASE("trial configuration")
{
    TrialConfig c;
    c.apply({{"nmpc.q_obs", "0.5"}, {"sensor.fov_deg", "90"}, {"slam.n_match", "6"}});
    CHECK(c.nmpc.q_obs == 0.5);
    CHECK(c.sensor.fov == doctest::Approx(kPi / 2.0).epsilon(1e-15));
    CHECK(c.slam.n_match == 6);
    CHECK_THROWS_AS(c.apply({{"nmpc.qobs", "1"}}), ConfigError);
    CHECK_THROWS_AS(c.apply({{"slam.n_match", "2.5"}}), ConfigError);
    CHECK_THROWS_AS(c.apply({{"map.p_thr", "1.5"}}), ConfigError);
    CHECK_THROWS_AS(c.apply({{"robot.radius", "abc"}}), ConfigError);
    // a rejected update leaves the configuration untouched
    CHECK_THROWS_AS(c.apply({{"nmpc.q_obs", "2"}, {"map.p_thr", "0.2"}}), ConfigError);
    CHECK(c.nmpc.q_obs == 0.5);
    CHECK(c.p_thr == 0.7);

    // echo output feeds back into an identical configuration
    std::ostringstream echoed;
    c.echo(echoed);
    std::istringstream in(echoed.str());
    TrialConfig d;
    d.apply(parse_key_values(in));
    std::ostringstream again;
    d.echo(again);
    CHECK(again.str() == echoed.str());

    const auto file = std::filesystem::temp_directory_path() / "aslam_test_config.txt";
    {
        std::ofstream f(file);
        f << "# comment\n\nrobot.radius = 0.25\nmetrics.bucket = 1\n";
    }
    const TrialConfig loaded = load_trial_config(file);
    CHECK(loaded.robot_radius == 0.25);
    CHECK(loaded.bucket == 1.0);
    std::filesystem::remove(file);
}

TEST_CASE("csv round trips")
{
    std::vector<MetricSample> rows;
    for (int k = 0; k < 5; ++k)
    {
        MetricSample s;
        s.t = 2.0 * k;
        s.explored_area = 1.0 / 3.0 + k;
        s.coverage = 0.1 * k;
        s.normalized_entropy = 0.9 - 0.01 * k;
        s.bac = 0.5 + 0.07 * k;
        s.path_length = 1.25 * k;
        s.wheel_rotation = 3.5 * k;
        s.loop_closures = k;
        s.ate_rmse = 1e-3 * k;
        rows.push_back(s);
    }
    std::stringstream m;
    write_metrics_csv(m, rows);
    const auto back = read_metrics_csv(m);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        CHECK(back[i].explored_area == doctest::Approx(rows[i].explored_area).epsilon(1e-8));
        CHECK(back[i].ate_rmse == doctest::Approx(rows[i].ate_rmse).epsilon(1e-8));
        CHECK(back[i].loop_closures == rows[i].loop_closures);
    }
    std::istringstream bad("x,y\n1,2\n");
    CHECK_THROWS_AS(read_metrics_csv(bad), ConfigError);

    TrialSummary s = summary("OL_2", 0.75, 0.125, true);
    s.seed = 42;
    s.failure = "collisions";
    s.final = rows[3];
    s.reached_target = true;
    s.path_length_target = 12.5;
    s.collisions = 11;
    s.recoveries_easy = 3;
    s.sessions = 2;
    std::stringstream out;
    write_summary_csv(out, {s});
    const auto read = read_summary_csv(out);
    REQUIRE(read.size() == 1);
    const TrialSummary& r = read[0];
    CHECK(r.method == "OL_2");
    CHECK(r.seed == 42);
    CHECK(r.failed);
    CHECK(r.failure == "collisions");
    CHECK(r.loops_per_m == 0.125);
    CHECK(r.reached_target);
    CHECK(r.path_length_target == 12.5);
    CHECK(r.collisions == 11);
    CHECK(r.recoveries_easy == 3);
    CHECK(r.sessions == 2);
    CHECK(r.final.wheel_rotation == doctest::Approx(s.final.wheel_rotation).epsilon(1e-9));
}

TEST_CASE("compare methods")
{
    CHECK(mean_std({}).n == 0);
    const Stat st = mean_std({1.0, 2.0, 4.0});
    CHECK(st.mean == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
    CHECK(st.std == doctest::Approx(std::sqrt(((4.0 / 3) * (4.0 / 3) + (1.0 / 3) * (1.0 / 3) + (5.0 / 3) * (5.0 / 3)) / 2.0))
                        .epsilon(1e-12));
    CHECK(mean_std({5.0}).std == 0.0);

    const std::vector<TrialSummary> trials = {summary("A", 0.8, 0.1), summary("A", 0.6, 0.3),
                                              summary("B", 0.8, 0.1), summary("B", 0.6, 0.3, true),
                                              summary("C", 0.9, 0.5)};
    const auto table = compare_methods(trials);
    REQUIRE(table.size() == 3);
    CHECK(table[0].method == "A");
    CHECK(table[0].trials == 2);
    CHECK(table[0].failures == 0);
    CHECK(table[1].failures == 1);
    CHECK(table[0].stats.at("bac").mean == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(table[0].stats.at("loops_per_m").mean == doctest::Approx(0.2).epsilon(1e-15));
    // identical metrics: zero delta
    CHECK(*relative_delta(table, "w", "A", "B", "bac") == 0.0);
    CHECK(*relative_delta(table, "w", "A", "C", "loops_per_m") == doctest::Approx(1.5).epsilon(1e-12));
    CHECK_FALSE(relative_delta(table, "w", "A", "D", "bac"));
    CHECK_FALSE(relative_delta(table, "v", "A", "B", "bac"));

    std::ostringstream csv;
    write_comparison_csv(csv, table);
    CHECK(csv.str().rfind("world,method,trials,failures,reached_target,bac_mean,bac_std", 0) == 0);
    std::ostringstream text;
    write_comparison_text(text, table, "A");
    CHECK(text.str().find("+150.0%") == std::string::npos);  // reported on the target path length only
    CHECK(text.str().find("fail") != std::string::npos);
}

TEST_CASE("collect summaries from trial directories")
{
    const auto root = std::filesystem::temp_directory_path() / "aslam_test_runs";
    std::filesystem::remove_all(root);
    const TrialConfig cfg;
    const TrialResult r = run_trial(toy_room(), method_config("A_1"), 3, 10.0, cfg);
    write_trial_outputs(root / "a", r, cfg);
    write_trial_outputs(root / "b", r, cfg);
    for (const char* f : {"metrics.csv", "summary.csv", "grid.pgm", "graph.txt", "events.log", "params.txt"})
        CHECK(std::filesystem::exists(root / "a" / f));
    const auto all = collect_summaries(root);
    REQUIRE(all.size() == 2);
    CHECK(all[0].method == "A_1");
    CHECK(all[0].seed == 3);
    const auto table = compare_methods(all);
    REQUIRE(table.size() == 1);
    CHECK(table[0].stats.at("bac").std == 0.0);
    std::ifstream m(root / "a" / "metrics.csv");
    CHECK(read_metrics_csv(m).size() == r.bucketed.size());
    std::filesystem::remove_all(root);
}

TEST_CASE("trials are deterministic")
{
    const TrialConfig cfg;
    for (const char* method : {"A", "OL_2_3"})
    {
        const TrialResult a = run_trial(toy_room(), method_config(method), 7, 40.0, cfg);
        const TrialResult b = run_trial(toy_room(), method_config(method), 7, 40.0, cfg);
        CHECK(metrics_text(a) == metrics_text(b));
        CHECK(a.events.lines() == b.events.lines());
    }
    const TrialResult c = run_trial(toy_room(), method_config("A"), 8, 40.0, cfg);
    const TrialResult d = run_trial(toy_room(), method_config("A"), 7, 40.0, cfg);
    CHECK(metrics_text(c) != metrics_text(d));
}

TEST_CASE("parallel runner keeps order")
{
    const TrialConfig cfg;
    std::vector<std::function<TrialResult()>> jobs;
    for (std::uint64_t seed : {1, 2, 3})
        jobs.push_back([&cfg, seed] { return run_trial(toy_room(), method_config("A_1"), seed, 10.0, cfg); });
    const auto results = run_trials_parallel(jobs, 3);
    REQUIRE(results.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
    {
        CHECK(results[i].summary.seed == i + 1);
        CHECK(metrics_text(results[i]) == metrics_text(jobs[i]()));
    }
    std::vector<std::function<TrialResult()>> failing = {[]() -> TrialResult { throw ConfigError("boom"); }};
    CHECK_THROWS_AS(run_trials_parallel(failing, 2), ConfigError);
}

TEST_CASE("interpolated headings follow the path tangent")
{
    const TrialResult r = run_trial(toy_room(), method_config("INTER_0"), 7, 60.0, TrialConfig{});
    const auto dispatches = events_of(r, "dispatch");
    REQUIRE(dispatches.size() > 5);
    for (const auto& [kind, fields] : dispatches)
        CHECK(event_field(fields, "heading") == event_field(fields, "tangent"));
    CHECK(events_of(r, "level2").empty());
    CHECK(events_of(r, "level3").empty());
}

TEST_CASE("first level only emits no refinement or blend events")
{
    const TrialResult r = run_trial(toy_room(), method_config("A_1"), 7, 60.0, TrialConfig{});
    CHECK(events_of(r, "dispatch").size() > 5);
    CHECK(events_of(r, "level2").empty());
    CHECK(events_of(r, "level3").empty());

    const TrialResult a = run_trial(toy_room(), method_config("A"), 7, 60.0, TrialConfig{});
    CHECK_FALSE(events_of(a, "level2").empty());
    CHECK_FALSE(events_of(a, "level3").empty());
}

TEST_CASE("trial metric invariants")
{
    const TrialConfig cfg;
    for (const char* method : {"A", "OL_0"})
    {
        const TrialResult r = run_trial(toy_room(), method_config(method), 11, 90.0, cfg);
        REQUIRE(r.raw.size() == 901);
        for (std::size_t k = 1; k < r.raw.size(); ++k)
        {
            CHECK(r.raw[k].path_length >= r.raw[k - 1].path_length);
            CHECK(r.raw[k].wheel_rotation >= r.raw[k - 1].wheel_rotation);
            CHECK(r.raw[k].loop_closures >= r.raw[k - 1].loop_closures);
        }
        // explored area only drops at a rectification or a new session
        std::set<long> drop_ok;
        for (const char* kind : {"closure", "session"})
            for (const auto& [k, fields] : events_of(r, kind))
            {
                const long tick = std::lround(std::stod(*event_field(fields, "t")) / 0.1);
                drop_ok.insert(tick);
                drop_ok.insert(tick + 1);
            }
        for (std::size_t k = 1; k < r.raw.size(); ++k)
            if (r.raw[k].explored_area < r.raw[k - 1].explored_area)
                CHECK(drop_ok.count(static_cast<long>(k)) == 1);

        // loops per metre matches the event log
        const auto closures = events_of(r, "closure");
        CHECK(r.summary.final.loop_closures == static_cast<double>(closures.size()));
        CHECK(r.summary.loops_per_m == static_cast<double>(closures.size()) / r.summary.final.path_length);
        CHECK(r.summary.recoveries_easy == static_cast<int>(events_of(r, "recovery_easy").size()));
        CHECK(r.graph.closures().size() == closures.size());

        // bucketing of the archived series
        const auto b = bucket_metrics(r.raw, 2.0);
        CHECK(b.size() == r.bucketed.size());
        CHECK(r.bucketed.back().path_length == r.raw.back().path_length);
    }
}

TEST_CASE("trial input errors")
{
    const TrialConfig cfg;
    CHECK_THROWS_AS(run_trial(toy_room(), method_config("A"), 1, 0.0, cfg), ConfigError);
    WorldModel blocked = toy_room();
    blocked.start.head<2>() = Vec2d(0.05, 0.05);
    CHECK_THROWS_AS(run_trial(blocked, method_config("A"), 1, 10.0, cfg), ConfigError);

    const auto truth = test::truth_from_ascii({"#####", "#..##", "##..#", "#####"});
    const auto reach = reachable_free(truth, Vec2d(0.15, 0.25));
    int n = 0;
    for (const auto v : reach)
        n += v;
    CHECK(n == 4);
    CHECK(std::count(reach.begin(), reach.end(), 1) == 4);
    const auto none = reachable_free(truth, Vec2d(0.05, 0.05));
    CHECK(std::count(none.begin(), none.end(), 1) == 0);
}

TEST_CASE("world listing")
{
    const auto worlds = list_worlds(default_worlds_dir());
    std::set<std::string> names;
    for (const auto& w : worlds)
        names.insert(w.stem().string());
    CHECK(names.count("toy_room") == 1);
    CHECK(names.count("apartment") == 1);
    CHECK(names.count("loop") == 1);
    CHECK_THROWS(resolve_world("no_such_world", default_worlds_dir()));
}

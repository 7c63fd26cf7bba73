#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace aslam;

namespace
{

DepthScan flat_scan(double range, int rays = 31)
{
    DepthScan s;
    s.fov = deg2rad(69.4);
    s.max_range = 3.0;
    s.ranges.assign(static_cast<std::size_t>(rays), range);
    return s;
}

void set_estimate(PoseGraph& g, const Pose2d& target)
{
    g.integrate_odometry(relative_pose<double>(g.estimate(), target));
}

std::vector<int> ids(int from, int to)
{
    std::vector<int> v;
    for (int k = from; k < to; ++k)
        v.push_back(k);
    return v;
}

double position_error(const GraphNode& n)
{
    return (n.estimate.head<2>() - n.truth.head<2>()).norm();
}

}  // namespace

TEST_CASE("config validation")
{
    SlamConfig c;
    CHECK_NOTHROW(c.validate());
    c.epsilon_lc = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SlamConfig{};
    c.n_match = 0;
    CHECK_THROWS_AS(PoseGraph{c}, ConfigError);
}

TEST_CASE("noiseless odometry tracks the truth")
{
    OdometryModel odo(OdometryNoise::noiseless(), 5);
    PoseGraph g(SlamConfig{}, Pose2d(1.0, 2.0, 0.3));
    Pose2d truth(1.0, 2.0, 0.3);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int k = 0; k < 2000; ++k)
    {
        const Pose2d next = step_kinematics<double>(truth, Twistd(u(rng), u(rng), u(rng)), 0.1);
        g.integrate_odometry(odo.reading(relative_pose<double>(truth, next)));
        truth = next;
    }
    CHECK((g.estimate().head<2>() - truth.head<2>()).norm() < 1e-9);
    CHECK(std::abs(angle_diff(g.estimate().z(), truth.z())) < 1e-9);
}

TEST_CASE("node spacing")
{
    PoseGraph g;
    const DepthScan scan = flat_scan(2.0);
    CHECK(g.maybe_add_node(0.0, Pose2d::Zero(), {}, scan) == std::optional<std::size_t>(0));
    set_estimate(g, Pose2d(0.29, 0.0, 0.0));
    CHECK_FALSE(g.maybe_add_node(1.0, Pose2d::Zero(), {}, scan));
    set_estimate(g, Pose2d(0.3, 0.0, 0.0));
    CHECK(g.maybe_add_node(2.0, Pose2d::Zero(), {}, scan) == std::optional<std::size_t>(1));
    set_estimate(g, Pose2d(0.3, 0.0, 0.29));
    CHECK_FALSE(g.maybe_add_node(3.0, Pose2d::Zero(), {}, scan));
    set_estimate(g, Pose2d(0.3, 0.0, -0.31));
    CHECK(g.maybe_add_node(4.0, Pose2d::Zero(), {}, scan) == std::optional<std::size_t>(2));
    REQUIRE(g.edges().size() == 2);
    CHECK(g.edges()[0] == std::pair<int, int>(0, 1));
    CHECK(g.edges()[1] == std::pair<int, int>(1, 2));

    const std::size_t i = g.add_node(5.0, Pose2d::Zero(), {9, 3, 5}, scan);
    CHECK(g.nodes()[i].features == std::vector<int>{3, 5, 9});
}

TEST_CASE("loop closure detection")
{
    PoseGraph g;
    const DepthScan scan = flat_scan(2.0);
    g.add_node(0.0, Pose2d::Zero(), ids(0, 10), scan);
    g.add_node(5.0, Pose2d::Zero(), ids(0, 10), scan);
    g.add_node(12.0, Pose2d::Zero(), ids(0, 10), scan);

    // revisit with the same view: oldest eligible node
    CHECK(g.detect_loop_closure(ids(0, 10), 20.0) == std::optional<std::size_t>(0));
    // exactly n_match shared features is enough, one fewer is not
    CHECK(g.detect_loop_closure(ids(2, 12), 20.0) == std::optional<std::size_t>(0));
    CHECK_FALSE(g.detect_loop_closure(ids(3, 13), 20.0));
    // disjoint view, e.g. opposite heading
    CHECK_FALSE(g.detect_loop_closure(ids(100, 120), 20.0));
    // recency window
    CHECK_FALSE(g.detect_loop_closure(ids(0, 10), 9.99));
    CHECK(g.detect_loop_closure(ids(0, 10), 10.0) == std::optional<std::size_t>(0));
    CHECK(g.detect_loop_closure(ids(0, 10), 15.0) == std::optional<std::size_t>(0));

    // against a brute-force oracle on random feature sets
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> feat(0, 40);
    SlamConfig cfg;
    cfg.n_match = 4;
    PoseGraph r(cfg);
    std::vector<std::vector<int>> sets;
    for (int k = 0; k < 60; ++k)
    {
        std::vector<int> f;
        for (int j = 0; j < 12; ++j)
            f.push_back(feat(rng));
        std::sort(f.begin(), f.end());
        f.erase(std::unique(f.begin(), f.end()), f.end());
        r.add_node(k, Pose2d::Zero(), f, scan);
        sets.push_back(f);
    }
    for (int q = 0; q < 200; ++q)
    {
        std::vector<int> view;
        for (int j = 0; j < 12; ++j)
            view.push_back(feat(rng));
        std::sort(view.begin(), view.end());
        view.erase(std::unique(view.begin(), view.end()), view.end());
        const double stamp = 30.0 + q % 40;
        std::optional<std::size_t> oracle;
        for (std::size_t i = 0; i < sets.size() && !oracle; ++i)
        {
            if (stamp - static_cast<double>(i) < cfg.recency_window)
                break;
            std::vector<int> common;
            std::set_intersection(sets[i].begin(), sets[i].end(), view.begin(), view.end(),
                                  std::back_inserter(common));
            if (static_cast<int>(common.size()) >= cfg.n_match)
                oracle = i;
        }
        CHECK(r.detect_loop_closure(view, stamp) == oracle);
    }
}

TEST_CASE("closure contraction")
{
    const DepthScan scan = flat_scan(2.0);
    for (const double eps : {0.5, 1.0})
    {
        SlamConfig cfg;
        cfg.epsilon_lc = eps;
        PoseGraph g(cfg);
        g.add_node(0.0, Pose2d::Zero(), ids(0, 10), scan);
        // drive 4 m east, arriving with 0.2 m of error
        const Pose2d truth(4.0, 0.0, 0.0);
        set_estimate(g, Pose2d(4.2, 0.0, 0.0));
        g.add_node(20.0, truth, ids(0, 10), scan);
        const auto m = g.detect_loop_closure(ids(0, 10), 20.0);
        REQUIRE(m == std::optional<std::size_t>(0));
        const ClosureRecord rec = g.apply_closure(*m, truth, 20.0);
        const double expected = 0.2 * (1.0 - eps);
        CHECK((g.estimate().head<2>() - truth.head<2>()).norm() == doctest::Approx(expected).epsilon(1e-12));
        CHECK(position_error(g.nodes()[1]) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(position_error(g.nodes()[0]) == 0.0);
        CHECK(rec.ate_after <= rec.ate_before);
        CHECK(rec.matched == 0);
        CHECK(rec.current == 1);
        CHECK_FALSE(rec.merged_sessions);
    }
}

TEST_CASE("closure corrections interpolate linearly")
{
    SlamConfig cfg;
    cfg.epsilon_lc = 0.5;
    PoseGraph g(cfg);
    const DepthScan scan = flat_scan(2.0);
    g.add_node(0.0, Pose2d::Zero(), {}, scan);
    std::vector<double> errors;
    for (int k = 1; k <= 4; ++k)
    {
        const Pose2d truth(k, 0.0, 0.0);
        const double e = 0.05 * k;
        set_estimate(g, Pose2d(k, e, 0.0));
        g.add_node(k, truth, {}, scan);
        errors.push_back(e);
    }
    g.apply_closure(0, Pose2d(4.0, 0.0, 0.0), 20.0);
    for (int k = 1; k <= 4; ++k)
    {
        const double alpha = k / 4.0;
        CHECK(position_error(g.nodes()[k]) == doctest::Approx(errors[k - 1] * (1.0 - 0.5 * alpha)).epsilon(1e-12));
    }
}

TEST_CASE("closures never grow node errors and never raise ATE")
{
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> e(-0.5, 0.5);
    std::uniform_real_distribution<double> eps(0.0, 1.0);
    const DepthScan scan = flat_scan(2.0);
    for (int trial = 0; trial < 200; ++trial)
    {
        SlamConfig cfg;
        cfg.epsilon_lc = eps(rng);
        PoseGraph g(cfg);
        const int n = 3 + trial % 20;
        for (int k = 0; k < n; ++k)
        {
            const Pose2d truth(0.5 * k, e(rng), e(rng));
            set_estimate(g, Pose2d(truth.x() + e(rng), truth.y() + e(rng), truth.z() + e(rng)));
            g.add_node(k, truth, {}, scan);
        }
        std::vector<double> before;
        for (const GraphNode& node : g.nodes())
            before.push_back(position_error(node));
        const Pose2d truth_now = g.nodes().back().truth;
        const double current_before = (g.estimate().head<2>() - truth_now.head<2>()).norm();
        const std::size_t match = static_cast<std::size_t>(trial) % static_cast<std::size_t>(n - 1);
        const ClosureRecord rec = g.apply_closure(match, truth_now, n + 20.0);
        for (std::size_t k = 0; k < before.size(); ++k)
            CHECK(position_error(g.nodes()[k]) <= before[k] + 1e-12);
        CHECK((g.estimate().head<2>() - truth_now.head<2>()).norm() <= current_before + 1e-12);
        CHECK(rec.ate_after <= rec.ate_before + 1e-12);
        CHECK(rec.ate_after == g.ate_rmse());
    }
}

TEST_CASE("sessions")
{
    PoseGraph g;
    const DepthScan scan = flat_scan(2.0);
    g.add_node(0.0, Pose2d::Zero(), ids(0, 10), scan);
    set_estimate(g, Pose2d(1.0, 0.0, 0.0));
    g.add_node(1.0, Pose2d(1.0, 0.0, 0.0), {}, scan);
    g.start_session();
    CHECK(g.session() == 1);
    set_estimate(g, Pose2d(2.0, 0.0, 0.0));
    g.add_node(2.0, Pose2d(2.0, 0.0, 0.0), {}, scan);
    // first node of a new session is unlinked
    CHECK(g.edges().size() == 1);
    CHECK(g.session_poses().size() == 1);

    OccupancyGrid grid(GridGeometry(60, 60, 0.1));
    g.rebuild_grid(grid);
    const std::size_t only_new = grid.explored_count();

    set_estimate(g, Pose2d(0.05, 0.0, 0.0));
    g.add_node(30.0, Pose2d::Zero(), ids(0, 10), scan);
    const auto m = g.detect_loop_closure(ids(0, 10), 30.0);
    REQUIRE(m == std::optional<std::size_t>(0));
    const ClosureRecord rec = g.apply_closure(*m, Pose2d::Zero(), 30.0);
    CHECK(rec.merged_sessions);
    CHECK(g.session_poses().size() == 4);
    g.rebuild_grid(grid);
    CHECK(grid.explored_count() > only_new);

    // a second closure within the merged session does not merge again
    const ClosureRecord again = g.apply_closure(0, Pose2d::Zero(), 31.0);
    CHECK_FALSE(again.merged_sessions);
}

TEST_CASE("rebuild replays buffered scans at corrected poses")
{
    SlamConfig cfg;
    cfg.scan_buffer = 3;
    PoseGraph g(cfg, Pose2d(1.0, 1.0, 0.0));
    const GridGeometry geom(60, 60, 0.1);
    std::vector<Pose2d> estimates;
    for (int k = 0; k < 5; ++k)
    {
        set_estimate(g, Pose2d(1.0 + 0.4 * k, 1.0 + 0.1 * k, 0.3 * k));
        g.add_node(k, g.estimate(), {}, flat_scan(1.0 + 0.2 * k));
        estimates.push_back(g.estimate());
    }
    OccupancyGrid grid(geom);
    update_from_scan(grid, Pose2d(4.0, 4.0, 0.0), flat_scan(2.0));  // stale content is dropped
    g.rebuild_grid(grid);

    OccupancyGrid oracle(geom);
    for (int k = 2; k < 5; ++k)
        update_from_scan(oracle, estimates[static_cast<std::size_t>(k)], flat_scan(1.0 + 0.2 * k));
    for (std::size_t i = 0; i < geom.size(); ++i)
    {
        CHECK(grid.logodds(i) == oracle.logodds(i));
        CHECK(grid.explored(i) == oracle.explored(i));
    }

    SlamConfig none;
    none.scan_buffer = 0;
    PoseGraph empty(none);
    empty.add_node(0.0, Pose2d::Zero(), {}, flat_scan(1.0));
    empty.rebuild_grid(grid);
    CHECK(grid.explored_count() == 0);
}

TEST_CASE("ate rmse")
{
    PoseGraph g;
    CHECK(g.ate_rmse() == 0.0);
    const DepthScan scan = flat_scan(2.0);
    g.add_node(0.0, Pose2d::Zero(), {}, scan);
    set_estimate(g, Pose2d(3.0, 4.0, 0.0));
    g.add_node(1.0, Pose2d::Zero(), {}, scan);
    CHECK(g.ate_rmse() == doctest::Approx(std::sqrt(25.0 / 2.0)).epsilon(1e-12));
}

TEST_CASE("graph dump format")
{
    PoseGraph g;
    const DepthScan scan = flat_scan(2.0);
    g.add_node(0.0, Pose2d::Zero(), {4, 2}, scan);
    set_estimate(g, Pose2d(1.0, 0.5, 0.25));
    g.add_node(12.5, Pose2d(1.0, 0.0, 0.0), {2, 4, 7}, scan);
    g.apply_closure(0, Pose2d(1.0, 0.0, 0.0), 12.5);
    std::ostringstream out;
    g.write_dump(out);

    std::istringstream in(out.str());
    std::string line;
    int nodes = 0;
    int edges = 0;
    int closures = 0;
    while (std::getline(in, line))
    {
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "node")
        {
            int id, session;
            double stamp, ex, ey, et, tx, ty, tt;
            std::string tag;
            ls >> id >> session >> stamp >> ex >> ey >> et >> tx >> ty >> tt >> tag;
            REQUIRE(ls);
            CHECK(id == nodes);
            CHECK(tag == "features");
            const GraphNode& n = g.nodes()[static_cast<std::size_t>(id)];
            CHECK(stamp == n.stamp);
            CHECK(ex == doctest::Approx(n.estimate.x()).epsilon(1e-8));
            std::vector<int> f;
            int v;
            while (ls >> v)
                f.push_back(v);
            CHECK(f == n.features);
            ++nodes;
        }
        else if (kind == "edge")
        {
            int a, b;
            ls >> a >> b;
            CHECK(std::pair<int, int>(a, b) == g.edges()[static_cast<std::size_t>(edges)]);
            ++edges;
        }
        else if (kind == "closure")
        {
            int current, matched, merged;
            double stamp, ate_before, ate_after;
            ls >> current >> matched >> stamp >> ate_before >> ate_after >> merged;
            REQUIRE(ls);
            CHECK(current == 1);
            CHECK(matched == 0);
            CHECK(stamp == 12.5);
            CHECK(ate_after <= ate_before);
            CHECK(merged == 0);
            ++closures;
        }
        else
            FAIL("unexpected record: " << line);
    }
    CHECK(nodes == 2);
    CHECK(edges == 1);
    CHECK(closures == 1);
}

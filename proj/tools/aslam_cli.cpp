// Command line front end: run single trials, compare run directories, list worlds.

#include "aslam/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace
{

constexpr int kExitTrialFailed = 2;
constexpr int kExitConfigError = 3;

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"omnidirectional active SLAM exploration simulator"};
    app.require_subcommand(1);

    std::string world_name;
    std::string method_name;
    std::uint64_t seed = 1;
    double duration = 150.0;
    std::string out_dir;
    std::string config_file;
    CLI::App* run = app.add_subcommand("run", "run one trial and write its artifacts");
    run->add_option("--world", world_name, "bundled world name or path to a .world file")->required();
    run->add_option("--method", method_name, "method name (A, A_L, A_S, A_1, OL_0, ...)")->required();
    run->add_option("--seed", seed, "trial seed");
    run->add_option("--duration", duration, "simulated seconds");
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--config", config_file, "key = value parameter file");

    std::string runs_dir;
    std::string report;
    CLI::App* compare = app.add_subcommand("compare", "aggregate trial summaries below a directory");
    compare->add_option("--runs", runs_dir, "directory searched for summary.csv files")->required();
    compare->add_option("--report", report, "text report path (a .csv twin is written next to it)")->required();
    std::string reference = "A";
    compare->add_option("--reference", reference, "method used for relative path-length deltas");

    CLI::App* worlds = app.add_subcommand("worlds", "world utilities");
    worlds->add_subcommand("list", "list bundled worlds")->callback([] {});
    worlds->require_subcommand(1);

    CLI::App* methods = app.add_subcommand("methods", "list method names");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    try
    {
        if (*run)
        {
            aslam::TrialConfig config;
            if (!config_file.empty())
                config = aslam::load_trial_config(config_file);
            const auto path = aslam::resolve_world(world_name, aslam::default_worlds_dir());
            const aslam::WorldModel world = aslam::load_world(path);
            const aslam::MethodConfig method = aslam::method_config(method_name, config.extended_factor);
            const aslam::TrialResult result = aslam::run_trial(world, method, seed, duration, config);
            aslam::write_trial_outputs(out_dir, result, config);
            const auto& s = result.summary;
            std::cout << s.world << ' ' << s.method << " seed " << s.seed << ": " << (s.failed ? "FAILED" : "ok")
                      << ", coverage " << s.final.coverage << ", path " << s.final.path_length << " m, closures "
                      << s.final.loop_closures << ", normalized entropy " << s.final.normalized_entropy << '\n';
            return s.failed ? kExitTrialFailed : 0;
        }
        if (*compare)
        {
            const auto trials = aslam::collect_summaries(runs_dir);
            if (trials.empty())
            {
                std::cerr << "no summary.csv found below " << runs_dir << '\n';
                return kExitConfigError;
            }
            const auto table = aslam::compare_methods(trials);
            std::ofstream text(report);
            aslam::write_comparison_text(text, table, reference);
            std::filesystem::path csv(report);
            csv.replace_extension(".csv");
            std::ofstream csv_out(csv);
            aslam::write_comparison_csv(csv_out, table);
            aslam::write_comparison_text(std::cout, table, reference);
            return 0;
        }
        if (*worlds)
        {
            for (const auto& p : aslam::list_worlds(aslam::default_worlds_dir()))
            {
                const aslam::WorldModel w = aslam::load_world(p);
                std::cout << w.name << "  " << w.truth.geometry.width() << "x" << w.truth.geometry.height()
                          << " cells @ " << w.truth.geometry.resolution() << " m, " << w.features.size()
                          << " features  (" << p.string() << ")\n";
            }
            return 0;
        }
        if (*methods)
        {
            for (const auto& m : aslam::method_names())
                std::cout << m << '\n';
            return 0;
        }
    }
    catch (const aslam::ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

// Command-line entry point: discover, engage, analyze, serve, simulate.

#include "honeywire/error.hpp"
#include "honeywire/pipeline.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace hw = honeywire;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool enable_live = false;
};

hw::RunConfig load(const CommonFlags& flags, bool auto_approve = false) {
    auto j = hw::Json::parse(std::ifstream(flags.config), nullptr, false);
    if (j.is_discarded()) throw hw::Error(hw::ErrorCode::ConfigInvalid, "cannot parse " + flags.config);
    if (flags.enable_live) j["enable_live"] = true;
    if (auto_approve) j["engagement"]["auto_approve"] = true;
    if (flags.seed) j["seed"] = *flags.seed;
    return hw::parse_run_config(j, std::filesystem::absolute(flags.config).parent_path());
}

hw::Json discover_json(const hw::DiscoverSummary& s) {
    hw::Json by_decision = hw::Json::object();
    for (const auto& [d, n] : s.filter.counts) by_decision[std::string(hw::to_string(d))] = n;
    return {{"channels_found", s.channels_found}, {"channels_new", s.channels_new}, {"verdicts", by_decision},
            {"escalated", s.filter.escalated}, {"actors_found", s.actors_found}, {"actors_new", s.actors_new},
            {"keywords_degraded", s.keywords_degraded}};
}

hw::Json engage_json(const hw::EngageSummary& s) {
    return {{"sessions_opened", s.sessions_opened}, {"terminated", s.terminated}, {"still_open", s.still_open},
            {"awaiting_decision", s.awaiting_decision}};
}

hw::Json report_json(const hw::Report& r) {
    hw::Json j{{"conversations", r.conversations_total}, {"open", r.conversations_open},
               {"disclosures", r.disclosures.size()}, {"quotes", r.quotes.size()}};
    if (r.outcomes) {
        j["success_rate_percent"] = hw::format_percent(r.outcomes->success_count, r.outcomes->total, 1);
        j["premature_rate_percent"] = hw::format_percent(r.outcomes->premature_count, r.outcomes->total, 1);
    }
    if (r.success_median_rounds) j["median_rounds_to_payment"] = *r.success_median_rounds;
    return j;
}

int serve(const hw::RunConfig& config) {
    hw::Runtime rt(config);
    auto gw_config = rt.config.gateway;
    hw::Gateway gateway(*rt.store, *rt.engine, gw_config);
    hw::HttpGateway http(gateway);
    std::thread server([&] {
        if (!http.listen(gw_config.bind_address, gw_config.port)) {
            std::cerr << "cannot bind " << gw_config.bind_address << ":" << gw_config.port << "\n";
            g_stop = true;
        }
    });
    std::cerr << "gateway listening on " << gw_config.bind_address << ":" << gw_config.port << "\n";

    std::optional<hw::SimulationDriver> driver;
    if (rt.simnet) {
        driver.emplace(*rt.engine, *rt.simnet, rt.config.driver);
        driver->resume_from_store();
    }
    while (!g_stop) {
        if (driver)
            while (!g_stop && driver->step()) {
            }
        rt.store->wait_for_events(rt.store->last_sequence(), std::chrono::milliseconds(500));
    }
    http.stop();
    server.join();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"honeywire: supervised decoy conversations with chat-for-hire operators"};
    app.require_subcommand(1);
    CommonFlags flags;
    app.add_flag("--enable-live", flags.enable_live, "Allow the live transport (it still needs a real backend)");

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", flags.seed, "Override the simnet seed");
    };

    auto* discover = app.add_subcommand("discover", "Find channels, judge relevance, and list offer-posting actors");
    add_common(discover);

    auto* engage = app.add_subcommand("engage", "Open and drive conversations with identified actors");
    add_common(engage);
    std::string actors = "all-relevant";
    bool auto_approve = false;
    engage->add_option("--actors", actors, "Comma-separated actor ids, or all-relevant");
    engage->add_flag("--auto-approve", auto_approve, "Approve every draft automatically (simnet only)");

    auto* analyze = app.add_subcommand("analyze", "Compute the report from an event log");
    std::string log_path, out_dir, analyze_config;
    bool include_ghosts = false;
    analyze->add_option("--log", log_path, "Event log")->required();
    analyze->add_option("--out", out_dir, "Report directory")->required();
    analyze->add_option("--config", analyze_config, "Run configuration for patterns and histogram edges");
    analyze->add_flag("--include-ghosts", include_ghosts, "Keep never-answered conversations in the round CDF");

    auto* serve_cmd = app.add_subcommand("serve", "Run the operator gateway over the configured store");
    add_common(serve_cmd);

    auto* simulate = app.add_subcommand("simulate", "Discover, engage and analyze end to end on the simnet");
    add_common(simulate);
    std::string sim_out;
    simulate->add_option("--out", sim_out, "Output directory for the log and report")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    try {
        if (*discover) {
            hw::Runtime rt(load(flags));
            std::cout << discover_json(hw::cmd_discover(rt)).dump(2) << "\n";
        } else if (*engage) {
            hw::Runtime rt(load(flags, auto_approve));
            std::vector<std::string> ids;
            if (actors != "all-relevant") {
                std::stringstream ss(actors);
                for (std::string id; std::getline(ss, id, ',');)
                    if (!id.empty()) ids.push_back(id);
            }
            std::cout << engage_json(hw::cmd_engage(rt, ids)).dump(2) << "\n";
        } else if (*analyze) {
            hw::ReportOptions options;
            if (!analyze_config.empty()) options = load(CommonFlags{analyze_config, std::nullopt, flags.enable_live}).report;
            options.include_ghosts = include_ghosts || options.include_ghosts;
            std::cout << report_json(hw::cmd_analyze(log_path, out_dir, options)).dump(2) << "\n";
        } else if (*serve_cmd) {
            return serve(load(flags));
        } else if (*simulate) {
            auto result = hw::cmd_simulate(load(flags, true), sim_out);
            std::cout << hw::Json{{"discovery", discover_json(result.discovery)},
                                  {"engagement", engage_json(result.engagement)},
                                  {"report", report_json(result.report)},
                                  {"log", result.log.string()}}
                             .dump(2)
                      << "\n";
        }
    } catch (const hw::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == hw::ErrorCode::ConfigInvalid ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

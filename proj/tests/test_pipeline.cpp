#include <doctest.h>

#include "support.hpp"

#include "honeywire/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

using namespace honeywire;
using namespace honeywire::testing;

namespace {

Json minimal() { return Json{{"scenario", "net.json"}}; }

ErrorCode config_error(const Json& j) {
    try {
        parse_run_config(j, "/base");
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("config accepted: " << j.dump());
    return ErrorCode::ValidationFailure;
}

Json with(Json j, const Json& patch) {
    j.merge_patch(patch);
    return j;
}

void write(const std::filesystem::path& p, const std::string& content) {
    std::ofstream(p, std::ios::binary) << content;
}

// Runs the built CLI and returns its exit status.
int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + HONEYWIRE_CLI + "\" " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

} // namespace

TEST_CASE("paths in the config resolve against its directory") {
    const auto c = parse_run_config(with(minimal(), {{"store", "logs/events.log"}, {"seed", 9}}), "/base");
    CHECK(c.scenario == std::filesystem::path("/base/net.json"));
    CHECK(c.store == std::filesystem::path("/base/logs/events.log"));
    CHECK(c.seed == 9u);
    CHECK(parse_run_config(with(minimal(), {{"store", "/abs/e.log"}}), "/base").store == std::filesystem::path("/abs/e.log"));
}

TEST_CASE("open-ended histogram edges") {
    const auto c = parse_run_config(with(minimal(), {{"analytics", {{"histogram_edges_minutes", {0, 30, "inf"}}}}}), "/b");
    CHECK(c.report.histogram_edges == std::vector<double>{0, 30, kOpenEnded});
    CHECK(config_error(with(minimal(), {{"analytics", {{"histogram_edges_minutes", {0, 30, 30}}}}}))
          == ErrorCode::ConfigInvalid);
    CHECK(config_error(with(minimal(), {{"analytics", {{"histogram_edges_minutes", {5}}}}})) == ErrorCode::ConfigInvalid);
    CHECK(config_error(with(minimal(), {{"analytics", {{"histogram_edges_minutes", {0, "forever"}}}}}))
          == ErrorCode::ConfigInvalid);
}

TEST_CASE("tables may be inline or in a file") {
    TempDir dir("config");
    write(dir / "soft.json", R"([["naked", "private"]])");
    const auto from_file = parse_run_config(with(minimal(), {{"engagement", {{"softening", "soft.json"}}}}), dir.path());
    CHECK(from_file.engagement.softening.apply("naked") == "private");

    const auto inline_table =
        parse_run_config(with(minimal(), {{"substitutions", Json::array({Json::array({"nude chat", "chat"}), Json::array({"nude", "x"})})}}), "/b");
    CHECK(inline_table.substitutions.entries().size() == 2);

    CHECK(config_error(with(minimal(), {{"engagement", {{"softening", "missing.json"}}}})) == ErrorCode::ConfigInvalid);
}

TEST_CASE("cross-field rules") {
    CHECK(config_error(Json::object()) == ErrorCode::ConfigInvalid);  // simnet without a scenario
    CHECK(config_error(with(minimal(), {{"transport", "carrier-pigeon"}})) == ErrorCode::ConfigInvalid);
    CHECK(config_error({{"transport", "live"}}) == ErrorCode::ConfigInvalid);
    CHECK(config_error({{"transport", "live"}, {"enable_live", true}, {"engagement", {{"auto_approve", true}}}})
          == ErrorCode::ConfigInvalid);
    CHECK_NOTHROW(parse_run_config({{"transport", "live"}, {"enable_live", true}}, "/b"));
    CHECK(config_error(with(minimal(), {{"llm", {{"kind", "oracle"}}}})) == ErrorCode::ConfigInvalid);
    CHECK(config_error(with(minimal(), {{"llm", {{"kind", "http"}}}})) == ErrorCode::ConfigInvalid);
    CHECK(config_error(with(minimal(), {{"llm", {{"kind", "scripted"}}}})) == ErrorCode::ConfigInvalid);
    CHECK(config_error(with(minimal(), {{"driver", {{"horizon_days", 0}}}})) == ErrorCode::ConfigInvalid);
    CHECK(config_error(with(minimal(), {{"seed", "not a number"}})) == ErrorCode::ConfigInvalid);
    CHECK(config_error(with(minimal(), {{"engagement", {{"max_retries", 7}}}})) == ErrorCode::ConfigInvalid);
    CHECK(config_error(with(minimal(), {{"filter", {{"digest_budget", 0}}}})) == ErrorCode::ConfigInvalid);
}

TEST_CASE("the shipped configuration loads") {
    const auto c = load_run_config(source_dir() / "config" / "reference_run.json");
    CHECK(c.transport == "simnet");
    CHECK(std::filesystem::exists(c.scenario));
    CHECK(c.filter.prompt_template.find("{digest}") != std::string::npos);
    CHECK(c.engagement.max_retries == 3);
    CHECK(c.report.histogram_edges.back() == kOpenEnded);
    CHECK_THROWS_AS(load_run_config(source_dir() / "config" / "nope.json"), Error);
}

TEST_CASE("chat scripts") {
    TempDir dir("script");
    write(dir / "ok.json", R"([{"text": "hi"}, {"action": "refuse"}, {"action": "unavailable"}, {"action": "echo"}])");
    const auto steps = load_chat_script(dir / "ok.json");
    REQUIRE(steps.size() == 4);
    CHECK(steps[0].action == ScriptedChatModel::Action::Reply);
    CHECK(steps[1].action == ScriptedChatModel::Action::Refuse);
    CHECK(steps[2].action == ScriptedChatModel::Action::Unavailable);
    write(dir / "bad.json", R"([{"action": "sulk"}])");
    CHECK_THROWS_AS(load_chat_script(dir / "bad.json"), Error);
}

TEST_CASE("simulate will not overwrite an existing log") {
    TempDir dir("sim");
    write(dir / "events.log", "");
    try {
        cmd_simulate(load_run_config(source_dir() / "config" / "reference_run.json"), dir.path());
        FAIL("existing log was reused");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoFailure);
    }
    CHECK(std::filesystem::file_size(dir / "events.log") == 0);
}

TEST_CASE("analyze needs an existing log") {
    TempDir dir("analyze");
    CHECK_THROWS_AS(cmd_analyze(dir / "missing.log", dir / "out", {}), Error);
    const auto r = cmd_analyze(fixture("reference_run.log"), dir / "out", {});
    CHECK(r.conversations_total == 53);
    CHECK(std::filesystem::exists(dir / "out" / "summary.md"));
}

TEST_CASE("command line exit codes") {
    TempDir dir("cli");
    const auto config = (source_dir() / "config" / "reference_run.json").string();
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 2);  // a subcommand is required
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("simulate --config " + config) == 2);  // --out missing
    CHECK(run_cli("simulate --out " + (dir / "x").string() + " --config " + (dir / "nope.json").string()) == 2);
    CHECK(run_cli("analyze --log " + (dir / "missing.log").string() + " --out " + (dir / "r").string()) == 1);

    CHECK(run_cli("simulate --config " + config + " --out " + (dir / "run").string()) == 0);
    CHECK(std::filesystem::exists(dir / "run" / "events.log"));
    CHECK(std::filesystem::exists(dir / "run" / "report" / "summary.md"));
    CHECK(run_cli("simulate --config " + config + " --out " + (dir / "run").string()) == 1);  // log exists
    CHECK(run_cli("analyze --log " + (dir / "run" / "events.log").string() + " --out " + (dir / "again").string()) == 0);
}

#include "honeywire/pipeline.hpp"

#include "honeywire/error.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <fstream>
#include <sstream>

namespace honeywire {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return base / p;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
    }
}

// A config value that is either inline JSON or a path to a JSON file.
Json inline_or_file(const Json& value, const std::filesystem::path& base) {
    if (value.is_string()) return read_json(resolve(base, value.get<std::string>()));
    return value;
}

} // namespace

RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    c.base_dir = base_dir;
    try {
        c.transport = j.value("transport", c.transport);
        c.enable_live = j.value("enable_live", c.enable_live);
        if (j.contains("scenario")) c.scenario = resolve(base_dir, j.at("scenario").get<std::string>());
        if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
        c.store = resolve(base_dir, j.value("store", c.store.string()));
        c.sync_writes = j.value("sync_writes", c.sync_writes);

        if (j.contains("discovery")) c.discovery = parse_discovery_config(j.at("discovery"));

        const Json filter = j.value("filter", Json::object());
        std::string relevance_prompt;
        if (filter.contains("prompt_template")) relevance_prompt = read_text(resolve(base_dir, filter.at("prompt_template").get<std::string>()));
        c.filter = parse_filter_config(filter, relevance_prompt);

        const Json engagement = j.value("engagement", Json::object());
        std::string system_prompt;
        if (engagement.contains("system_prompt")) system_prompt = read_text(resolve(base_dir, engagement.at("system_prompt").get<std::string>()));
        Json policy = engagement;
        if (policy.contains("softening")) policy["softening"] = inline_or_file(policy.at("softening"), base_dir);
        c.engagement = parse_engagement_policy(policy, system_prompt);

        if (j.contains("substitutions")) c.substitutions = parse_substitutions(inline_or_file(j.at("substitutions"), base_dir));
        if (j.contains("vision")) c.vision = parse_vision_config(inline_or_file(j.at("vision"), base_dir));
        c.report.vision = c.vision;

        const Json gateway = j.value("gateway", Json::object());
        c.gateway.bind_address = gateway.value("bind", c.gateway.bind_address);
        c.gateway.port = gateway.value("port", c.gateway.port);
        if (const char* token = std::getenv(std::string(kGatewayTokenEnv).c_str())) c.gateway.token = token;

        const Json llm = j.value("llm", Json::object());
        c.llm.kind = llm.value("kind", c.llm.kind);
        c.llm.http.endpoint = llm.value("endpoint", std::string{});
        c.llm.http.model = llm.value("model", std::string{});
        c.llm.http.temperature = llm.value("temperature", c.llm.http.temperature);
        c.llm.http.timeout_seconds = llm.value("timeout_seconds", c.llm.http.timeout_seconds);
        c.llm.api_key_env = llm.value("api_key_env", std::string{});
        if (!c.llm.api_key_env.empty())
            if (const char* key = std::getenv(c.llm.api_key_env.c_str())) c.llm.http.api_key = key;
        if (llm.contains("script")) c.llm.script = resolve(base_dir, llm.at("script").get<std::string>());
        if (llm.contains("simulated")) c.llm.simulated = parse_simulated_customer(inline_or_file(llm.at("simulated"), base_dir));

        const Json driver = j.value("driver", Json::object());
        c.driver.debounce_seconds = driver.value("debounce_seconds", c.driver.debounce_seconds);
        c.driver.horizon_seconds = driver.value("horizon_days", c.driver.horizon_seconds / 86400.0) * 86400.0;

        const Json analytics = j.value("analytics", Json::object());
        c.report.include_ghosts = analytics.value("include_ghosts", c.report.include_ghosts);
        if (analytics.contains("histogram_edges_minutes")) {
            c.report.histogram_edges.clear();
            for (const auto& e : analytics.at("histogram_edges_minutes"))
                c.report.histogram_edges.push_back(e.is_string() && e.get<std::string>() == "inf" ? kOpenEnded : e.get<double>());
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("malformed config: ") + e.what());
    }
    validate_run_config(c);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_json(path), std::filesystem::absolute(path).parent_path());
}

void validate_run_config(const RunConfig& c) {
    if (c.transport != "simnet" && c.transport != "live")
        throw Error(ErrorCode::ConfigInvalid, "transport must be simnet or live, got '" + c.transport + "'");
    if (c.transport == "simnet" && c.scenario.empty()) throw Error(ErrorCode::ConfigInvalid, "simnet needs a scenario");
    if (c.engagement.auto_approve && c.transport != "simnet")
        throw Error(ErrorCode::ConfigInvalid, "auto-approve is only allowed with the simnet transport");
    if (c.transport == "live" && !c.enable_live)
        throw Error(ErrorCode::ConfigInvalid, "the live transport needs --enable-live");
    if (c.llm.kind != "simulated" && c.llm.kind != "scripted" && c.llm.kind != "http")
        throw Error(ErrorCode::ConfigInvalid, "llm.kind must be simulated, scripted or http");
    if (c.llm.kind == "http" && c.llm.http.endpoint.empty())
        throw Error(ErrorCode::ConfigInvalid, "llm.endpoint is required for the http adapter");
    if (c.llm.kind == "scripted" && c.llm.script.empty())
        throw Error(ErrorCode::ConfigInvalid, "llm.script is required for the scripted adapter");
    if (c.driver.debounce_seconds < 0 || c.driver.horizon_seconds <= 0)
        throw Error(ErrorCode::ConfigInvalid, "driver timings must be positive");
    const auto& edges = c.report.histogram_edges;
    if (edges.size() < 2 || std::adjacent_find(edges.begin(), edges.end(), std::greater_equal<>()) != edges.end())
        throw Error(ErrorCode::ConfigInvalid, "histogram edges must be strictly ascending with at least two entries");
}

std::vector<ScriptedChatModel::Step> load_chat_script(const std::filesystem::path& path) {
    std::vector<ScriptedChatModel::Step> steps;
    for (const auto& s : read_json(path)) {
        const auto action = s.value("action", std::string("reply"));
        const auto text = s.value("text", std::string{});
        if (action == "reply") steps.push_back(ScriptedChatModel::reply(text));
        else if (action == "refuse") steps.push_back(text.empty() ? ScriptedChatModel::refuse() : ScriptedChatModel::refuse(text));
        else if (action == "unavailable") steps.push_back(ScriptedChatModel::unavailable());
        else if (action == "echo") steps.push_back(ScriptedChatModel::echo());
        else throw Error(ErrorCode::ConfigInvalid, "unknown script action '" + action + "'");
    }
    return steps;
}

std::unique_ptr<ChatModel> make_chat_model(const LlmConfig& c) {
    if (c.kind == "http") return std::make_unique<HttpChatModel>(c.http);
    if (c.kind == "scripted") return std::make_unique<ScriptedChatModel>(load_chat_script(c.script));
    return std::make_unique<SimulatedCustomerModel>(c.simulated);
}

Runtime::Runtime(RunConfig cfg) : config(std::move(cfg)) {
    validate_run_config(config);
    if (config.transport == "simnet") {
        auto scenario = load_scenario(config.scenario);
        if (config.seed) scenario.seed = *config.seed;
        auto net = std::make_unique<SimNet>(std::move(scenario));
        simnet = net.get();
        transport = std::move(net);
    } else {
        transport = std::make_unique<LiveTransport>(config.enable_live);
    }
    if (!config.store.empty() && config.store.has_parent_path()) std::filesystem::create_directories(config.store.parent_path());
    store = config.store.empty() ? std::make_unique<Store>() : std::make_unique<Store>(config.store, config.sync_writes);
    llm = make_chat_model(config.llm);
    ocr = std::make_unique<OcrService>(ocr_engine);
    extractor = std::make_unique<PaymentExtractor>(config.vision);
    engine = std::make_unique<EngagementEngine>(*store, *transport, *llm, *ocr, *extractor, config.engagement,
                                                config.substitutions, config.filter.refusal_phrases);
}

DiscoverSummary cmd_discover(Runtime& rt) {
    DiscoverSummary summary;
    auto result = run_discovery(rt.config.discovery, *rt.transport, *rt.llm);
    summary.partial = result.partial;
    summary.keywords_degraded = result.keywords.degraded;
    summary.channels_found = result.records.size();
    const auto at = rt.transport->now();
    summary.channels_new = publish_channels(*rt.store, result.records, at);
    summary.filter = run_filter(*rt.store, *rt.llm, rt.config.filter, at);

    std::vector<ChannelRecord> interesting;
    rt.store->read([&](const State& s) { interesting = channels_of_interest(s); });
    const auto actors = extract_actors(interesting, OfferMatcher(rt.config.discovery.offer_patterns));
    summary.actors_found = actors.size();
    summary.actors_new = publish_actors(*rt.store, actors, at);
    if (result.partial) throw Error(ErrorCode::BackendUnavailable, "discovery stopped early: " + result.error);
    return summary;
}

EngageSummary cmd_engage(Runtime& rt, const std::vector<std::string>& actors) {
    EngageSummary summary;
    std::vector<std::string> targets;
    rt.store->read([&](const State& s) {
        std::set<std::string> engaged;
        for (const auto& [id, c] : s.conversations) engaged.insert(c.actor);
        if (actors.empty()) {
            for (const auto& [id, a] : s.actors)
                if (!engaged.contains(id)) targets.push_back(id);
        } else {
            for (const auto& id : actors) {
                if (!s.actors.contains(id)) throw Error(ErrorCode::ValidationFailure, "unknown actor " + id);
                if (!engaged.contains(id)) targets.push_back(id);
            }
        }
    });

    if (rt.simnet) {
        SimulationDriver driver(*rt.engine, *rt.simnet, rt.config.driver);
        driver.resume_from_store();
        summary.sessions_opened = driver.open_sessions(targets).size();
        driver.run();
    } else {
        for (const auto& id : targets) {
            if (!rt.transport->can_message(id)) continue;
            rt.engine->open_session(id);
            ++summary.sessions_opened;
        }
    }

    rt.store->read([&](const State& s) {
        for (const auto& [id, c] : s.conversations) {
            if (c.state == SessionState::Terminated) ++summary.terminated;
            else ++summary.still_open;
        }
        for (const auto& [id, book] : s.sessions)
            if (book.pending_draft_id) ++summary.awaiting_decision;
    });
    return summary;
}

Report cmd_analyze(const std::filesystem::path& log, const std::filesystem::path& out_dir, const ReportOptions& options) {
    if (!std::filesystem::exists(log)) throw Error(ErrorCode::IoFailure, "no event log at " + log.string());
    const State state = replay(log);
    auto report = build_report(state, options);
    export_report(report, out_dir);
    return report;
}

SimulateResult cmd_simulate(RunConfig config, const std::filesystem::path& out_dir) {
    if (config.transport != "simnet") throw Error(ErrorCode::ConfigInvalid, "simulate runs on the simnet transport only");
    config.engagement.auto_approve = true;
    config.store = out_dir / "events.log";
    if (std::filesystem::exists(config.store))
        throw Error(ErrorCode::IoFailure, config.store.string() + " already exists; pick a fresh --out directory");
    std::filesystem::create_directories(out_dir);

    SimulateResult result;
    result.log = config.store;
    const auto options = config.report;
    {
        Runtime rt(std::move(config));
        result.discovery = cmd_discover(rt);
        result.engagement = cmd_engage(rt);
    }
    result.report = cmd_analyze(result.log, out_dir / "report", options);
    return result;
}

} // namespace honeywire

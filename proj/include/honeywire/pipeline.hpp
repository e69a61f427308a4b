#pragma once

#include "honeywire/analytics.hpp"
#include "honeywire/discovery.hpp"
#include "honeywire/engagement.hpp"
#include "honeywire/filter.hpp"
#include "honeywire/gateway.hpp"
#include "honeywire/llm.hpp"
#include "honeywire/simulation.hpp"
#include "honeywire/store.hpp"
#include "honeywire/transport.hpp"
#include "honeywire/vision.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace honeywire {

struct LlmConfig {
    std::string kind = "simulated";  // simulated | scripted | http
    HttpChatConfig http;
    std::string api_key_env;
    std::filesystem::path script;
    SimulatedCustomerConfig simulated = default_simulated_customer();
};

struct RunConfig {
    std::filesystem::path base_dir;
    std::string transport = "simnet";  // simnet | live
    bool enable_live = false;
    std::filesystem::path scenario;
    std::optional<std::uint64_t> seed;
    std::filesystem::path store = "events.log";
    bool sync_writes = true;

    DiscoveryConfig discovery;
    FilterConfig filter;
    EngagementPolicy engagement;
    SubstitutionTable substitutions = default_substitutions();
    VisionConfig vision = default_vision_config();
    GatewayConfig gateway;
    LlmConfig llm;
    DriverOptions driver;
    ReportOptions report;
};

// Relative paths resolve against the config file's directory. Throws ConfigInvalid.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir);

// Cross-field rules: auto-approve needs the simulated transport, and the live transport needs
// the explicit enable flag.
void validate_run_config(const RunConfig& config);

std::unique_ptr<ChatModel> make_chat_model(const LlmConfig& config);
std::vector<ScriptedChatModel::Step> load_chat_script(const std::filesystem::path& path);

// Owns every component of one process run.
class Runtime {
public:
    explicit Runtime(RunConfig config);

    RunConfig config;
    std::unique_ptr<Store> store;
    std::unique_ptr<Transport> transport;
    SimNet* simnet = nullptr;  // set when the transport is simulated
    std::unique_ptr<ChatModel> llm;
    IdentityOcrEngine ocr_engine;
    std::unique_ptr<OcrService> ocr;
    std::unique_ptr<PaymentExtractor> extractor;
    std::unique_ptr<EngagementEngine> engine;
};

struct DiscoverSummary {
    std::size_t channels_found = 0;
    std::size_t channels_new = 0;
    FilterSummary filter;
    std::size_t actors_found = 0;
    std::size_t actors_new = 0;
    bool partial = false;
    bool keywords_degraded = false;
};

DiscoverSummary cmd_discover(Runtime& rt);

struct EngageSummary {
    std::size_t sessions_opened = 0;
    std::size_t terminated = 0;
    std::size_t still_open = 0;
    std::size_t awaiting_decision = 0;
};

// `actors` empty means every identified actor without a conversation yet.
EngageSummary cmd_engage(Runtime& rt, const std::vector<std::string>& actors = {});

Report cmd_analyze(const std::filesystem::path& log, const std::filesystem::path& out_dir, const ReportOptions& options);

struct SimulateResult {
    DiscoverSummary discovery;
    EngageSummary engagement;
    Report report;
    std::filesystem::path log;
};

// Discover, engage with auto-approval, and analyze, all on the simulated network.
// Refuses to reuse an existing log in `out_dir`.
SimulateResult cmd_simulate(RunConfig config, const std::filesystem::path& out_dir);

} // namespace honeywire

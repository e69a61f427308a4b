// Shared fixtures for the unit and acceptance suites.
#pragma once

#include "honeywire/discovery.hpp"
#include "honeywire/engagement.hpp"
#include "honeywire/llm.hpp"
#include "honeywire/simulation.hpp"
#include "honeywire/store.hpp"
#include "honeywire/transport.hpp"
#include "honeywire/vision.hpp"

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace honeywire::testing {

inline std::filesystem::path source_dir() { return HONEYWIRE_SOURCE_DIR; }

inline std::filesystem::path fixture(const std::string& name) { return source_dir() / "tests" / "fixtures" / name; }

// Fresh directory under the system temp dir, removed by the destructor.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("honeywire-" + tag + "-" + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

// Scenario with one messageable actor per persona, named seller_0, seller_1, ...
inline Scenario persona_scenario(const std::vector<Json>& personas, std::uint64_t seed = 7) {
    Json actors = Json::array();
    for (std::size_t i = 0; i < personas.size(); ++i)
        actors.push_back(Json{{"actor_id", "seller_" + std::to_string(i)}, {"persona", personas[i]}});
    return parse_scenario(Json{{"seed", seed}, {"actors", actors}});
}

// An in-memory engagement stack over a simnet.
struct Rig {
    Rig(Scenario scenario, std::unique_ptr<ChatModel> llm, EngagementPolicy policy, DriverOptions options = {})
        : net(std::move(scenario)),
          model(std::move(llm)),
          ocr(ocr_engine),
          extractor(default_vision_config()),
          engine(store, net, *model, ocr, extractor, std::move(policy)),
          driver(engine, net, options) {
        // Sessions can only be opened with actors the store already knows.
        std::vector<ActorProfile> actors;
        for (const auto& [id, a] : net.scenario().actors) actors.push_back(ActorProfile{id, {"seed_channel"}});
        publish_actors(store, actors, net.now());
    }

    Store store;
    SimNet net;
    std::unique_ptr<ChatModel> model;
    IdentityOcrEngine ocr_engine;
    OcrService ocr;
    PaymentExtractor extractor;
    EngagementEngine engine;
    SimulationDriver driver;

    Conversation conversation(const std::string& id) const { return engine.conversation(id); }

    std::vector<EventRecord> events_of(EventKind kind) const {
        std::vector<EventRecord> out;
        for (auto& e : store.events())
            if (e.kind == kind) out.push_back(std::move(e));
        return out;
    }
};

inline EngagementPolicy auto_policy() {
    EngagementPolicy p;
    p.auto_approve = true;
    return p;
}

inline std::vector<Conversation> terminated_conversations(const State& s) {
    std::vector<Conversation> out;
    for (const auto& [id, c] : s.conversations)
        if (c.state == SessionState::Terminated) out.push_back(c);
    return out;
}

} // namespace honeywire::testing

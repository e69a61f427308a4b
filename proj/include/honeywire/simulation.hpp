#pragma once

#include "honeywire/engagement.hpp"
#include "honeywire/transport.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace honeywire {

struct DriverOptions {
    // Quiet period after an inbound before drafting, so a burst is answered once.
    double debounce_seconds = 30.0;
    // Simulated time budget; the driver stops scheduling beyond it.
    double horizon_seconds = 60.0 * 24 * 3600;
    // When false, simulated time stands still while any draft awaits an operator.
    bool advance_while_pending = false;
};

// Steps a simnet-backed engagement run in simulated time.
class SimulationDriver {
public:
    SimulationDriver(EngagementEngine& engine, SimNet& net, DriverOptions options = {});

    // Opens sessions for actors the network lets us message; returns the conversation ids.
    std::vector<std::string> open_sessions(const std::vector<std::string>& actor_ids);

    // Rebuilds the network's timers from the logged sends and picks up unfinished work.
    void resume_from_store();

    // Processes everything due now, then moves the clock to the next wake-up.
    // Returns false when there is nothing left to do without outside input.
    bool step();
    void run();

    std::size_t steps() const { return steps_; }

private:
    void ingest();
    void reply_due();
    std::optional<Timestamp> next_wakeup() const;
    bool drafts_awaiting_decision() const;

    EngagementEngine& engine_;
    SimNet& net_;
    DriverOptions options_;
    Timestamp started_at_;
    std::set<std::int64_t> seen_;
    std::map<std::string, Timestamp> reply_at_;
    std::size_t steps_ = 0;
};

} // namespace honeywire

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.
// Tolerances are pinned here and nowhere else.

#include "support.hpp"

#include "honeywire/analytics.hpp"
#include "honeywire/error.hpp"
#include "honeywire/gateway.hpp"
#include "honeywire/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace honeywire;
using namespace honeywire::testing;

namespace {

constexpr double kRateTolerancePp = 0.05;   // success / premature rates, percentage points
constexpr double kShareTolerancePp = 0.01;  // payment-method shares, percentage points
constexpr double kFixtureBudgetSeconds = 5.0;
constexpr double kSimulateBudgetSeconds = 60.0;

// Published figures the fixture and the simnet scenario are expected to reproduce.
constexpr double kSuccessRatePct = 56.6;
constexpr double kPrematureRatePct = 15.1;
const std::vector<std::pair<PaymentMethod, double>> kMethodSharesPct = {
    {PaymentMethod::AlipayImage, 25.81}, {PaymentMethod::USDT, 24.19},  {PaymentMethod::WeChat, 22.58},
    {PaymentMethod::Alipay, 19.35},      {PaymentMethod::QQImage, 4.84}, {PaymentMethod::Bank, 1.61},
    {PaymentMethod::PaymentSolution, 1.61},
};
const std::vector<std::pair<PaymentMethod, int>> kMethodCounts = {
    {PaymentMethod::AlipayImage, 16}, {PaymentMethod::USDT, 15}, {PaymentMethod::WeChat, 14}, {PaymentMethod::Alipay, 12},
    {PaymentMethod::QQImage, 3},      {PaymentMethod::Bank, 1},  {PaymentMethod::PaymentSolution, 1},
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects failed expectations for one criterion.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok) failures_.push_back(what);
    }
    void near(double actual, double expected, double tol, const std::string& what) {
        std::ostringstream s;
        s << what << ": got " << actual << ", want " << expected << " +/- " << tol;
        expect(std::fabs(actual - expected) <= tol, s.str());
    }
    bool ok() const { return failures_.empty(); }
    const std::vector<std::string>& failures() const { return failures_; }

private:
    std::vector<std::string> failures_;
};

int g_failed = 0;

void report(int number, const std::string& title, const std::function<void(Check&)>& body) {
    Check check;
    try {
        body(check);
    } catch (const std::exception& e) {
        check.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << (check.ok() ? "PASS" : "FAIL") << " criterion " << number << ": " << title << "\n";
    for (const auto& f : check.failures()) std::cout << "    - " << f << "\n";
    if (!check.ok()) ++g_failed;
}

// The outcome and payment-method numbers shared by criteria 1 and 2.
void check_reference_statistics(Check& check, const Report& r) {
    check.expect(r.outcomes.has_value(), "no outcome summary");
    if (!r.outcomes) return;
    const auto& o = *r.outcomes;
    check.expect(o.total == 53, "terminated conversations = " + std::to_string(o.total));
    check.expect(o.success_count == 30, "PaymentObtained = " + std::to_string(o.success_count));
    check.expect(o.no_response_count == 15, "NoResponse = " + std::to_string(o.no_response_count));
    check.expect(o.by_kind.count(OutcomeKind::Disengaged) && o.by_kind.at(OutcomeKind::Disengaged) == 8,
                 "Disengaged != 8");
    check.near(o.success_rate() * 100.0, kSuccessRatePct, kRateTolerancePp, "success rate %");
    check.near(o.premature_rate() * 100.0, kPrematureRatePct, kRateTolerancePp, "premature rate %");

    check.expect(r.disclosures.size() == 62, "disclosures = " + std::to_string(r.disclosures.size()));
    for (const auto& [method, count] : kMethodCounts) {
        const auto it = r.distribution.find(method);
        const int got = it == r.distribution.end() ? 0 : it->second.count;
        check.expect(got == count, std::string(to_string(method)) + " count = " + std::to_string(got));
    }
    for (const auto& [method, pct] : kMethodSharesPct) {
        const auto it = r.distribution.find(method);
        check.near(it == r.distribution.end() ? 0.0 : it->second.percent(), pct, kShareTolerancePp,
                   std::string(to_string(method)) + " share %");
    }
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

RunConfig reference_config() { return load_run_config(source_dir() / "config" / "reference_run.json"); }

// ---- criterion 1 ----

void criterion_fixture(Check& check) {
    const auto t0 = Clock::now();
    const State state = replay(fixture("reference_run.log"));
    const auto r = build_report(state);
    const double elapsed = seconds_since(t0);
    check_reference_statistics(check, r);
    check.expect(r.conversations_open == 0, "open conversations in fixture");
    check.expect(elapsed < kFixtureBudgetSeconds, "runtime " + std::to_string(elapsed) + " s");
}

// ---- criterion 2 ----

Report g_simulated_report;

void criterion_simulate(Check& check) {
    TempDir tmp("simulate");
    const auto t0 = Clock::now();
    std::vector<std::string> logs;
    for (int run = 0; run < 3; ++run) {
        auto config = reference_config();
        config.seed = 20250611;
        const auto result = cmd_simulate(config, tmp / ("run" + std::to_string(run)));
        check.expect(result.discovery.channels_found == 98, "channels found = " + std::to_string(result.discovery.channels_found));
        check.expect(result.discovery.actors_found == 120, "actors found = " + std::to_string(result.discovery.actors_found));
        check.expect(result.engagement.sessions_opened == 53, "sessions = " + std::to_string(result.engagement.sessions_opened));
        check.expect(result.engagement.still_open == 0, "sessions left open");
        if (run == 0) {
            check_reference_statistics(check, result.report);
            g_simulated_report = result.report;
        }
        logs.push_back(slurp(result.log));
    }
    const double elapsed = seconds_since(t0);
    check.expect(!logs[0].empty(), "empty log");
    check.expect(logs[0] == logs[1] && logs[1] == logs[2], "logs differ between seeded runs");
    check.expect(elapsed < kSimulateBudgetSeconds, "runtime " + std::to_string(elapsed) + " s");
}

// ---- criterion 3 ----

void criterion_rounds(Check& check) {
    const auto report = build_report(replay(fixture("reference_run.log")));
    check.expect(report.success_median_rounds && *report.success_median_rounds == 3.0, "median rounds to payment != 3");
    check.expect(!report.cdf.empty(), "empty CDF");
    for (std::size_t i = 1; i < report.cdf.size(); ++i) {
        check.expect(report.cdf[i].round > report.cdf[i - 1].round, "CDF rounds not increasing");
        check.expect(report.cdf[i].fraction >= report.cdf[i - 1].fraction, "CDF not monotone");
    }
    if (!report.cdf.empty()) check.near(report.cdf.back().fraction, 1.0, 1e-12, "terminal CDF value");
    check.expect(g_simulated_report.max_round <= 5 && g_simulated_report.max_round > 0,
                 "max round in simulated run = " + std::to_string(g_simulated_report.max_round));
    check.expect(report.max_round <= 5, "max round in fixture = " + std::to_string(report.max_round));
}

// ---- criterion 4 ----

Json chatty_persona(int steps) {
    Json script = Json::array();
    for (int i = 1; i < steps; ++i) script.push_back(Json::array({Json{{"text", "ok " + std::to_string(i)}}}));
    script.push_back(Json::array({Json{{"text", "支付宝：13800001111"}}}));
    return Json{{"kind", "FastIndividual"}, {"script", script}};
}

std::vector<bool> refusal_pattern(const Rig& rig) {
    std::vector<bool> out;
    for (const auto& e : rig.events_of(EventKind::DraftCreated))
        if (e.payload.value("purpose", std::string()) == "Reply") out.push_back(e.payload.at("refused").get<bool>());
    return out;
}

void criterion_retries(Check& check) {
    using S = ScriptedChatModel;
    {
        auto model = std::make_unique<S>(std::vector<S::Step>{S::refuse(), S::refuse(), S::refuse(), S::reply("never used")});
        Rig rig(persona_scenario({chatty_persona(3)}), std::move(model), auto_policy());
        rig.driver.open_sessions({"seller_0"});
        rig.driver.run();
        const auto c = rig.conversation("conv-00001");
        check.expect(c.outcome && c.outcome->kind == OutcomeKind::LlmFailure, "three refusals did not end in LlmFailure");
        check.expect(refusal_pattern(rig) == std::vector<bool>{true, true, true}, "expected exactly three refused drafts");
        check.expect(rig.events_of(EventKind::MessageSent).size() == 1, "only the opener should have been sent");
        check.expect(replay(rig.store.events()) == rig.store.snapshot(), "replay differs (refusal run)");
    }
    {
        auto model = std::make_unique<S>(
            std::vector<S::Step>{S::refuse(), S::reply("how much?"), S::refuse(), S::reply("how do I pay?")});
        Rig rig(persona_scenario({chatty_persona(3)}), std::move(model), auto_policy());
        rig.driver.open_sessions({"seller_0"});
        rig.driver.run();
        const auto c = rig.conversation("conv-00001");
        check.expect(c.outcome && c.outcome->kind == OutcomeKind::PaymentObtained,
                     "refusal-success-refusal did not continue to a payment disclosure");
        check.expect(refusal_pattern(rig) == std::vector<bool>{true, false, true, false}, "unexpected draft sequence");
        check.expect(rig.events_of(EventKind::DraftCreated).size() == 5, "opener plus four reply attempts expected");
    }
}

// ---- criterion 5 ----

void criterion_approval_gate(Check& check) {
    auto model = std::make_unique<SimulatedCustomerModel>(default_simulated_customer());
    EngagementPolicy policy;  // manual approval
    Rig rig(persona_scenario({chatty_persona(4), chatty_persona(2), Json{{"kind", "Ghost"}}}), std::move(model), policy);
    Gateway gateway(rig.store, rig.engine, GatewayConfig{"acceptance-token"});

    rig.driver.open_sessions({"seller_0", "seller_1", "seller_2"});
    int decided = 0;
    bool rejected = false;
    for (int guard = 0; guard < 200; ++guard) {
        while (rig.driver.step()) {
        }
        const auto pending = gateway.list_pending();
        if (pending.empty()) break;
        for (const auto& d : pending) {
            ++decided;
            if (!rejected && d.purpose == DraftPurpose::Reply) {
                gateway.submit_decision("acceptance-token", d.draft_id, DecisionKind::Reject, "op-1");
                rejected = true;
            } else if (decided % 2 == 0) {
                gateway.submit_decision("acceptance-token", d.draft_id, DecisionKind::Edit, "op-1", d.text + " (edited)");
            } else {
                gateway.submit_decision("acceptance-token", d.draft_id, DecisionKind::Approve, "op-2");
            }
        }
    }
    check.expect(rejected, "no reply draft was rejected");

    // Every MessageSent must follow an Approve/Edit for the same draft.
    std::map<std::string, std::int64_t> approved_at;
    std::size_t sends = 0;
    for (const auto& e : rig.store.events()) {
        if (e.kind == EventKind::OperatorDecision) {
            const auto d = e.payload.at("decision").get<std::string>();
            if (d == "Approve" || d == "Edit") approved_at.emplace(e.payload.at("draft_id").get<std::string>(), e.sequence);
        } else if (e.kind == EventKind::MessageSent) {
            ++sends;
            const auto draft = e.payload.at("draft_id").get<std::string>();
            const auto it = approved_at.find(draft);
            check.expect(it != approved_at.end() && it->second < e.sequence, "send without prior approval: " + draft);
        }
    }
    check.expect(sends >= 6, "too few sends to be meaningful: " + std::to_string(sends));
    check.expect(rig.conversation("conv-00001").outcome.has_value(), "conv-00001 did not finish");

    // Fail closed: an undecided draft cannot be dispatched, and nothing reaches the log.
    auto model2 = std::make_unique<SimulatedCustomerModel>(default_simulated_customer());
    Rig gate(persona_scenario({chatty_persona(2)}), std::move(model2), EngagementPolicy{});
    const auto cid = gate.engine.open_session("seller_0");
    const auto before = gate.store.last_sequence();
    bool refused = false;
    try {
        gate.engine.dispatch(cid, cid + "/d1");
    } catch (const Error& e) {
        refused = e.code() == ErrorCode::UnapprovedSend;
    }
    check.expect(refused, "dispatch without decision did not raise UnapprovedSend");
    check.expect(gate.store.last_sequence() == before, "a rejected dispatch still wrote to the log");
    check.expect(gate.net.pending_timers() == 0, "the network saw a message");

    // The reducer refuses a hand-written send too.
    bool reducer_refused = false;
    try {
        ChatMessage m;
        m.message_id = cid + "/out1";
        m.direction = Direction::Outbound;
        m.timestamp = gate.net.now() + 1;
        m.text = EngagementPolicy{}.opener_text;
        gate.store.append(EventKind::MessageSent,
                          Json{{"conversation_id", cid}, {"draft_id", cid + "/d1"}, {"message", m},
                               {"receipt", Json{{"message_id", m.message_id}, {"sent_at", m.timestamp}}}},
                          m.timestamp);
    } catch (const Error& e) {
        reducer_refused = e.code() == ErrorCode::ValidationFailure;
    }
    check.expect(reducer_refused, "store accepted a send without a decision");
    check.expect(replay(rig.store.events()) == rig.store.snapshot(), "replay differs (gateway run)");
}

// ---- criterion 6 ----

void criterion_ocr_payment(Check& check) {
    const Json upseller{
        {"kind", "Upseller"},
        {"script", Json::array({
                       Json::array({Json{{"text", "30分钟 300元, VIP 更便宜"},
                                         {"media", Json::array({Json{{"person_labels", {"self"}}, {"payload", "selfie"}}})}}}),
                       Json::array({Json{{"text", "扫这个"},
                                         {"media", Json::array({Json{{"payload", "https://qr.alipay.com/fkx19470aqa2bc"}}})}}}),
                   })}};
    Rig rig(persona_scenario({upseller}), std::make_unique<SimulatedCustomerModel>(default_simulated_customer()),
            auto_policy());
    rig.driver.open_sessions({"seller_0"});
    rig.driver.run();
    const auto c = rig.conversation("conv-00001");
    check.expect(c.outcome && c.outcome->kind == OutcomeKind::PaymentObtained, "session did not end PaymentObtained");
    const auto found = rig.events_of(EventKind::DisclosureFound);
    check.expect(found.size() == 1, "expected one disclosure, got " + std::to_string(found.size()));
    if (!found.empty()) {
        const auto d = found.front().payload.at("disclosure").get<PaymentDisclosure>();
        check.expect(d.method == PaymentMethod::AlipayImage, "method " + std::string(to_string(d.method)));
        check.expect(d.carrier == Carrier::Image, "carrier is not Image");
        check.expect(d.media_id.has_value(), "disclosure lacks a media pointer");
    }
    check.expect(rig.events_of(EventKind::OcrAttached).size() == 2, "both images should be read");
    check.expect(replay(rig.store.events()) == rig.store.snapshot(), "replay differs (upseller run)");
}

// ---- criterion 7 ----

// Order statistic by counting (rank is 1-based), independent of any sort.
double rank_value(const std::vector<double>& v, std::size_t rank) {
    double best = 0;
    bool have = false;
    for (double x : v) {
        std::size_t at_most = 0;
        for (double y : v) at_most += y <= x;
        if (at_most >= rank && (!have || x < best)) {
            best = x;
            have = true;
        }
    }
    return best;
}

// Median of the ranks [first, first + k) of v.
double rank_median(const std::vector<double>& v, std::size_t first, std::size_t k) {
    return (rank_value(v, first + (k + 1) / 2 - 1) + rank_value(v, first + (k + 2) / 2 - 1)) / 2.0;
}

Quartiles oracle_quartiles(const std::vector<double>& v) {
    const std::size_t n = v.size();
    const std::size_t half = (n + 1) / 2;  // odd counts share the median
    return Quartiles{rank_value(v, 1), rank_median(v, 1, half), rank_median(v, 1, n), rank_median(v, n - half + 1, half),
                     rank_value(v, n)};
}

void criterion_prices(Check& check) {
    const auto report = build_report(replay(fixture("reference_run.log")));
    const auto bin = std::find_if(report.bins.begin(), report.bins.end(), [](const PriceBin& b) { return b.lo == 30; });
    check.expect(bin != report.bins.end(), "no [30,34] bin");
    if (bin != report.bins.end()) {
        check.expect(bin->hi == 34, "bin upper bound " + std::to_string(bin->hi));
        check.expect(bin->stats.min == 250.0, "bin minimum " + std::to_string(bin->stats.min));
        check.expect(bin->stats.max >= 600.0, "bin maximum " + std::to_string(bin->stats.max));
    }

    // Every sequence of length 1..8 over a small alphabet with ties.
    const std::vector<double> alphabet = {1, 2, 3, 5, 8};
    std::size_t cases = 0;
    for (std::size_t n = 1; n <= 8; ++n) {
        std::vector<std::size_t> idx(n, 0);
        for (;;) {
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = alphabet[idx[i]];
            ++cases;
            if (tukey_quartiles(v) != oracle_quartiles(v)) {
                std::ostringstream s;
                s << "quartiles differ for";
                for (double x : v) s << ' ' << x;
                check.expect(false, s.str());
                return;
            }
            std::size_t pos = 0;
            while (pos < n && ++idx[pos] == alphabet.size()) idx[pos++] = 0;
            if (pos == n) break;
        }
    }
    check.expect(cases == 488280, "enumerated " + std::to_string(cases) + " cases");
}

// ---- criterion 8 ----

void criterion_replay(Check& check) {
    TempDir tmp("replay");
    auto config = reference_config();
    config.engagement.auto_approve = true;
    config.store = tmp / "events.log";
    State live;
    {
        Runtime rt(config);
        cmd_discover(rt);
        cmd_engage(rt);
        live = rt.store->snapshot();
    }
    check.expect(replay(config.store) == live, "replayed state differs from live state");
    {
        Store reopened(config.store);
        check.expect(reopened.snapshot() == live, "reopened store differs from live state");
        const auto snap = reopened.write_snapshot();
        check.expect(snap.has_value(), "snapshot not written");
    }
    {
        Store from_snapshot(config.store);
        check.expect(from_snapshot.snapshot() == live, "snapshot-restored state differs from live state");
    }

    // Remove one record from the middle of the log.
    std::ifstream in(fixture("reference_run.log"));
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(lines.size() / 2));
    const auto gapped = tmp / "gapped.log";
    {
        std::ofstream out(gapped, std::ios::binary);
        for (const auto& l : lines) out << l << '\n';
    }
    bool detected = false;
    try {
        replay(gapped);
    } catch (const CorruptLogError&) {
        detected = true;
    }
    check.expect(detected, "a sequence gap went unnoticed by replay");
    bool detected_on_open = false;
    try {
        Store s(gapped);
    } catch (const CorruptLogError&) {
        detected_on_open = true;
    }
    check.expect(detected_on_open, "a sequence gap went unnoticed when opening the store");
}

// ---- criterion 9 ----

void criterion_classification(Check& check) {
    const auto state = replay(fixture("reference_run.log"));
    const auto h = first_response_histogram(state, default_histogram_edges());
    int individual = 0, platform = 0;
    for (std::size_t b = 0; b + 1 < h.edges_minutes.size(); ++b) {
        const int ind = h.counts.at(Classification::Individual)[b];
        const int plat = h.counts.at(Classification::Platform)[b];
        individual += ind;
        platform += plat;
        if (ind) check.expect(h.edges_minutes[b + 1] <= 5.0, "individual replies in a bin ending past 5 min");
        if (plat) check.expect(h.edges_minutes[b] >= 30.0, "platform replies in a bin starting before 30 min");
    }
    check.expect(individual > 0 && platform > 0, "both cohorts should be present");

    // Scenario personas map onto the classifier's cohorts.
    const auto scenario = load_scenario(source_dir() / "scenarios" / "reference_network.json");
    for (const auto& [id, c] : state.conversations) {
        if (!c.outcome || c.outcome->kind != OutcomeKind::PaymentObtained) continue;
        const auto kind = scenario.actors.at(c.actor).persona->kind;
        const auto cls = state.actors.at(c.actor).classification;
        const auto want = kind == PersonaKind::SlowPlatform ? Classification::Platform : Classification::Individual;
        check.expect(cls == want, c.actor + " classified " + std::string(to_string(cls)));
    }

    // Person-label rule against a set-size oracle, for every assignment of labels from a pool of
    // three to up to three images.
    const std::vector<std::string> pool = {"a", "b", "c"};
    for (int images = 0; images <= 3; ++images) {
        const int combos = 1 << (3 * images);
        for (int mask = 0; mask < combos; ++mask) {
            std::vector<MediaRef> media(static_cast<std::size_t>(images));
            std::set<std::string> distinct;
            for (int i = 0; i < images; ++i)
                for (int l = 0; l < 3; ++l)
                    if (mask & (1 << (3 * i + l))) {
                        media[static_cast<std::size_t>(i)].person_labels.push_back(pool[static_cast<std::size_t>(l)]);
                        distinct.insert(pool[static_cast<std::size_t>(l)]);
                    }
            const auto want = distinct.size() >= 2   ? Classification::Platform
                              : distinct.size() == 1 ? Classification::Individual
                                                     : Classification::Unknown;
            if (classify_actor(media) != want) {
                check.expect(false, "label rule mismatch for mask " + std::to_string(mask));
                return;
            }
        }
    }
}

} // namespace

int main() {
    report(1, "fixture replay reproduces outcome rates and payment-method shares", criterion_fixture);
    report(2, "simulate finds 98 channels / 120 actors and reproduces the statistics deterministically", criterion_simulate);
    report(3, "round accounting: median 3, monotone CDF ending at 1, at most 5 rounds", criterion_rounds);
    report(4, "three consecutive refusals end in LlmFailure; interleaved refusals do not", criterion_retries);
    report(5, "every send follows an approval; unapproved sends fail closed", criterion_approval_gate);
    report(6, "image-only Alipay QR yields an AlipayImage disclosure and PaymentObtained", criterion_ocr_payment);
    report(7, "price bin [30,34] spans 250 to 600+; quartiles match the brute-force oracle", criterion_prices);
    report(8, "replayed state equals live state; a sequence gap is detected", criterion_replay);
    report(9, "individual and platform cohorts separate; label rule holds", criterion_classification);
    std::cout << (g_failed == 0 ? "all criteria passed" : std::to_string(g_failed) + " criteria failed") << "\n";
    return g_failed == 0 ? 0 : 1;
}

#include <doctest.h>

#include "support.hpp"

#include "honeywire/gateway.hpp"

#include <httplib.h>

#include <thread>

using namespace honeywire;
using namespace honeywire::testing;

namespace {

constexpr const char* kToken = "s3cret-token";

Json talker() {
    return Json::parse(R"({"kind": "FastIndividual", "script": [[{"text": "hello"}], [{"text": "支付宝：13800001111"}]]})");
}

// A manual-approval rig with two open sessions, one escalation, and the HTTP front end on an ephemeral port.
struct Served {
    Served()
        : rig(persona_scenario({talker(), talker()}),
              std::make_unique<ScriptedChatModel>(std::vector<ScriptedChatModel::Step>{},
                                                  ScriptedChatModel::reply("how do I pay?")),
              EngagementPolicy{}),
          gateway(rig.store, rig.engine, GatewayConfig{kToken}),
          http(gateway) {
        rig.driver.open_sessions({"seller_0", "seller_1"});
        ChannelRecord room;
        room.handle = canonicalize_handle("unsure_room");
        room.recent_messages.push_back(ChatMessage{});
        room.recent_messages.back().text = "maybe";
        publish_channels(rig.store, {room}, 0);
        EscalationQueue(rig.store).enqueue({Decision::Borderline, "unclear", Judge::Model}, room.handle, 0);

        port = http.bind_any_port("127.0.0.1");
        REQUIRE(port > 0);
        server = std::thread([this] { http.listen_after_bind(); });
        http.wait_until_ready();
    }
    ~Served() {
        http.stop();
        server.join();
    }

    httplib::Client client(bool with_token = true) const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(5, 0);
        if (with_token) c.set_bearer_token_auth(kToken);
        return c;
    }

    Rig rig;
    Gateway gateway;
    HttpGateway http;
    int port = 0;
    std::thread server;
};

int status_of(const httplib::Result& r) { return r ? r->status : -1; }

Json body_of(const httplib::Result& r) {
    REQUIRE(r);
    return Json::parse(r->body);
}

// Reads SSE frames until `frames` arrived (or the stream ends) and returns their ids.
std::vector<std::int64_t> read_frames(httplib::Client& c, const std::string& path, const httplib::Headers& headers,
                                      std::size_t frames) {
    std::string buffer;
    std::vector<std::int64_t> ids;
    c.Get(path, headers, [&](const char* data, std::size_t n) {
        buffer.append(data, n);
        std::size_t end;
        while ((end = buffer.find("\n\n")) != std::string::npos) {
            const auto frame = buffer.substr(0, end);
            buffer.erase(0, end + 2);
            if (frame.rfind("id: ", 0) == 0) ids.push_back(std::stoll(frame.substr(4, frame.find('\n') - 4)));
        }
        return ids.size() < frames;
    });
    return ids;
}

} // namespace

TEST_CASE("the gateway refuses to run without a token") {
    Rig rig(persona_scenario({talker()}), std::make_unique<ScriptedChatModel>(), EngagementPolicy{});
    CHECK_THROWS_AS(Gateway(rig.store, rig.engine, GatewayConfig{}), Error);
}

TEST_CASE("token comparison") {
    Rig rig(persona_scenario({talker()}), std::make_unique<ScriptedChatModel>(), EngagementPolicy{});
    Gateway g(rig.store, rig.engine, GatewayConfig{"abc"});
    CHECK_NOTHROW(g.authorize("abc"));
    for (const auto* bad : {"", "ab", "abd", "abcd", "ABC"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(g.authorize(bad), Error);
    }
}

TEST_CASE("status codes for error kinds") {
    CHECK(http_status_for(ErrorCode::Unauthorized) == 401);
    CHECK(http_status_for(ErrorCode::UnknownDraft) == 404);
    CHECK(http_status_for(ErrorCode::StaleDraft) == 409);
    CHECK(http_status_for(ErrorCode::InvalidVerdict) == 400);
    CHECK(http_status_for(ErrorCode::LlmUnavailable) == 503);
    CHECK(http_status_for(ErrorCode::IoFailure) == 500);
}

TEST_CASE("every endpoint requires the bearer token") {
    Served s;
    auto anon = s.client(false);
    CHECK(status_of(anon.Get("/queue")) == 401);
    CHECK(status_of(anon.Get("/conversations/conv-00001")) == 401);
    CHECK(status_of(anon.Get("/escalations")) == 401);
    CHECK(status_of(anon.Get("/events")) == 401);
    CHECK(status_of(anon.Post("/decisions", R"({"draft_id":"conv-00001/d1","decision":"Approve","operator_id":"x"})",
                              "application/json")) == 401);
    CHECK(status_of(anon.Post("/conversations/conv-00001/terminate", "not json", "application/json")) == 401);
    CHECK(status_of(anon.Post("/escalations/esc-00001", "not json", "application/json")) == 401);

    auto wrong = s.client(false);
    wrong.set_bearer_token_auth("s3cret-tokem");
    CHECK(status_of(wrong.Get("/queue")) == 401);

    // Nothing was decided or ended.
    CHECK(s.gateway.list_pending().size() == 2);
    CHECK(s.rig.events_of(EventKind::OperatorDecision).empty());
}

TEST_CASE("queue, decisions and transcripts over HTTP") {
    Served s;
    auto c = s.client();

    const auto queue = body_of(c.Get("/queue"));
    REQUIRE(queue.size() == 2);
    CHECK(queue[0].at("draft_id") == "conv-00001/d1");

    auto post = [&](const Json& body) { return c.Post("/decisions", body.dump(), "application/json"); };
    CHECK(status_of(post({{"draft_id", "nope"}, {"decision", "Approve"}, {"operator_id", "op"}})) == 404);
    CHECK(status_of(post({{"draft_id", "conv-00001/d1"}, {"decision", "Maybe"}, {"operator_id", "op"}})) == 400);
    CHECK(status_of(post({{"draft_id", "conv-00001/d1"}, {"decision", "Approve"}})) == 400);
    CHECK(status_of(post({{"draft_id", "conv-00001/d1"}, {"decision", "Edit"}, {"operator_id", "op"}})) == 400);
    CHECK(status_of(c.Post("/decisions", "{broken", "application/json")) == 400);

    const auto ok = post({{"draft_id", "conv-00001/d1"}, {"decision", "Edit"}, {"operator_id", "op"}, {"text", "hey"}});
    REQUIRE(status_of(ok) == 200);
    const auto receipt = body_of(ok);
    CHECK(receipt.at("last_sequence").get<std::int64_t>() >= receipt.at("first_sequence").get<std::int64_t>());
    CHECK(status_of(post({{"draft_id", "conv-00001/d1"}, {"decision", "Approve"}, {"operator_id", "op"}})) == 409);

    const auto transcript = body_of(c.Get("/conversations/conv-00001"));
    CHECK(transcript.at("messages").back().at("text") == "hey");
    CHECK(status_of(c.Get("/conversations/conv-99999")) == 404);

    CHECK(status_of(c.Post("/conversations/conv-00002/terminate", R"({"operator_id":"op"})", "application/json")) == 200);
    CHECK(status_of(c.Post("/conversations/conv-00002/terminate", R"({"operator_id":"op"})", "application/json")) == 409);
    CHECK(status_of(c.Post("/conversations/conv-99999/terminate", R"({"operator_id":"op"})", "application/json")) == 404);
    CHECK(status_of(c.Post("/conversations/conv-00001/terminate", "", "application/json")) == 400);  // no operator
    CHECK(s.rig.conversation("conv-00002").outcome->kind == OutcomeKind::OperatorTerminated);
}

TEST_CASE("escalations over HTTP") {
    Served s;
    auto c = s.client();
    CHECK(body_of(c.Get("/escalations")).size() == 1);

    auto resolve = [&](const std::string& id, const Json& body) {
        return c.Post(("/escalations/" + id).c_str(), body.dump(), "application/json");
    };
    CHECK(status_of(resolve("esc-00001", {{"decision", "Borderline"}})) == 400);
    CHECK(status_of(resolve("esc-09999", {{"decision", "Relevant"}})) == 404);
    const auto done = resolve("esc-00001", {{"decision", "Relevant"}, {"rationale", "checked"}});
    REQUIRE(status_of(done) == 200);
    CHECK(body_of(done).at("channel") == "unsure_room");
    CHECK(status_of(resolve("esc-00001", {{"decision", "Irrelevant"}})) == 409);

    CHECK(body_of(c.Get("/escalations")).empty());
    CHECK(body_of(c.Get("/escalations?all=true")).size() == 1);
}

TEST_CASE("the event stream resumes after a cursor") {
    Served s;
    auto c = s.client();
    const auto last = s.rig.store.last_sequence();
    REQUIRE(last > 4);

    CHECK(read_frames(c, "/events?since=2", {}, 2) == std::vector<std::int64_t>{3, 4});
    CHECK(read_frames(c, "/events", {{"Last-Event-ID", "4"}}, 1) == std::vector<std::int64_t>{5});
    CHECK(status_of(c.Get("/events?since=abc")) == 400);

    // A frame for an event appended while the client waits.
    std::thread later([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(150));
        s.gateway.terminate_conversation(kToken, "conv-00001", "op");
    });
    const auto ids = read_frames(c, "/events?since=" + std::to_string(last), {}, 1);
    later.join();
    CHECK(ids == std::vector<std::int64_t>{last + 1});
}

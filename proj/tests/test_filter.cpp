#include <doctest.h>

#include "support.hpp"

#include "honeywire/error.hpp"
#include "honeywire/filter.hpp"

using namespace honeywire;
using namespace honeywire::testing;

namespace {

ChatMessage post(std::string text, std::vector<MediaRef> media = {}) {
    ChatMessage m;
    m.text = std::move(text);
    m.media = std::move(media);
    return m;
}

ChannelRecord record(const std::string& handle, std::vector<ChatMessage> pinned, std::vector<ChatMessage> recent) {
    ChannelRecord r;
    r.handle = canonicalize_handle(handle);
    r.pinned_posts = std::move(pinned);
    r.recent_messages = std::move(recent);
    return r;
}

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        const std::size_t n = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
        if (n == 0 || i + n > s.size()) return false;
        for (std::size_t k = 1; k < n; ++k)
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        i += n;
    }
    return true;
}

void seed(Store& store, const std::vector<ChannelRecord>& records) { publish_channels(store, records, 0); }

} // namespace

TEST_CASE("digests put pins first and stay inside the budget") {
    const auto r = record("room", {post("rules")}, {post("newest"), post("older", {{"m1", MediaKind::Image, {}, ""}})});
    const auto full = make_digest(r, 1000);
    CHECK(full.pinned_excerpt == "rules\n");
    CHECK(full.message_excerpt == "newest\nolder\n");
    CHECK(full.media_summary.at(MediaKind::Image) == 1);
    CHECK(full.render().find("Pinned:\nrules") < full.render().find("Recent messages:"));

    const auto cut = make_digest(r, 9);
    CHECK(cut.pinned_excerpt == "rules\n");
    CHECK(cut.message_excerpt == std::string("new") + std::string(kTruncationMarker));
    CHECK(cut.media_summary.at(MediaKind::Image) == 1);  // counted even when the text is cut
}

TEST_CASE("truncation never splits a multi-byte character") {
    // Every budget across a string of 3-byte characters.
    const auto r = record("room", {}, {post("视频聊天一对一")});
    for (std::size_t budget = 1; budget <= 22; ++budget) {
        const auto d = make_digest(r, budget);
        CAPTURE(budget);
        CHECK(valid_utf8(d.message_excerpt));
        std::string body = d.message_excerpt;
        if (body.ends_with(kTruncationMarker)) body.resize(body.size() - kTruncationMarker.size());
        if (body.ends_with("\n")) body.pop_back();
        CHECK(body.size() <= budget);
        CHECK(body.size() % 3 == 0);
    }
}

TEST_CASE("answers map onto verdicts") {
    const auto phrases = default_refusal_phrases();
    auto judge = [&](std::string text, bool refused = false) { return parse_relevance_answer({text, refused}, phrases); };
    CHECK(judge("Yes - offers paid video chat").decision == Decision::Relevant);
    CHECK(judge("Yes - offers paid video chat").rationale == "offers paid video chat");
    CHECK(judge("no. just a fan club").decision == Decision::Irrelevant);
    CHECK(judge("是，提供付费服务").decision == Decision::Relevant);
    CHECK(judge("否").decision == Decision::Irrelevant);
    CHECK(judge("Yesterday I saw...").decision == Decision::Borderline);
    CHECK(judge("nobody knows").decision == Decision::Borderline);
    CHECK(judge("").rationale == "empty answer");
    CHECK(judge("I'm sorry, but I can't help with that.").decision == Decision::Refusal);
    CHECK(judge("yes", true).decision == Decision::Refusal);
    CHECK(judge("yes").judged_by == Judge::Model);
}

TEST_CASE("judging fills the template and falls back to Borderline when the model is down") {
    FilterConfig config;
    const auto d = make_digest(record("room", {post("pay to chat")}, {}), 100);
    ScriptedChatModel llm({ScriptedChatModel::reply("yes, it sells chats"), ScriptedChatModel::unavailable()});
    CHECK(judge_relevance(d, llm, config).decision == Decision::Relevant);
    const auto sent = llm.requests().at(0).turns.at(0).content;
    CHECK(sent.find("{digest}") == std::string::npos);
    CHECK(sent.find("pay to chat") != std::string::npos);

    const auto down = judge_relevance(d, llm, config);
    CHECK(down.decision == Decision::Borderline);
    CHECK(down.rationale == "adapter unavailable");

    CHECK_THROWS_AS(judge_relevance(ChannelDigest{canonicalize_handle("x"), "", "", {}}, llm, config), Error);
}

TEST_CASE("filter config validation") {
    CHECK_THROWS_AS(parse_filter_config(Json{{"digest_budget", 0}}), Error);
    CHECK_THROWS_AS(parse_filter_config(Json::object(), "no slot here"), Error);
    CHECK(parse_filter_config(Json::object(), "judge {digest}").prompt_template == "judge {digest}");
}

TEST_CASE("the escalation queue") {
    Store store;
    seed(store, {record("room", {post("hm")}, {})});
    EscalationQueue queue(store);
    const auto handle = canonicalize_handle("room");

    auto code_of = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        FAIL("expected an error");
        return ErrorCode::ValidationFailure;
    };

    CHECK(code_of([&] { queue.enqueue({Decision::Relevant, "", Judge::Model}, handle, 1); }) == ErrorCode::InvalidVerdict);
    const auto item = queue.enqueue({Decision::Borderline, "unclear", Judge::Model}, handle, 1);
    CHECK(item.escalation_id == "esc-00001");
    CHECK(queue.list(true).size() == 1);

    CHECK(code_of([&] { queue.apply_human_verdict("esc-99999", Decision::Relevant, "", 2); }) == ErrorCode::UnknownEscalation);
    CHECK(code_of([&] { queue.apply_human_verdict(item.escalation_id, Decision::Borderline, "", 2); })
          == ErrorCode::InvalidVerdict);

    const auto settled = queue.apply_human_verdict(item.escalation_id, Decision::Relevant, "checked by hand", 2);
    REQUIRE(settled.verdict);
    CHECK(settled.verdict->decision == Decision::Relevant);
    CHECK(settled.verdict->judged_by == Judge::Human);
    CHECK(queue.list(true).empty());
    CHECK(queue.list(false).size() == 1);
    CHECK(code_of([&] { queue.apply_human_verdict(item.escalation_id, Decision::Irrelevant, "", 3); })
          == ErrorCode::AlreadyResolved);

    const auto flipped = queue.override_verdict(handle, Decision::Irrelevant, "false alarm", 4);
    CHECK(flipped.verdict->decision == Decision::Irrelevant);
    CHECK(code_of([&] { queue.override_verdict(canonicalize_handle("nope"), Decision::Relevant, "", 5); })
          == ErrorCode::UnknownChannel);
}

TEST_CASE("run_filter judges unjudged channels once and escalates the uncertain") {
    Store store;
    seed(store, {record("a", {post("pay to chat")}, {}), record("b", {}, {post("cats")}),
                               record("c", {}, {post("???")}), record("d", {}, {post("hmm")}), record("empty", {}, {})});
    ScriptedChatModel llm({ScriptedChatModel::reply("yes"), ScriptedChatModel::reply("no"),
                           ScriptedChatModel::reply("maybe"), ScriptedChatModel::refuse()});
    const auto summary = run_filter(store, llm, FilterConfig{}, 10);
    CHECK(summary.counts.at(Decision::Relevant) == 1);
    CHECK(summary.counts.at(Decision::Irrelevant) == 1);
    CHECK(summary.counts.at(Decision::Borderline) == 1);
    CHECK(summary.counts.at(Decision::Refusal) == 1);
    CHECK(summary.escalated == 2);
    CHECK(llm.requests().size() == 4);

    // A second pass has nothing left to judge.
    CHECK(run_filter(store, llm, FilterConfig{}, 11).counts.empty());
    CHECK(llm.requests().size() == 4);

    store.read([](const State& s) {
        std::vector<std::string> got;
        for (const auto& r : channels_of_interest(s)) got.push_back(r.handle.canonical);
        CHECK(got == std::vector<std::string>{"a", "d"});
        CHECK(s.escalations.size() == 2);
    });
}

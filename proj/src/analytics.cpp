#include "honeywire/analytics.hpp"

#include "honeywire/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace honeywire {

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string edge_label(double edge) { return std::isinf(edge) ? std::string("inf") : fixed(edge, 0); }

std::vector<const Conversation*> terminated(const State& state) {
    std::vector<const Conversation*> out;
    for (const auto& [id, c] : state.conversations)
        if (c.state == SessionState::Terminated) out.push_back(&c);
    return out;
}

bool no_inbound(const Conversation& c) {
    return std::none_of(c.messages.begin(), c.messages.end(),
                        [](const ChatMessage& m) { return m.direction == Direction::Inbound; });
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

} // namespace

OutcomeSummary outcome_summary(std::span<const Conversation> conversations) {
    if (conversations.empty()) throw Error(ErrorCode::EmptyInput, "no conversations to summarize");
    OutcomeSummary s;
    for (const auto& c : conversations) {
        if (c.state != SessionState::Terminated || !c.outcome)
            throw Error(ErrorCode::UnterminatedInput, c.conversation_id + " has not terminated");
        ++s.total;
        ++s.by_kind[c.outcome->kind];
        switch (c.outcome->kind) {
        case OutcomeKind::PaymentObtained: ++s.success_count; break;
        case OutcomeKind::NoResponse: ++s.no_response_count; break;
        case OutcomeKind::Disengaged:
        case OutcomeKind::LlmFailure:
        case OutcomeKind::OperatorTerminated: ++s.premature_count; break;
        }
    }
    return s;
}

std::vector<CdfPoint> round_cdf(std::span<const Conversation> conversations, bool exclude_no_response) {
    std::map<int, int> counts;
    int n = 0;
    for (const auto& c : conversations) {
        if (exclude_no_response && (no_inbound(c) || (c.outcome && c.outcome->kind == OutcomeKind::NoResponse)))
            continue;
        ++counts[c.round_counter];
        ++n;
    }
    if (n == 0) throw Error(ErrorCode::EmptyInput, "no conversations for the round CDF");
    std::vector<CdfPoint> out;
    int cumulative = 0;
    for (const auto& [round, k] : counts) {
        cumulative += k;
        out.push_back({round, cumulative == n ? 1.0 : static_cast<double>(cumulative) / n});
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "median of nothing");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::string format_percent(long long count, long long total, int decimals) {
    if (total <= 0) return "n/a";
    long long scale = 100;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const long long units = (2 * count * scale + total) / (2 * total);  // half-up
    long long divisor = 1;
    for (int i = 0; i < decimals; ++i) divisor *= 10;
    std::string out = std::to_string(units / divisor);
    if (decimals > 0) {
        auto frac = std::to_string(units % divisor);
        out += "." + std::string(static_cast<std::size_t>(decimals) - frac.size(), '0') + frac;
    }
    return out;
}

std::map<PaymentMethod, MethodShare> payment_distribution(std::span<const PaymentDisclosure> disclosures) {
    std::map<PaymentMethod, MethodShare> out;
    for (const auto& d : disclosures) ++out[d.method].count;
    const long long total = static_cast<long long>(disclosures.size());
    for (auto& [method, share] : out) share.hundredths = static_cast<int>((2LL * share.count * 10000 + total) / (2 * total));
    return out;
}

Quartiles tukey_quartiles(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "quartiles of nothing");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    const auto half = (n + 1) / 2;
    Quartiles q;
    q.min = values.front();
    q.max = values.back();
    q.median = median(values);
    q.q1 = median(std::vector<double>(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(half)));
    q.q3 = median(std::vector<double>(values.end() - static_cast<std::ptrdiff_t>(half), values.end()));
    return q;
}

std::vector<PriceBin> price_bins(std::span<const PriceQuote> quotes) {
    std::map<int, std::vector<double>> by_bin;
    for (const auto& q : quotes) {
        if (q.duration_minutes < 0) continue;
        by_bin[(q.duration_minutes / 5) * 5].push_back(q.price_cny);
    }
    std::vector<PriceBin> out;
    for (auto& [lo, prices] : by_bin) {
        PriceBin bin;
        bin.lo = lo;
        bin.hi = lo + 4;
        bin.count = prices.size();
        bin.stats = tukey_quartiles(std::move(prices));
        out.push_back(bin);
    }
    return out;
}

Classification classify_actor(std::span<const MediaRef> media) {
    const auto distinct = count_distinct_persons(media);
    if (distinct >= 2) return Classification::Platform;
    if (distinct == 1) return Classification::Individual;
    return Classification::Unknown;
}

std::vector<double> default_histogram_edges() { return {0, 2, 5, 15, 30, 60, 120, 240, kOpenEnded}; }

ResponseHistogram first_response_histogram(const State& state, const std::vector<double>& edges) {
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
        throw Error(ErrorCode::ValidationFailure, "histogram edges must be ascending with at least two entries");
    ResponseHistogram h;
    h.edges_minutes = edges;
    const std::size_t bins = edges.size() - 1;
    for (auto cls : {Classification::Individual, Classification::Platform, Classification::Unknown})
        h.counts[cls] = std::vector<int>(bins, 0);

    for (const auto& [id, c] : state.conversations) {
        std::optional<Timestamp> first_out, first_in;
        for (const auto& m : c.messages) {
            if (m.direction == Direction::Outbound && !first_out) first_out = m.timestamp;
            if (m.direction == Direction::Inbound && first_out && !first_in) first_in = m.timestamp;
        }
        if (!first_out || !first_in) continue;
        const double minutes = static_cast<double>(*first_in - *first_out) / 60000.0;
        auto actor = state.actors.find(c.actor);
        const auto cls = actor == state.actors.end() ? Classification::Unknown : actor->second.classification;
        for (std::size_t b = 0; b < bins; ++b) {
            if (minutes >= edges[b] && minutes < edges[b + 1]) {
                ++h.counts[cls][b];
                break;
            }
        }
    }
    return h;
}

std::vector<ScatterPoint> rounds_vs_response_scatter(std::span<const Conversation> conversations) {
    std::vector<ScatterPoint> out;
    for (const auto& c : conversations) {
        std::optional<Timestamp> open_outbound;
        for (const auto& m : c.messages) {
            if (m.direction == Direction::Outbound) {
                open_outbound = m.timestamp;
            } else if (open_outbound) {
                out.push_back({c.conversation_id, m.round_index, static_cast<double>(m.timestamp - *open_outbound) / 60000.0});
                open_outbound.reset();
            }
        }
    }
    return out;
}

std::vector<QuoteRecord> collect_price_quotes(const State& state, const PriceQuoteDetector& detector) {
    std::vector<QuoteRecord> out;
    for (const auto& [id, c] : state.conversations) {
        for (const auto& m : c.messages) {
            if (m.direction != Direction::Inbound) continue;
            for (auto& q : detector.detect(m.text, m.message_id)) out.push_back({id, q});
            if (m.ocr_text)
                for (auto& q : detector.detect(*m.ocr_text, m.message_id)) out.push_back({id, q});
        }
    }
    return out;
}

Report build_report(const State& state, const ReportOptions& options) {
    Report r;
    r.conversations_total = static_cast<int>(state.conversations.size());
    std::vector<Conversation> done;
    for (const auto* c : terminated(state)) done.push_back(*c);
    r.conversations_open = r.conversations_total - static_cast<int>(done.size());
    r.actors = state.actors;
    r.channels_total = state.channels.size();
    for (const auto& [k, ch] : state.channels)
        if (ch.verdict && ch.verdict->decision == Decision::Relevant) ++r.channels_relevant;

    if (!done.empty()) {
        r.outcomes = outcome_summary(done);
        try {
            r.cdf = round_cdf(done, !options.include_ghosts);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyInput) throw;
        }
        std::vector<double> success_rounds;
        for (const auto& c : done) {
            r.max_round = std::max(r.max_round, c.round_counter);
            if (c.outcome->kind == OutcomeKind::PaymentObtained) {
                success_rounds.push_back(c.round_counter);
                for (const auto& d : c.outcome->evidence) {
                    r.disclosures.push_back(d);
                    r.disclosure_conversations.push_back(c.conversation_id);
                }
            }
        }
        if (!success_rounds.empty()) r.success_median_rounds = median(success_rounds);
    }
    r.distribution = payment_distribution(r.disclosures);
    r.quotes = collect_price_quotes(state, PriceQuoteDetector(options.vision));
    std::vector<PriceQuote> plain;
    for (const auto& q : r.quotes) plain.push_back(q.quote);
    r.bins = price_bins(plain);
    r.histogram = first_response_histogram(state, options.histogram_edges);
    std::vector<Conversation> all;
    for (const auto& [id, c] : state.conversations) all.push_back(c);
    r.scatter = rounds_vs_response_scatter(all);
    return r;
}

std::string render_summary(const Report& r) {
    std::ostringstream md;
    md << "# Engagement report\n\n";
    md << "Channels: " << r.channels_total << " discovered, " << r.channels_relevant << " judged relevant\n";
    md << "Actors: " << r.actors.size() << "\n";
    md << "Conversations: " << r.conversations_total << " (" << r.conversations_open << " still open)\n\n";
    md << "## Outcomes\n\n";
    if (!r.outcomes) {
        md << "No terminated conversations.\n\n";
    } else {
        const auto& o = *r.outcomes;
        md << "| outcome | count | share |\n|---|---|---|\n";
        md << "| success (payment obtained) | " << o.success_count << " | " << format_percent(o.success_count, o.total, 1) << "% |\n";
        md << "| no response | " << o.no_response_count << " | " << format_percent(o.no_response_count, o.total, 1) << "% |\n";
        md << "| premature end | " << o.premature_count << " | " << format_percent(o.premature_count, o.total, 1) << "% |\n";
        md << "| total | " << o.total << " | 100.0% |\n\n";
        md << "Success rate: " << format_percent(o.success_count, o.total, 1) << "% (" << o.success_count << "/" << o.total << ")\n";
        md << "Premature termination rate: " << format_percent(o.premature_count, o.total, 1) << "% (" << o.premature_count
           << "/" << o.total << ")\n\n";
    }
    md << "## Rounds\n\n";
    if (r.success_median_rounds) md << "Median rounds to payment: " << fixed(*r.success_median_rounds, 1) << "\n";
    md << "Longest conversation: " << r.max_round << " rounds\n\n";
    md << "## Payment methods\n\n";
    md << "Disclosures: " << r.disclosures.size() << "\n\n";
    if (!r.distribution.empty()) {
        std::vector<std::pair<PaymentMethod, MethodShare>> rows(r.distribution.begin(), r.distribution.end());
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second.count > b.second.count; });
        md << "| method | count | share |\n|---|---|---|\n";
        for (const auto& [m, s] : rows) md << "| " << to_string(m) << " | " << s.count << " | " << fixed(s.percent(), 2) << "% |\n";
        md << "\n";
    }
    md << "## Prices\n\n";
    md << "Quotes: " << r.quotes.size() << "\n\n";
    if (!r.bins.empty()) {
        md << "| minutes | n | min | q1 | median | q3 | max |\n|---|---|---|---|---|---|---|\n";
        for (const auto& b : r.bins)
            md << "| " << b.lo << "-" << b.hi << " | " << b.count << " | " << fixed(b.stats.min, 0) << " | "
               << fixed(b.stats.q1, 1) << " | " << fixed(b.stats.median, 1) << " | " << fixed(b.stats.q3, 1) << " | "
               << fixed(b.stats.max, 0) << " |\n";
    }
    return md.str();
}

std::vector<std::filesystem::path> export_report(const Report& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        write_file(dir / name, content);
        written.push_back(dir / name);
    };

    {
        std::ostringstream s;
        s << "outcome,count,percent\n";
        if (r.outcomes)
            for (const auto& [kind, n] : r.outcomes->by_kind)
                s << to_string(kind) << "," << n << "," << format_percent(n, r.outcomes->total, 2) << "\n";
        emit("outcomes.csv", s.str());
    }
    {
        std::ostringstream s;
        s << "round,cumulative_fraction\n";
        for (const auto& p : r.cdf) s << p.round << "," << fixed(p.fraction, 6) << "\n";
        emit("round_cdf.csv", s.str());
    }
    {
        std::ostringstream s;
        s << "method,count,percent\n";
        for (const auto& [m, share] : r.distribution) s << to_string(m) << "," << share.count << "," << fixed(share.percent(), 2) << "\n";
        emit("payment_methods.csv", s.str());
    }
    {
        std::ostringstream s;
        s << "conversation_id,message_id,method,carrier,media_id,detail\n";
        for (std::size_t i = 0; i < r.disclosures.size(); ++i) {
            const auto& d = r.disclosures[i];
            s << r.disclosure_conversations[i] << "," << csv_field(d.message_id) << "," << to_string(d.method) << "," << to_string(d.carrier) << ","
              << csv_field(d.media_id.value_or("")) << "," << csv_field(d.detail) << "\n";
        }
        emit("disclosures.csv", s.str());
    }
    {
        std::ostringstream s;
        s << "conversation_id,message_id,duration_minutes,price_cny\n";
        for (const auto& q : r.quotes)
            s << q.conversation_id << "," << csv_field(q.quote.message_id) << "," << q.quote.duration_minutes << ","
              << fixed(q.quote.price_cny, 2) << "\n";
        emit("price_quotes.csv", s.str());
    }
    {
        std::ostringstream s;
        s << "bin_lo,bin_hi,count,min,q1,median,q3,max\n";
        for (const auto& b : r.bins)
            s << b.lo << "," << b.hi << "," << b.count << "," << fixed(b.stats.min, 2) << "," << fixed(b.stats.q1, 2) << ","
              << fixed(b.stats.median, 2) << "," << fixed(b.stats.q3, 2) << "," << fixed(b.stats.max, 2) << "\n";
        emit("price_bins.csv", s.str());
    }
    {
        std::ostringstream s;
        s << "bin_lo_minutes,bin_hi_minutes,Individual,Platform,Unknown\n";
        const auto& edges = r.histogram.edges_minutes;
        for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
            s << edge_label(edges[b]) << "," << edge_label(edges[b + 1]);
            for (auto cls : {Classification::Individual, Classification::Platform, Classification::Unknown}) {
                auto it = r.histogram.counts.find(cls);
                s << "," << (it == r.histogram.counts.end() ? 0 : it->second[b]);
            }
            s << "\n";
        }
        emit("first_response_histogram.csv", s.str());
    }
    {
        std::ostringstream s;
        s << "conversation_id,round,latency_minutes\n";
        for (const auto& p : r.scatter) s << p.conversation_id << "," << p.round << "," << fixed(p.latency_minutes, 3) << "\n";
        emit("rounds_vs_response.csv", s.str());
    }
    {
        std::ostringstream s;
        s << "actor_id,classification,source_channels,first_response_seconds\n";
        for (const auto& [id, a] : r.actors) {
            std::string channels;
            for (const auto& ch : a.source_channels) channels += (channels.empty() ? "" : ";") + ch;
            std::string latencies;
            for (double l : a.first_response_latencies) latencies += (latencies.empty() ? "" : ";") + fixed(l, 3);
            s << csv_field(id) << "," << to_string(a.classification) << "," << csv_field(channels) << "," << latencies << "\n";
        }
        emit("actors.csv", s.str());
    }
    emit("summary.md", render_summary(r));
    return written;
}

} // namespace honeywire

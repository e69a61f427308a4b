#pragma once

#include "honeywire/domain.hpp"
#include "honeywire/store.hpp"
#include "honeywire/vision.hpp"

#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace honeywire {

struct OutcomeSummary {
    int total = 0;
    int success_count = 0;
    int no_response_count = 0;
    int premature_count = 0;  // Disengaged + LlmFailure + OperatorTerminated
    std::map<OutcomeKind, int> by_kind;

    double success_rate() const { return total ? static_cast<double>(success_count) / total : 0.0; }
    double premature_rate() const { return total ? static_cast<double>(premature_count) / total : 0.0; }
};

// Throws EmptyInput on an empty list and UnterminatedInput if any conversation is still open.
OutcomeSummary outcome_summary(std::span<const Conversation> conversations);

struct CdfPoint {
    int round = 0;
    double fraction = 0.0;

    bool operator==(const CdfPoint&) const = default;
};

// Cumulative share of conversations ending at or before each observed round count.
// Throws EmptyInput when nothing remains after the exclusion.
std::vector<CdfPoint> round_cdf(std::span<const Conversation> conversations, bool exclude_no_response = true);

double median(std::vector<double> values);

struct MethodShare {
    int count = 0;
    int hundredths = 0;  // percentage in hundredths of a point, rounded half-up

    double percent() const { return hundredths / 100.0; }
};

std::map<PaymentMethod, MethodShare> payment_distribution(std::span<const PaymentDisclosure> disclosures);

// count/total as a percentage with `decimals` places, half-up, computed in integers.
std::string format_percent(long long count, long long total, int decimals);

struct Quartiles {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;

    bool operator==(const Quartiles&) const = default;
};

// Tukey hinges: the median is included in both halves when the count is odd.
Quartiles tukey_quartiles(std::vector<double> values);

struct PriceBin {
    int lo = 0;  // minutes, inclusive
    int hi = 0;  // lo + 4
    std::size_t count = 0;
    Quartiles stats;
};

std::vector<PriceBin> price_bins(std::span<const PriceQuote> quotes);

Classification classify_actor(std::span<const MediaRef> media);

inline constexpr double kOpenEnded = std::numeric_limits<double>::infinity();

std::vector<double> default_histogram_edges();

struct ResponseHistogram {
    std::vector<double> edges_minutes;  // bins are [edge[i], edge[i+1])
    std::map<Classification, std::vector<int>> counts;
};

// First reply latency per conversation, split by the actor's classification. Conversations
// without any reply are left out.
ResponseHistogram first_response_histogram(const State& state, const std::vector<double>& edges_minutes);

struct ScatterPoint {
    std::string conversation_id;
    int round = 0;
    double latency_minutes = 0.0;

    bool operator==(const ScatterPoint&) const = default;
};

std::vector<ScatterPoint> rounds_vs_response_scatter(std::span<const Conversation> conversations);

struct QuoteRecord {
    std::string conversation_id;
    PriceQuote quote;
};

// Price quotes found in inbound text and OCR overlays.
std::vector<QuoteRecord> collect_price_quotes(const State& state, const PriceQuoteDetector& detector);

struct ReportOptions {
    bool include_ghosts = false;
    std::vector<double> histogram_edges = default_histogram_edges();
    VisionConfig vision = default_vision_config();
};

struct Report {
    int conversations_total = 0;
    int conversations_open = 0;
    std::optional<OutcomeSummary> outcomes;
    std::vector<CdfPoint> cdf;
    std::optional<double> success_median_rounds;
    int max_round = 0;
    std::vector<PaymentDisclosure> disclosures;
    std::vector<std::string> disclosure_conversations;  // parallel to disclosures
    std::map<PaymentMethod, MethodShare> distribution;
    std::vector<QuoteRecord> quotes;
    std::vector<PriceBin> bins;
    ResponseHistogram histogram;
    std::vector<ScatterPoint> scatter;
    std::map<std::string, ActorProfile> actors;
    std::size_t channels_total = 0;
    std::size_t channels_relevant = 0;
};

Report build_report(const State& state, const ReportOptions& options = {});

// Writes one CSV per metric plus summary.md. Output bytes depend only on the report.
std::vector<std::filesystem::path> export_report(const Report& report, const std::filesystem::path& dir);

std::string render_summary(const Report& report);

} // namespace honeywire

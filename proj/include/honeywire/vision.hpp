#pragma once

#include "honeywire/domain.hpp"
#include "honeywire/serialization.hpp"

#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace honeywire {

struct OcrResult {
    std::string media_id;
    std::string text;
    std::string engine_tag;

    bool operator==(const OcrResult&) const = default;
};

class OcrEngine {
public:
    virtual ~OcrEngine() = default;
    virtual std::string tag() const = 0;
    // Throws EngineUnavailable.
    virtual std::string recognize(std::string_view payload) = 0;
};

// Simnet image payloads are already text; recognition is the identity.
class IdentityOcrEngine final : public OcrEngine {
public:
    std::string tag() const override { return "identity-mock"; }
    std::string recognize(std::string_view payload) override { return std::string(payload); }
};

// Caches results per media id.
class OcrService {
public:
    explicit OcrService(OcrEngine& engine) : engine_(engine) {}

    OcrResult extract(const MediaRef& media, std::string_view payload);
    std::size_t cache_size() const;

private:
    OcrEngine& engine_;
    std::map<std::string, OcrResult> cache_;
    mutable std::mutex mutex_;
};

enum class MatcherKind { KeywordSet, AddressRegex, QrPayloadPrefix };
enum class CarrierConstraint { Any, TextOnly, ImageOnly };

struct PaymentPattern {
    std::string name;
    PaymentMethod method = PaymentMethod::Alipay;        // when matched in plain text
    PaymentMethod image_method = PaymentMethod::Alipay;  // when matched in OCR text
    MatcherKind kind = MatcherKind::KeywordSet;
    std::vector<std::string> expressions;
    CarrierConstraint carrier = CarrierConstraint::Any;
};

struct PricePattern {
    std::string expression;
    int duration_group = 1;
    int unit_group = 2;
    int price_group = 3;
};

struct VisionConfig {
    std::vector<PaymentPattern> payment_patterns;
    std::vector<PricePattern> price_patterns;
    double price_min = 1.0;
    double price_max = 100000.0;
};

VisionConfig default_vision_config();
VisionConfig parse_vision_config(const Json& j);

class PaymentExtractor {
public:
    explicit PaymentExtractor(const VisionConfig& config);

    // Text matches carry Text; matches found only in OCR output carry Image.
    std::vector<PaymentDisclosure> extract(std::string_view text, std::span<const OcrResult> ocr,
                                           const std::string& message_id) const;
    std::vector<PaymentDisclosure> extract(std::string_view text, const std::optional<OcrResult>& ocr,
                                           const std::string& message_id) const;

private:
    struct Compiled {
        PaymentPattern pattern;
        std::vector<std::regex> regexes;
    };
    std::vector<Compiled> patterns_;
};

class PriceQuoteDetector {
public:
    explicit PriceQuoteDetector(const VisionConfig& config);
    std::vector<PriceQuote> detect(std::string_view text, const std::string& message_id = {}) const;

private:
    struct Compiled {
        PricePattern pattern;
        std::regex regex;
    };
    std::vector<Compiled> patterns_;
    double min_;
    double max_;
};

std::size_t count_distinct_persons(std::span<const MediaRef> media);

} // namespace honeywire

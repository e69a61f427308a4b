#include "honeywire/vision.hpp"

#include "honeywire/error.hpp"
#include "honeywire/llm.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace honeywire {

namespace {

struct Span {
    std::size_t begin;
    std::size_t end;
};

bool overlaps(const std::vector<Span>& spans, std::size_t begin, std::size_t end) {
    return std::any_of(spans.begin(), spans.end(), [&](const Span& s) { return begin < s.end && s.begin < end; });
}

bool ascii_alnum(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::isalnum(u) != 0;
}

bool is_ascii(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

// Separators allowed between a keyword and the account it introduces.
std::size_t skip_separators(std::string_view s, std::size_t pos) {
    static const std::string_view wide[] = {"：", "　"};
    while (pos < s.size()) {
        const char c = s[pos];
        if (c == ' ' || c == '\t' || c == ':' || c == '-' || c == '=' || c == '#') {
            ++pos;
            continue;
        }
        bool matched = false;
        for (auto w : wide)
            if (s.substr(pos, w.size()) == w) {
                pos += w.size();
                matched = true;
                break;
            }
        if (!matched) break;
    }
    return pos;
}

// Whitespace- or punctuation-delimited token starting at pos.
std::size_t token_end(std::string_view s, std::size_t pos) {
    static const std::string_view stops[] = {"，", "。", "；", "　", "、"};
    while (pos < s.size()) {
        const char c = s[pos];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',' || c == ';') break;
        bool stop = false;
        for (auto w : stops)
            if (s.substr(pos, w.size()) == w) stop = true;
        if (stop) break;
        ++pos;
    }
    return pos;
}

std::size_t trim_trailing_punct(std::string_view s, std::size_t begin, std::size_t end) {
    while (end > begin && std::string_view(".,;)!?]\"'").find(s[end - 1]) != std::string_view::npos) --end;
    return end;
}

bool account_like(std::string_view token) {
    return std::any_of(token.begin(), token.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || std::string_view("*@_/:").find(c) != std::string_view::npos;
    });
}

struct RawMatch {
    std::size_t begin;
    std::size_t end;
    std::string detail;
};

CarrierConstraint parse_constraint(const std::string& s) {
    if (s == "Any") return CarrierConstraint::Any;
    if (s == "Text") return CarrierConstraint::TextOnly;
    if (s == "Image") return CarrierConstraint::ImageOnly;
    throw Error(ErrorCode::ConfigInvalid, "unknown carrier constraint '" + s + "'");
}

MatcherKind parse_matcher(const std::string& s) {
    if (s == "KeywordSet") return MatcherKind::KeywordSet;
    if (s == "AddressRegex") return MatcherKind::AddressRegex;
    if (s == "QrPayloadPrefix") return MatcherKind::QrPayloadPrefix;
    throw Error(ErrorCode::ConfigInvalid, "unknown matcher kind '" + s + "'");
}

} // namespace

OcrResult OcrService::extract(const MediaRef& media, std::string_view payload) {
    if (media.kind != MediaKind::Image) throw Error(ErrorCode::NotAnImage, media.media_id);
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(media.media_id); it != cache_.end()) return it->second;
    OcrResult r{media.media_id, engine_.recognize(payload), engine_.tag()};
    cache_.emplace(media.media_id, r);
    return r;
}

std::size_t OcrService::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

VisionConfig default_vision_config() {
    VisionConfig c;
    using M = PaymentMethod;
    c.payment_patterns = {
        {"usdt-tron", M::USDT, M::USDT, MatcherKind::AddressRegex, {"T[1-9A-HJ-NP-Za-km-z]{33}"}, CarrierConstraint::Any},
        {"usdt-evm", M::USDT, M::USDT, MatcherKind::AddressRegex, {"0x[0-9a-fA-F]{40}"}, CarrierConstraint::Any},
        {"alipay-qr", M::Alipay, M::AlipayImage, MatcherKind::QrPayloadPrefix,
         {"https://qr.alipay.com/", "alipays://"}, CarrierConstraint::Any},
        {"wechat-qr", M::WeChat, M::WeChat, MatcherKind::QrPayloadPrefix, {"wxp://", "https://u.wechat.com/"},
         CarrierConstraint::Any},
        {"qq-qr", M::QQImage, M::QQImage, MatcherKind::QrPayloadPrefix,
         {"https://qianbao.qq.com/", "mqqapi://"}, CarrierConstraint::ImageOnly},
        {"alipay", M::Alipay, M::AlipayImage, MatcherKind::KeywordSet, {"支付宝", "alipay", "zfb"}, CarrierConstraint::Any},
        {"wechat", M::WeChat, M::WeChat, MatcherKind::KeywordSet, {"微信号", "微信", "wechat", "vx", "wx"},
         CarrierConstraint::Any},
        {"qq", M::QQImage, M::QQImage, MatcherKind::KeywordSet, {"qq钱包", "qq wallet"}, CarrierConstraint::ImageOnly},
        {"bank", M::Bank, M::Bank, MatcherKind::KeywordSet, {"银行卡", "bank card", "bank account"},
         CarrierConstraint::Any},
        {"payment-solution", M::PaymentSolution, M::PaymentSolution, MatcherKind::KeywordSet,
         {"充值链接", "支付链接", "payment link", "pay link"}, CarrierConstraint::Any},
    };
    // Lowercased text is matched, so expressions are lowercase.
    const std::string units = "(分钟|min(?:ute)?s?|小时|hours?|hrs?|h)";
    c.price_patterns = {
        {"(\\d+)\\s*" + units + "\\s*[:=\\-]?\\s*(\\d+(?:\\.\\d+)?)\\s*(?:元|块|cny|rmb|yuan)?", 1, 2, 3},
        {"(\\d+(?:\\.\\d+)?)\\s*(?:元|块|cny|rmb|yuan)\\s*/?\\s*(\\d+)\\s*" + units, 2, 3, 1},
    };
    return c;
}

VisionConfig parse_vision_config(const Json& j) {
    auto c = default_vision_config();
    if (j.contains("payment_patterns")) {
        c.payment_patterns.clear();
        for (const auto& p : j.at("payment_patterns")) {
            PaymentPattern pat;
            pat.name = p.value("name", std::string{});
            pat.method = enum_from_string<PaymentMethod>(p.at("method").get<std::string>());
            pat.image_method = p.contains("image_method")
                                   ? enum_from_string<PaymentMethod>(p.at("image_method").get<std::string>())
                                   : pat.method;
            pat.kind = parse_matcher(p.at("kind").get<std::string>());
            if (p.contains("expressions"))
                pat.expressions = p.at("expressions").get<std::vector<std::string>>();
            else
                pat.expressions = {p.at("expression").get<std::string>()};
            pat.carrier = parse_constraint(p.value("carrier", std::string("Any")));
            if (pat.carrier != CarrierConstraint::ImageOnly && !carrier_consistent(pat.method, Carrier::Text))
                throw Error(ErrorCode::ConfigInvalid, "pattern '" + pat.name + "' allows text for an image-only method");
            c.payment_patterns.push_back(std::move(pat));
        }
    }
    if (j.contains("price_patterns")) {
        c.price_patterns.clear();
        for (const auto& p : j.at("price_patterns"))
            c.price_patterns.push_back({p.at("expression").get<std::string>(), p.value("duration_group", 1),
                                        p.value("unit_group", 2), p.value("price_group", 3)});
    }
    if (j.contains("price_band")) {
        const auto band = j.at("price_band").get<std::vector<double>>();
        if (band.size() != 2 || band[0] <= 0 || band[0] > band[1])
            throw Error(ErrorCode::ConfigInvalid, "price_band must be [min, max] with 0 < min <= max");
        c.price_min = band[0];
        c.price_max = band[1];
    }
    return c;
}

PaymentExtractor::PaymentExtractor(const VisionConfig& config) {
    for (const auto& p : config.payment_patterns) {
        Compiled c{p, {}};
        if (p.kind == MatcherKind::AddressRegex) {
            for (const auto& e : p.expressions) {
                try {
                    c.regexes.emplace_back(e, std::regex::ECMAScript | std::regex::optimize);
                } catch (const std::regex_error& ex) {
                    throw Error(ErrorCode::ConfigInvalid, "bad regex '" + e + "': " + ex.what());
                }
            }
        } else {
            for (auto& e : c.pattern.expressions) e = ascii_lower(e);
            // Longest keyword first so "微信号" wins over "微信".
            std::stable_sort(c.pattern.expressions.begin(), c.pattern.expressions.end(),
                             [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
        }
        patterns_.push_back(std::move(c));
    }
}

std::vector<PaymentDisclosure> PaymentExtractor::extract(std::string_view text, const std::optional<OcrResult>& ocr,
                                                         const std::string& message_id) const {
    if (!ocr) return extract(text, std::span<const OcrResult>{}, message_id);
    return extract(text, std::span<const OcrResult>(&*ocr, 1), message_id);
}

std::vector<PaymentDisclosure> PaymentExtractor::extract(std::string_view text, std::span<const OcrResult> ocr,
                                                         const std::string& message_id) const {
    std::vector<PaymentDisclosure> out;
    std::set<std::pair<PaymentMethod, std::string>> seen;  // keyed by the text-carrier method

    auto scan = [&](std::string_view source, Carrier carrier, const std::optional<std::string>& media_id) {
        const std::string lower = ascii_lower(source);
        std::vector<Span> consumed;
        auto emit = [&](const PaymentPattern& p, RawMatch m) {
            consumed.push_back({m.begin, m.end});
            if (p.carrier == CarrierConstraint::ImageOnly && carrier != Carrier::Image) return;
            if (p.carrier == CarrierConstraint::TextOnly && carrier != Carrier::Text) return;
            if (!seen.insert({p.method, m.detail}).second) return;
            const auto method = carrier == Carrier::Image ? p.image_method : p.method;
            out.push_back(PaymentDisclosure{method, carrier, message_id, media_id, std::move(m.detail)});
        };

        for (auto kind : {MatcherKind::AddressRegex, MatcherKind::QrPayloadPrefix, MatcherKind::KeywordSet}) {
            for (const auto& c : patterns_) {
                if (c.pattern.kind != kind) continue;
                if (kind == MatcherKind::AddressRegex) {
                    for (const auto& re : c.regexes) {
                        std::size_t offset = 0;
                        std::string s(source);
                        std::smatch m;
                        while (offset < s.size() &&
                               std::regex_search(s.cbegin() + static_cast<std::ptrdiff_t>(offset), s.cend(), m, re)) {
                            const std::size_t b = offset + static_cast<std::size_t>(m.position(0));
                            const std::size_t e = b + static_cast<std::size_t>(m.length(0));
                            const bool bounded = (b == 0 || !ascii_alnum(s[b - 1])) && (e == s.size() || !ascii_alnum(s[e]));
                            if (bounded && !overlaps(consumed, b, e)) emit(c.pattern, {b, e, m.str(0)});
                            offset = bounded ? e : b + 1;
                        }
                    }
                } else if (kind == MatcherKind::QrPayloadPrefix) {
                    for (const auto& prefix : c.pattern.expressions) {
                        std::size_t pos = 0;
                        while ((pos = lower.find(prefix, pos)) != std::string::npos) {
                            const auto end = trim_trailing_punct(source, pos, token_end(source, pos));
                            if (!overlaps(consumed, pos, end) && end > pos + prefix.size())
                                emit(c.pattern, {pos, end, std::string(source.substr(pos, end - pos))});
                            pos = std::max(end, pos + 1);
                        }
                    }
                } else {
                    for (const auto& keyword : c.pattern.expressions) {
                        const bool ascii_keyword = is_ascii(keyword);
                        std::size_t pos = 0;
                        while ((pos = lower.find(keyword, pos)) != std::string::npos) {
                            const auto kw_end = pos + keyword.size();
                            const bool bounded = !ascii_keyword || ((pos == 0 || !ascii_alnum(lower[pos - 1])) &&
                                                                    (kw_end == lower.size() || !ascii_alnum(lower[kw_end])));
                            if (bounded && !overlaps(consumed, pos, kw_end)) {
                                const auto tb = skip_separators(source, kw_end);
                                const auto te = trim_trailing_punct(source, tb, token_end(source, tb));
                                const auto token = source.substr(tb, te - tb);
                                // A bare mention is not a disclosure; the account must follow.
                                if (te > tb && account_like(token) && !overlaps(consumed, tb, te))
                                    emit(c.pattern, {pos, te, std::string(token)});
                                else
                                    consumed.push_back({pos, kw_end});
                            }
                            pos = kw_end;
                        }
                    }
                }
            }
        }
    };

    scan(text, Carrier::Text, std::nullopt);
    for (const auto& r : ocr) scan(r.text, Carrier::Image, r.media_id);
    return out;
}

PriceQuoteDetector::PriceQuoteDetector(const VisionConfig& config) : min_(config.price_min), max_(config.price_max) {
    for (const auto& p : config.price_patterns) {
        try {
            patterns_.push_back({p, std::regex(p.expression, std::regex::ECMAScript | std::regex::optimize)});
        } catch (const std::regex_error& ex) {
            throw Error(ErrorCode::ConfigInvalid, "bad price regex '" + p.expression + "': " + ex.what());
        }
    }
}

std::vector<PriceQuote> PriceQuoteDetector::detect(std::string_view text, const std::string& message_id) const {
    const std::string lower = ascii_lower(text);
    std::vector<PriceQuote> out;
    std::vector<Span> consumed;
    std::vector<std::pair<std::size_t, PriceQuote>> found;
    for (const auto& c : patterns_) {
        for (auto it = std::sregex_iterator(lower.begin(), lower.end(), c.regex); it != std::sregex_iterator(); ++it) {
            const auto& m = *it;
            const auto b = static_cast<std::size_t>(m.position(0));
            const auto e = b + static_cast<std::size_t>(m.length(0));
            if (overlaps(consumed, b, e)) continue;
            // Numbers glued to letters (e.g. "trc20") are not durations.
            if (b > 0 && ascii_alnum(lower[b - 1])) continue;
            double duration = std::stod(m.str(static_cast<std::size_t>(c.pattern.duration_group)));
            const auto unit = m.str(static_cast<std::size_t>(c.pattern.unit_group));
            if (unit == "小时" || unit.rfind("h", 0) == 0) duration *= 60.0;
            const double price = std::stod(m.str(static_cast<std::size_t>(c.pattern.price_group)));
            consumed.push_back({b, e});
            if (duration < 1.0 || price < min_ || price > max_) continue;
            found.emplace_back(b, PriceQuote{static_cast<int>(duration), price, message_id});
        }
    }
    std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [pos, q] : found) out.push_back(std::move(q));
    return out;
}

std::size_t count_distinct_persons(std::span<const MediaRef> media) {
    std::set<std::string> labels;
    for (const auto& m : media) labels.insert(m.person_labels.begin(), m.person_labels.end());
    return labels.size();
}

} // namespace honeywire

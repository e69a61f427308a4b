#include <doctest.h>

#include "honeywire/error.hpp"
#include "honeywire/vision.hpp"

using namespace honeywire;

namespace {

const PaymentExtractor& extractor() {
    static const PaymentExtractor e(default_vision_config());
    return e;
}

std::vector<PaymentDisclosure> from_text(std::string_view text) { return extractor().extract(text, std::nullopt, "m1"); }

std::vector<PaymentDisclosure> from_image(std::string_view ocr_text, std::string_view caption = "") {
    return extractor().extract(caption, OcrResult{"img1", std::string(ocr_text), "test"}, "m1");
}

const std::string kTron = "TXYZabcdefghijkmnopqrstuvwxyz12345";  // 34 chars, base58 alphabet

class FailingEngine final : public OcrEngine {
public:
    std::string tag() const override { return "failing"; }
    std::string recognize(std::string_view) override { throw Error(ErrorCode::EngineUnavailable, "down"); }
};

class CountingEngine final : public OcrEngine {
public:
    int calls = 0;
    std::string tag() const override { return "counting"; }
    std::string recognize(std::string_view payload) override {
        ++calls;
        return std::string(payload);
    }
};

} // namespace

TEST_CASE("text disclosures for each text-capable method") {
    REQUIRE(kTron.size() == 34);
    auto d = from_text("USDT TRC20 " + kTron);
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::USDT);
    CHECK(d[0].carrier == Carrier::Text);
    CHECK(d[0].detail == kTron);
    CHECK_FALSE(d[0].media_id.has_value());

    d = from_text("erc20: 0x52908400098527886E0F7030069857D2E4169EE7 thanks");
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::USDT);

    d = from_text("微信号：wx_lucky88");
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::WeChat);
    CHECK(d[0].detail == "wx_lucky88");

    d = from_text("支付宝: 13800001234。");
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::Alipay);
    CHECK(d[0].detail == "13800001234");

    d = from_text("银行卡 6222021234567890");
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::Bank);

    d = from_text("支付链接：https://pay.example/r/1");
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::PaymentSolution);
}

TEST_CASE("a bare mention without an account is not a disclosure") {
    CHECK(from_text("we take alipay or wechat, your choice").empty());
    CHECK(from_text("支付宝可以").empty());
    CHECK(from_text("usdt is fine").empty());
}

TEST_CASE("keywords inside other words do not match") {
    CHECK(from_text("wxyz: 1234").empty());
    CHECK(from_text("the vxlan id 42").empty());
}

TEST_CASE("addresses must stand alone") {
    CHECK(from_text("x" + kTron).empty());
    CHECK(from_text(kTron + "9").empty());
}

TEST_CASE("an Alipay QR in an image is AlipayImage with the image carrier") {
    const auto d = from_image("https://qr.alipay.com/fkx12345abc", "扫码");
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::AlipayImage);
    CHECK(d[0].carrier == Carrier::Image);
    CHECK(d[0].media_id == std::optional<std::string>("img1"));
    CHECK(d[0].detail == "https://qr.alipay.com/fkx12345abc");
}

TEST_CASE("the same QR payload in plain text is Alipay") {
    const auto d = from_text("pay here https://qr.alipay.com/fkx12345abc");
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::Alipay);
    CHECK(d[0].carrier == Carrier::Text);
}

TEST_CASE("QQ wallet is only accepted from images") {
    CHECK(from_text("https://qianbao.qq.com/pay/abc").empty());
    const auto d = from_image("https://qianbao.qq.com/pay/abc");
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::QQImage);
}

TEST_CASE("one message can disclose several methods; repeats collapse") {
    const auto d = from_text("微信：wx_abc1, 支付宝：13800001234, again 微信：wx_abc1");
    REQUIRE(d.size() == 2);
    CHECK(d[0].method != d[1].method);

    // Text and image carrying the same address count once, from the text.
    const auto both = extractor().extract("addr " + kTron, OcrResult{"img", "USDT " + kTron, "t"}, "m");
    REQUIRE(both.size() == 1);
    CHECK(both[0].carrier == Carrier::Text);
}

TEST_CASE("USDT in an image stays USDT with the image carrier") {
    const auto d = from_image("USDT TRC20\n" + kTron);
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::USDT);
    CHECK(d[0].carrier == Carrier::Image);
}

TEST_CASE("price quotes in both orders and units") {
    PriceQuoteDetector detector(default_vision_config());
    auto q = detector.detect("30分钟 300元，1小时 500", "m");
    REQUIRE(q.size() == 2);
    CHECK(q[0].duration_minutes == 30);
    CHECK(q[0].price_cny == 300.0);
    CHECK(q[1].duration_minutes == 60);
    CHECK(q[1].price_cny == 500.0);
    CHECK(q[0].message_id == "m");

    q = detector.detect("250元/30分钟");
    REQUIRE(q.size() == 1);
    CHECK(q[0].duration_minutes == 30);
    CHECK(q[0].price_cny == 250.0);

    q = detector.detect("15 min 200 rmb");
    REQUIRE(q.size() == 1);
    CHECK(q[0].price_cny == 200.0);

    CHECK(detector.detect("usdt trc20 only").empty());
    CHECK(detector.detect("no numbers here").empty());
}

TEST_CASE("quotes outside the configured band are dropped") {
    auto config = parse_vision_config(Json{{"price_band", {50, 1000}}});
    PriceQuoteDetector detector(config);
    CHECK(detector.detect("10分钟 20元").empty());
    CHECK(detector.detect("10分钟 2000元").empty());
    CHECK(detector.detect("10分钟 200元").size() == 1);
}

TEST_CASE("vision config validation") {
    CHECK_THROWS_AS(parse_vision_config(Json{{"price_band", {10}}}), Error);
    CHECK_THROWS_AS(parse_vision_config(Json{{"price_band", {100, 10}}}), Error);
    CHECK_THROWS_AS(parse_vision_config(Json::parse(
                        R"({"payment_patterns": [{"name": "x", "method": "QQImage", "kind": "KeywordSet", "expression": "qq"}]})")),
                    Error);
    CHECK_THROWS_AS(parse_vision_config(Json::parse(
                        R"({"payment_patterns": [{"name": "x", "method": "USDT", "kind": "Fuzzy", "expression": "u"}]})")),
                    Error);
    CHECK_THROWS_AS(PaymentExtractor(parse_vision_config(Json::parse(
                        R"({"payment_patterns": [{"name": "x", "method": "USDT", "kind": "AddressRegex", "expression": "("}]})"))),
                    Error);

    const auto custom = parse_vision_config(Json::parse(
        R"({"payment_patterns": [{"name": "paypal", "method": "PaymentSolution", "kind": "KeywordSet", "expressions": ["paypal"]}]})"));
    PaymentExtractor e(custom);
    const auto d = e.extract("paypal: me@example.com", std::nullopt, "m");
    REQUIRE(d.size() == 1);
    CHECK(d[0].method == PaymentMethod::PaymentSolution);
}

TEST_CASE("the OCR service caches per media id and refuses non-images") {
    CountingEngine engine;
    OcrService ocr(engine);
    MediaRef img;
    img.media_id = "c/media1";
    CHECK(ocr.extract(img, "text").text == "text");
    CHECK(ocr.extract(img, "ignored").text == "text");
    CHECK(engine.calls == 1);
    CHECK(ocr.cache_size() == 1);

    MediaRef other = img;
    other.kind = MediaKind::Other;
    CHECK_THROWS_AS(ocr.extract(other, "x"), Error);

    FailingEngine failing;
    OcrService broken(failing);
    try {
        broken.extract(img, "x");
        FAIL("engine outage not raised");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EngineUnavailable);
    }
}

TEST_CASE("distinct persons are counted across images") {
    std::vector<MediaRef> media(3);
    media[0].person_labels = {"a"};
    media[1].person_labels = {"a", "b"};
    CHECK(count_distinct_persons(media) == 2);
    CHECK(count_distinct_persons(std::span<const MediaRef>()) == 0);
}

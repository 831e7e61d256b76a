#include "doctest.h"

#include <random>
#include <vector>

#include "gtrm/corpus.hpp"
#include "gtrm/errors.hpp"
#include "gtrm/imaging.hpp"

using namespace gtrm;
using namespace gtrm::imaging;

namespace {

// viewport of a tall random texture starting at row `top`
Frame window_of(const std::vector<uint8_t>& tall, uint32_t w, uint32_t top, uint32_t h,
                uint64_t id) {
    std::vector<uint8_t> px(tall.begin() + std::size_t(top) * w,
                            tall.begin() + std::size_t(top + h) * w);
    return make_frame(id, id * 1000, w, h, PixelFormat::GRAY8, std::move(px));
}

std::vector<uint8_t> tall_texture(std::mt19937& rng, uint32_t w, uint32_t rows) {
    std::vector<uint8_t> t(std::size_t(w) * rows);
    for (auto& p : t) p = uint8_t(rng() & 0xFF);
    return t;
}

}  // namespace

TEST_CASE("detect_scroll recovers synthetic translations exactly") {
    std::mt19937 rng(505);
    const uint32_t w = 240, h = 320;
    auto tall = tall_texture(rng, w, 800);
    for (int32_t shift : {1, 7, 40, 119, -1, -33, -119}) {
        const uint32_t top = 300;
        Frame a = window_of(tall, w, top, h, 1);
        Frame b = window_of(tall, w, uint32_t(int32_t(top) + shift), h, 2);
        auto got = detect_scroll(a, b);
        CAPTURE(shift);
        REQUIRE(got.has_value());
        CHECK(*got == shift);
    }
}

TEST_CASE("detect_scroll on generated feed sequences returns each planted shift") {
    corpus::SequenceSpec spec;
    spec.name = "unit";
    spec.seed = 7071;
    spec.width = 360;
    spec.height = 480;
    const int32_t shifts[] = {24, 64, -48, 112, 8, -96};
    auto frames = corpus::generate_scroll_sequence(spec, shifts);
    REQUIRE(frames.size() == 7);
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
        auto got = detect_scroll(frames[i], frames[i + 1]);
        CAPTURE(i);
        REQUIRE(got.has_value());
        CHECK(*got == shifts[i]);
    }
}

TEST_CASE("detect_scroll: identical frames report no scroll") {
    std::mt19937 rng(11);
    const uint32_t w = 200, h = 240;
    auto tall = tall_texture(rng, w, 300);
    Frame a = window_of(tall, w, 10, h, 1);
    Frame b = window_of(tall, w, 10, h, 2);
    CHECK(!detect_scroll(a, b).has_value());
}

TEST_CASE("detect_scroll: unrelated noise and flat frames report nothing") {
    std::mt19937 rng(12);
    const uint32_t w = 200, h = 240;
    auto t1 = tall_texture(rng, w, h), t2 = tall_texture(rng, w, h);
    Frame a = make_frame(1, 0, w, h, PixelFormat::GRAY8, t1);
    Frame b = make_frame(2, 0, w, h, PixelFormat::GRAY8, t2);
    CHECK(!detect_scroll(a, b).has_value());

    Frame fa = make_frame(3, 0, w, h, PixelFormat::GRAY8, std::vector<uint8_t>(t1.size(), 180));
    Frame fb = make_frame(4, 0, w, h, PixelFormat::GRAY8, std::vector<uint8_t>(t1.size(), 180));
    CHECK(!detect_scroll(fa, fb).has_value());
}

TEST_CASE("detect_scroll: displacement beyond the search window is not found") {
    std::mt19937 rng(13);
    const uint32_t w = 240, h = 320;
    auto tall = tall_texture(rng, w, 900);
    Frame a = window_of(tall, w, 100, h, 1);
    Frame b = window_of(tall, w, 100 + 150, h, 2);  // default window is 120
    CHECK(!detect_scroll(a, b).has_value());
    // widening the window recovers it
    auto got = detect_scroll(a, b, kScrollStripHeight, 200);
    REQUIRE(got.has_value());
    CHECK(*got == 150);
}

TEST_CASE("detect_scroll rejects mismatched shapes") {
    Frame a = make_frame(1, 0, 64, 64, PixelFormat::GRAY8, std::vector<uint8_t>(64 * 64));
    Frame b = make_frame(2, 0, 64, 63, PixelFormat::GRAY8, std::vector<uint8_t>(64 * 63));
    CHECK_THROWS_AS(detect_scroll(a, b), DimensionError);
    Frame c = make_frame(3, 0, 64, 64, PixelFormat::RGBA8,
                         std::vector<uint8_t>(64 * 64 * 4));
    CHECK_THROWS_AS(detect_scroll(a, c), DimensionError);
}

TEST_CASE("detect_scroll works on RGBA frames through the luma plane") {
    std::mt19937 rng(14);
    const uint32_t w = 160, h = 200;
    std::vector<uint8_t> tall(std::size_t(w) * 500 * 4);
    for (auto& p : tall) p = uint8_t(rng() & 0xFF);
    auto win = [&](uint32_t top, uint64_t id) {
        std::vector<uint8_t> px(tall.begin() + std::size_t(top) * w * 4,
                                tall.begin() + std::size_t(top + h) * w * 4);
        return make_frame(id, 0, w, h, PixelFormat::RGBA8, std::move(px));
    };
    Frame a = win(100, 1), b = win(130, 2);
    auto got = detect_scroll(a, b);
    REQUIRE(got.has_value());
    CHECK(*got == 30);
}

TEST_CASE("sequence generator enforces shift bounds and row continuity") {
    corpus::SequenceSpec spec;
    spec.seed = 9;
    spec.width = 160;
    spec.height = 160;
    const int32_t too_big[] = {160};
    CHECK_THROWS_AS(corpus::generate_scroll_sequence(spec, too_big), ConfigError);

    // content really is a translation: frame1 row y == frame0 row y+shift
    const int32_t shifts[] = {24};
    auto frames = corpus::generate_scroll_sequence(spec, shifts);
    const Frame& f0 = frames[0];
    const Frame& f1 = frames[1];
    for (uint32_t y = 0; y + 24 < 160; ++y)
        for (uint32_t x = 0; x < 160; ++x)
            REQUIRE(f1.rgba_at(x, y) == f0.rgba_at(x, y + 24));
    // rows that entered from below come from the same infinite feed
    for (uint32_t y = 160 - 24; y < 160; ++y)
        for (uint32_t x = 0; x < 160; ++x) {
            const Rgba want = corpus::feed_pixel(spec.seed, 160, int64_t(y) + 24, x);
            REQUIRE(f1.rgba_at(x, y) == want);
        }
}

#include "doctest.h"

#include <string>
#include <vector>

#include "gtrm/corpus.hpp"
#include "gtrm/hooks.hpp"
#include "gtrm/imaging.hpp"

using namespace gtrm;
using namespace gtrm::hooks;
using imaging::GrayImage;
using imaging::to_gray;

namespace {

Frame blank_frame(uint32_t w, uint32_t h, Rgba bg = {245, 245, 245, 255}) {
    std::vector<uint8_t> px(std::size_t(w) * h * 4);
    for (std::size_t i = 0; i < px.size(); i += 4) {
        px[i] = bg.r;
        px[i + 1] = bg.g;
        px[i + 2] = bg.b;
        px[i + 3] = bg.a;
    }
    return make_frame(1, 0, w, h, PixelFormat::RGBA8, std::move(px));
}

constexpr Rgba kInk{20, 20, 24, 255};

}  // namespace

TEST_CASE("detect_text_regions: blank and noise-free images yield nothing") {
    CHECK(detect_text_regions(imaging::make_gray(64, 64, 255)).empty());
    CHECK(detect_text_regions(imaging::make_gray(64, 64, 0)).empty());
}

TEST_CASE("detect_text_regions finds a planted line (IoU >= 0.9 with its ink)") {
    Frame f = blank_frame(320, 80);
    corpus::draw_text(f, 12, 30, "HELLO WORLD 42", 2, kInk);
    const Region truth = corpus::text_ink_bbox(12, 30, "HELLO WORLD 42", 2);
    auto regions = detect_text_regions(to_gray(f));
    REQUIRE(regions.size() == 1);
    CHECK(region_iou(regions[0], truth) >= 0.9);
}

TEST_CASE("detect_text_regions orders lines top-to-bottom, then left-to-right") {
    Frame f = blank_frame(360, 200);
    corpus::draw_text(f, 20, 150, "THIRD LINE", 2, kInk);
    corpus::draw_text(f, 40, 20, "FIRST", 2, kInk);
    corpus::draw_text(f, 10, 80, "SECOND ONE", 2, kInk);
    auto regions = detect_text_regions(to_gray(f));
    REQUIRE(regions.size() == 3);
    CHECK(regions[0].y < regions[1].y);
    CHECK(regions[1].y < regions[2].y);
    CHECK(region_iou(regions[0], corpus::text_ink_bbox(40, 20, "FIRST", 2)) >= 0.9);

    // two runs on one baseline, separated by far more than a glyph height
    Frame g = blank_frame(400, 40);
    corpus::draw_text(g, 10, 12, "LEFT", 2, kInk);
    corpus::draw_text(g, 250, 12, "RIGHT", 2, kInk);
    auto side = detect_text_regions(to_gray(g));
    REQUIRE(side.size() == 2);
    CHECK(side[0].x < side[1].x);
}

TEST_CASE("detect_text_regions rejects non-glyph shapes") {
    // a tall solid block (height > 64) and a long thin rule (aspect > 4)
    Frame f = blank_frame(200, 160);
    for (uint32_t y = 10; y < 90; ++y)
        for (uint32_t x = 20; x < 50; ++x) {
            uint8_t* p = &f.data[(std::size_t(y) * 200 + x) * 4];
            p[0] = kInk.r; p[1] = kInk.g; p[2] = kInk.b;
        }
    for (uint32_t y = 120; y < 122; ++y)
        for (uint32_t x = 30; x < 170; ++x) {
            uint8_t* p = &f.data[(std::size_t(y) * 200 + x) * 4];
            p[0] = kInk.r; p[1] = kInk.g; p[2] = kInk.b;
        }
    CHECK(detect_text_regions(to_gray(f)).empty());
}

TEST_CASE("recognize_text round-trips drawn strings with high confidence") {
    const char* samples[] = {"REPLY", "SHARE NOW", "A1B2C3",
                             "GOLDEN RETRIEVER PUPPY"};
    for (const char* s : samples) {
        Frame f = blank_frame(720, 60);
        corpus::draw_text(f, 8, 20, s, 2, kInk);
        GrayImage gray = to_gray(f);
        auto regions = detect_text_regions(gray);
        REQUIRE(regions.size() == 1);
        TextBox box = recognize_text(gray, regions[0]);
        CAPTURE(s);
        CHECK(box.text == s);
        CHECK(box.confidence >= 0.99);
        CHECK(region_iou(box.region, regions[0]) >= 0.9);
    }
}

TEST_CASE("a space before an inset glyph splits the line; joining re-reads it") {
    // '1' has no ink in its first column, so the gap after the space exceeds
    // the one-glyph-height merge limit and the line becomes two fragments
    Frame f = blank_frame(300, 50);
    corpus::draw_text(f, 8, 20, "LIKE 12K", 2, kInk);
    GrayImage gray = to_gray(f);
    auto regions = detect_text_regions(gray);
    REQUIRE(regions.size() == 2);
    std::string joined;
    for (const auto& r : regions) {
        TextBox box = recognize_text(gray, r);
        CHECK(box.confidence >= 0.99);
        if (!joined.empty()) joined += ' ';
        joined += box.text;
    }
    CHECK(joined == "LIKE 12K");

    // handing the advance box straight to the recognizer also works
    TextBox whole = recognize_text(gray, corpus::text_advance_box(8, 20, "LIKE 12K", 2));
    CHECK(whole.text == "LIKE 12K");
    CHECK(whole.confidence >= 0.99);
}

TEST_CASE("recognize_text round-trips the full atlas charset") {
    const std::string charset = "ABCDEFGHIJKLMNOPQRSTUVWXYZ 0123456789 .,!?:-/";
    Frame f = blank_frame(6 * 2 * uint32_t(charset.size()) + 40, 50);
    corpus::draw_text(f, 10, 18, charset, 2, kInk);
    // punctuation breaks the line-merge heuristics, so hand recognize_text the
    // exact advance box instead of a detected region
    const Region box = corpus::text_advance_box(10, 18, charset, 2);
    TextBox got = recognize_text(to_gray(f), box);
    CHECK(got.text == charset);
    CHECK(got.confidence >= 0.99);
}

TEST_CASE("recognize_text at several glyph scales") {
    for (uint32_t s : {1u, 2u, 3u, 5u}) {
        Frame f = blank_frame(400 * s, 30 * s);
        corpus::draw_text(f, 6, 9, "SCALE TEST 99", s, kInk);
        GrayImage gray = to_gray(f);
        auto regions = detect_text_regions(gray);
        REQUIRE(regions.size() == 1);
        TextBox box = recognize_text(gray, regions[0]);
        CAPTURE(s);
        CHECK(box.text == "SCALE TEST 99");
        CHECK(box.confidence >= 0.99);
    }
}

TEST_CASE("recognize_text: a vandalized glyph cell reads as '?'") {
    Frame f = blank_frame(260, 50);
    corpus::draw_text(f, 10, 16, "HELLO", 2, kInk);
    // stomp the second L (cell index 3) with a solid ink block
    const uint32_t cell_x = 10 + 6 * 2 * 3;
    for (uint32_t y = 16; y < 16 + 7 * 2; ++y)
        for (uint32_t x = cell_x; x < cell_x + 5 * 2; ++x) {
            uint8_t* p = &f.data[(std::size_t(y) * 260 + x) * 4];
            p[0] = kInk.r; p[1] = kInk.g; p[2] = kInk.b;
        }
    GrayImage gray = to_gray(f);
    auto regions = detect_text_regions(gray);
    REQUIRE(regions.size() == 1);
    TextBox box = recognize_text(gray, regions[0]);
    CHECK(box.text == "HEL?O");
    CHECK(box.confidence > 0.0);
    CHECK(box.confidence < 0.99);
}

TEST_CASE("recognize_text: blank region yields an empty zero-confidence box") {
    GrayImage gray = imaging::make_gray(100, 40, 250);
    TextBox box = recognize_text(gray, Region{10, 10, 60, 20});
    CHECK(box.text.empty());
    CHECK(box.confidence == 0.0);
}

TEST_CASE("run_text_hook blacks out flagged lines") {
    Frame f = blank_frame(360, 120);
    corpus::draw_text(f, 12, 20, "HAVE A NICE DAY", 2, kInk);
    corpus::draw_text(f, 12, 70, "YOU ARE ALL VERMIN", 2, kInk);

    auto classifier = [](const std::string& line) {
        return line.find("VERMIN") != std::string::npos ? 0.9 : 0.0;
    };
    auto ops = run_text_hook(f, classifier, 0.6);
    REQUIRE(ops.size() == 1);
    CHECK(ops[0].kind == OpKind::FillRect);
    CHECK(ops[0].z == kZFillRect);
    CHECK(ops[0].color == Rgba{0, 0, 0, 255});
    const Region truth = corpus::text_ink_bbox(12, 70, "YOU ARE ALL VERMIN", 2);
    CHECK(region_iou(ops[0].region, truth) >= 0.9);

    // nothing crosses a threshold above every score
    CHECK(run_text_hook(f, classifier, 0.95).empty());

    // a custom action sees exactly the flagged boxes
    std::vector<std::string> seen;
    auto action = [&](const Frame&, std::span<const TextBox> boxes) {
        for (const auto& b : boxes) seen.push_back(b.text);
        return std::vector<OverlayOp>{};
    };
    CHECK(run_text_hook(f, classifier, 0.6, action).empty());
    REQUIRE(seen.size() == 1);
    CHECK(seen[0] == "YOU ARE ALL VERMIN");
}

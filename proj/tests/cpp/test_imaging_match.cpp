#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gtrm/corpus.hpp"
#include "gtrm/errors.hpp"
#include "gtrm/imaging.hpp"

using namespace gtrm;
using namespace gtrm::imaging;

namespace {

GrayImage random_gray(std::mt19937& rng, uint32_t w, uint32_t h) {
    GrayImage g = make_gray(w, h);
    for (auto& p : g.data) p = uint8_t(rng() & 0xFF);
    return g;
}

// independent double-precision ZNCC oracle, the slow obvious way
double zncc_oracle(const GrayImage& img, const GrayImage& t, uint32_t px, uint32_t py) {
    const double n = double(t.width) * t.height;
    double mi = 0, mt = 0;
    for (uint32_t y = 0; y < t.height; ++y)
        for (uint32_t x = 0; x < t.width; ++x) {
            mi += img.at(px + x, py + y);
            mt += t.at(x, y);
        }
    mi /= n;
    mt /= n;
    double num = 0, vi = 0, vt = 0;
    for (uint32_t y = 0; y < t.height; ++y)
        for (uint32_t x = 0; x < t.width; ++x) {
            const double a = img.at(px + x, py + y) - mi;
            const double b = t.at(x, y) - mt;
            num += a * b;
            vi += a * a;
            vt += b * b;
        }
    if (vi == 0.0 || vt == 0.0) return std::abs(mi - mt) <= 1.0 ? 0.5 : 0.0;
    return std::clamp(0.5 * (num / std::sqrt(vi * vt) + 1.0), 0.0, 1.0);
}

void plant(GrayImage& img, const GrayImage& t, uint32_t px, uint32_t py) {
    for (uint32_t y = 0; y < t.height; ++y)
        for (uint32_t x = 0; x < t.width; ++x) img.at(px + x, py + y) = t.at(x, y);
}

}  // namespace

TEST_CASE("to_gray applies BT.601 luma, identity on GRAY8") {
    Frame f = make_frame(0, 0, 2, 1, PixelFormat::RGBA8,
                         {255, 0, 0, 255, 255, 255, 255, 255});
    GrayImage g = to_gray(f);
    CHECK(g.at(0, 0) == 76);
    CHECK(g.at(1, 0) == 255);

    Frame black = make_frame(0, 0, 2, 2, PixelFormat::RGBA8, std::vector<uint8_t>(16, 0));
    for (uint8_t v : to_gray(black).data) CHECK(v == 0);

    Frame gray = make_frame(0, 0, 3, 1, PixelFormat::GRAY8, {7, 8, 9});
    CHECK(to_gray(gray).data == std::vector<uint8_t>{7, 8, 9});
}

TEST_CASE("resize_nearest: identity, integer upscale, half downscale") {
    GrayImage checker = make_gray(2, 2, {0, 255, 255, 0});
    CHECK(resize_nearest(checker, 1.0) == checker);

    GrayImage up = resize_nearest(checker, 2.0);
    REQUIRE(up.width == 4);
    REQUIRE(up.height == 4);
    for (uint32_t y = 0; y < 4; ++y)
        for (uint32_t x = 0; x < 4; ++x) CHECK(up.at(x, y) == checker.at(x / 2, y / 2));

    GrayImage grad = make_gray(8, 8);
    for (uint32_t y = 0; y < 8; ++y)
        for (uint32_t x = 0; x < 8; ++x) grad.at(x, y) = uint8_t(x * 8 + y);
    GrayImage down = resize_nearest(grad, 0.5);
    REQUIRE(down.width == 4);
    REQUIRE(down.height == 4);
    // exhaustive index-mapping oracle: out(x,y) = in(floor(x/scale), floor(y/scale))
    for (uint32_t y = 0; y < 4; ++y)
        for (uint32_t x = 0; x < 4; ++x) {
            const uint32_t sx = std::min(uint32_t(x / 0.5), 7u);
            const uint32_t sy = std::min(uint32_t(y / 0.5), 7u);
            CHECK(down.at(x, y) == grad.at(sx, sy));
        }

    // dims floor with a minimum of 1
    CHECK(resize_nearest(checker, 0.25).width == 1);
    CHECK(resize_to(grad, 3, 5).width == 3);
    CHECK(resize_to(grad, 3, 5).height == 5);
}

TEST_CASE("ncc_match: template == image scores 1.0 at the only placement") {
    std::mt19937 rng(41);
    GrayImage img = random_gray(rng, 9, 7);
    ScoreMap m = ncc_match(img, img);
    REQUIRE(m.width == 1);
    REQUIRE(m.height == 1);
    CHECK(m.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ncc_match: photometric negative scores 0.0") {
    std::mt19937 rng(42);
    GrayImage img = random_gray(rng, 6, 6);
    GrayImage neg = img;
    for (auto& p : neg.data) p = uint8_t(255 - p);
    ScoreMap m = ncc_match(img, neg);
    CHECK(m.at(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ncc_match equals the exhaustive oracle on random images") {
    std::mt19937 rng(7);
    for (int iter = 0; iter < 8; ++iter) {
        const uint32_t iw = 12 + rng() % 20, ih = 12 + rng() % 20;
        const uint32_t tw = 3 + rng() % 6, th = 3 + rng() % 6;
        GrayImage img = random_gray(rng, iw, ih);
        GrayImage t = random_gray(rng, tw, th);
        ScoreMap m = ncc_match(img, t);
        REQUIRE(m.width == iw - tw + 1);
        REQUIRE(m.height == ih - th + 1);
        for (uint32_t y = 0; y < m.height; ++y)
            for (uint32_t x = 0; x < m.width; ++x)
                CHECK(m.at(x, y) == doctest::Approx(zncc_oracle(img, t, x, y)).epsilon(1e-9));
    }
}

TEST_CASE("ncc_match: direct and FFT paths agree bit-for-bit") {
    std::mt19937 rng(99);
    GrayImage img = random_gray(rng, 48, 40);
    GrayImage t = random_gray(rng, 9, 11);
    ScoreMap a = detail::ncc_match_path(img, t, detail::NccPath::Direct);
    ScoreMap b = detail::ncc_match_path(img, t, detail::NccPath::Fft);
    REQUIRE(a.scores.size() == b.scores.size());
    for (std::size_t i = 0; i < a.scores.size(); ++i) CHECK(a.scores[i] == b.scores[i]);
}

TEST_CASE("ncc_match zero-variance rules") {
    GrayImage flat = make_gray(6, 6, 100);
    GrayImage t = make_gray(3, 3, 100);
    ScoreMap m = ncc_match(flat, t);
    CHECK(m.at(0, 0) == 0.5);  // equal means

    GrayImage t2 = make_gray(3, 3, 150);
    CHECK(ncc_match(flat, t2).at(0, 0) == 0.0);  // means differ by >1

    GrayImage t3 = make_gray(3, 3, 101);
    CHECK(ncc_match(flat, t3).at(0, 0) == 0.5);  // within one gray level

    // flat window under a structured template also scores by the mean rule
    std::mt19937 rng(5);
    GrayImage tex = random_gray(rng, 4, 4);
    ScoreMap m2 = ncc_match(flat, tex);
    for (double s : m2.scores) CHECK((s == 0.0 || s == 0.5));
}

TEST_CASE("ncc_match: planted texture argmax at plant point (exhaustive oracle)") {
    std::mt19937 rng(1234);
    GrayImage img = random_gray(rng, 64, 64);
    GrayImage t = random_gray(rng, 16, 16);
    plant(img, t, 5, 7);
    ScoreMap m = ncc_match(img, t);
    const auto [ax, ay] = m.argmax();
    CHECK(ax == 5);
    CHECK(ay == 7);
    CHECK(m.at(5, 7) == doctest::Approx(1.0).epsilon(1e-12));
    // oracle agreement at the peak and a handful of other spots
    for (auto [x, y] : {std::pair{0u, 0u}, {5u, 7u}, {20u, 30u}, {48u, 48u}})
        CHECK(m.at(x, y) == doctest::Approx(zncc_oracle(img, t, x, y)).epsilon(1e-9));
}

TEST_CASE("ncc_match argmax is invariant to affine template changes") {
    std::mt19937 rng(77);
    GrayImage img = random_gray(rng, 40, 40);
    GrayImage t = random_gray(rng, 8, 8);
    for (auto& p : t.data) p = uint8_t(60 + p % 100);  // range 60..159
    plant(img, t, 13, 21);
    GrayImage t2 = t;
    for (auto& p : t2.data) p = uint8_t((p - 50) / 2 + 40);  // a*T+b, a>0, no clamp
    const auto [x1, y1] = ncc_match(img, t).argmax();
    const auto [x2, y2] = ncc_match(img, t2).argmax();
    CHECK(x1 == x2);
    CHECK(y1 == y2);
}

TEST_CASE("ncc_match rejects oversized templates") {
    GrayImage img = make_gray(4, 4);
    CHECK_THROWS_AS(ncc_match(img, make_gray(5, 4)), DimensionError);
    CHECK_THROWS_AS(ncc_match(img, make_gray(4, 5)), DimensionError);
}

TEST_CASE("ladder_scale pins the default ladder") {
    CHECK(ladder_scale(0) == 0.5);
    double s = 0.5;
    for (int k = 1; k < kLadderRungs; ++k) {
        s *= 1.1;
        CHECK(ladder_scale(k) == s);  // bit-identical construction
    }
    CHECK_THROWS_AS(ladder_scale(-1), ConfigError);

    MatchConfig cfg = default_match_config();
    REQUIRE(cfg.scales.size() == std::size_t(kLadderRungs));
    for (int k = 0; k < kLadderRungs; ++k) CHECK(cfg.scales[k] == ladder_scale(k));
    CHECK(cfg.score_threshold == 0.8);
    CHECK(cfg.nms_iou == 0.3);
    CHECK(cfg.mode == MatchMode::Color);
    CHECK(default_match_config(MatchMode::Contour).mode == MatchMode::Contour);
}

TEST_CASE("match config validation") {
    MatchConfig cfg = default_match_config();
    CHECK_NOTHROW(validate(cfg));
    cfg.scales = {1.0, 1.0};
    CHECK_THROWS_AS(validate(cfg), ConfigError);  // not strictly increasing
    cfg.scales = {};
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.scales = {-1.0, 1.0};
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = default_match_config();
    cfg.score_threshold = 1.5;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = default_match_config();
    cfg.nms_iou = -0.1;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("match_multiscale: flat image yields nothing") {
    GrayImage flat = make_gray(64, 64, 200);
    std::mt19937 rng(3);
    GrayImage t = random_gray(rng, 8, 8);
    const GrayImage tmpls[] = {t};
    auto dets = match_multiscale(flat, tmpls, default_match_config());
    CHECK(dets.empty());
}

TEST_CASE("match_multiscale: unmodified plant found at scale 1.0") {
    std::mt19937 rng(11);
    GrayImage img = random_gray(rng, 80, 60);
    GrayImage t = random_gray(rng, 12, 12);
    plant(img, t, 30, 20);
    MatchConfig cfg;
    cfg.scales = {1.0};
    const GrayImage tmpls[] = {t};
    auto dets = match_multiscale(img, tmpls, cfg);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].region == Region{30, 20, 12, 12});
    CHECK(dets[0].scale == 1.0);
    CHECK(dets[0].score >= 0.99);
    CHECK(dets[0].label == "0");  // index fallback when no labels given
}

TEST_CASE("match_multiscale: plant at 1.25x reports the 1.25 scale") {
    std::mt19937 rng(21);
    GrayImage t = random_gray(rng, 16, 16);
    GrayImage big = resize_nearest(t, 1.25);  // 20x20
    GrayImage img = random_gray(rng, 100, 100);
    plant(img, big, 40, 33);
    MatchConfig cfg;
    cfg.scales = {0.8, 1.0, 1.25, 1.5};
    const GrayImage tmpls[] = {t};
    const std::string labels[] = {"target"};
    auto dets = match_multiscale(img, tmpls, cfg, labels);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].scale == 1.25);
    CHECK(dets[0].label == "target");
    CHECK(std::abs(int(dets[0].region.x) - 40) <= 2);
    CHECK(std::abs(int(dets[0].region.y) - 33) <= 2);
    CHECK(std::abs(int(dets[0].region.w) - 20) <= 2);
}

TEST_CASE("match_multiscale: NMS keeps detections below the IoU ceiling") {
    std::mt19937 rng(31);
    GrayImage t = random_gray(rng, 10, 10);
    GrayImage img = random_gray(rng, 120, 40);
    plant(img, t, 10, 10);
    plant(img, t, 60, 12);
    MatchConfig cfg = default_match_config();
    const GrayImage tmpls[] = {t};
    auto dets = match_multiscale(img, tmpls, cfg);
    REQUIRE(dets.size() >= 2);
    for (std::size_t i = 0; i < dets.size(); ++i)
        for (std::size_t j = i + 1; j < dets.size(); ++j)
            CHECK(region_iou(dets[i].region, dets[j].region) <= cfg.nms_iou);
    // both plants survive: near-unit ladder scales are exact subimages under
    // nearest-neighbor resampling, so the kept box may be a tad smaller than
    // the plant -- check a perfect-score detection centered on each site.
    auto found = [&](uint32_t x, uint32_t y) {
        return std::any_of(dets.begin(), dets.end(), [&](const Detection& d) {
            const uint32_t cx = d.region.x + d.region.w / 2;
            const uint32_t cy = d.region.y + d.region.h / 2;
            return d.score >= 0.99 && cx >= x && cx < x + 10 && cy >= y && cy < y + 10;
        });
    };
    CHECK(found(10, 10));
    CHECK(found(60, 12));
}

TEST_CASE("match_multiscale skips scales that exceed the image") {
    std::mt19937 rng(61);
    GrayImage t = random_gray(rng, 30, 30);
    GrayImage img = random_gray(rng, 40, 40);
    plant(img, t, 4, 4);
    MatchConfig cfg;
    cfg.scales = {1.0, 2.0};  // 60x60 template cannot fit; must be skipped silently
    const GrayImage tmpls[] = {t};
    auto dets = match_multiscale(img, tmpls, cfg);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].scale == 1.0);
}

TEST_CASE("contour-mode matching is palette independent") {
    // same geometry, different colors: a filled disc on a dark card
    auto card = [](Rgba bg, Rgba fg) {
        Frame f = make_frame(0, 0, 40, 40, PixelFormat::RGBA8,
                             std::vector<uint8_t>(40 * 40 * 4));
        for (uint32_t y = 0; y < 40; ++y)
            for (uint32_t x = 0; x < 40; ++x) {
                const bool in = (int(x) - 20) * (int(x) - 20) + (int(y) - 20) * (int(y) - 20) <= 144;
                const Rgba c = in ? fg : bg;
                uint8_t* p = &f.data[(std::size_t(y) * 40 + x) * 4];
                p[0] = c.r; p[1] = c.g; p[2] = c.b; p[3] = 255;
            }
        return f;
    };
    const Frame a = card(Rgba{30, 34, 40, 255}, Rgba{230, 235, 240, 255});
    const Frame b = card(Rgba{10, 60, 20, 255}, Rgba{250, 210, 190, 255});

    GrayImage scene = make_gray(100, 80, 20);
    GrayImage gb = to_gray(b);
    for (uint32_t y = 0; y < 40; ++y)
        for (uint32_t x = 0; x < 40; ++x) scene.at(25 + x, 30 + y) = gb.at(x, y);

    MatchConfig cfg = default_match_config(MatchMode::Contour);
    GrayImage ga = to_gray(a);
    const GrayImage tmpls[] = {ga};
    auto dets = match_multiscale(contourize(scene, 128), tmpls, cfg);
    REQUIRE(!dets.empty());
    CHECK(region_iou(dets[0].region, Region{25, 30, 40, 40}) >= 0.8);
}

TEST_CASE("average_hash goldens and shift similarity") {
    CHECK(average_hash(make_gray(8, 8, 77)) == 0);  // constant: strict greater-than rule
    GrayImage half = make_gray(8, 8);
    for (uint32_t y = 0; y < 8; ++y)
        for (uint32_t x = 4; x < 8; ++x) half.at(x, y) = 255;
    CHECK(average_hash(half) == 0xF0F0F0F0F0F0F0F0ull);

    CHECK(hamming_distance(0, 0) == 0);
    CHECK(hamming_distance(0xFFFFFFFFFFFFFFFFull, 0) == 64);
    CHECK(hamming_distance(0b1011, 0b0001) == 2);

    // a feed strip against its 1px-shifted copy stays within distance 10
    corpus::SequenceSpec spec;
    spec.seed = 404;
    spec.width = 360;
    spec.height = 64;
    const int32_t shifts[] = {1};
    auto frames = corpus::generate_scroll_sequence(spec, shifts);
    const uint64_t h0 = average_hash(to_gray(frames[0]));
    const uint64_t h1 = average_hash(to_gray(frames[1]));
    CHECK(hamming_distance(h0, h1) <= 10);

    // upscale property: hash unchanged when the 8x8 reduction is unchanged
    GrayImage up = resize_nearest(half, 2.0);
    CHECK(average_hash(up) == average_hash(half));
}

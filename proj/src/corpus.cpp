#include "gtrm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gtrm/glyphs.hpp"
#include "gtrm/imaging.hpp"

namespace gtrm::corpus {

// --- rng -------------------------------------------------------------------

uint64_t splitmix64(uint64_t seed, uint64_t counter) {
    uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// --- names ------------------------------------------------------------------

const char* to_string(Layout l) {
    switch (l) {
        case Layout::Feed: return "feed";
        case Layout::Stories: return "stories";
        case Layout::Settings: return "settings";
        case Layout::VideoStill: return "video";
        case Layout::Mixed: return "mixed";
    }
    return "feed";
}

const char* to_string(ElementKind k) {
    switch (k) {
        case ElementKind::StoriesBar: return "stories";
        case ElementKind::MetricsBar: return "metrics";
        case ElementKind::TextLine: return "text";
        case ElementKind::ImageBlock: return "image";
        case ElementKind::ColorPatch: return "patch";
        case ElementKind::Badge: return "badge";
    }
    return "text";
}

std::optional<Layout> layout_from(std::string_view name) {
    if (name == "feed") return Layout::Feed;
    if (name == "stories") return Layout::Stories;
    if (name == "settings") return Layout::Settings;
    if (name == "video") return Layout::VideoStill;
    if (name == "mixed") return Layout::Mixed;
    return std::nullopt;
}

std::optional<ElementKind> element_kind_from(std::string_view name) {
    if (name == "stories") return ElementKind::StoriesBar;
    if (name == "metrics") return ElementKind::MetricsBar;
    if (name == "text") return ElementKind::TextLine;
    if (name == "image") return ElementKind::ImageBlock;
    if (name == "patch") return ElementKind::ColorPatch;
    if (name == "badge") return ElementKind::Badge;
    return std::nullopt;
}

// --- raw drawing ------------------------------------------------------------

namespace {

void set_px(Frame& f, uint32_t x, uint32_t y, Rgba c) {
    uint8_t* p = f.data.data() + (std::size_t(y) * f.width + x) * 4;
    p[0] = c.r; p[1] = c.g; p[2] = c.b; p[3] = 255;
}

// Clips to the frame; chrome math occasionally runs past odd widths.
void fill_rect(Frame& f, int64_t x, int64_t y, int64_t w, int64_t h, Rgba c) {
    const int64_t x0 = std::max<int64_t>(0, x), y0 = std::max<int64_t>(0, y);
    const int64_t x1 = std::min<int64_t>(f.width, x + w);
    const int64_t y1 = std::min<int64_t>(f.height, y + h);
    for (int64_t yy = y0; yy < y1; ++yy)
        for (int64_t xx = x0; xx < x1; ++xx)
            set_px(f, uint32_t(xx), uint32_t(yy), c);
}

void fill_disc(Frame& f, int64_t cx, int64_t cy, int64_t r, Rgba c) {
    for (int64_t yy = cy - r; yy <= cy + r; ++yy) {
        if (yy < 0 || yy >= f.height) continue;
        for (int64_t xx = cx - r; xx <= cx + r; ++xx) {
            if (xx < 0 || xx >= f.width) continue;
            const int64_t dx = xx - cx, dy = yy - cy;
            if (dx * dx + dy * dy <= r * r) set_px(f, uint32_t(xx), uint32_t(yy), c);
        }
    }
}

Frame blank_frame(uint32_t w, uint32_t h, Rgba fill) {
    Frame f;
    f.width = w;
    f.height = h;
    f.format = PixelFormat::RGBA8;
    f.data.assign(std::size_t(w) * h * 4, 0);
    fill_rect(f, 0, 0, w, h, fill);
    return f;
}

// Nearest-neighbour scale of an RGBA frame.  The index math must stay
// identical to the grayscale resize used on the template side so that a
// planted element and a rescaled mask agree pixel for pixel.
Frame scale_rgba(const Frame& src, double scale) {
    if (!(scale > 0.0)) throw ConfigError("scale must be positive");
    const uint32_t ow = std::max<uint32_t>(1, uint32_t(src.width * scale));
    const uint32_t oh = std::max<uint32_t>(1, uint32_t(src.height * scale));
    Frame out = blank_frame(ow, oh, Rgba{0, 0, 0, 255});
    for (uint32_t y = 0; y < oh; ++y) {
        const uint32_t sy = std::min<uint32_t>(uint32_t(y / scale), src.height - 1);
        for (uint32_t x = 0; x < ow; ++x) {
            const uint32_t sx = std::min<uint32_t>(uint32_t(x / scale), src.width - 1);
            set_px(out, x, y, src.rgba_at(sx, sy));
        }
    }
    return out;
}

void blit(Frame& dst, const Frame& src, uint32_t x, uint32_t y) {
    for (uint32_t yy = 0; yy < src.height; ++yy)
        for (uint32_t xx = 0; xx < src.width; ++xx)
            set_px(dst, x + xx, y + yy, src.rgba_at(xx, yy));
}

}  // namespace

// --- text -------------------------------------------------------------------

void draw_text(Frame& frame, uint32_t x, uint32_t y, std::string_view text,
               uint32_t scale, Rgba ink) {
    if (scale == 0) throw ConfigError("text scale must be at least 1");
    if (text.empty()) return;
    for (char c : text)
        if (!glyphs::has_glyph(c))
            throw ConfigError(std::string("character not in glyph atlas: '") + c + "'");
    const Region box = text_advance_box(x, y, text, scale);
    if (box.right() > frame.width || box.bottom() > frame.height)
        throw BoundsError("text run extends past the frame");
    for (std::size_t i = 0; i < text.size(); ++i) {
        for (int gy = 0; gy < glyphs::kHeight; ++gy)
            for (int gx = 0; gx < glyphs::kWidth; ++gx)
                if (glyphs::glyph_pixel(text[i], gx, gy))
                    fill_rect(frame,
                              int64_t(x) + (int64_t(i) * glyphs::kAdvance + gx) * scale,
                              int64_t(y) + int64_t(gy) * scale, scale, scale, ink);
    }
}

Region text_advance_box(uint32_t x, uint32_t y, std::string_view text, uint32_t scale) {
    if (text.empty() || scale == 0) return Region{x, y, 0, 0};
    const uint32_t w = scale * (glyphs::kAdvance * uint32_t(text.size()) - 1);
    return Region{x, y, w, scale * glyphs::kHeight};
}

Region text_ink_bbox(uint32_t x, uint32_t y, std::string_view text, uint32_t scale) {
    int minc = -1, maxc = -1, minr = -1, maxr = -1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        for (int gy = 0; gy < glyphs::kHeight; ++gy)
            for (int gx = 0; gx < glyphs::kWidth; ++gx)
                if (glyphs::glyph_pixel(text[i], gx, gy)) {
                    const int col = int(i) * glyphs::kAdvance + gx;
                    if (minc < 0 || col < minc) minc = col;
                    if (col > maxc) maxc = col;
                    if (minr < 0 || gy < minr) minr = gy;
                    if (gy > maxr) maxr = gy;
                }
    }
    if (minc < 0) return Region{x, y, 0, 0};
    return Region{x + uint32_t(minc) * scale, y + uint32_t(minr) * scale,
                  uint32_t(maxc - minc + 1) * scale, uint32_t(maxr - minr + 1) * scale};
}

// --- element bases ----------------------------------------------------------

namespace {

struct StoriesPalette { Rgba strip, ring, fill; };
struct BadgePalette { Rgba margin, disc, digit; };
struct MetricsPalette { Rgba bg, rule, icon0, icon1, icon2, digits; };

// Variants keep every component on the same side of gray 128, so the
// thresholded binary image (and with it contour matching) is identical
// across palettes while the RGB content differs.
StoriesPalette stories_palette(uint32_t variant) {
    if (variant % 2 == 0)
        return {Rgba{25, 39, 52, 255}, Rgba{235, 240, 245, 255}, Rgba{90, 40, 44, 255}};
    return {Rgba{40, 55, 70, 255}, Rgba{221, 228, 236, 255}, Rgba{66, 74, 92, 255}};
}

BadgePalette badge_palette(uint32_t variant) {
    if (variant % 2 == 0)
        return {Rgba{30, 30, 34, 255}, Rgba{250, 120, 110, 255}, Rgba{40, 8, 16, 255}};
    return {Rgba{36, 34, 40, 255}, Rgba{232, 146, 92, 255}, Rgba{52, 12, 20, 255}};
}

MetricsPalette metrics_palette(uint32_t variant) {
    if (variant % 2 == 0)
        return {Rgba{245, 246, 248, 255}, Rgba{228, 230, 234, 255},
                Rgba{150, 40, 60, 255}, Rgba{40, 110, 70, 255}, Rgba{50, 90, 160, 255},
                Rgba{40, 44, 48, 255}};
    return {Rgba{240, 242, 246, 255}, Rgba{224, 227, 233, 255},
            Rgba{120, 60, 80, 255}, Rgba{60, 120, 90, 255}, Rgba{70, 100, 150, 255},
            Rgba{50, 52, 58, 255}};
}

Frame stories_base(uint32_t variant) {
    const StoriesPalette p = stories_palette(variant);
    Frame f = blank_frame(320, 56, p.strip);
    for (int k = 0; k < 5; ++k) {
        const int64_t cx = 32 + 64 * k;
        fill_disc(f, cx, 28, 20, p.ring);
        fill_disc(f, cx, 28, 16, p.fill);
    }
    return f;
}

Frame badge_base(uint32_t variant) {
    const BadgePalette p = badge_palette(variant);
    Frame f = blank_frame(24, 24, p.margin);
    fill_disc(f, 12, 12, 10, p.disc);
    // speech-bubble tail; breaks circular symmetry so small ring-shaped
    // glyph outlines do not resemble the badge contour
    for (int64_t r = 16; r <= 21; ++r) fill_rect(f, 4, r, 21 - r + 1, 1, p.disc);
    draw_text(f, 10, 9, "3", 1, p.digit);
    return f;
}

Frame metrics_base(uint32_t variant) {
    const MetricsPalette p = metrics_palette(variant);
    Frame f = blank_frame(200, 20, p.bg);
    fill_rect(f, 0, 0, 200, 2, p.rule);
    fill_rect(f, 0, 18, 200, 2, p.rule);
    fill_rect(f, 8, 6, 8, 8, p.icon0);
    fill_rect(f, 76, 6, 8, 8, p.icon1);
    fill_rect(f, 144, 6, 8, 8, p.icon2);
    draw_text(f, 20, 6, "12K", 1, p.digits);
    draw_text(f, 88, 6, "3K", 1, p.digits);
    draw_text(f, 156, 6, "7", 1, p.digits);
    return f;
}

}  // namespace

Frame element_base(ElementKind kind, uint32_t variant) {
    switch (kind) {
        case ElementKind::StoriesBar: return stories_base(variant);
        case ElementKind::MetricsBar: return metrics_base(variant);
        case ElementKind::Badge: return badge_base(variant);
        default:
            throw ConfigError("element kind has no base raster");
    }
}

double ElementSpec::effective_scale() const {
    return rung >= 0 ? imaging::ladder_scale(rung) : scale;
}

namespace {

void base_dims(ElementKind kind, uint32_t& w, uint32_t& h) {
    switch (kind) {
        case ElementKind::StoriesBar: w = 320; h = 56; return;
        case ElementKind::MetricsBar: w = 200; h = 20; return;
        case ElementKind::Badge: w = 24; h = 24; return;
        default: w = h = 0; return;
    }
}

bool is_mask_kind(ElementKind k) {
    return k == ElementKind::StoriesBar || k == ElementKind::MetricsBar ||
           k == ElementKind::Badge;
}

}  // namespace

Region element_rect(const ElementSpec& e) {
    switch (e.kind) {
        case ElementKind::StoriesBar:
        case ElementKind::MetricsBar:
        case ElementKind::Badge: {
            uint32_t bw = 0, bh = 0;
            base_dims(e.kind, bw, bh);
            const double s = e.effective_scale();
            if (!(s > 0.0)) throw ConfigError("element scale must be positive");
            // same truncation as the nearest-neighbour resize
            return Region{e.x, e.y, std::max<uint32_t>(1, uint32_t(bw * s)),
                          std::max<uint32_t>(1, uint32_t(bh * s))};
        }
        case ElementKind::TextLine:
            return text_advance_box(e.x, e.y, e.text, uint32_t(e.scale));
        case ElementKind::ImageBlock:
        case ElementKind::ColorPatch:
            return Region{e.x, e.y, e.w, e.h};
    }
    return Region{};
}

// --- chrome -----------------------------------------------------------------

namespace {

// Every decorative block is drawn wider than four times its height so that
// the glyph-candidate filter in text detection never picks chrome up.
const Rgba kBgTones[4] = {Rgba{240, 241, 244, 255}, Rgba{236, 238, 242, 255},
                          Rgba{244, 244, 247, 255}, Rgba{233, 236, 241, 255}};

Rgba screen_bg(const ScreenSpec& spec) { return kBgTones[splitmix64(spec.seed, 0) % 4]; }

void draw_chrome(Frame& f, const ScreenSpec& spec) {
    const uint32_t W = spec.width, H = spec.height;
    const Rgba bg = screen_bg(spec);
    fill_rect(f, 0, 0, W, H, bg);

    const Rgba bar{26, 30, 38, 255};
    const Rgba block_light{210, 214, 220, 255};
    const Rgba nav_block{120, 126, 140, 255};

    fill_rect(f, 0, 0, W, 24, bar);
    fill_rect(f, 12, 8, 80, 8, block_light);

    const bool nav = spec.layout != Layout::Settings;
    if (nav && H > 48) {
        fill_rect(f, 0, int64_t(H) - 20, W, 20, bar);
        if (W >= 240)
            for (int k = 0; k < 4; ++k)
                fill_rect(f, 16 + int64_t(k) * ((int64_t(W) - 32 - 44) / 3),
                          int64_t(H) - 14, 44, 8, nav_block);
    }

    const Rgba rule{214, 216, 222, 255};
    switch (spec.layout) {
        case Layout::Feed: {
            const int64_t gap = 88 + int64_t(splitmix64(spec.seed, 1) % 48);
            for (int64_t y = 40; y + 2 <= int64_t(H) - 24; y += gap)
                fill_rect(f, 0, y, W, 2, rule);
            break;
        }
        case Layout::Stories: {
            const int64_t gap = 120 + int64_t(splitmix64(spec.seed, 1) % 64);
            for (int64_t y = 44; y + 2 <= int64_t(H) - 24; y += gap)
                fill_rect(f, 0, y, W, 2, rule);
            break;
        }
        case Layout::Settings: {
            const Rgba line{218, 220, 226, 255};
            const Rgba tog_on{70, 160, 90, 255};
            const Rgba tog_off{160, 164, 172, 255};
            int k = 0;
            for (int64_t y = 32; y + 48 <= int64_t(H) - 8; y += 48, ++k) {
                fill_rect(f, 0, y, W, 1, line);
                if (W >= 120)
                    fill_rect(f, int64_t(W) - 60, y + 19, 44, 10,
                              splitmix64(spec.seed, 2 + uint64_t(k)) % 2 ? tog_on : tog_off);
            }
            break;
        }
        case Layout::VideoStill: {
            // keep the player small enough that dark pixels stay the global
            // minority; text detection treats the minority class as ink
            const int64_t ph = int64_t(H) * 7 / 20;
            fill_rect(f, 16, 40, int64_t(W) - 32, ph, Rgba{14, 14, 18, 255});
            const Rgba ctrl{200, 204, 212, 255};
            if (W >= 240)
                for (int k = 0; k < 3; ++k)
                    fill_rect(f, 24 + 70 * int64_t(k), 40 + ph + 8, 52, 8, ctrl);
            break;
        }
        case Layout::Mixed: {
            const int64_t gap = 96 + int64_t(splitmix64(spec.seed, 1) % 32);
            for (int64_t y = 40; y + 2 <= int64_t(H) / 2; y += gap)
                fill_rect(f, 0, y, W, 2, rule);
            if (W >= 120 && H >= 160)
                fill_rect(f, int64_t(W) - 60, int64_t(H) / 2 + 12, 44, 10,
                          Rgba{160, 164, 172, 255});
            break;
        }
    }
}

// --- element rendering -------------------------------------------------------

const Rgba kInkDark{32, 36, 44, 255};
const Rgba kInkLight{232, 236, 242, 255};
const Rgba kCardDark{38, 42, 52, 255};
const Rgba kBannerLight{230, 232, 236, 255};

bool has_alnum(std::string_view s) {
    return std::any_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isalnum(c) != 0; });
}

void validate_element(const ScreenSpec& spec, const ElementSpec& e, std::size_t idx) {
    const auto fail = [&](const std::string& msg) {
        throw ConfigError("element " + std::to_string(idx) + " (" + to_string(e.kind) +
                          "): " + msg);
    };
    if (is_mask_kind(e.kind)) {
        if (e.rung >= imaging::kLadderRungs) fail("rung out of range");
        const double s = e.effective_scale();
        if (!(s >= 0.25 && s <= 4.0)) fail("scale must be in [0.25, 4]");
    } else if (e.kind == ElementKind::TextLine) {
        if (e.scale != std::floor(e.scale) || e.scale < 1 || e.scale > 8)
            fail("text scale must be an integer in [1, 8]");
        if (!has_alnum(e.text)) fail("transcript needs at least one letter or digit");
        for (char c : e.text)
            if (!glyphs::has_glyph(c)) fail("transcript character not in glyph atlas");
    } else if (e.kind == ElementKind::ImageBlock) {
        if (e.w < 24 || e.h < 24) fail("image block needs w,h >= 24");
        if (!e.text.empty()) {
            if (e.scale != std::floor(e.scale) || e.scale < 1 || e.scale > 4)
                fail("caption scale must be an integer in [1, 4]");
            if (!has_alnum(e.text)) fail("caption needs at least one letter or digit");
            for (char c : e.text)
                if (!glyphs::has_glyph(c)) fail("caption character not in glyph atlas");
            const uint32_t cs = uint32_t(e.scale);
            const Region cap = text_advance_box(0, 0, e.text, cs);
            if (cap.w + 12 > e.w) fail("caption wider than the image block");
            if (7 * cs + 24 > e.h) fail("image block too short for its caption");
        }
    } else if (e.kind == ElementKind::ColorPatch) {
        if (e.w < 4 || e.h < 4) fail("color patch needs w,h >= 4");
    }
    const Region r = element_rect(e);
    if (r.w == 0 || r.h == 0) fail("element has an empty rect");
    if (r.right() > spec.width || r.bottom() > spec.height)
        fail("planted rect extends past the screen");
}

TruthEntry plant_element(Frame& f, const ScreenSpec& spec, const ElementSpec& e,
                         std::size_t idx) {
    TruthEntry t;
    t.kind = e.kind;
    t.rect = element_rect(e);
    t.scale = e.effective_scale();
    switch (e.kind) {
        case ElementKind::StoriesBar:
        case ElementKind::MetricsBar:
        case ElementKind::Badge: {
            const Frame scaled = scale_rgba(element_base(e.kind, e.variant), t.scale);
            blit(f, scaled, e.x, e.y);
            if (e.kind == ElementKind::StoriesBar) t.color = stories_palette(e.variant).strip;
            if (e.kind == ElementKind::MetricsBar) t.color = metrics_palette(e.variant).bg;
            if (e.kind == ElementKind::Badge) t.color = badge_palette(e.variant).disc;
            break;
        }
        case ElementKind::TextLine: {
            const uint32_t s = uint32_t(e.scale);
            if (e.variant % 2 == 1) {
                fill_rect(f, e.x, e.y, t.rect.w, t.rect.h, kCardDark);
                draw_text(f, e.x, e.y, e.text, s, kInkLight);
                t.color = kInkLight;
            } else {
                fill_rect(f, e.x, e.y, t.rect.w, t.rect.h, screen_bg(spec));
                draw_text(f, e.x, e.y, e.text, s, kInkDark);
                t.color = kInkDark;
            }
            t.transcript = e.text;
            t.ink_rect = text_ink_bbox(e.x, e.y, e.text, s);
            t.protected_content = true;
            break;
        }
        case ElementKind::ImageBlock: {
            const uint64_t stream = 0x1000 + uint64_t(idx) * 32;
            uint64_t ctr = 0;
            const auto rnd = [&] { return splitmix64(spec.seed, stream + ctr++); };
            const uint32_t cs = e.text.empty() ? 0 : uint32_t(e.scale);
            const uint32_t cap_h = e.text.empty() ? 0 : 7 * cs + 10;
            for (uint32_t yy = 0; yy < e.h; ++yy) {
                const uint8_t tone = uint8_t(112 + uint64_t(yy) * 96 / e.h);
                fill_rect(f, e.x, int64_t(e.y) + yy, e.w, 1,
                          Rgba{tone, uint8_t(tone + 6), uint8_t(tone + 12), 255});
            }
            static const Rgba kOverlay[8] = {
                Rgba{196, 120, 90, 255}, Rgba{90, 140, 190, 255}, Rgba{220, 190, 120, 255},
                Rgba{70, 110, 90, 255},  Rgba{160, 80, 120, 255}, Rgba{210, 160, 170, 255},
                Rgba{100, 100, 160, 255}, Rgba{150, 190, 210, 255}};
            const uint32_t nrect = 3 + uint32_t(rnd() % 3);
            const uint32_t body_h = e.h - cap_h;
            for (uint32_t j = 0; j < nrect; ++j) {
                const uint32_t rw = 16 + uint32_t(rnd() % std::max<uint32_t>(1, e.w / 3));
                const uint32_t rh = 12 + uint32_t(rnd() % std::max<uint32_t>(1, body_h / 4));
                if (rw >= e.w || rh >= body_h) continue;
                const uint32_t rx = uint32_t(rnd() % (e.w - rw));
                const uint32_t ry = uint32_t(rnd() % (body_h - rh));
                fill_rect(f, int64_t(e.x) + rx, int64_t(e.y) + ry, rw, rh,
                          kOverlay[rnd() % 8]);
            }
            if (!e.text.empty()) {
                fill_rect(f, e.x, int64_t(e.y) + e.h - cap_h, e.w, cap_h, kBannerLight);
                const uint32_t tx = e.x + 6, ty = e.y + e.h - cap_h + 5;
                draw_text(f, tx, ty, e.text, cs, kInkDark);
                t.transcript = e.text;
                t.ink_rect = text_ink_bbox(tx, ty, e.text, cs);
            }
            t.color = Rgba{112, 118, 124, 255};
            t.protected_content = true;
            break;
        }
        case ElementKind::ColorPatch: {
            Rgba c = e.color;
            c.a = 255;
            fill_rect(f, e.x, e.y, e.w, e.h, c);
            t.color = c;
            t.protected_content = true;
            break;
        }
    }
    return t;
}

}  // namespace

Screen generate_screen(const ScreenSpec& spec) {
    if (spec.width < 64 || spec.height < 96)
        throw ConfigError("screen size must be at least 64x96");
    if (spec.width > 4096 || spec.height > 8192)
        throw ConfigError("screen size too large");
    for (std::size_t i = 0; i < spec.elements.size(); ++i)
        validate_element(spec, spec.elements[i], i);
    for (std::size_t i = 0; i < spec.elements.size(); ++i)
        for (std::size_t j = i + 1; j < spec.elements.size(); ++j)
            if (regions_intersect(element_rect(spec.elements[i]),
                                  element_rect(spec.elements[j])))
                throw ConfigError("planted rects overlap: elements " + std::to_string(i) +
                                  " and " + std::to_string(j));

    Screen out;
    out.frame = blank_frame(spec.width, spec.height, Rgba{0, 0, 0, 255});
    out.frame.id = spec.seed;
    draw_chrome(out.frame, spec);
    for (std::size_t i = 0; i < spec.elements.size(); ++i)
        out.truth.entries.push_back(plant_element(out.frame, spec, spec.elements[i], i));
    return out;
}

// --- scroll sequences ---------------------------------------------------------

namespace {

uint64_t post_counter(int64_t k) {
    // zig-zag so negative post indices get their own streams
    const uint64_t u = k >= 0 ? uint64_t(k) * 2 : uint64_t(-k) * 2 - 1;
    return 0xA0000000ull + u;
}

uint32_t post_height(uint64_t seed, int64_t k) {
    return 70 + uint32_t(splitmix64(seed, post_counter(k)) % 61);
}

// Post index and start row covering global row gy.
void locate_post(uint64_t seed, int64_t gy, int64_t& k, int64_t& start) {
    k = 0;
    start = 0;
    while (gy >= start + int64_t(post_height(seed, k))) start += post_height(seed, k++);
    while (gy < start) start -= post_height(seed, --k);
}

Rgba post_row_pixel(uint64_t seed, uint32_t width, int64_t k, uint32_t r, uint32_t x) {
    const uint64_t u = post_counter(k);
    static const Rgba kAvatars[4] = {Rgba{72, 80, 96, 255}, Rgba{96, 72, 84, 255},
                                     Rgba{70, 92, 80, 255}, Rgba{88, 78, 70, 255}};
    const Rgba bg = (u % 2) ? Rgba{238, 240, 244, 255} : Rgba{246, 247, 250, 255};
    if (r < 3) return Rgba{58, 62, 70, 255};
    if (r >= 10 && r < 24 && x >= 12 && x < 26)
        return kAvatars[splitmix64(seed, 0xB000000ull + u) % 4];
    if (r >= 10 && r < 14 && width >= 160 && x >= width - 52 && x < width - 24)
        return Rgba{150, 154, 162, 255};
    const uint32_t h = post_height(seed, k);
    if (r >= 10 && r + 6 < h && x >= 36) {
        const uint32_t j = (r - 10) / 14;
        if ((r - 10) % 14 < 8 && 10 + j * 14 + 8 <= h - 6) {
            const uint32_t cap = j == 0 ? (width > 160 ? width - 160 : 1)
                                        : (width > 112 ? width - 112 : 1);
            const uint32_t len =
                60 + uint32_t(splitmix64(seed, 0xC000000ull + u * 97 + j) % cap);
            if (x < 36 + len) return Rgba{64, 68, 76, 255};
        }
    }
    return bg;
}

}  // namespace

Rgba feed_pixel(uint64_t seed, uint32_t width, int64_t global_y, uint32_t x) {
    int64_t k = 0, start = 0;
    locate_post(seed, global_y, k, start);
    return post_row_pixel(seed, width, k, uint32_t(global_y - start), x);
}

std::vector<Frame> generate_scroll_sequence(const SequenceSpec& spec,
                                            std::span<const int32_t> shifts) {
    if (spec.width < 160 || spec.height < 64)
        throw ConfigError("sequence viewport must be at least 160x64");
    for (int32_t s : shifts)
        if (uint64_t(s < 0 ? -int64_t(s) : int64_t(s)) >= spec.height)
            throw ConfigError("scroll shift magnitude must be less than the viewport height");

    std::vector<Frame> frames;
    frames.reserve(shifts.size() + 1);
    int64_t offset = 0;
    for (std::size_t i = 0; i <= shifts.size(); ++i) {
        Frame f = blank_frame(spec.width, spec.height, Rgba{0, 0, 0, 255});
        f.id = i;
        f.timestamp_us = uint64_t(i) * 50'000;
        int64_t k = 0, start = 0;
        locate_post(spec.seed, offset, k, start);
        for (uint32_t y = 0; y < spec.height; ++y) {
            const int64_t gy = offset + y;
            while (gy >= start + int64_t(post_height(spec.seed, k)))
                start += post_height(spec.seed, k++);
            for (uint32_t x = 0; x < spec.width; ++x)
                set_px(f, x, y, post_row_pixel(spec.seed, spec.width, k,
                                               uint32_t(gy - start), x));
        }
        frames.push_back(std::move(f));
        if (i < shifts.size()) offset += shifts[i];
    }
    return frames;
}

// --- manifest ----------------------------------------------------------------

namespace {

struct Token {
    std::string key;    // empty for bare words
    std::string value;
};

[[noreturn]] void bad_line(std::size_t line_no, const std::string& msg) {
    throw ConfigError("manifest line " + std::to_string(line_no) + ": " + msg);
}

// Splits a line into bare words and key=value tokens; a value may be quoted
// to contain spaces.  '#' outside quotes starts a comment.
std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
    std::vector<Token> out;
    std::size_t i = 0;
    const auto skip_ws = [&] { while (i < line.size() && std::isspace((unsigned char)line[i])) ++i; };
    while (true) {
        skip_ws();
        if (i >= line.size() || line[i] == '#') break;
        std::string word;
        bool quoted = false;
        while (i < line.size()) {
            const char c = line[i];
            if (quoted) {
                if (c == '"') { quoted = false; ++i; continue; }
                word += c;
                ++i;
                continue;
            }
            // '#' opens a comment only at a token boundary, so color=#rrggbb works
            if (std::isspace((unsigned char)c) || (c == '#' && word.empty())) break;
            if (c == '"') { quoted = true; ++i; continue; }
            word += c;
            ++i;
        }
        if (quoted) bad_line(line_no, "unterminated quote");
        const auto eq = word.find('=');
        if (eq == std::string::npos)
            out.push_back({"", word});
        else
            out.push_back({word.substr(0, eq), word.substr(eq + 1)});
    }
    return out;
}

uint64_t parse_u64(const std::string& s, std::size_t line_no, const std::string& what) {
    if (s.empty()) bad_line(line_no, what + " is empty");
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size() || s[0] == '-')
        bad_line(line_no, "bad " + what + ": '" + s + "'");
    return v;
}

int64_t parse_i64(const std::string& s, std::size_t line_no, const std::string& what) {
    if (s.empty()) bad_line(line_no, what + " is empty");
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size())
        bad_line(line_no, "bad " + what + ": '" + s + "'");
    return v;
}

double parse_double(const std::string& s, std::size_t line_no, const std::string& what) {
    if (s.empty()) bad_line(line_no, what + " is empty");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end != s.c_str() + s.size())
        bad_line(line_no, "bad " + what + ": '" + s + "'");
    return v;
}

Rgba parse_color(const std::string& s, std::size_t line_no) {
    const auto hex = [&](char c) -> uint32_t {
        if (c >= '0' && c <= '9') return uint32_t(c - '0');
        if (c >= 'a' && c <= 'f') return uint32_t(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return uint32_t(c - 'A' + 10);
        bad_line(line_no, "bad color: '" + s + "'");
    };
    if (s.size() != 7 && s.size() != 9) bad_line(line_no, "bad color: '" + s + "'");
    if (s[0] != '#') bad_line(line_no, "color must start with '#'");
    uint32_t v = 0;
    for (std::size_t i = 1; i < s.size(); ++i) v = v * 16 + hex(s[i]);
    if (s.size() == 7) v = (v << 8) | 0xFF;
    return unpack_rgba(v);
}

void parse_size(const std::string& s, std::size_t line_no, uint32_t& w, uint32_t& h) {
    const auto x = s.find('x');
    if (x == std::string::npos) bad_line(line_no, "size must look like <w>x<h>");
    w = uint32_t(parse_u64(s.substr(0, x), line_no, "width"));
    h = uint32_t(parse_u64(s.substr(x + 1), line_no, "height"));
}

ElementSpec parse_element(const std::vector<Token>& toks, std::size_t line_no) {
    ElementSpec e;
    bool saw_kind = false, saw_x = false, saw_y = false;
    for (std::size_t i = 1; i < toks.size(); ++i) {
        const Token& t = toks[i];
        if (t.key.empty()) bad_line(line_no, "stray word '" + t.value + "'");
        if (t.key == "kind") {
            const auto k = element_kind_from(t.value);
            if (!k) bad_line(line_no, "unknown element kind '" + t.value + "'");
            e.kind = *k;
            saw_kind = true;
        } else if (t.key == "x") {
            e.x = uint32_t(parse_u64(t.value, line_no, "x"));
            saw_x = true;
        } else if (t.key == "y") {
            e.y = uint32_t(parse_u64(t.value, line_no, "y"));
            saw_y = true;
        } else if (t.key == "rung") {
            e.rung = int(parse_i64(t.value, line_no, "rung"));
        } else if (t.key == "scale") {
            e.scale = parse_double(t.value, line_no, "scale");
        } else if (t.key == "s") {
            e.scale = double(parse_u64(t.value, line_no, "s"));
        } else if (t.key == "w") {
            e.w = uint32_t(parse_u64(t.value, line_no, "w"));
        } else if (t.key == "h") {
            e.h = uint32_t(parse_u64(t.value, line_no, "h"));
        } else if (t.key == "variant") {
            e.variant = uint32_t(parse_u64(t.value, line_no, "variant"));
        } else if (t.key == "text") {
            e.text = t.value;
        } else if (t.key == "color") {
            e.color = parse_color(t.value, line_no);
        } else {
            bad_line(line_no, "unknown key '" + t.key + "'");
        }
    }
    if (!saw_kind) bad_line(line_no, "element needs kind=");
    if (!saw_x || !saw_y) bad_line(line_no, "element needs x= and y=");
    return e;
}

}  // namespace

Manifest parse_manifest(std::string_view body) {
    Manifest m;
    std::optional<ScreenSpec> cur;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= body.size()) {
        const auto nl = body.find('\n', pos);
        const std::string_view line =
            body.substr(pos, nl == std::string_view::npos ? body.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? body.size() + 1 : nl + 1;
        ++line_no;
        const auto toks = tokenize(line, line_no);
        if (toks.empty()) continue;
        const std::string& head = toks[0].value;
        if (!toks[0].key.empty()) bad_line(line_no, "expected a directive, got key=value");

        if (head == "screen") {
            if (cur) bad_line(line_no, "screen block not closed with 'end'");
            ScreenSpec s;
            bool saw_name = false;
            for (std::size_t i = 1; i < toks.size(); ++i) {
                const Token& t = toks[i];
                if (t.key.empty()) {
                    if (saw_name) bad_line(line_no, "screen has two names");
                    s.name = t.value;
                    saw_name = true;
                } else if (t.key == "seed") {
                    s.seed = parse_u64(t.value, line_no, "seed");
                } else if (t.key == "layout") {
                    const auto l = layout_from(t.value);
                    if (!l) bad_line(line_no, "unknown layout '" + t.value + "'");
                    s.layout = *l;
                } else if (t.key == "size") {
                    parse_size(t.value, line_no, s.width, s.height);
                } else {
                    bad_line(line_no, "unknown key '" + t.key + "'");
                }
            }
            if (!saw_name) bad_line(line_no, "screen needs a name");
            cur = std::move(s);
        } else if (head == "element") {
            if (!cur) bad_line(line_no, "element outside a screen block");
            cur->elements.push_back(parse_element(toks, line_no));
        } else if (head == "end") {
            if (!cur) bad_line(line_no, "'end' without a screen block");
            m.screens.push_back(std::move(*cur));
            cur.reset();
        } else if (head == "sequence") {
            if (cur) bad_line(line_no, "screen block not closed with 'end'");
            SequenceEntry q;
            bool saw_name = false, saw_shifts = false;
            for (std::size_t i = 1; i < toks.size(); ++i) {
                const Token& t = toks[i];
                if (t.key.empty()) {
                    if (saw_name) bad_line(line_no, "sequence has two names");
                    q.spec.name = t.value;
                    saw_name = true;
                } else if (t.key == "seed") {
                    q.spec.seed = parse_u64(t.value, line_no, "seed");
                } else if (t.key == "size") {
                    parse_size(t.value, line_no, q.spec.width, q.spec.height);
                } else if (t.key == "shifts") {
                    std::stringstream ss{t.value};
                    std::string part;
                    while (std::getline(ss, part, ','))
                        q.shifts.push_back(int32_t(parse_i64(part, line_no, "shift")));
                    saw_shifts = true;
                } else {
                    bad_line(line_no, "unknown key '" + t.key + "'");
                }
            }
            if (!saw_name) bad_line(line_no, "sequence needs a name");
            if (!saw_shifts || q.shifts.empty()) bad_line(line_no, "sequence needs shifts=");
            m.sequences.push_back(std::move(q));
        } else {
            bad_line(line_no, "unknown directive '" + head + "'");
        }
    }
    if (cur) throw ConfigError("manifest ends inside a screen block");

    for (std::size_t i = 0; i < m.screens.size(); ++i)
        for (std::size_t j = i + 1; j < m.screens.size(); ++j)
            if (m.screens[i].name == m.screens[j].name)
                throw ConfigError("duplicate screen name '" + m.screens[i].name + "'");
    for (std::size_t i = 0; i < m.sequences.size(); ++i)
        for (std::size_t j = i + 1; j < m.sequences.size(); ++j)
            if (m.sequences[i].spec.name == m.sequences[j].spec.name)
                throw ConfigError("duplicate sequence name '" + m.sequences[i].spec.name + "'");
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open manifest: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str());
}

namespace {

std::string color_hex(Rgba c) {
    char buf[11];
    if (c.a == 255)
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    else
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x%02x", c.r, c.g, c.b, c.a);
    return buf;
}

std::string scale_text(double s) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", s);
    return buf;
}

void emit_element(std::ostringstream& out, const ElementSpec& e) {
    out << "  element kind=" << to_string(e.kind) << " x=" << e.x << " y=" << e.y;
    switch (e.kind) {
        case ElementKind::StoriesBar:
        case ElementKind::MetricsBar:
        case ElementKind::Badge:
            if (e.rung >= 0)
                out << " rung=" << e.rung;
            else
                out << " scale=" << scale_text(e.scale);
            if (e.variant != 0) out << " variant=" << e.variant;
            break;
        case ElementKind::TextLine:
            out << " s=" << uint32_t(e.scale);
            if (e.variant != 0) out << " variant=" << e.variant;
            out << " text=\"" << e.text << '"';
            break;
        case ElementKind::ImageBlock:
            out << " w=" << e.w << " h=" << e.h;
            if (!e.text.empty()) out << " s=" << uint32_t(e.scale) << " text=\"" << e.text << '"';
            break;
        case ElementKind::ColorPatch:
            out << " w=" << e.w << " h=" << e.h << " color=" << color_hex(e.color);
            break;
    }
    out << '\n';
}

}  // namespace

std::string emit_manifest(const Manifest& m) {
    std::ostringstream out;
    out << "# synthetic screen corpus manifest\n";
    for (const ScreenSpec& s : m.screens) {
        out << "screen " << s.name << " seed=" << s.seed << " layout=" << to_string(s.layout)
            << " size=" << s.width << 'x' << s.height << '\n';
        for (const ElementSpec& e : s.elements) emit_element(out, e);
        out << "end\n";
    }
    for (const SequenceEntry& q : m.sequences) {
        out << "sequence " << q.spec.name << " seed=" << q.spec.seed << " size="
            << q.spec.width << 'x' << q.spec.height << " shifts=";
        for (std::size_t i = 0; i < q.shifts.size(); ++i)
            out << (i ? "," : "") << q.shifts[i];
        out << '\n';
    }
    return std::move(out).str();
}

std::string emit_truth(const std::string& screen_name, const GroundTruth& t) {
    std::ostringstream out;
    out << "truth " << screen_name << '\n';
    for (const TruthEntry& e : t.entries) {
        out << "  entry kind=" << to_string(e.kind) << " rect=" << e.rect.x << ',' << e.rect.y
            << ',' << e.rect.w << ',' << e.rect.h;
        if (e.ink_rect)
            out << " ink=" << e.ink_rect->x << ',' << e.ink_rect->y << ',' << e.ink_rect->w
                << ',' << e.ink_rect->h;
        if (!e.transcript.empty()) out << " text=\"" << e.transcript << '"';
        out << " scale=" << scale_text(e.scale) << " color=" << color_hex(e.color)
            << " protected=" << (e.protected_content ? 1 : 0) << '\n';
    }
    out << "end\n";
    return std::move(out).str();
}

// --- glyph atlas facade --------------------------------------------------------

const std::string& GlyphAtlas::charset() {
    static const std::string cs{glyphs::charset()};
    return cs;
}

bool GlyphAtlas::contains(char c) { return glyphs::has_glyph(c); }

bool GlyphAtlas::pixel(char c, uint32_t gx, uint32_t gy) {
    return gx < width && gy < height && glyphs::glyph_pixel(c, int(gx), int(gy));
}

}  // namespace gtrm::corpus

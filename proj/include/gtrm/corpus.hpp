#pragma once

// Synthetic screen corpus: deterministic social-app style frames with exact
// ground truth for every planted element, plus scroll sequences whose
// frame-to-frame displacement is known by construction.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gtrm/core.hpp"

namespace gtrm::corpus {

// Counter-based SplitMix64: stateless, platform independent.  Stream i of a
// seed is splitmix64(seed, i); nearby counters are uncorrelated.
uint64_t splitmix64(uint64_t seed, uint64_t counter);

// ---- screen specs ----------------------------------------------------------

enum class Layout : uint8_t { Feed, Stories, Settings, VideoStill, Mixed };

enum class ElementKind : uint8_t {
    StoriesBar,  // row of ringed avatar circles (the occlusion target)
    MetricsBar,  // like/repost/share counters (the demetrify target)
    TextLine,    // 5x7-font text, exact transcript in truth
    ImageBlock,  // gradient photo stand-in, optional caption line
    ColorPatch,  // flat rectangle of a known color
    Badge,       // small notification disc with a digit
};

const char* to_string(Layout l);
const char* to_string(ElementKind k);
std::optional<Layout> layout_from(std::string_view name);
std::optional<ElementKind> element_kind_from(std::string_view name);

struct ElementSpec {
    ElementKind kind = ElementKind::TextLine;
    uint32_t x = 0;     // top-left corner of the planted rect
    uint32_t y = 0;
    int rung = -1;      // mask elements: ladder rung (scale = ladder_scale(rung))
    double scale = 1.0; // used when rung < 0; text: integer glyph scale
    uint32_t w = 0;     // ImageBlock / ColorPatch extent
    uint32_t h = 0;
    uint32_t variant = 0;             // palette / counter variant
    std::string text;                 // TextLine transcript / ImageBlock caption
    Rgba color{255, 0, 180, 255};     // ColorPatch fill

    double effective_scale() const;   // ladder_scale(rung) if rung >= 0
};

struct ScreenSpec {
    std::string name = "screen";
    uint64_t seed = 0;
    Layout layout = Layout::Feed;
    uint32_t width = 360;
    uint32_t height = 640;
    std::vector<ElementSpec> elements;
};

// ---- ground truth -----------------------------------------------------------

struct TruthEntry {
    ElementKind kind;
    Region rect;                 // planted rect (text: full advance box)
    std::string transcript;      // TextLine / ImageBlock caption, else empty
    std::optional<Region> ink_rect; // exact ink bbox of the transcript
    bool protected_content = false; // true for text/image/patch (never occlude)
    double scale = 1.0;
    Rgba color{};                // representative color of the element
};

struct GroundTruth {
    std::vector<TruthEntry> entries;
};

struct Screen {
    Frame frame;
    GroundTruth truth;
};

// Base raster of a mask-style element at scale 1 (RGBA).
// StoriesBar 320x56, MetricsBar 200x20, Badge 24x24.
Frame element_base(ElementKind kind, uint32_t variant = 0);

// Planted rect an element will occupy (validation + truth).
Region element_rect(const ElementSpec& e);

// Render a screen.  Throws ConfigError if any element is out of bounds, two
// planted rects overlap, a transcript has no letter/digit, or a field is out
// of range for its kind.
Screen generate_screen(const ScreenSpec& spec);

// ---- text rendering ---------------------------------------------------------

// Draw `text` in the 5x7 font at integer scale (each glyph pixel becomes an
// s x s block, advance 6*s).  Characters outside the atlas throw ConfigError.
void draw_text(Frame& frame, uint32_t x, uint32_t y, std::string_view text,
               uint32_t scale, Rgba ink);

// Exact bounding box of the ink draw_text would produce (pen at x,y).
Region text_ink_bbox(uint32_t x, uint32_t y, std::string_view text, uint32_t scale);

// Full advance box of a text run: width s*(6*len-1), height 7*s.
Region text_advance_box(uint32_t x, uint32_t y, std::string_view text, uint32_t scale);

// ---- scroll sequences -------------------------------------------------------

struct SequenceSpec {
    std::string name = "seq";
    uint64_t seed = 0;
    uint32_t width = 360;
    uint32_t height = 480;
};

// Frame i+1 equals frame i translated up by shifts[i] pixels (negative =
// scrolled down), with rows entering the viewport drawn from an infinite
// deterministic feed.  Returns shifts.size()+1 frames.  Every |shift| must be
// strictly less than the viewport height (else ConfigError).
std::vector<Frame> generate_scroll_sequence(const SequenceSpec& spec,
                                            std::span<const int32_t> shifts);

// One row band of the infinite feed, exposed for tests: the color of pixel
// (x, global_y) for the given seed.
Rgba feed_pixel(uint64_t seed, uint32_t width, int64_t global_y, uint32_t x);

// ---- manifest ---------------------------------------------------------------

struct SequenceEntry {
    SequenceSpec spec;
    std::vector<int32_t> shifts;
};

struct Manifest {
    std::vector<ScreenSpec> screens;
    std::vector<SequenceEntry> sequences;
};

// Line-oriented manifest:
//   screen <name> seed=<u64> layout=<feed|stories|settings|video|mixed> size=<w>x<h>
//     element kind=<stories|metrics|badge> x= y= rung=<k>|scale=<dec> [variant=]
//     element kind=text x= y= s=<int> text="..."
//     element kind=image x= y= w= h= [s=<int>] [text="..."]
//     element kind=patch x= y= w= h= color=#rrggbb
//   end
//   sequence <name> seed=<u64> size=<w>x<h> shifts=<a,b,...>
// '#' starts a comment.  Errors carry 1-based line numbers.
Manifest parse_manifest(std::string_view body);
Manifest load_manifest(const std::filesystem::path& path);
std::string emit_manifest(const Manifest& m);

// Ground-truth sidecar (one screen per block), human-readable, emit-only.
std::string emit_truth(const std::string& screen_name, const GroundTruth& t);

// ---- glyph atlas facade -----------------------------------------------------

struct GlyphAtlas {
    static constexpr uint32_t width = 5;
    static constexpr uint32_t height = 7;
    static constexpr uint32_t advance = 6;
    static const std::string& charset();
    static bool contains(char c);
    static bool pixel(char c, uint32_t gx, uint32_t gy);
};

}  // namespace gtrm::corpus

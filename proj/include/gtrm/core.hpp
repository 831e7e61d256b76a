#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gtrm/errors.hpp"

namespace gtrm {

enum class PixelFormat : uint8_t { RGBA8 = 0, GRAY8 = 1 };

constexpr int bytes_per_pixel(PixelFormat f) {
    return f == PixelFormat::RGBA8 ? 4 : 1;
}

struct Rgba {
    uint8_t r = 0, g = 0, b = 0, a = 255;

    // Packing order used everywhere a total order on colors is needed.
    constexpr uint32_t packed() const {
        return (uint32_t(r) << 24) | (uint32_t(g) << 16) | (uint32_t(b) << 8) | uint32_t(a);
    }
    constexpr uint8_t luma() const;
    friend bool operator==(const Rgba&, const Rgba&) = default;
};

constexpr Rgba unpack_rgba(uint32_t v) {
    return Rgba{uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
}

// Integer BT.601 luma, rounded half-up.
constexpr uint8_t luma601(uint8_t r, uint8_t g, uint8_t b) {
    return uint8_t((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

constexpr uint8_t Rgba::luma() const { return luma601(r, g, b); }

// Axis-aligned pixel rectangle, top-left origin.
struct Region {
    uint32_t x = 0, y = 0;
    uint32_t w = 0, h = 0;

    constexpr uint32_t right() const { return x + w; }
    constexpr uint32_t bottom() const { return y + h; }
    constexpr uint64_t area() const { return uint64_t(w) * h; }
    friend bool operator==(const Region&, const Region&) = default;
};

double region_iou(const Region& a, const Region& b);
bool regions_intersect(const Region& a, const Region& b);

// A timestamped raster image, the unit flowing through the pipeline.
// Pixel data is row-major with no padding and is treated as immutable once
// constructed; operations hand back new frames.
struct Frame {
    uint64_t id = 0;
    uint64_t timestamp_us = 0;  // microseconds since session start
    uint32_t width = 0, height = 0;
    PixelFormat format = PixelFormat::RGBA8;
    std::vector<uint8_t> data;

    std::size_t expected_bytes() const {
        return std::size_t(width) * height * bytes_per_pixel(format);
    }
    bool contains(const Region& r) const {
        return r.w > 0 && r.h > 0 && r.right() <= width && r.bottom() <= height;
    }
    Rgba rgba_at(uint32_t x, uint32_t y) const;
};

// Throws DimensionError unless dims are positive and the buffer length matches.
Frame make_frame(uint64_t id, uint64_t timestamp_us, uint32_t width, uint32_t height,
                 PixelFormat format, std::vector<uint8_t> data);

// Scored, labeled rectangular hit produced by a hook.
struct Detection {
    Region region;
    double score = 0.0;        // in [0,1]
    double scale = 1.0;        // template scale at which found, >0
    std::string label;

    friend bool operator==(const Detection&, const Detection&) = default;
};

enum class OpKind : uint8_t {
    FillRect = 1,  // alpha-blend a color over a region
    Patch = 2,     // replace region pixels with an RGBA payload
    Veil = 3,      // blend a color over the whole frame at a given alpha
    Label = 4,     // render text into a region with the glyph atlas
};

// Default z bands: inpaint patches under fill boxes under labels under veils.
inline constexpr int kZPatch = 10;
inline constexpr int kZFillRect = 20;
inline constexpr int kZLabel = 30;
inline constexpr int kZVeil = 40;

struct OverlayOp {
    OpKind kind = OpKind::FillRect;
    int32_t z = 0;
    Region region;                   // FillRect, Patch, Label
    Rgba color;                      // FillRect, Veil, Label
    float alpha = 0.0f;              // Veil, in [0,1]
    std::string text;                // Label
    std::vector<uint8_t> patch;      // Patch, exactly region.w*region.h*4 bytes

    friend bool operator==(const OverlayOp&, const OverlayOp&) = default;
};

OverlayOp make_fill_rect(const Region& r, Rgba color, int32_t z = kZFillRect);
OverlayOp make_patch(const Region& r, std::vector<uint8_t> rgba, int32_t z = kZPatch);
OverlayOp make_veil(float alpha, Rgba color, int32_t z = kZVeil);
OverlayOp make_label(const Region& r, std::string text, Rgba color, int32_t z = kZLabel);

// Ordered draw list answering one frame. `ops` ascend by z; ties keep the
// order in which hooks emitted them (registration order, then emission order).
struct OverlayPlan {
    uint64_t frame_id = 0;
    std::vector<OverlayOp> ops;

    friend bool operator==(const OverlayPlan&, const OverlayPlan&) = default;
};

struct LatencyRecord {
    uint64_t frame_id = 0;
    uint64_t t_receive_us = 0;
    uint64_t t_plan_ready_us = 0;
    uint64_t t_sent_us = 0;
    std::map<std::string, uint64_t> per_hook_us;
    std::map<std::string, std::string> skipped_hooks;  // hook name -> error
};

// Non-premultiplied source-over in integer arithmetic, rounded half-up.
constexpr uint8_t blend_channel(uint8_t src, uint8_t dst, uint8_t alpha) {
    return uint8_t((uint32_t(src) * alpha + uint32_t(dst) * (255u - alpha) + 127u) / 255u);
}

// Applies plan.ops in order onto a copy of `frame`. The plan must answer this
// frame and every op region must lie inside it; violations throw BoundsError
// naming the op index.
Frame composite(const Frame& frame, const OverlayPlan& plan);

}  // namespace gtrm

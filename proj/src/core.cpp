#include "gtrm/core.hpp"

#include <algorithm>
#include <cmath>

#include "gtrm/glyphs.hpp"

namespace gtrm {

double region_iou(const Region& a, const Region& b) {
    uint32_t ix = std::max(a.x, b.x);
    uint32_t iy = std::max(a.y, b.y);
    uint32_t ir = std::min(a.right(), b.right());
    uint32_t ib = std::min(a.bottom(), b.bottom());
    if (ir <= ix || ib <= iy) return 0.0;
    double inter = double(ir - ix) * double(ib - iy);
    double uni = double(a.area()) + double(b.area()) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

bool regions_intersect(const Region& a, const Region& b) {
    return std::max(a.x, b.x) < std::min(a.right(), b.right()) &&
           std::max(a.y, b.y) < std::min(a.bottom(), b.bottom());
}

Rgba Frame::rgba_at(uint32_t x, uint32_t y) const {
    std::size_t idx = (std::size_t(y) * width + x) * bytes_per_pixel(format);
    if (format == PixelFormat::GRAY8) {
        uint8_t g = data[idx];
        return Rgba{g, g, g, 255};
    }
    return Rgba{data[idx], data[idx + 1], data[idx + 2], data[idx + 3]};
}

Frame make_frame(uint64_t id, uint64_t timestamp_us, uint32_t width, uint32_t height,
                 PixelFormat format, std::vector<uint8_t> data) {
    if (width == 0 || height == 0)
        throw DimensionError("frame dimensions must be positive");
    std::size_t want = std::size_t(width) * height * bytes_per_pixel(format);
    if (data.size() != want)
        throw DimensionError("frame buffer is " + std::to_string(data.size()) +
                             " bytes, expected " + std::to_string(want));
    return Frame{id, timestamp_us, width, height, format, std::move(data)};
}

OverlayOp make_fill_rect(const Region& r, Rgba color, int32_t z) {
    OverlayOp op;
    op.kind = OpKind::FillRect;
    op.z = z;
    op.region = r;
    op.color = color;
    return op;
}

OverlayOp make_patch(const Region& r, std::vector<uint8_t> rgba, int32_t z) {
    if (rgba.size() != r.area() * 4)
        throw DimensionError("patch payload is " + std::to_string(rgba.size()) +
                             " bytes, expected " + std::to_string(r.area() * 4));
    OverlayOp op;
    op.kind = OpKind::Patch;
    op.z = z;
    op.region = r;
    op.patch = std::move(rgba);
    return op;
}

OverlayOp make_veil(float alpha, Rgba color, int32_t z) {
    if (!(alpha >= 0.0f && alpha <= 1.0f))
        throw ConfigError("veil alpha must be in [0,1]");
    OverlayOp op;
    op.kind = OpKind::Veil;
    op.z = z;
    op.alpha = alpha;
    op.color = color;
    return op;
}

OverlayOp make_label(const Region& r, std::string text, Rgba color, int32_t z) {
    OverlayOp op;
    op.kind = OpKind::Label;
    op.z = z;
    op.region = r;
    op.text = std::move(text);
    op.color = color;
    return op;
}

namespace {

inline void blend_pixel(Frame& f, uint32_t x, uint32_t y, Rgba color, uint8_t alpha) {
    if (f.format == PixelFormat::GRAY8) {
        std::size_t idx = std::size_t(y) * f.width + x;
        f.data[idx] = blend_channel(color.luma(), f.data[idx], alpha);
        return;
    }
    std::size_t idx = (std::size_t(y) * f.width + x) * 4;
    f.data[idx + 0] = blend_channel(color.r, f.data[idx + 0], alpha);
    f.data[idx + 1] = blend_channel(color.g, f.data[idx + 1], alpha);
    f.data[idx + 2] = blend_channel(color.b, f.data[idx + 2], alpha);
    // source-over alpha
    f.data[idx + 3] = uint8_t(alpha + (uint32_t(f.data[idx + 3]) * (255u - alpha) + 127u) / 255u);
}

void apply_fill_rect(Frame& f, const OverlayOp& op) {
    for (uint32_t y = op.region.y; y < op.region.bottom(); ++y)
        for (uint32_t x = op.region.x; x < op.region.right(); ++x)
            blend_pixel(f, x, y, op.color, op.color.a);
}

void apply_patch(Frame& f, const OverlayOp& op) {
    const Region& r = op.region;
    for (uint32_t dy = 0; dy < r.h; ++dy) {
        for (uint32_t dx = 0; dx < r.w; ++dx) {
            const uint8_t* src = op.patch.data() + (std::size_t(dy) * r.w + dx) * 4;
            if (f.format == PixelFormat::GRAY8) {
                f.data[std::size_t(r.y + dy) * f.width + (r.x + dx)] =
                    luma601(src[0], src[1], src[2]);
            } else {
                std::size_t idx = (std::size_t(r.y + dy) * f.width + (r.x + dx)) * 4;
                std::copy(src, src + 4, f.data.begin() + idx);
            }
        }
    }
}

void apply_veil(Frame& f, const OverlayOp& op) {
    uint8_t a = uint8_t(std::lround(double(op.alpha) * 255.0));
    for (uint32_t y = 0; y < f.height; ++y)
        for (uint32_t x = 0; x < f.width; ++x)
            blend_pixel(f, x, y, op.color, a);
}

void apply_label(Frame& f, const OverlayOp& op) {
    const Region& r = op.region;
    // Largest integer glyph scale that fits the region height, then clip.
    uint32_t scale = std::max(1u, (r.h > 2 ? r.h - 2 : r.h) / uint32_t(glyphs::kHeight));
    uint32_t pen_x = r.x + 1;
    uint32_t pen_y = r.y + 1;
    for (char c : op.text) {
        for (int gy = 0; gy < glyphs::kHeight; ++gy) {
            for (int gx = 0; gx < glyphs::kWidth; ++gx) {
                if (!glyphs::glyph_pixel(c, gx, gy)) continue;
                for (uint32_t sy = 0; sy < scale; ++sy) {
                    for (uint32_t sx = 0; sx < scale; ++sx) {
                        uint32_t px = pen_x + uint32_t(gx) * scale + sx;
                        uint32_t py = pen_y + uint32_t(gy) * scale + sy;
                        if (px < r.right() && py < r.bottom())
                            blend_pixel(f, px, py, op.color, op.color.a);
                    }
                }
            }
        }
        pen_x += uint32_t(glyphs::kAdvance) * scale;
        if (pen_x >= r.right()) break;
    }
}

}  // namespace

Frame composite(const Frame& frame, const OverlayPlan& plan) {
    if (plan.frame_id != frame.id)
        throw Error("plan answers frame " + std::to_string(plan.frame_id) +
                    ", composited onto frame " + std::to_string(frame.id));
    Frame out = frame;
    for (std::size_t i = 0; i < plan.ops.size(); ++i) {
        const OverlayOp& op = plan.ops[i];
        if (op.kind != OpKind::Veil && !frame.contains(op.region))
            throw BoundsError("op " + std::to_string(i) + " region out of bounds");
        if (op.kind == OpKind::Patch && op.patch.size() != op.region.area() * 4)
            throw DimensionError("op " + std::to_string(i) + " patch payload is " +
                                 std::to_string(op.patch.size()) + " bytes, expected " +
                                 std::to_string(op.region.area() * 4));
        switch (op.kind) {
            case OpKind::FillRect: apply_fill_rect(out, op); break;
            case OpKind::Patch: apply_patch(out, op); break;
            case OpKind::Veil: apply_veil(out, op); break;
            case OpKind::Label: apply_label(out, op); break;
        }
    }
    return out;
}

}  // namespace gtrm

#include "gtrm/hooks.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <future>
#include <set>

#include "gtrm/errors.hpp"
#include "gtrm/glyphs.hpp"
#include "gtrm/image_io.hpp"

namespace gtrm::hooks {

namespace {

using imaging::GrayImage;

// --- binarization -------------------------------------------------------------

int otsu_threshold(const GrayImage& g) {
    std::array<uint64_t, 256> hist{};
    for (uint8_t v : g.data) ++hist[v];
    const double total = double(g.size());

    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += double(i) * double(hist[i]);

    double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
    int best_t = 0;
    for (int t = 0; t < 256; ++t) {
        w0 += double(hist[t]);
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += double(t) * double(hist[t]);
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (var > best_var) {  // first maximum wins
            best_var = var;
            best_t = t;
        }
    }
    return best_t;
}

// 0/1 ink map; ink is whichever side of the Otsu threshold is the minority,
// since UI text is sparse against its background.
std::vector<uint8_t> ink_map(const GrayImage& g) {
    const int t = otsu_threshold(g);
    std::vector<uint8_t> ink(g.size(), 0);
    std::size_t above = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        ink[i] = g.data[i] > t ? 1 : 0;
        above += ink[i];
    }
    if (above * 2 > g.size())
        for (auto& v : ink) v ^= 1;
    return ink;
}

// --- glyph templates -----------------------------------------------------------

struct GlyphTemplate {
    char ch;
    GrayImage bitmap;  // ink columns only, all 7 rows, values 0/255
};

const std::vector<GlyphTemplate>& glyph_templates() {
    static const std::vector<GlyphTemplate> table = [] {
        std::vector<GlyphTemplate> out;
        for (char ch : glyphs::charset()) {
            uint32_t c0 = glyphs::kWidth, c1 = 0;
            for (uint32_t gy = 0; gy < glyphs::kHeight; ++gy)
                for (uint32_t gx = 0; gx < glyphs::kWidth; ++gx)
                    if (glyphs::glyph_pixel(ch, gx, gy)) {
                        c0 = std::min(c0, gx);
                        c1 = std::max(c1, gx + 1);
                    }
            if (c0 >= c1) continue;  // space carries no ink
            GrayImage bm = imaging::make_gray(c1 - c0, glyphs::kHeight);
            for (uint32_t gy = 0; gy < glyphs::kHeight; ++gy)
                for (uint32_t gx = c0; gx < c1; ++gx)
                    bm.at(gx - c0, gy) = glyphs::glyph_pixel(ch, gx, gy) ? 255 : 0;
            out.push_back({ch, std::move(bm)});
        }
        return out;
    }();
    return table;
}

std::vector<OverlayOp> default_text_action(const Frame&, std::span<const TextBox> boxes) {
    std::vector<OverlayOp> ops;
    for (const TextBox& b : boxes)
        ops.push_back(make_fill_rect(b.region, Rgba{0, 0, 0, 255}));
    return ops;
}

std::vector<OverlayOp> default_detection_action(const Frame& frame,
                                                std::span<const Detection> dets) {
    std::vector<OverlayOp> ops;
    for (const Detection& d : dets) ops.push_back(imaging::inpaint_majority(frame, d.region));
    return ops;
}

}  // namespace

// --- masks ----------------------------------------------------------------------

Mask make_mask(std::string name, Frame image, MaskMode mode) {
    if (image.width < 4 || image.height < 4)
        throw ConfigError("mask '" + name + "' smaller than 4x4");
    imaging::GrayImage tmpl = imaging::to_gray(image);
    return Mask{std::move(name), std::move(image), std::move(tmpl), mode};
}

Mask load_mask(const std::filesystem::path& file, MaskMode mode) {
    return make_mask(file.stem().string(), io::read_image(file), mode);
}

std::vector<Mask> load_mask_dir(const std::filesystem::path& dir, MaskMode mode) {
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("mask directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Mask> masks;
    for (const auto& f : files) masks.push_back(load_mask(f, mode));
    if (masks.empty()) throw ConfigError("mask directory is empty: " + dir.string());
    return masks;
}

// --- built-in color-range detector -----------------------------------------------

ColorRangeDetector::ColorRangeDetector(std::string label, Rgba lo, Rgba hi,
                                       uint32_t min_area)
    : label_(std::move(label)), lo_(lo), hi_(hi), min_area_(min_area) {}

std::vector<Detection> ColorRangeDetector::infer(const Frame& frame) const {
    const uint32_t w = frame.width, h = frame.height;
    std::vector<uint8_t> in_range(std::size_t(w) * h, 0);
    for (uint32_t y = 0; y < h; ++y)
        for (uint32_t x = 0; x < w; ++x) {
            const Rgba p = frame.rgba_at(x, y);
            in_range[std::size_t(y) * w + x] =
                p.r >= lo_.r && p.r <= hi_.r && p.g >= lo_.g && p.g <= hi_.g &&
                p.b >= lo_.b && p.b <= hi_.b;
        }

    std::vector<Detection> dets;
    std::vector<uint8_t> seen(in_range.size(), 0);
    std::vector<std::size_t> stack;
    for (uint32_t y = 0; y < h; ++y) {
        for (uint32_t x = 0; x < w; ++x) {
            const std::size_t i0 = std::size_t(y) * w + x;
            if (!in_range[i0] || seen[i0]) continue;
            uint32_t minx = x, maxx = x, miny = y, maxy = y, area = 0;
            stack.assign(1, i0);
            seen[i0] = 1;
            while (!stack.empty()) {
                const std::size_t i = stack.back();
                stack.pop_back();
                const uint32_t cx = uint32_t(i % w), cy = uint32_t(i / w);
                ++area;
                minx = std::min(minx, cx);
                maxx = std::max(maxx, cx);
                miny = std::min(miny, cy);
                maxy = std::max(maxy, cy);
                const std::array<std::pair<int64_t, int64_t>, 4> nb{
                    {{int64_t(cx) - 1, int64_t(cy)},
                     {int64_t(cx) + 1, int64_t(cy)},
                     {int64_t(cx), int64_t(cy) - 1},
                     {int64_t(cx), int64_t(cy) + 1}}};
                for (const auto& [nx, ny] : nb) {
                    if (nx < 0 || ny < 0 || nx >= int64_t(w) || ny >= int64_t(h)) continue;
                    const std::size_t ni = std::size_t(ny) * w + std::size_t(nx);
                    if (in_range[ni] && !seen[ni]) {
                        seen[ni] = 1;
                        stack.push_back(ni);
                    }
                }
            }
            if (area < min_area_) continue;
            dets.push_back(Detection{Region{minx, miny, maxx - minx + 1, maxy - miny + 1},
                                     1.0, 1.0, label_});
        }
    }
    return dets;
}

// --- text detection ----------------------------------------------------------------

std::vector<Region> detect_text_regions(const imaging::GrayImage& gray) {
    const std::vector<uint8_t> ink = ink_map(gray);
    const uint32_t w = gray.width, h = gray.height;

    // 8-connected component bounding boxes over the ink map
    struct Box {
        uint32_t x0, y0, x1, y1;  // inclusive
        uint32_t width() const { return x1 - x0 + 1; }
        uint32_t height() const { return y1 - y0 + 1; }
    };
    std::vector<Box> boxes;
    std::vector<uint8_t> seen(ink.size(), 0);
    std::vector<std::size_t> stack;
    for (uint32_t y = 0; y < h; ++y) {
        for (uint32_t x = 0; x < w; ++x) {
            const std::size_t i0 = std::size_t(y) * w + x;
            if (!ink[i0] || seen[i0]) continue;
            Box b{x, y, x, y};
            stack.assign(1, i0);
            seen[i0] = 1;
            while (!stack.empty()) {
                const std::size_t i = stack.back();
                stack.pop_back();
                const uint32_t cx = uint32_t(i % w), cy = uint32_t(i / w);
                b.x0 = std::min(b.x0, cx);
                b.x1 = std::max(b.x1, cx);
                b.y0 = std::min(b.y0, cy);
                b.y1 = std::max(b.y1, cy);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int64_t nx = int64_t(cx) + dx, ny = int64_t(cy) + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const std::size_t ni = std::size_t(ny) * w + std::size_t(nx);
                        if (ink[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            stack.push_back(ni);
                        }
                    }
            }
            if (b.height() < 2 || b.height() > 64) continue;
            if (b.width() > 4 * b.height()) continue;
            boxes.push_back(b);
        }
    }

    std::sort(boxes.begin(), boxes.end(), [](const Box& a, const Box& b) {
        return std::tie(a.x0, a.y0, a.x1, a.y1) < std::tie(b.x0, b.y0, b.x1, b.y1);
    });

    // left-to-right merge into lines: >=60% vertical overlap (of the shorter
    // box), horizontal gap at most one glyph height (the taller of the two)
    std::vector<Box> lines;
    for (const Box& c : boxes) {
        bool merged = false;
        for (Box& l : lines) {
            const int64_t ov = int64_t(std::min(c.y1, l.y1)) - int64_t(std::max(c.y0, l.y0)) + 1;
            const uint32_t min_h = std::min(c.height(), l.height());
            if (ov * 10 < int64_t(min_h) * 6) continue;
            const int64_t gap = int64_t(c.x0) - int64_t(l.x1) - 1;
            if (gap > int64_t(std::max(c.height(), l.height()))) continue;
            l.x0 = std::min(l.x0, c.x0);
            l.x1 = std::max(l.x1, c.x1);
            l.y0 = std::min(l.y0, c.y0);
            l.y1 = std::max(l.y1, c.y1);
            merged = true;
            break;
        }
        if (!merged) lines.push_back(c);
    }

    std::sort(lines.begin(), lines.end(), [](const Box& a, const Box& b) {
        return std::tie(a.y0, a.x0) < std::tie(b.y0, b.x0);
    });
    std::vector<Region> out;
    out.reserve(lines.size());
    for (const Box& l : lines) out.push_back(Region{l.x0, l.y0, l.width(), l.height()});
    return out;
}

// --- text recognition -----------------------------------------------------------

TextBox recognize_text(const imaging::GrayImage& gray, const Region& line) {
    if (line.right() > gray.width || line.bottom() > gray.height)
        throw BoundsError("text line region out of bounds");
    if (line.w == 0 || line.h == 0) return TextBox{line, "", 0.0};

    const GrayImage crop = imaging::crop(gray, line);
    const std::vector<uint8_t> ink = ink_map(crop);

    std::vector<uint32_t> col_ink(crop.width, 0);
    for (uint32_t y = 0; y < crop.height; ++y)
        for (uint32_t x = 0; x < crop.width; ++x) col_ink[x] += ink[std::size_t(y) * crop.width + x];

    struct Cell {
        uint32_t x0, x1;  // [x0, x1)
    };
    std::vector<Cell> cells;
    for (uint32_t x = 0; x < crop.width;) {
        if (col_ink[x] == 0) {
            ++x;
            continue;
        }
        uint32_t x1 = x;
        while (x1 < crop.width && col_ink[x1] > 0) ++x1;
        cells.push_back({x, x1});
        x = x1;
    }
    if (cells.empty()) return TextBox{line, "", 0.0};

    // nominal glyph width at this line's scale: atlas glyphs are 5 wide, 7 tall
    const uint32_t glyph_w = std::max<uint32_t>(
        1, uint32_t(llround(double(crop.height) * glyphs::kWidth / glyphs::kHeight)));

    std::string text;
    double score_sum = 0.0;
    uint32_t prev_end = 0;
    bool first = true;
    for (const Cell& cell : cells) {
        if (!first && cell.x0 - prev_end > glyph_w) text.push_back(' ');
        first = false;
        prev_end = cell.x1;

        GrayImage cell_img = imaging::make_gray(cell.x1 - cell.x0, crop.height);
        for (uint32_t y = 0; y < crop.height; ++y)
            for (uint32_t x = cell.x0; x < cell.x1; ++x)
                cell_img.at(x - cell.x0, y) = ink[std::size_t(y) * crop.width + x] ? 255 : 0;

        char best_ch = '?';
        double best = -1.0;
        for (const GlyphTemplate& g : glyph_templates()) {
            const GrayImage resized =
                imaging::resize_to(g.bitmap, cell_img.width, cell_img.height);
            const double s = imaging::ncc_match(cell_img, resized).at(0, 0);
            if (s > best) {
                best = s;
                best_ch = g.ch;
            }
        }
        if (best < kGlyphScoreFloor) {
            text.push_back('?');  // contributes 0 to confidence
        } else {
            text.push_back(best_ch);
            score_sum += best;
        }
    }

    const double confidence = cells.empty() ? 0.0 : score_sum / double(cells.size());
    return TextBox{line, std::move(text), confidence};
}

// --- hook runners ------------------------------------------------------------------

namespace {

HookResult text_hook_impl(const Frame& frame, const TextClassifier& classifier,
                          double threshold, const TextAction& action) {
    if (!(threshold >= 0.0 && std::isfinite(threshold)))
        throw ConfigError("text threshold must be a finite non-negative value");
    const imaging::GrayImage gray = imaging::to_gray(frame);
    HookResult res;
    std::vector<TextBox> flagged;
    for (const Region& r : detect_text_regions(gray)) {
        TextBox box = recognize_text(gray, r);
        if (classifier(box.text) >= threshold) flagged.push_back(std::move(box));
    }
    res.ops = action ? action(frame, flagged) : default_text_action(frame, flagged);
    res.text_boxes = std::move(flagged);
    return res;
}

}  // namespace

std::vector<OverlayOp> run_text_hook(const Frame& frame, const TextClassifier& classifier,
                                     double threshold, const TextAction& action) {
    return text_hook_impl(frame, classifier, threshold, action).ops;
}

std::vector<OverlayOp> run_mask_hook(const Frame& frame, std::span<const Mask> masks,
                                     const imaging::MatchConfig& cfg,
                                     const DetectionAction& action) {
    if (masks.empty()) throw ConfigError("mask hook needs at least one mask");
    const imaging::GrayImage gray = imaging::to_gray(frame);

    std::vector<Detection> dets;
    for (MaskMode mode : {MaskMode::Color, MaskMode::Contour}) {
        std::vector<imaging::GrayImage> tmpls;
        std::vector<std::string> labels;
        for (const Mask& m : masks)
            if (m.mode == mode) {
                tmpls.push_back(m.tmpl);
                labels.push_back(m.name);
            }
        if (tmpls.empty()) continue;
        imaging::MatchConfig mcfg = cfg;
        mcfg.mode = mode == MaskMode::Color ? imaging::MatchMode::Color
                                            : imaging::MatchMode::Contour;
        for (Detection& d : imaging::match_multiscale(gray, tmpls, mcfg, labels))
            dets.push_back(std::move(d));
    }
    return action ? action(frame, dets) : default_detection_action(frame, dets);
}

std::vector<OverlayOp> run_model_hook(const Frame& frame, const DetectorModel& model,
                                      const DetectionAction& action) {
    const std::vector<Detection> dets = model.infer(frame);
    return action ? action(frame, dets) : default_detection_action(frame, dets);
}

// --- bindings ------------------------------------------------------------------------

HookBinding make_text_binding(std::string name, TextClassifier classifier,
                              double threshold, TextAction action) {
    if (!classifier) throw ConfigError("text binding needs a classifier");
    HookBinding b;
    b.kind = HookKind::Text;
    b.name = std::move(name);
    b.run = [classifier = std::move(classifier), threshold,
             action = std::move(action)](const Frame& frame) {
        return text_hook_impl(frame, classifier, threshold, action);
    };
    return b;
}

HookBinding make_mask_binding(std::string name, std::vector<Mask> masks,
                              imaging::MatchConfig cfg, DetectionAction action) {
    if (masks.empty()) throw ConfigError("mask binding needs at least one mask");
    imaging::validate(cfg);
    HookBinding b;
    b.kind = HookKind::Mask;
    b.name = std::move(name);
    b.run = [masks = std::move(masks), cfg = std::move(cfg),
             action = std::move(action)](const Frame& frame) {
        HookResult res;
        res.ops = run_mask_hook(frame, masks, cfg, action);
        return res;
    };
    return b;
}

HookBinding make_model_binding(std::string name,
                               std::shared_ptr<const DetectorModel> model,
                               DetectionAction action) {
    if (!model) throw ConfigError("model binding needs a model");
    HookBinding b;
    b.kind = HookKind::Model;
    b.name = std::move(name);
    b.run = [model = std::move(model), action = std::move(action)](const Frame& frame) {
        HookResult res;
        res.ops = run_model_hook(frame, *model, action);
        return res;
    };
    return b;
}

// --- pipeline -------------------------------------------------------------------------

PipelineResult run_pipeline(const Frame& frame, std::span<const HookBinding> bindings) {
    std::vector<const HookBinding*> active;
    std::set<int> indices;
    for (const HookBinding& b : bindings) {
        if (!indices.insert(b.registration_index).second)
            throw ConfigError("duplicate hook registration index " +
                              std::to_string(b.registration_index));
        if (b.enabled) active.push_back(&b);
    }
    std::sort(active.begin(), active.end(),
              [](const HookBinding* a, const HookBinding* b) {
                  return a->registration_index < b->registration_index;
              });

    struct Timed {
        HookResult result;
        uint64_t elapsed_us = 0;
        std::string error;
        bool failed = false;
    };
    std::vector<std::future<Timed>> futures;
    futures.reserve(active.size());
    for (const HookBinding* b : active) {
        futures.push_back(std::async(std::launch::async, [b, &frame] {
            Timed t;
            const auto start = std::chrono::steady_clock::now();
            try {
                t.result = b->run(frame);
            } catch (const std::exception& e) {
                t.failed = true;
                t.error = e.what();
            }
            t.elapsed_us = uint64_t(std::chrono::duration_cast<std::chrono::microseconds>(
                                        std::chrono::steady_clock::now() - start)
                                        .count());
            return t;
        }));
    }

    PipelineResult out;
    out.plan.frame_id = frame.id;
    out.record.frame_id = frame.id;
    for (std::size_t i = 0; i < futures.size(); ++i) {
        Timed t = futures[i].get();
        const HookBinding* b = active[i];
        out.record.per_hook_us[b->name] = t.elapsed_us;
        if (!t.failed) {
            for (const OverlayOp& op : t.result.ops) {
                if (op.kind != OpKind::Veil && !frame.contains(op.region)) {
                    t.failed = true;
                    t.error = "emitted an out-of-bounds op";
                    break;
                }
            }
        }
        if (t.failed) {
            out.record.skipped_hooks[b->name] = t.error;
            continue;
        }
        for (OverlayOp& op : t.result.ops) out.plan.ops.push_back(std::move(op));
        for (TextBox& tb : t.result.text_boxes) out.text_boxes.push_back(std::move(tb));
    }

    // stable sort keeps registration/emission order inside each z band
    std::stable_sort(out.plan.ops.begin(), out.plan.ops.end(),
                     [](const OverlayOp& a, const OverlayOp& b) { return a.z < b.z; });
    return out;
}

}  // namespace gtrm::hooks

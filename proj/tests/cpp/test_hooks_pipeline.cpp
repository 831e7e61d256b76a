#include "doctest.h"

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "gtrm/corpus.hpp"
#include "gtrm/hooks.hpp"
#include "gtrm/imaging.hpp"

using namespace gtrm;
using namespace gtrm::hooks;

namespace {

Frame test_frame(uint32_t w = 64, uint32_t h = 64) {
    std::vector<uint8_t> px(std::size_t(w) * h * 4);
    for (uint32_t y = 0; y < h; ++y)
        for (uint32_t x = 0; x < w; ++x) {
            uint8_t* p = &px[(std::size_t(y) * w + x) * 4];
            p[0] = uint8_t(x * 3);
            p[1] = uint8_t(y * 3);
            p[2] = 99;
            p[3] = 255;
        }
    return make_frame(42, 1000, w, h, PixelFormat::RGBA8, std::move(px));
}

HookBinding raw_binding(std::string name, int index, HookResult (*fn)(const Frame&)) {
    HookBinding b;
    b.kind = HookKind::Model;
    b.name = std::move(name);
    b.registration_index = index;
    b.run = fn;
    return b;
}

OverlayOp fill_at(uint32_t x, uint32_t y, int32_t z) {
    OverlayOp op = make_fill_rect(Region{x, y, 4, 4}, Rgba{10, 20, 30, 255});
    op.z = z;
    return op;
}

}  // namespace

TEST_CASE("run_pipeline with no bindings returns an empty plan") {
    Frame f = test_frame();
    PipelineResult r = run_pipeline(f, {});
    CHECK(r.plan.frame_id == 42);
    CHECK(r.plan.ops.empty());
    CHECK(r.record.frame_id == 42);
    CHECK(r.record.per_hook_us.empty());
    CHECK(r.record.skipped_hooks.empty());
    CHECK(r.text_boxes.empty());
}

TEST_CASE("ops come back sorted by z, then registration, then emission order") {
    std::vector<HookBinding> bindings;
    bindings.push_back(raw_binding("second", 1, [](const Frame&) {
        HookResult r;
        r.ops.push_back(fill_at(0, 0, kZVeil));      // high z, registered later... no
        r.ops.push_back(fill_at(8, 0, kZPatch));     // low z
        r.ops.push_back(fill_at(16, 0, kZPatch));    // same z, emitted after
        return r;
    }));
    bindings.push_back(raw_binding("third", 2, [](const Frame&) {
        HookResult r;
        r.ops.push_back(fill_at(24, 0, kZPatch));
        return r;
    }));
    // registration_index 0 sorts before 1 at equal z even though it's listed last
    bindings.push_back(raw_binding("first", 0, [](const Frame&) {
        HookResult r;
        r.ops.push_back(fill_at(32, 0, kZPatch));
        return r;
    }));

    Frame f = test_frame();
    PipelineResult r = run_pipeline(f, bindings);
    REQUIRE(r.plan.ops.size() == 5);
    // expected order: first(32), second(8), second(16), third(24) at kZPatch,
    // then second's veil-z op
    CHECK(r.plan.ops[0].region.x == 32);
    CHECK(r.plan.ops[1].region.x == 8);
    CHECK(r.plan.ops[2].region.x == 16);
    CHECK(r.plan.ops[3].region.x == 24);
    CHECK(r.plan.ops[4].region.x == 0);
    CHECK(r.plan.ops[4].z == kZVeil);
    CHECK(r.record.per_hook_us.size() == 3);
    CHECK(r.record.per_hook_us.count("first") == 1);
}

TEST_CASE("every hook sees the original frame, not other hooks' output") {
    // hook A covers (0,0); hook B reports what it read there
    static std::atomic<uint32_t> seen_r{0};
    std::vector<HookBinding> bindings;
    bindings.push_back(raw_binding("painter", 0, [](const Frame&) {
        HookResult r;
        r.ops.push_back(make_fill_rect(Region{0, 0, 8, 8}, Rgba{1, 1, 1, 255}));
        return r;
    }));
    bindings.push_back(raw_binding("witness", 1, [](const Frame& f) {
        seen_r = f.rgba_at(0, 0).r;
        return HookResult{};
    }));
    Frame f = test_frame();
    const uint8_t original = f.rgba_at(0, 0).r;
    run_pipeline(f, bindings);
    CHECK(seen_r.load() == original);
}

TEST_CASE("a throwing hook is skipped and recorded; the rest still run") {
    std::vector<HookBinding> bindings;
    bindings.push_back(raw_binding("bad", 0, [](const Frame&) -> HookResult {
        throw std::runtime_error("model fell over");
    }));
    bindings.push_back(raw_binding("good", 1, [](const Frame&) {
        HookResult r;
        r.ops.push_back(fill_at(4, 4, kZFillRect));
        return r;
    }));
    Frame f = test_frame();
    PipelineResult r = run_pipeline(f, bindings);
    REQUIRE(r.plan.ops.size() == 1);
    CHECK(r.plan.ops[0].region.x == 4);
    REQUIRE(r.record.skipped_hooks.count("bad") == 1);
    CHECK(r.record.skipped_hooks.at("bad") == "model fell over");
    CHECK(r.record.per_hook_us.count("good") == 1);
    // the failed hook still reports how long it ran before throwing
    CHECK(r.record.per_hook_us.count("bad") == 1);
}

TEST_CASE("disabled bindings behave exactly like absent ones") {
    auto emitter = raw_binding("emitter", 0, [](const Frame&) {
        HookResult r;
        r.ops.push_back(fill_at(0, 0, kZFillRect));
        return r;
    });
    Frame f = test_frame();

    std::vector<HookBinding> with{emitter};
    auto disabled = emitter;
    disabled.enabled = false;
    std::vector<HookBinding> off{disabled};

    PipelineResult a = run_pipeline(f, off);
    PipelineResult b = run_pipeline(f, {});
    CHECK(a.plan.ops.empty());
    CHECK(a.record.per_hook_us.empty());
    CHECK(b.plan.ops.empty());
    CHECK(run_pipeline(f, with).plan.ops.size() == 1);
}

TEST_CASE("text bindings flow recognized boxes into the result") {
    Frame f = test_frame(360, 100);
    // repaint a light background so the line is legible
    for (std::size_t i = 0; i < f.data.size(); i += 4) {
        f.data[i] = f.data[i + 1] = f.data[i + 2] = 240;
    }
    corpus::draw_text(f, 10, 30, "PURE FILTH HERE", 2, Rgba{15, 15, 15, 255});

    auto classifier = [](const std::string& line) {
        return line.find("FILTH") != std::string::npos ? 1.0 : 0.0;
    };
    std::vector<HookBinding> bindings;
    bindings.push_back(make_text_binding("hate", classifier, 0.5));
    PipelineResult r = run_pipeline(f, bindings);
    REQUIRE(r.plan.ops.size() == 1);
    CHECK(r.plan.ops[0].kind == OpKind::FillRect);
    REQUIRE(r.text_boxes.size() == 1);
    CHECK(r.text_boxes[0].text == "PURE FILTH HERE");

    // a classifier that never fires leaves no boxes behind
    std::vector<HookBinding> quiet;
    quiet.push_back(make_text_binding("hate", [](const std::string&) { return 0.0; }, 0.5));
    PipelineResult q = run_pipeline(f, quiet);
    CHECK(q.plan.ops.empty());
    CHECK(q.text_boxes.empty());
}

TEST_CASE("mask and model bindings emit bound-valid ops on the right frames") {
    // frame with a planted stories bar and a color-range target
    corpus::ScreenSpec spec;
    spec.name = "pipe";
    spec.seed = 31337;
    spec.layout = corpus::Layout::Feed;
    spec.width = 400;
    spec.height = 640;
    corpus::ElementSpec bar;
    bar.kind = corpus::ElementKind::StoriesBar;
    bar.x = 20;
    bar.y = 40;
    bar.rung = 8;
    spec.elements.push_back(bar);
    corpus::ElementSpec patch;
    patch.kind = corpus::ElementKind::ColorPatch;
    patch.x = 60;
    patch.y = 300;
    patch.w = 40;
    patch.h = 24;
    patch.color = Rgba{0xc8, 0x1e, 0x3c, 255};
    spec.elements.push_back(patch);
    corpus::Screen screen = corpus::generate_screen(spec);

    std::vector<Mask> masks;
    masks.push_back(make_mask("stories_bar",
                              corpus::element_base(corpus::ElementKind::StoriesBar),
                              MaskMode::Contour));
    auto model = std::make_shared<ColorRangeDetector>(
        "crimson", Rgba{0xbe, 0x14, 0x32, 255}, Rgba{0xd2, 0x28, 0x46, 255}, 16);

    std::vector<HookBinding> bindings;
    bindings.push_back(make_mask_binding(
        "occlude", std::move(masks), imaging::default_match_config(imaging::MatchMode::Contour)));
    bindings.back().registration_index = 0;
    bindings.push_back(make_model_binding("moderate", model));
    bindings.back().registration_index = 1;

    PipelineResult r = run_pipeline(screen.frame, bindings);
    CHECK(r.record.skipped_hooks.empty());
    REQUIRE(!r.plan.ops.empty());
    bool covered_bar = false, covered_patch = false;
    for (const auto& op : r.plan.ops) {
        CHECK(screen.frame.contains(op.region));
        if (region_iou(op.region, corpus::element_rect(bar)) >= 0.5) covered_bar = true;
        if (region_iou(op.region, corpus::element_rect(patch)) >= 0.5) covered_patch = true;
    }
    CHECK(covered_bar);
    CHECK(covered_patch);
    // compositing the emitted plan must succeed and change the planted areas
    Frame out = composite(screen.frame, r.plan);
    CHECK(out.data != screen.frame.data);
}

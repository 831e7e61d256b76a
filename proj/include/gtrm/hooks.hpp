#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gtrm/core.hpp"
#include "gtrm/imaging.hpp"

namespace gtrm::hooks {

struct TextBox {
    Region region;
    std::string text;
    double confidence = 0.0;  // mean per-glyph match score, 0 when empty
};

enum class MaskMode { Color, Contour };

// A cropped screenshot of a UI element used as a matching template.
struct Mask {
    std::string name;
    Frame image;               // original crop, kept for COLOR-mode reference
    imaging::GrayImage tmpl;   // gray template matching actually runs on
    MaskMode mode = MaskMode::Color;
};

// Validates the template is at least 4x4.
Mask make_mask(std::string name, Frame image, MaskMode mode);
Mask load_mask(const std::filesystem::path& file, MaskMode mode);
// All raster files in the directory, sorted by filename. Empty dir → ConfigError.
std::vector<Mask> load_mask_dir(const std::filesystem::path& dir, MaskMode mode);

// Pluggable detector interface; inference must be deterministic per instance.
class DetectorModel {
public:
    virtual ~DetectorModel() = default;
    virtual std::string name() const = 0;
    virtual std::vector<Detection> infer(const Frame& frame) const = 0;
};

// Built-in deterministic stand-in detector: bounding boxes of 4-connected
// components of pixels inside an inclusive RGB range.
class ColorRangeDetector final : public DetectorModel {
public:
    ColorRangeDetector(std::string label, Rgba lo, Rgba hi, uint32_t min_area = 16);
    std::string name() const override { return label_; }
    std::vector<Detection> infer(const Frame& frame) const override;

private:
    std::string label_;
    Rgba lo_, hi_;
    uint32_t min_area_;
};

enum class HookKind { Text, Mask, Model };

struct HookResult {
    std::vector<OverlayOp> ops;
    std::vector<TextBox> text_boxes;  // populated by text hooks only
};

struct HookBinding {
    HookKind kind = HookKind::Text;
    std::string name;
    int registration_index = 0;  // unique per pipeline
    bool enabled = true;
    std::function<HookResult(const Frame&)> run;
};

using TextClassifier = std::function<double(const std::string&)>;
using TextAction =
    std::function<std::vector<OverlayOp>(const Frame&, std::span<const TextBox>)>;
using DetectionAction =
    std::function<std::vector<OverlayOp>(const Frame&, std::span<const Detection>)>;

// Otsu binarization (ink = minority side), 8-connected components sized like
// glyphs (2 <= h <= 64, aspect <= 4), merged left-to-right into lines when
// vertical extents overlap >= 60% and horizontal gaps stay within one glyph
// height. Lines come back sorted top-to-bottom, then left-to-right.
std::vector<Region> detect_text_regions(const imaging::GrayImage& gray);

// Vertical-projection glyph segmentation + exact-scaled NCC against the glyph
// atlas. Cells scoring below the recognition floor come back as '?' with zero
// confidence contribution; gaps wider than one glyph width emit a space.
TextBox recognize_text(const imaging::GrayImage& gray, const Region& line);

inline constexpr double kGlyphScoreFloor = 0.75;

// Detection templates. Default actions: text → opaque black FILL_RECT per
// flagged line; mask/model → majority-inpaint PATCH per detection.
std::vector<OverlayOp> run_text_hook(const Frame& frame, const TextClassifier& classifier,
                                     double threshold, const TextAction& action = {});
std::vector<OverlayOp> run_mask_hook(const Frame& frame, std::span<const Mask> masks,
                                     const imaging::MatchConfig& cfg,
                                     const DetectionAction& action = {});
std::vector<OverlayOp> run_model_hook(const Frame& frame, const DetectorModel& model,
                                      const DetectionAction& action = {});

HookBinding make_text_binding(std::string name, TextClassifier classifier,
                              double threshold, TextAction action = {});
HookBinding make_mask_binding(std::string name, std::vector<Mask> masks,
                              imaging::MatchConfig cfg, DetectionAction action = {});
HookBinding make_model_binding(std::string name,
                               std::shared_ptr<const DetectorModel> model,
                               DetectionAction action = {});

struct PipelineResult {
    OverlayPlan plan;
    LatencyRecord record;
    std::vector<TextBox> text_boxes;  // current frame's recognized flagged text
};

// Evaluates enabled bindings (concurrently), concatenates ops in registration
// order and sorts them by (z, registration, emission). A hook that throws is
// recorded in record.skipped_hooks and the frame proceeds without it.
PipelineResult run_pipeline(const Frame& frame, std::span<const HookBinding> bindings);

// Per-stream accumulator owned by the sequential session loop; hooks only ever
// see immutable snapshots of the frames themselves.
struct SessionState {
    std::optional<Frame> prev_frame;
    std::vector<TextBox> last_text_boxes;
    std::vector<LatencyRecord> records;
    uint64_t frames_seen = 0;
};

}  // namespace gtrm::hooks

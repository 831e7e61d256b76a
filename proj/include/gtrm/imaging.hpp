#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gtrm/core.hpp"

namespace gtrm::imaging {

// Single-channel working image for matching and contour work.
struct GrayImage {
    uint32_t width = 0, height = 0;
    std::vector<uint8_t> data;  // row-major, one byte per pixel

    uint8_t at(uint32_t x, uint32_t y) const { return data[std::size_t(y) * width + x]; }
    uint8_t& at(uint32_t x, uint32_t y) { return data[std::size_t(y) * width + x]; }
    std::size_t size() const { return data.size(); }
    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

GrayImage make_gray(uint32_t width, uint32_t height, uint8_t fill = 0);
GrayImage make_gray(uint32_t width, uint32_t height, std::vector<uint8_t> data);
GrayImage crop(const GrayImage& img, const Region& r);

struct Point {
    int32_t x = 0, y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

struct Contour {
    std::vector<Point> points;  // closed walk, successive points 8-adjacent
    bool hole = false;
};

struct ContourSet {
    std::vector<Contour> contours;
    std::size_t outer_count() const;
    std::size_t hole_count() const;
};

enum class MatchMode { Color, Contour };

struct MatchConfig {
    std::vector<double> scales;  // strictly increasing, all > 0
    double score_threshold = 0.8;
    MatchMode mode = MatchMode::Color;
    double nms_iou = 0.3;
};

// Rung k of the default geometric scale ladder: 0.5 * 1.1^k, computed by
// iterated multiplication so every caller sees bit-identical doubles.
double ladder_scale(int rung);
inline constexpr int kLadderRungs = 15;

// Geometric scale ladder 0.5 .. ~1.9 in steps of x1.1 (15 scales),
// threshold 0.8, IoU 0.3.
MatchConfig default_match_config(MatchMode mode = MatchMode::Color);
void validate(const MatchConfig& cfg);

// Per-placement score grid produced by ncc_match; width/height are the
// number of valid template placements along each axis.
struct ScoreMap {
    uint32_t width = 0, height = 0;
    std::vector<double> scores;

    double at(uint32_t x, uint32_t y) const { return scores[std::size_t(y) * width + x]; }
    // Position of the maximum score (first occurrence in row-major order).
    std::pair<uint32_t, uint32_t> argmax() const;
};

// BT.601 integer luma for RGBA frames, identity for GRAY8.
GrayImage to_gray(const Frame& frame);

// Nearest-neighbor resample. Output dims are floor(dim * scale), min 1.
GrayImage resize_nearest(const GrayImage& img, double scale);
// Nearest-neighbor resample to explicit dimensions.
GrayImage resize_to(const GrayImage& img, uint32_t w, uint32_t h);

// Zero-normalized cross-correlation of every valid template placement,
// mapped from [-1,1] to [0,1]. Zero-variance placements score 0.5 when the
// window and template means agree within one gray level, 0 otherwise.
// Throws DimensionError when the template exceeds the image.
ScoreMap ncc_match(const GrayImage& image, const GrayImage& tmpl);

namespace detail {
// Both paths compute the same exact integer cross terms; Auto picks by cost.
// Exposed so tests can pin Direct and Fft against each other.
enum class NccPath { Auto, Direct, Fft };
ScoreMap ncc_match_path(const GrayImage& image, const GrayImage& tmpl, NccPath path);
}  // namespace detail

// Multi-scale multi-template matching: each template is resized to every
// configured scale, matched (on contourized edge maps in Contour mode),
// thresholded, and the pooled candidates reduced by greedy non-max
// suppression. Labels parallel `templates`; missing labels fall back to the
// template index.
std::vector<Detection> match_multiscale(const GrayImage& image,
                                        std::span<const GrayImage> templates,
                                        const MatchConfig& cfg,
                                        std::span<const std::string> labels = {});

// Binarize at `threshold` (pixel > threshold is foreground) and keep only
// boundary pixels of foreground components (value 255, others 0).
GrayImage contourize(const GrayImage& img, uint8_t threshold);

// Border following over a 0/255 binary image: one outer contour per
// 8-connected foreground component, one contour per hole. Outer walks are
// clockwise in screen coordinates (y down), hole walks counter-clockwise.
ContourSet trace_contours(const GrayImage& binary);

// 8x8 mean-threshold perceptual hash; bit r*8+c (LSB first) is set when the
// reduced pixel exceeds the mean.
uint64_t average_hash(const GrayImage& img);

int hamming_distance(uint64_t a, uint64_t b);

// PATCH op filling `region` with the modal color of the rest of the frame
// (ties broken by lowest packed RGBA). The region itself does not vote.
// Throws DegenerateInputError when the region covers the whole frame.
OverlayOp inpaint_majority(const Frame& frame, const Region& region);

// PATCH op filling `region` by fast-marching inpainting: pixels are filled
// in ascending distance from the region boundary, each as a weighted average
// of known neighbors within `radius` (directional x distance x level-set
// weights).
OverlayOp inpaint_fmm(const Frame& frame, const Region& region, uint32_t radius);

inline constexpr uint32_t kScrollStripHeight = 32;
inline constexpr uint32_t kScrollSearchWindow = 120;
inline constexpr double kScrollMinScore = 0.85;
inline constexpr int kScrollMaxHashDistance = 10;

// Median vertical displacement of horizontal strips of `prev` relocated in
// `cur`. Positive means content moved up (a forward scroll). Returns nullopt
// when fewer than 3 strips match confidently or the median is zero.
std::optional<int32_t> detect_scroll(const Frame& prev, const Frame& cur,
                                     uint32_t strip_height = kScrollStripHeight,
                                     uint32_t search_window = kScrollSearchWindow,
                                     double min_score = kScrollMinScore);

}  // namespace gtrm::imaging

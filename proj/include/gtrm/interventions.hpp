#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "gtrm/core.hpp"
#include "gtrm/hooks.hpp"

namespace gtrm::interventions {

// Term-weight list standing in for a learned text classifier. A line's score
// is the maximum weight among its lowercase tokens (0 when none match), so a
// single strong term is enough to cross a threshold.
struct Lexicon {
    std::map<std::string, double> entries;  // lowercase term -> weight in (0,1]
};

Lexicon make_lexicon(std::map<std::string, double> entries);
// One `term weight` pair per line; '#' starts a comment; blank lines ignored.
Lexicon load_lexicon(const std::filesystem::path& file);
double lexicon_score(const Lexicon& lexicon, const std::string& text);

enum class InpaintMethod { Majority, Fmm };
enum class ModerationStyle { Box, Patch };

inline constexpr uint32_t kDefaultFmmRadius = 5;

// Element occlusion: contour-mode mask matching (color-independent), detected
// elements replaced by inpaint patches.
hooks::HookBinding occlude_elements(const std::filesystem::path& masks_dir,
                                    InpaintMethod method = InpaintMethod::Majority);

// Demetrification: color-mode mask matching for engagement-counter bars.
hooks::HookBinding demetrify(const std::filesystem::path& masks_dir,
                             InpaintMethod method = InpaintMethod::Majority);

// Text filtering: lines whose lexicon score reaches `threshold` are blacked out.
hooks::HookBinding hate_filter(Lexicon lexicon, double threshold);

// Media moderation behind any DetectorModel; BOX draws opaque rectangles,
// PATCH inpaints the detection away.
hooks::HookBinding moderate_media(std::shared_ptr<const hooks::DetectorModel> detector,
                                  ModerationStyle style);

struct UsageLockConfig {
    uint32_t s0 = 10;          // events where the veil starts
    uint32_t s1 = 30;          // events where the veil saturates
    double max_alpha = 0.9;
    uint32_t event_px = 0;     // pixels per scroll event; 0 = one frame height

    friend bool operator==(const UsageLockConfig&, const UsageLockConfig&) = default;
};

struct UsageLockState {
    UsageLockConfig cfg;
    uint64_t scroll_events = 0;
    uint64_t accumulated_px = 0;
};

void validate(const UsageLockConfig& cfg);
double usage_lock_alpha(const UsageLockState& state);

// Sequential per-session step: detect scrolling between consecutive frames,
// accumulate |displacement|, quantize into events, and emit a darkening veil
// once the event count passes the ramp start.
std::pair<UsageLockState, std::optional<OverlayOp>> usage_lock_update(
    const UsageLockState& state, const Frame& prev, const Frame& cur);

}  // namespace gtrm::interventions

#pragma once

// Declarative pipeline configuration: a sectioned key/value text file with a
// schema tag.  Loading normalizes values; emitting a loaded config is a fixed
// point, which keeps experiment configs diffable.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gtrm/hooks.hpp"
#include "gtrm/interventions.hpp"

namespace gtrm::config {

// One [intervention <name>] section.  `kind` selects which of the remaining
// fields apply; unused fields keep their defaults and are not emitted.
struct InterventionSpec {
    std::string name;
    std::string kind;  // occlude | demetrify | hate_filter | moderate_media | usage_lock

    std::filesystem::path masks;    // occlude, demetrify
    std::string inpaint;            // "" = inherit [pipeline] inpaint

    std::filesystem::path lexicon;  // hate_filter
    double threshold = 0.6;

    std::string label = "flagged";  // moderate_media (color_range detector)
    Rgba lo{0, 0, 0, 255};
    Rgba hi{255, 255, 255, 255};
    uint32_t min_area = 16;
    std::string style = "box";      // box | patch

    interventions::UsageLockConfig lock;  // usage_lock

    friend bool operator==(const InterventionSpec&, const InterventionSpec&) = default;
};

struct PipelineConfig {
    int schema = 1;
    std::string inpaint = "majority";  // majority | fmm
    std::vector<InterventionSpec> interventions;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

PipelineConfig parse_config(std::string_view body);
PipelineConfig load_config(const std::filesystem::path& path);
std::string emit_config(const PipelineConfig& cfg);

// Instantiated pipeline: bindings in section order (registration indices
// 0..n-1) plus the optional sequential usage-lock stage.
struct BuiltPipeline {
    std::vector<hooks::HookBinding> bindings;
    bool usage_lock = false;
    interventions::UsageLockConfig lock;
};

// Resolves relative paths against `base_dir` (usually the config file's
// directory) and checks that referenced files exist.  Throws ConfigError.
BuiltPipeline build_pipeline(const PipelineConfig& cfg,
                             const std::filesystem::path& base_dir);

}  // namespace gtrm::config

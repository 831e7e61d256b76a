#include "gtrm/interventions.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gtrm/errors.hpp"
#include "gtrm/imaging.hpp"

namespace gtrm::interventions {

namespace {

void validate_lexicon(const Lexicon& lex) {
    if (lex.entries.empty()) throw ConfigError("lexicon is empty");
    for (const auto& [term, weight] : lex.entries) {
        if (term.empty()) throw ConfigError("lexicon contains an empty term");
        for (char c : term)
            if (std::isspace(static_cast<unsigned char>(c)) ||
                std::isupper(static_cast<unsigned char>(c)))
                throw ConfigError("lexicon term must be lowercase without whitespace: '" +
                                  term + "'");
        if (!(weight > 0.0 && weight <= 1.0))
            throw ConfigError("lexicon weight out of (0,1] for term '" + term + "'");
    }
}

hooks::DetectionAction inpaint_action(InpaintMethod method) {
    return [method](const Frame& frame, std::span<const Detection> dets) {
        std::vector<OverlayOp> ops;
        for (const Detection& d : dets)
            ops.push_back(method == InpaintMethod::Fmm
                              ? imaging::inpaint_fmm(frame, d.region, kDefaultFmmRadius)
                              : imaging::inpaint_majority(frame, d.region));
        return ops;
    };
}

}  // namespace

Lexicon make_lexicon(std::map<std::string, double> entries) {
    Lexicon lex{std::move(entries)};
    validate_lexicon(lex);
    return lex;
}

Lexicon load_lexicon(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open lexicon: " + file.string());
    Lexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::string term;
        if (!(ls >> term)) continue;  // blank or comment-only line
        double weight;
        std::string extra;
        if (!(ls >> weight) || (ls >> extra)) {
            throw ConfigError(file.string() + ":" + std::to_string(lineno) +
                              ": expected 'term weight'");
        }
        for (char& c : term) c = char(std::tolower(static_cast<unsigned char>(c)));
        lex.entries[term] = weight;
    }
    validate_lexicon(lex);
    return lex;
}

double lexicon_score(const Lexicon& lexicon, const std::string& text) {
    double best = 0.0;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        if (auto it = lexicon.entries.find(token); it != lexicon.entries.end())
            best = std::max(best, it->second);
        token.clear();
    };
    for (char c : text) {
        const unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u))
            token.push_back(char(std::tolower(u)));
        else
            flush();
    }
    flush();
    return best;
}

hooks::HookBinding occlude_elements(const std::filesystem::path& masks_dir,
                                    InpaintMethod method) {
    auto masks = hooks::load_mask_dir(masks_dir, hooks::MaskMode::Contour);
    auto cfg = imaging::default_match_config(imaging::MatchMode::Contour);
    auto b = hooks::make_mask_binding("occlude_elements", std::move(masks), std::move(cfg),
                                      inpaint_action(method));
    return b;
}

hooks::HookBinding demetrify(const std::filesystem::path& masks_dir, InpaintMethod method) {
    auto masks = hooks::load_mask_dir(masks_dir, hooks::MaskMode::Color);
    auto cfg = imaging::default_match_config(imaging::MatchMode::Color);
    auto b = hooks::make_mask_binding("demetrify", std::move(masks), std::move(cfg),
                                      inpaint_action(method));
    return b;
}

hooks::HookBinding hate_filter(Lexicon lexicon, double threshold) {
    validate_lexicon(lexicon);
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw ConfigError("hate filter threshold must be in (0,1]");
    auto classifier = [lex = std::move(lexicon)](const std::string& text) {
        return lexicon_score(lex, text);
    };
    return hooks::make_text_binding("hate_filter", std::move(classifier), threshold);
}

hooks::HookBinding moderate_media(std::shared_ptr<const hooks::DetectorModel> detector,
                                  ModerationStyle style) {
    hooks::DetectionAction action;
    if (style == ModerationStyle::Box) {
        action = [](const Frame&, std::span<const Detection> dets) {
            std::vector<OverlayOp> ops;
            for (const Detection& d : dets)
                ops.push_back(make_fill_rect(d.region, Rgba{0, 0, 0, 255}));
            return ops;
        };
    } else {
        action = inpaint_action(InpaintMethod::Majority);
    }
    return hooks::make_model_binding("moderate_media", std::move(detector),
                                     std::move(action));
}

void validate(const UsageLockConfig& cfg) {
    if (cfg.s0 >= cfg.s1) throw ConfigError("usage lock requires s0 < s1");
    if (!(cfg.max_alpha >= 0.0 && cfg.max_alpha <= 1.0))
        throw ConfigError("usage lock max_alpha must be in [0,1]");
}

double usage_lock_alpha(const UsageLockState& state) {
    validate(state.cfg);
    const double span = double(state.cfg.s1) - double(state.cfg.s0);
    const double t = (double(state.scroll_events) - double(state.cfg.s0)) / span;
    return std::clamp(t, 0.0, 1.0) * state.cfg.max_alpha;
}

std::pair<UsageLockState, std::optional<OverlayOp>> usage_lock_update(
    const UsageLockState& state, const Frame& prev, const Frame& cur) {
    validate(state.cfg);
    UsageLockState next = state;
    // a shape change (app switch, rotation) is not a scroll
    const bool comparable = prev.width == cur.width && prev.height == cur.height &&
                            prev.format == cur.format;
    if (const auto d = comparable ? imaging::detect_scroll(prev, cur) : std::nullopt) {
        next.accumulated_px += uint64_t(std::abs(*d));
        const uint64_t event_px = state.cfg.event_px ? state.cfg.event_px : cur.height;
        next.scroll_events = next.accumulated_px / event_px;
    }
    const double alpha = usage_lock_alpha(next);
    std::optional<OverlayOp> op;
    if (alpha > 0.0) op = make_veil(float(alpha), Rgba{0, 0, 0, 255});
    return {next, op};
}

}  // namespace gtrm::interventions

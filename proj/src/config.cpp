#include "gtrm/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gtrm::config {

namespace {

[[noreturn]] void bad(std::size_t line_no, const std::string& msg) {
    throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace((unsigned char)s.front())) s.remove_prefix(1);
    while (!s.empty() && std::isspace((unsigned char)s.back())) s.remove_suffix(1);
    return s;
}

double parse_num(std::string_view v, std::size_t line_no, const std::string& what) {
    const std::string s{v};
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(s.c_str(), &end);
    if (errno != 0 || end != s.c_str() + s.size() || s.empty())
        bad(line_no, "bad " + what + ": '" + s + "'");
    return x;
}

uint32_t parse_uint(std::string_view v, std::size_t line_no, const std::string& what) {
    const double x = parse_num(v, line_no, what);
    if (x < 0 || x != std::floor(x) || x > 4294967295.0)
        bad(line_no, what + " must be a non-negative integer");
    return uint32_t(x);
}

Rgba parse_color(std::string_view v, std::size_t line_no) {
    const auto hex = [&](char c) -> uint32_t {
        if (c >= '0' && c <= '9') return uint32_t(c - '0');
        if (c >= 'a' && c <= 'f') return uint32_t(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return uint32_t(c - 'A' + 10);
        bad(line_no, "bad color: '" + std::string(v) + "'");
    };
    if ((v.size() != 7 && v.size() != 9) || v[0] != '#')
        bad(line_no, "color must look like #rrggbb or #rrggbbaa");
    uint32_t packed = 0;
    for (std::size_t i = 1; i < v.size(); ++i) packed = packed * 16 + hex(v[i]);
    if (v.size() == 7) packed = (packed << 8) | 0xFF;
    return unpack_rgba(packed);
}

// Normalized decimal: up to 6 places, trailing zeros trimmed.
std::string num_text(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s = buf;
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

std::string color_text(Rgba c) {
    char buf[11];
    if (c.a == 255)
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    else
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x%02x", c.r, c.g, c.b, c.a);
    return buf;
}

}  // namespace

PipelineConfig parse_config(std::string_view body) {
    PipelineConfig cfg;
    bool saw_schema = false;
    enum class Section { None, Pipeline, Intervention };
    Section section = Section::None;
    InterventionSpec* cur = nullptr;

    std::size_t line_no = 0, pos = 0;
    while (pos <= body.size()) {
        const auto nl = body.find('\n', pos);
        std::string_view raw =
            body.substr(pos, nl == std::string_view::npos ? body.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? body.size() + 1 : nl + 1;
        ++line_no;
        // comments are whole lines starting with '#'; a mid-line '#' is data
        // (color literals like lo = #be1432ff)
        if (!trim(raw).empty() && trim(raw).front() == '#') continue;
        const std::string_view line = trim(raw);
        if (line.empty()) continue;

        if (!saw_schema) {
            if (!line.starts_with("schema"))
                bad(line_no, "first directive must be the schema tag");
            const std::string_view rest = trim(line.substr(6));
            const auto sp = rest.find(' ');
            if (sp == std::string_view::npos || trim(rest.substr(0, sp)) != "gtrm-config")
                bad(line_no, "expected 'schema gtrm-config <version>'");
            cfg.schema = int(parse_uint(trim(rest.substr(sp + 1)), line_no, "schema version"));
            if (cfg.schema != 1) bad(line_no, "unsupported schema version");
            saw_schema = true;
            continue;
        }

        if (line.front() == '[') {
            if (line.back() != ']') bad(line_no, "unterminated section header");
            const std::string_view inner = trim(line.substr(1, line.size() - 2));
            if (inner == "pipeline") {
                section = Section::Pipeline;
                cur = nullptr;
            } else if (inner.starts_with("intervention")) {
                const std::string_view name = trim(inner.substr(12));
                if (name.empty()) bad(line_no, "intervention section needs a name");
                for (const InterventionSpec& s : cfg.interventions)
                    if (s.name == name)
                        bad(line_no, "duplicate intervention '" + std::string(name) + "'");
                cfg.interventions.emplace_back();
                cfg.interventions.back().name = std::string(name);
                cur = &cfg.interventions.back();
                section = Section::Intervention;
            } else {
                bad(line_no, "unknown section '" + std::string(inner) + "'");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) bad(line_no, "expected key = value");
        const std::string key{trim(line.substr(0, eq))};
        const std::string_view val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) bad(line_no, "empty key or value");

        if (section == Section::Pipeline) {
            if (key == "inpaint") {
                if (val != "majority" && val != "fmm")
                    bad(line_no, "inpaint must be 'majority' or 'fmm'");
                cfg.inpaint = std::string(val);
            } else {
                bad(line_no, "unknown [pipeline] key '" + key + "'");
            }
        } else if (section == Section::Intervention) {
            InterventionSpec& s = *cur;
            if (key == "kind") {
                static const char* kKinds[] = {"occlude", "demetrify", "hate_filter",
                                               "moderate_media", "usage_lock"};
                if (std::find_if(std::begin(kKinds), std::end(kKinds),
                                 [&](const char* k) { return val == k; }) == std::end(kKinds))
                    bad(line_no, "unknown intervention kind '" + std::string(val) + "'");
                s.kind = std::string(val);
            } else if (key == "masks") {
                s.masks = std::string(val);
            } else if (key == "inpaint") {
                if (val != "majority" && val != "fmm")
                    bad(line_no, "inpaint must be 'majority' or 'fmm'");
                s.inpaint = std::string(val);
            } else if (key == "lexicon") {
                s.lexicon = std::string(val);
            } else if (key == "threshold") {
                s.threshold = parse_num(val, line_no, "threshold");
                if (!(s.threshold > 0.0 && s.threshold <= 1.0))
                    bad(line_no, "threshold must be in (0, 1]");
            } else if (key == "label") {
                s.label = std::string(val);
            } else if (key == "lo") {
                s.lo = parse_color(val, line_no);
            } else if (key == "hi") {
                s.hi = parse_color(val, line_no);
            } else if (key == "min_area") {
                s.min_area = parse_uint(val, line_no, "min_area");
            } else if (key == "style") {
                if (val != "box" && val != "patch")
                    bad(line_no, "style must be 'box' or 'patch'");
                s.style = std::string(val);
            } else if (key == "ramp_start") {
                s.lock.s0 = parse_uint(val, line_no, "ramp_start");
            } else if (key == "ramp_end") {
                s.lock.s1 = parse_uint(val, line_no, "ramp_end");
            } else if (key == "max_alpha") {
                s.lock.max_alpha = parse_num(val, line_no, "max_alpha");
                if (!(s.lock.max_alpha >= 0.0 && s.lock.max_alpha <= 1.0))
                    bad(line_no, "max_alpha must be in [0, 1]");
            } else if (key == "event_px") {
                s.lock.event_px = parse_uint(val, line_no, "event_px");
            } else {
                bad(line_no, "unknown intervention key '" + key + "'");
            }
        } else {
            bad(line_no, "key/value outside any section");
        }
    }
    if (!saw_schema) throw ConfigError("config is missing its schema tag");
    for (const InterventionSpec& s : cfg.interventions)
        if (s.kind.empty())
            throw ConfigError("intervention '" + s.name + "' has no kind");
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string emit_config(const PipelineConfig& cfg) {
    std::ostringstream out;
    out << "schema gtrm-config " << cfg.schema << "\n\n";
    out << "[pipeline]\ninpaint = " << cfg.inpaint << '\n';
    for (const InterventionSpec& s : cfg.interventions) {
        out << "\n[intervention " << s.name << "]\n";
        out << "kind = " << s.kind << '\n';
        if (s.kind == "occlude" || s.kind == "demetrify") {
            out << "masks = " << s.masks.generic_string() << '\n';
            if (!s.inpaint.empty()) out << "inpaint = " << s.inpaint << '\n';
        } else if (s.kind == "hate_filter") {
            out << "lexicon = " << s.lexicon.generic_string() << '\n';
            out << "threshold = " << num_text(s.threshold) << '\n';
        } else if (s.kind == "moderate_media") {
            out << "label = " << s.label << '\n';
            out << "lo = " << color_text(s.lo) << '\n';
            out << "hi = " << color_text(s.hi) << '\n';
            out << "min_area = " << s.min_area << '\n';
            out << "style = " << s.style << '\n';
        } else if (s.kind == "usage_lock") {
            out << "ramp_start = " << s.lock.s0 << '\n';
            out << "ramp_end = " << s.lock.s1 << '\n';
            out << "max_alpha = " << num_text(s.lock.max_alpha) << '\n';
            out << "event_px = " << s.lock.event_px << '\n';
        }
    }
    return std::move(out).str();
}

BuiltPipeline build_pipeline(const PipelineConfig& cfg,
                             const std::filesystem::path& base_dir) {
    if (cfg.inpaint != "majority" && cfg.inpaint != "fmm")
        throw ConfigError("pipeline inpaint must be 'majority' or 'fmm'");
    const auto resolve = [&](const std::filesystem::path& p) {
        return p.is_absolute() ? p : base_dir / p;
    };
    const auto method_of = [&](const InterventionSpec& s) {
        const std::string& m = s.inpaint.empty() ? cfg.inpaint : s.inpaint;
        return m == "fmm" ? interventions::InpaintMethod::Fmm
                          : interventions::InpaintMethod::Majority;
    };

    BuiltPipeline built;
    int index = 0;
    for (const InterventionSpec& s : cfg.interventions) {
        if (s.kind == "occlude" || s.kind == "demetrify") {
            const std::filesystem::path dir = resolve(s.masks);
            if (!std::filesystem::is_directory(dir))
                throw ConfigError("intervention '" + s.name + "': mask directory not found: " +
                                  dir.string());
            hooks::HookBinding b = s.kind == "occlude"
                                       ? interventions::occlude_elements(dir, method_of(s))
                                       : interventions::demetrify(dir, method_of(s));
            b.name = s.name;
            b.registration_index = index++;
            built.bindings.push_back(std::move(b));
        } else if (s.kind == "hate_filter") {
            const std::filesystem::path lex = resolve(s.lexicon);
            if (!std::filesystem::is_regular_file(lex))
                throw ConfigError("intervention '" + s.name + "': lexicon not found: " +
                                  lex.string());
            hooks::HookBinding b =
                interventions::hate_filter(interventions::load_lexicon(lex), s.threshold);
            b.name = s.name;
            b.registration_index = index++;
            built.bindings.push_back(std::move(b));
        } else if (s.kind == "moderate_media") {
            auto detector = std::make_shared<hooks::ColorRangeDetector>(s.label, s.lo, s.hi,
                                                                        s.min_area);
            hooks::HookBinding b = interventions::moderate_media(
                std::move(detector), s.style == "patch"
                                         ? interventions::ModerationStyle::Patch
                                         : interventions::ModerationStyle::Box);
            b.name = s.name;
            b.registration_index = index++;
            built.bindings.push_back(std::move(b));
        } else if (s.kind == "usage_lock") {
            if (built.usage_lock)
                throw ConfigError("config declares usage_lock twice");
            interventions::validate(s.lock);
            built.usage_lock = true;
            built.lock = s.lock;
        } else {
            throw ConfigError("intervention '" + s.name + "' has unknown kind '" + s.kind +
                              "'");
        }
    }
    return built;
}

}  // namespace gtrm::config

#include "gtrm/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "gtrm/config.hpp"
#include "gtrm/corpus.hpp"
#include "gtrm/image_io.hpp"
#include "gtrm/net.hpp"

namespace gtrm::cli {

namespace {

uint64_t fnv1a64(const uint8_t* data, std::size_t n) {
    uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string color_text(Rgba c) {
    char buf[11];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x%02x", c.r, c.g, c.b, c.a);
    return buf;
}

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::FillRect: return "fill_rect";
        case OpKind::Patch: return "patch";
        case OpKind::Veil: return "veil";
        case OpKind::Label: return "label";
    }
    return "unknown";
}

// Deterministic text dump of a plan; patch payloads appear as a hash so the
// sidecar stays small while still pinning the bytes.
std::string plan_text(const OverlayPlan& plan) {
    std::ostringstream out;
    out << "plan frame=" << plan.frame_id << " ops=" << plan.ops.size() << '\n';
    for (const OverlayOp& op : plan.ops) {
        out << "  op kind=" << op_name(op.kind) << " z=" << op.z;
        switch (op.kind) {
            case OpKind::FillRect:
                out << " region=" << op.region.x << ',' << op.region.y << ',' << op.region.w
                    << ',' << op.region.h << " color=" << color_text(op.color);
                break;
            case OpKind::Patch: {
                char hash[20];
                std::snprintf(hash, sizeof hash, "%016llx",
                              (unsigned long long)fnv1a64(op.patch.data(), op.patch.size()));
                out << " region=" << op.region.x << ',' << op.region.y << ',' << op.region.w
                    << ',' << op.region.h << " bytes=" << op.patch.size() << " fnv=" << hash;
                break;
            }
            case OpKind::Veil: {
                char a[24];
                std::snprintf(a, sizeof a, "%.6f", double(op.alpha));
                out << " color=" << color_text(op.color) << " alpha=" << a;
                break;
            }
            case OpKind::Label:
                out << " region=" << op.region.x << ',' << op.region.y << ',' << op.region.w
                    << ',' << op.region.h << " color=" << color_text(op.color) << " text=\""
                    << op.text << '"';
                break;
        }
        out << '\n';
    }
    out << "end\n";
    return std::move(out).str();
}

void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write: " + path.string());
    out << body;
    if (!out) throw Error("short write: " + path.string());
}

bool raster_file(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".pam" || ext == ".pgm" || ext == ".ppm";
}

struct NamedFrame {
    std::string stem;
    Frame frame;
};

// Frames from a raster directory (filename order) or the scroll sequences of
// a corpus manifest.  Throws Error for unreadable input.
std::vector<NamedFrame> collect_frames(const std::filesystem::path& input) {
    std::vector<NamedFrame> frames;
    if (std::filesystem::is_directory(input)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(input))
            if (entry.is_regular_file() && raster_file(entry.path()))
                files.push_back(entry.path());
        std::sort(files.begin(), files.end(),
                  [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
        for (std::size_t i = 0; i < files.size(); ++i) {
            Frame f = io::read_image(files[i]);
            f.id = i;
            f.timestamp_us = i * 50'000;
            frames.push_back({files[i].stem().string(), std::move(f)});
        }
    } else if (std::filesystem::is_regular_file(input)) {
        const corpus::Manifest m = corpus::load_manifest(input);
        for (const corpus::ScreenSpec& s : m.screens) {
            corpus::Screen scr = corpus::generate_screen(s);
            scr.frame.id = frames.size();
            scr.frame.timestamp_us = frames.size() * 50'000;
            frames.push_back({s.name, std::move(scr.frame)});
        }
        for (const corpus::SequenceEntry& q : m.sequences) {
            auto seq = corpus::generate_scroll_sequence(q.spec, q.shifts);
            for (std::size_t i = 0; i < seq.size(); ++i) {
                char idx[16];
                std::snprintf(idx, sizeof idx, "%04zu", i);
                seq[i].id = frames.size();
                seq[i].timestamp_us = frames.size() * 50'000;
                frames.push_back({q.spec.name + "_" + idx, std::move(seq[i])});
            }
        }
    } else {
        throw Error("input not found: " + input.string());
    }
    if (frames.empty()) throw Error("no input frames in " + input.string());
    return frames;
}

}  // namespace

int cmd_run(const std::filesystem::path& input, const std::filesystem::path& config_file,
            const std::filesystem::path& out_dir, std::ostream& err) {
    config::BuiltPipeline pipeline;
    try {
        const config::PipelineConfig cfg = config::load_config(config_file);
        pipeline = config::build_pipeline(
            cfg, std::filesystem::absolute(config_file).parent_path());
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    std::vector<NamedFrame> frames;
    try {
        frames = collect_frames(input);
        std::filesystem::create_directories(out_dir);
    } catch (const std::exception& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInput;
    }

    try {
        using Clock = std::chrono::steady_clock;
        const auto t0 = Clock::now();
        const auto now_us = [&] {
            return uint64_t(
                std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0)
                    .count());
        };

        hooks::SessionState state;
        interventions::UsageLockState lock{pipeline.lock};
        std::ostringstream report;
        uint64_t total_us = 0;

        for (const NamedFrame& nf : frames) {
            const uint64_t t_receive = now_us();
            hooks::PipelineResult result = hooks::run_pipeline(nf.frame, pipeline.bindings);
            if (pipeline.usage_lock && state.prev_frame) {
                auto [next, veil] =
                    interventions::usage_lock_update(lock, *state.prev_frame, nf.frame);
                lock = std::move(next);
                if (veil) result.plan.ops.push_back(*veil);
            }
            state.prev_frame = nf.frame;
            ++state.frames_seen;
            const uint64_t t_ready = now_us();

            io::write_pam(out_dir / (nf.stem + ".out.pam"), composite(nf.frame, result.plan));
            write_text(out_dir / (nf.stem + ".plan.txt"), plan_text(result.plan));
            const uint64_t t_done = now_us();
            total_us += t_done - t_receive;

            report << "frame id=" << nf.frame.id << " stem=" << nf.stem
                   << " pipeline_us=" << (t_ready - t_receive)
                   << " write_us=" << (t_done - t_ready);
            for (const auto& [name, us] : result.record.per_hook_us)
                report << " hook_" << name << "_us=" << us;
            for (const auto& [name, why] : result.record.skipped_hooks)
                report << " skipped_" << name << "=\"" << why << '"';
            report << '\n';
        }
        report << "frames " << frames.size() << " mean_frame_us "
               << (frames.empty() ? 0 : total_us / frames.size()) << '\n';
        write_text(out_dir / "latency_report.txt", std::move(report).str());
    } catch (const std::exception& e) {
        err << "run error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}

int cmd_serve(const std::string& listen, const std::filesystem::path& config_file,
              const std::atomic<bool>& stop, std::ostream& out, std::ostream& err,
              uint16_t* bound_port) {
    net::ServerConfig server_cfg;
    try {
        const auto colon = listen.rfind(':');
        if (colon == std::string::npos || colon + 1 >= listen.size())
            throw ConfigError("listen address must look like host:port");
        server_cfg.host = listen.substr(0, colon);
        const std::string port_s = listen.substr(colon + 1);
        char* end = nullptr;
        const unsigned long port = std::strtoul(port_s.c_str(), &end, 10);
        if (end != port_s.c_str() + port_s.size() || port > 65535)
            throw ConfigError("bad port: " + port_s);
        server_cfg.port = uint16_t(port);

        const config::PipelineConfig cfg = config::load_config(config_file);
        config::BuiltPipeline pipeline = config::build_pipeline(
            cfg, std::filesystem::absolute(config_file).parent_path());
        server_cfg.bindings = std::move(pipeline.bindings);
        server_cfg.enable_usage_lock = pipeline.usage_lock;
        server_cfg.lock = pipeline.lock;
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        net::Server server(server_cfg);
        server.start();
        if (bound_port) *bound_port = server.port();
        out << "listening on " << server_cfg.host << ':' << server.port() << std::endl;
        while (!stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(10));
        server.stop();
    } catch (const std::exception& e) {
        err << "server error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitOk;
}

int cmd_corpus(const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
               std::ostream& err) {
    if (!std::filesystem::is_regular_file(manifest)) {
        err << "input error: manifest not found: " << manifest.string() << '\n';
        return kExitInput;
    }
    try {
        const corpus::Manifest m = corpus::load_manifest(manifest);
        std::filesystem::create_directories(out_dir);
        for (const corpus::ScreenSpec& spec : m.screens) {
            const corpus::Screen screen = corpus::generate_screen(spec);
            io::write_pam(out_dir / (spec.name + ".pam"), screen.frame);
            write_text(out_dir / (spec.name + ".truth.txt"),
                       corpus::emit_truth(spec.name, screen.truth));
        }
        for (const corpus::SequenceEntry& q : m.sequences) {
            const auto frames = corpus::generate_scroll_sequence(q.spec, q.shifts);
            for (std::size_t i = 0; i < frames.size(); ++i) {
                char idx[16];
                std::snprintf(idx, sizeof idx, "%04zu", i);
                io::write_pam(out_dir / (q.spec.name + "_" + idx + ".pam"), frames[i]);
            }
            std::ostringstream shifts;
            shifts << "sequence " << q.spec.name << " shifts=";
            for (std::size_t i = 0; i < q.shifts.size(); ++i)
                shifts << (i ? "," : "") << q.shifts[i];
            shifts << '\n';
            write_text(out_dir / (q.spec.name + ".shifts.txt"), std::move(shifts).str());
        }
    } catch (const std::exception& e) {
        err << "corpus error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}

int cmd_budget(double bandwidth_bps, double image_bits, const std::vector<double>& model_ms,
               double target_fps, std::ostream& out, std::ostream& err) {
    try {
        net::BudgetInput input;
        input.bandwidth_bps = bandwidth_bps;
        input.image_bits = image_bits;
        input.per_model_ms = model_ms;
        input.target_fps = target_fps;
        const net::BudgetReport rep = net::latency_budget(input);
        char one_way[32], total[32];
        std::snprintf(one_way, sizeof one_way, "%.3f", rep.one_way_ms);
        std::snprintf(total, sizeof total, "%.2f", rep.total_ms);
        out << "one_way_ms = " << one_way << '\n'
            << "total_ms = " << total << '\n'
            << "max_fps = " << rep.max_fps << '\n'
            << "max_models_at_target = " << rep.max_models_at_target << '\n';
    } catch (const std::exception& e) {
        err << "budget error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}

}  // namespace gtrm::cli

#include <atomic>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "gtrm/cli.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"screen-frame intervention pipeline"};
    app.require_subcommand(1);

    std::string input, config_file, out_dir, listen = "127.0.0.1:7421", manifest;
    double bandwidth = 250e6, image_bits = 1 * 1024 * 8, target_fps = 5;
    std::vector<double> model_ms;

    CLI::App* run = app.add_subcommand("run", "process frames offline");
    run->add_option("--input", input, "frames directory or sequence manifest")->required();
    run->add_option("--config", config_file, "pipeline config file")->required();
    run->add_option("--out", out_dir, "output directory")->required();

    CLI::App* serve = app.add_subcommand("serve", "answer frames over the wire protocol");
    serve->add_option("--listen", listen, "host:port (port 0 = ephemeral)");
    serve->add_option("--config", config_file, "pipeline config file")->required();

    CLI::App* corpus = app.add_subcommand("corpus", "render a synthetic screen corpus");
    corpus->add_option("--manifest", manifest, "corpus manifest file")->required();
    corpus->add_option("--out", out_dir, "output directory")->required();

    CLI::App* budget = app.add_subcommand("budget", "print the latency budget report");
    budget->add_option("--bandwidth", bandwidth, "link bandwidth, bits per second");
    budget->add_option("--image-bits", image_bits, "bits per transmitted image");
    budget->add_option("--model-ms", model_ms, "per-model pass cost in ms (repeatable)")
        ->expected(-1);
    budget->add_option("--target-fps", target_fps, "frame rate for the capacity estimate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return gtrm::cli::kExitConfig;
    }

    if (run->parsed()) return gtrm::cli::cmd_run(input, config_file, out_dir, std::cerr);
    if (serve->parsed()) {
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        return gtrm::cli::cmd_serve(listen, config_file, g_stop, std::cout, std::cerr);
    }
    if (corpus->parsed()) return gtrm::cli::cmd_corpus(manifest, out_dir, std::cerr);
    if (budget->parsed()) {
        if (model_ms.empty()) model_ms.push_back(5.0);
        return gtrm::cli::cmd_budget(bandwidth, image_bits, model_ms, target_fps, std::cout,
                                     std::cerr);
    }
    return gtrm::cli::kExitConfig;
}

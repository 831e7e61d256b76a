#pragma once

// Operator entry points, exposed as library functions so tests can drive them
// without spawning processes.  Exit codes: 0 success, 2 unreadable input,
// 3 invalid config/spec/numerics.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gtrm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitConfig = 3;

// Offline pipeline run.  `input` is either a directory of raster frames
// (processed in filename order) or a corpus manifest whose scroll sequences
// supply the frames.  Writes composited frames, overlay-plan sidecars and a
// latency report into `out_dir`.
int cmd_run(const std::filesystem::path& input, const std::filesystem::path& config_file,
            const std::filesystem::path& out_dir, std::ostream& err);

// Server mode.  Binds `listen` ("host:port", port 0 = ephemeral), serves until
// `stop` becomes true.  The bound port is reported through *bound_port (when
// non-null) and printed to `out`.
int cmd_serve(const std::string& listen, const std::filesystem::path& config_file,
              const std::atomic<bool>& stop, std::ostream& out, std::ostream& err,
              uint16_t* bound_port = nullptr);

// Renders every screen and sequence in the manifest into `out_dir` (PAM
// frames plus ground-truth sidecars).
int cmd_corpus(const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
               std::ostream& err);

// Prints the four budget-report fields.
int cmd_budget(double bandwidth_bps, double image_bits, const std::vector<double>& model_ms,
               double target_fps, std::ostream& out, std::ostream& err);

}  // namespace gtrm::cli

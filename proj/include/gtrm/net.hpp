#pragma once

// Wire protocol, latency budget model, and the frame-in/overlay-out server.
//
// Message framing: magic "GTRM" (4B), version (1B, =1), type (1B), payload
// length (4B LE), payload.  Types: 1=HELLO 2=FRAME 3=OVERLAY 4=STATS 5=BYE.
// All multi-byte integers little-endian.  Payload layouts are pinned in
// docs/protocol.md and locked by golden tests.

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gtrm/core.hpp"
#include "gtrm/hooks.hpp"
#include "gtrm/interventions.hpp"

namespace gtrm::net {

enum class MsgType : uint8_t {
    Hello = 1,
    Frame = 2,
    Overlay = 3,
    Stats = 4,
    Bye = 5,
};

inline constexpr std::array<uint8_t, 4> kMagic{'G', 'T', 'R', 'M'};
inline constexpr uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 10;
inline constexpr uint32_t kMaxPayloadBytes = 1u << 26;  // 64 MiB sanity bound

struct WireMessage {
    MsgType type = MsgType::Hello;
    std::vector<uint8_t> payload;

    friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

// Header + payload of one message.
std::vector<uint8_t> encode_message(const WireMessage& msg);

// Decodes one whole message; trailing bytes are a BadPayload error.
WireMessage decode_message(std::span<const uint8_t> bytes);

struct MessageHeader {
    MsgType type;
    uint32_t length;
};

// Validates magic/version/type/length of a 10-byte header.
MessageHeader decode_header(std::span<const uint8_t> bytes);

// ---- payload codecs ---------------------------------------------------------

// FRAME: id(8) timestamp_us(8) width(4) height(4) pixel_format(1) raw pixels.
std::vector<uint8_t> encode_frame(const Frame& frame);
Frame decode_frame(std::span<const uint8_t> payload);

// OVERLAY: frame_id(8) op_count(4) ops.  Op: kind(1) z(2, signed LE) then
// kind fields in declaration order: FILL_RECT region(16) color(4);
// PATCH region(16) raw rgba; VEIL color(4) alpha(float32 LE);
// LABEL region(16) color(4) text_len(2) text.
std::vector<uint8_t> encode_overlay(const OverlayPlan& plan);
OverlayPlan decode_overlay(std::span<const uint8_t> payload);

// HELLO: max_width(4) max_height(4) compression(1, must be 0) name_count(1),
// then per requested intervention: len(1) bytes.  Empty list = run all.
struct Hello {
    uint32_t max_width = 4096;
    uint32_t max_height = 8192;
    uint8_t compression = 0;
    std::vector<std::string> interventions;

    friend bool operator==(const Hello&, const Hello&) = default;
};
std::vector<uint8_t> encode_hello(const Hello& h);
Hello decode_hello(std::span<const uint8_t> payload);

// BYE: code(4) message bytes.  0 = clean close, 1 = protocol error,
// 2 = internal error.
struct ByeInfo {
    uint32_t code = 0;
    std::string message;

    friend bool operator==(const ByeInfo&, const ByeInfo&) = default;
};
std::vector<uint8_t> encode_bye(const ByeInfo& b);
ByeInfo decode_bye(std::span<const uint8_t> payload);

// STATS: frames_received(8) frames_answered(8) frames_dropped(8)
// record_count(4), then per record: frame_id(8) t_receive_us(8)
// t_plan_ready_us(8) t_sent_us(8) hook_count(2) {len(1) name us(8)}
// skip_count(2) {len(1) name len(2) error}.
struct StatsReport {
    uint64_t frames_received = 0;
    uint64_t frames_answered = 0;
    uint64_t frames_dropped = 0;
    std::vector<LatencyRecord> records;

    friend bool operator==(const StatsReport& a, const StatsReport& b) {
        if (a.frames_received != b.frames_received || a.frames_answered != b.frames_answered ||
            a.frames_dropped != b.frames_dropped || a.records.size() != b.records.size())
            return false;
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            const LatencyRecord &x = a.records[i], &y = b.records[i];
            if (x.frame_id != y.frame_id || x.t_receive_us != y.t_receive_us ||
                x.t_plan_ready_us != y.t_plan_ready_us || x.t_sent_us != y.t_sent_us ||
                x.per_hook_us != y.per_hook_us || x.skipped_hooks != y.skipped_hooks)
                return false;
        }
        return true;
    }
};
std::vector<uint8_t> encode_stats(const StatsReport& s);
StatsReport decode_stats(std::span<const uint8_t> payload);

// ---- latency budget -----------------------------------------------------------

struct BudgetInput {
    double bandwidth_bps = 0;
    double image_bits = 0;
    std::vector<double> per_model_ms;
    double target_fps = 5;
};

struct BudgetReport {
    double one_way_ms = 0;
    double total_ms = 0;
    int64_t max_fps = 0;
    int64_t max_models_at_target = 0;
};

// one_way_ms = image_bits / bandwidth_bps * 1000
// total_ms   = 2*one_way_ms + sum(per_model_ms)
// max_fps    = floor(1000 / total_ms)
// max_models_at_target = floor((1000/target_fps) / mean(per_model_ms));
// the per-frame interval is spent on model passes alone (single-model-cost
// approximation — transmission is not charged per model).
// Throws ConfigError unless every input is strictly positive and the model
// list is non-empty.
BudgetReport latency_budget(const BudgetInput& input);

// ---- server ---------------------------------------------------------------------

struct ServerConfig {
    std::string host = "127.0.0.1";
    uint16_t port = 0;  // 0 = ephemeral, read back via Server::port()
    std::vector<hooks::HookBinding> bindings;
    bool enable_usage_lock = false;
    interventions::UsageLockConfig lock;
    uint32_t stats_every = 100;       // push STATS every N answered frames
    uint32_t process_delay_ms = 0;    // artificial per-frame cost (tests)
    uint32_t max_sessions = 64;
};

// One listening socket; per connection a reader thread decodes messages into
// a keep-latest mailbox and a worker thread answers the newest frame,
// reporting drops via STATS.  Sessions are fully independent.
class Server {
  public:
    explicit Server(ServerConfig cfg);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    void start();              // bind + listen + accept loop (background thread)
    void stop();               // graceful: BYE to live sessions, join everything
    uint16_t port() const;     // valid after start()
    bool running() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Blocking convenience wrapper: start, then run until `stop_flag` becomes
// true (polled), then graceful stop.
void serve(const ServerConfig& cfg, const std::atomic<bool>& stop_flag);

}  // namespace gtrm::net

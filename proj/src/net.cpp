#include "gtrm/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <optional>
#include <thread>

namespace gtrm::net {

// --- byte helpers ------------------------------------------------------------

namespace {

struct Writer {
    std::vector<uint8_t> buf;

    void u8(uint8_t v) { buf.push_back(v); }
    void u16(uint16_t v) { u8(uint8_t(v)); u8(uint8_t(v >> 8)); }
    void u32(uint32_t v) { u16(uint16_t(v)); u16(uint16_t(v >> 16)); }
    void u64(uint64_t v) { u32(uint32_t(v)); u32(uint32_t(v >> 32)); }
    void i16(int16_t v) { u16(uint16_t(v)); }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
};

struct Reader {
    std::span<const uint8_t> buf;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw DecodeError(DecodeError::Kind::Truncated,
                              std::string("truncated payload reading ") + what, pos);
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return buf[pos++];
    }
    uint16_t u16(const char* what) {
        need(2, what);
        const uint16_t v = uint16_t(buf[pos]) | uint16_t(buf[pos + 1]) << 8;
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | buf[pos + std::size_t(i)];
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        const uint64_t lo = u32(what);
        return lo | (uint64_t(u32(what)) << 32);
    }
    int16_t i16(const char* what) { return int16_t(u16(what)); }
    float f32(const char* what) {
        const uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::span<const uint8_t> bytes(std::size_t n, const char* what) {
        need(n, what);
        auto s = buf.subspan(pos, n);
        pos += n;
        return s;
    }
    void done() const {
        if (pos != buf.size())
            throw DecodeError(DecodeError::Kind::BadPayload,
                              "payload has " + std::to_string(buf.size() - pos) +
                                  " trailing bytes", pos);
    }
};

Region read_region(Reader& r) {
    Region out;
    out.x = r.u32("region.x");
    out.y = r.u32("region.y");
    out.w = r.u32("region.w");
    out.h = r.u32("region.h");
    return out;
}

void write_region(Writer& w, const Region& r) {
    w.u32(r.x);
    w.u32(r.y);
    w.u32(r.w);
    w.u32(r.h);
}

Rgba read_color(Reader& r) {
    Rgba c;
    c.r = r.u8("color.r");
    c.g = r.u8("color.g");
    c.b = r.u8("color.b");
    c.a = r.u8("color.a");
    return c;
}

void write_color(Writer& w, Rgba c) {
    w.u8(c.r);
    w.u8(c.g);
    w.u8(c.b);
    w.u8(c.a);
}

}  // namespace

// --- framing -----------------------------------------------------------------

std::vector<uint8_t> encode_message(const WireMessage& msg) {
    if (msg.payload.size() > kMaxPayloadBytes)
        throw ProtocolError("payload exceeds the 64 MiB message bound");
    Writer w;
    w.bytes(kMagic.data(), kMagic.size());
    w.u8(kVersion);
    w.u8(uint8_t(msg.type));
    w.u32(uint32_t(msg.payload.size()));
    w.bytes(msg.payload.data(), msg.payload.size());
    return std::move(w.buf);
}

MessageHeader decode_header(std::span<const uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes)
        throw DecodeError(DecodeError::Kind::Truncated, "message header needs 10 bytes",
                          bytes.size());
    if (std::memcmp(bytes.data(), kMagic.data(), 4) != 0)
        throw DecodeError(DecodeError::Kind::BadMagic, "bad magic", 0);
    if (bytes[4] != kVersion)
        throw DecodeError(DecodeError::Kind::BadVersion,
                          "unsupported version " + std::to_string(bytes[4]), 4);
    const uint8_t t = bytes[5];
    if (t < 1 || t > 5)
        throw DecodeError(DecodeError::Kind::UnknownType,
                          "unknown message type " + std::to_string(t), 5);
    uint32_t len = 0;
    for (int i = 9; i >= 6; --i) len = (len << 8) | bytes[std::size_t(i)];
    if (len > kMaxPayloadBytes)
        throw DecodeError(DecodeError::Kind::BadPayload, "declared payload too large", 6);
    return MessageHeader{MsgType(t), len};
}

WireMessage decode_message(std::span<const uint8_t> bytes) {
    const MessageHeader h = decode_header(bytes);
    if (bytes.size() < kHeaderBytes + h.length)
        throw DecodeError(DecodeError::Kind::Truncated,
                          "length field exceeds remaining bytes", kHeaderBytes);
    if (bytes.size() > kHeaderBytes + h.length)
        throw DecodeError(DecodeError::Kind::BadPayload, "trailing bytes after message",
                          kHeaderBytes + h.length);
    WireMessage msg;
    msg.type = h.type;
    msg.payload.assign(bytes.begin() + kHeaderBytes, bytes.end());
    return msg;
}

// --- FRAME -------------------------------------------------------------------

std::vector<uint8_t> encode_frame(const Frame& frame) {
    if (frame.data.size() != frame.expected_bytes())
        throw DimensionError("frame buffer does not match its dimensions");
    Writer w;
    w.u64(frame.id);
    w.u64(frame.timestamp_us);
    w.u32(frame.width);
    w.u32(frame.height);
    w.u8(uint8_t(frame.format));
    w.bytes(frame.data.data(), frame.data.size());
    return std::move(w.buf);
}

Frame decode_frame(std::span<const uint8_t> payload) {
    Reader r{payload};
    Frame f;
    f.id = r.u64("frame.id");
    f.timestamp_us = r.u64("frame.timestamp_us");
    f.width = r.u32("frame.width");
    f.height = r.u32("frame.height");
    const uint8_t fmt = r.u8("frame.pixel_format");
    if (fmt > 1)
        throw DecodeError(DecodeError::Kind::BadPayload,
                          "unknown pixel format " + std::to_string(fmt), r.pos - 1);
    f.format = PixelFormat(fmt);
    if (f.width == 0 || f.height == 0 || f.width > 16384 || f.height > 16384)
        throw DecodeError(DecodeError::Kind::BadPayload, "frame dimensions out of range",
                          16);
    const std::size_t px = f.expected_bytes();
    auto s = r.bytes(px, "frame.pixels");
    r.done();
    f.data.assign(s.begin(), s.end());
    return f;
}

// --- OVERLAY -----------------------------------------------------------------

namespace {

void encode_op(Writer& w, const OverlayOp& op, std::size_t index) {
    if (op.z < INT16_MIN || op.z > INT16_MAX)
        throw ProtocolError("op " + std::to_string(index) + " z out of wire range");
    w.u8(uint8_t(op.kind));
    w.i16(int16_t(op.z));
    switch (op.kind) {
        case OpKind::FillRect:
            write_region(w, op.region);
            write_color(w, op.color);
            break;
        case OpKind::Patch:
            if (op.patch.size() != op.region.area() * 4)
                throw ProtocolError("op " + std::to_string(index) +
                                    " patch bytes do not match its region");
            write_region(w, op.region);
            w.bytes(op.patch.data(), op.patch.size());
            break;
        case OpKind::Veil:
            write_color(w, op.color);
            w.f32(op.alpha);
            break;
        case OpKind::Label:
            if (op.text.size() > UINT16_MAX)
                throw ProtocolError("op " + std::to_string(index) + " label text too long");
            write_region(w, op.region);
            write_color(w, op.color);
            w.u16(uint16_t(op.text.size()));
            w.bytes(op.text.data(), op.text.size());
            break;
        default:
            throw ProtocolError("op " + std::to_string(index) + " has an unknown kind");
    }
}

OverlayOp decode_op(Reader& r) {
    const std::size_t kind_off = r.pos;
    const uint8_t kind = r.u8("op.kind");
    if (kind < 1 || kind > 4)
        throw DecodeError(DecodeError::Kind::UnknownOpKind,
                          "unknown op kind " + std::to_string(kind), kind_off);
    OverlayOp op;
    op.kind = OpKind(kind);
    op.z = r.i16("op.z");
    switch (op.kind) {
        case OpKind::FillRect:
            op.region = read_region(r);
            op.color = read_color(r);
            break;
        case OpKind::Patch: {
            op.region = read_region(r);
            const uint64_t n = op.region.area() * 4;
            if (n > kMaxPayloadBytes)
                throw DecodeError(DecodeError::Kind::BadPayload, "patch region too large",
                                  kind_off);
            auto s = r.bytes(std::size_t(n), "op.patch");
            op.patch.assign(s.begin(), s.end());
            break;
        }
        case OpKind::Veil:
            op.color = read_color(r);
            op.alpha = r.f32("op.alpha");
            break;
        case OpKind::Label: {
            op.region = read_region(r);
            op.color = read_color(r);
            const uint16_t n = r.u16("op.text_len");
            auto s = r.bytes(n, "op.text");
            op.text.assign(s.begin(), s.end());
            break;
        }
    }
    return op;
}

}  // namespace

std::vector<uint8_t> encode_overlay(const OverlayPlan& plan) {
    Writer w;
    w.u64(plan.frame_id);
    w.u32(uint32_t(plan.ops.size()));
    for (std::size_t i = 0; i < plan.ops.size(); ++i) encode_op(w, plan.ops[i], i);
    return std::move(w.buf);
}

OverlayPlan decode_overlay(std::span<const uint8_t> payload) {
    Reader r{payload};
    OverlayPlan plan;
    plan.frame_id = r.u64("plan.frame_id");
    const uint32_t count = r.u32("plan.op_count");
    // every op is at least 3 bytes; reject absurd counts before looping
    if (uint64_t(count) * 3 > payload.size())
        throw DecodeError(DecodeError::Kind::Truncated, "op count exceeds payload", 8);
    plan.ops.reserve(count);
    for (uint32_t i = 0; i < count; ++i) plan.ops.push_back(decode_op(r));
    r.done();
    return plan;
}

// --- HELLO / BYE / STATS -------------------------------------------------------

std::vector<uint8_t> encode_hello(const Hello& h) {
    if (h.interventions.size() > 255) throw ProtocolError("too many requested interventions");
    Writer w;
    w.u32(h.max_width);
    w.u32(h.max_height);
    w.u8(h.compression);
    w.u8(uint8_t(h.interventions.size()));
    for (const std::string& name : h.interventions) {
        if (name.empty() || name.size() > 255)
            throw ProtocolError("intervention name length must be 1..255");
        w.u8(uint8_t(name.size()));
        w.bytes(name.data(), name.size());
    }
    return std::move(w.buf);
}

Hello decode_hello(std::span<const uint8_t> payload) {
    Reader r{payload};
    Hello h;
    h.max_width = r.u32("hello.max_width");
    h.max_height = r.u32("hello.max_height");
    h.compression = r.u8("hello.compression");
    if (h.compression != 0)
        throw DecodeError(DecodeError::Kind::BadPayload,
                          "compression modes are reserved, byte must be 0", r.pos - 1);
    const uint8_t n = r.u8("hello.name_count");
    for (uint8_t i = 0; i < n; ++i) {
        const uint8_t len = r.u8("hello.name_len");
        if (len == 0)
            throw DecodeError(DecodeError::Kind::BadPayload, "empty intervention name",
                              r.pos - 1);
        auto s = r.bytes(len, "hello.name");
        h.interventions.emplace_back(s.begin(), s.end());
    }
    r.done();
    return h;
}

std::vector<uint8_t> encode_bye(const ByeInfo& b) {
    Writer w;
    w.u32(b.code);
    w.bytes(b.message.data(), b.message.size());
    return std::move(w.buf);
}

ByeInfo decode_bye(std::span<const uint8_t> payload) {
    Reader r{payload};
    ByeInfo b;
    b.code = r.u32("bye.code");
    auto s = r.bytes(payload.size() - r.pos, "bye.message");
    b.message.assign(s.begin(), s.end());
    return b;
}

std::vector<uint8_t> encode_stats(const StatsReport& s) {
    Writer w;
    w.u64(s.frames_received);
    w.u64(s.frames_answered);
    w.u64(s.frames_dropped);
    w.u32(uint32_t(s.records.size()));
    for (const LatencyRecord& rec : s.records) {
        w.u64(rec.frame_id);
        w.u64(rec.t_receive_us);
        w.u64(rec.t_plan_ready_us);
        w.u64(rec.t_sent_us);
        if (rec.per_hook_us.size() > UINT16_MAX || rec.skipped_hooks.size() > UINT16_MAX)
            throw ProtocolError("latency record has too many hooks");
        w.u16(uint16_t(rec.per_hook_us.size()));
        for (const auto& [name, us] : rec.per_hook_us) {
            if (name.empty() || name.size() > 255)
                throw ProtocolError("hook name length must be 1..255");
            w.u8(uint8_t(name.size()));
            w.bytes(name.data(), name.size());
            w.u64(us);
        }
        w.u16(uint16_t(rec.skipped_hooks.size()));
        for (const auto& [name, err] : rec.skipped_hooks) {
            if (name.empty() || name.size() > 255)
                throw ProtocolError("hook name length must be 1..255");
            if (err.size() > UINT16_MAX) throw ProtocolError("skip reason too long");
            w.u8(uint8_t(name.size()));
            w.bytes(name.data(), name.size());
            w.u16(uint16_t(err.size()));
            w.bytes(err.data(), err.size());
        }
    }
    return std::move(w.buf);
}

StatsReport decode_stats(std::span<const uint8_t> payload) {
    Reader r{payload};
    StatsReport s;
    s.frames_received = r.u64("stats.frames_received");
    s.frames_answered = r.u64("stats.frames_answered");
    s.frames_dropped = r.u64("stats.frames_dropped");
    const uint32_t n = r.u32("stats.record_count");
    if (uint64_t(n) * 34 > payload.size())
        throw DecodeError(DecodeError::Kind::Truncated, "record count exceeds payload", 24);
    for (uint32_t i = 0; i < n; ++i) {
        LatencyRecord rec;
        rec.frame_id = r.u64("record.frame_id");
        rec.t_receive_us = r.u64("record.t_receive_us");
        rec.t_plan_ready_us = r.u64("record.t_plan_ready_us");
        rec.t_sent_us = r.u64("record.t_sent_us");
        const uint16_t hooks_n = r.u16("record.hook_count");
        for (uint16_t j = 0; j < hooks_n; ++j) {
            const uint8_t len = r.u8("record.hook_name_len");
            auto name = r.bytes(len, "record.hook_name");
            rec.per_hook_us[std::string(name.begin(), name.end())] = r.u64("record.hook_us");
        }
        const uint16_t skips = r.u16("record.skip_count");
        for (uint16_t j = 0; j < skips; ++j) {
            const uint8_t len = r.u8("record.skip_name_len");
            auto name = r.bytes(len, "record.skip_name");
            const uint16_t elen = r.u16("record.skip_error_len");
            auto err = r.bytes(elen, "record.skip_error");
            rec.skipped_hooks[std::string(name.begin(), name.end())] =
                std::string(err.begin(), err.end());
        }
        s.records.push_back(std::move(rec));
    }
    r.done();
    return s;
}

// --- latency budget --------------------------------------------------------------

BudgetReport latency_budget(const BudgetInput& input) {
    if (!(input.bandwidth_bps > 0)) throw ConfigError("bandwidth_bps must be positive");
    if (!(input.image_bits > 0)) throw ConfigError("image_bits must be positive");
    if (!(input.target_fps > 0)) throw ConfigError("target_fps must be positive");
    if (input.per_model_ms.empty()) throw ConfigError("per_model_ms must be non-empty");
    double sum = 0;
    for (double ms : input.per_model_ms) {
        if (!(ms > 0)) throw ConfigError("per_model_ms entries must be positive");
        sum += ms;
    }
    BudgetReport rep;
    rep.one_way_ms = input.image_bits / input.bandwidth_bps * 1000.0;
    rep.total_ms = 2.0 * rep.one_way_ms + sum;
    rep.max_fps = int64_t(std::floor(1000.0 / rep.total_ms));
    const double mean = sum / double(input.per_model_ms.size());
    rep.max_models_at_target = int64_t(std::floor((1000.0 / input.target_fps) / mean));
    return rep;
}

// --- server -----------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

// Reads exactly n bytes; false on clean EOF at a message boundary, throws on
// mid-read EOF.
bool read_exact(int fd, uint8_t* dst, std::size_t n, bool allow_eof_at_start) {
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::read(fd, dst + got, n - got);
        if (r == 0) {
            if (got == 0 && allow_eof_at_start) return false;
            throw DecodeError(DecodeError::Kind::Truncated, "connection closed mid-message",
                              got);
        }
        if (r < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("read failed: ") + std::strerror(errno));
        }
        got += std::size_t(r);
    }
    return true;
}

void write_all(int fd, const std::vector<uint8_t>& bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t r = ::write(fd, bytes.data() + sent, bytes.size() - sent);
        if (r < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("write failed: ") + std::strerror(errno));
        }
        sent += std::size_t(r);
    }
}

// Blocking read of one whole message from the stream.
std::optional<WireMessage> read_message(int fd, bool allow_eof) {
    uint8_t header[kHeaderBytes];
    if (!read_exact(fd, header, kHeaderBytes, allow_eof)) return std::nullopt;
    const MessageHeader h = decode_header(std::span<const uint8_t>(header, kHeaderBytes));
    WireMessage msg;
    msg.type = h.type;
    msg.payload.resize(h.length);
    if (h.length) read_exact(fd, msg.payload.data(), h.length, false);
    return msg;
}

struct Mailbox {
    std::mutex mu;
    std::condition_variable cv;
    std::optional<Frame> latest;
    uint64_t t_latest_us = 0;   // session clock at arrival
    uint64_t received = 0;
    uint64_t dropped = 0;
    bool stats_requested = false;
    bool closed = false;        // peer said BYE / reader failed
    ByeInfo close_info{0, ""};
};

}  // namespace

struct Server::Impl {
    ServerConfig cfg;
    int listen_fd = -1;
    uint16_t bound_port = 0;
    std::atomic<bool> accepting{false};
    std::thread accept_thread;
    std::mutex sessions_mu;
    std::vector<std::thread> sessions;
    std::vector<int> session_fds;

    explicit Impl(ServerConfig c) : cfg(std::move(c)) {}

    void session(int fd, std::size_t slot);
    void run_accept_loop();
    void start();
    void stop();
};

void Server::Impl::start() {
    listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd < 0) throw ProtocolError("socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(cfg.port);
    if (::inet_pton(AF_INET, cfg.host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd);
        listen_fd = -1;
        throw ConfigError("bad listen address: " + cfg.host);
    }
    if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(listen_fd, 16) != 0) {
        ::close(listen_fd);
        listen_fd = -1;
        throw ProtocolError(std::string("bind/listen failed: ") + std::strerror(errno));
    }
    socklen_t alen = sizeof addr;
    ::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &alen);
    bound_port = ntohs(addr.sin_port);

    accepting = true;
    accept_thread = std::thread([this] { run_accept_loop(); });
}

void Server::Impl::run_accept_loop() {
    while (accepting) {
        const int fd = ::accept(listen_fd, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            break;  // listen socket shut down
        }
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::lock_guard lk(sessions_mu);
        if (!accepting || sessions.size() >= cfg.max_sessions) {
            ::close(fd);
            continue;
        }
        const std::size_t slot = session_fds.size();
        session_fds.push_back(fd);
        sessions.emplace_back([this, fd, slot] { session(fd, slot); });
    }
}

void Server::Impl::session(int fd, std::size_t slot) {
    struct FdGuard {
        Impl* impl;
        int fd;
        std::size_t slot;
        ~FdGuard() {
            std::lock_guard lk(impl->sessions_mu);
            ::close(fd);
            impl->session_fds[slot] = -1;  // stop() must not touch a reused fd
        }
    } guard{this, fd, slot};

    const auto t0 = Clock::now();
    const auto now_us = [&] {
        return uint64_t(std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() -
                                                                              t0)
                            .count());
    };
    const auto send = [&](MsgType type, std::vector<uint8_t> payload) {
        write_all(fd, encode_message(WireMessage{type, std::move(payload)}));
    };
    const auto bye_and_close = [&](uint32_t code, const std::string& msg) {
        try {
            send(MsgType::Bye, encode_bye(ByeInfo{code, msg}));
        } catch (...) {
        }
        ::shutdown(fd, SHUT_RDWR);
    };

    // ---- handshake: first message must be a valid HELLO
    Hello hello;
    try {
        auto first = read_message(fd, true);
        if (!first || first->type != MsgType::Hello)
            throw ProtocolError("expected HELLO as the first message");
        hello = decode_hello(first->payload);
    } catch (const std::exception& e) {
        bye_and_close(1, e.what());
        return;
    }

    // requested interventions select a subset of the configured bindings
    std::vector<hooks::HookBinding> bindings = cfg.bindings;
    if (!hello.interventions.empty()) {
        for (const std::string& want : hello.interventions) {
            const bool known =
                std::any_of(bindings.begin(), bindings.end(),
                            [&](const hooks::HookBinding& b) { return b.name == want; });
            if (!known && want != "usage_lock") {
                bye_and_close(1, "unknown intervention: " + want);
                return;
            }
        }
        for (hooks::HookBinding& b : bindings)
            b.enabled = b.enabled && std::find(hello.interventions.begin(),
                                               hello.interventions.end(),
                                               b.name) != hello.interventions.end();
    }

    Mailbox box;
    std::thread reader([&] {
        try {
            while (true) {
                auto msg = read_message(fd, true);
                if (!msg) {  // peer vanished without BYE: treat as close
                    std::lock_guard lk(box.mu);
                    box.closed = true;
                    break;
                }
                if (msg->type == MsgType::Bye) {
                    std::lock_guard lk(box.mu);
                    box.closed = true;
                    box.close_info = decode_bye(msg->payload);
                    break;
                }
                if (msg->type == MsgType::Frame) {
                    Frame f = decode_frame(msg->payload);
                    if (f.width > hello.max_width || f.height > hello.max_height)
                        throw ProtocolError("frame exceeds the HELLO dimension bound");
                    std::lock_guard lk(box.mu);
                    ++box.received;
                    if (box.latest) ++box.dropped;
                    box.latest = std::move(f);
                    box.t_latest_us = now_us();
                } else if (msg->type == MsgType::Stats) {
                    std::lock_guard lk(box.mu);
                    box.stats_requested = true;
                } else {
                    throw ProtocolError("client may only send FRAME, STATS or BYE");
                }
                box.cv.notify_all();
            }
        } catch (const std::exception& e) {
            {
                std::lock_guard lk(box.mu);
                box.closed = true;
                box.close_info = ByeInfo{1, e.what()};
            }
        }
        box.cv.notify_all();
    });

    // ---- worker: answer the newest frame, collect stats
    uint64_t answered = 0;
    std::vector<LatencyRecord> pending_records;
    hooks::SessionState state;
    interventions::UsageLockState lock{cfg.lock};
    bool failed = false;
    std::string fail_msg;

    const auto flush_stats = [&] {
        StatsReport rep;
        {
            std::lock_guard lk(box.mu);
            rep.frames_received = box.received;
            rep.frames_dropped = box.dropped;
        }
        rep.frames_answered = answered;
        rep.records = std::move(pending_records);
        pending_records.clear();
        send(MsgType::Stats, encode_stats(rep));
    };

    try {
        while (true) {
            Frame frame;
            uint64_t t_receive = 0;
            bool have_frame = false, want_stats = false, closing = false;
            {
                std::unique_lock lk(box.mu);
                box.cv.wait(lk, [&] {
                    return box.latest.has_value() || box.stats_requested || box.closed;
                });
                if (box.latest) {
                    frame = std::move(*box.latest);
                    box.latest.reset();
                    t_receive = box.t_latest_us;
                    have_frame = true;
                }
                want_stats = box.stats_requested;
                box.stats_requested = false;
                closing = box.closed;
            }
            if (have_frame) {
                LatencyRecord rec;
                rec.frame_id = frame.id;
                rec.t_receive_us = t_receive;
                if (cfg.process_delay_ms)
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(cfg.process_delay_ms));

                hooks::PipelineResult result = hooks::run_pipeline(frame, bindings);
                if (cfg.enable_usage_lock && state.prev_frame) {
                    auto [next, veil] =
                        interventions::usage_lock_update(lock, *state.prev_frame, frame);
                    lock = std::move(next);
                    if (veil) result.plan.ops.push_back(*veil);
                }
                state.prev_frame = frame;
                ++state.frames_seen;

                rec.per_hook_us = std::move(result.record.per_hook_us);
                rec.skipped_hooks = std::move(result.record.skipped_hooks);
                rec.t_plan_ready_us = now_us();
                send(MsgType::Overlay, encode_overlay(result.plan));
                rec.t_sent_us = now_us();
                pending_records.push_back(std::move(rec));
                ++answered;
                if (cfg.stats_every && answered % cfg.stats_every == 0) flush_stats();
            }
            if (want_stats) flush_stats();
            if (closing) {
                // drain: a frame may have landed between the wait and now
                std::unique_lock lk(box.mu);
                if (box.latest) continue;
                break;
            }
        }
    } catch (const std::exception& e) {
        failed = true;
        fail_msg = e.what();
    }

    if (failed) {
        bye_and_close(2, fail_msg);
    } else {
        // surface a reader-recorded protocol error; otherwise close clean
        ByeInfo info{0, "session complete"};
        {
            std::lock_guard lk(box.mu);
            if (box.close_info.code != 0) info = box.close_info;
        }
        bye_and_close(info.code, info.message);
    }
    reader.join();
}

void Server::Impl::stop() {
    if (!accepting.exchange(false)) {
        if (listen_fd >= 0) {
            ::close(listen_fd);
            listen_fd = -1;
        }
        return;
    }
    ::shutdown(listen_fd, SHUT_RDWR);
    if (accept_thread.joinable()) accept_thread.join();
    ::close(listen_fd);
    listen_fd = -1;

    std::vector<std::thread> to_join;
    {
        std::lock_guard lk(sessions_mu);
        // unblock readers; workers drain + BYE. slots stay valid for FdGuard.
        for (int fd : session_fds)
            if (fd >= 0) ::shutdown(fd, SHUT_RD);
        to_join.swap(sessions);
    }
    for (std::thread& t : to_join)
        if (t.joinable()) t.join();
}

Server::Server(ServerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

Server::~Server() {
    try {
        stop();
    } catch (...) {
    }
}

void Server::start() { impl_->start(); }

void Server::stop() { impl_->stop(); }

uint16_t Server::port() const { return impl_->bound_port; }

bool Server::running() const { return impl_->accepting.load(); }

void serve(const ServerConfig& cfg, const std::atomic<bool>& stop_flag) {
    Server server(cfg);
    server.start();
    while (!stop_flag.load())
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    server.stop();
}

}  // namespace gtrm::net

#include "doctest.h"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <thread>
#include <vector>

#include "gtrm/corpus.hpp"
#include "gtrm/net.hpp"

using namespace gtrm;
using namespace gtrm::net;

namespace {

// minimal blocking wire client for poking the server
class TestClient {
public:
    explicit TestClient(uint16_t port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(fd_ >= 0);
        timeval tv{15, 0};  // generous; tests fail fast on logic errors anyway
        ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
        REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    }
    ~TestClient() {
        if (fd_ >= 0) ::close(fd_);
    }

    void send_raw(const std::vector<uint8_t>& bytes) {
        std::size_t off = 0;
        while (off < bytes.size()) {
            const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, 0);
            REQUIRE(n > 0);
            off += std::size_t(n);
        }
    }
    void send(MsgType type, std::vector<uint8_t> payload) {
        send_raw(encode_message(WireMessage{type, std::move(payload)}));
    }

    // nullopt on orderly EOF
    std::optional<WireMessage> recv() {
        std::vector<uint8_t> header(kHeaderBytes);
        if (!read_exact(header.data(), header.size())) return std::nullopt;
        const MessageHeader h = decode_header(header);
        WireMessage msg{h.type, std::vector<uint8_t>(h.length)};
        if (h.length && !read_exact(msg.payload.data(), msg.payload.size()))
            return std::nullopt;
        return msg;
    }

    // reads until BYE, collecting overlays/stats along the way
    struct Drained {
        std::vector<OverlayPlan> overlays;
        std::vector<StatsReport> stats;
        std::optional<ByeInfo> bye;
    };
    Drained drain() {
        Drained d;
        while (auto msg = recv()) {
            if (msg->type == MsgType::Overlay)
                d.overlays.push_back(decode_overlay(msg->payload));
            else if (msg->type == MsgType::Stats)
                d.stats.push_back(decode_stats(msg->payload));
            else if (msg->type == MsgType::Bye) {
                d.bye = decode_bye(msg->payload);
                break;
            }
        }
        return d;
    }

private:
    bool read_exact(uint8_t* dst, std::size_t n) {
        std::size_t off = 0;
        while (off < n) {
            const ssize_t got = ::recv(fd_, dst + off, n - off, 0);
            if (got == 0) return false;
            REQUIRE(got > 0);
            off += std::size_t(got);
        }
        return true;
    }

    int fd_ = -1;
};

Frame tiny_frame(uint64_t id, uint32_t w = 2, uint32_t h = 2) {
    std::vector<uint8_t> px(std::size_t(w) * h, uint8_t(id));
    return make_frame(id, id * 1000, w, h, PixelFormat::GRAY8, std::move(px));
}

hooks::HookBinding stamp_binding(const char* name) {
    hooks::HookBinding b;
    b.kind = hooks::HookKind::Model;
    b.name = name;
    b.registration_index = 0;
    b.run = [](const Frame& f) {
        hooks::HookResult r;
        r.ops.push_back(make_fill_rect(Region{0, 0, f.width, 1}, Rgba{0, 0, 0, 255}));
        return r;
    };
    return b;
}

}  // namespace

TEST_CASE("hello then bye: clean close with no frames") {
    ServerConfig cfg;
    Server server(std::move(cfg));
    server.start();
    REQUIRE(server.port() != 0);
    CHECK(server.running());

    TestClient c(server.port());
    c.send(MsgType::Hello, encode_hello(Hello{}));
    c.send(MsgType::Bye, encode_bye({0, "done"}));
    auto d = c.drain();
    CHECK(d.overlays.empty());
    REQUIRE(d.bye.has_value());
    CHECK(d.bye->code == 0);
    CHECK(d.bye->message == "session complete");
    server.stop();
    CHECK(!server.running());
}

TEST_CASE("paced frames are all answered in order") {
    ServerConfig cfg;
    cfg.bindings.push_back(stamp_binding("stamp"));
    Server server(std::move(cfg));
    server.start();

    TestClient c(server.port());
    c.send(MsgType::Hello, encode_hello(Hello{}));
    for (uint64_t id = 1; id <= 10; ++id) {
        c.send(MsgType::Frame, encode_frame(tiny_frame(id, 16, 16)));
        auto msg = c.recv();
        REQUIRE(msg.has_value());
        REQUIRE(msg->type == MsgType::Overlay);
        OverlayPlan plan = decode_overlay(msg->payload);
        CHECK(plan.frame_id == id);
        REQUIRE(plan.ops.size() == 1);
        CHECK(plan.ops[0].kind == OpKind::FillRect);
    }
    c.send(MsgType::Bye, encode_bye({0, ""}));
    auto d = c.drain();
    REQUIRE(d.bye.has_value());
    CHECK(d.bye->code == 0);
    server.stop();
}

TEST_CASE("keep-latest: a burst is answered by a strictly increasing subsequence") {
    ServerConfig cfg;
    cfg.process_delay_ms = 20;   // make the worker visibly slower than the sender
    cfg.stats_every = 0;         // no periodic stats; we ask explicitly
    Server server(std::move(cfg));
    server.start();

    TestClient c(server.port());
    c.send(MsgType::Hello, encode_hello(Hello{}));
    const uint64_t kBurst = 30;
    for (uint64_t id = 1; id <= kBurst; ++id)
        c.send(MsgType::Frame, encode_frame(tiny_frame(id, 16, 16)));

    // collect overlays until the final frame is answered (keep-latest
    // guarantees the newest frame is never starved)
    std::vector<uint64_t> answered;
    while (answered.empty() || answered.back() != kBurst) {
        auto msg = c.recv();
        REQUIRE(msg.has_value());
        if (msg->type != MsgType::Overlay) continue;
        answered.push_back(decode_overlay(msg->payload).frame_id);
    }
    REQUIRE(!answered.empty());
    CHECK(answered.size() < kBurst);  // the burst actually outpaced the worker
    for (std::size_t i = 1; i < answered.size(); ++i)
        CHECK(answered[i] > answered[i - 1]);

    // explicit STATS: accounting must add up now that everything is drained
    c.send(MsgType::Stats, {});
    std::optional<StatsReport> stats;
    while (!stats) {
        auto msg = c.recv();
        REQUIRE(msg.has_value());
        if (msg->type == MsgType::Stats) stats = decode_stats(msg->payload);
    }
    CHECK(stats->frames_received == kBurst);
    CHECK(stats->frames_answered == answered.size());
    CHECK(stats->frames_dropped == kBurst - answered.size());
    REQUIRE(stats->records.size() == answered.size());
    for (std::size_t i = 0; i < answered.size(); ++i) {
        CHECK(stats->records[i].frame_id == answered[i]);
        CHECK(stats->records[i].t_sent_us >= stats->records[i].t_plan_ready_us);
        CHECK(stats->records[i].t_plan_ready_us >= stats->records[i].t_receive_us);
    }

    c.send(MsgType::Bye, encode_bye({0, ""}));
    auto d = c.drain();
    REQUIRE(d.bye.has_value());
    CHECK(d.bye->code == 0);
    server.stop();
}

TEST_CASE("periodic stats arrive every stats_every answered frames") {
    ServerConfig cfg;
    cfg.stats_every = 2;
    Server server(std::move(cfg));
    server.start();

    TestClient c(server.port());
    c.send(MsgType::Hello, encode_hello(Hello{}));
    std::size_t stats_seen = 0, overlays_seen = 0;
    for (uint64_t id = 1; id <= 6; ++id) {
        c.send(MsgType::Frame, encode_frame(tiny_frame(id)));
        while (true) {
            auto msg = c.recv();
            REQUIRE(msg.has_value());
            if (msg->type == MsgType::Stats) {
                ++stats_seen;
                continue;
            }
            REQUIRE(msg->type == MsgType::Overlay);
            ++overlays_seen;
            break;
        }
    }
    // 6 answered / every 2 -> 3 reports (the last may still be in flight)
    c.send(MsgType::Bye, encode_bye({0, ""}));
    auto d = c.drain();
    stats_seen += d.stats.size();
    CHECK(overlays_seen == 6);
    CHECK(stats_seen == 3);
    server.stop();
}

TEST_CASE("unknown requested intervention is refused with BYE 1") {
    ServerConfig cfg;
    cfg.bindings.push_back(stamp_binding("stamp"));
    Server server(std::move(cfg));
    server.start();

    TestClient c(server.port());
    Hello h;
    h.interventions = {"nosuch"};
    c.send(MsgType::Hello, encode_hello(h));
    auto d = c.drain();
    REQUIRE(d.bye.has_value());
    CHECK(d.bye->code == 1);
    CHECK(d.bye->message.find("unknown intervention") != std::string::npos);
    server.stop();
}

TEST_CASE("hello intervention filter disables unlisted bindings") {
    ServerConfig cfg;
    cfg.bindings.push_back(stamp_binding("stamp"));
    cfg.enable_usage_lock = true;
    Server server(std::move(cfg));
    server.start();

    // asking only for usage_lock suppresses the stamp binding
    {
        TestClient c(server.port());
        Hello h;
        h.interventions = {"usage_lock"};
        c.send(MsgType::Hello, encode_hello(h));
        c.send(MsgType::Frame, encode_frame(tiny_frame(1, 16, 16)));
        auto msg = c.recv();
        REQUIRE(msg.has_value());
        REQUIRE(msg->type == MsgType::Overlay);
        CHECK(decode_overlay(msg->payload).ops.empty());
        c.send(MsgType::Bye, encode_bye({0, ""}));
        c.drain();
    }
    // asking for the stamp keeps it
    {
        TestClient c(server.port());
        Hello h;
        h.interventions = {"stamp"};
        c.send(MsgType::Hello, encode_hello(h));
        c.send(MsgType::Frame, encode_frame(tiny_frame(2, 16, 16)));
        auto msg = c.recv();
        REQUIRE(msg.has_value());
        CHECK(decode_overlay(msg->payload).ops.size() == 1);
        c.send(MsgType::Bye, encode_bye({0, ""}));
        c.drain();
    }
    server.stop();
}

TEST_CASE("a botched session does not poison the next one") {
    ServerConfig cfg;
    Server server(std::move(cfg));
    server.start();

    // first message isn't HELLO
    {
        TestClient c(server.port());
        c.send(MsgType::Stats, {});
        auto d = c.drain();
        REQUIRE(d.bye.has_value());
        CHECK(d.bye->code == 1);
    }
    // raw garbage where a header should be
    {
        TestClient c(server.port());
        c.send_raw({0xDE, 0xAD, 0xBE, 0xEF, 1, 2, 0, 0, 0, 0});
        auto d = c.drain();
        REQUIRE(d.bye.has_value());
        CHECK(d.bye->code == 1);
    }
    // frame larger than the HELLO bound mid-session
    {
        TestClient c(server.port());
        Hello h;
        h.max_width = 8;
        h.max_height = 8;
        c.send(MsgType::Hello, encode_hello(h));
        c.send(MsgType::Frame, encode_frame(tiny_frame(1, 16, 16)));
        auto d = c.drain();
        REQUIRE(d.bye.has_value());
        CHECK(d.bye->code == 1);
        CHECK(d.bye->message.find("dimension bound") != std::string::npos);
    }
    // an untouched client still gets a clean run
    {
        TestClient c(server.port());
        c.send(MsgType::Hello, encode_hello(Hello{}));
        c.send(MsgType::Frame, encode_frame(tiny_frame(5)));
        auto msg = c.recv();
        REQUIRE(msg.has_value());
        CHECK(msg->type == MsgType::Overlay);
        c.send(MsgType::Bye, encode_bye({0, ""}));
        auto d = c.drain();
        REQUIRE(d.bye.has_value());
        CHECK(d.bye->code == 0);
    }
    server.stop();
}

TEST_CASE("usage lock veils scrolled sessions over the wire") {
    corpus::SequenceSpec seq;
    seq.seed = 626;
    seq.width = 240;
    seq.height = 320;
    const int32_t shifts[] = {80, 80, 80, 80, 80, 80};
    auto frames = corpus::generate_scroll_sequence(seq, shifts);

    ServerConfig cfg;
    cfg.enable_usage_lock = true;
    cfg.lock.s0 = 2;
    cfg.lock.s1 = 4;
    cfg.lock.max_alpha = 0.5;
    cfg.lock.event_px = 100;  // 480px travel -> 4 events
    Server server(std::move(cfg));
    server.start();

    TestClient c(server.port());
    c.send(MsgType::Hello, encode_hello(Hello{}));
    float last_alpha = 0.0f;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        Frame f = frames[i];
        f.id = i + 1;
        c.send(MsgType::Frame, encode_frame(f));
        auto msg = c.recv();
        REQUIRE(msg.has_value());
        OverlayPlan plan = decode_overlay(msg->payload);
        for (const auto& op : plan.ops)
            if (op.kind == OpKind::Veil) last_alpha = op.alpha;
    }
    CHECK(last_alpha == doctest::Approx(0.5));
    c.send(MsgType::Bye, encode_bye({0, ""}));
    c.drain();
    server.stop();
}

TEST_CASE("stop() interrupts a live session with a clean BYE") {
    ServerConfig cfg;
    Server server(std::move(cfg));
    server.start();

    TestClient c(server.port());
    c.send(MsgType::Hello, encode_hello(Hello{}));
    c.send(MsgType::Frame, encode_frame(tiny_frame(1)));
    auto first = c.recv();
    REQUIRE(first.has_value());

    std::thread stopper([&] { server.stop(); });
    auto d = c.drain();
    stopper.join();
    REQUIRE(d.bye.has_value());
    CHECK(d.bye->code == 0);
    CHECK(!server.running());

    // double stop is harmless
    server.stop();
}

#pragma once

// Minimal MQTT 3.1.1: packet codec, a reconnecting client and a small broker.
// Covers what the gateway and the simulated fleet need: CONNECT, PUBLISH at
// QoS 0/1, SUBSCRIBE/UNSUBSCRIBE with + and # wildcards, retained messages,
// keepalive pings. No TLS, no auth, no QoS 2, no persistent sessions.

#include "edgetalk/error.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace edgetalk::mqtt {

enum class PacketType : std::uint8_t {
    connect = 1,
    connack = 2,
    publish = 3,
    puback = 4,
    subscribe = 8,
    suback = 9,
    unsubscribe = 10,
    unsuback = 11,
    pingreq = 12,
    pingresp = 13,
    disconnect = 14,
};

struct Packet {
    PacketType type;
    std::uint8_t flags = 0; // low nibble of the fixed header
    std::string body;       // variable header + payload
};

struct Message {
    std::string topic;
    std::string payload;
    int qos = 0;
    bool retain = false;
    bool dup = false;
    std::uint16_t packet_id = 0;
};

struct ConnectInfo {
    std::string client_id;
    std::uint16_t keepalive_seconds = 0;
    bool clean_session = true;
};

struct Subscription {
    std::string filter;
    int qos = 0;
};

std::string encode(const Packet& packet);
// Pops one complete packet off the front of `buffer`; nullopt if incomplete.
// Throws decode_error on a malformed fixed header.
std::optional<Packet> try_decode(std::string& buffer);

Packet make_connect(const ConnectInfo& info);
Packet make_connack(std::uint8_t return_code);
Packet make_publish(const Message& message);
Packet make_puback(std::uint16_t packet_id);
Packet make_subscribe(std::uint16_t packet_id, const std::vector<Subscription>& subs);
Packet make_suback(std::uint16_t packet_id, const std::vector<std::uint8_t>& codes);
Packet make_unsubscribe(std::uint16_t packet_id, const std::vector<std::string>& filters);
Packet make_unsuback(std::uint16_t packet_id);
Packet make_simple(PacketType type); // pingreq, pingresp, disconnect

ConnectInfo parse_connect(const Packet& packet);
Message parse_publish(const Packet& packet);
std::uint16_t parse_packet_id(const Packet& packet);
std::vector<Subscription> parse_subscribe(const Packet& packet, std::uint16_t& packet_id);
std::vector<std::string> parse_unsubscribe(const Packet& packet, std::uint16_t& packet_id);

bool topic_matches(std::string_view filter, std::string_view topic);
bool valid_topic_filter(std::string_view filter);

enum class LinkState { disconnected, connecting, connected };
std::string_view to_string(LinkState state);

struct ClientOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 1883;
    std::string client_id;
    std::chrono::seconds keepalive{30};
    std::chrono::milliseconds backoff_initial{100};
    std::chrono::milliseconds backoff_max{5000};
    // Messages accepted while disconnected before publish() fails with backpressure.
    std::size_t offline_queue_limit = 64;
};

// Reconnecting client. One connection-owner thread does all socket I/O;
// publish/subscribe may be called from any thread (including from inside the
// message handler) and are serialized onto that thread.
class Client {
public:
    using MessageHandler = std::function<void(const Message&)>;
    using StateHandler = std::function<void(LinkState)>;

    explicit Client(ClientOptions options);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    void set_message_handler(MessageHandler handler);
    void set_state_handler(StateHandler handler);

    void start();
    void stop();

    // Remembered and re-sent after every reconnect.
    void subscribe(const std::string& filter, int qos);
    void publish(const std::string& topic, std::string payload, int qos, bool retain = false);

    LinkState state() const { return state_.load(); }
    bool wait_connected(std::chrono::milliseconds timeout) const;
    // Test hook: drops the socket; the client reconnects through its normal path.
    void force_disconnect();
    std::size_t connection_epoch() const { return epoch_.load(); }

private:
    void run();
    bool connect_once();
    void serve_connection();
    void close_socket();
    void set_state(LinkState s);
    void send_packet(const Packet& p);
    void wake();
    std::uint16_t next_packet_id();

    ClientOptions options_;
    MessageHandler on_message_;
    StateHandler on_state_;

    mutable std::mutex mutex_;
    mutable std::condition_variable state_cv_;
    std::deque<Message> outbound_;
    std::map<std::uint16_t, Message> inflight_; // QoS1 awaiting PUBACK
    std::vector<Subscription> subscriptions_;
    bool subscriptions_dirty_ = false;
    std::uint16_t packet_id_ = 0;

    std::atomic<LinkState> state_{LinkState::disconnected};
    std::atomic<bool> running_{false};
    std::atomic<bool> drop_requested_{false};
    std::atomic<std::size_t> epoch_{0};
    int sock_ = -1;
    int wake_fd_ = -1;
    std::thread worker_;
};

// Small single-threaded broker for tests, the bench harness and local dev.
class Broker {
public:
    using PublishObserver = std::function<void(const Message&)>;

    explicit Broker(std::string host = "127.0.0.1", std::uint16_t port = 0);
    ~Broker();
    Broker(const Broker&) = delete;
    Broker& operator=(const Broker&) = delete;

    void start();
    void stop();
    bool running() const { return running_.load(); }
    std::uint16_t port() const { return port_; }
    const std::string& host() const { return host_; }

    // Called on the broker thread for every PUBLISH received from a client.
    void set_publish_observer(PublishObserver observer);
    std::size_t client_count() const;

private:
    struct Session;
    void run();
    void accept_client();
    bool handle_readable(Session& session);
    void handle_packet(Session& session, const Packet& packet);
    void route(const Message& message);
    void send_to(Session& session, const Packet& packet);

    std::string host_;
    std::uint16_t port_;
    int listen_fd_ = -1;
    int wake_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread worker_;
    mutable std::mutex mutex_;
    std::vector<std::unique_ptr<Session>> sessions_;
    std::map<std::string, Message> retained_;
    PublishObserver observer_;
};

} // namespace edgetalk::mqtt

#include "edgetalk/mqtt.hpp"

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>

namespace edgetalk::mqtt {

namespace {

using SteadyClock = std::chrono::steady_clock;

int connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    auto service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0) return -1;
    int fd = -1;
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        int flags = ::fcntl(fd, F_GETFL, 0);
        ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
            if (rc == 1) {
                int err = 0;
                socklen_t len = sizeof(err);
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                rc = err == 0 ? 0 : -1;
            } else {
                rc = -1;
            }
        }
        if (rc == 0) {
            ::fcntl(fd, F_SETFL, flags);
            break;
        }
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    return fd;
}

bool send_all(int fd, std::string_view data) {
    while (!data.empty()) {
        auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

} // namespace

Client::Client(ClientOptions options) : options_(std::move(options)) {
    if (options_.client_id.empty()) throw Error(ErrorCode::invalid_argument, "mqtt client id must not be empty");
    if (options_.backoff_initial > options_.backoff_max || options_.backoff_initial.count() <= 0) {
        throw Error(ErrorCode::invalid_argument, "reconnect backoff must satisfy 0 < initial <= max");
    }
    wake_fd_ = ::eventfd(0, EFD_CLOEXEC | EFD_NONBLOCK);
    if (wake_fd_ < 0) throw Error(ErrorCode::io_error, "eventfd failed");
}

Client::~Client() {
    stop();
    if (wake_fd_ >= 0) ::close(wake_fd_);
}

void Client::set_message_handler(MessageHandler handler) {
    std::lock_guard lock(mutex_);
    on_message_ = std::move(handler);
}

void Client::set_state_handler(StateHandler handler) {
    std::lock_guard lock(mutex_);
    on_state_ = std::move(handler);
}

void Client::start() {
    if (running_.exchange(true)) return;
    worker_ = std::thread([this] { run(); });
}

void Client::stop() {
    if (!running_.exchange(false)) return;
    wake();
    if (worker_.joinable()) worker_.join();
}

void Client::subscribe(const std::string& filter, int qos) {
    if (!valid_topic_filter(filter)) throw Error(ErrorCode::invalid_argument, "invalid topic filter: " + filter);
    {
        std::lock_guard lock(mutex_);
        auto it = std::find_if(subscriptions_.begin(), subscriptions_.end(),
                               [&](const Subscription& s) { return s.filter == filter; });
        if (it != subscriptions_.end()) {
            it->qos = qos;
        } else {
            subscriptions_.push_back({filter, qos});
        }
        subscriptions_dirty_ = true;
    }
    wake();
}

void Client::publish(const std::string& topic, std::string payload, int qos, bool retain) {
    if (topic.empty() || topic.find_first_of("+#") != std::string::npos) {
        throw Error(ErrorCode::invalid_argument, "invalid publish topic: " + topic);
    }
    if (qos < 0 || qos > 1) throw Error(ErrorCode::invalid_argument, "only QoS 0 and 1 are supported");
    {
        std::lock_guard lock(mutex_);
        if (state_.load() != LinkState::connected && outbound_.size() >= options_.offline_queue_limit) {
            throw Error(ErrorCode::backpressure,
                        "not connected and outbound queue is full (" + std::to_string(outbound_.size()) + ")");
        }
        Message m;
        m.topic = topic;
        m.payload = std::move(payload);
        m.qos = qos;
        m.retain = retain;
        outbound_.push_back(std::move(m));
    }
    wake();
}

bool Client::wait_connected(std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    return state_cv_.wait_for(lock, timeout, [this] { return state_.load() == LinkState::connected; });
}

void Client::force_disconnect() {
    drop_requested_ = true;
    wake();
}

void Client::wake() {
    std::uint64_t one = 1;
    [[maybe_unused]] auto n = ::write(wake_fd_, &one, sizeof(one));
}

std::uint16_t Client::next_packet_id() {
    // caller holds mutex_
    do {
        ++packet_id_;
    } while (packet_id_ == 0 || inflight_.count(packet_id_) != 0);
    return packet_id_;
}

void Client::set_state(LinkState s) {
    StateHandler handler;
    {
        std::lock_guard lock(mutex_);
        if (state_.load() == s) return;
        state_ = s;
        handler = on_state_;
    }
    state_cv_.notify_all();
    if (handler) handler(s);
}

void Client::send_packet(const Packet& p) {
    if (!send_all(sock_, encode(p))) throw Error(ErrorCode::io_error, "mqtt send failed");
}

void Client::close_socket() {
    if (sock_ >= 0) {
        ::close(sock_);
        sock_ = -1;
    }
}

void Client::run() {
    auto backoff = options_.backoff_initial;
    while (running_) {
        set_state(LinkState::connecting);
        if (connect_once()) {
            backoff = options_.backoff_initial;
            try {
                serve_connection();
            } catch (const Error&) {
                // connection lost; fall through to reconnect
            }
        }
        close_socket();
        set_state(LinkState::disconnected);
        if (!running_) break;

        pollfd pfd{wake_fd_, POLLIN, 0};
        ::poll(&pfd, 1, static_cast<int>(backoff.count()));
        std::uint64_t drained;
        [[maybe_unused]] auto n = ::read(wake_fd_, &drained, sizeof(drained));
        backoff = std::min(backoff * 2, options_.backoff_max);
    }
}

bool Client::connect_once() {
    drop_requested_ = false;
    sock_ = connect_tcp(options_.host, options_.port, std::chrono::milliseconds{2000});
    if (sock_ < 0) return false;
    try {
        ConnectInfo info;
        info.client_id = options_.client_id;
        info.keepalive_seconds = static_cast<std::uint16_t>(options_.keepalive.count());
        send_packet(make_connect(info));

        std::string buffer;
        auto deadline = SteadyClock::now() + std::chrono::seconds{5};
        while (SteadyClock::now() < deadline && running_) {
            pollfd pfd{sock_, POLLIN, 0};
            if (::poll(&pfd, 1, 100) <= 0) continue;
            char tmp[512];
            auto n = ::recv(sock_, tmp, sizeof(tmp), 0);
            if (n <= 0) return false;
            buffer.append(tmp, static_cast<std::size_t>(n));
            if (auto p = try_decode(buffer)) {
                return p->type == PacketType::connack && p->body.size() == 2 && p->body[1] == 0;
            }
        }
    } catch (const Error&) {
    }
    return false;
}

void Client::serve_connection() {
    {
        std::vector<Subscription> subs;
        std::vector<Message> resend;
        {
            std::lock_guard lock(mutex_);
            subs = subscriptions_;
            subscriptions_dirty_ = false;
            for (auto& [id, m] : inflight_) {
                m.dup = true;
                resend.push_back(m);
            }
        }
        if (!subs.empty()) send_packet(make_subscribe(1, subs));
        for (const auto& m : resend) send_packet(make_publish(m));
    }
    ++epoch_;
    set_state(LinkState::connected);

    std::string buffer;
    auto last_tx = SteadyClock::now();
    auto last_rx = SteadyClock::now();
    const auto keepalive = std::chrono::duration_cast<std::chrono::milliseconds>(options_.keepalive);

    while (running_ && !drop_requested_) {
        std::vector<Message> to_send;
        std::vector<Subscription> subs;
        {
            std::lock_guard lock(mutex_);
            while (!outbound_.empty()) {
                auto m = std::move(outbound_.front());
                outbound_.pop_front();
                if (m.qos > 0) {
                    m.packet_id = next_packet_id();
                    inflight_[m.packet_id] = m;
                }
                to_send.push_back(std::move(m));
            }
            if (subscriptions_dirty_) {
                subs = subscriptions_;
                subscriptions_dirty_ = false;
            }
        }
        if (!subs.empty()) {
            send_packet(make_subscribe(2, subs));
            last_tx = SteadyClock::now();
        }
        for (const auto& m : to_send) {
            send_packet(make_publish(m));
            last_tx = SteadyClock::now();
        }

        int timeout_ms = 200;
        pollfd fds[2] = {{sock_, POLLIN, 0}, {wake_fd_, POLLIN, 0}};
        int rc = ::poll(fds, 2, timeout_ms);
        if (rc < 0 && errno != EINTR) return;
        if (fds[1].revents & POLLIN) {
            std::uint64_t drained;
            [[maybe_unused]] auto n = ::read(wake_fd_, &drained, sizeof(drained));
        }
        if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
            char tmp[4096];
            auto n = ::recv(sock_, tmp, sizeof(tmp), 0);
            if (n <= 0) return;
            buffer.append(tmp, static_cast<std::size_t>(n));
            last_rx = SteadyClock::now();
            while (auto p = try_decode(buffer)) {
                switch (p->type) {
                case PacketType::publish: {
                    auto m = parse_publish(*p);
                    if (m.qos == 1) send_packet(make_puback(m.packet_id));
                    MessageHandler handler;
                    {
                        std::lock_guard lock(mutex_);
                        handler = on_message_;
                    }
                    if (handler) handler(m);
                    break;
                }
                case PacketType::puback: {
                    auto id = parse_packet_id(*p);
                    std::lock_guard lock(mutex_);
                    inflight_.erase(id);
                    break;
                }
                default:
                    break;
                }
            }
        }
        auto now = SteadyClock::now();
        if (keepalive.count() > 0) {
            if (now - last_tx >= keepalive) {
                send_packet(make_simple(PacketType::pingreq));
                last_tx = now;
            }
            if (now - last_rx > keepalive * 2) return;
        }
    }
    if (!running_) {
        try {
            send_packet(make_simple(PacketType::disconnect));
        } catch (const Error&) {
        }
    }
}

} // namespace edgetalk::mqtt

#include "edgetalk/mqtt.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>

namespace edgetalk::mqtt {

struct Broker::Session {
    int fd = -1;
    bool connected = false;
    std::string client_id;
    std::string inbuf;
    std::vector<Subscription> subscriptions;
    std::uint16_t next_id = 0;
    bool closing = false;
};

Broker::Broker(std::string host, std::uint16_t port) : host_(std::move(host)), port_(port) {}

Broker::~Broker() { stop(); }

void Broker::set_publish_observer(PublishObserver observer) {
    std::lock_guard lock(mutex_);
    observer_ = std::move(observer);
}

std::size_t Broker::client_count() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(
        std::count_if(sessions_.begin(), sessions_.end(), [](const auto& s) { return s->connected; }));
}

void Broker::start() {
    if (running_) return;
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw Error(ErrorCode::io_error, "broker socket failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port_);
    if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        throw Error(ErrorCode::invalid_argument, "broker host must be an IPv4 address: " + host_);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 64) != 0) {
        auto err = std::string(std::strerror(errno));
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error(ErrorCode::io_error, "broker bind " + host_ + ":" + std::to_string(port_) + " failed: " + err);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    wake_fd_ = ::eventfd(0, EFD_CLOEXEC | EFD_NONBLOCK);
    running_ = true;
    worker_ = std::thread([this] { run(); });
}

void Broker::stop() {
    if (!running_.exchange(false)) return;
    std::uint64_t one = 1;
    [[maybe_unused]] auto n = ::write(wake_fd_, &one, sizeof(one));
    if (worker_.joinable()) worker_.join();
    std::lock_guard lock(mutex_);
    for (auto& s : sessions_) ::close(s->fd);
    sessions_.clear();
    ::close(listen_fd_);
    ::close(wake_fd_);
    listen_fd_ = -1;
    wake_fd_ = -1;
}

void Broker::run() {
    while (running_) {
        std::vector<pollfd> fds;
        {
            std::lock_guard lock(mutex_);
            fds.push_back({listen_fd_, POLLIN, 0});
            fds.push_back({wake_fd_, POLLIN, 0});
            for (const auto& s : sessions_) fds.push_back({s->fd, POLLIN, 0});
        }
        int rc = ::poll(fds.data(), fds.size(), 500);
        if (rc <= 0) continue;
        if (fds[1].revents & POLLIN) continue;
        if (fds[0].revents & POLLIN) accept_client();

        std::lock_guard lock(mutex_);
        for (std::size_t i = 2; i < fds.size(); ++i) {
            if ((fds[i].revents & (POLLIN | POLLHUP | POLLERR)) == 0) continue;
            auto it = std::find_if(sessions_.begin(), sessions_.end(),
                                   [&](const auto& s) { return s->fd == fds[i].fd; });
            if (it == sessions_.end()) continue;
            if (!handle_readable(**it)) (*it)->closing = true;
        }
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if ((*it)->closing) {
                ::close((*it)->fd);
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }
}

void Broker::accept_client() {
    int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) return;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    timeval tv{2, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    auto session = std::make_unique<Session>();
    session->fd = fd;
    std::lock_guard lock(mutex_);
    sessions_.push_back(std::move(session));
}

bool Broker::handle_readable(Session& session) {
    char tmp[4096];
    auto n = ::recv(session.fd, tmp, sizeof(tmp), 0);
    if (n <= 0) return false;
    session.inbuf.append(tmp, static_cast<std::size_t>(n));
    try {
        while (auto p = try_decode(session.inbuf)) {
            handle_packet(session, *p);
            if (session.closing) return false;
        }
    } catch (const Error&) {
        return false;
    }
    return true;
}

void Broker::send_to(Session& session, const Packet& packet) {
    auto bytes = encode(packet);
    std::string_view data(bytes);
    while (!data.empty()) {
        auto n = ::send(session.fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            session.closing = true;
            return;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void Broker::handle_packet(Session& session, const Packet& packet) {
    if (!session.connected && packet.type != PacketType::connect) {
        session.closing = true;
        return;
    }
    switch (packet.type) {
    case PacketType::connect: {
        auto info = parse_connect(packet);
        // A second connection with the same client id takes over.
        for (auto& other : sessions_) {
            if (other.get() != &session && other->connected && other->client_id == info.client_id) {
                other->closing = true;
            }
        }
        session.client_id = info.client_id;
        session.connected = true;
        send_to(session, make_connack(0));
        break;
    }
    case PacketType::publish: {
        auto m = parse_publish(packet);
        if (m.qos == 1) send_to(session, make_puback(m.packet_id));
        if (observer_) observer_(m);
        if (m.retain) {
            if (m.payload.empty()) {
                retained_.erase(m.topic);
            } else {
                retained_[m.topic] = m;
            }
        }
        route(m);
        break;
    }
    case PacketType::subscribe: {
        std::uint16_t id = 0;
        auto subs = parse_subscribe(packet, id);
        std::vector<std::uint8_t> codes;
        for (auto& s : subs) {
            if (!valid_topic_filter(s.filter)) {
                codes.push_back(0x80);
                continue;
            }
            s.qos = std::min(s.qos, 1);
            auto it = std::find_if(session.subscriptions.begin(), session.subscriptions.end(),
                                   [&](const Subscription& e) { return e.filter == s.filter; });
            if (it != session.subscriptions.end()) {
                it->qos = s.qos;
            } else {
                session.subscriptions.push_back(s);
            }
            codes.push_back(static_cast<std::uint8_t>(s.qos));
        }
        send_to(session, make_suback(id, codes));
        for (const auto& s : subs) {
            for (const auto& [topic, retained] : retained_) {
                if (!topic_matches(s.filter, topic)) continue;
                Message out = retained;
                out.qos = std::min(retained.qos, s.qos);
                out.retain = true;
                out.dup = false;
                if (out.qos > 0) {
                    if (++session.next_id == 0) ++session.next_id;
                    out.packet_id = session.next_id;
                }
                send_to(session, make_publish(out));
            }
        }
        break;
    }
    case PacketType::unsubscribe: {
        std::uint16_t id = 0;
        auto filters = parse_unsubscribe(packet, id);
        for (const auto& f : filters) {
            std::erase_if(session.subscriptions, [&](const Subscription& s) { return s.filter == f; });
        }
        send_to(session, make_unsuback(id));
        break;
    }
    case PacketType::pingreq:
        send_to(session, make_simple(PacketType::pingresp));
        break;
    case PacketType::disconnect:
        session.closing = true;
        break;
    default:
        break; // PUBACK from subscribers etc.
    }
}

void Broker::route(const Message& message) {
    for (auto& s : sessions_) {
        if (!s->connected || s->closing) continue;
        int best = -1;
        for (const auto& sub : s->subscriptions) {
            if (topic_matches(sub.filter, message.topic)) best = std::max(best, sub.qos);
        }
        if (best < 0) continue;
        Message out = message;
        out.qos = std::min(message.qos, best);
        out.retain = false;
        out.dup = false;
        if (out.qos > 0) {
            if (++s->next_id == 0) ++s->next_id;
            out.packet_id = s->next_id;
        }
        send_to(*s, make_publish(out));
    }
}

} // namespace edgetalk::mqtt

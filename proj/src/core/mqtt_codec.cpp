#include "edgetalk/mqtt.hpp"

namespace edgetalk::mqtt {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
}

void put_str(std::string& out, std::string_view s) {
    if (s.size() > 0xffff) throw Error(ErrorCode::invalid_argument, "mqtt string too long");
    put_u16(out, static_cast<std::uint16_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint16_t u16() {
        need(2);
        auto hi = static_cast<std::uint8_t>(data_[pos_]);
        auto lo = static_cast<std::uint8_t>(data_[pos_ + 1]);
        pos_ += 2;
        return static_cast<std::uint16_t>((hi << 8) | lo);
    }
    std::string str() {
        auto n = u16();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string rest() {
        std::string s(data_.substr(pos_));
        pos_ = data_.size();
        return s;
    }
    bool done() const { return pos_ >= data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw Error(ErrorCode::decode_error, "truncated mqtt packet");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode(const Packet& packet) {
    std::string out;
    out.push_back(static_cast<char>((static_cast<std::uint8_t>(packet.type) << 4) | (packet.flags & 0x0f)));
    std::size_t len = packet.body.size();
    if (len > 268435455) throw Error(ErrorCode::invalid_argument, "mqtt packet too large");
    do {
        std::uint8_t byte = len % 128;
        len /= 128;
        if (len > 0) byte |= 0x80;
        out.push_back(static_cast<char>(byte));
    } while (len > 0);
    out.append(packet.body);
    return out;
}

std::optional<Packet> try_decode(std::string& buffer) {
    if (buffer.size() < 2) return std::nullopt;
    std::size_t multiplier = 1;
    std::size_t length = 0;
    std::size_t pos = 1;
    while (true) {
        if (pos >= buffer.size()) return std::nullopt;
        if (pos > 4) throw Error(ErrorCode::decode_error, "malformed remaining length");
        auto byte = static_cast<std::uint8_t>(buffer[pos++]);
        length += (byte & 0x7f) * multiplier;
        multiplier *= 128;
        if ((byte & 0x80) == 0) break;
    }
    if (buffer.size() < pos + length) return std::nullopt;
    auto header = static_cast<std::uint8_t>(buffer[0]);
    auto type = header >> 4;
    if (type < 1 || type > 14) throw Error(ErrorCode::decode_error, "unknown mqtt packet type");
    Packet p{static_cast<PacketType>(type), static_cast<std::uint8_t>(header & 0x0f), buffer.substr(pos, length)};
    buffer.erase(0, pos + length);
    return p;
}

Packet make_connect(const ConnectInfo& info) {
    Packet p{PacketType::connect, 0, {}};
    put_str(p.body, "MQTT");
    p.body.push_back(4); // protocol level 3.1.1
    p.body.push_back(info.clean_session ? 0x02 : 0x00);
    put_u16(p.body, info.keepalive_seconds);
    put_str(p.body, info.client_id);
    return p;
}

Packet make_connack(std::uint8_t return_code) {
    Packet p{PacketType::connack, 0, {}};
    p.body.push_back(0);
    p.body.push_back(static_cast<char>(return_code));
    return p;
}

Packet make_publish(const Message& m) {
    if (m.qos < 0 || m.qos > 1) throw Error(ErrorCode::invalid_argument, "only QoS 0 and 1 are supported");
    Packet p{PacketType::publish, 0, {}};
    p.flags = static_cast<std::uint8_t>((m.dup ? 0x08 : 0) | (m.qos << 1) | (m.retain ? 0x01 : 0));
    put_str(p.body, m.topic);
    if (m.qos > 0) put_u16(p.body, m.packet_id);
    p.body.append(m.payload);
    return p;
}

Packet make_puback(std::uint16_t packet_id) {
    Packet p{PacketType::puback, 0, {}};
    put_u16(p.body, packet_id);
    return p;
}

Packet make_subscribe(std::uint16_t packet_id, const std::vector<Subscription>& subs) {
    Packet p{PacketType::subscribe, 0x02, {}};
    put_u16(p.body, packet_id);
    for (const auto& s : subs) {
        put_str(p.body, s.filter);
        p.body.push_back(static_cast<char>(s.qos));
    }
    return p;
}

Packet make_suback(std::uint16_t packet_id, const std::vector<std::uint8_t>& codes) {
    Packet p{PacketType::suback, 0, {}};
    put_u16(p.body, packet_id);
    for (auto c : codes) p.body.push_back(static_cast<char>(c));
    return p;
}

Packet make_unsubscribe(std::uint16_t packet_id, const std::vector<std::string>& filters) {
    Packet p{PacketType::unsubscribe, 0x02, {}};
    put_u16(p.body, packet_id);
    for (const auto& f : filters) put_str(p.body, f);
    return p;
}

Packet make_unsuback(std::uint16_t packet_id) {
    Packet p{PacketType::unsuback, 0, {}};
    put_u16(p.body, packet_id);
    return p;
}

Packet make_simple(PacketType type) { return Packet{type, 0, {}}; }

ConnectInfo parse_connect(const Packet& packet) {
    Reader r(packet.body);
    auto proto = r.str();
    auto level = r.u8();
    if (proto != "MQTT" || level != 4) throw Error(ErrorCode::decode_error, "unsupported mqtt protocol");
    auto flags = r.u8();
    ConnectInfo info;
    info.clean_session = (flags & 0x02) != 0;
    info.keepalive_seconds = r.u16();
    info.client_id = r.str();
    return info;
}

Message parse_publish(const Packet& packet) {
    Reader r(packet.body);
    Message m;
    m.dup = (packet.flags & 0x08) != 0;
    m.qos = (packet.flags >> 1) & 0x03;
    m.retain = (packet.flags & 0x01) != 0;
    if (m.qos > 1) throw Error(ErrorCode::decode_error, "QoS 2 is not supported");
    m.topic = r.str();
    if (m.qos > 0) m.packet_id = r.u16();
    m.payload = r.rest();
    return m;
}

std::uint16_t parse_packet_id(const Packet& packet) {
    Reader r(packet.body);
    return r.u16();
}

std::vector<Subscription> parse_subscribe(const Packet& packet, std::uint16_t& packet_id) {
    Reader r(packet.body);
    packet_id = r.u16();
    std::vector<Subscription> out;
    while (!r.done()) {
        Subscription s;
        s.filter = r.str();
        s.qos = r.u8() & 0x03;
        out.push_back(std::move(s));
    }
    if (out.empty()) throw Error(ErrorCode::decode_error, "empty subscribe");
    return out;
}

std::vector<std::string> parse_unsubscribe(const Packet& packet, std::uint16_t& packet_id) {
    Reader r(packet.body);
    packet_id = r.u16();
    std::vector<std::string> out;
    while (!r.done()) out.push_back(r.str());
    return out;
}

bool valid_topic_filter(std::string_view filter) {
    if (filter.empty()) return false;
    std::size_t start = 0;
    while (true) {
        auto end = filter.find('/', start);
        auto level = filter.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        if (level.find_first_of("+#") != std::string_view::npos && level.size() != 1) return false;
        if (level == "#" && end != std::string_view::npos) return false;
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return true;
}

bool topic_matches(std::string_view filter, std::string_view topic) {
    std::size_t fi = 0;
    std::size_t ti = 0;
    while (true) {
        auto fend = filter.find('/', fi);
        auto flevel = filter.substr(fi, fend == std::string_view::npos ? std::string_view::npos : fend - fi);
        if (flevel == "#") return true;
        if (ti > topic.size()) return false;
        auto tend = topic.find('/', ti);
        auto tlevel = topic.substr(ti, tend == std::string_view::npos ? std::string_view::npos : tend - ti);
        if (flevel != "+" && flevel != tlevel) return false;
        bool flast = fend == std::string_view::npos;
        bool tlast = tend == std::string_view::npos;
        if (flast || tlast) {
            if (flast && tlast) return true;
            // "a/#" also matches "a"
            if (tlast && !flast) return filter.substr(fend + 1) == "#";
            return false;
        }
        fi = fend + 1;
        ti = tend + 1;
    }
}

std::string_view to_string(LinkState state) {
    switch (state) {
    case LinkState::disconnected: return "disconnected";
    case LinkState::connecting: return "connecting";
    case LinkState::connected: return "connected";
    }
    return "disconnected";
}

} // namespace edgetalk::mqtt

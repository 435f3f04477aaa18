#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace edgetalk {

class EventHub;

// One subscriber's view of the event stream. Events are compact JSON text.
// A subscriber that falls more than `capacity` events behind is disconnected:
// its buffer is dropped and next() reports the end of the stream.
class EventSubscription {
public:
    ~EventSubscription();
    EventSubscription(const EventSubscription&) = delete;
    EventSubscription& operator=(const EventSubscription&) = delete;

    // Next event, or nullopt on timeout or once closed.
    std::optional<std::string> next(std::chrono::milliseconds timeout);
    bool closed() const;
    bool overflowed() const;
    void close();

private:
    friend class EventHub;
    EventSubscription(std::shared_ptr<EventHub*> hub, std::size_t id, std::size_t capacity);
    void push(const std::string& event);
    void shut(bool overflow);

    std::weak_ptr<EventHub*> hub_;
    std::size_t id_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::string> queue_;
    bool closed_ = false;
    bool overflowed_ = false;
};

class EventHub {
public:
    static constexpr std::size_t kDefaultCapacity = 256;

    EventHub();
    ~EventHub();
    EventHub(const EventHub&) = delete;
    EventHub& operator=(const EventHub&) = delete;

    std::shared_ptr<EventSubscription> subscribe(std::size_t capacity = kDefaultCapacity);

    // Delivers to every live subscriber; never blocks on a slow one.
    void publish(const std::string& event);

    std::size_t subscriber_count() const;

    // Closes every subscription (used on shutdown so stream handlers return).
    void close_all();

private:
    friend class EventSubscription;
    void drop(std::size_t id);

    std::shared_ptr<EventHub*> self_;
    std::mutex publish_mutex_;
    mutable std::mutex mutex_;
    std::map<std::size_t, std::weak_ptr<EventSubscription>> subs_;
    std::size_t next_id_ = 1;
};

} // namespace edgetalk

#include "edgetalk/events.hpp"

#include <vector>

namespace edgetalk {

EventSubscription::EventSubscription(std::shared_ptr<EventHub*> hub, std::size_t id, std::size_t capacity)
    : hub_(hub), id_(id), capacity_(capacity == 0 ? 1 : capacity) {}

EventSubscription::~EventSubscription() { close(); }

std::optional<std::string> EventSubscription::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    auto out = std::move(queue_.front());
    queue_.pop_front();
    return out;
}

bool EventSubscription::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

bool EventSubscription::overflowed() const {
    std::lock_guard lock(mutex_);
    return overflowed_;
}

void EventSubscription::close() {
    shut(false);
    if (auto hub = hub_.lock()) (*hub)->drop(id_);
}

void EventSubscription::push(const std::string& event) {
    {
        std::lock_guard lock(mutex_);
        if (closed_) return;
        if (queue_.size() >= capacity_) {
            queue_.clear();
            closed_ = true;
            overflowed_ = true;
        } else {
            queue_.push_back(event);
        }
    }
    cv_.notify_all();
}

void EventSubscription::shut(bool overflow) {
    {
        std::lock_guard lock(mutex_);
        if (closed_) return;
        closed_ = true;
        overflowed_ = overflow;
    }
    cv_.notify_all();
}

EventHub::EventHub() : self_(std::make_shared<EventHub*>(this)) {}

EventHub::~EventHub() {
    close_all();
    self_.reset();
}

std::shared_ptr<EventSubscription> EventHub::subscribe(std::size_t capacity) {
    std::lock_guard lock(mutex_);
    auto id = next_id_++;
    std::shared_ptr<EventSubscription> sub(new EventSubscription(self_, id, capacity));
    subs_.emplace(id, sub);
    return sub;
}

void EventHub::publish(const std::string& event) {
    // publish_mutex_ keeps every subscriber's sequence in the same order; the
    // map lock is not held while pushing so a subscription may be released
    // (and unregister itself) from inside this call.
    std::lock_guard order(publish_mutex_);
    std::vector<std::shared_ptr<EventSubscription>> live;
    {
        std::lock_guard lock(mutex_);
        for (auto it = subs_.begin(); it != subs_.end();) {
            if (auto sub = it->second.lock()) {
                live.push_back(std::move(sub));
                ++it;
            } else {
                it = subs_.erase(it);
            }
        }
    }
    for (auto& sub : live) {
        sub->push(event);
        if (sub->closed()) drop(sub->id_);
    }
}

std::size_t EventHub::subscriber_count() const {
    std::lock_guard lock(mutex_);
    return subs_.size();
}

void EventHub::close_all() {
    std::vector<std::shared_ptr<EventSubscription>> live;
    {
        std::lock_guard lock(mutex_);
        for (auto& [id, weak] : subs_) {
            if (auto sub = weak.lock()) live.push_back(std::move(sub));
        }
        subs_.clear();
    }
    for (auto& sub : live) sub->shut(false);
}

void EventHub::drop(std::size_t id) {
    std::lock_guard lock(mutex_);
    subs_.erase(id);
}

} // namespace edgetalk

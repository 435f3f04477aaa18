#include "doctest.h"

#include "edgetalk/events.hpp"

#include <thread>

using namespace edgetalk;
using namespace std::chrono_literals;

TEST_CASE("every subscriber sees events in publish order") {
    EventHub hub;
    auto a = hub.subscribe();
    auto b = hub.subscribe();
    CHECK(hub.subscriber_count() == 2);
    for (int i = 0; i < 10; ++i) hub.publish(std::to_string(i));
    for (auto* s : {a.get(), b.get()}) {
        for (int i = 0; i < 10; ++i) CHECK(s->next(10ms) == std::to_string(i));
        CHECK_FALSE(s->next(1ms));
    }
}

TEST_CASE("next waits for a publish from another thread") {
    EventHub hub;
    auto s = hub.subscribe();
    std::thread t([&] {
        std::this_thread::sleep_for(30ms);
        hub.publish("late");
    });
    CHECK(s->next(2s) == "late");
    t.join();
}

TEST_CASE("slow subscriber is cut off without affecting others") {
    EventHub hub;
    auto slow = hub.subscribe(4);
    auto fast = hub.subscribe(64);
    for (int i = 0; i < 5; ++i) hub.publish("e" + std::to_string(i));
    CHECK(slow->closed());
    CHECK(slow->overflowed());
    CHECK_FALSE(slow->next(1ms));
    CHECK_FALSE(fast->closed());
    CHECK(fast->next(1ms) == "e0");
    CHECK(hub.subscriber_count() == 1);
}

TEST_CASE("released and closed subscriptions unregister") {
    EventHub hub;
    {
        auto s = hub.subscribe();
        CHECK(hub.subscriber_count() == 1);
    }
    CHECK(hub.subscriber_count() == 0);
    auto s = hub.subscribe();
    s->close();
    CHECK(hub.subscriber_count() == 0);
    hub.publish("x");
    CHECK_FALSE(s->next(1ms));
    CHECK_FALSE(s->overflowed());
}

TEST_CASE("close_all ends every stream and outliving the hub is safe") {
    std::shared_ptr<EventSubscription> s;
    {
        EventHub hub;
        s = hub.subscribe();
        hub.publish("before");
        hub.close_all();
        CHECK(s->closed());
        CHECK(s->next(1ms) == "before"); // queued events still drain
    }
    CHECK_FALSE(s->next(1ms));
    s->close();
}

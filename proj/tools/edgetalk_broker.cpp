#include "edgetalk/edgetalk.h"

#include "CLI11.hpp"
#include "signals.hpp"

#include <cstdio>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"edgetalk-broker: minimal MQTT 3.1.1 broker for local runs"};
    std::string host = "127.0.0.1";
    int port = 1883;
    app.add_option("--host", host, "listen address");
    app.add_option("--port", port, "listen port, 0 for any")->check(CLI::Range(0, 65535));
    CLI11_PARSE(app, argc, argv);

    auto signals = block_shutdown_signals();
    edgetalk_broker* broker = nullptr;
    if (auto st = edgetalk_broker_open(host.c_str(), port, &broker); st != EDGETALK_OK) {
        std::fprintf(stderr, "edgetalk-broker: %s (%s)\n", edgetalk_last_error(), edgetalk_status_name(st));
        return 1;
    }
    std::printf("broker on %s:%d\n", host.c_str(), edgetalk_broker_port(broker));
    std::fflush(stdout);
    wait_for_shutdown(signals);
    edgetalk_broker_close(broker);
    return 0;
}

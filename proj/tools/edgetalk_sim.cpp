#include "edgetalk/edgetalk.h"

#include "CLI11.hpp"
#include "signals.hpp"

#include <cstdio>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"edgetalk-sim: simulated device fleet"};
    std::string config, log_level = "info";
    app.add_option("--config", config, "gateway config whose device catalog is simulated (default: $EDGETALK_CONFIG)");
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
    CLI11_PARSE(app, argc, argv);

    auto signals = block_shutdown_signals();
    edgetalk_set_log_level(log_level.c_str());
    char* path = nullptr;
    auto st = edgetalk_config_resolve(config.empty() ? nullptr : config.c_str(), &path);
    if (st != EDGETALK_OK) {
        std::fprintf(stderr, "edgetalk-sim: %s\n", edgetalk_last_error());
        return 1;
    }
    edgetalk_fleet* fleet = nullptr;
    st = edgetalk_fleet_open(path, &fleet);
    edgetalk_string_free(path);
    if (st != EDGETALK_OK) {
        std::fprintf(stderr, "edgetalk-sim: %s (%s)\n", edgetalk_last_error(), edgetalk_status_name(st));
        return 1;
    }
    char* state = nullptr;
    if (edgetalk_fleet_state(fleet, &state) == EDGETALK_OK) {
        std::printf("fleet running: %s\n", state);
        std::fflush(stdout);
        edgetalk_string_free(state);
    }
    wait_for_shutdown(signals);
    if (edgetalk_fleet_state(fleet, &state) == EDGETALK_OK) {
        std::printf("final state: %s\n", state);
        edgetalk_string_free(state);
    }
    edgetalk_fleet_close(fleet);
    return 0;
}

#include "edgetalk/edgetalk.h"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"edgetalk-bench: replay a scenario and score final device states"};
    std::string scenario, out = "-", format = "table", broker, log_level = "warn";
    bool no_timing = false;
    app.add_option("--scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "report path, - for stdout");
    app.add_option("--format", format, "table or records")->check(CLI::IsMember({"table", "records"}));
    app.add_option("--broker", broker, "host:port of an external broker (default: in-process)");
    app.add_flag("--no-timing", no_timing, "leave latency out of the report");
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
    CLI11_PARSE(app, argc, argv);

    edgetalk_set_log_level(log_level.c_str());
    std::string host;
    int port = 0;
    if (!broker.empty()) {
        auto colon = broker.rfind(':');
        try {
            if (colon == std::string::npos) throw std::invalid_argument("missing port");
            host = broker.substr(0, colon);
            port = std::stoi(broker.substr(colon + 1));
        } catch (const std::exception&) {
            std::fprintf(stderr, "edgetalk-bench: --broker must be host:port\n");
            return 2;
        }
    }

    char* report = nullptr;
    double accuracy = -1;
    auto st = edgetalk_bench_run(scenario.c_str(), host.empty() ? nullptr : host.c_str(), port, format.c_str(),
                                 no_timing ? 0 : 1, &report, &accuracy);
    if (st != EDGETALK_OK) {
        std::fprintf(stderr, "edgetalk-bench: %s (%s)\n", edgetalk_last_error(), edgetalk_status_name(st));
        return 1;
    }
    std::string text = report;
    edgetalk_string_free(report);

    if (out == "-") {
        std::cout << text;
    } else {
        std::ofstream file(out, std::ios::binary);
        file << text;
        if (!file) {
            std::fprintf(stderr, "edgetalk-bench: cannot write %s\n", out.c_str());
            return 1;
        }
    }
    if (accuracy >= 0) {
        std::fprintf(stderr, "accuracy %.3f\n", accuracy);
    } else {
        std::fprintf(stderr, "accuracy n/a (no device-states)\n");
    }
    return 0;
}

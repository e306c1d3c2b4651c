// Minimal library usage: run the three comparison modes at desk scale and
// print the application and control-plane statistics side by side.

#include <cstdio>

#include "slicesim/slicesim.hpp"

using namespace slicesim;

int main() {
    std::printf("%-10s %14s %14s %10s %14s %14s\n", "mode", "app lat (ms)", "app jit (ms)",
                "app pdr", "ctl lat (ms)", "ctl jit (ms)");
    for (Mode mode : {Mode::NoSdnRpl, Mode::SdnShared, Mode::SdnTracks}) {
        Scenario sc;
        sc.mode = mode;
        sc.hops = 5;
        sc.duration_s = 600;
        sc.seed = 42;
        const RunResult run = run_single(sc);
        const FlowStats app = run.stats(FlowClass::App);
        const FlowStats ctl = run.stats({FlowClass::Nsu, FlowClass::Ftq}, "control");
        std::printf("%-10s %14.1f %14.1f %10.4f %14.1f %14.1f\n", to_string(mode),
                    app.latency_mean_ms.value_or(0), app.jitter_ms.value_or(0),
                    app.pdr.value_or(0), ctl.latency_mean_ms.value_or(0),
                    ctl.jitter_ms.value_or(0));
    }
    return 0;
}

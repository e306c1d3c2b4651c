#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "slicesim/types.hpp"

namespace slicesim {

enum class Mode : std::uint8_t { NoSdnRpl, SdnShared, SdnTracks };

inline const char* to_string(Mode m) {
    switch (m) {
    case Mode::NoSdnRpl: return "NoSdnRpl";
    case Mode::SdnShared: return "SdnShared";
    case Mode::SdnTracks: return "SdnTracks";
    }
    return "?";
}

// Full run configuration. The defaults are the reference setup: a 5-hop
// chain at 100 m range with 90% links, app traffic every 5-10 s, 10 s state
// updates, 60 s flow lifetimes, 600 s storing-route lifetime and 4 shared
// slots per slotframe.
struct Scenario {
    Mode mode = Mode::SdnShared;

    // topology
    int hops = 5;
    double spacing_m = 90.0;
    double tx_range_m = 100.0;
    double link_quality = 0.9;

    // tsch
    // 125 slots x 16 channels. Coprime, so a cell cycles through every
    // physical channel; an exact divisor of the 10 s update period, so a
    // node's control timers keep a fixed slot phase; and sparse enough that
    // one ladder cell per link per slotframe leaves the best-effort fabric
    // with realistic contention (a 5-hop chain at full rates emulates the
    // load of a larger mesh). The length must also cover the chain's
    // half-duplex budget: node 1 needs 2*hops+3 distinct non-shared slots
    // for the ladders plus one bandwidth-1 track per node.
    int slotframe_length = 125;
    int channels = 16;
    int shared_slots = 4;
    double slot_duration_ms = 10.0;
    int queue_capacity = 8;
    int max_retries = 4;
    double p_shared = 0.5;

    // sdn
    double nsu_period_s = 10.0;
    double flow_lifetime_s = 60.0;
    int ppq_bytes = 24;
    int flowtable_capacity = 10;
    double cjoin_retry_s = 8.0;
    int cjoin_max_retries = 5;
    int query_buffer = 4;
    double query_timeout_s = 15.0;
    double join_stagger_s = 10.0;
    // Two cells per hop per slotframe: a lost frame gets its retry within
    // roughly half a slotframe, which is what keeps track jitter low over
    // 90% links. Track jitter scales with this allotted bandwidth.
    int track_bandwidth = 2;
    // The hold must outlive the remaining reservation round trip while its
    // legs queue behind data traffic; under full load that is several
    // slotframes per leg.
    int hold_slotframes = 8;
    int track_max_attempts = 3;
    double track_retry_s = 8.0;
    double route_lifetime_s = 600.0;
    bool afr_enabled = false;
    int afr_hit_threshold = 5;

    // app traffic: per-node uniform send interval, upward to node 0
    double app_interval_min_s = 5.0;
    double app_interval_max_s = 10.0;
    int app_payload_bytes = 16;

    // run
    double duration_s = 3600.0; // measured time, after warm-up
    std::uint64_t seed = 1;

    void validate() const {
        auto fail = [](const std::string& what) { throw ScenarioError("scenario: " + what); };
        if (hops < 1) fail("hops must be >= 1");
        if (spacing_m <= 0 || spacing_m > tx_range_m) fail("spacing must be in (0, tx_range]");
        if (link_quality < 0.0 || link_quality > 1.0) fail("link_quality must be in [0,1]");
        if (slotframe_length < 2) fail("slotframe_length must be >= 2");
        if (channels < 1) fail("channels must be >= 1");
        if (shared_slots < 0 || shared_slots >= slotframe_length)
            fail("shared_slots must leave dedicated slots");
        if (slot_duration_ms <= 0) fail("slot_duration_ms must be > 0");
        if (queue_capacity < 1) fail("queue_capacity must be >= 1");
        if (max_retries < 0) fail("max_retries must be >= 0");
        if (p_shared < 0.0 || p_shared > 1.0) fail("p_shared must be in [0,1]");
        if (app_interval_min_s > app_interval_max_s)
            fail("app_interval min must not exceed max");
        if (app_interval_min_s <= 0) fail("app_interval must be positive");
        if (app_payload_bytes < 0 ||
            static_cast<std::size_t>(app_payload_bytes) > kPayloadBudgetBytes)
            fail("app_payload_bytes exceeds the payload budget");
        if (ppq_bytes < 5) fail("ppq_bytes must cover the flow key (>= 5)");
        if (nsu_period_s <= 0 || flow_lifetime_s <= 0) fail("sdn timers must be positive");
        if (duration_s <= 0) fail("duration must be positive");
        if (track_bandwidth < 1) fail("track_bandwidth must be >= 1");
        if (hold_slotframes < 1) fail("hold_slotframes must be >= 1");
    }
};

// Parses the documented key/value scenario format: optional [section]
// headers, `key = value` lines, `#` comments. Unknown sections or keys are
// rejected with their line number; a missing mode is an error.
inline Scenario parse_scenario(std::string_view text) {
    Scenario sc;
    bool mode_set = false;

    static const std::map<std::string, std::string, std::less<>> key_section = {
        {"mode", "run"},
        {"duration_s", "run"},
        {"seed", "run"},
        {"hops", "topology"},
        {"spacing_m", "topology"},
        {"tx_range_m", "topology"},
        {"link_quality", "topology"},
        {"slotframe_length", "tsch"},
        {"channels", "tsch"},
        {"shared_slots", "tsch"},
        {"slot_duration_ms", "tsch"},
        {"queue_capacity", "tsch"},
        {"max_retries", "tsch"},
        {"p_shared", "tsch"},
        {"nsu_period_s", "sdn"},
        {"flow_lifetime_s", "sdn"},
        {"ppq_bytes", "sdn"},
        {"flowtable_capacity", "sdn"},
        {"cjoin_retry_s", "sdn"},
        {"cjoin_max_retries", "sdn"},
        {"query_buffer", "sdn"},
        {"query_timeout_s", "sdn"},
        {"join_stagger_s", "sdn"},
        {"track_bandwidth", "sdn"},
        {"hold_slotframes", "sdn"},
        {"track_max_attempts", "sdn"},
        {"track_retry_s", "sdn"},
        {"route_lifetime_s", "sdn"},
        {"afr_enabled", "sdn"},
        {"afr_hit_threshold", "sdn"},
        {"app_interval_min_s", "app"},
        {"app_interval_max_s", "app"},
        {"app_payload_bytes", "app"},
    };

    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    auto err = [&](const std::string& what) {
        throw ScenarioError("line " + std::to_string(lineno) + ": " + what);
    };

    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };

    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                err("malformed section header");
            }
            const std::string section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "topology" && section != "tsch" &&
                section != "sdn" && section != "app") {
                err("unknown section '" + section + "'");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            err("expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key_section.find(key) == key_section.end()) {
            err("unknown key '" + key + "'");
        }
        if (value.empty()) {
            err("missing value for '" + key + "'");
        }

        auto as_double = [&](double& out) {
            std::size_t used = 0;
            try {
                out = std::stod(value, &used);
            } catch (const std::exception&) {
                err("non-numeric value for '" + key + "'");
            }
            if (used != value.size()) {
                err("non-numeric value for '" + key + "'");
            }
        };
        auto as_int = [&](int& out) {
            double d = 0;
            as_double(d);
            out = static_cast<int>(d);
            if (static_cast<double>(out) != d) {
                err("expected an integer for '" + key + "'");
            }
        };
        auto as_u64 = [&](std::uint64_t& out) {
            std::size_t used = 0;
            try {
                out = std::stoull(value, &used);
            } catch (const std::exception&) {
                err("non-numeric value for '" + key + "'");
            }
            if (used != value.size()) {
                err("non-numeric value for '" + key + "'");
            }
        };
        auto as_bool = [&](bool& out) {
            if (value == "true" || value == "1") {
                out = true;
            } else if (value == "false" || value == "0") {
                out = false;
            } else {
                err("expected true/false for '" + key + "'");
            }
        };

        if (key == "mode") {
            if (value == "NoSdnRpl") {
                sc.mode = Mode::NoSdnRpl;
            } else if (value == "SdnShared") {
                sc.mode = Mode::SdnShared;
            } else if (value == "SdnTracks") {
                sc.mode = Mode::SdnTracks;
            } else {
                err("unknown mode '" + value + "'");
            }
            mode_set = true;
        } else if (key == "duration_s") as_double(sc.duration_s);
        else if (key == "seed") as_u64(sc.seed);
        else if (key == "hops") as_int(sc.hops);
        else if (key == "spacing_m") as_double(sc.spacing_m);
        else if (key == "tx_range_m") as_double(sc.tx_range_m);
        else if (key == "link_quality") as_double(sc.link_quality);
        else if (key == "slotframe_length") as_int(sc.slotframe_length);
        else if (key == "channels") as_int(sc.channels);
        else if (key == "shared_slots") as_int(sc.shared_slots);
        else if (key == "slot_duration_ms") as_double(sc.slot_duration_ms);
        else if (key == "queue_capacity") as_int(sc.queue_capacity);
        else if (key == "max_retries") as_int(sc.max_retries);
        else if (key == "p_shared") as_double(sc.p_shared);
        else if (key == "nsu_period_s") as_double(sc.nsu_period_s);
        else if (key == "flow_lifetime_s") as_double(sc.flow_lifetime_s);
        else if (key == "ppq_bytes") as_int(sc.ppq_bytes);
        else if (key == "flowtable_capacity") as_int(sc.flowtable_capacity);
        else if (key == "cjoin_retry_s") as_double(sc.cjoin_retry_s);
        else if (key == "cjoin_max_retries") as_int(sc.cjoin_max_retries);
        else if (key == "query_buffer") as_int(sc.query_buffer);
        else if (key == "query_timeout_s") as_double(sc.query_timeout_s);
        else if (key == "join_stagger_s") as_double(sc.join_stagger_s);
        else if (key == "track_bandwidth") as_int(sc.track_bandwidth);
        else if (key == "hold_slotframes") as_int(sc.hold_slotframes);
        else if (key == "track_max_attempts") as_int(sc.track_max_attempts);
        else if (key == "track_retry_s") as_double(sc.track_retry_s);
        else if (key == "route_lifetime_s") as_double(sc.route_lifetime_s);
        else if (key == "afr_enabled") as_bool(sc.afr_enabled);
        else if (key == "afr_hit_threshold") as_int(sc.afr_hit_threshold);
        else if (key == "app_interval_min_s") as_double(sc.app_interval_min_s);
        else if (key == "app_interval_max_s") as_double(sc.app_interval_max_s);
        else if (key == "app_payload_bytes") as_int(sc.app_payload_bytes);
    }

    if (!mode_set) {
        throw ScenarioError("scenario: missing required key 'mode'");
    }
    sc.validate();
    return sc;
}

inline std::string scenario_to_text(const Scenario& sc) {
    std::ostringstream os;
    os << "[run]\n"
       << "mode = " << to_string(sc.mode) << "\n"
       << "duration_s = " << sc.duration_s << "\n"
       << "seed = " << sc.seed << "\n"
       << "[topology]\n"
       << "hops = " << sc.hops << "\n"
       << "spacing_m = " << sc.spacing_m << "\n"
       << "tx_range_m = " << sc.tx_range_m << "\n"
       << "link_quality = " << sc.link_quality << "\n"
       << "[tsch]\n"
       << "slotframe_length = " << sc.slotframe_length << "\n"
       << "channels = " << sc.channels << "\n"
       << "shared_slots = " << sc.shared_slots << "\n"
       << "slot_duration_ms = " << sc.slot_duration_ms << "\n"
       << "queue_capacity = " << sc.queue_capacity << "\n"
       << "max_retries = " << sc.max_retries << "\n"
       << "p_shared = " << sc.p_shared << "\n"
       << "[sdn]\n"
       << "nsu_period_s = " << sc.nsu_period_s << "\n"
       << "flow_lifetime_s = " << sc.flow_lifetime_s << "\n"
       << "ppq_bytes = " << sc.ppq_bytes << "\n"
       << "flowtable_capacity = " << sc.flowtable_capacity << "\n"
       << "cjoin_retry_s = " << sc.cjoin_retry_s << "\n"
       << "cjoin_max_retries = " << sc.cjoin_max_retries << "\n"
       << "query_buffer = " << sc.query_buffer << "\n"
       << "query_timeout_s = " << sc.query_timeout_s << "\n"
       << "join_stagger_s = " << sc.join_stagger_s << "\n"
       << "track_bandwidth = " << sc.track_bandwidth << "\n"
       << "hold_slotframes = " << sc.hold_slotframes << "\n"
       << "track_max_attempts = " << sc.track_max_attempts << "\n"
       << "track_retry_s = " << sc.track_retry_s << "\n"
       << "route_lifetime_s = " << sc.route_lifetime_s << "\n"
       << "afr_enabled = " << (sc.afr_enabled ? "true" : "false") << "\n"
       << "afr_hit_threshold = " << sc.afr_hit_threshold << "\n"
       << "[app]\n"
       << "app_interval_min_s = " << sc.app_interval_min_s << "\n"
       << "app_interval_max_s = " << sc.app_interval_max_s << "\n"
       << "app_payload_bytes = " << sc.app_payload_bytes << "\n";
    return os.str();
}

} // namespace slicesim

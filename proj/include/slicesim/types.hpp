#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace slicesim {

using NodeId = std::uint16_t;
using TrackId = std::uint16_t;
using Asn = std::uint64_t; // absolute slot number
using PacketId = std::uint64_t;

constexpr NodeId kControllerNode = 0;
constexpr NodeId kNoNode = 0xFFFF;

// IEEE 802.15.4 frame budget: 127 bytes total, 25 bytes of MAC + network
// framing, leaving 102 bytes for the message payload.
constexpr std::size_t kMaxFrameBytes = 127;
constexpr std::size_t kFrameOverheadBytes = 25;
constexpr std::size_t kPayloadBudgetBytes = kMaxFrameBytes - kFrameOverheadBytes;

enum class FlowClass : std::uint8_t {
    App = 0,
    Nsu = 1,
    Ftq = 2,
    SdnDown = 3, // controller-to-node control (CACK, CONF, FTS)
    Rpl = 4,
    Cjoin = 5,
    TrackCtl = 6, // track reservation signaling
};

enum class DropReason : std::uint8_t {
    None = 0,
    QueueOverflow,
    RetryLimit,
    TrackStale,
    QueryBufferOverflow,
    QueryTimeout,
    FlowDrop, // discarded by a Drop flow entry
    Unjoined,
    EndOfRun, // still in flight when the run stopped
};

inline const char* to_string(FlowClass c) {
    switch (c) {
    case FlowClass::App: return "App";
    case FlowClass::Nsu: return "Nsu";
    case FlowClass::Ftq: return "Ftq";
    case FlowClass::SdnDown: return "SdnDown";
    case FlowClass::Rpl: return "Rpl";
    case FlowClass::Cjoin: return "Cjoin";
    case FlowClass::TrackCtl: return "TrackCtl";
    }
    return "?";
}

inline const char* to_string(DropReason r) {
    switch (r) {
    case DropReason::None: return "";
    case DropReason::QueueOverflow: return "QueueOverflow";
    case DropReason::RetryLimit: return "RetryLimit";
    case DropReason::TrackStale: return "TrackStale";
    case DropReason::QueryBufferOverflow: return "QueryBufferOverflow";
    case DropReason::QueryTimeout: return "QueryTimeout";
    case DropReason::FlowDrop: return "FlowDrop";
    case DropReason::Unjoined: return "Unjoined";
    case DropReason::EndOfRun: return "EndOfRun";
    }
    return "?";
}

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CodecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace slicesim

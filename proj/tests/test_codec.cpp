#include <doctest.h>

#include "msg_gen.hpp"
#include "slicesim/codec.hpp"
#include "slicesim/rng.hpp"

using namespace slicesim;

TEST_CASE("NSU with five neighbors encodes to 22 bytes") {
    NsuMsg m;
    m.node = 3;
    m.energy = 120;
    m.queue_occupancy = 2;
    for (NodeId nb : {2, 4, 5, 6, 7}) {
        m.neighbors.push_back({nb, 230});
    }
    // kind 1 + node 2 + energy 2 + queue 1 + counts 1 + 5 neighbors x 3
    const std::size_t expected = 1 + 2 + 2 + 1 + 1 + m.neighbors.size() * 3;
    CHECK(expected == 22);
    CHECK(encoded_size(SdnMessage{m}) == expected);
    CHECK(expected <= kPayloadBudgetBytes);
}

TEST_CASE("FTQ with a 24-byte prefix encodes to 29 bytes") {
    FtqMsg m;
    m.node = 4;
    m.query_seq = 9;
    m.header_prefix.assign(24, 0xAB);
    // kind 1 + node 2 + seq 2 + 24 prefix bytes
    CHECK(encoded_size(SdnMessage{m}) == 1 + 2 + 2 + 24);
    CHECK(encoded_size(SdnMessage{m}) == 29);
}

TEST_CASE("CONF baseline encodes to 5 bytes") {
    ConfMsg m{10, 60};
    // kind 1 + nsu_period 2 + flow_lifetime 2
    CHECK(encoded_size(SdnMessage{m}) == 5);
}

TEST_CASE("CJOIN and CACK encode to 4 bytes") {
    CHECK(encoded_size(SdnMessage{CjoinMsg{3, 1}}) == 4);
    CHECK(encoded_size(SdnMessage{CackMsg{3, 1}}) == 4);
}

TEST_CASE("header image layout: class at 0, dst at 3..4") {
    Packet pkt;
    pkt.cls = FlowClass::Nsu;
    pkt.src = 0x0102;
    pkt.dst = 0x0304;
    pkt.seq = 7;
    const auto h = pkt.header_image();
    REQUIRE(h.size() == kHeaderBaseBytes);
    CHECK(h[0] == static_cast<std::uint8_t>(FlowClass::Nsu));
    CHECK(h[1] == 0x01);
    CHECK(h[2] == 0x02);
    CHECK(h[3] == 0x03);
    CHECK(h[4] == 0x04);

    const auto key = FlowKey::from_header(h);
    REQUIRE(key.has_value());
    CHECK(key->cls == FlowClass::Nsu);
    CHECK(key->dst == 0x0304);
}

TEST_CASE("SRH hops extend the header image") {
    Packet pkt;
    pkt.srh = {1, 2, 3};
    CHECK(pkt.header_image().size() == kHeaderBaseBytes + 6);
    CHECK(pkt.wire_bytes() == kFrameOverheadBytes + 6);
}

TEST_CASE("codec round-trip holds for 10^4 randomized messages within budget") {
    RngStream rng(2024, "codec-roundtrip");
    for (int i = 0; i < 10000; ++i) {
        const SdnMessage msg = testgen::random_message(rng);
        const auto bytes = encode_message(msg);
        CHECK(bytes.size() <= kPayloadBudgetBytes);
        const SdnMessage back = decode_message(bytes);
        CHECK(back == msg);
    }
}

TEST_CASE("NSU neighbor lists are truncated to fit the wire format") {
    NsuMsg m;
    m.node = 1;
    for (int i = 0; i < 40; ++i) {
        m.neighbors.push_back({static_cast<NodeId>(i), 10});
    }
    const auto bytes = encode_message(SdnMessage{m});
    CHECK(bytes.size() <= kPayloadBudgetBytes);
    const auto back = std::get<NsuMsg>(decode_message(bytes));
    CHECK(back.neighbors.size() == 15);
    CHECK(back.neighbors.front().id == 0);
}

TEST_CASE("an FTS that cannot fit the payload budget is a codec error") {
    FtsMsg m;
    m.node = 1;
    for (int i = 0; i < 8; ++i) {
        FlowEntrySpec e;
        e.entry_id = static_cast<std::uint16_t>(i);
        e.lifetime_s = 60;
        MatchField f;
        f.offset = 0;
        f.value.assign(8, 0xFF);
        f.mask.assign(8, 0xFF);
        e.match = {f, f};
        e.action = Action::drop();
        m.entries.push_back(e);
    }
    CHECK_THROWS_AS(encode_message(SdnMessage{m}), CodecError);
}

TEST_CASE("truncated buffers fail to decode") {
    const auto bytes = encode_message(SdnMessage{ConfMsg{10, 60}});
    CHECK_THROWS_AS(decode_message(std::span(bytes.data(), bytes.size() - 1)), CodecError);
}

TEST_CASE("match fields respect masks") {
    std::vector<std::uint8_t> header{0x12, 0x34, 0x56};
    MatchField f;
    f.offset = 1;
    f.value = {0x30};
    f.mask = {0xF0};
    CHECK(f.matches(header));
    f.value = {0x40};
    CHECK_FALSE(f.matches(header));
    f.offset = 3; // out of bounds never matches
    CHECK_FALSE(f.matches(header));
}

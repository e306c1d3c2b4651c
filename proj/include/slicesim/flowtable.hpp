#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "slicesim/codec.hpp"
#include "slicesim/types.hpp"

namespace slicesim {

// Protocol-oblivious flowtable: ordered match/action entries over the packet
// header bytes, with lifetimers, hit counters and a capacity bound. The
// blacklist is consulted before the table and diverts packets to the legacy
// Layer-3 path.
class FlowTable {
public:
    struct Entry {
        std::uint16_t entry_id = 0;
        std::vector<MatchField> match;
        Action action;
        double lifetime_s = 0;
        double last_refresh_s = 0;
        std::uint32_t hit_count = 0;
        std::uint32_t reported_hits = 0; // hits already carried in an NSU
        std::uint64_t activity_seq = 0;  // for least-recently-hit eviction

        bool alive(double now_s) const { return now_s - last_refresh_s <= lifetime_s; }

        bool matches(std::span<const std::uint8_t> header) const {
            return std::all_of(match.begin(), match.end(),
                               [&](const MatchField& f) { return f.matches(header); });
        }
    };

    explicit FlowTable(std::size_t capacity = 10) : capacity_(capacity) {}

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }

    void add_blacklist(std::vector<MatchField> pattern) {
        blacklist_.push_back(std::move(pattern));
    }

    bool blacklisted(std::span<const std::uint8_t> header) const {
        for (const auto& pattern : blacklist_) {
            bool all = true;
            for (const auto& f : pattern) {
                if (!f.matches(header)) {
                    all = false;
                    break;
                }
            }
            if (all) {
                return true;
            }
        }
        return false;
    }

    // First live matching entry in table order; bumps the hit counter
    // exactly once. Dead entries never match.
    Entry* lookup(std::span<const std::uint8_t> header, double now_s) {
        for (auto& e : entries_) {
            if (e.alive(now_s) && e.matches(header)) {
                ++e.hit_count;
                e.activity_seq = ++seq_;
                return &e;
            }
        }
        return nullptr;
    }

    // Peek without counting a hit.
    const Entry* find_live(std::span<const std::uint8_t> header, double now_s) const {
        for (const auto& e : entries_) {
            if (e.alive(now_s) && e.matches(header)) {
                return &e;
            }
        }
        return nullptr;
    }

    // Inserts (or replaces, by entry_id) a pushed entry. A full table evicts
    // the least-recently-hit entry.
    void insert(const FlowEntrySpec& spec, double now_s) {
        for (auto& e : entries_) {
            if (e.entry_id == spec.entry_id) {
                e.match = spec.match;
                e.action = spec.action;
                e.lifetime_s = spec.lifetime_s;
                e.last_refresh_s = now_s;
                e.activity_seq = ++seq_;
                return;
            }
        }
        if (entries_.size() >= capacity_) {
            auto victim = std::min_element(entries_.begin(), entries_.end(),
                                           [](const Entry& a, const Entry& b) {
                                               return a.activity_seq < b.activity_seq;
                                           });
            entries_.erase(victim);
        }
        Entry e;
        e.entry_id = spec.entry_id;
        e.match = spec.match;
        e.action = spec.action;
        e.lifetime_s = spec.lifetime_s;
        e.last_refresh_s = now_s;
        e.activity_seq = ++seq_;
        entries_.push_back(std::move(e));
    }

    // AFR lifetimer reset. Returns false when the id names a dead or absent
    // entry (the caller counts those).
    bool refresh(std::uint16_t entry_id, double now_s) {
        for (auto& e : entries_) {
            if (e.entry_id == entry_id && e.alive(now_s)) {
                e.last_refresh_s = now_s;
                e.activity_seq = ++seq_;
                return true;
            }
        }
        return false;
    }

    Entry* find_by_id(std::uint16_t entry_id) {
        for (auto& e : entries_) {
            if (e.entry_id == entry_id) {
                return &e;
            }
        }
        return nullptr;
    }

private:
    std::size_t capacity_;
    std::vector<Entry> entries_;
    std::vector<std::vector<MatchField>> blacklist_;
    std::uint64_t seq_ = 0;
};

} // namespace slicesim

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "atro/ast.hpp"

namespace atro {

struct RecordId {
    std::string schema;
    std::vector<Value> key; // one value per pk field, declared order

    auto operator<=>(const RecordId&) const = default;
    std::string str() const;
};

struct Event {
    enum class Kind { Read, Write };
    Kind kind = Kind::Read;
    Value tau = 0;
    RecordId rec;
    std::string field;
    std::optional<Value> value; // writes only
    int txn = -1;               // transaction instance id; -1 = initial data
    std::string cmd;            // command label provenance

    bool same_payload(const Event& o) const {
        return kind == o.kind && tau == o.tau && rec == o.rec && field == o.field &&
               value == o.value;
    }
};

using EventId = int;

// Fixed-capacity bitset used for visibility sets; event counts stay small.
class EventSet {
public:
    void resize(size_t bits);
    void set(size_t i);
    bool test(size_t i) const;
    void clear();
    bool operator==(const EventSet&) const = default;

    std::vector<std::uint64_t> words;
};

// Event-log database state: an append-only event set, a visibility
// relation over it, the execution counter, and the fresh-key counter.
class DatabaseState {
public:
    const std::vector<Event>& events() const { return events_; }
    const Event& event(EventId id) const { return events_[static_cast<size_t>(id)]; }
    size_t size() const { return events_.size(); }

    Value counter() const { return cnt_; }
    void set_counter(Value c) { cnt_ = c; }
    Value fresh() const { return fresh_; }
    void set_fresh(Value f) { fresh_ = f; }

    EventId append(Event e);
    void add_vis(EventId from, EventId to); // `from` is visible to `to`
    bool vis(EventId from, EventId to) const;
    std::set<std::pair<EventId, EventId>> vis_pairs() const;

    // Rolls the state back to an earlier size (events and vis edges added
    // after the mark are dropped).
    void truncate(size_t n_events);

    bool operator==(const DatabaseState& o) const;

private:
    std::vector<Event> events_;
    std::vector<EventSet> vis_in_; // per event: set of events visible to it
    Value cnt_ = 0;
    Value fresh_ = 0;
};

// Admissible primary-key values of one pk field. Values below the
// reserved base plus the reserved tail for uuid allocation; a cap
// (0 = none) limits only the non-reserved range.
std::vector<Value> key_values(const Schema& s, Value cap);
// All record ids of a schema over the (possibly capped) key domain.
std::vector<RecordId> record_ids(const Schema& s, Value cap);

// Latest-write value of a field; key fields reconstruct from the record
// id itself; `absent` when the field was never written.
std::optional<Value> reconstruct_field(const DatabaseState& s, const RecordId& r,
                                       const std::string& field, const Schema* schema = nullptr);

// Records whose `alive` field currently reconstructs to true.
std::set<RecordId> alive_records(const DatabaseState& s, const std::string& schema);

bool is_local_view(const DatabaseState& view, const DatabaseState& parent);

// Distinct (record, timestamp) groups, newest first.
std::vector<std::vector<EventId>> event_groups(const DatabaseState& s);

// Every union of (record, timestamp) groups, as materialized states.
// 2^g results; callers keep g small.
std::vector<DatabaseState> enumerate_local_views(const DatabaseState& parent);

// Materializes the view that keeps all events except the listed groups.
DatabaseState make_view(const DatabaseState& parent, const std::vector<std::vector<EventId>>& groups,
                        std::uint64_t dropped_mask);

// One event per line: "wr|rd tau schema (key...) field [value] txn cmd".
std::string dump_events(const DatabaseState& s);

} // namespace atro

#include "atro/store.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace atro {

std::string RecordId::str() const {
    std::string out = schema + "(";
    for (size_t i = 0; i < key.size(); ++i) out += (i ? "," : "") + std::to_string(key[i]);
    return out + ")";
}

void EventSet::resize(size_t bits) {
    words.resize((bits + 63) / 64, 0);
}
void EventSet::set(size_t i) {
    if (i / 64 >= words.size()) words.resize(i / 64 + 1, 0);
    words[i / 64] |= (std::uint64_t{1} << (i % 64));
}
bool EventSet::test(size_t i) const {
    if (i / 64 >= words.size()) return false;
    return (words[i / 64] >> (i % 64)) & 1;
}
void EventSet::clear() {
    words.clear();
}

EventId DatabaseState::append(Event e) {
    events_.push_back(std::move(e));
    vis_in_.emplace_back();
    return static_cast<EventId>(events_.size() - 1);
}

void DatabaseState::add_vis(EventId from, EventId to) {
    vis_in_[static_cast<size_t>(to)].set(static_cast<size_t>(from));
}

bool DatabaseState::vis(EventId from, EventId to) const {
    return vis_in_[static_cast<size_t>(to)].test(static_cast<size_t>(from));
}

std::set<std::pair<EventId, EventId>> DatabaseState::vis_pairs() const {
    std::set<std::pair<EventId, EventId>> out;
    for (EventId to = 0; to < static_cast<EventId>(events_.size()); ++to)
        for (EventId from = 0; from < static_cast<EventId>(events_.size()); ++from)
            if (vis(from, to)) out.emplace(from, to);
    return out;
}

void DatabaseState::truncate(size_t n_events) {
    events_.resize(n_events);
    vis_in_.resize(n_events);
}

bool DatabaseState::operator==(const DatabaseState& o) const {
    if (cnt_ != o.cnt_ || fresh_ != o.fresh_ || events_.size() != o.events_.size()) return false;
    for (size_t i = 0; i < events_.size(); ++i)
        if (!events_[i].same_payload(o.events_[i])) return false;
    return vis_pairs() == o.vis_pairs();
}

std::vector<Value> key_values(const Schema& s, Value cap) {
    std::vector<Value> out;
    Value base = s.reserved_base();
    Value plain = cap > 0 ? std::min(base, cap) : base;
    for (Value v = 0; v < plain; ++v) out.push_back(v);
    for (Value v = base; v < s.key_domain; ++v) out.push_back(v);
    return out;
}

std::vector<RecordId> record_ids(const Schema& s, Value cap) {
    std::vector<RecordId> out;
    auto vals = key_values(s, cap);
    size_t arity = s.primary_key.size();
    if (vals.empty() || arity == 0) return out;
    std::vector<size_t> idx(arity, 0);
    while (true) {
        RecordId r;
        r.schema = s.name;
        for (size_t i = 0; i < arity; ++i) r.key.push_back(vals[idx[i]]);
        out.push_back(std::move(r));
        size_t k = arity;
        while (true) {
            if (k == 0) return out;
            --k;
            if (++idx[k] < vals.size()) break;
            idx[k] = 0;
            if (k == 0) return out;
        }
    }
}

std::optional<Value> reconstruct_field(const DatabaseState& s, const RecordId& r,
                                       const std::string& field, const Schema* schema) {
    if (schema) {
        for (size_t i = 0; i < schema->primary_key.size(); ++i)
            if (schema->primary_key[i] == field) return r.key[i];
    }
    std::optional<Value> best;
    Value best_tau = -1;
    for (const auto& e : s.events()) {
        if (e.kind != Event::Kind::Write || e.rec != r || e.field != field) continue;
        if (e.tau > best_tau) {
            best_tau = e.tau;
            best = e.value;
        } else if (e.tau == best_tau && e.value != best) {
            throw std::logic_error("conflicting writes at one timestamp on " + r.str() + "." + field);
        }
    }
    return best;
}

std::set<RecordId> alive_records(const DatabaseState& s, const std::string& schema) {
    std::set<RecordId> candidates;
    for (const auto& e : s.events())
        if (e.kind == Event::Kind::Write && e.rec.schema == schema && e.field == kAliveField)
            candidates.insert(e.rec);
    std::set<RecordId> out;
    for (const auto& r : candidates) {
        auto v = reconstruct_field(s, r, kAliveField);
        if (v && *v != 0) out.insert(r);
    }
    return out;
}

bool is_local_view(const DatabaseState& view, const DatabaseState& parent) {
    if (view.counter() != parent.counter()) return false;

    // Match view events to parent events by payload.
    std::vector<EventId> to_parent(view.size(), -1);
    std::vector<bool> used(parent.size(), false);
    for (size_t i = 0; i < view.size(); ++i) {
        bool found = false;
        for (size_t j = 0; j < parent.size(); ++j) {
            if (!used[j] && view.event(static_cast<EventId>(i))
                                .same_payload(parent.event(static_cast<EventId>(j)))) {
                to_parent[i] = static_cast<EventId>(j);
                used[j] = true;
                found = true;
                break;
            }
        }
        if (!found) return false;
    }

    // Group closure: parent events sharing (record, tau) with a view event
    // must themselves be in the view.
    for (size_t j = 0; j < parent.size(); ++j) {
        if (used[j]) continue;
        const auto& pe = parent.event(static_cast<EventId>(j));
        for (size_t i = 0; i < view.size(); ++i) {
            const auto& ve = view.event(static_cast<EventId>(i));
            if (ve.rec == pe.rec && ve.tau == pe.tau) return false;
        }
    }

    // Visibility must be the parent's restriction to the view events.
    for (size_t a = 0; a < view.size(); ++a)
        for (size_t b = 0; b < view.size(); ++b) {
            bool vv = view.vis(static_cast<EventId>(a), static_cast<EventId>(b));
            bool pv = parent.vis(to_parent[a], to_parent[b]);
            if (vv != pv) return false;
        }
    return true;
}

std::vector<std::vector<EventId>> event_groups(const DatabaseState& s) {
    std::map<std::pair<RecordId, Value>, std::vector<EventId>> by_key;
    for (EventId i = 0; i < static_cast<EventId>(s.size()); ++i) {
        const auto& e = s.event(i);
        by_key[{e.rec, e.tau}].push_back(i);
    }
    std::vector<std::vector<EventId>> groups;
    for (auto& [k, v] : by_key) groups.push_back(std::move(v));
    std::sort(groups.begin(), groups.end(), [&](const auto& a, const auto& b) {
        const auto& ea = s.event(a.front());
        const auto& eb = s.event(b.front());
        if (ea.tau != eb.tau) return ea.tau > eb.tau; // newest first
        return ea.rec < eb.rec;
    });
    return groups;
}

DatabaseState make_view(const DatabaseState& parent, const std::vector<std::vector<EventId>>& groups,
                        std::uint64_t dropped_mask) {
    std::vector<bool> keep(parent.size(), true);
    for (size_t g = 0; g < groups.size(); ++g)
        if (dropped_mask >> g & 1)
            for (EventId id : groups[g]) keep[static_cast<size_t>(id)] = false;

    DatabaseState out;
    out.set_counter(parent.counter());
    out.set_fresh(parent.fresh());
    std::vector<EventId> remap(parent.size(), -1);
    for (size_t i = 0; i < parent.size(); ++i)
        if (keep[i]) remap[i] = out.append(parent.event(static_cast<EventId>(i)));
    for (size_t to = 0; to < parent.size(); ++to) {
        if (!keep[to]) continue;
        for (size_t from = 0; from < parent.size(); ++from)
            if (keep[from] && parent.vis(static_cast<EventId>(from), static_cast<EventId>(to)))
                out.add_vis(remap[from], remap[to]);
    }
    return out;
}

std::vector<DatabaseState> enumerate_local_views(const DatabaseState& parent) {
    auto groups = event_groups(parent);
    if (groups.size() > 20) throw std::invalid_argument("too many event groups to enumerate");
    std::vector<DatabaseState> out;
    std::uint64_t total = std::uint64_t{1} << groups.size();
    for (std::uint64_t mask = 0; mask < total; ++mask)
        out.push_back(make_view(parent, groups, mask));
    return out;
}

std::string dump_events(const DatabaseState& s) {
    std::ostringstream os;
    for (const auto& e : s.events()) {
        os << (e.kind == Event::Kind::Write ? "wr" : "rd") << " " << e.tau << " " << e.rec.schema
           << " (";
        for (size_t i = 0; i < e.rec.key.size(); ++i) os << (i ? " " : "") << e.rec.key[i];
        os << ") " << e.field;
        if (e.value) os << " " << *e.value;
        os << " " << e.txn << " " << (e.cmd.empty() ? "init" : e.cmd) << "\n";
    }
    return os.str();
}

} // namespace atro

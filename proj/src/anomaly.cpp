#include "atro/anomaly.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <thread>

namespace atro {

bool st(const Event& a, const Event& b) {
    return a.txn >= 0 && a.txn == b.txn;
}

std::vector<EventSet> vis_closure(const DatabaseState& s) {
    size_t n = s.size();
    std::vector<EventSet> reach(n);
    for (size_t to = 0; to < n; ++to) {
        reach[to].resize(n);
        for (size_t from = 0; from < n; ++from)
            if (s.vis(static_cast<EventId>(from), static_cast<EventId>(to))) reach[to].set(from);
    }
    // iterate to a fixpoint; handles arbitrary (even cyclic) inputs
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t to = 0; to < n; ++to) {
            for (size_t mid = 0; mid < n; ++mid) {
                if (!reach[to].test(mid)) continue;
                for (size_t w = 0; w < reach[mid].words.size(); ++w) {
                    if (w >= reach[to].words.size()) reach[to].words.resize(reach[mid].words.size(), 0);
                    std::uint64_t add = reach[mid].words[w] & ~reach[to].words[w];
                    if (add) {
                        reach[to].words[w] |= add;
                        changed = true;
                    }
                }
            }
        }
    }
    return reach;
}

namespace {

std::vector<EventSet> vis_matrix(const DatabaseState& s, bool transitive) {
    if (transitive) return vis_closure(s);
    size_t n = s.size();
    std::vector<EventSet> m(n);
    for (size_t to = 0; to < n; ++to) {
        m[to].resize(n);
        for (size_t from = 0; from < n; ++from)
            if (s.vis(static_cast<EventId>(from), static_cast<EventId>(to))) m[to].set(from);
    }
    return m;
}

} // namespace

bool check_strong_atomicity(const DatabaseState& s, bool transitive) {
    auto m = vis_matrix(s, transitive);
    size_t n = s.size();
    for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b < n; ++b) {
            if (a == b) continue;
            if (s.event(static_cast<EventId>(a)).tau < s.event(static_cast<EventId>(b)).tau &&
                !m[b].test(a))
                return false;
        }
    for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b < n; ++b) {
            if (a == b || !st(s.event(static_cast<EventId>(a)), s.event(static_cast<EventId>(b))))
                continue;
            for (size_t w = 0; w < n; ++w) {
                // witnesses come from outside the instance
                if (w == a || w == b ||
                    st(s.event(static_cast<EventId>(w)), s.event(static_cast<EventId>(a))))
                    continue;
                if (m[w].test(a) && !m[w].test(b)) return false;
            }
        }
    return true;
}

bool check_strong_isolation(const DatabaseState& s, bool transitive) {
    auto m = vis_matrix(s, transitive);
    size_t n = s.size();
    for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b < n; ++b) {
            if (a == b || !st(s.event(static_cast<EventId>(a)), s.event(static_cast<EventId>(b))))
                continue;
            for (size_t w = 0; w < n; ++w) {
                if (w == a || w == b ||
                    st(s.event(static_cast<EventId>(w)), s.event(static_cast<EventId>(a))))
                    continue;
                if (m[b].test(w) && !m[a].test(w)) return false;
            }
        }
    return true;
}

bool atomic_events(const DatabaseState& s, EventId a, EventId b, bool transitive) {
    auto m = vis_matrix(s, transitive);
    size_t n = s.size();
    size_t ia = static_cast<size_t>(a), ib = static_cast<size_t>(b);
    for (size_t w = 0; w < n; ++w) {
        if (w == ia || w == ib) continue; // witnessing concerns other events
        if (m[w].test(ia) && !m[w].test(ib)) return false; // a visible to w, b not
        if (m[ia].test(w) && !m[ib].test(w)) return false; // a saw w, b did not
    }
    return true;
}

const char* to_string(AnomalyKind k) {
    switch (k) {
    case AnomalyKind::DirtyRead: return "dirty-read";
    case AnomalyKind::NonRepeatableRead: return "non-repeatable-read";
    case AnomalyKind::LostUpdate: return "lost-update";
    case AnomalyKind::WriteSkew: return "write-skew";
    case AnomalyKind::Other: return "conflict-cycle";
    }
    return "?";
}

std::string AccessPair::str() const {
    auto fields = [](const std::set<std::string>& fs) {
        std::string out = "{";
        bool first = true;
        for (const auto& f : fs) {
            if (!first) out += ",";
            out += f;
            first = false;
        }
        return out + "}";
    };
    return "(" + c1 + ", " + fields(f1) + ", " + c2 + ", " + fields(f2) + ")";
}

Bounds detect_defaults() {
    Bounds b;
    b.key_domain_cap = 2;
    return b;
}

namespace {

// Role of the instance's own command on one incident conflict edge.
struct EdgeRole {
    bool writer;  // the instance's event is the write side
    bool saw;     // Dep edge (the read witnessed the write)
    std::string cmd;
    std::string field;
    EventId own_ev, other_ev;
};

EdgeRole role_of(const ConflictEdge& e, int inst) {
    EdgeRole r;
    bool is_from = e.from_inst == inst;
    if (e.kind == ConflictEdge::Kind::Dep) {
        // writer -> reader
        r.writer = is_from;
        r.saw = true;
    } else {
        // reader -> missed writer
        r.writer = !is_from;
        r.saw = false;
    }
    r.cmd = is_from ? e.from_cmd : e.to_cmd;
    r.field = e.field;
    r.own_ev = r.writer ? e.write_ev : e.read_ev;
    r.other_ev = r.writer ? e.read_ev : e.write_ev;
    return r;
}

AnomalyKind classify(const EdgeRole& r1, const EdgeRole& r2) {
    // r1 belongs to the command earlier in the body
    if (!r1.writer && r1.saw && !r2.writer && !r2.saw) return AnomalyKind::DirtyRead;
    if (!r1.writer && !r1.saw && !r2.writer && r2.saw) return AnomalyKind::NonRepeatableRead;
    if (r1.writer && r1.saw && r2.writer && !r2.saw) return AnomalyKind::DirtyRead;
    if (r1.writer && !r1.saw && r2.writer && r2.saw) return AnomalyKind::NonRepeatableRead;
    if (!r1.saw && !r2.saw) {
        if (r1.field == r2.field) return AnomalyKind::LostUpdate;
        return AnomalyKind::WriteSkew;
    }
    return AnomalyKind::Other;
}

struct PairAcc {
    std::set<std::string> f1, f2;
    std::set<AnomalyKind> kinds;
    bool has_witness = false;
    AnomalyWitness witness;
};

struct TaskResult {
    std::map<std::tuple<std::string, std::string, std::string>, PairAcc> pairs;
    std::set<std::string> kinds_by_pairing;
    bool capped = false;
    long histories = 0;
    long pruned = 0;
};

void scan_history(const Snapshot& snap, const std::map<std::string, int>& body_pos,
                  const std::vector<Invocation>& invs, const std::string& pairing,
                  TaskResult& out) {
    // split cross-instance conflict edges by direction
    std::vector<const ConflictEdge*> fwd, bwd; // 0 -> 1, 1 -> 0
    for (const auto& e : snap.conflicts) {
        if (e.from_inst == 0 && e.to_inst == 1)
            fwd.push_back(&e);
        else if (e.from_inst == 1 && e.to_inst == 0)
            bwd.push_back(&e);
    }
    if (fwd.empty() || bwd.empty()) return;

    auto emit = [&](int inst, const EdgeRole& a, const EdgeRole& b) {
        if (a.cmd == b.cmd) return; // a pair needs two distinct commands
        auto pa = body_pos.find(a.cmd);
        auto pb = body_pos.find(b.cmd);
        if (pa == body_pos.end() || pb == body_pos.end()) return;
        const EdgeRole& first = pa->second <= pb->second ? a : b;
        const EdgeRole& second = pa->second <= pb->second ? b : a;
        AnomalyKind kind = classify(first, second);
        auto key = std::make_tuple(snap.instances[static_cast<size_t>(inst)].name, first.cmd,
                                   second.cmd);
        auto& acc = out.pairs[key];
        acc.f1.insert(first.field);
        acc.f2.insert(second.field);
        acc.kinds.insert(kind);
        out.kinds_by_pairing.insert(pairing + ":" + to_string(kind));
        if (!acc.has_witness) {
            acc.has_witness = true;
            AnomalyWitness w;
            w.violated = kind == AnomalyKind::NonRepeatableRead ? AnomalyWitness::Violated::Isolation
                                                                : AnomalyWitness::Violated::Atomicity;
            w.kind = kind;
            w.txn = std::get<0>(key);
            w.c1 = first.cmd;
            w.c2 = second.cmd;
            w.eta = first.own_ev;
            w.eta_prime = second.own_ev;
            w.eta_witness = second.other_ev;
            w.invocations = invs;
            w.schedule.assign(snap.schedule.begin(), snap.schedule.end());
            acc.witness = std::move(w);
        }
    };

    for (const auto* e1 : fwd) {
        for (const auto* e2 : bwd) {
            // instance 0: out-edge e1, in-edge e2; instance 1: out e2, in e1
            emit(0, role_of(*e1, 0), role_of(*e2, 0));
            emit(1, role_of(*e2, 1), role_of(*e1, 1));
        }
    }
}

TaskResult run_pairing(const Program& p, const Bounds& bounds, const std::string& t1,
                       const std::string& t2) {
    TaskResult res;
    std::map<std::string, int> body_pos;
    for (const auto& t : p.transactions) {
        int i = 0;
        for (const auto& c : commands_of(t))
            if (const auto* l = label_of(c)) body_pos[*l] = i++;
    }
    const Transaction* a = p.find_transaction(t1);
    const Transaction* b = p.find_transaction(t2);
    if (!a || !b) return res;

    std::string pairing = t1 + "|" + t2;
    std::vector<Value> domain;
    for (Value v = bounds.arg_lo; v <= bounds.arg_hi; ++v) domain.push_back(v);

    // argument assignments for both instances
    size_t na = a->params.size(), nb = b->params.size();
    std::vector<size_t> idx(na + nb, 0);
    bool more = true;
    while (more) {
        Workload w;
        w.init = default_init(p, bounds);
        Invocation ia{t1, {}}, ib{t2, {}};
        for (size_t i = 0; i < na; ++i) ia.args.push_back(domain[idx[i]]);
        for (size_t i = 0; i < nb; ++i) ib.args.push_back(domain[idx[na + i]]);
        w.invocations = {ia, ib};

        auto stats = enumerate_histories(p, w, bounds, [&](const Snapshot& snap) {
            scan_history(snap, body_pos, w.invocations, pairing, res);
            return true;
        });
        res.histories += stats.histories;
        res.pruned += stats.pruned_errors;
        res.capped = res.capped || stats.schedule_capped || stats.views_capped || stats.steps_capped;

        more = false;
        for (size_t k = idx.size(); k > 0; --k) {
            if (++idx[k - 1] < domain.size()) {
                more = true;
                break;
            }
            idx[k - 1] = 0;
        }
        if (idx.empty()) break;
    }
    return res;
}

} // namespace

DetectReport detect_access_pairs(const Program& p, const Bounds& bounds, int jobs) {
    DetectReport report;
    report.bounds = bounds;

    std::vector<std::pair<std::string, std::string>> pairings;
    for (size_t i = 0; i < p.transactions.size(); ++i)
        for (size_t j = i; j < p.transactions.size(); ++j)
            pairings.emplace_back(p.transactions[i].name, p.transactions[j].name);

    std::vector<TaskResult> results(pairings.size());
    if (jobs <= 1 || pairings.size() <= 1) {
        for (size_t i = 0; i < pairings.size(); ++i)
            results[i] = run_pairing(p, bounds, pairings[i].first, pairings[i].second);
    } else {
        std::mutex mu;
        size_t next = 0;
        auto worker = [&]() {
            while (true) {
                size_t i;
                {
                    std::lock_guard<std::mutex> lk(mu);
                    if (next >= pairings.size()) return;
                    i = next++;
                }
                results[i] = run_pairing(p, bounds, pairings[i].first, pairings[i].second);
            }
        };
        std::vector<std::thread> pool;
        int n = std::min<int>(jobs, static_cast<int>(pairings.size()));
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::map<std::tuple<std::string, std::string, std::string>, PairAcc> merged;
    for (const auto& r : results) {
        report.capped = report.capped || r.capped;
        report.histories += r.histories;
        report.pruned += r.pruned;
        report.kinds_by_pairing.insert(r.kinds_by_pairing.begin(), r.kinds_by_pairing.end());
        for (const auto& [key, acc] : r.pairs) {
            auto& slot = merged[key];
            slot.f1.insert(acc.f1.begin(), acc.f1.end());
            slot.f2.insert(acc.f2.begin(), acc.f2.end());
            slot.kinds.insert(acc.kinds.begin(), acc.kinds.end());
            if (!slot.has_witness && acc.has_witness) {
                slot.has_witness = true;
                slot.witness = acc.witness;
            }
        }
    }
    for (const auto& [key, acc] : merged) {
        AccessPair pair;
        pair.txn = std::get<0>(key);
        pair.c1 = std::get<1>(key);
        pair.c2 = std::get<2>(key);
        pair.f1 = acc.f1;
        pair.f2 = acc.f2;
        report.pairs.push_back(pair);
        if (acc.has_witness) report.witnesses.push_back(acc.witness);
    }
    std::sort(report.pairs.begin(), report.pairs.end());
    return report;
}

} // namespace atro

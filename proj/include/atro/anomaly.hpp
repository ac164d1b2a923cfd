#pragma once

#include <set>
#include <string>
#include <vector>

#include "atro/interp.hpp"
#include "atro/store.hpp"

namespace atro {

// Same-transaction-instance relation between events.
bool st(const Event& a, const Event& b);

// Serial-execution conditions over a final store. Both are evaluated
// under the transitive closure of the visibility relation by default.
//   atomicity: timestamp order implies visibility, and effects of one
//              instance are visible only together.
//   isolation: an instance never observes more than its other events did.
bool check_strong_atomicity(const DatabaseState& s, bool transitive = true);
bool check_strong_isolation(const DatabaseState& s, bool transitive = true);

// Two events witness the same events and are witnessed together.
bool atomic_events(const DatabaseState& s, EventId a, EventId b, bool transitive = true);

// Closed visibility matrix (row = visible-to sets of one event).
std::vector<EventSet> vis_closure(const DatabaseState& s);

enum class AnomalyKind { DirtyRead, NonRepeatableRead, LostUpdate, WriteSkew, Other };
const char* to_string(AnomalyKind k);

// Two commands of one transaction implicated together in an anomalous
// execution, with the conflicting field sets.
struct AccessPair {
    std::string txn;
    std::string c1, c2; // labels, c1 earlier in the body
    std::set<std::string> f1, f2;

    auto operator<=>(const AccessPair&) const = default;
    std::string str() const;
};

struct AnomalyWitness {
    enum class Violated { Atomicity, Isolation };
    Violated violated = Violated::Atomicity;
    AnomalyKind kind = AnomalyKind::Other;
    std::string txn;
    std::string c1, c2;
    // events of the violating triple in the replayed final store
    EventId eta = -1, eta_prime = -1, eta_witness = -1;
    // replay seed
    std::vector<Invocation> invocations;
    std::vector<StepChoice> schedule;
};

struct DetectReport {
    std::vector<AccessPair> pairs; // sorted by (txn, c1, c2)
    std::vector<AnomalyWitness> witnesses;
    std::set<std::string> kinds_by_pairing; // "t1|t2:kind" occurrences
    Bounds bounds;
    bool capped = false;
    long histories = 0;
    long pruned = 0;
};

// Detection defaults: pairs of instances, two keys per field, args in
// {0,1}, eight views per step, twenty-thousand histories per workload.
Bounds detect_defaults();

// Bounded exhaustive search for anomalous access pairs: every unordered
// transaction pairing, every argument assignment over the bounded
// domain, every interleaving and view choice within caps. A history
// contributes a pair when its cross-instance conflict edges form a
// cycle; the two same-transaction commands on the cycle are the pair.
DetectReport detect_access_pairs(const Program& p, const Bounds& bounds, int jobs = 1);

} // namespace atro

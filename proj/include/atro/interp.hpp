#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atro/ast.hpp"
#include "atro/store.hpp"

#include <stdexcept>

namespace atro {

struct Bounds {
    int max_views_per_step = 8;
    long schedule_cap = 20000; // complete histories per enumeration
    long max_steps = 4096;     // per-history step limit
    Value key_domain_cap = 0;  // caps the non-reserved key range; 0 = declared
    Value arg_lo = 0, arg_hi = 1;
};

// "k=v,..." with keys max_views, schedule_cap, max_steps, key_domain,
// arg_lo, arg_hi. Unknown keys raise EvalError.
Bounds parse_bounds(const std::string& text, Bounds base = {});

struct Invocation {
    std::string txn;
    std::vector<Value> args;
};

struct InitRecord {
    std::string schema;
    std::vector<Value> key;
    std::vector<std::pair<std::string, Value>> fields; // non-key assignments
};

struct Workload {
    std::vector<InitRecord> init; // empty -> default seeding
    std::vector<Invocation> invocations;
};

// Every record over the capped domain, alive, declared fields zeroed.
std::vector<InitRecord> default_init(const Program& p, const Bounds& b);

// Installs initial data as one timestamp-0 write group per record.
void seed_init(DatabaseState& sigma, const Program& p, const std::vector<InitRecord>& init);

struct BoundRecord {
    RecordId rec;
    std::map<std::string, Value> fields;
};
using Binding = std::vector<BoundRecord>; // sorted by record key
using LocalStore = std::map<std::string, Binding>;

struct EvalCtx {
    const LocalStore* delta = nullptr;
    const std::map<std::string, Value>* args = nullptr;
    DatabaseState* sigma = nullptr;    // fresh-key draws
    const Schema* uuid_schema = nullptr;
};

Value eval_expr(const EvalCtx& ctx, const ExprPtr& e);
Value eval_expr(const LocalStore& delta, const std::map<std::string, Value>& args, const ExprPtr& e);

struct TxnInstance {
    int id = 0;
    std::string name;
    std::vector<Value> args;
    std::map<std::string, Value> arg_map;
    std::vector<CmdPtr> stack; // continuation; next command at the back
    ExprPtr ret_expr;
    std::optional<Value> ret_value;
    LocalStore delta;

    bool done() const { return ret_value.has_value(); }
};

struct Config {
    DatabaseState sigma;
    std::vector<TxnInstance> instances;
};

struct StepChoice {
    int instance = 0;
    int view_index = 0; // dropped-group mask over relevant write groups

    bool operator==(const StepChoice&) const = default;
};

struct Step {
    enum class Kind { Select, Update, Ret };
    Kind kind;
    int instance;
    int view_index;
    std::string label;
    Config after;
};

struct History {
    Config initial;
    std::vector<Step> steps;
    Config final;

    std::vector<StepChoice> choices() const;
};

// Field-level conflicts between instances, derived from the event log:
//   Dep  — a read that witnessed another instance's write (same record+field)
//   Anti — a read that did not witness such a write
struct ConflictEdge {
    enum class Kind { Dep, Anti };
    Kind kind;
    int from_inst, to_inst;
    std::string from_cmd, to_cmd;
    RecordId rec;
    std::string field;
    EventId read_ev, write_ev;
};

struct EnumStats {
    long histories = 0;
    long pruned_errors = 0;
    bool schedule_capped = false;
    bool views_capped = false;
    bool steps_capped = false;
};

struct Snapshot {
    const DatabaseState& sigma;
    const std::vector<TxnInstance>& instances;
    const std::vector<StepChoice>& schedule;
    const std::vector<ConflictEdge>& conflicts;
};

// Depth-first enumeration of complete histories: instance interleavings
// crossed with per-step local-view choices, in a fixed canonical order
// (lowest instance first; views by increasing dropped-group mask, newest
// group first). The callback may return false to stop early.
EnumStats enumerate_histories(const Program& p, const Workload& w, const Bounds& b,
                              const std::function<bool(const Snapshot&)>& cb,
                              bool validate_views = false);

// Runs the invocations to completion in order under full views.
History run_serial(const Program& p, const Workload& w, const Bounds& b = {});

// Re-executes one recorded schedule, materializing every configuration.
History replay(const Program& p, const Workload& w, const Bounds& b,
               const std::vector<StepChoice>& schedule, bool validate_views = false);

// Final-state signature used for outcome comparison and containment.
struct TableState {
    // record -> present reconstructed fields; alive included as a field
    std::map<RecordId, std::map<std::string, Value>> rows;

    bool operator==(const TableState&) const = default;
    auto operator<=>(const TableState&) const = default;
};

struct Outcome {
    std::vector<std::tuple<std::string, std::vector<Value>, Value>> gamma; // sorted
    TableState tables;

    bool operator==(const Outcome&) const = default;
    auto operator<=>(const Outcome&) const = default;
};

TableState table_state(const DatabaseState& sigma);
Outcome outcome_of(const DatabaseState& sigma, const std::vector<TxnInstance>& instances);

} // namespace atro

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "atro/anomaly.hpp"
#include "atro/ast.hpp"
#include "atro/valuecorr.hpp"

namespace atro {

enum class RewriteMode { Redirect, Logger };

struct RefactorStep {
    enum class Kind { IntroSchema, IntroField, IntroVC, Split, Merge, RemoveDead };
    Kind kind;
    std::string schema;       // IntroSchema / IntroField
    std::string field;        // IntroField
    bool is_pk = false;       // IntroField
    Value key_domain = 0;     // IntroSchema
    ValueCorrespondence vc;   // IntroVC
    RewriteMode mode = RewriteMode::Redirect;
    std::string txn;          // Split / Merge / RemoveDead
    std::string label_a;      // Split target, Merge into, RemoveDead label
    std::string label_b;      // Merge from

    std::string str() const;
};

struct RefactorState {
    CorrespondenceSet correspondences;
    Program program;
    std::vector<RefactorStep> log;
};

// Schema-growing rules. Programs never lose schemas or fields.
RefactorState intro_schema(const RefactorState& st, const std::string& name, Value key_domain);
RefactorState intro_field(const RefactorState& st, const std::string& schema,
                          const std::string& field, bool is_pk);

// Reroutes a key-equality clause through the correspondence's field map.
// Defined only for conjunctions of equalities covering exactly the
// source schema's key fields.
std::optional<WherePtr> redirect_where(const WherePtr& w, const ValueCorrespondence& v,
                                       const Schema& src_schema);

// Variable -> schema of its binding select (input program's schemas).
using BinderEnv = std::map<std::string, const Command::Select*>;

// Structural rewrite of one command under a new correspondence.
// Commands not touching the source field keep their shape with rewritten
// subexpressions; source-field selects are redirected to the target;
// source-field updates are redirected (redirect mode) or turned into
// fresh-key inserts of the increment (logger mode).
std::optional<CmdPtr> rewrite_command(const CmdPtr& c, const ValueCorrespondence& v,
                                      RewriteMode mode, const Program& p, BinderEnv& env);
std::optional<ExprPtr> rewrite_expr(const ExprPtr& e, const ValueCorrespondence& v,
                                    RewriteMode mode, const BinderEnv& env);

// Rewrites every transaction under v and records it; undefined anywhere
// leaves the state untouched.
std::optional<RefactorState> intro_vc(const RefactorState& st, const ValueCorrespondence& v,
                                      RewriteMode mode);

struct LoggingSchema {
    RefactorState state;
    std::string schema;
    ValueCorrespondence vc;
};

// Append-only table recording per-record deltas of one field: one key
// field per source key plus a fresh-key column, reconstructed by sum.
LoggingSchema make_logging_schema(const RefactorState& st, const std::string& schema,
                                  const std::string& field);

// Splits multi-assignment updates implicated in more than one pair into
// single-assignment updates, remapping the pairs; skipped when the split
// fields are accessed together elsewhere.
Program preprocess_split(const Program& p, std::vector<AccessPair>& pairs,
                         std::vector<RefactorStep>& log);

std::optional<Program> try_merging(const Program& p, const std::string& txn,
                                   const std::string& label1, const std::string& label2);

std::optional<RefactorState> try_redirect(const RefactorState& st, const std::string& txn,
                                          const std::string& label1, const std::string& label2,
                                          const std::set<std::pair<std::string, std::string>>*
                                              blocked_sources = nullptr);

// Relocations whose key-map fields are assigned somewhere without the
// moved field alongside: such a write re-targets the record map and
// strands the relocated value.
std::vector<ValueCorrespondence> unstable_relocations(const Program& p,
                                                      const CorrespondenceSet& v);

// Applies when the pair carries an increment-form update whose reading
// has no other use: the update becomes a fresh-key insert of the delta
// and the obsolete select is left for the dead-code sweep. A live
// reading blocks the rewrite (the stale value would stay observable
// while the log kept every delta).
std::optional<RefactorState> try_logging(const RefactorState& st, const std::string& txn,
                                         const std::string& label1, const std::string& label2);

enum class RepairMethod { Merged, RedirectedMerged, RedirectedOnly, Logged, AlreadyGone, Failed };
const char* to_string(RepairMethod m);

struct TryRepairResult {
    RefactorState state;
    RepairMethod method = RepairMethod::Failed;
};

// One pair: same table -> merge; same kind elsewhere -> redirect then
// merge; otherwise try the delta log.
TryRepairResult try_repair(const RefactorState& st, const AccessPair& pair);

struct PairOutcome {
    AccessPair pair;
    RepairMethod method = RepairMethod::Failed;
    std::string note;
};

struct RepairReport {
    std::vector<AccessPair> pairs_in;
    std::vector<PairOutcome> outcomes;
    std::vector<RefactorStep> steps;
    long repaired = 0;
    long remaining = 0;
    bool recommend_serializable = false; // for transactions of remaining pairs
    DetectReport detection;
};

struct RepairResult {
    Program program;
    CorrespondenceSet correspondences;
    RepairReport report;
};

// Detect, split, repair pair by pair, then eliminate dead selects and
// merge co-located commands.
RepairResult repair(const Program& p, const Bounds& bounds, int jobs = 1);

// Re-applies a recorded step log from scratch.
RefactorState replay_log(const Program& original, const std::vector<RefactorStep>& log);

} // namespace atro

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "atro/interp.hpp"

namespace atro {

enum class Agg { Any, Sum, Id };
const char* to_string(Agg a);

// How one field's values are recoverable from another table: source
// records map to target records via equalities between source key
// fields and target fields, and an aggregator folds the target values.
struct ValueCorrespondence {
    std::string src_schema, dst_schema;
    std::string src_field, dst_field;
    std::map<std::string, std::string> theta; // src pk field -> dst field
    Agg agg = Agg::Any;

    auto operator<=>(const ValueCorrespondence&) const = default;
    bool is_identity() const {
        return src_schema == dst_schema && src_field == dst_field && agg == Agg::Id;
    }
    std::string str() const;
};

using CorrespondenceSet = std::vector<ValueCorrespondence>;

// No two correspondences may share a source or a target field.
std::vector<std::string> validate_correspondences(const CorrespondenceSet& v);

// Target records representing r: those whose theta-mapped fields
// reconstruct to r's key values.
std::set<RecordId> lift_theta(const ValueCorrespondence& v, const TableState& dst,
                              const Program& src_prog, const Program& dst_prog, Value key_cap,
                              const RecordId& r);
std::set<RecordId> lift_theta(const ValueCorrespondence& v, const DatabaseState& dst_sigma,
                              const Program& src_prog, const Program& dst_prog, Value key_cap,
                              const RecordId& r);

// sum: arithmetic sum (empty -> 0); any/id: the unique value.
Value apply_aggregator(Agg a, const std::vector<Value>& vals);
// Variant over possibly-absent values; throws EvalError when undefined.
std::optional<Value> apply_aggregator_opt(Agg a, const std::vector<std::optional<Value>>& vals);

struct ContainmentResult {
    bool ok = true;
    std::string reason;
    explicit operator bool() const { return ok; }
};

// src is fully recoverable from dst under V: for every correspondence
// and every source record, presence matches presence of its targets and
// the aggregated target values reproduce the source value.
ContainmentResult check_containment(const TableState& src, const TableState& dst,
                                    const CorrespondenceSet& v, const Program& src_prog,
                                    const Program& dst_prog, Value key_cap = 0);
ContainmentResult check_containment(const DatabaseState& src, const DatabaseState& dst,
                                    const CorrespondenceSet& v, const Program& src_prog,
                                    const Program& dst_prog, Value key_cap = 0);

// One identity correspondence per declared field, minus exclusions.
CorrespondenceSet identity_correspondences(const Program& p,
                                           const std::set<std::string>& exclude = {});

// The emitted set plus identities for every untouched original field.
CorrespondenceSet refinement_correspondences(const Program& original, const CorrespondenceSet& v);

bool check_history_refinement(const History& refactored, const History& original,
                              const CorrespondenceSet& v, const Program& orig_prog,
                              const Program& refac_prog, Value key_cap = 0);

struct RefinementVerdict {
    enum class Status { Pass, BoundedPass, Fail };
    Status status = Status::Pass;
    std::string detail;
    long refactored_outcomes = 0;
    long original_outcomes = 0;
    long serial_histories = 0;
    bool capped = false;

    bool passed() const { return status != Status::Fail; }
    const char* str() const;
};

// (I) every bounded history of the refactored program refines some
//     history of the original;
// (II) every serial history of the original is refined by some bounded
//     history of the refactored program.
RefinementVerdict check_program_refinement(const Program& refactored, const Program& original,
                                           const CorrespondenceSet& v,
                                           const std::vector<Workload>& workloads, const Bounds& b);

// Derives the refactored-side initial data: copies the original rows and
// populates correspondence targets (joined rows for any/id, one seeded
// row per source record for sum).
std::vector<InitRecord> transform_init(const Program& original, const Program& refactored,
                                       const CorrespondenceSet& v,
                                       const std::vector<InitRecord>& init);

// File form: "vc R.f -> R'.f' via {p: q, ...} agg any|sum|id" per line.
CorrespondenceSet parse_correspondences(const std::string& text,
                                        const std::string& filename = "<vc>");
std::string print_correspondences(const CorrespondenceSet& v);

} // namespace atro

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "atro/diagnostics.hpp"

namespace atro {

using Value = std::int64_t;

// Reserved boolean field implicitly present in every schema.
inline constexpr const char* kAliveField = "alive";

enum class ArithOp { Add, Sub, Mul, Div };
enum class CmpOp { Lt, Le, Eq, Gt, Ge };
enum class LogicOp { And, Or };
enum class AggKind { Sum, Min, Max };

const char* to_string(ArithOp op);
const char* to_string(CmpOp op);
const char* to_string(LogicOp op);
const char* to_string(AggKind k);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    struct Const {
        Value v = 0;
        bool boolean = false;
    };
    struct Arg {
        std::string name;
    };
    struct Arith {
        ArithOp op;
        ExprPtr lhs, rhs;
    };
    struct Cmp {
        CmpOp op;
        ExprPtr lhs, rhs;
    };
    struct Logic {
        LogicOp op;
        ExprPtr lhs, rhs;
    };
    struct Iter {};
    struct Agg {
        AggKind kind;
        std::string var;
        std::string field;
    };
    // 1-based record index; at^1(x.f) is the `x.f` surface form.
    struct At {
        ExprPtr index;
        std::string var;
        std::string field;
    };
    struct Uuid {};

    using Node = std::variant<Const, Arg, Arith, Cmp, Logic, Iter, Agg, At, Uuid>;
    Node node;
    SourcePos pos;
};

ExprPtr mk_const(Value v, bool boolean = false);
ExprPtr mk_arg(std::string name);
ExprPtr mk_arith(ArithOp op, ExprPtr l, ExprPtr r);
ExprPtr mk_cmp(CmpOp op, ExprPtr l, ExprPtr r);
ExprPtr mk_logic(LogicOp op, ExprPtr l, ExprPtr r);
ExprPtr mk_iter();
ExprPtr mk_agg(AggKind k, std::string var, std::string field);
ExprPtr mk_at(ExprPtr index, std::string var, std::string field);
ExprPtr mk_at1(std::string var, std::string field);
ExprPtr mk_uuid();

bool equal(const ExprPtr& a, const ExprPtr& b);

struct Where;
using WherePtr = std::shared_ptr<const Where>;

struct Where {
    struct Atom {
        std::string field; // this.<field>
        CmpOp op;
        ExprPtr expr;
    };
    struct Combo {
        LogicOp op;
        WherePtr lhs, rhs;
    };
    using Node = std::variant<Atom, Combo>;
    Node node;
    SourcePos pos;
};

WherePtr mk_atom(std::string field, CmpOp op, ExprPtr e);
WherePtr mk_combo(LogicOp op, WherePtr l, WherePtr r);

bool equal(const WherePtr& a, const WherePtr& b);

std::set<std::string> fields_of_where(const WherePtr& w);

// Flattens a pure conjunction into atoms; empty result if the clause
// contains a disjunction.
std::vector<Where::Atom> conjunctive_atoms(const WherePtr& w);

struct Command;
using CmdPtr = std::shared_ptr<const Command>;

struct Command {
    struct Select {
        std::string var;
        std::vector<std::string> fields;
        std::string schema;
        WherePtr where;
        std::string label; // "<txn>/<ordinal>"
    };
    struct Update {
        std::string schema;
        std::vector<std::pair<std::string, ExprPtr>> sets;
        WherePtr where;
        std::string label;
    };
    struct Insert {
        std::string schema;
        std::vector<std::pair<std::string, ExprPtr>> values;
        std::string label;
    };
    struct If {
        ExprPtr cond;
        CmdPtr body;
    };
    struct Iterate {
        ExprPtr count;
        CmdPtr body;
    };
    struct Seq {
        CmdPtr first, second;
    };
    struct Skip {};

    using Node = std::variant<Select, Update, Insert, If, Iterate, Seq, Skip>;
    Node node;
    SourcePos pos;
};

CmdPtr mk_select(Command::Select s);
CmdPtr mk_update(Command::Update u);
CmdPtr mk_insert(Command::Insert i);
CmdPtr mk_if(ExprPtr cond, CmdPtr body);
CmdPtr mk_iterate(ExprPtr count, CmdPtr body);
CmdPtr mk_seq(CmdPtr a, CmdPtr b);
CmdPtr mk_skip();

bool equal(const CmdPtr& a, const CmdPtr& b);

struct Schema {
    std::string name;
    std::vector<std::string> fields;      // declared order, primary key included
    std::vector<std::string> primary_key; // subset of fields, declared order
    Value key_domain = 2;                 // admissible values per pk field
    SourcePos pos;

    bool has_field(const std::string& f) const;
    bool is_pk(const std::string& f) const;
    // Key values >= reserved_base() are set aside for uuid allocation.
    Value reserved_base() const { return key_domain - key_domain / 4; }

    bool operator==(const Schema& o) const;
};

struct Transaction {
    std::string name;
    std::vector<std::string> params;
    CmdPtr body;
    ExprPtr ret;
    SourcePos pos;

    bool operator==(const Transaction& o) const;
};

struct Program {
    std::vector<Schema> schemas;
    std::vector<Transaction> transactions;

    const Schema* find_schema(const std::string& name) const;
    const Transaction* find_transaction(const std::string& name) const;

    bool operator==(const Program& o) const;
};

// Collects every command in evaluation order (descending into if/iterate).
void visit_commands(const CmdPtr& c, const std::function<void(const CmdPtr&)>& fn);
std::vector<CmdPtr> commands_of(const Transaction& t);

const std::string* label_of(const CmdPtr& c);
// "txn/ordinal" -> ordinal part; whole string if no slash.
std::string label_ordinal(const std::string& label);
// Strips trailing primes: "regSt/U4.2'" -> "regSt/U4.2".
std::string label_root(const std::string& label);

// Lowers an insert to the equivalent update: alive=true plus the non-key
// value pairs, keyed by equality on every primary-key field.
Command::Update desugar_insert(const Command::Insert& ins, const Schema& schema);

// Substitutes `iter` with a constant, leaving nested iterate bodies alone.
ExprPtr subst_iter(const ExprPtr& e, Value v);
CmdPtr subst_iter(const CmdPtr& c, Value v);

// Renames a record variable in every use position.
ExprPtr subst_var(const ExprPtr& e, const std::string& from, const std::string& to);
WherePtr subst_var(const WherePtr& w, const std::string& from, const std::string& to);
CmdPtr subst_var(const CmdPtr& c, const std::string& from, const std::string& to);

// Variables read by an expression / clause / command (not bindings).
void collect_var_uses(const ExprPtr& e, std::set<std::string>& out);
void collect_var_uses(const WherePtr& w, std::set<std::string>& out);
void collect_var_uses(const CmdPtr& c, std::set<std::string>& out);

} // namespace atro

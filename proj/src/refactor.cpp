#include "atro/refactor.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <sstream>
#include <variant>

#include "atro/printer.hpp"

namespace atro {

namespace {
template <class... Ts> struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::string schema_prefix(const std::string& name) {
    std::string p = name.substr(0, 2);
    for (auto& c : p) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return p;
}

bool label_matches(const std::string& actual, const std::string& wanted) {
    return label_root(actual) == label_root(wanted);
}

// Top-level command list of a body (no descent into if/iterate).
std::vector<CmdPtr> top_level(const CmdPtr& body) {
    std::vector<CmdPtr> out;
    std::function<void(const CmdPtr&)> walk = [&](const CmdPtr& c) {
        if (!c) return;
        if (const auto* s = std::get_if<Command::Seq>(&c->node)) {
            walk(s->first);
            walk(s->second);
        } else if (std::holds_alternative<Command::Skip>(c->node)) {
            // drop
        } else {
            out.push_back(c);
        }
    };
    walk(body);
    return out;
}

CmdPtr rebuild(const std::vector<CmdPtr>& cmds) {
    CmdPtr out = mk_skip();
    for (auto it = cmds.rbegin(); it != cmds.rend(); ++it)
        out = std::holds_alternative<Command::Skip>(out->node) ? *it : mk_seq(*it, out);
    return out;
}

const Transaction* txn_of(const Program& p, const std::string& name) {
    return p.find_transaction(name);
}

CmdPtr find_labeled(const Program& p, const std::string& txn, const std::string& label) {
    const Transaction* t = txn_of(p, txn);
    if (!t) return nullptr;
    CmdPtr found;
    visit_commands(t->body, [&](const CmdPtr& c) {
        if (found) return;
        if (const auto* l = label_of(c); l && label_matches(*l, label)) found = c;
    });
    return found;
}

// (schema, field) pairs a command reads / writes.
using FieldSet = std::set<std::pair<std::string, std::string>>;

void accessed(const Program& p, const CmdPtr& c, FieldSet& reads, FieldSet& writes) {
    std::visit(overloaded{
                   [&](const Command::Select& s) {
                       for (const auto& f : fields_of_where(s.where)) reads.emplace(s.schema, f);
                       for (const auto& f : s.fields) reads.emplace(s.schema, f);
                   },
                   [&](const Command::Update& u) {
                       for (const auto& f : fields_of_where(u.where)) reads.emplace(u.schema, f);
                       for (const auto& [f, e] : u.sets) writes.emplace(u.schema, f);
                   },
                   [&](const Command::Insert& i) {
                       writes.emplace(i.schema, kAliveField);
                       for (const auto& [f, e] : i.values)
                           if (const Schema* sc = p.find_schema(i.schema); !sc || !sc->is_pk(f))
                               writes.emplace(i.schema, f);
                   },
                   [&](const auto&) {},
               },
               c->node);
}

bool intersects(const FieldSet& a, const FieldSet& b) {
    for (const auto& x : a)
        if (b.count(x)) return true;
    return false;
}

// Latest select binding `var` before position `upto` in a block.
const Command::Select* binder_before(const std::vector<CmdPtr>& block, size_t upto,
                                     const std::string& var) {
    const Command::Select* found = nullptr;
    for (size_t i = 0; i < upto && i < block.size(); ++i)
        if (const auto* s = std::get_if<Command::Select>(&block[i]->node))
            if (s->var == var) found = s;
    return found;
}

std::string primed(const std::string& label) {
    return label + "'";
}

} // namespace

std::string RefactorStep::str() const {
    std::ostringstream os;
    switch (kind) {
    case Kind::IntroSchema: os << "intro schema " << schema << " domain " << key_domain; break;
    case Kind::IntroField:
        os << "intro field " << schema << "." << field << (is_pk ? " (key)" : "");
        break;
    case Kind::IntroVC:
        os << "intro " << vc.str() << " [" << (mode == RewriteMode::Redirect ? "redirect" : "logger")
           << "]";
        break;
    case Kind::Split: os << "split " << txn << " " << label_a; break;
    case Kind::Merge: os << "merge " << txn << " " << label_b << " into " << label_a; break;
    case Kind::RemoveDead: os << "remove dead " << txn << " " << label_a; break;
    }
    return os.str();
}

RefactorState intro_schema(const RefactorState& st, const std::string& name, Value key_domain) {
    if (st.program.find_schema(name)) throw EvalError("schema " + name + " already exists");
    RefactorState out = st;
    Schema s;
    s.name = name;
    s.key_domain = key_domain;
    out.program.schemas.push_back(std::move(s));
    RefactorStep step;
    step.kind = RefactorStep::Kind::IntroSchema;
    step.schema = name;
    step.key_domain = key_domain;
    out.log.push_back(std::move(step));
    return out;
}

RefactorState intro_field(const RefactorState& st, const std::string& schema,
                          const std::string& field, bool is_pk) {
    RefactorState out = st;
    Schema* sc = nullptr;
    for (auto& s : out.program.schemas)
        if (s.name == schema) sc = &s;
    if (!sc) throw EvalError("unknown schema " + schema);
    if (sc->has_field(field)) throw EvalError(schema + "." + field + " already exists");
    sc->fields.push_back(field);
    if (is_pk) sc->primary_key.push_back(field);
    RefactorStep step;
    step.kind = RefactorStep::Kind::IntroField;
    step.schema = schema;
    step.field = field;
    step.is_pk = is_pk;
    out.log.push_back(std::move(step));
    return out;
}

namespace {

// Equality atoms of a clause covering exactly the schema's key fields,
// in key order; nullopt when the clause is not of that shape.
std::optional<std::vector<std::pair<std::string, ExprPtr>>> key_equalities(const WherePtr& w,
                                                                           const Schema& sc) {
    auto atoms = conjunctive_atoms(w);
    if (atoms.empty()) return std::nullopt;
    std::vector<std::pair<std::string, ExprPtr>> out;
    std::set<std::string> seen;
    for (const auto& a : atoms) {
        if (a.op != CmpOp::Eq) return std::nullopt;
        if (!sc.is_pk(a.field)) return std::nullopt;
        if (!seen.insert(a.field).second) return std::nullopt;
    }
    for (const auto& pk : sc.primary_key) {
        const Where::Atom* found = nullptr;
        for (const auto& a : atoms)
            if (a.field == pk) found = &a;
        if (!found) return std::nullopt;
        out.emplace_back(pk, found->expr);
    }
    return out;
}

} // namespace

std::optional<WherePtr> redirect_where(const WherePtr& w, const ValueCorrespondence& v,
                                       const Schema& src_schema) {
    auto eqs = key_equalities(w, src_schema);
    if (!eqs) return std::nullopt;
    WherePtr out;
    for (const auto& [pk, expr] : *eqs) {
        auto it = v.theta.find(pk);
        if (it == v.theta.end()) return std::nullopt;
        auto atom = mk_atom(it->second, CmpOp::Eq, expr);
        out = out ? mk_combo(LogicOp::And, out, atom) : atom;
    }
    return out;
}

std::optional<ExprPtr> rewrite_expr(const ExprPtr& e, const ValueCorrespondence& v,
                                    RewriteMode mode, const BinderEnv& env) {
    if (!e) return e;
    auto touches_source = [&](const std::string& var, const std::string& field) {
        if (field != v.src_field) return false;
        auto it = env.find(var);
        return it != env.end() && it->second && it->second->schema == v.src_schema;
    };
    using R = std::optional<ExprPtr>;
    return std::visit(
        overloaded{
            [&](const Expr::At& a) -> R {
                auto idx = rewrite_expr(a.index, v, mode, env);
                if (!idx) return std::nullopt;
                if (!touches_source(a.var, a.field)) return mk_at(*idx, a.var, a.field);
                const auto* one = std::get_if<Expr::Const>(&(*idx)->node);
                if (!one || one->v != 1) return std::nullopt; // only first-record access moves
                if (mode == RewriteMode::Redirect) return mk_at1(a.var, v.dst_field);
                return mk_agg(AggKind::Sum, a.var, v.dst_field); // deltas re-aggregate
            },
            [&](const Expr::Agg& a) -> R {
                if (!touches_source(a.var, a.field))
                    return mk_agg(a.kind, a.var, a.field);
                if (mode == RewriteMode::Redirect) return mk_agg(a.kind, a.var, v.dst_field);
                return std::nullopt; // aggregate of deltas has no single-field form
            },
            [&](const Expr::Arith& a) -> R {
                auto l = rewrite_expr(a.lhs, v, mode, env);
                auto r = rewrite_expr(a.rhs, v, mode, env);
                if (!l || !r) return std::nullopt;
                return mk_arith(a.op, *l, *r);
            },
            [&](const Expr::Cmp& c) -> R {
                auto l = rewrite_expr(c.lhs, v, mode, env);
                auto r = rewrite_expr(c.rhs, v, mode, env);
                if (!l || !r) return std::nullopt;
                return mk_cmp(c.op, *l, *r);
            },
            [&](const Expr::Logic& l) -> R {
                auto a = rewrite_expr(l.lhs, v, mode, env);
                auto b = rewrite_expr(l.rhs, v, mode, env);
                if (!a || !b) return std::nullopt;
                return mk_logic(l.op, *a, *b);
            },
            [&](const auto&) -> R { return e; },
        },
        e->node);
}

namespace {

std::optional<WherePtr> rewrite_where_exprs(const WherePtr& w, const ValueCorrespondence& v,
                                            RewriteMode mode, const BinderEnv& env) {
    if (!w) return w;
    using R = std::optional<WherePtr>;
    return std::visit(overloaded{
                          [&](const Where::Atom& a) -> R {
                              auto e = rewrite_expr(a.expr, v, mode, env);
                              if (!e) return std::nullopt;
                              return mk_atom(a.field, a.op, *e);
                          },
                          [&](const Where::Combo& c) -> R {
                              auto l = rewrite_where_exprs(c.lhs, v, mode, env);
                              auto r = rewrite_where_exprs(c.rhs, v, mode, env);
                              if (!l || !r) return std::nullopt;
                              return mk_combo(c.op, *l, *r);
                          },
                      },
                      w->node);
}

// f = at(1, x.f) + d  |  f = d + at(1, x.f)  |  f = at(1, x.f) - d
struct IncrementForm {
    std::string var;
    ExprPtr delta; // signed
};

std::optional<IncrementForm> match_increment(const std::string& field, const ExprPtr& e) {
    const auto* ar = std::get_if<Expr::Arith>(&e->node);
    if (!ar || (ar->op != ArithOp::Add && ar->op != ArithOp::Sub)) return std::nullopt;
    auto is_self = [&](const ExprPtr& side) -> std::optional<std::string> {
        const auto* at = std::get_if<Expr::At>(&side->node);
        if (!at || at->field != field) return std::nullopt;
        const auto* one = std::get_if<Expr::Const>(&at->index->node);
        if (!one || one->v != 1) return std::nullopt;
        return at->var;
    };
    if (auto var = is_self(ar->lhs)) {
        ExprPtr d = ar->rhs;
        if (ar->op == ArithOp::Sub) {
            if (const auto* c = std::get_if<Expr::Const>(&d->node))
                d = mk_const(-c->v);
            else
                d = mk_arith(ArithOp::Sub, mk_const(0), d);
        }
        return IncrementForm{*var, d};
    }
    if (ar->op == ArithOp::Add)
        if (auto var = is_self(ar->rhs)) return IncrementForm{*var, ar->lhs};
    return std::nullopt;
}

} // namespace

std::optional<CmdPtr> rewrite_command(const CmdPtr& c, const ValueCorrespondence& v,
                                      RewriteMode mode, const Program& p, BinderEnv& env) {
    if (!c) return c;
    using R = std::optional<CmdPtr>;
    return std::visit(
        overloaded{
            [&](const Command::Select& s) -> R {
                auto w = rewrite_where_exprs(s.where, v, mode, env);
                if (!w) return std::nullopt;
                bool on_source = s.schema == v.src_schema &&
                                 std::find(s.fields.begin(), s.fields.end(), v.src_field) !=
                                     s.fields.end();
                CmdPtr out;
                if (on_source) {
                    if (s.fields.size() != 1) return std::nullopt; // cannot split a projection
                    const Schema* sc = p.find_schema(s.schema);
                    if (!sc) return std::nullopt;
                    auto rw = redirect_where(*w, v, *sc);
                    if (!rw) return std::nullopt;
                    Command::Select n;
                    n.var = s.var;
                    n.fields = {v.dst_field};
                    n.schema = v.dst_schema;
                    n.where = *rw;
                    n.label = s.label;
                    out = mk_select(std::move(n));
                } else {
                    Command::Select n = s;
                    n.where = *w;
                    out = mk_select(std::move(n));
                }
                env[s.var] = std::get_if<Command::Select>(&c->node); // original binding schema
                if (!equal(out, c)) {
                    auto n = std::get<Command::Select>(out->node);
                    n.label = primed(s.label);
                    out = mk_select(std::move(n));
                }
                return out;
            },
            [&](const Command::Update& u) -> R {
                auto w = rewrite_where_exprs(u.where, v, mode, env);
                if (!w) return std::nullopt;
                bool on_source = false;
                if (u.schema == v.src_schema)
                    for (const auto& [f, e] : u.sets)
                        if (f == v.src_field) on_source = true;
                if (!on_source) {
                    Command::Update n = u;
                    n.where = *w;
                    for (auto& [f, e] : n.sets) {
                        auto e2 = rewrite_expr(e, v, mode, env);
                        if (!e2) return std::nullopt;
                        e = *e2;
                    }
                    CmdPtr out = mk_update(std::move(n));
                    if (!equal(out, c)) {
                        auto n2 = std::get<Command::Update>(out->node);
                        n2.label = primed(u.label);
                        out = mk_update(std::move(n2));
                    }
                    return out;
                }
                if (u.sets.size() != 1) return std::nullopt; // needs a prior split
                const Schema* sc = p.find_schema(u.schema);
                if (!sc) return std::nullopt;
                if (mode == RewriteMode::Redirect) {
                    auto rw = redirect_where(*w, v, *sc);
                    if (!rw) return std::nullopt;
                    auto e2 = rewrite_expr(u.sets[0].second, v, mode, env);
                    if (!e2) return std::nullopt;
                    Command::Update n;
                    n.schema = v.dst_schema;
                    n.sets = {{v.dst_field, *e2}};
                    n.where = *rw;
                    n.label = primed(u.label);
                    return mk_update(std::move(n));
                }
                // logger: the update must be an increment of its own prior
                // value, read by a select on the same records
                auto inc = match_increment(v.src_field, u.sets[0].second);
                if (!inc) return std::nullopt;
                auto bit = env.find(inc->var);
                if (bit == env.end() || !bit->second || bit->second->schema != v.src_schema)
                    return std::nullopt;
                if (!where_equivalent(bit->second->where, u.where)) return std::nullopt;
                auto eqs = key_equalities(*w, *sc);
                if (!eqs) return std::nullopt;
                const Schema* dst = p.find_schema(v.dst_schema);
                if (!dst) return std::nullopt;
                auto delta = rewrite_expr(inc->delta, v, mode, env);
                if (!delta) return std::nullopt;
                Command::Insert n;
                n.schema = v.dst_schema;
                for (const auto& [pk, expr] : *eqs) {
                    auto it = v.theta.find(pk);
                    if (it == v.theta.end()) return std::nullopt;
                    n.values.emplace_back(it->second, expr);
                }
                std::set<std::string> mapped;
                for (const auto& [pk, q] : v.theta) mapped.insert(q);
                for (const auto& q : dst->primary_key)
                    if (!mapped.count(q)) n.values.emplace_back(q, mk_uuid());
                n.values.emplace_back(v.dst_field, *delta);
                n.label = primed(u.label);
                return mk_insert(std::move(n));
            },
            [&](const Command::Insert& i) -> R {
                if (i.schema == v.src_schema)
                    for (const auto& [f, e] : i.values)
                        if (f == v.src_field) return std::nullopt;
                Command::Insert n = i;
                for (auto& [f, e] : n.values) {
                    auto e2 = rewrite_expr(e, v, mode, env);
                    if (!e2) return std::nullopt;
                    e = *e2;
                }
                CmdPtr out = mk_insert(std::move(n));
                if (!equal(out, c)) {
                    auto n2 = std::get<Command::Insert>(out->node);
                    n2.label = primed(i.label);
                    out = mk_insert(std::move(n2));
                }
                return out;
            },
            [&](const Command::If& f) -> R {
                auto cond = rewrite_expr(f.cond, v, mode, env);
                if (!cond) return std::nullopt;
                auto body = rewrite_command(f.body, v, mode, p, env);
                if (!body) return std::nullopt;
                return mk_if(*cond, *body);
            },
            [&](const Command::Iterate& it) -> R {
                auto n = rewrite_expr(it.count, v, mode, env);
                if (!n) return std::nullopt;
                auto body = rewrite_command(it.body, v, mode, p, env);
                if (!body) return std::nullopt;
                return mk_iterate(*n, *body);
            },
            [&](const Command::Seq& s) -> R {
                auto a = rewrite_command(s.first, v, mode, p, env);
                if (!a) return std::nullopt;
                auto b = rewrite_command(s.second, v, mode, p, env);
                if (!b) return std::nullopt;
                return mk_seq(*a, *b);
            },
            [&](const Command::Skip&) -> R { return c; },
        },
        c->node);
}

std::optional<RefactorState> intro_vc(const RefactorState& st, const ValueCorrespondence& v,
                                      RewriteMode mode) {
    for (const auto& existing : st.correspondences) {
        if (existing == v) return std::nullopt;
        std::set<std::pair<std::string, std::string>> used = {
            {existing.src_schema, existing.src_field}, {existing.dst_schema, existing.dst_field}};
        if (used.count({v.src_schema, v.src_field}) || used.count({v.dst_schema, v.dst_field}))
            return std::nullopt;
    }
    RefactorState out = st;
    for (auto& t : out.program.transactions) {
        BinderEnv env;
        auto body = rewrite_command(t.body, v, mode, st.program, env);
        if (!body) return std::nullopt;
        auto ret = rewrite_expr(t.ret, v, mode, env);
        if (!ret) return std::nullopt;
        t.body = *body;
        t.ret = *ret;
    }
    out.correspondences.push_back(v);
    RefactorStep step;
    step.kind = RefactorStep::Kind::IntroVC;
    step.vc = v;
    step.mode = mode;
    out.log.push_back(std::move(step));
    return out;
}

LoggingSchema make_logging_schema(const RefactorState& st, const std::string& schema,
                                  const std::string& field) {
    const Schema* src = st.program.find_schema(schema);
    if (!src) throw EvalError("unknown schema " + schema);
    std::string base = schema + "_" + upper(field) + "_LOG";
    std::string name = base;
    for (int i = 2; st.program.find_schema(name); ++i) name = base + std::to_string(i);

    LoggingSchema out{intro_schema(st, name, std::max<Value>(8, 2 * src->key_domain)), name, {}};
    ValueCorrespondence v;
    v.src_schema = schema;
    v.dst_schema = name;
    v.src_field = field;
    v.agg = Agg::Sum;
    for (const auto& pk : src->primary_key) {
        out.state = intro_field(out.state, name, pk, true);
        v.theta[pk] = pk;
    }
    std::string log_id = "log_id";
    const Schema* fresh = out.state.program.find_schema(name);
    for (int i = 2; fresh->has_field(log_id); ++i) log_id = "log_id" + std::to_string(i);
    out.state = intro_field(out.state, name, log_id, true);
    std::string vfield = field + "_log";
    fresh = out.state.program.find_schema(name);
    for (int i = 2; fresh->has_field(vfield); ++i) vfield = field + "_log" + std::to_string(i);
    out.state = intro_field(out.state, name, vfield, false);
    v.dst_field = vfield;
    out.vc = v;
    return out;
}

namespace {

CmdPtr split_in_body(const CmdPtr& c, const std::string& label, bool& did) {
    if (!c) return c;
    return std::visit(
        overloaded{
            [&](const Command::Update& u) -> CmdPtr {
                if (u.label != label || u.sets.size() < 2) return c;
                did = true;
                std::vector<CmdPtr> parts;
                int i = 0;
                for (const auto& [f, e] : u.sets) {
                    Command::Update n;
                    n.schema = u.schema;
                    n.sets = {{f, e}};
                    n.where = u.where;
                    n.label = u.label + "." + std::to_string(++i);
                    parts.push_back(mk_update(std::move(n)));
                }
                return rebuild(parts);
            },
            [&](const Command::If& f) -> CmdPtr { return mk_if(f.cond, split_in_body(f.body, label, did)); },
            [&](const Command::Iterate& it) -> CmdPtr {
                return mk_iterate(it.count, split_in_body(it.body, label, did));
            },
            [&](const Command::Seq& s) -> CmdPtr {
                return mk_seq(split_in_body(s.first, label, did), split_in_body(s.second, label, did));
            },
            [&](const auto&) -> CmdPtr { return c; },
        },
        c->node);
}

} // namespace

Program preprocess_split(const Program& p, std::vector<AccessPair>& pairs,
                         std::vector<RefactorStep>& log) {
    // labels implicated in more than one pair
    std::map<std::string, int> involvement;
    for (const auto& pr : pairs) {
        ++involvement[pr.c1];
        ++involvement[pr.c2];
    }

    Program out = p;
    for (auto& t : out.transactions) {
        std::vector<std::string> to_split;
        visit_commands(t.body, [&](const CmdPtr& c) {
            const auto* u = std::get_if<Command::Update>(&c->node);
            if (!u || u->sets.size() < 2) return;
            auto it = involvement.find(u->label);
            if (it == involvement.end() || it->second < 2) return;
            // the split fields may not travel together elsewhere
            std::set<std::string> split_fields;
            for (const auto& [f, e] : u->sets) split_fields.insert(f);
            bool co_accessed = false;
            for (const auto& t2 : p.transactions) {
                visit_commands(t2.body, [&](const CmdPtr& c2) {
                    if (c2 == c) return;
                    FieldSet r, w;
                    accessed(p, c2, r, w);
                    int hits = 0;
                    for (const auto& f : split_fields)
                        if (r.count({u->schema, f}) || w.count({u->schema, f})) ++hits;
                    if (hits >= 2) co_accessed = true;
                });
            }
            if (!co_accessed) to_split.push_back(u->label);
        });
        for (const auto& label : to_split) {
            bool did = false;
            t.body = split_in_body(t.body, label, did);
            if (did) {
                RefactorStep step;
                step.kind = RefactorStep::Kind::Split;
                step.txn = t.name;
                step.label_a = label;
                log.push_back(std::move(step));
            }
        }
    }

    // remap pairs onto the split parts by their field sets
    std::map<std::string, std::vector<const Command::Update*>> parts;
    for (const auto& t : out.transactions)
        visit_commands(t.body, [&](const CmdPtr& c) {
            if (const auto* u = std::get_if<Command::Update>(&c->node)) {
                auto dot = u->label.rfind('.');
                if (dot != std::string::npos) parts[u->label.substr(0, dot)].push_back(u);
            }
        });
    std::vector<AccessPair> remapped;
    for (auto pr : pairs) {
        auto route = [&](std::string& label, const std::set<std::string>& fields) {
            auto it = parts.find(label);
            if (it == parts.end()) return std::vector<std::string>{label};
            std::vector<std::string> dst;
            for (const auto* u : it->second)
                for (const auto& [f, e] : u->sets)
                    if (fields.count(f)) dst.push_back(u->label);
            if (dst.empty()) dst.push_back(label);
            return dst;
        };
        for (const auto& l1 : route(pr.c1, pr.f1))
            for (const auto& l2 : route(pr.c2, pr.f2)) {
                AccessPair np = pr;
                np.c1 = l1;
                np.c2 = l2;
                remapped.push_back(np);
            }
    }
    std::sort(remapped.begin(), remapped.end());
    remapped.erase(std::unique(remapped.begin(), remapped.end()), remapped.end());
    pairs = std::move(remapped);
    return out;
}

namespace {

// Every atom of c2's clause must already be entailed at c1: either the
// same atom occurs in c1's clause, or c1 assigns the atom's field that
// very expression, or the atom ties a field to the same field of a
// record selected the way c1 selects.
bool clause_subsumed(const std::vector<CmdPtr>& block, size_t i1, size_t i2) {
    const CmdPtr& c1 = block[i1];
    const CmdPtr& c2 = block[i2];
    const WherePtr* w1 = nullptr;
    const WherePtr* w2 = nullptr;
    const std::vector<std::pair<std::string, ExprPtr>>* sets1 = nullptr;
    std::string schema;
    if (const auto* s = std::get_if<Command::Select>(&c1->node)) {
        w1 = &s->where;
        schema = s->schema;
    } else if (const auto* u = std::get_if<Command::Update>(&c1->node)) {
        w1 = &u->where;
        sets1 = &u->sets;
        schema = u->schema;
    } else {
        return false;
    }
    if (const auto* s = std::get_if<Command::Select>(&c2->node))
        w2 = &s->where;
    else if (const auto* u = std::get_if<Command::Update>(&c2->node))
        w2 = &u->where;
    else
        return false;

    if (where_equivalent(*w1, *w2)) return true;
    auto atoms2 = conjunctive_atoms(*w2);
    if (atoms2.empty()) return false;
    auto atoms1 = conjunctive_atoms(*w1);

    const auto* c1sel = std::get_if<Command::Select>(&c1->node);
    for (const auto& a : atoms2) {
        if (a.op != CmpOp::Eq) return false;
        bool ok = false;
        for (const auto& b : atoms1)
            if (b.op == a.op && b.field == a.field && to_text(b.expr) == to_text(a.expr)) ok = true;
        if (!ok && sets1)
            for (const auto& [f, e] : *sets1)
                if (f == a.field && to_text(e) == to_text(a.expr)) ok = true;
        if (!ok) {
            // this.g = x.g where x is bound exactly the way c1 selects
            if (const auto* at = std::get_if<Expr::At>(&a.expr->node)) {
                const auto* one = std::get_if<Expr::Const>(&at->index->node);
                if (one && one->v == 1 && at->field == a.field) {
                    const Command::Select* binder = binder_before(block, i2, at->var);
                    if (binder && binder->schema == schema) {
                        if (c1sel && binder == c1sel)
                            ok = true;
                        else if (where_equivalent(binder->where, *w1))
                            ok = true;
                    }
                }
            }
        }
        if (!ok) return false;
    }
    return true;
}

std::optional<Program> merge_in_block(const Program& p, const std::string& txn_name, size_t i1,
                                      size_t i2, std::vector<CmdPtr> block) {
    const CmdPtr& c1 = block[i1];
    const CmdPtr& c2 = block[i2];

    // moving c2's effect to c1's position must not cross interfering
    // commands, and nothing in between may rebind the merged variables
    FieldSet pair_reads, pair_writes, r1, w1, r2, w2;
    accessed(p, c1, r1, w1);
    accessed(p, c2, r2, w2);
    pair_reads.insert(r1.begin(), r1.end());
    pair_reads.insert(r2.begin(), r2.end());
    std::set<std::string> merged_vars;
    if (const auto* s = std::get_if<Command::Select>(&c1->node)) merged_vars.insert(s->var);
    if (const auto* s = std::get_if<Command::Select>(&c2->node)) merged_vars.insert(s->var);
    for (size_t m = i1 + 1; m < i2; ++m) {
        FieldSet mr, mw;
        accessed(p, block[m], mr, mw);
        if (intersects(mw, pair_reads)) return std::nullopt;
        if (intersects(w2, mr) || intersects(w2, mw)) return std::nullopt;
        if (intersects(r2, mw)) return std::nullopt;
        if (const auto* ms = std::get_if<Command::Select>(&block[m]->node))
            if (merged_vars.count(ms->var)) return std::nullopt;
    }
    if (!clause_subsumed(block, i1, i2)) return std::nullopt;

    CmdPtr merged;
    std::string subst_from, subst_to;
    if (const auto* s1 = std::get_if<Command::Select>(&c1->node)) {
        const auto& s2 = std::get<Command::Select>(c2->node);
        if (s1->schema != s2.schema) return std::nullopt;
        Command::Select n = *s1;
        for (const auto& f : s2.fields)
            if (std::find(n.fields.begin(), n.fields.end(), f) == n.fields.end())
                n.fields.push_back(f);
        merged = mk_select(std::move(n));
        if (s2.var != s1->var) {
            subst_from = s2.var;
            subst_to = s1->var;
        }
    } else {
        const auto& u1 = std::get<Command::Update>(c1->node);
        const auto& u2 = std::get<Command::Update>(c2->node);
        if (u1.schema != u2.schema) return std::nullopt;
        Command::Update n = u1;
        for (const auto& [f, e] : u2.sets) {
            bool dup = false;
            for (const auto& [g, e1] : n.sets) {
                if (g != f) continue;
                if (to_text(e1) != to_text(e)) return std::nullopt; // conflicting assignment
                dup = true;
            }
            if (!dup) n.sets.emplace_back(f, e);
        }
        merged = mk_update(std::move(n));
    }

    block[i1] = merged;
    block.erase(block.begin() + static_cast<long>(i2));
    Program out = p;
    for (auto& t : out.transactions) {
        if (t.name != txn_name) continue;
        if (!subst_from.empty()) {
            for (size_t k = i2; k < block.size(); ++k)
                block[k] = subst_var(block[k], subst_from, subst_to);
            t.ret = subst_var(t.ret, subst_from, subst_to);
        }
        t.body = rebuild(block);
    }
    return out;
}

} // namespace

std::optional<Program> try_merging(const Program& p, const std::string& txn,
                                   const std::string& label1, const std::string& label2) {
    const Transaction* t = txn_of(p, txn);
    if (!t) return std::nullopt;
    auto block = top_level(t->body);
    size_t i1 = block.size(), i2 = block.size();
    for (size_t i = 0; i < block.size(); ++i) {
        const auto* l = label_of(block[i]);
        if (!l) continue;
        if (label_matches(*l, label1)) i1 = i;
        if (label_matches(*l, label2)) i2 = i;
    }
    if (i1 >= block.size() || i2 >= block.size() || i1 == i2) return std::nullopt;
    if (i1 > i2) std::swap(i1, i2);
    if (block[i1]->node.index() != block[i2]->node.index()) return std::nullopt;
    return merge_in_block(p, txn, i1, i2, std::move(block));
}

std::optional<RefactorState> try_redirect(const RefactorState& st, const std::string& txn,
                                          const std::string& label1, const std::string& label2,
                                          const std::set<std::pair<std::string, std::string>>*
                                              blocked_sources) {
    const Transaction* t = txn_of(st.program, txn);
    if (!t) return std::nullopt;
    auto block = top_level(t->body);
    size_t i1 = block.size(), i2 = block.size();
    for (size_t i = 0; i < block.size(); ++i) {
        const auto* l = label_of(block[i]);
        if (!l) continue;
        if (label_matches(*l, label1)) i1 = i;
        if (label_matches(*l, label2)) i2 = i;
    }
    if (i1 >= block.size() || i2 >= block.size()) return std::nullopt;
    const CmdPtr& c1 = block[i1];
    const CmdPtr& c2 = block[i2];

    std::string target_schema, source_schema;
    const WherePtr* w2 = nullptr;
    std::vector<std::string> moved;
    if (const auto* s = std::get_if<Command::Select>(&c1->node))
        target_schema = s->schema;
    else if (const auto* u = std::get_if<Command::Update>(&c1->node))
        target_schema = u->schema;
    else
        return std::nullopt;
    const Schema* src_sc = nullptr;
    if (const auto* s = std::get_if<Command::Select>(&c2->node)) {
        source_schema = s->schema;
        w2 = &s->where;
        src_sc = st.program.find_schema(source_schema);
        for (const auto& f : s->fields)
            if (src_sc && !src_sc->is_pk(f)) moved.push_back(f);
    } else if (const auto* u = std::get_if<Command::Update>(&c2->node)) {
        source_schema = u->schema;
        w2 = &u->where;
        src_sc = st.program.find_schema(source_schema);
        for (const auto& [f, e] : u->sets) moved.push_back(f);
    } else {
        return std::nullopt;
    }
    if (!src_sc || source_schema == target_schema || moved.empty()) return std::nullopt;

    // record correspondence from matching filter expressions: each key
    // field of the source schema must be constrained by an expression
    // that c1 also pins down
    auto eqs = key_equalities(*w2, *src_sc);
    if (!eqs) return std::nullopt;
    std::map<std::string, std::string> theta;
    for (const auto& [pk, expr] : *eqs) {
        std::string mapped;
        if (const auto* at = std::get_if<Expr::At>(&expr->node)) {
            const auto* one = std::get_if<Expr::Const>(&at->index->node);
            const Command::Select* binder = binder_before(block, i2, at->var);
            if (one && one->v == 1 && binder && binder->schema == target_schema)
                mapped = at->field;
        }
        if (mapped.empty()) {
            if (const auto* u1 = std::get_if<Command::Update>(&c1->node))
                for (const auto& [g, e] : u1->sets)
                    if (to_text(e) == to_text(expr)) mapped = g;
        }
        if (mapped.empty()) {
            const WherePtr* w1 = nullptr;
            if (const auto* s1 = std::get_if<Command::Select>(&c1->node))
                w1 = &s1->where;
            else if (const auto* u1 = std::get_if<Command::Update>(&c1->node))
                w1 = &u1->where;
            if (w1)
                for (const auto& a : conjunctive_atoms(*w1))
                    if (a.op == CmpOp::Eq && to_text(a.expr) == to_text(expr)) mapped = a.field;
        }
        if (mapped.empty()) return std::nullopt;
        theta[pk] = mapped;
    }

    RefactorState cur = st;
    for (const auto& f : moved) {
        if (blocked_sources && blocked_sources->count({source_schema, f})) return std::nullopt;
        // an existing correspondence for this field must already target c1's schema
        const ValueCorrespondence* have = nullptr;
        for (const auto& e : cur.correspondences)
            if (e.src_schema == source_schema && e.src_field == f) have = &e;
        if (have) {
            if (have->dst_schema != target_schema) return std::nullopt;
            continue;
        }
        std::string base = schema_prefix(target_schema) + "_" + f;
        std::string name = base;
        const Schema* tgt = cur.program.find_schema(target_schema);
        for (int i = 2; tgt->has_field(name); ++i) name = base + std::to_string(i);
        cur = intro_field(cur, target_schema, name, false);
        ValueCorrespondence v;
        v.src_schema = source_schema;
        v.dst_schema = target_schema;
        v.src_field = f;
        v.dst_field = name;
        v.theta = theta;
        v.agg = Agg::Any;
        auto next = intro_vc(cur, v, RewriteMode::Redirect);
        if (!next) return std::nullopt;
        cur = std::move(*next);
    }
    return cur;
}

namespace {

// Every increment that will become a blind insert must be the last use
// of its read: a live reading keeps the stale view observable, and the
// in-place write and the delta row then disagree on the final value.
bool increment_reads_become_dead(const Program& p, const std::string& schema,
                                 const std::string& field) {
    for (const auto& t : p.transactions) {
        auto cmds = commands_of(t);
        for (size_t i = 0; i < cmds.size(); ++i) {
            const auto* u = std::get_if<Command::Update>(&cmds[i]->node);
            if (!u || u->schema != schema || u->sets.size() != 1 || u->sets[0].first != field)
                continue;
            auto inc = match_increment(field, u->sets[0].second);
            if (!inc) continue;
            // bindings are not uses, so scanning every command is safe;
            // the update's own filter survives into the insert's keys
            std::set<std::string> uses;
            for (size_t j = 0; j < cmds.size(); ++j) {
                if (j == i) {
                    collect_var_uses(u->where, uses);
                    continue;
                }
                collect_var_uses(cmds[j], uses);
            }
            collect_var_uses(t.ret, uses);
            if (uses.count(inc->var)) return false;
        }
    }
    return true;
}

} // namespace

std::optional<RefactorState> try_logging(const RefactorState& st, const std::string& txn,
                                         const std::string& label1, const std::string& label2) {
    // locate the increment-form update side
    for (const auto& label : {label2, label1}) {
        CmdPtr c = find_labeled(st.program, txn, label);
        if (!c) continue;
        const auto* u = std::get_if<Command::Update>(&c->node);
        if (!u || u->sets.size() != 1) continue;
        auto inc = match_increment(u->sets[0].first, u->sets[0].second);
        if (!inc) continue;
        if (!increment_reads_become_dead(st.program, u->schema, u->sets[0].first)) continue;
        auto ls = make_logging_schema(st, u->schema, u->sets[0].first);
        auto next = intro_vc(ls.state, ls.vc, RewriteMode::Logger);
        if (next) return next;
    }
    return std::nullopt;
}

namespace {

std::optional<Program> remove_dead_selects(const Program& p, std::vector<RefactorStep>& log) {
    Program out = p;
    bool changed = false;
    for (auto& t : out.transactions) {
        bool again = true;
        while (again) {
            again = false;
            auto block = top_level(t.body);
            for (size_t i = 0; i < block.size(); ++i) {
                const auto* s = std::get_if<Command::Select>(&block[i]->node);
                if (!s) continue;
                std::set<std::string> uses;
                for (size_t j = i + 1; j < block.size(); ++j) collect_var_uses(block[j], uses);
                collect_var_uses(t.ret, uses);
                if (uses.count(s->var)) continue;
                RefactorStep step;
                step.kind = RefactorStep::Kind::RemoveDead;
                step.txn = t.name;
                step.label_a = s->label;
                log.push_back(std::move(step));
                block.erase(block.begin() + static_cast<long>(i));
                t.body = rebuild(block);
                changed = true;
                again = true;
                break;
            }
        }
    }
    if (!changed) return std::nullopt;
    return out;
}

std::optional<Program> merge_pass(const Program& p, std::vector<RefactorStep>& log) {
    Program out = p;
    bool changed = false;
    bool again = true;
    while (again) {
        again = false;
        for (const auto& t : out.transactions) {
            auto block = top_level(t.body);
            for (size_t i = 0; i < block.size() && !again; ++i) {
                for (size_t j = i + 1; j < block.size() && !again; ++j) {
                    if (block[i]->node.index() != block[j]->node.index()) continue;
                    const auto* li = label_of(block[i]);
                    const auto* lj = label_of(block[j]);
                    if (!li || !lj) continue;
                    auto merged = merge_in_block(out, t.name, i, j, block);
                    if (merged) {
                        RefactorStep step;
                        step.kind = RefactorStep::Kind::Merge;
                        step.txn = t.name;
                        step.label_a = *li;
                        step.label_b = *lj;
                        log.push_back(std::move(step));
                        out = std::move(*merged);
                        changed = true;
                        again = true;
                    }
                }
            }
            if (again) break;
        }
    }
    if (!changed) return std::nullopt;
    return out;
}

} // namespace

const char* to_string(RepairMethod m) {
    switch (m) {
    case RepairMethod::Merged: return "merged";
    case RepairMethod::RedirectedMerged: return "redirected+merged";
    case RepairMethod::RedirectedOnly: return "redirected";
    case RepairMethod::Logged: return "logged";
    case RepairMethod::AlreadyGone: return "subsumed";
    case RepairMethod::Failed: return "failed";
    }
    return "?";
}

namespace {
TryRepairResult try_repair(const RefactorState& st, const AccessPair& pair,
                           const std::set<std::pair<std::string, std::string>>* blocked);
} // namespace

std::vector<ValueCorrespondence> unstable_relocations(const Program& p,
                                                      const CorrespondenceSet& v) {
    std::vector<ValueCorrespondence> out;
    for (const auto& vc : v) {
        if (vc.is_identity()) continue;
        const Schema* dst = p.find_schema(vc.dst_schema);
        if (!dst) continue;
        bool unstable = false;
        for (const auto& [pk, g] : vc.theta) {
            if (dst->is_pk(g)) continue; // key fields are never assigned
            for (const auto& t : p.transactions) {
                visit_commands(t.body, [&](const CmdPtr& c) {
                    const std::vector<std::pair<std::string, ExprPtr>>* sets = nullptr;
                    if (const auto* u = std::get_if<Command::Update>(&c->node)) {
                        if (u->schema == vc.dst_schema) sets = &u->sets;
                    } else if (const auto* ins = std::get_if<Command::Insert>(&c->node)) {
                        if (ins->schema == vc.dst_schema) sets = &ins->values;
                    }
                    if (!sets) return;
                    bool writes_key = false, writes_value = false;
                    for (const auto& [f, e] : *sets) {
                        if (f == g) writes_key = true;
                        if (f == vc.dst_field) writes_value = true;
                    }
                    if (writes_key && !writes_value) unstable = true;
                });
            }
        }
        if (unstable) out.push_back(vc);
    }
    return out;
}

TryRepairResult try_repair(const RefactorState& st, const AccessPair& pair) {
    return try_repair(st, pair, nullptr);
}

namespace {
TryRepairResult try_repair(const RefactorState& st, const AccessPair& pair,
                           const std::set<std::pair<std::string, std::string>>* blocked) {
    CmdPtr c1 = find_labeled(st.program, pair.txn, pair.c1);
    CmdPtr c2 = find_labeled(st.program, pair.txn, pair.c2);
    if (!c1 || !c2) return {st, RepairMethod::AlreadyGone};

    auto kind_of = [](const CmdPtr& c) {
        if (std::holds_alternative<Command::Select>(c->node)) return 0;
        return 1; // updates and inserts write
    };
    auto schema_of = [](const CmdPtr& c) -> std::string {
        if (const auto* s = std::get_if<Command::Select>(&c->node)) return s->schema;
        if (const auto* u = std::get_if<Command::Update>(&c->node)) return u->schema;
        return std::get<Command::Insert>(c->node).schema;
    };

    if (kind_of(c1) == kind_of(c2)) {
        if (schema_of(c1) == schema_of(c2)) {
            auto merged = try_merging(st.program, pair.txn, pair.c1, pair.c2);
            if (!merged) return {st, RepairMethod::Failed};
            RefactorState out = st;
            out.program = std::move(*merged);
            RefactorStep step;
            step.kind = RefactorStep::Kind::Merge;
            step.txn = pair.txn;
            step.label_a = *label_of(c1);
            step.label_b = *label_of(c2);
            out.log.push_back(std::move(step));
            return {out, RepairMethod::Merged};
        }
        auto redirected = try_redirect(st, pair.txn, pair.c1, pair.c2, blocked);
        if (redirected) {
            auto merged = try_merging(redirected->program, pair.txn, pair.c1, pair.c2);
            if (merged) {
                RefactorState out = std::move(*redirected);
                CmdPtr m1 = find_labeled(out.program, pair.txn, pair.c1);
                CmdPtr m2 = find_labeled(out.program, pair.txn, pair.c2);
                RefactorStep step;
                step.kind = RefactorStep::Kind::Merge;
                step.txn = pair.txn;
                step.label_a = m1 ? *label_of(m1) : pair.c1;
                step.label_b = m2 ? *label_of(m2) : pair.c2;
                out.program = std::move(*merged);
                out.log.push_back(std::move(step));
                return {out, RepairMethod::RedirectedMerged};
            }
            // an unmerged relocation still co-locates the data; the final
            // key-map stability pass may yet veto it
            return {*redirected, RepairMethod::RedirectedOnly};
        }
    }
    auto logged = try_logging(st, pair.txn, pair.c1, pair.c2);
    if (logged) return {*logged, RepairMethod::Logged};
    return {st, RepairMethod::Failed};
}
} // namespace

RepairResult repair(const Program& p, const Bounds& bounds, int jobs) {
    RepairResult res;
    res.report.detection = detect_access_pairs(p, bounds, jobs);
    res.report.pairs_in = res.report.detection.pairs;
    if (res.report.pairs_in.empty()) {
        res.program = p; // nothing to do; leave the program untouched
        return res;
    }

    // the rewrite phase re-runs whenever the finished program assigns a
    // correspondence's key-map field without the moved field alongside;
    // the offending relocation is withdrawn and everything else redone
    std::set<std::pair<std::string, std::string>> blocked;
    RefactorState st;
    while (true) {
        std::vector<AccessPair> pairs = res.report.pairs_in;
        std::vector<RefactorStep> log;
        Program split = preprocess_split(p, pairs, log);

        st = RefactorState{{}, split, std::move(log)};
        res.report.outcomes.clear();
        res.report.repaired = res.report.remaining = 0;
        for (const auto& pair : pairs) {
            auto [next, method] = try_repair(st, pair, &blocked);
            st = std::move(next);
            PairOutcome out;
            out.pair = pair;
            out.method = method;
            if (method == RepairMethod::RedirectedOnly)
                out.note = "relocated but not merged; the accesses stay distinct";
            res.report.outcomes.push_back(out);
            // a relocation without the merge leaves the pair in place
            if (method == RepairMethod::Failed || method == RepairMethod::RedirectedOnly)
                ++res.report.remaining;
            else
                ++res.report.repaired;
        }

        // post-processing: drop dead selects, then merge whatever lines up
        bool again = true;
        while (again) {
            again = false;
            if (auto next = remove_dead_selects(st.program, st.log)) {
                st.program = std::move(*next);
                again = true;
            }
            if (auto next = merge_pass(st.program, st.log)) {
                st.program = std::move(*next);
                again = true;
            }
        }

        auto unstable = unstable_relocations(st.program, st.correspondences);
        if (unstable.empty()) break;
        for (const auto& vc : unstable) blocked.insert({vc.src_schema, vc.src_field});
    }
    if (st.program == p && res.report.repaired == 0) {
        // nothing survived; hand the program back untouched
        res.program = p;
        res.report.steps.clear();
        res.report.recommend_serializable = res.report.remaining > 0;
        return res;
    }

    res.report.recommend_serializable = res.report.remaining > 0;
    res.report.steps = st.log;
    res.program = st.program;
    res.correspondences = st.correspondences;
    return res;
}

RefactorState replay_log(const Program& original, const std::vector<RefactorStep>& log) {
    RefactorState st{{}, original, {}};
    for (const auto& step : log) {
        switch (step.kind) {
        case RefactorStep::Kind::IntroSchema:
            st = intro_schema(st, step.schema, step.key_domain);
            break;
        case RefactorStep::Kind::IntroField:
            st = intro_field(st, step.schema, step.field, step.is_pk);
            break;
        case RefactorStep::Kind::IntroVC: {
            auto next = intro_vc(st, step.vc, step.mode);
            if (!next) throw EvalError("replay: correspondence no longer applies");
            st = std::move(*next);
            break;
        }
        case RefactorStep::Kind::Split: {
            for (auto& t : st.program.transactions) {
                if (t.name != step.txn) continue;
                bool did = false;
                t.body = split_in_body(t.body, step.label_a, did);
                if (!did) throw EvalError("replay: split target missing");
            }
            break;
        }
        case RefactorStep::Kind::Merge: {
            auto merged = try_merging(st.program, step.txn, step.label_a, step.label_b);
            if (!merged) throw EvalError("replay: merge no longer applies");
            st.program = std::move(*merged);
            break;
        }
        case RefactorStep::Kind::RemoveDead: {
            for (auto& t : st.program.transactions) {
                if (t.name != step.txn) continue;
                auto block = top_level(t.body);
                for (size_t i = 0; i < block.size(); ++i) {
                    const auto* l = label_of(block[i]);
                    if (l && *l == step.label_a) {
                        block.erase(block.begin() + static_cast<long>(i));
                        break;
                    }
                }
                t.body = rebuild(block);
            }
            break;
        }
        }
        st.log.push_back(step);
    }
    return st;
}

} // namespace atro

#include "atro/ast.hpp"

#include <algorithm>

namespace atro {

namespace {
template <class... Ts> struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;
} // namespace

const char* to_string(ArithOp op) {
    switch (op) {
    case ArithOp::Add: return "+";
    case ArithOp::Sub: return "-";
    case ArithOp::Mul: return "*";
    case ArithOp::Div: return "/";
    }
    return "?";
}

const char* to_string(CmpOp op) {
    switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Eq: return "=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    }
    return "?";
}

const char* to_string(LogicOp op) {
    return op == LogicOp::And ? "and" : "or";
}

const char* to_string(AggKind k) {
    switch (k) {
    case AggKind::Sum: return "sum";
    case AggKind::Min: return "min";
    case AggKind::Max: return "max";
    }
    return "?";
}

ExprPtr mk_const(Value v, bool boolean) {
    return std::make_shared<Expr>(Expr{Expr::Const{v, boolean}, {}});
}
ExprPtr mk_arg(std::string name) {
    return std::make_shared<Expr>(Expr{Expr::Arg{std::move(name)}, {}});
}
ExprPtr mk_arith(ArithOp op, ExprPtr l, ExprPtr r) {
    return std::make_shared<Expr>(Expr{Expr::Arith{op, std::move(l), std::move(r)}, {}});
}
ExprPtr mk_cmp(CmpOp op, ExprPtr l, ExprPtr r) {
    return std::make_shared<Expr>(Expr{Expr::Cmp{op, std::move(l), std::move(r)}, {}});
}
ExprPtr mk_logic(LogicOp op, ExprPtr l, ExprPtr r) {
    return std::make_shared<Expr>(Expr{Expr::Logic{op, std::move(l), std::move(r)}, {}});
}
ExprPtr mk_iter() {
    return std::make_shared<Expr>(Expr{Expr::Iter{}, {}});
}
ExprPtr mk_agg(AggKind k, std::string var, std::string field) {
    return std::make_shared<Expr>(Expr{Expr::Agg{k, std::move(var), std::move(field)}, {}});
}
ExprPtr mk_at(ExprPtr index, std::string var, std::string field) {
    return std::make_shared<Expr>(Expr{Expr::At{std::move(index), std::move(var), std::move(field)}, {}});
}
ExprPtr mk_at1(std::string var, std::string field) {
    return mk_at(mk_const(1), std::move(var), std::move(field));
}
ExprPtr mk_uuid() {
    return std::make_shared<Expr>(Expr{Expr::Uuid{}, {}});
}

bool equal(const ExprPtr& a, const ExprPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    return std::visit(
        overloaded{
            [&](const Expr::Const& x) {
                const auto& y = std::get<Expr::Const>(b->node);
                return x.v == y.v && x.boolean == y.boolean;
            },
            [&](const Expr::Arg& x) { return x.name == std::get<Expr::Arg>(b->node).name; },
            [&](const Expr::Arith& x) {
                const auto& y = std::get<Expr::Arith>(b->node);
                return x.op == y.op && equal(x.lhs, y.lhs) && equal(x.rhs, y.rhs);
            },
            [&](const Expr::Cmp& x) {
                const auto& y = std::get<Expr::Cmp>(b->node);
                return x.op == y.op && equal(x.lhs, y.lhs) && equal(x.rhs, y.rhs);
            },
            [&](const Expr::Logic& x) {
                const auto& y = std::get<Expr::Logic>(b->node);
                return x.op == y.op && equal(x.lhs, y.lhs) && equal(x.rhs, y.rhs);
            },
            [&](const Expr::Iter&) { return true; },
            [&](const Expr::Agg& x) {
                const auto& y = std::get<Expr::Agg>(b->node);
                return x.kind == y.kind && x.var == y.var && x.field == y.field;
            },
            [&](const Expr::At& x) {
                const auto& y = std::get<Expr::At>(b->node);
                return x.var == y.var && x.field == y.field && equal(x.index, y.index);
            },
            [&](const Expr::Uuid&) { return true; },
        },
        a->node);
}

WherePtr mk_atom(std::string field, CmpOp op, ExprPtr e) {
    return std::make_shared<Where>(Where{Where::Atom{std::move(field), op, std::move(e)}, {}});
}
WherePtr mk_combo(LogicOp op, WherePtr l, WherePtr r) {
    return std::make_shared<Where>(Where{Where::Combo{op, std::move(l), std::move(r)}, {}});
}

bool equal(const WherePtr& a, const WherePtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    return std::visit(
        overloaded{
            [&](const Where::Atom& x) {
                const auto& y = std::get<Where::Atom>(b->node);
                return x.field == y.field && x.op == y.op && equal(x.expr, y.expr);
            },
            [&](const Where::Combo& x) {
                const auto& y = std::get<Where::Combo>(b->node);
                return x.op == y.op && equal(x.lhs, y.lhs) && equal(x.rhs, y.rhs);
            },
        },
        a->node);
}

std::set<std::string> fields_of_where(const WherePtr& w) {
    std::set<std::string> out;
    if (!w) return out;
    std::visit(overloaded{
                   [&](const Where::Atom& a) { out.insert(a.field); },
                   [&](const Where::Combo& c) {
                       auto l = fields_of_where(c.lhs);
                       auto r = fields_of_where(c.rhs);
                       out.insert(l.begin(), l.end());
                       out.insert(r.begin(), r.end());
                   },
               },
               w->node);
    return out;
}

std::vector<Where::Atom> conjunctive_atoms(const WherePtr& w) {
    std::vector<Where::Atom> out;
    if (!w) return out;
    bool ok = true;
    std::function<void(const WherePtr&)> walk = [&](const WherePtr& n) {
        if (!ok || !n) return;
        std::visit(overloaded{
                       [&](const Where::Atom& a) { out.push_back(a); },
                       [&](const Where::Combo& c) {
                           if (c.op != LogicOp::And) {
                               ok = false;
                               return;
                           }
                           walk(c.lhs);
                           walk(c.rhs);
                       },
                   },
                   n->node);
    };
    walk(w);
    if (!ok) out.clear();
    return out;
}

CmdPtr mk_select(Command::Select s) {
    return std::make_shared<Command>(Command{std::move(s), {}});
}
CmdPtr mk_update(Command::Update u) {
    return std::make_shared<Command>(Command{std::move(u), {}});
}
CmdPtr mk_insert(Command::Insert i) {
    return std::make_shared<Command>(Command{std::move(i), {}});
}
CmdPtr mk_if(ExprPtr cond, CmdPtr body) {
    return std::make_shared<Command>(Command{Command::If{std::move(cond), std::move(body)}, {}});
}
CmdPtr mk_iterate(ExprPtr count, CmdPtr body) {
    return std::make_shared<Command>(Command{Command::Iterate{std::move(count), std::move(body)}, {}});
}
CmdPtr mk_seq(CmdPtr a, CmdPtr b) {
    return std::make_shared<Command>(Command{Command::Seq{std::move(a), std::move(b)}, {}});
}
CmdPtr mk_skip() {
    return std::make_shared<Command>(Command{Command::Skip{}, {}});
}

static bool sets_equal(const std::vector<std::pair<std::string, ExprPtr>>& a,
                       const std::vector<std::pair<std::string, ExprPtr>>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].first != b[i].first || !equal(a[i].second, b[i].second)) return false;
    return true;
}

bool equal(const CmdPtr& a, const CmdPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    return std::visit(
        overloaded{
            [&](const Command::Select& x) {
                const auto& y = std::get<Command::Select>(b->node);
                return x.var == y.var && x.fields == y.fields && x.schema == y.schema &&
                       equal(x.where, y.where) && x.label == y.label;
            },
            [&](const Command::Update& x) {
                const auto& y = std::get<Command::Update>(b->node);
                return x.schema == y.schema && sets_equal(x.sets, y.sets) &&
                       equal(x.where, y.where) && x.label == y.label;
            },
            [&](const Command::Insert& x) {
                const auto& y = std::get<Command::Insert>(b->node);
                return x.schema == y.schema && sets_equal(x.values, y.values) && x.label == y.label;
            },
            [&](const Command::If& x) {
                const auto& y = std::get<Command::If>(b->node);
                return equal(x.cond, y.cond) && equal(x.body, y.body);
            },
            [&](const Command::Iterate& x) {
                const auto& y = std::get<Command::Iterate>(b->node);
                return equal(x.count, y.count) && equal(x.body, y.body);
            },
            [&](const Command::Seq& x) {
                const auto& y = std::get<Command::Seq>(b->node);
                return equal(x.first, y.first) && equal(x.second, y.second);
            },
            [&](const Command::Skip&) { return true; },
        },
        a->node);
}

bool Schema::has_field(const std::string& f) const {
    if (f == kAliveField) return true;
    return std::find(fields.begin(), fields.end(), f) != fields.end();
}

bool Schema::is_pk(const std::string& f) const {
    return std::find(primary_key.begin(), primary_key.end(), f) != primary_key.end();
}

bool Schema::operator==(const Schema& o) const {
    return name == o.name && fields == o.fields && primary_key == o.primary_key &&
           key_domain == o.key_domain;
}

bool Transaction::operator==(const Transaction& o) const {
    return name == o.name && params == o.params && equal(body, o.body) && equal(ret, o.ret);
}

const Schema* Program::find_schema(const std::string& name) const {
    for (const auto& s : schemas)
        if (s.name == name) return &s;
    return nullptr;
}

const Transaction* Program::find_transaction(const std::string& name) const {
    for (const auto& t : transactions)
        if (t.name == name) return &t;
    return nullptr;
}

bool Program::operator==(const Program& o) const {
    return schemas == o.schemas && transactions == o.transactions;
}

void visit_commands(const CmdPtr& c, const std::function<void(const CmdPtr&)>& fn) {
    if (!c) return;
    std::visit(overloaded{
                   [&](const Command::Seq& s) {
                       visit_commands(s.first, fn);
                       visit_commands(s.second, fn);
                   },
                   [&](const Command::If& i) {
                       fn(c);
                       visit_commands(i.body, fn);
                   },
                   [&](const Command::Iterate& i) {
                       fn(c);
                       visit_commands(i.body, fn);
                   },
                   [&](const auto&) { fn(c); },
               },
               c->node);
}

std::vector<CmdPtr> commands_of(const Transaction& t) {
    std::vector<CmdPtr> out;
    visit_commands(t.body, [&](const CmdPtr& c) { out.push_back(c); });
    return out;
}

const std::string* label_of(const CmdPtr& c) {
    if (!c) return nullptr;
    if (const auto* s = std::get_if<Command::Select>(&c->node)) return &s->label;
    if (const auto* u = std::get_if<Command::Update>(&c->node)) return &u->label;
    if (const auto* i = std::get_if<Command::Insert>(&c->node)) return &i->label;
    return nullptr;
}

std::string label_ordinal(const std::string& label) {
    auto p = label.find('/');
    return p == std::string::npos ? label : label.substr(p + 1);
}

std::string label_root(const std::string& label) {
    auto e = label.size();
    while (e > 0 && label[e - 1] == '\'') --e;
    return label.substr(0, e);
}

Command::Update desugar_insert(const Command::Insert& ins, const Schema& schema) {
    Command::Update up;
    up.schema = ins.schema;
    up.label = ins.label;
    up.sets.emplace_back(kAliveField, mk_const(1, true));
    WherePtr where;
    for (const auto& pk : schema.primary_key) {
        const ExprPtr* found = nullptr;
        for (const auto& [f, e] : ins.values)
            if (f == pk) found = &e;
        if (!found) throw EvalError("insert into " + ins.schema + " misses key field " + pk);
        auto atom = mk_atom(pk, CmpOp::Eq, *found);
        where = where ? mk_combo(LogicOp::And, where, atom) : atom;
    }
    for (const auto& [f, e] : ins.values)
        if (!schema.is_pk(f)) up.sets.emplace_back(f, e);
    up.where = where;
    return up;
}

ExprPtr subst_iter(const ExprPtr& e, Value v) {
    if (!e) return e;
    return std::visit(
        overloaded{
            [&](const Expr::Iter&) { return mk_const(v); },
            [&](const Expr::Arith& x) { return mk_arith(x.op, subst_iter(x.lhs, v), subst_iter(x.rhs, v)); },
            [&](const Expr::Cmp& x) { return mk_cmp(x.op, subst_iter(x.lhs, v), subst_iter(x.rhs, v)); },
            [&](const Expr::Logic& x) { return mk_logic(x.op, subst_iter(x.lhs, v), subst_iter(x.rhs, v)); },
            [&](const Expr::At& x) { return mk_at(subst_iter(x.index, v), x.var, x.field); },
            [&](const auto&) { return e; },
        },
        e->node);
}

static WherePtr subst_iter(const WherePtr& w, Value v) {
    if (!w) return w;
    return std::visit(overloaded{
                          [&](const Where::Atom& a) { return mk_atom(a.field, a.op, subst_iter(a.expr, v)); },
                          [&](const Where::Combo& c) {
                              return mk_combo(c.op, subst_iter(c.lhs, v), subst_iter(c.rhs, v));
                          },
                      },
                      w->node);
}

CmdPtr subst_iter(const CmdPtr& c, Value v) {
    if (!c) return c;
    return std::visit(
        overloaded{
            [&](const Command::Select& s) {
                auto n = s;
                n.where = subst_iter(s.where, v);
                return mk_select(std::move(n));
            },
            [&](const Command::Update& u) {
                auto n = u;
                n.where = subst_iter(u.where, v);
                for (auto& [f, e] : n.sets) e = subst_iter(e, v);
                return mk_update(std::move(n));
            },
            [&](const Command::Insert& i) {
                auto n = i;
                for (auto& [f, e] : n.values) e = subst_iter(e, v);
                return mk_insert(std::move(n));
            },
            [&](const Command::If& i) { return mk_if(subst_iter(i.cond, v), subst_iter(i.body, v)); },
            // Inner loops rebind iter; only the count sits in the outer scope.
            [&](const Command::Iterate& i) { return mk_iterate(subst_iter(i.count, v), i.body); },
            [&](const Command::Seq& s) { return mk_seq(subst_iter(s.first, v), subst_iter(s.second, v)); },
            [&](const Command::Skip&) { return c; },
        },
        c->node);
}

ExprPtr subst_var(const ExprPtr& e, const std::string& from, const std::string& to) {
    if (!e) return e;
    return std::visit(
        overloaded{
            [&](const Expr::Agg& x) {
                return x.var == from ? mk_agg(x.kind, to, x.field) : e;
            },
            [&](const Expr::At& x) {
                auto idx = subst_var(x.index, from, to);
                return mk_at(idx, x.var == from ? to : x.var, x.field);
            },
            [&](const Expr::Arith& x) { return mk_arith(x.op, subst_var(x.lhs, from, to), subst_var(x.rhs, from, to)); },
            [&](const Expr::Cmp& x) { return mk_cmp(x.op, subst_var(x.lhs, from, to), subst_var(x.rhs, from, to)); },
            [&](const Expr::Logic& x) { return mk_logic(x.op, subst_var(x.lhs, from, to), subst_var(x.rhs, from, to)); },
            [&](const auto&) { return e; },
        },
        e->node);
}

WherePtr subst_var(const WherePtr& w, const std::string& from, const std::string& to) {
    if (!w) return w;
    return std::visit(overloaded{
                          [&](const Where::Atom& a) { return mk_atom(a.field, a.op, subst_var(a.expr, from, to)); },
                          [&](const Where::Combo& c) {
                              return mk_combo(c.op, subst_var(c.lhs, from, to), subst_var(c.rhs, from, to));
                          },
                      },
                      w->node);
}

CmdPtr subst_var(const CmdPtr& c, const std::string& from, const std::string& to) {
    if (!c) return c;
    return std::visit(
        overloaded{
            [&](const Command::Select& s) {
                auto n = s;
                n.where = subst_var(s.where, from, to);
                return mk_select(std::move(n));
            },
            [&](const Command::Update& u) {
                auto n = u;
                n.where = subst_var(u.where, from, to);
                for (auto& [f, e] : n.sets) e = subst_var(e, from, to);
                return mk_update(std::move(n));
            },
            [&](const Command::Insert& i) {
                auto n = i;
                for (auto& [f, e] : n.values) e = subst_var(e, from, to);
                return mk_insert(std::move(n));
            },
            [&](const Command::If& i) { return mk_if(subst_var(i.cond, from, to), subst_var(i.body, from, to)); },
            [&](const Command::Iterate& i) {
                return mk_iterate(subst_var(i.count, from, to), subst_var(i.body, from, to));
            },
            [&](const Command::Seq& s) { return mk_seq(subst_var(s.first, from, to), subst_var(s.second, from, to)); },
            [&](const Command::Skip&) { return c; },
        },
        c->node);
}

void collect_var_uses(const ExprPtr& e, std::set<std::string>& out) {
    if (!e) return;
    std::visit(overloaded{
                   [&](const Expr::Agg& x) { out.insert(x.var); },
                   [&](const Expr::At& x) {
                       out.insert(x.var);
                       collect_var_uses(x.index, out);
                   },
                   [&](const Expr::Arith& x) {
                       collect_var_uses(x.lhs, out);
                       collect_var_uses(x.rhs, out);
                   },
                   [&](const Expr::Cmp& x) {
                       collect_var_uses(x.lhs, out);
                       collect_var_uses(x.rhs, out);
                   },
                   [&](const Expr::Logic& x) {
                       collect_var_uses(x.lhs, out);
                       collect_var_uses(x.rhs, out);
                   },
                   [&](const auto&) {},
               },
               e->node);
}

void collect_var_uses(const WherePtr& w, std::set<std::string>& out) {
    if (!w) return;
    std::visit(overloaded{
                   [&](const Where::Atom& a) { collect_var_uses(a.expr, out); },
                   [&](const Where::Combo& c) {
                       collect_var_uses(c.lhs, out);
                       collect_var_uses(c.rhs, out);
                   },
               },
               w->node);
}

void collect_var_uses(const CmdPtr& c, std::set<std::string>& out) {
    if (!c) return;
    std::visit(overloaded{
                   [&](const Command::Select& s) { collect_var_uses(s.where, out); },
                   [&](const Command::Update& u) {
                       collect_var_uses(u.where, out);
                       for (const auto& [f, e] : u.sets) collect_var_uses(e, out);
                   },
                   [&](const Command::Insert& i) {
                       for (const auto& [f, e] : i.values) collect_var_uses(e, out);
                   },
                   [&](const Command::If& i) {
                       collect_var_uses(i.cond, out);
                       collect_var_uses(i.body, out);
                   },
                   [&](const Command::Iterate& i) {
                       collect_var_uses(i.count, out);
                       collect_var_uses(i.body, out);
                   },
                   [&](const Command::Seq& s) {
                       collect_var_uses(s.first, out);
                       collect_var_uses(s.second, out);
                   },
                   [&](const Command::Skip&) {},
               },
               c->node);
}

std::string Diagnostic::str() const {
    std::string out = file;
    out += ":" + std::to_string(pos.line) + ":" + std::to_string(pos.col) + ": " + message;
    return out;
}

std::string format_diagnostics(const std::vector<Diagnostic>& ds) {
    std::string out;
    for (const auto& d : ds) {
        out += d.str();
        out += '\n';
    }
    return out;
}

} // namespace atro

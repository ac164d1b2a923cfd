#include "atro/printer.hpp"

#include <algorithm>
#include <sstream>
#include <variant>

namespace atro {

namespace {
template <class... Ts> struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

int precedence(const Expr& e) {
    return std::visit(overloaded{
                          [](const Expr::Logic& l) { return l.op == LogicOp::Or ? 1 : 2; },
                          [](const Expr::Cmp&) { return 3; },
                          [](const Expr::Arith& a) {
                              return (a.op == ArithOp::Add || a.op == ArithOp::Sub) ? 4 : 5;
                          },
                          [](const auto&) { return 6; },
                      },
                      e.node);
}

void emit(std::ostream& os, const ExprPtr& e, int parent_prec) {
    if (!e) {
        os << "<null>";
        return;
    }
    int prec = precedence(*e);
    bool paren = prec < parent_prec;
    if (paren) os << "(";
    std::visit(overloaded{
                   [&](const Expr::Const& c) {
                       if (c.boolean)
                           os << (c.v ? "true" : "false");
                       else
                           os << c.v;
                   },
                   [&](const Expr::Arg& a) { os << a.name; },
                   [&](const Expr::Arith& a) {
                       emit(os, a.lhs, prec);
                       os << " " << to_string(a.op) << " ";
                       emit(os, a.rhs, prec + 1);
                   },
                   [&](const Expr::Cmp& c) {
                       emit(os, c.lhs, prec + 1);
                       os << " " << to_string(c.op) << " ";
                       emit(os, c.rhs, prec + 1);
                   },
                   [&](const Expr::Logic& l) {
                       emit(os, l.lhs, prec);
                       os << " " << to_string(l.op) << " ";
                       emit(os, l.rhs, prec + 1);
                   },
                   [&](const Expr::Iter&) { os << "iter"; },
                   [&](const Expr::Agg& a) { os << to_string(a.kind) << "(" << a.var << "." << a.field << ")"; },
                   [&](const Expr::At& a) {
                       const auto* c = std::get_if<Expr::Const>(&a.index->node);
                       if (c && c->v == 1 && !c->boolean)
                           os << a.var << "." << a.field;
                       else {
                           os << "at(";
                           emit(os, a.index, 0);
                           os << ", " << a.var << "." << a.field << ")";
                       }
                   },
                   [&](const Expr::Uuid&) { os << "uuid()"; },
               },
               e->node);
    if (paren) os << ")";
}

void emit(std::ostream& os, const WherePtr& w, bool parent_or) {
    if (!w) {
        os << "true";
        return;
    }
    std::visit(overloaded{
                   [&](const Where::Atom& a) {
                       os << a.field << " " << to_string(a.op) << " ";
                       emit(os, a.expr, 3);
                   },
                   [&](const Where::Combo& c) {
                       bool paren = c.op == LogicOp::Or && !parent_or;
                       if (paren) os << "(";
                       emit(os, c.lhs, c.op == LogicOp::Or);
                       os << " " << to_string(c.op) << " ";
                       emit(os, c.rhs, c.op == LogicOp::Or);
                       if (paren) os << ")";
                   },
               },
               w->node);
}

std::string ind(int n) {
    return std::string(static_cast<size_t>(n) * 2, ' ');
}

void emit_label(std::ostream& os, const std::string& label) {
    if (!label.empty()) os << " //" << label_ordinal(label);
}

void emit(std::ostream& os, const CmdPtr& c, int indent) {
    if (!c) return;
    std::visit(
        overloaded{
            [&](const Command::Select& s) {
                os << ind(indent) << s.var << " := select ";
                for (size_t i = 0; i < s.fields.size(); ++i)
                    os << (i ? ", " : "") << s.fields[i];
                os << " from " << s.schema << " where ";
                emit(os, s.where, true);
                os << ";";
                emit_label(os, s.label);
                os << "\n";
            },
            [&](const Command::Update& u) {
                os << ind(indent) << "update " << u.schema << " set ";
                for (size_t i = 0; i < u.sets.size(); ++i) {
                    os << (i ? ", " : "") << u.sets[i].first << " = ";
                    emit(os, u.sets[i].second, 0);
                }
                os << " where ";
                emit(os, u.where, true);
                os << ";";
                emit_label(os, u.label);
                os << "\n";
            },
            [&](const Command::Insert& i) {
                os << ind(indent) << "insert into " << i.schema << " values (";
                for (size_t k = 0; k < i.values.size(); ++k) {
                    os << (k ? ", " : "") << i.values[k].first << " = ";
                    emit(os, i.values[k].second, 0);
                }
                os << ");";
                emit_label(os, i.label);
                os << "\n";
            },
            [&](const Command::If& f) {
                os << ind(indent) << "if (";
                emit(os, f.cond, 0);
                os << ") {\n";
                emit(os, f.body, indent + 1);
                os << ind(indent) << "}\n";
            },
            [&](const Command::Iterate& it) {
                os << ind(indent) << "iterate (";
                emit(os, it.count, 0);
                os << ") {\n";
                emit(os, it.body, indent + 1);
                os << ind(indent) << "}\n";
            },
            [&](const Command::Seq& s) {
                emit(os, s.first, indent);
                emit(os, s.second, indent);
            },
            [&](const Command::Skip&) { os << ind(indent) << "skip;\n"; },
        },
        c->node);
}

bool is_skip(const CmdPtr& c) {
    return c && std::holds_alternative<Command::Skip>(c->node);
}
} // namespace

std::string to_text(const ExprPtr& e) {
    std::ostringstream os;
    emit(os, e, 0);
    return os.str();
}

std::string to_text(const WherePtr& w) {
    std::ostringstream os;
    emit(os, w, true);
    return os.str();
}

std::string to_text(const CmdPtr& c, int indent) {
    std::ostringstream os;
    emit(os, c, indent);
    return os.str();
}

std::string to_text(const Schema& s) {
    std::ostringstream os;
    os << "schema " << s.name << " domain " << s.key_domain << " {\n";
    for (const auto& f : s.fields)
        os << "  " << (s.is_pk(f) ? "key " : "") << f << ";\n";
    os << "}\n";
    return os.str();
}

std::string to_text(const Transaction& t) {
    std::ostringstream os;
    os << "txn " << t.name << "(";
    for (size_t i = 0; i < t.params.size(); ++i)
        os << (i ? ", " : "") << t.params[i];
    os << ") {\n";
    if (!is_skip(t.body)) emit(os, t.body, 1);
    os << "  return " << to_text(t.ret) << ";\n";
    os << "}\n";
    return os.str();
}

std::string pretty_print(const Program& p) {
    std::string out;
    for (const auto& s : p.schemas) {
        out += to_text(s);
        out += "\n";
    }
    for (const auto& t : p.transactions) {
        out += to_text(t);
        out += "\n";
    }
    return out;
}

WherePtr canonical_where(const WherePtr& w) {
    auto atoms = conjunctive_atoms(w);
    if (atoms.empty()) return nullptr;
    std::stable_sort(atoms.begin(), atoms.end(), [](const Where::Atom& a, const Where::Atom& b) {
        if (a.field != b.field) return a.field < b.field;
        if (a.op != b.op) return a.op < b.op;
        return to_text(a.expr) < to_text(b.expr);
    });
    WherePtr out;
    for (const auto& a : atoms) {
        auto atom = mk_atom(a.field, a.op, a.expr);
        out = out ? mk_combo(LogicOp::And, out, atom) : atom;
    }
    return out;
}

bool where_equivalent(const WherePtr& a, const WherePtr& b) {
    if (equal(a, b)) return true;
    auto ca = canonical_where(a);
    auto cb = canonical_where(b);
    if (!ca || !cb) return false;
    return equal(ca, cb);
}

} // namespace atro

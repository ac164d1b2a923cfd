#include "atro/parser.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <variant>

namespace atro {

namespace {

template <class... Ts> struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

enum class Tok {
    Ident,
    Int,
    Punct, // one of ( ) { } ; , . * = := < <= > >= + - / and or keywords
    Comment,
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    SourcePos pos;
};

struct ParseAbort {};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { next(); }

    const Token& cur() const { return cur_; }

    void next() {
        skip_space();
        cur_.pos = {line_, col_};
        if (i_ >= src_.size()) {
            cur_ = {Tok::End, "", cur_.pos};
            return;
        }
        char c = src_[i_];
        if (c == '/' && i_ + 1 < src_.size() && src_[i_ + 1] == '/') {
            size_t start = i_ + 2;
            while (i_ < src_.size() && src_[i_] != '\n') advance();
            cur_.kind = Tok::Comment;
            cur_.text = src_.substr(start, i_ - start);
            trim(cur_.text);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = i_;
            while (i_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_'))
                advance();
            cur_.kind = Tok::Ident;
            cur_.text = src_.substr(start, i_ - start);
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = i_;
            while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
            cur_.kind = Tok::Int;
            cur_.text = src_.substr(start, i_ - start);
            return;
        }
        // multi-char operators
        static const char* two[] = {":=", "<=", ">="};
        for (const char* op : two) {
            if (src_.compare(i_, 2, op) == 0) {
                cur_ = {Tok::Punct, op, cur_.pos};
                advance();
                advance();
                return;
            }
        }
        cur_ = {Tok::Punct, std::string(1, c), cur_.pos};
        advance();
    }

private:
    void advance() {
        if (src_[i_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++i_;
    }
    void skip_space() {
        while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) advance();
    }
    static void trim(std::string& s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    }

    const std::string& src_;
    size_t i_ = 0;
    int line_ = 1, col_ = 1;
    Token cur_;
};

bool looks_like_label(const std::string& s) {
    size_t i = 0;
    while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
    if (i == s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    while (i < s.size() && s[i] == '.') {
        ++i;
        if (i == s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    }
    while (i < s.size() && s[i] == '\'') ++i;
    return i == s.size();
}

class Parser {
public:
    Parser(const std::string& text, std::string filename)
        : lex_(text), file_(std::move(filename)) {}

    ParseResult run() {
        ParseResult res;
        Program prog;
        try {
            skip_comments();
            while (!at_end()) {
                if (is_kw("schema"))
                    prog.schemas.push_back(parse_schema());
                else if (is_kw("txn"))
                    prog.transactions.push_back(parse_txn());
                else
                    fail("expected 'schema' or 'txn'");
                skip_comments();
            }
        } catch (const ParseAbort&) {
            res.diagnostics = diags_;
            return res;
        }
        assign_labels(prog);
        auto sem = validate_program_impl(prog, file_);
        diags_.insert(diags_.end(), sem.begin(), sem.end());
        res.diagnostics = diags_;
        if (res.diagnostics.empty()) res.program = std::move(prog);
        return res;
    }

    static std::vector<Diagnostic> validate_program_impl(const Program& p, const std::string& file);

private:
    [[noreturn]] void fail(const std::string& msg) {
        diags_.push_back({file_, lex_.cur().pos, msg});
        throw ParseAbort{};
    }
    void error_at(SourcePos pos, const std::string& msg) { diags_.push_back({file_, pos, msg}); }

    bool at_end() { return lex_.cur().kind == Tok::End; }
    void skip_comments() {
        while (lex_.cur().kind == Tok::Comment) lex_.next();
    }
    bool is_kw(const char* kw) {
        return lex_.cur().kind == Tok::Ident && lex_.cur().text == kw;
    }
    bool is_punct(const char* p) {
        return lex_.cur().kind == Tok::Punct && lex_.cur().text == p;
    }
    void expect_kw(const char* kw) {
        if (!is_kw(kw)) fail(std::string("expected '") + kw + "'");
        lex_.next();
        skip_comments();
    }
    void expect_punct(const char* p) {
        if (!is_punct(p)) fail(std::string("expected '") + p + "'");
        lex_.next();
        skip_comments();
    }
    std::string expect_ident(const char* what) {
        if (lex_.cur().kind != Tok::Ident) fail(std::string("expected ") + what);
        std::string s = lex_.cur().text;
        lex_.next();
        skip_comments();
        return s;
    }
    Value expect_int() {
        if (lex_.cur().kind != Tok::Int) fail("expected integer");
        Value v = std::stoll(lex_.cur().text);
        lex_.next();
        skip_comments();
        return v;
    }

    // Consumes a trailing "//<ordinal>" comment on the same line, if any.
    std::string take_label(int line) {
        if (lex_.cur().kind == Tok::Comment && lex_.cur().pos.line == line &&
            looks_like_label(lex_.cur().text)) {
            std::string s = lex_.cur().text;
            lex_.next();
            skip_comments();
            return s;
        }
        skip_comments();
        return "";
    }

    Schema parse_schema() {
        Schema s;
        s.pos = lex_.cur().pos;
        expect_kw("schema");
        s.name = expect_ident("schema name");
        if (is_kw("domain")) {
            lex_.next();
            skip_comments();
            s.key_domain = expect_int();
        }
        expect_punct("{");
        while (!is_punct("}")) {
            bool key = false;
            if (is_kw("key")) {
                key = true;
                lex_.next();
                skip_comments();
            }
            auto pos = lex_.cur().pos;
            std::string f = expect_ident("field name");
            expect_punct(";");
            if (std::find(s.fields.begin(), s.fields.end(), f) != s.fields.end())
                error_at(pos, "duplicate field '" + f + "' in schema " + s.name);
            s.fields.push_back(f);
            if (key) s.primary_key.push_back(f);
        }
        expect_punct("}");
        return s;
    }

    Transaction parse_txn() {
        Transaction t;
        t.pos = lex_.cur().pos;
        expect_kw("txn");
        t.name = expect_ident("transaction name");
        expect_punct("(");
        if (!is_punct(")")) {
            t.params.push_back(expect_ident("parameter"));
            while (is_punct(",")) {
                lex_.next();
                skip_comments();
                t.params.push_back(expect_ident("parameter"));
            }
        }
        expect_punct(")");
        expect_punct("{");
        t.body = parse_block(t.name, /*stop_at_return=*/true);
        expect_kw("return");
        t.ret = parse_expr();
        expect_punct(";");
        expect_punct("}");
        return t;
    }

    CmdPtr parse_block(const std::string& txn, bool stop_at_return) {
        std::vector<CmdPtr> cmds;
        while (!is_punct("}") && !(stop_at_return && is_kw("return"))) {
            cmds.push_back(parse_cmd(txn));
        }
        CmdPtr out = mk_skip();
        for (auto it = cmds.rbegin(); it != cmds.rend(); ++it)
            out = std::holds_alternative<Command::Skip>(out->node) ? *it : mk_seq(*it, out);
        return out;
    }

    CmdPtr parse_cmd(const std::string& txn) {
        auto pos = lex_.cur().pos;
        if (is_kw("update")) {
            lex_.next();
            skip_comments();
            Command::Update u;
            u.schema = expect_ident("schema name");
            expect_kw("set");
            u.sets = parse_setlist();
            expect_kw("where");
            u.where = parse_where();
            int line = lex_.cur().pos.line;
            expect_punct_no_skip(";");
            u.label = take_label(line); // ordinal only; prefixed later
            auto c = mk_update(std::move(u));
            const_cast<Command*>(c.get())->pos = pos;
            return c;
        }
        if (is_kw("insert")) {
            lex_.next();
            skip_comments();
            expect_kw("into");
            Command::Insert ins;
            ins.schema = expect_ident("schema name");
            expect_kw("values");
            expect_punct("(");
            ins.values = parse_setlist();
            expect_punct(")");
            int line = lex_.cur().pos.line;
            expect_punct_no_skip(";");
            ins.label = take_label(line);
            auto c = mk_insert(std::move(ins));
            const_cast<Command*>(c.get())->pos = pos;
            return c;
        }
        if (is_kw("if")) {
            lex_.next();
            skip_comments();
            expect_punct("(");
            auto cond = parse_expr();
            expect_punct(")");
            expect_punct("{");
            auto body = parse_block(txn, false);
            expect_punct("}");
            auto c = mk_if(cond, body);
            const_cast<Command*>(c.get())->pos = pos;
            return c;
        }
        if (is_kw("iterate")) {
            lex_.next();
            skip_comments();
            expect_punct("(");
            auto count = parse_expr();
            expect_punct(")");
            expect_punct("{");
            auto body = parse_block(txn, false);
            expect_punct("}");
            auto c = mk_iterate(count, body);
            const_cast<Command*>(c.get())->pos = pos;
            return c;
        }
        if (is_kw("skip")) {
            lex_.next();
            skip_comments();
            expect_punct(";");
            auto c = mk_skip();
            const_cast<Command*>(c.get())->pos = pos;
            return c;
        }
        // select: <var> := select ...
        Command::Select s;
        s.var = expect_ident("command");
        expect_punct(":=");
        expect_kw("select");
        if (is_punct("*")) {
            lex_.next();
            skip_comments();
            s.fields.clear(); // expanded after schema resolution
            s.fields.push_back("*");
        } else {
            s.fields.push_back(expect_ident("field"));
            while (is_punct(",")) {
                lex_.next();
                skip_comments();
                s.fields.push_back(expect_ident("field"));
            }
        }
        expect_kw("from");
        s.schema = expect_ident("schema name");
        expect_kw("where");
        s.where = parse_where();
        int line = lex_.cur().pos.line;
        expect_punct_no_skip(";");
        s.label = take_label(line);
        auto c = mk_select(std::move(s));
        const_cast<Command*>(c.get())->pos = pos;
        return c;
    }

    // expect ';' but leave any following comment token for take_label.
    void expect_punct_no_skip(const char* p) {
        if (!is_punct(p)) fail(std::string("expected '") + p + "'");
        lex_.next();
    }

    std::vector<std::pair<std::string, ExprPtr>> parse_setlist() {
        std::vector<std::pair<std::string, ExprPtr>> out;
        out.emplace_back(parse_setpair());
        while (is_punct(",")) {
            lex_.next();
            skip_comments();
            out.emplace_back(parse_setpair());
        }
        return out;
    }
    std::pair<std::string, ExprPtr> parse_setpair() {
        std::string f = expect_ident("field");
        expect_punct("=");
        return {f, parse_expr()};
    }

    WherePtr parse_where() { return parse_where_or(); }
    WherePtr parse_where_or() {
        auto l = parse_where_and();
        while (is_kw("or")) {
            lex_.next();
            skip_comments();
            l = mk_combo(LogicOp::Or, l, parse_where_and());
        }
        return l;
    }
    WherePtr parse_where_and() {
        auto l = parse_where_atom();
        while (is_kw("and")) {
            lex_.next();
            skip_comments();
            l = mk_combo(LogicOp::And, l, parse_where_atom());
        }
        return l;
    }
    WherePtr parse_where_atom() {
        if (is_punct("(")) {
            lex_.next();
            skip_comments();
            auto w = parse_where_or();
            expect_punct(")");
            return w;
        }
        auto pos = lex_.cur().pos;
        std::string field = expect_ident("field");
        if (field == "this") {
            expect_punct(".");
            field = expect_ident("field");
        }
        CmpOp op = parse_cmpop();
        auto e = parse_add(); // comparisons and connectives need parentheses here
        auto w = mk_atom(field, op, e);
        const_cast<Where*>(w.get())->pos = pos;
        return w;
    }
    CmpOp parse_cmpop() {
        for (auto [txt, op] : {std::pair{"<=", CmpOp::Le}, {">=", CmpOp::Ge}, {"<", CmpOp::Lt},
                               {">", CmpOp::Gt}, {"=", CmpOp::Eq}}) {
            if (is_punct(txt)) {
                lex_.next();
                skip_comments();
                return op;
            }
        }
        fail("expected comparison operator");
    }

    ExprPtr parse_expr() { return parse_or(); }
    ExprPtr parse_or() {
        auto l = parse_and();
        while (is_kw("or")) {
            lex_.next();
            skip_comments();
            l = mk_logic(LogicOp::Or, l, parse_and());
        }
        return l;
    }
    ExprPtr parse_and() {
        auto l = parse_cmp();
        while (is_kw("and")) {
            lex_.next();
            skip_comments();
            l = mk_logic(LogicOp::And, l, parse_cmp());
        }
        return l;
    }
    ExprPtr parse_cmp() {
        auto l = parse_add();
        for (auto [txt, op] : {std::pair{"<=", CmpOp::Le}, {">=", CmpOp::Ge}, {"<", CmpOp::Lt},
                               {">", CmpOp::Gt}, {"=", CmpOp::Eq}}) {
            if (is_punct(txt)) {
                lex_.next();
                skip_comments();
                return mk_cmp(op, l, parse_add());
            }
        }
        return l;
    }
    ExprPtr parse_add() {
        auto l = parse_mul();
        while (is_punct("+") || is_punct("-")) {
            ArithOp op = is_punct("+") ? ArithOp::Add : ArithOp::Sub;
            lex_.next();
            skip_comments();
            l = mk_arith(op, l, parse_mul());
        }
        return l;
    }
    ExprPtr parse_mul() {
        auto l = parse_unary();
        while (is_punct("*") || is_punct("/")) {
            ArithOp op = is_punct("*") ? ArithOp::Mul : ArithOp::Div;
            lex_.next();
            skip_comments();
            l = mk_arith(op, l, parse_unary());
        }
        return l;
    }
    ExprPtr parse_unary() {
        if (is_punct("-")) {
            lex_.next();
            skip_comments();
            if (lex_.cur().kind == Tok::Int) {
                Value v = expect_int();
                return mk_const(-v);
            }
            return mk_arith(ArithOp::Sub, mk_const(0), parse_unary());
        }
        return parse_primary();
    }
    ExprPtr parse_primary() {
        auto pos = lex_.cur().pos;
        if (lex_.cur().kind == Tok::Int) return mk_const(expect_int());
        if (is_punct("(")) {
            lex_.next();
            skip_comments();
            auto e = parse_expr();
            expect_punct(")");
            return e;
        }
        if (lex_.cur().kind != Tok::Ident) fail("expected expression");
        std::string id = lex_.cur().text;
        if (id == "true" || id == "false") {
            lex_.next();
            skip_comments();
            return mk_const(id == "true" ? 1 : 0, true);
        }
        if (id == "iter") {
            lex_.next();
            skip_comments();
            return mk_iter();
        }
        if (id == "uuid") {
            lex_.next();
            skip_comments();
            expect_punct("(");
            expect_punct(")");
            return mk_uuid();
        }
        if (id == "sum" || id == "min" || id == "max") {
            AggKind k = id == "sum" ? AggKind::Sum : id == "min" ? AggKind::Min : AggKind::Max;
            lex_.next();
            skip_comments();
            expect_punct("(");
            std::string var = expect_ident("variable");
            expect_punct(".");
            std::string field = expect_ident("field");
            expect_punct(")");
            return mk_agg(k, var, field);
        }
        if (id == "at") {
            lex_.next();
            skip_comments();
            expect_punct("(");
            auto idx = parse_expr();
            expect_punct(",");
            std::string var = expect_ident("variable");
            expect_punct(".");
            std::string field = expect_ident("field");
            expect_punct(")");
            return mk_at(idx, var, field);
        }
        lex_.next();
        // no skip: '.' must be adjacent token
        if (is_punct(".")) {
            lex_.next();
            skip_comments();
            std::string field = expect_ident("field");
            auto e = mk_at1(id, field);
            const_cast<Expr*>(e.get())->pos = pos;
            return e;
        }
        skip_comments();
        auto e = mk_arg(id);
        const_cast<Expr*>(e.get())->pos = pos;
        return e;
    }

    // Fills in missing command labels: global S/U/I counters in source
    // order, skipping ordinals already taken in the same transaction.
    void assign_labels(Program& prog);

    Lexer lex_;
    std::string file_;
    std::vector<Diagnostic> diags_;
};

CmdPtr relabel(const CmdPtr& c, const std::string& txn, std::map<std::string, int>& counters,
               std::set<std::string>& taken) {
    if (!c) return c;
    auto fresh = [&](const char* prefix) {
        int& n = counters[prefix];
        std::string ord;
        do {
            ++n;
            ord = std::string(prefix) + std::to_string(n);
        } while (taken.count(ord));
        taken.insert(ord);
        return txn + "/" + ord;
    };
    return std::visit(
        overloaded{
            [&](const Command::Select& s) {
                auto n = s;
                n.label = s.label.empty() ? fresh("S") : txn + "/" + s.label;
                auto out = mk_select(std::move(n));
                const_cast<Command*>(out.get())->pos = c->pos;
                return out;
            },
            [&](const Command::Update& u) {
                auto n = u;
                n.label = u.label.empty() ? fresh("U") : txn + "/" + u.label;
                auto out = mk_update(std::move(n));
                const_cast<Command*>(out.get())->pos = c->pos;
                return out;
            },
            [&](const Command::Insert& i) {
                auto n = i;
                n.label = i.label.empty() ? fresh("I") : txn + "/" + i.label;
                auto out = mk_insert(std::move(n));
                const_cast<Command*>(out.get())->pos = c->pos;
                return out;
            },
            [&](const Command::If& i) {
                return mk_if(i.cond, relabel(i.body, txn, counters, taken));
            },
            [&](const Command::Iterate& i) {
                return mk_iterate(i.count, relabel(i.body, txn, counters, taken));
            },
            [&](const Command::Seq& s) {
                auto a = relabel(s.first, txn, counters, taken);
                auto b = relabel(s.second, txn, counters, taken);
                return mk_seq(a, b);
            },
            [&](const Command::Skip&) { return c; },
        },
        c->node);
}

void Parser::assign_labels(Program& prog) {
    std::map<std::string, int> counters;
    for (auto& t : prog.transactions) {
        // Explicit ordinals are reserved before fresh ones are handed out;
        // duplicates among them surface in validation.
        std::set<std::string> taken;
        visit_commands(t.body, [&](const CmdPtr& c) {
            if (const auto* l = label_of(c); l && !l->empty()) taken.insert(*l);
        });
        t.body = relabel(t.body, t.name, counters, taken);
    }
}

struct Validator {
    const Program& p;
    const std::string& file;
    std::vector<Diagnostic> diags;

    void error(SourcePos pos, const std::string& msg) { diags.push_back({file, pos, msg}); }

    void run() {
        std::set<std::string> snames;
        for (const auto& s : p.schemas) {
            if (!snames.insert(s.name).second) error(s.pos, "duplicate schema '" + s.name + "'");
            std::set<std::string> fs;
            for (const auto& f : s.fields) {
                if (f == kAliveField)
                    error(s.pos, "field '" + std::string(kAliveField) + "' is reserved and implicit");
                if (!fs.insert(f).second) error(s.pos, "duplicate field '" + f + "'");
            }
            if (s.primary_key.empty()) error(s.pos, "schema '" + s.name + "' needs a key field");
            if (s.key_domain <= 0) error(s.pos, "schema '" + s.name + "' key domain must be positive");
        }
        std::set<std::string> tnames;
        for (const auto& t : p.transactions) {
            if (!tnames.insert(t.name).second) error(t.pos, "duplicate transaction '" + t.name + "'");
            check_txn(t);
        }
    }

    void check_txn(const Transaction& t) {
        std::set<std::string> params(t.params.begin(), t.params.end());
        if (params.size() != t.params.size()) error(t.pos, "duplicate parameter in " + t.name);
        std::map<std::string, const Command::Select*> bound;
        std::set<std::string> labels;
        visit_commands(t.body, [&](const CmdPtr& c) { check_cmd(t, c, params, bound, labels); });
        check_expr(t, t.ret, t.pos, params, bound, /*allow_uuid=*/false);
    }

    const Schema* resolve_schema(const std::string& name, SourcePos pos) {
        const Schema* s = p.find_schema(name);
        if (!s) error(pos, "unknown schema '" + name + "'");
        return s;
    }

    void check_field(const Schema* s, const std::string& f, SourcePos pos, bool allow_alive) {
        if (!s) return;
        if (f == kAliveField) {
            if (!allow_alive) error(pos, "field '" + f + "' cannot be written directly");
            return;
        }
        if (!s->has_field(f)) error(pos, "schema " + s->name + " has no field '" + f + "'");
    }

    void check_cmd(const Transaction& t, const CmdPtr& c, const std::set<std::string>& params,
                   std::map<std::string, const Command::Select*>& bound,
                   std::set<std::string>& labels) {
        std::visit(
            overloaded{
                [&](const Command::Select& s) {
                    if (!labels.insert(s.label).second) error(c->pos, "duplicate label " + s.label);
                    const Schema* sc = resolve_schema(s.schema, c->pos);
                    auto* mut = const_cast<Command::Select*>(&s);
                    if (s.fields.size() == 1 && s.fields[0] == "*") {
                        if (sc) mut->fields = sc->fields;
                    }
                    for (const auto& f : mut->fields) check_field(sc, f, c->pos, true);
                    check_where(t, s.where, sc, c->pos, params, bound, false);
                    bound[s.var] = mut;
                },
                [&](const Command::Update& u) {
                    if (!labels.insert(u.label).second) error(c->pos, "duplicate label " + u.label);
                    const Schema* sc = resolve_schema(u.schema, c->pos);
                    std::set<std::string> seen;
                    for (const auto& [f, e] : u.sets) {
                        check_field(sc, f, c->pos, true);
                        if (sc && sc->is_pk(f)) error(c->pos, "update may not set key field '" + f + "'");
                        if (!seen.insert(f).second) error(c->pos, "field '" + f + "' set twice");
                        check_expr(t, e, c->pos, params, bound, false);
                    }
                    check_where(t, u.where, sc, c->pos, params, bound, true);
                },
                [&](const Command::Insert& i) {
                    if (!labels.insert(i.label).second) error(c->pos, "duplicate label " + i.label);
                    const Schema* sc = resolve_schema(i.schema, c->pos);
                    std::set<std::string> seen;
                    for (const auto& [f, e] : i.values) {
                        check_field(sc, f, c->pos, false);
                        if (!seen.insert(f).second) error(c->pos, "field '" + f + "' set twice");
                        check_expr(t, e, c->pos, params, bound, true);
                    }
                    if (sc)
                        for (const auto& pk : sc->primary_key)
                            if (!seen.count(pk))
                                error(c->pos, "insert into " + i.schema + " misses key field '" + pk + "'");
                },
                [&](const Command::If& i) { check_expr(t, i.cond, c->pos, params, bound, false); },
                [&](const Command::Iterate& i) { check_expr(t, i.count, c->pos, params, bound, false); },
                [&](const auto&) {},
            },
            c->node);
    }

    void check_where(const Transaction& t, const WherePtr& w, const Schema* sc, SourcePos pos,
                     const std::set<std::string>& params,
                     const std::map<std::string, const Command::Select*>& bound, bool in_update) {
        if (!w) return;
        std::visit(overloaded{
                       [&](const Where::Atom& a) {
                           if (sc && a.field != kAliveField && !sc->has_field(a.field))
                               error(pos, "schema " + sc->name + " has no field '" + a.field + "'");
                           bool uuid_ok = in_update && sc && sc->is_pk(a.field) && a.op == CmpOp::Eq;
                           check_expr(t, a.expr, pos, params, bound, uuid_ok);
                       },
                       [&](const Where::Combo& cb) {
                           check_where(t, cb.lhs, sc, pos, params, bound, in_update);
                           check_where(t, cb.rhs, sc, pos, params, bound, in_update);
                       },
                   },
                   w->node);
    }

    void check_expr(const Transaction& t, const ExprPtr& e, SourcePos pos,
                    const std::set<std::string>& params,
                    const std::map<std::string, const Command::Select*>& bound, bool allow_uuid) {
        if (!e) return;
        std::visit(
            overloaded{
                [&](const Expr::Arg& a) {
                    if (!params.count(a.name) && !bound.count(a.name))
                        error(pos, "unbound name '" + a.name + "' in " + t.name);
                },
                [&](const Expr::Agg& a) { check_var_field(t, a.var, a.field, pos, bound); },
                [&](const Expr::At& a) {
                    check_var_field(t, a.var, a.field, pos, bound);
                    check_expr(t, a.index, pos, params, bound, false);
                },
                [&](const Expr::Arith& a) {
                    check_expr(t, a.lhs, pos, params, bound, false);
                    check_expr(t, a.rhs, pos, params, bound, false);
                },
                [&](const Expr::Cmp& cmp) {
                    check_expr(t, cmp.lhs, pos, params, bound, false);
                    check_expr(t, cmp.rhs, pos, params, bound, false);
                },
                [&](const Expr::Logic& l) {
                    check_expr(t, l.lhs, pos, params, bound, false);
                    check_expr(t, l.rhs, pos, params, bound, false);
                },
                [&](const Expr::Uuid&) {
                    if (!allow_uuid)
                        error(pos, "uuid() is only valid in insert values or key equalities");
                },
                [&](const auto&) {},
            },
            e->node);
    }

    void check_var_field(const Transaction& t, const std::string& var, const std::string& field,
                         SourcePos pos, const std::map<std::string, const Command::Select*>& bound) {
        auto it = bound.find(var);
        if (it == bound.end()) {
            error(pos, "variable '" + var + "' is not bound by a preceding select in " + t.name);
            return;
        }
        const auto& fs = it->second->fields;
        if (std::find(fs.begin(), fs.end(), field) == fs.end() && field != kAliveField)
            error(pos, "variable '" + var + "' does not carry field '" + field + "'");
    }
};

std::vector<Diagnostic> Parser::validate_program_impl(const Program& p, const std::string& file) {
    Validator v{p, file, {}};
    v.run();
    return v.diags;
}

} // namespace

ParseResult parse_program(const std::string& text, const std::string& filename) {
    Parser parser(text, filename);
    return parser.run();
}

std::vector<Diagnostic> validate_program(const Program& p, const std::string& filename) {
    Validator v{p, filename, {}};
    v.run();
    return v.diags;
}

} // namespace atro

#include "atro/workload.hpp"

#include <cctype>
#include <sstream>

namespace atro {

namespace {

struct Cursor {
    const std::string& s;
    size_t i = 0;
    int line = 1;
    const std::string& file;

    [[noreturn]] void fail(const std::string& msg) const {
        throw EvalError(file + ":" + std::to_string(line) + ": " + msg);
    }
    void skip() {
        while (i < s.size()) {
            if (s[i] == '\n') {
                ++line;
                ++i;
            } else if (std::isspace(static_cast<unsigned char>(s[i]))) {
                ++i;
            } else if (s[i] == '/' && i + 1 < s.size() && s[i + 1] == '/') {
                while (i < s.size() && s[i] != '\n') ++i;
            } else {
                break;
            }
        }
    }
    bool done() {
        skip();
        return i >= s.size();
    }
    bool eat(char c) {
        skip();
        if (i < s.size() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!eat(c)) fail(std::string("expected '") + c + "'");
    }
    std::string ident() {
        skip();
        size_t start = i;
        while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
        if (start == i) fail("expected identifier");
        return s.substr(start, i - start);
    }
    Value number() {
        skip();
        bool neg = false;
        if (i < s.size() && s[i] == '-') {
            neg = true;
            ++i;
        }
        if (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) {
            std::string w = ident();
            if (w == "true") return 1;
            if (w == "false") return 0;
            fail("expected number");
        }
        size_t start = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (start == i) fail("expected number");
        Value v = std::stoll(s.substr(start, i - start));
        return neg ? -v : v;
    }
};

} // namespace

Workload parse_workload(const std::string& text, const std::string& filename) {
    Workload w;
    Cursor c{text, 0, 1, filename};
    while (!c.done()) {
        std::string kw = c.ident();
        if (kw == "init") {
            InitRecord r;
            r.schema = c.ident();
            c.expect('(');
            if (!c.eat(')')) {
                r.key.push_back(c.number());
                while (c.eat(',')) r.key.push_back(c.number());
                c.expect(')');
            }
            if (!c.eat(';')) {
                do {
                    std::string f = c.ident();
                    c.expect('=');
                    r.fields.emplace_back(f, c.number());
                } while (c.eat(','));
                c.expect(';');
            }
            w.init.push_back(std::move(r));
        } else if (kw == "invoke") {
            Invocation inv;
            inv.txn = c.ident();
            c.expect('(');
            if (!c.eat(')')) {
                inv.args.push_back(c.number());
                while (c.eat(',')) inv.args.push_back(c.number());
                c.expect(')');
            }
            c.expect(';');
            w.invocations.push_back(std::move(inv));
        } else {
            c.fail("expected 'init' or 'invoke', got '" + kw + "'");
        }
    }
    return w;
}

std::string print_workload(const Workload& w) {
    std::ostringstream os;
    for (const auto& r : w.init) {
        os << "init " << r.schema << " (";
        for (size_t i = 0; i < r.key.size(); ++i) os << (i ? ", " : "") << r.key[i];
        os << ")";
        for (size_t i = 0; i < r.fields.size(); ++i)
            os << (i ? ", " : " ") << r.fields[i].first << "=" << r.fields[i].second;
        os << ";\n";
    }
    for (const auto& inv : w.invocations) {
        os << "invoke " << inv.txn << "(";
        for (size_t i = 0; i < inv.args.size(); ++i) os << (i ? ", " : "") << inv.args[i];
        os << ");\n";
    }
    return os.str();
}

} // namespace atro

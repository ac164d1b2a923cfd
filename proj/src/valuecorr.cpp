#include "atro/valuecorr.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace atro {

const char* to_string(Agg a) {
    switch (a) {
    case Agg::Any: return "any";
    case Agg::Sum: return "sum";
    case Agg::Id: return "id";
    }
    return "?";
}

std::string ValueCorrespondence::str() const {
    std::ostringstream os;
    os << "vc " << src_schema << "." << src_field << " -> " << dst_schema << "." << dst_field
       << " via {";
    bool first = true;
    for (const auto& [p, q] : theta) {
        if (!first) os << ", ";
        os << p << ": " << q;
        first = false;
    }
    os << "} agg " << to_string(agg);
    return os.str();
}

std::vector<std::string> validate_correspondences(const CorrespondenceSet& v) {
    std::vector<std::string> errs;
    std::set<std::pair<std::string, std::string>> srcs, dsts;
    for (const auto& c : v) {
        if (c.is_identity()) continue;
        if (!srcs.insert({c.src_schema, c.src_field}).second)
            errs.push_back("two correspondences share source " + c.src_schema + "." + c.src_field);
        if (!dsts.insert({c.dst_schema, c.dst_field}).second)
            errs.push_back("two correspondences share target " + c.dst_schema + "." + c.dst_field);
    }
    for (const auto& c : v) {
        if (c.is_identity()) continue;
        if (srcs.count({c.dst_schema, c.dst_field}))
            errs.push_back("chained correspondence through " + c.dst_schema + "." + c.dst_field);
    }
    return errs;
}

namespace {

std::optional<Value> row_field(const TableState& t, const Program& prog, const RecordId& r,
                               const std::string& field) {
    if (const Schema* sc = prog.find_schema(r.schema)) {
        for (size_t i = 0; i < sc->primary_key.size(); ++i)
            if (sc->primary_key[i] == field) return r.key[i];
    }
    auto it = t.rows.find(r);
    if (it == t.rows.end()) return std::nullopt;
    auto f = it->second.find(field);
    if (f == it->second.end()) return std::nullopt;
    return f->second;
}

bool row_alive(const TableState& t, const RecordId& r) {
    auto it = t.rows.find(r);
    if (it == t.rows.end()) return false;
    auto f = it->second.find(kAliveField);
    return f != it->second.end() && f->second != 0;
}

} // namespace

std::set<RecordId> lift_theta(const ValueCorrespondence& v, const TableState& dst,
                              const Program& src_prog, const Program& dst_prog, Value key_cap,
                              const RecordId& r) {
    std::set<RecordId> out;
    const Schema* src_sc = src_prog.find_schema(v.src_schema);
    const Schema* dst_sc = dst_prog.find_schema(v.dst_schema);
    if (!src_sc || !dst_sc) return out;

    for (const auto& cand : record_ids(*dst_sc, key_cap)) {
        bool match = true;
        for (size_t i = 0; i < src_sc->primary_key.size() && match; ++i) {
            auto it = v.theta.find(src_sc->primary_key[i]);
            if (it == v.theta.end()) {
                match = false;
                break;
            }
            auto val = row_field(dst, dst_prog, cand, it->second);
            if (!val || *val != r.key[i]) match = false;
        }
        if (match) out.insert(cand);
    }
    return out;
}

std::set<RecordId> lift_theta(const ValueCorrespondence& v, const DatabaseState& dst_sigma,
                              const Program& src_prog, const Program& dst_prog, Value key_cap,
                              const RecordId& r) {
    return lift_theta(v, table_state(dst_sigma), src_prog, dst_prog, key_cap, r);
}

Value apply_aggregator(Agg a, const std::vector<Value>& vals) {
    switch (a) {
    case Agg::Sum: {
        Value s = 0;
        for (Value v : vals) s += v;
        return s;
    }
    case Agg::Any:
    case Agg::Id: {
        if (vals.empty()) throw EvalError("aggregator over empty set");
        for (Value v : vals)
            if (v != vals.front()) throw EvalError("aggregator over non-uniform values");
        return vals.front();
    }
    }
    throw EvalError("bad aggregator");
}

std::optional<Value> apply_aggregator_opt(Agg a, const std::vector<std::optional<Value>>& vals) {
    if (a == Agg::Sum) {
        Value s = 0;
        for (const auto& v : vals) {
            if (!v) throw EvalError("sum over unwritten field");
            s += *v;
        }
        return s;
    }
    if (vals.empty()) throw EvalError("aggregator over empty set");
    for (const auto& v : vals)
        if (v != vals.front()) throw EvalError("aggregator over non-uniform values");
    return vals.front();
}

ContainmentResult check_containment(const TableState& src, const TableState& dst,
                                    const CorrespondenceSet& v, const Program& src_prog,
                                    const Program& dst_prog, Value key_cap) {
    for (const auto& c : v) {
        const Schema* src_sc = src_prog.find_schema(c.src_schema);
        if (!src_sc) return {false, "unknown source schema " + c.src_schema};
        for (const auto& r : record_ids(*src_sc, key_cap)) {
            auto targets = lift_theta(c, dst, src_prog, dst_prog, key_cap, r);
            std::set<RecordId> alive_targets;
            for (const auto& t : targets)
                if (row_alive(dst, t)) alive_targets.insert(t);
            bool src_alive = row_alive(src, r);
            if (src_alive != !alive_targets.empty())
                return {false, c.str() + ": presence mismatch on " + r.str()};
            if (!src_alive) continue;
            std::vector<std::optional<Value>> vals;
            for (const auto& t : alive_targets)
                vals.push_back(row_field(dst, dst_prog, t, c.dst_field));
            std::optional<Value> folded;
            try {
                folded = apply_aggregator_opt(c.agg, vals);
            } catch (const EvalError& e) {
                return {false, c.str() + ": " + e.what() + " on " + r.str()};
            }
            auto src_val = row_field(src, src_prog, r, c.src_field);
            if (src_val != folded)
                return {false, c.str() + ": value mismatch on " + r.str()};
        }
    }
    return {};
}

ContainmentResult check_containment(const DatabaseState& src, const DatabaseState& dst,
                                    const CorrespondenceSet& v, const Program& src_prog,
                                    const Program& dst_prog, Value key_cap) {
    return check_containment(table_state(src), table_state(dst), v, src_prog, dst_prog, key_cap);
}

CorrespondenceSet identity_correspondences(const Program& p, const std::set<std::string>& exclude) {
    CorrespondenceSet out;
    for (const auto& s : p.schemas) {
        for (const auto& f : s.fields) {
            if (exclude.count(f)) continue;
            ValueCorrespondence c;
            c.src_schema = c.dst_schema = s.name;
            c.src_field = c.dst_field = f;
            for (const auto& pk : s.primary_key) c.theta[pk] = pk;
            c.agg = Agg::Id;
            out.push_back(std::move(c));
        }
    }
    return out;
}

CorrespondenceSet refinement_correspondences(const Program& original, const CorrespondenceSet& v) {
    std::set<std::string> exclude;
    for (const auto& c : v) {
        exclude.insert(c.src_field);
        exclude.insert(c.dst_field);
    }
    CorrespondenceSet out = identity_correspondences(original, exclude);
    out.insert(out.end(), v.begin(), v.end());
    return out;
}

bool check_history_refinement(const History& refactored, const History& original,
                              const CorrespondenceSet& v, const Program& orig_prog,
                              const Program& refac_prog, Value key_cap) {
    auto o1 = outcome_of(original.final.sigma, original.final.instances);
    auto o2 = outcome_of(refactored.final.sigma, refactored.final.instances);
    if (o1.gamma != o2.gamma) return false;
    return check_containment(o1.tables, o2.tables, v, orig_prog, refac_prog, key_cap).ok;
}

std::vector<InitRecord> transform_init(const Program& original, const Program& refactored,
                                       const CorrespondenceSet& v,
                                       const std::vector<InitRecord>& init) {
    std::vector<InitRecord> out = init;
    auto field_of = [](const InitRecord& r, const Program& prog,
                       const std::string& f) -> std::optional<Value> {
        if (const Schema* sc = prog.find_schema(r.schema)) {
            for (size_t i = 0; i < sc->primary_key.size(); ++i)
                if (sc->primary_key[i] == f) return r.key[i];
        }
        for (const auto& [g, val] : r.fields)
            if (g == f) return val;
        return std::nullopt;
    };

    std::map<std::string, Value> seeds; // per sum-target schema
    for (const auto& c : v) {
        if (c.is_identity()) continue;
        const Schema* src_sc = original.find_schema(c.src_schema);
        const Schema* dst_sc = refactored.find_schema(c.dst_schema);
        if (!src_sc || !dst_sc)
            throw EvalError("correspondence references unknown schema: " + c.str());
        for (const auto& r : init) {
            if (r.schema != c.src_schema) continue;
            auto src_val = field_of(r, original, c.src_field);
            if (c.agg == Agg::Sum) {
                if (!src_val)
                    throw EvalError("initial data leaves " + c.src_schema + "." + c.src_field +
                                    " unset; a sum correspondence cannot seed it");
                InitRecord nr;
                nr.schema = c.dst_schema;
                for (const auto& q : dst_sc->primary_key) {
                    bool mapped = false;
                    for (size_t i = 0; i < src_sc->primary_key.size(); ++i) {
                        auto it = c.theta.find(src_sc->primary_key[i]);
                        if (it != c.theta.end() && it->second == q) {
                            nr.key.push_back(r.key[i]);
                            mapped = true;
                            break;
                        }
                    }
                    if (!mapped) nr.key.push_back(seeds[c.dst_schema]);
                }
                ++seeds[c.dst_schema];
                nr.fields.emplace_back(c.dst_field, *src_val);
                out.push_back(std::move(nr));
            } else {
                // join against the target rows present in the initial data
                bool any_target = false;
                for (auto& cand : out) {
                    if (cand.schema != c.dst_schema) continue;
                    bool match = true;
                    for (size_t i = 0; i < src_sc->primary_key.size() && match; ++i) {
                        auto it = c.theta.find(src_sc->primary_key[i]);
                        if (it == c.theta.end()) {
                            match = false;
                            break;
                        }
                        auto val = field_of(cand, refactored, it->second);
                        if (!val || *val != r.key[i]) match = false;
                    }
                    if (!match) continue;
                    any_target = true;
                    if (src_val) cand.fields.emplace_back(c.dst_field, *src_val);
                }
                if (!any_target)
                    throw EvalError("initial data has no target row for " + r.schema + "(" +
                                    std::to_string(r.key.empty() ? 0 : r.key[0]) + ") under " +
                                    c.str());
            }
        }
    }
    return out;
}

namespace {

struct OutcomeSets {
    std::set<Outcome> outcomes;
    bool capped = false;
};

OutcomeSets enumerate_outcomes(const Program& p, const Workload& w, const Bounds& b) {
    OutcomeSets out;
    auto stats = enumerate_histories(p, w, b, [&](const Snapshot& snap) {
        out.outcomes.insert(outcome_of(snap.sigma, snap.instances));
        return true;
    });
    out.capped = stats.schedule_capped || stats.views_capped || stats.steps_capped;
    return out;
}

std::string describe_gamma(const Outcome& o) {
    std::ostringstream os;
    for (const auto& [name, args, ret] : o.gamma) {
        os << name << "(";
        for (size_t i = 0; i < args.size(); ++i) os << (i ? "," : "") << args[i];
        os << ")=" << ret << " ";
    }
    return os.str();
}

} // namespace

const char* RefinementVerdict::str() const {
    switch (status) {
    case Status::Pass: return "pass";
    case Status::BoundedPass: return "bounded-pass";
    case Status::Fail: return "fail";
    }
    return "?";
}

RefinementVerdict check_program_refinement(const Program& refactored, const Program& original,
                                           const CorrespondenceSet& v,
                                           const std::vector<Workload>& workloads, const Bounds& b) {
    RefinementVerdict verdict;
    for (const auto& w : workloads) {
        const auto& init = w.init.empty() ? default_init(original, b) : w.init;
        Workload orig_w{init, w.invocations};
        Workload refac_w;
        try {
            refac_w = Workload{transform_init(original, refactored, v, init), w.invocations};
        } catch (const EvalError& e) {
            verdict.status = RefinementVerdict::Status::Fail;
            verdict.detail = std::string("initial data does not satisfy the correspondences: ") +
                             e.what();
            return verdict;
        }

        auto refac = enumerate_outcomes(refactored, refac_w, b);
        auto orig = enumerate_outcomes(original, orig_w, b);
        verdict.capped = verdict.capped || refac.capped || orig.capped;
        verdict.refactored_outcomes += static_cast<long>(refac.outcomes.size());
        verdict.original_outcomes += static_cast<long>(orig.outcomes.size());

        // (I) no new behaviors
        for (const auto& o2 : refac.outcomes) {
            bool matched = false;
            for (const auto& o1 : orig.outcomes) {
                if (o1.gamma != o2.gamma) continue;
                if (check_containment(o1.tables, o2.tables, v, original, refactored,
                                      b.key_domain_cap)
                        .ok) {
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                verdict.status = RefinementVerdict::Status::Fail;
                verdict.detail = "no original history refined by: " + describe_gamma(o2);
                return verdict;
            }
        }

        // (II) serial behaviors preserved
        std::vector<size_t> order(w.invocations.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end());
        do {
            Workload serial_w = orig_w;
            serial_w.invocations.clear();
            for (size_t i : order) serial_w.invocations.push_back(w.invocations[i]);
            History h;
            try {
                h = run_serial(original, serial_w, b);
            } catch (const EvalError&) {
                continue; // an aborted run yields no serial history to refine
            }
            ++verdict.serial_histories;
            auto o1 = outcome_of(h.final.sigma, h.final.instances);
            bool matched = false;
            for (const auto& o2 : refac.outcomes) {
                if (o1.gamma != o2.gamma) continue;
                if (check_containment(o1.tables, o2.tables, v, original, refactored,
                                      b.key_domain_cap)
                        .ok) {
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                verdict.status = RefinementVerdict::Status::Fail;
                verdict.detail = "serial original history not refined: " + describe_gamma(o1);
                return verdict;
            }
        } while (std::next_permutation(order.begin(), order.end()));
    }
    if (verdict.capped) verdict.status = RefinementVerdict::Status::BoundedPass;
    return verdict;
}

CorrespondenceSet parse_correspondences(const std::string& text, const std::string& filename) {
    CorrespondenceSet out;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) -> void {
        throw EvalError(filename + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, line)) {
        ++lineno;
        size_t i = 0;
        auto skip = [&] {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        };
        auto ident = [&]() {
            skip();
            size_t s = i;
            while (i < line.size() &&
                   (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_'))
                ++i;
            if (s == i) fail("expected identifier");
            return line.substr(s, i - s);
        };
        auto expect = [&](const std::string& tok) {
            skip();
            if (line.compare(i, tok.size(), tok) != 0) fail("expected '" + tok + "'");
            i += tok.size();
        };
        skip();
        if (i >= line.size() || line.compare(i, 2, "//") == 0) continue;
        expect("vc");
        ValueCorrespondence c;
        c.src_schema = ident();
        expect(".");
        c.src_field = ident();
        expect("->");
        c.dst_schema = ident();
        expect(".");
        c.dst_field = ident();
        expect("via");
        expect("{");
        skip();
        if (line[i] != '}') {
            while (true) {
                std::string p = ident();
                expect(":");
                c.theta[p] = ident();
                skip();
                if (i < line.size() && line[i] == ',') {
                    ++i;
                    continue;
                }
                break;
            }
        }
        expect("}");
        expect("agg");
        std::string a = ident();
        if (a == "any")
            c.agg = Agg::Any;
        else if (a == "sum")
            c.agg = Agg::Sum;
        else if (a == "id")
            c.agg = Agg::Id;
        else
            fail("unknown aggregator '" + a + "'");
        out.push_back(std::move(c));
    }
    return out;
}

std::string print_correspondences(const CorrespondenceSet& v) {
    std::string out;
    for (const auto& c : v) {
        out += c.str();
        out += '\n';
    }
    return out;
}

} // namespace atro

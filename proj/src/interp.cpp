#include "atro/interp.hpp"

#include <algorithm>
#include <sstream>
#include <variant>

namespace atro {

namespace {
template <class... Ts> struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;
} // namespace

Bounds parse_bounds(const std::string& text, Bounds base) {
    Bounds b = base;
    size_t i = 0;
    while (i < text.size()) {
        size_t j = text.find(',', i);
        if (j == std::string::npos) j = text.size();
        std::string kv = text.substr(i, j - i);
        i = j + 1;
        if (kv.empty()) continue;
        size_t eq = kv.find('=');
        if (eq == std::string::npos) throw EvalError("bad bounds entry '" + kv + "'");
        std::string k = kv.substr(0, eq);
        long v = std::stol(kv.substr(eq + 1));
        if (k == "max_views")
            b.max_views_per_step = static_cast<int>(v);
        else if (k == "schedule_cap")
            b.schedule_cap = v;
        else if (k == "max_steps")
            b.max_steps = v;
        else if (k == "key_domain")
            b.key_domain_cap = v;
        else if (k == "arg_lo")
            b.arg_lo = v;
        else if (k == "arg_hi")
            b.arg_hi = v;
        else
            throw EvalError("unknown bounds key '" + k + "'");
    }
    return b;
}

std::vector<InitRecord> default_init(const Program& p, const Bounds& b) {
    std::vector<InitRecord> out;
    for (const auto& s : p.schemas) {
        Value base = s.reserved_base();
        Value plain = b.key_domain_cap > 0 ? std::min(base, b.key_domain_cap) : base;
        // only the non-reserved range is pre-populated
        Schema capped = s;
        capped.key_domain = plain;
        for (const auto& rid : record_ids(capped, 0)) {
            InitRecord r;
            r.schema = s.name;
            r.key = rid.key;
            for (const auto& f : s.fields)
                if (!s.is_pk(f)) r.fields.emplace_back(f, 0);
            out.push_back(std::move(r));
        }
    }
    return out;
}

void seed_init(DatabaseState& sigma, const Program& p, const std::vector<InitRecord>& init) {
    for (const auto& r : init) {
        const Schema* s = p.find_schema(r.schema);
        if (!s) throw EvalError("init references unknown schema " + r.schema);
        if (r.key.size() != s->primary_key.size())
            throw EvalError("init key arity mismatch for " + r.schema);
        RecordId rid{r.schema, r.key};
        sigma.append({Event::Kind::Write, 0, rid, kAliveField, 1, -1, ""});
        for (const auto& [f, v] : r.fields) {
            if (f == kAliveField || !s->has_field(f) || s->is_pk(f))
                throw EvalError("init sets bad field " + r.schema + "." + f);
            sigma.append({Event::Kind::Write, 0, rid, f, v, -1, ""});
        }
    }
    if (!init.empty() && sigma.counter() == 0) sigma.set_counter(1);
}

Value eval_expr(const EvalCtx& ctx, const ExprPtr& e) {
    if (!e) throw EvalError("empty expression");
    return std::visit(
        overloaded{
            [&](const Expr::Const& c) { return c.v; },
            [&](const Expr::Arg& a) {
                if (ctx.args) {
                    auto it = ctx.args->find(a.name);
                    if (it != ctx.args->end()) return it->second;
                }
                throw EvalError("unbound name '" + a.name + "'");
            },
            [&](const Expr::Arith& a) {
                Value l = eval_expr(ctx, a.lhs), r = eval_expr(ctx, a.rhs);
                switch (a.op) {
                case ArithOp::Add: return l + r;
                case ArithOp::Sub: return l - r;
                case ArithOp::Mul: return l * r;
                case ArithOp::Div:
                    if (r == 0) throw EvalError("division by zero");
                    return l / r;
                }
                return Value{0};
            },
            [&](const Expr::Cmp& c) {
                Value l = eval_expr(ctx, c.lhs), r = eval_expr(ctx, c.rhs);
                bool v = false;
                switch (c.op) {
                case CmpOp::Lt: v = l < r; break;
                case CmpOp::Le: v = l <= r; break;
                case CmpOp::Eq: v = l == r; break;
                case CmpOp::Gt: v = l > r; break;
                case CmpOp::Ge: v = l >= r; break;
                }
                return Value{v ? 1 : 0};
            },
            [&](const Expr::Logic& l) {
                Value a = eval_expr(ctx, l.lhs), b = eval_expr(ctx, l.rhs);
                bool v = l.op == LogicOp::And ? (a != 0 && b != 0) : (a != 0 || b != 0);
                return Value{v ? 1 : 0};
            },
            [&](const Expr::Iter&) -> Value { throw EvalError("iter used outside iterate"); },
            [&](const Expr::Agg& a) {
                if (!ctx.delta) throw EvalError("no bindings for aggregate");
                auto it = ctx.delta->find(a.var);
                if (it == ctx.delta->end()) throw EvalError("unbound variable '" + a.var + "'");
                std::vector<Value> vals;
                for (const auto& rec : it->second) {
                    auto f = rec.fields.find(a.field);
                    if (f == rec.fields.end())
                        throw EvalError("record lacks field '" + a.field + "'");
                    vals.push_back(f->second);
                }
                switch (a.kind) {
                case AggKind::Sum: {
                    Value s = 0;
                    for (Value v : vals) s += v;
                    return s;
                }
                case AggKind::Min:
                    if (vals.empty()) throw EvalError("min over empty binding");
                    return *std::min_element(vals.begin(), vals.end());
                case AggKind::Max:
                    if (vals.empty()) throw EvalError("max over empty binding");
                    return *std::max_element(vals.begin(), vals.end());
                }
                return Value{0};
            },
            [&](const Expr::At& a) {
                if (!ctx.delta) throw EvalError("no bindings for field access");
                auto it = ctx.delta->find(a.var);
                if (it == ctx.delta->end()) throw EvalError("unbound variable '" + a.var + "'");
                Value idx = eval_expr(ctx, a.index);
                if (idx < 1 || static_cast<size_t>(idx) > it->second.size())
                    throw EvalError("record index " + std::to_string(idx) + " out of range for '" +
                                    a.var + "' (" + std::to_string(it->second.size()) + " records)");
                const auto& rec = it->second[static_cast<size_t>(idx - 1)];
                auto f = rec.fields.find(a.field);
                if (f == rec.fields.end()) throw EvalError("record lacks field '" + a.field + "'");
                return f->second;
            },
            [&](const Expr::Uuid&) {
                if (!ctx.sigma || !ctx.uuid_schema) throw EvalError("uuid() outside insert context");
                Value v = ctx.uuid_schema->reserved_base() + ctx.sigma->fresh();
                if (v >= ctx.uuid_schema->key_domain)
                    throw EvalError("fresh keys of " + ctx.uuid_schema->name + " exhausted");
                ctx.sigma->set_fresh(ctx.sigma->fresh() + 1);
                return v;
            },
        },
        e->node);
}

Value eval_expr(const LocalStore& delta, const std::map<std::string, Value>& args, const ExprPtr& e) {
    EvalCtx ctx;
    ctx.delta = &delta;
    ctx.args = &args;
    return eval_expr(ctx, e);
}

namespace {

struct GroupKey {
    RecordId rec;
    Value tau;
    bool operator==(const GroupKey&) const = default;
};

// Engine: shared stepping machinery with O(1)-ish undo for the
// depth-first enumerator.
struct Engine {
    const Program& p;
    Bounds bounds;
    DatabaseState sigma;
    std::vector<TxnInstance> insts;

    bool track_conflicts = false;
    std::vector<ConflictEdge> edges;
    struct Access {
        EventId ev;
        int inst;
    };
    struct AccessLists {
        std::vector<Access> writes, reads;
    };
    std::map<std::pair<RecordId, std::string>, AccessLists> acc;
    std::vector<std::pair<std::pair<RecordId, std::string>, bool>> acc_journal;

    Engine(const Program& prog, const Bounds& b) : p(prog), bounds(b) {}

    void spawn(const Workload& w) {
        seed_init(sigma, p, w.init);
        int id = 0;
        for (const auto& inv : w.invocations) {
            const Transaction* t = p.find_transaction(inv.txn);
            if (!t) throw EvalError("unknown transaction " + inv.txn);
            if (inv.args.size() != t->params.size())
                throw EvalError("arity mismatch invoking " + inv.txn);
            TxnInstance ti;
            ti.id = id++;
            ti.name = t->name;
            ti.args = inv.args;
            for (size_t i = 0; i < t->params.size(); ++i) ti.arg_map[t->params[i]] = inv.args[i];
            ti.stack.push_back(t->body);
            ti.ret_expr = t->ret;
            insts.push_back(std::move(ti));
        }
    }

    bool all_done() const {
        for (const auto& t : insts)
            if (!t.done()) return false;
        return true;
    }

    // Runs control commands until the next database command or return.
    // Returns the pending database command, or null for a return step.
    CmdPtr local_phase(TxnInstance& t) {
        while (!t.stack.empty()) {
            CmdPtr c = t.stack.back();
            if (std::holds_alternative<Command::Seq>(c->node)) {
                const auto& s = std::get<Command::Seq>(c->node);
                t.stack.pop_back();
                t.stack.push_back(s.second);
                t.stack.push_back(s.first);
            } else if (std::holds_alternative<Command::Skip>(c->node)) {
                t.stack.pop_back();
            } else if (std::holds_alternative<Command::If>(c->node)) {
                const auto& f = std::get<Command::If>(c->node);
                t.stack.pop_back();
                if (eval_expr(t.delta, t.arg_map, f.cond) != 0) t.stack.push_back(f.body);
            } else if (std::holds_alternative<Command::Iterate>(c->node)) {
                const auto& it = std::get<Command::Iterate>(c->node);
                t.stack.pop_back();
                Value n = eval_expr(t.delta, t.arg_map, it.count);
                for (Value i = n; i >= 1; --i) t.stack.push_back(subst_iter(it.body, i));
            } else {
                return c;
            }
        }
        return nullptr;
    }

    struct ViewCtx {
        std::vector<GroupKey> dropped;
        bool in_dropped_group(const Event& e) const {
            for (const auto& g : dropped)
                if (e.tau == g.tau && e.rec == g.rec) return true;
            return false;
        }
        bool included(const Event& e) const { return !in_dropped_group(e); }
    };

    std::vector<GroupKey> relevant_groups(const CmdPtr& cmd) {
        std::string schema;
        std::set<std::string> fields;
        const Schema* sc = nullptr;
        if (const auto* s = std::get_if<Command::Select>(&cmd->node)) {
            schema = s->schema;
            sc = p.find_schema(schema);
            auto wf = fields_of_where(s->where);
            fields.insert(wf.begin(), wf.end());
            fields.insert(s->fields.begin(), s->fields.end());
            fields.insert(kAliveField);
        } else {
            const Command::Update* u = std::get_if<Command::Update>(&cmd->node);
            Command::Update desugared;
            if (!u) {
                const auto& ins = std::get<Command::Insert>(cmd->node);
                const Schema* is = p.find_schema(ins.schema);
                if (!is) throw EvalError("unknown schema " + ins.schema);
                desugared = desugar_insert(ins, *is);
                u = &desugared;
            }
            schema = u->schema;
            sc = p.find_schema(schema);
            auto wf = fields_of_where(u->where);
            fields.insert(wf.begin(), wf.end());
        }
        if (sc)
            for (const auto& pk : sc->primary_key) fields.erase(pk);

        std::vector<GroupKey> out;
        for (const auto& e : sigma.events()) {
            if (e.kind != Event::Kind::Write || e.rec.schema != schema) continue;
            if (!fields.count(e.field)) continue;
            GroupKey g{e.rec, e.tau};
            if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
        }
        std::sort(out.begin(), out.end(), [](const GroupKey& a, const GroupKey& b) {
            if (a.tau != b.tau) return a.tau > b.tau; // newest first
            return a.rec < b.rec;
        });
        return out;
    }

    static ViewCtx make_view_ctx(const std::vector<GroupKey>& groups, std::uint64_t mask) {
        ViewCtx v;
        for (size_t i = 0; i < groups.size(); ++i)
            if (mask >> i & 1) v.dropped.push_back(groups[i]);
        return v;
    }

    // Reconstruction of one schema's records as seen through the view.
    std::map<RecordId, std::map<std::string, std::pair<Value, Value>>> // field -> (tau, value)
    view_rows(const std::string& schema, const ViewCtx& view) const {
        std::map<RecordId, std::map<std::string, std::pair<Value, Value>>> rows;
        for (const auto& e : sigma.events()) {
            if (e.kind != Event::Kind::Write || e.rec.schema != schema) continue;
            if (!view.included(e)) continue;
            auto& slot = rows[e.rec];
            auto it = slot.find(e.field);
            if (it == slot.end() || e.tau > it->second.first)
                slot[e.field] = {e.tau, *e.value};
        }
        return rows;
    }

    void register_read(EventId ev, const Event& e, const TxnInstance& t, const std::string& label,
                       const ViewCtx& view) {
        if (!track_conflicts) return;
        auto key = std::make_pair(e.rec, e.field);
        auto& lists = acc[key];
        for (const auto& w : lists.writes) {
            if (w.inst == t.id || w.inst < 0) continue;
            const Event& we = sigma.event(w.ev);
            if (view.included(we))
                edges.push_back({ConflictEdge::Kind::Dep, w.inst, t.id, we.cmd, label, e.rec,
                                 e.field, ev, w.ev});
            else
                edges.push_back({ConflictEdge::Kind::Anti, t.id, w.inst, label, we.cmd, e.rec,
                                 e.field, ev, w.ev});
        }
        lists.reads.push_back({ev, t.id});
        acc_journal.emplace_back(key, false);
    }

    void register_write(EventId ev, const Event& e, const TxnInstance& t, const std::string& label) {
        if (!track_conflicts) return;
        auto key = std::make_pair(e.rec, e.field);
        auto& lists = acc[key];
        for (const auto& r : lists.reads) {
            if (r.inst == t.id || r.inst < 0) continue;
            // a freshly created write was never in any earlier view
            edges.push_back({ConflictEdge::Kind::Anti, r.inst, t.id, sigma.event(r.ev).cmd, label,
                             e.rec, e.field, r.ev, ev});
        }
        lists.writes.push_back({ev, t.id});
        acc_journal.emplace_back(key, true);
    }

    bool validate_views = false;

    // Executes the database command on top of the stack under the view.
    void db_step(TxnInstance& t, const CmdPtr& cmd, const std::vector<GroupKey>& groups,
                 std::uint64_t mask) {
        ViewCtx view = make_view_ctx(groups, mask);
        if (validate_views) {
            auto all = event_groups(sigma);
            std::uint64_t drop = 0;
            for (size_t g = 0; g < all.size(); ++g)
                if (view.in_dropped_group(sigma.event(all[g].front()))) drop |= std::uint64_t{1} << g;
            if (!is_local_view(make_view(sigma, all, drop), sigma))
                throw std::logic_error("view construction violated the local-view conditions");
        }
        t.stack.pop_back();

        if (const auto* sel = std::get_if<Command::Select>(&cmd->node)) {
            exec_select(t, *sel, view);
        } else if (const auto* up = std::get_if<Command::Update>(&cmd->node)) {
            exec_update(t, *up, view);
        } else {
            const auto& ins = std::get<Command::Insert>(cmd->node);
            const Schema* sc = p.find_schema(ins.schema);
            if (!sc) throw EvalError("unknown schema " + ins.schema);
            exec_update(t, desugar_insert(ins, *sc), view);
        }
    }

    void exec_select(TxnInstance& t, const Command::Select& s, const ViewCtx& view) {
        const Schema* sc = p.find_schema(s.schema);
        if (!sc) throw EvalError("unknown schema " + s.schema);
        auto rows = view_rows(s.schema, view);
        auto rids = record_ids(*sc, bounds.key_domain_cap);
        auto wfields = fields_of_where(s.where);

        EvalCtx ectx;
        ectx.delta = &t.delta;
        ectx.args = &t.arg_map;
        std::map<const Where*, Value> atom_vals;
        pre_eval_where(s.where, ectx, atom_vals);

        Binding result;
        for (const auto& r : rids) {
            auto row = rows.find(r);
            auto field_val = [&](const std::string& f) -> std::optional<Value> {
                for (size_t i = 0; i < sc->primary_key.size(); ++i)
                    if (sc->primary_key[i] == f) return r.key[i];
                if (row == rows.end()) return std::nullopt;
                auto it = row->second.find(f);
                if (it == row->second.end()) return std::nullopt;
                return it->second.second;
            };
            auto alive = field_val(kAliveField);
            if (!alive || *alive == 0) continue;
            if (!eval_where_cached(s.where, field_val, atom_vals)) continue;
            BoundRecord br;
            br.rec = r;
            bool complete = true;
            for (const auto& f : s.fields) {
                auto v = field_val(f);
                if (!v) {
                    complete = false;
                    break;
                }
                br.fields[f] = *v;
            }
            if (complete) result.push_back(std::move(br));
        }

        // scan reads over the key space for the filter fields, then result reads
        std::set<std::pair<RecordId, std::string>> read_set;
        for (const auto& r : rids)
            for (const auto& f : wfields) read_set.emplace(r, f);
        for (const auto& br : result)
            for (const auto& f : s.fields) read_set.emplace(br.rec, f);

        Value tau = sigma.counter();
        std::vector<EventId> included_ids;
        for (EventId i = 0; i < static_cast<EventId>(sigma.size()); ++i)
            if (view.included(sigma.event(i))) included_ids.push_back(i);
        for (const auto& [rec, f] : read_set) {
            Event e{Event::Kind::Read, tau, rec, f, std::nullopt, t.id, s.label};
            EventId id = sigma.append(e);
            for (EventId from : included_ids) sigma.add_vis(from, id);
            register_read(id, e, t, s.label, view);
        }
        sigma.set_counter(tau + 1);
        t.delta[s.var] = std::move(result);
    }

    void exec_update(TxnInstance& t, const Command::Update& u, const ViewCtx& view) {
        const Schema* sc = p.find_schema(u.schema);
        if (!sc) throw EvalError("unknown schema " + u.schema);
        auto rows = view_rows(u.schema, view);
        auto rids = record_ids(*sc, bounds.key_domain_cap);

        EvalCtx ectx;
        ectx.delta = &t.delta;
        ectx.args = &t.arg_map;
        ectx.sigma = &sigma;
        ectx.uuid_schema = sc;

        // filter expressions evaluate once per step (fresh keys included)
        std::map<const Where*, Value> atom_vals;
        pre_eval_where(u.where, ectx, atom_vals);

        std::vector<RecordId> hit;
        for (const auto& r : rids) {
            auto row = rows.find(r);
            auto field_val = [&](const std::string& f) -> std::optional<Value> {
                for (size_t i = 0; i < sc->primary_key.size(); ++i)
                    if (sc->primary_key[i] == f) return r.key[i];
                if (row == rows.end()) return std::nullopt;
                auto it = row->second.find(f);
                if (it == row->second.end()) return std::nullopt;
                return it->second.second;
            };
            if (eval_where_cached(u.where, field_val, atom_vals)) hit.push_back(r);
        }

        Value tau = sigma.counter();
        if (!hit.empty()) {
            std::vector<std::pair<std::string, Value>> writes;
            for (const auto& [f, e] : u.sets) writes.emplace_back(f, eval_expr(ectx, e));
            std::vector<EventId> included_ids;
            for (EventId i = 0; i < static_cast<EventId>(sigma.size()); ++i)
                if (view.included(sigma.event(i))) included_ids.push_back(i);
            for (const auto& r : hit) {
                for (const auto& [f, v] : writes) {
                    Event e{Event::Kind::Write, tau, r, f, v, t.id, u.label};
                    EventId id = sigma.append(e);
                    for (EventId from : included_ids) sigma.add_vis(from, id);
                    register_write(id, e, t, u.label);
                }
            }
        }
        sigma.set_counter(tau + 1);
    }

    static void pre_eval_where(const WherePtr& w, const EvalCtx& ctx,
                               std::map<const Where*, Value>& out) {
        if (!w) return;
        std::visit(overloaded{
                       [&](const Where::Atom& a) { out[w.get()] = eval_expr(ctx, a.expr); },
                       [&](const Where::Combo& c) {
                           pre_eval_where(c.lhs, ctx, out);
                           pre_eval_where(c.rhs, ctx, out);
                       },
                   },
                   w->node);
    }

    template <class FieldFn>
    static bool eval_where_cached(const WherePtr& w, const FieldFn& field_val,
                                  const std::map<const Where*, Value>& atom_vals) {
        if (!w) return true;
        return std::visit(
            overloaded{
                [&](const Where::Atom& a) {
                    auto lhs = field_val(a.field);
                    if (!lhs) return false; // unwritten field satisfies nothing
                    Value rhs = atom_vals.at(w.get());
                    switch (a.op) {
                    case CmpOp::Lt: return *lhs < rhs;
                    case CmpOp::Le: return *lhs <= rhs;
                    case CmpOp::Eq: return *lhs == rhs;
                    case CmpOp::Gt: return *lhs > rhs;
                    case CmpOp::Ge: return *lhs >= rhs;
                    }
                    return false;
                },
                [&](const Where::Combo& c) {
                    bool l = eval_where_cached(c.lhs, field_val, atom_vals);
                    bool r = eval_where_cached(c.rhs, field_val, atom_vals);
                    return c.op == LogicOp::And ? (l && r) : (l || r);
                },
            },
            w->node);
    }

    // Frame bookkeeping for backtracking.
    struct Frame {
        size_t events, edges, journal;
        Value cnt, fresh;
        int inst;
        std::vector<CmdPtr> stack;
        LocalStore delta;
        std::optional<Value> ret;
    };

    Frame save(int inst) {
        Frame f;
        f.events = sigma.size();
        f.edges = edges.size();
        f.journal = acc_journal.size();
        f.cnt = sigma.counter();
        f.fresh = sigma.fresh();
        f.inst = inst;
        f.stack = insts[static_cast<size_t>(inst)].stack;
        f.delta = insts[static_cast<size_t>(inst)].delta;
        f.ret = insts[static_cast<size_t>(inst)].ret_value;
        return f;
    }

    void restore(const Frame& f) {
        sigma.truncate(f.events);
        sigma.set_counter(f.cnt);
        sigma.set_fresh(f.fresh);
        edges.resize(f.edges);
        while (acc_journal.size() > f.journal) {
            auto& [key, is_write] = acc_journal.back();
            auto& lists = acc[key];
            if (is_write)
                lists.writes.pop_back();
            else
                lists.reads.pop_back();
            acc_journal.pop_back();
        }
        auto& t = insts[static_cast<size_t>(f.inst)];
        t.stack = f.stack;
        t.delta = f.delta;
        t.ret_value = f.ret;
    }
};

struct Enumerator {
    Engine eng;
    const std::function<bool(const Snapshot&)>& cb;
    EnumStats stats;
    std::vector<StepChoice> schedule;
    bool stopped = false;

    Enumerator(const Program& p, const Bounds& b, const std::function<bool(const Snapshot&)>& fn)
        : eng(p, b), cb(fn) {}

    void complete() {
        ++stats.histories;
        Snapshot snap{eng.sigma, eng.insts, schedule, eng.edges};
        if (!cb(snap)) stopped = true;
        if (stats.histories >= eng.bounds.schedule_cap) {
            stats.schedule_capped = true;
            stopped = true;
        }
    }

    void dfs() {
        if (stopped) return;
        if (eng.all_done()) {
            complete();
            return;
        }
        if (static_cast<long>(schedule.size()) >= eng.bounds.max_steps) {
            stats.steps_capped = true;
            return;
        }
        for (int i = 0; i < static_cast<int>(eng.insts.size()) && !stopped; ++i) {
            auto& t = eng.insts[static_cast<size_t>(i)];
            if (t.done()) continue;
            Engine::Frame frame = eng.save(i);
            CmdPtr db;
            bool local_ok = true;
            try {
                db = eng.local_phase(t);
            } catch (const EvalError&) {
                ++stats.pruned_errors;
                local_ok = false;
            }
            if (!local_ok) {
                eng.restore(frame);
                continue;
            }
            if (!db) {
                // return step
                try {
                    t.ret_value = eval_expr(t.delta, t.arg_map, t.ret_expr);
                } catch (const EvalError&) {
                    ++stats.pruned_errors;
                    eng.restore(frame);
                    continue;
                }
                schedule.push_back({i, 0});
                dfs();
                schedule.pop_back();
                eng.restore(frame);
                continue;
            }
            auto groups = eng.relevant_groups(db);
            std::uint64_t total = groups.size() >= 63 ? ~std::uint64_t{0}
                                                      : (std::uint64_t{1} << groups.size());
            std::uint64_t n_views = std::min<std::uint64_t>(
                total, static_cast<std::uint64_t>(eng.bounds.max_views_per_step));
            if (n_views < total) stats.views_capped = true;
            // the local phase already ran; continue each view from here
            Engine::Frame after_local = eng.save(i);
            for (std::uint64_t k = 0; k < n_views && !stopped; ++k) {
                try {
                    eng.db_step(t, db, groups, k);
                } catch (const EvalError&) {
                    ++stats.pruned_errors;
                    eng.restore(after_local);
                    continue;
                }
                schedule.push_back({i, static_cast<int>(k)});
                dfs();
                schedule.pop_back();
                eng.restore(after_local);
            }
            eng.restore(frame);
        }
    }
};

} // namespace

EnumStats enumerate_histories(const Program& p, const Workload& w, const Bounds& b,
                              const std::function<bool(const Snapshot&)>& cb, bool validate_views) {
    Enumerator en(p, b, cb);
    en.eng.track_conflicts = true;
    en.eng.validate_views = validate_views;
    en.eng.spawn(w);
    en.dfs();
    return en.stats;
}

namespace {

History run_with_choices(const Program& p, const Workload& w, const Bounds& b,
                         const std::vector<StepChoice>* forced, bool validate_views) {
    Engine eng(p, b);
    eng.validate_views = validate_views;
    eng.spawn(w);
    History h;
    h.initial = {eng.sigma, eng.insts};

    size_t pos = 0;
    while (!eng.all_done()) {
        int inst = -1;
        int view = 0;
        if (forced) {
            if (pos >= forced->size()) throw EvalError("schedule ended before completion");
            inst = (*forced)[pos].instance;
            view = (*forced)[pos].view_index;
            ++pos;
        } else {
            for (int i = 0; i < static_cast<int>(eng.insts.size()); ++i)
                if (!eng.insts[static_cast<size_t>(i)].done()) {
                    inst = i;
                    break;
                }
        }
        if (inst < 0 || inst >= static_cast<int>(eng.insts.size()))
            throw EvalError("bad schedule instance");
        auto& t = eng.insts[static_cast<size_t>(inst)];
        if (t.done()) throw EvalError("schedule steps a finished instance");
        CmdPtr db = eng.local_phase(t);
        Step st;
        st.instance = inst;
        st.view_index = view;
        if (!db) {
            t.ret_value = eval_expr(t.delta, t.arg_map, t.ret_expr);
            st.kind = Step::Kind::Ret;
            st.label = "";
        } else {
            auto groups = eng.relevant_groups(db);
            st.kind = std::holds_alternative<Command::Select>(db->node) ? Step::Kind::Select
                                                                        : Step::Kind::Update;
            st.label = label_of(db) ? *label_of(db) : "";
            eng.db_step(t, db, groups, static_cast<std::uint64_t>(view));
        }
        st.after = {eng.sigma, eng.insts};
        h.steps.push_back(std::move(st));
    }
    h.final = {eng.sigma, eng.insts};
    return h;
}

} // namespace

History run_serial(const Program& p, const Workload& w, const Bounds& b) {
    return run_with_choices(p, w, b, nullptr, false);
}

History replay(const Program& p, const Workload& w, const Bounds& b,
               const std::vector<StepChoice>& schedule, bool validate_views) {
    return run_with_choices(p, w, b, &schedule, validate_views);
}

std::vector<StepChoice> History::choices() const {
    std::vector<StepChoice> out;
    for (const auto& s : steps) out.push_back({s.instance, s.view_index});
    return out;
}

TableState table_state(const DatabaseState& sigma) {
    TableState ts;
    std::map<std::pair<RecordId, std::string>, Value> best_tau;
    for (const auto& e : sigma.events()) {
        if (e.kind != Event::Kind::Write) continue;
        auto key = std::make_pair(e.rec, e.field);
        auto it = best_tau.find(key);
        if (it == best_tau.end() || e.tau > it->second) {
            best_tau[key] = e.tau;
            ts.rows[e.rec][e.field] = *e.value;
        }
    }
    return ts;
}

Outcome outcome_of(const DatabaseState& sigma, const std::vector<TxnInstance>& instances) {
    Outcome o;
    for (const auto& t : instances)
        o.gamma.emplace_back(t.name, t.args, t.ret_value.value_or(0));
    std::sort(o.gamma.begin(), o.gamma.end());
    o.tables = table_state(sigma);
    return o;
}

} // namespace atro

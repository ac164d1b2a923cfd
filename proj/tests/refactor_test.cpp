#include <doctest.h>

#include "atro/printer.hpp"
#include "atro/refactor.hpp"
#include "atro/workload.hpp"
#include "common.hpp"
#include "generators.hpp"

using namespace atro;

namespace {

RefactorState state_of(Program p) {
    return {{}, std::move(p), {}};
}

const Command::Select* select_labeled(const Program& p, const std::string& txn,
                                      const std::string& root) {
    for (const auto& c : commands_of(*p.find_transaction(txn)))
        if (const auto* s = std::get_if<Command::Select>(&c->node))
            if (label_root(s->label) == label_root(root)) return s;
    return nullptr;
}

const Command::Update* update_labeled(const Program& p, const std::string& txn,
                                      const std::string& root) {
    for (const auto& c : commands_of(*p.find_transaction(txn)))
        if (const auto* u = std::get_if<Command::Update>(&c->node))
            if (label_root(u->label) == label_root(root)) return u;
    return nullptr;
}

} // namespace

TEST_CASE("schema-growing steps leave transactions untouched") {
    auto p = load_program_file("courseware.dbp");
    auto st = state_of(p);
    auto grown = intro_schema(st, "COURSE_CO_ST_CNT_LOG", 8);
    CHECK(grown.program.schemas.size() == 4);
    CHECK(grown.program.transactions == p.transactions);
    CHECK(pretty_print(grown.program).find("txn getSt") != std::string::npos);
    CHECK_THROWS_AS(intro_schema(grown, "COURSE_CO_ST_CNT_LOG", 8), EvalError);

    auto with_field = intro_field(grown, "STUDENT", "st_em_addr", false);
    CHECK(with_field.program.find_schema("STUDENT")->has_field("st_em_addr"));
    CHECK(with_field.program.transactions == p.transactions);
    CHECK_THROWS_AS(intro_field(with_field, "STUDENT", "st_em_addr", false), EvalError);
    CHECK_THROWS_AS(intro_field(with_field, "NOPE", "f", false), EvalError);

    auto with_pk = intro_field(grown, "COURSE_CO_ST_CNT_LOG", "log_id", true);
    CHECK(with_pk.program.find_schema("COURSE_CO_ST_CNT_LOG")->is_pk("log_id"));
}

TEST_CASE("clause redirection") {
    auto p = load_program_file("courseware.dbp");
    const Schema* email = p.find_schema("EMAIL");
    ValueCorrespondence v{"EMAIL", "STUDENT", "em_addr", "st_em_addr", {{"em_id", "st_em_id"}},
                          Agg::Any};

    auto w = mk_atom("em_id", CmpOp::Eq, mk_at1("x", "st_em_id"));
    auto r = redirect_where(w, v, *email);
    REQUIRE(r.has_value());
    CHECK(to_text(*r) == "st_em_id = x.st_em_id");

    // constraints that do not pin the key do not redirect
    CHECK(!redirect_where(mk_atom("em_addr", CmpOp::Eq, mk_const(1, true)), v, *email));
    CHECK(!redirect_where(mk_atom("em_id", CmpOp::Lt, mk_const(1)), v, *email));
    CHECK(!redirect_where(mk_combo(LogicOp::Or, w, w), v, *email));

    // identity maps reproduce the clause
    ValueCorrespondence idm{"EMAIL", "EMAIL_COPY", "em_addr", "em_addr2", {{"em_id", "em_id"}},
                            Agg::Any};
    auto r2 = redirect_where(w, idm, *email);
    REQUIRE(r2.has_value());
    CHECK(to_text(*r2) == to_text(w));
}

TEST_CASE("command rewriting under a relocation") {
    auto p = load_program_file("courseware.dbp");
    ValueCorrespondence v{"EMAIL", "STUDENT", "em_addr", "st_em_addr", {{"em_id", "st_em_id"}},
                          Agg::Any};
    auto st = intro_field(state_of(p), "STUDENT", "st_em_addr", false);
    auto next = intro_vc(st, v, RewriteMode::Redirect);
    REQUIRE(next.has_value());

    const auto* s2 = select_labeled(next->program, "getSt", "getSt/S2");
    REQUIRE(s2);
    CHECK(s2->schema == "STUDENT");
    CHECK(s2->fields == std::vector<std::string>{"st_em_addr"});
    CHECK(to_text(s2->where) == "st_em_id = x.st_em_id");
    CHECK(s2->label == "getSt/S2'");

    const auto* u2 = update_labeled(next->program, "setSt", "setSt/U2");
    REQUIRE(u2);
    CHECK(u2->schema == "STUDENT");
    CHECK(u2->sets.size() == 1);
    CHECK(u2->sets[0].first == "st_em_addr");
    CHECK(u2->label == "setSt/U2'");

    // the untouched commands keep their labels
    CHECK(select_labeled(next->program, "getSt", "getSt/S1")->label == "getSt/S1");
    CHECK(to_text(next->program.find_transaction("getSt")->ret) == "y.st_em_addr");

    // a second introduction of the same correspondence is rejected
    CHECK(!intro_vc(*next, v, RewriteMode::Redirect).has_value());
}

TEST_CASE("an unused source field rewrites to the identity") {
    auto p = load_program_file("courseware.dbp");
    auto st = intro_field(state_of(p), "EMAIL", "em_flags", false);
    auto st2 = intro_field(st, "STUDENT", "st_em_flags", false);
    ValueCorrespondence v{"EMAIL", "em_flags", "", "", {}, Agg::Any};
    v = {"EMAIL", "STUDENT", "em_flags", "st_em_flags", {{"em_id", "st_em_id"}}, Agg::Any};
    auto next = intro_vc(st2, v, RewriteMode::Redirect);
    REQUIRE(next.has_value());
    CHECK(next->program.transactions == st2.program.transactions);
    CHECK(next->correspondences.size() == 1);
}

TEST_CASE("a filter that misses the key blocks the rewrite") {
    auto p = parse_ok(R"(
schema E domain 4 { key em_id; em_addr; }
schema S domain 4 { key st_id; st_em_id; }
txn bad() {
  y := select em_addr from E where em_addr = 3;
  return sum(y.em_addr);
}
)");
    auto st = intro_field(state_of(p), "S", "st_em_addr", false);
    ValueCorrespondence v{"E", "S", "em_addr", "st_em_addr", {{"em_id", "st_em_id"}}, Agg::Any};
    CHECK(!intro_vc(st, v, RewriteMode::Redirect).has_value());
}

TEST_CASE("logger rewriting turns increments into fresh-key inserts") {
    auto p = load_program_file("courseware.dbp");
    // split the two-field course update first
    std::vector<AccessPair> pairs{
        {"regSt", "regSt/S5", "regSt/U4", {"co_st_cnt"}, {"co_st_cnt"}},
        {"regSt", "regSt/U3", "regSt/U4", {"st_co_id", "st_reg"}, {"co_avail"}}};
    std::vector<RefactorStep> log;
    Program split = preprocess_split(p, pairs, log);
    REQUIRE(update_labeled(split, "regSt", "regSt/U4.1"));

    auto ls = make_logging_schema(state_of(split), "COURSE", "co_st_cnt");
    CHECK(ls.schema == "COURSE_CO_ST_CNT_LOG");
    const Schema* lsc = ls.state.program.find_schema(ls.schema);
    REQUIRE(lsc);
    CHECK(lsc->primary_key == std::vector<std::string>{"co_id", "log_id"});
    CHECK(lsc->fields == std::vector<std::string>{"co_id", "log_id", "co_st_cnt_log"});
    CHECK(ls.vc.agg == Agg::Sum);

    auto next = intro_vc(ls.state, ls.vc, RewriteMode::Logger);
    REQUIRE(next.has_value());
    bool found_insert = false;
    for (const auto& c : commands_of(*next->program.find_transaction("regSt")))
        if (const auto* ins = std::get_if<Command::Insert>(&c->node)) {
            found_insert = true;
            CHECK(ins->schema == "COURSE_CO_ST_CNT_LOG");
            CHECK(ins->label == "regSt/U4.1'");
            REQUIRE(ins->values.size() == 3);
            CHECK(ins->values[0].first == "co_id");
            CHECK(to_text(ins->values[0].second) == "course");
            CHECK(ins->values[1].first == "log_id");
            CHECK(std::holds_alternative<Expr::Uuid>(ins->values[1].second->node));
            CHECK(ins->values[2].first == "co_st_cnt_log");
            CHECK(to_text(ins->values[2].second) == "1");
        }
    CHECK(found_insert);
    // the redirected read now scans the della log
    const auto* s5 = select_labeled(next->program, "regSt", "regSt/S5");
    REQUIRE(s5);
    CHECK(s5->schema == "COURSE_CO_ST_CNT_LOG");
}

TEST_CASE("multi-key sources get one log key per source key") {
    auto p = parse_ok(R"(
schema GRID domain 4 { key gx; key gy; hits; }
txn touch(x, y) {
  c := select hits from GRID where gx = x and gy = y; //S1
  update GRID set hits = c.hits + 1 where gx = x and gy = y; //U1
  return 0;
}
)");
    auto ls = make_logging_schema({{}, p, {}}, "GRID", "hits");
    const Schema* sc = ls.state.program.find_schema(ls.schema);
    REQUIRE(sc);
    CHECK(sc->primary_key == std::vector<std::string>{"gx", "gy", "log_id"});
    CHECK(ls.vc.theta.size() == 2);

    auto next = try_logging({{}, p, {}}, "touch", "touch/S1", "touch/U1");
    REQUIRE(next.has_value());
    bool found = false;
    for (const auto& c : commands_of(*next->program.find_transaction("touch")))
        if (const auto* ins = std::get_if<Command::Insert>(&c->node)) {
            found = true;
            REQUIRE(ins->values.size() == 4);
            CHECK(ins->values[0].first == "gx");
            CHECK(ins->values[1].first == "gy");
            CHECK(ins->values[2].first == "log_id");
        }
    CHECK(found);
}

TEST_CASE("rewrite edges") {
    auto p = load_program_file("courseware.dbp");
    ValueCorrespondence v{"EMAIL", "STUDENT", "em_addr", "st_em_addr", {{"em_id", "st_em_id"}},
                          Agg::Any};
    BinderEnv env;
    auto skip = mk_skip();
    auto out = rewrite_command(skip, v, RewriteMode::Redirect, p, env);
    REQUIRE(out.has_value());
    CHECK(equal(*out, skip));

    // a second logging table for the same field gets a fresh name
    auto ls1 = make_logging_schema({{}, p, {}}, "COURSE", "co_st_cnt");
    auto ls2 = make_logging_schema(ls1.state, "COURSE", "co_st_cnt");
    CHECK(ls1.schema == "COURSE_CO_ST_CNT_LOG");
    CHECK(ls2.schema == "COURSE_CO_ST_CNT_LOG2");
}

TEST_CASE("decrements log negative deltas") {
    auto p = parse_ok(R"(
schema COURSE domain 4 { key co_id; co_st_cnt; }
txn remSt(course) {
  x := select co_st_cnt from COURSE where co_id = course; //S6
  update COURSE set co_st_cnt = x.co_st_cnt - 1 where co_id = course; //U5
  return 0;
}
)");
    auto st = state_of(p);
    auto next = try_logging(st, "remSt", "remSt/S6", "remSt/U5");
    REQUIRE(next.has_value());
    bool found = false;
    for (const auto& c : commands_of(*next->program.find_transaction("remSt")))
        if (const auto* ins = std::get_if<Command::Insert>(&c->node)) {
            found = true;
            CHECK(to_text(ins->values.back().second) == "-1");
        }
    CHECK(found);

    // absolute assignments have no delta form
    auto p2 = parse_ok(R"(
schema COURSE domain 4 { key co_id; co_st_cnt; }
txn setCnt(course) {
  x := select co_st_cnt from COURSE where co_id = course; //S6
  update COURSE set co_st_cnt = 5 where co_id = course; //U5
  return sum(x.co_st_cnt);
}
)");
    CHECK(!try_logging(state_of(p2), "setCnt", "setCnt/S6", "setCnt/U5").has_value());
}

TEST_CASE("splitting is guarded by co-access") {
    auto p = parse_ok(R"(
schema T domain 4 { key k; v; w; }
txn t(a) {
  update T set v = 1, w = 2 where k = a; //U1
  x := select v, w from T where k = a;   //S1
  return sum(x.v);
}
)");
    std::vector<AccessPair> pairs{{"t", "t/U1", "t/S1", {"v"}, {"w"}},
                                  {"t", "t/U1", "t/S1", {"w"}, {"v"}}};
    std::vector<RefactorStep> log;
    Program out = preprocess_split(p, pairs, log);
    // S1 reads both fields together, so U1 must stay whole
    CHECK(out == p);

    auto p2 = load_program_file("courseware.dbp");
    std::vector<AccessPair> pairs2{
        {"regSt", "regSt/S5", "regSt/U4", {"co_st_cnt"}, {"co_st_cnt"}},
        {"regSt", "regSt/U3", "regSt/U4", {"st_co_id", "st_reg"}, {"co_avail"}}};
    std::vector<RefactorStep> log2;
    Program out2 = preprocess_split(p2, pairs2, log2);
    const auto* u41 = update_labeled(out2, "regSt", "regSt/U4.1");
    const auto* u42 = update_labeled(out2, "regSt", "regSt/U4.2");
    REQUIRE(u41);
    REQUIRE(u42);
    CHECK(u41->sets[0].first == "co_st_cnt");
    CHECK(u42->sets[0].first == "co_avail");
    // pairs follow their fields onto the split parts
    CHECK(pairs2[0].c2 == "regSt/U4.1");
    CHECK(pairs2[1].c2 == "regSt/U4.2");

    // commands in at most one pair stay whole
    std::vector<AccessPair> single{{"regSt", "regSt/S5", "regSt/U4", {"co_st_cnt"}, {"co_st_cnt"}}};
    std::vector<RefactorStep> log3;
    CHECK(preprocess_split(p2, single, log3) == p2);
}

TEST_CASE("merging duplicates and rejecting mismatches") {
    auto p = parse_ok(R"(
schema T domain 4 { key k; v; w; }
schema U domain 4 { key k2; z; }
txn t(a) {
  update T set v = 1 where k = a; //U1
  update T set v = 1 where k = a; //U2
  update U set z = 2 where k2 = a; //U3
  return 0;
}
)");
    auto merged = try_merging(p, "t", "t/U1", "t/U2");
    REQUIRE(merged.has_value());
    CHECK(commands_of(*merged->find_transaction("t")).size() == 2);

    CHECK(!try_merging(p, "t", "t/U1", "t/U3").has_value()); // different tables
    CHECK(!try_merging(p, "t", "t/U1", "t/U1").has_value());

    // conflicting assignments to one field do not merge
    auto p2 = parse_ok(R"(
schema T domain 4 { key k; v; }
txn t(a) {
  update T set v = 1 where k = a; //U1
  update T set v = 2 where k = a; //U2
  return 0;
}
)");
    CHECK(!try_merging(p2, "t", "t/U1", "t/U2").has_value());

    // an intervening read of the written field blocks the move
    auto p3 = parse_ok(R"(
schema T domain 4 { key k; v; w; }
txn t(a) {
  update T set v = 1 where k = a; //U1
  x := select w from T where k = a; //S1
  update T set w = 2 where k = a; //U2
  return sum(x.w);
}
)");
    CHECK(!try_merging(p3, "t", "t/U1", "t/U2").has_value());
}

TEST_CASE("an intervening rebinding blocks a select merge") {
    auto p = parse_ok(R"(
schema T domain 4 { key k; v; w; }
txn t(a, b) {
  x := select v from T where k = a; //S1
  x := select w from T where k = b; //S2
  y := select w from T where k = a; //S3
  return sum(x.w) + sum(y.w);
}
)");
    // S3 matches S1's clause, but S2 rebinds x in between
    CHECK(!try_merging(p, "t", "t/S1", "t/S3").has_value());

    auto p2 = parse_ok(R"(
schema T domain 4 { key k; v; w; }
txn t(a) {
  x := select v from T where k = a; //S1
  y := select w from T where k = a; //S3
  return sum(x.v) + sum(y.w);
}
)");
    auto merged = try_merging(p2, "t", "t/S1", "t/S3");
    REQUIRE(merged.has_value());
    auto cmds = commands_of(*merged->find_transaction("t"));
    REQUIRE(cmds.size() == 1);
    CHECK(to_text(merged->find_transaction("t")->ret) == "sum(x.v) + sum(x.w)");
}

TEST_CASE("redirection derives the field map from the filters") {
    auto p = load_program_file("courseware.dbp");
    auto st = state_of(p);
    auto next = try_redirect(st, "setSt", "setSt/U1", "setSt/U2");
    REQUIRE(next.has_value());
    const auto* u2 = update_labeled(next->program, "setSt", "setSt/U2");
    REQUIRE(u2);
    CHECK(u2->schema == "STUDENT");
    REQUIRE(next->correspondences.size() == 1);
    CHECK(next->correspondences[0].theta.at("em_id") == "st_em_id");

    // no shared filter vocabulary: nothing to map
    auto p2 = parse_ok(R"(
schema A domain 4 { key a; av; }
schema B domain 4 { key b; bv; }
txn t(x, y) {
  update A set av = 1 where a = x; //U1
  update B set bv = 2 where b = y; //U2
  return 0;
}
)");
    CHECK(!try_redirect(state_of(p2), "t", "t/U1", "t/U2").has_value());
}

TEST_CASE("repair leaves clean programs untouched") {
    auto p = parse_ok(R"(
schema T domain 4 { key k; v; }
txn peek(a) { x := select v from T where k = a; return sum(x.v); }
txn poke(a, n) { update T set v = n where k = a; return 0; }
)");
    auto res = repair(p, detect_defaults(), 2);
    CHECK(res.program == p);
    CHECK(res.report.pairs_in.empty());
    CHECK(res.report.steps.empty());
    CHECK(res.correspondences.empty());
}

TEST_CASE("unrepairable pairs are reported, not forced") {
    // the read-modify-write doubles rather than increments, so the delta
    // log does not apply and no other strategy fits
    auto p = parse_ok(R"(
schema A domain 4 { key a; v; }
txn dbl(k) {
  x := select v from A where a = k; //S1
  update A set v = x.v * 2 where a = k; //U1
  return 0;
}
)");
    auto res = repair(p, detect_defaults(), 2);
    REQUIRE(res.report.pairs_in.size() == 1);
    CHECK(res.report.remaining == 1);
    CHECK(res.report.repaired == 0);
    CHECK(res.report.recommend_serializable);
    CHECK(res.report.outcomes[0].method == RepairMethod::Failed);
    // the program is handed back with the detected pairs intact
    auto recheck = detect_access_pairs(res.program, detect_defaults(), 2);
    CHECK(recheck.pairs.size() == 1);
}

TEST_CASE("a live counter read blocks the delta-log rewrite") {
    // the return exposes the stale reading; a blind delta insert would
    // diverge from the in-place write on exactly the racy schedules
    auto p = parse_ok(R"(
schema TALLY domain 4 { key t_id; t_cnt; }
txn bump(k) {
  x := select t_cnt from TALLY where t_id = k; //S1
  update TALLY set t_cnt = x.t_cnt + 1 where t_id = k; //U1
  return x.t_cnt;
}
)");
    CHECK(!try_logging({{}, p, {}}, "bump", "bump/S1", "bump/U1").has_value());
    auto res = repair(p, detect_defaults(), 2);
    CHECK(res.report.remaining == 1);

    // hiding the count makes the read obsolete and the rewrite sound
    auto p2 = parse_ok(R"(
schema TALLY domain 4 { key t_id; t_cnt; }
txn bump(k) {
  x := select t_cnt from TALLY where t_id = k; //S1
  update TALLY set t_cnt = x.t_cnt + 1 where t_id = k; //U1
  return 0;
}
)");
    auto res2 = repair(p2, detect_defaults(), 2);
    CHECK(res2.report.remaining == 0);
    CHECK(res2.report.repaired == 1);
    auto cmds = commands_of(*res2.program.find_transaction("bump"));
    REQUIRE(cmds.size() == 1); // the dead select is swept
    CHECK(std::holds_alternative<Command::Insert>(cmds[0]->node));
}

TEST_CASE("courseware repair reproduces the co-located layout") {
    auto p = load_program_file("courseware.dbp");
    auto res = repair(p, detect_defaults(), 4);
    CHECK(res.report.repaired == 5);
    CHECK(res.report.remaining == 0);

    const auto& fixed = res.program;
    auto get_cmds = commands_of(*fixed.find_transaction("getSt"));
    REQUIRE(get_cmds.size() == 1);
    CHECK(std::get<Command::Select>(get_cmds[0]->node).schema == "STUDENT");

    auto set_cmds = commands_of(*fixed.find_transaction("setSt"));
    REQUIRE(set_cmds.size() == 1);
    CHECK(std::get<Command::Update>(set_cmds[0]->node).schema == "STUDENT");

    auto reg_cmds = commands_of(*fixed.find_transaction("regSt"));
    REQUIRE(reg_cmds.size() == 2);
    CHECK(std::get<Command::Update>(reg_cmds[0]->node).schema == "STUDENT");
    const auto& ins = std::get<Command::Insert>(reg_cmds[1]->node);
    CHECK(ins.schema == "COURSE_CO_ST_CNT_LOG");

    // the emitted correspondences match the relocations
    REQUIRE(res.correspondences.size() == 3);
    CHECK(validate_correspondences(res.correspondences).empty());

    // the log replays from the original to the same result
    auto replayed = replay_log(p, res.report.steps);
    CHECK(replayed.program == fixed);
    CHECK(replayed.correspondences == res.correspondences);

    // a second pass finds nothing and changes nothing
    auto again = repair(fixed, detect_defaults(), 4);
    CHECK(again.report.pairs_in.empty());
    CHECK(again.program == fixed);

    // the output program is valid and round-trips through the printer
    CHECK(validate_program(fixed).empty());
    auto rt = parse_program(pretty_print(fixed), "repaired");
    REQUIRE(rt.ok());
    CHECK(*rt.program == fixed);
}

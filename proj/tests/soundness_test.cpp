#include <doctest.h>

#include "atro/printer.hpp"
#include "atro/refactor.hpp"
#include "atro/valuecorr.hpp"
#include "common.hpp"
#include "generators.hpp"

using namespace atro;

namespace {

// Small programs assembled from the shapes the repair engine acts on:
// cross-table readers, co-writers, guarded writers, and counters.
std::string random_program_text(testgen::Rng& rng) {
    std::ostringstream os;
    os << "schema A domain 4 { key a_id; a_v; a_w; }\n";
    os << "schema B domain 4 { key b_id; b_ref; b_v; }\n";

    int n_txns = static_cast<int>(rng.range(2, 3));
    for (int t = 0; t < n_txns; ++t) {
        std::string name = "t" + std::to_string(t);
        switch (rng.range(0, 3)) {
        case 0: // cross-table reader
            os << "txn " << name << "(k) {\n";
            os << "  x := select " << (rng.coin() ? "a_v" : "a_v, a_w") << " from A where a_id = k;\n";
            os << "  y := select b_v from B where b_id = " << (rng.coin() ? "x.a_v" : "k") << ";\n";
            os << "  return sum(y.b_v);\n}\n";
            break;
        case 1: // two-table writer
            os << "txn " << name << "(k, n) {\n";
            os << "  update A set a_v = n" << (rng.coin() ? ", a_w = n + 1" : "")
               << " where a_id = k;\n";
            os << "  update B set b_v = n where b_id = k;\n";
            os << "  return 0;\n}\n";
            break;
        case 2: // counter bump, reading hidden
            os << "txn " << name << "(k) {\n";
            os << "  x := select a_w from A where a_id = k;\n";
            os << "  update A set a_w = x.a_w " << (rng.coin() ? "+" : "-") << " 1 where a_id = k;\n";
            os << "  return 0;\n}\n";
            break;
        default: // guarded writer
            os << "txn " << name << "(k, n) {\n";
            os << "  x := select a_v from A where a_id = k;\n";
            os << "  if (x.a_v > 0) {\n";
            os << "    update B set b_v = n where b_id = k;\n";
            os << "  }\n";
            os << "  return 0;\n}\n";
            break;
        }
    }
    return os.str();
}

Workload random_invocations(testgen::Rng& rng, const Program& p) {
    Workload w;
    // diagonal seeding: row k's fields hold k, so key joins derived from
    // any field always land on a populated row
    for (const auto& sc : p.schemas)
        for (Value k = 0; k < 2; ++k) {
            InitRecord r{sc.name, {k}, {}};
            for (const auto& f : sc.fields)
                if (!sc.is_pk(f)) r.fields.emplace_back(f, k);
            w.init.push_back(std::move(r));
        }
    // two concurrent instances over the populated key range
    for (int i = 0; i < 2; ++i) {
        const auto& t = p.transactions[static_cast<size_t>(
            rng.range(0, static_cast<Value>(p.transactions.size()) - 1))];
        Invocation inv{t.name, {}};
        for (size_t a = 0; a < t.params.size(); ++a) inv.args.push_back(rng.range(0, 1));
        w.invocations.push_back(std::move(inv));
    }
    return w;
}

} // namespace

TEST_CASE("repairs of randomized programs stay refinements") {
    testgen::Rng rng(20240817);
    Bounds tight = detect_defaults();
    tight.schedule_cap = 1500;
    tight.max_views_per_step = 4;

    int repaired_programs = 0;
    for (int iter = 0; iter < 20; ++iter) {
        auto text = random_program_text(rng);
        auto parsed = parse_program(text, "random");
        REQUIRE(parsed.ok());
        const Program& p = *parsed.program;

        auto res = repair(p, tight, 2);
        if (res.program == p) continue; // nothing changed, nothing to refine
        ++repaired_programs;

        CHECK(validate_program(res.program).empty());
        auto rt = parse_program(pretty_print(res.program), "repaired");
        REQUIRE(rt.ok());
        CHECK(*rt.program == res.program);
        CHECK(replay_log(p, res.report.steps).program == res.program);

        auto vset = refinement_correspondences(p, res.correspondences);
        Bounds verify_bounds;
        verify_bounds.key_domain_cap = 2; // keep the state space small
        auto verdict =
            check_program_refinement(res.program, p, vset, {random_invocations(rng, p)},
                                     verify_bounds);
        INFO("program:\n" << text << "repaired:\n" << pretty_print(res.program));
        CHECK(verdict.passed());
    }
    CHECK(repaired_programs >= 5); // the generator must exercise the engine
}

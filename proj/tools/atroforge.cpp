#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "atro/anomaly.hpp"
#include "atro/json_io.hpp"
#include "atro/parser.hpp"
#include "atro/printer.hpp"
#include "atro/refactor.hpp"
#include "atro/valuecorr.hpp"
#include "atro/workload.hpp"

using namespace atro;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw EvalError("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw EvalError("cannot write " + path);
    f << text;
}

Program load_program(const std::string& path) {
    auto res = parse_program(slurp(path), path);
    if (!res.ok()) {
        std::cerr << format_diagnostics(res.diagnostics);
        std::exit(2);
    }
    return *res.program;
}

std::string stem(const std::string& path) {
    auto dot = path.rfind(".dbp");
    return dot == std::string::npos ? path : path.substr(0, dot);
}

Bounds env_bounds(Bounds base) {
    if (const char* env = std::getenv("ATROFORGE_BOUNDS"))
        if (*env) return parse_bounds(env, base);
    return base;
}

std::vector<int> parse_csv_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoi(item));
    return out;
}

void print_table(std::ostream& os, const Program& p, const DatabaseState& sigma) {
    for (const auto& sc : p.schemas) {
        auto alive = alive_records(sigma, sc.name);
        if (alive.empty()) continue;
        os << sc.name << ":\n";
        for (const auto& r : alive) {
            os << "  (";
            for (size_t i = 0; i < r.key.size(); ++i) os << (i ? "," : "") << r.key[i];
            os << ")";
            for (const auto& f : sc.fields) {
                if (sc.is_pk(f)) continue;
                auto v = reconstruct_field(sigma, r, f, &sc);
                os << " " << f << "=";
                if (v)
                    os << *v;
                else
                    os << "-";
            }
            os << "\n";
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"database program anomaly detection and schema-refactoring repair"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    std::string bounds_arg;
    long seed = 0;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs <= 0) jobs = 1;
    bool as_json = false;
    app.add_option("--bounds", bounds_arg, "bound overrides, k=v[,k=v...]");
    app.add_option("--seed", seed, "label recorded alongside reports");
    app.add_option("--jobs", jobs, "worker threads for detection");
    app.add_flag("--json", as_json, "machine-readable output");

    auto* check = app.add_subcommand("check", "detect anomalous access pairs");
    std::string check_prog, check_out;
    check->add_option("program", check_prog, "input .dbp file")->required();
    check->add_option("-o,--output", check_out, "write the JSON report here");

    auto* rep = app.add_subcommand("repair", "refactor the schema to eliminate anomalies");
    std::string rep_prog;
    rep->add_option("program", rep_prog, "input .dbp file")->required();

    auto* sim = app.add_subcommand("simulate", "run a workload");
    std::string sim_prog, sim_wl, sim_sched, sim_views;
    bool sim_serial = false, sim_dump = false;
    sim->add_option("program", sim_prog)->required();
    sim->add_option("workload", sim_wl)->required();
    sim->add_flag("--serial", sim_serial, "run invocations to completion in order");
    sim->add_flag("--dump", sim_dump, "print the final event log");
    sim->add_option("--schedule", sim_sched, "replay: comma-separated instance ids");
    sim->add_option("--views", sim_views, "replay: comma-separated view indices");

    auto* ver = app.add_subcommand("verify", "check refinement of a refactored program");
    std::string ver_orig, ver_refac, ver_vc, ver_out;
    std::vector<std::string> ver_wls;
    ver->add_option("original", ver_orig)->required();
    ver->add_option("refactored", ver_refac)->required();
    ver->add_option("correspondences", ver_vc)->required();
    ver->add_option("workloads", ver_wls, "one or more .wl files")->required();
    ver->add_option("-o,--output", ver_out, "write the JSON report here");

    auto* fmt = app.add_subcommand("fmt", "parse and pretty-print a program");
    std::string fmt_prog;
    fmt->add_option("program", fmt_prog)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2; // usage problems exit 2
    }

    try {
        Bounds bounds = env_bounds(detect_defaults());
        if (!bounds_arg.empty()) bounds = parse_bounds(bounds_arg, bounds);

        if (*check) {
            Program p = load_program(check_prog);
            auto report = detect_access_pairs(p, bounds, jobs);
            auto json_text = check_report_json(report, check_prog);
            if (!check_out.empty()) spit(check_out, json_text);
            if (as_json) {
                std::cout << json_text;
            } else {
                std::cout << report.pairs.size() << " anomalous access pair(s)\n";
                for (const auto& pr : report.pairs) std::cout << "  " << pr.str() << "\n";
                for (const auto& k : report.kinds_by_pairing) std::cout << "  witnessed " << k << "\n";
                if (report.capped) std::cout << "  (bounds reached; absence is not conclusive)\n";
            }
            return report.pairs.empty() ? 0 : 1;
        }

        if (*rep) {
            Program p = load_program(rep_prog);
            auto result = repair(p, bounds, jobs);
            std::string base = stem(rep_prog);
            spit(base + ".repaired.dbp", pretty_print(result.program));
            spit(base + ".vc", print_correspondences(result.correspondences));
            spit(base + ".repair.json", repair_report_json(result, rep_prog));
            if (as_json) {
                std::cout << repair_report_json(result, rep_prog);
            } else {
                std::cout << result.report.pairs_in.size() << " pair(s); repaired "
                          << result.report.repaired << ", remaining " << result.report.remaining
                          << "\n";
                for (const auto& o : result.report.outcomes)
                    std::cout << "  " << o.pair.str() << " -> " << to_string(o.method) << "\n";
                if (result.report.recommend_serializable)
                    std::cout << "  remaining pairs need serializable execution of their "
                                 "transactions\n";
                std::cout << "wrote " << base << ".repaired.dbp, " << base << ".vc, " << base
                          << ".repair.json\n";
            }
            return result.report.remaining == 0 ? 0 : 1;
        }

        if (*sim) {
            Program p = load_program(sim_prog);
            Workload w = parse_workload(slurp(sim_wl), sim_wl);
            // simulation uses declared key domains unless overridden
            Bounds sb = env_bounds({});
            if (!bounds_arg.empty()) sb = parse_bounds(bounds_arg, sb);
            if (w.init.empty()) w.init = default_init(p, sb);
            if (sim_serial || !sim_sched.empty()) {
                History h;
                if (!sim_sched.empty()) {
                    auto insts = parse_csv_ints(sim_sched);
                    auto views = parse_csv_ints(sim_views);
                    std::vector<StepChoice> sched;
                    for (size_t i = 0; i < insts.size(); ++i)
                        sched.push_back({insts[i], i < views.size() ? views[i] : 0});
                    h = replay(p, w, sb, sched);
                } else {
                    h = run_serial(p, w, sb);
                }
                for (const auto& t : h.final.instances)
                    std::cout << t.name << " -> " << t.ret_value.value_or(0) << "\n";
                std::cout << "atomicity " << check_strong_atomicity(h.final.sigma) << ", isolation "
                          << check_strong_isolation(h.final.sigma) << "\n";
                print_table(std::cout, p, h.final.sigma);
                if (sim_dump) std::cout << dump_events(h.final.sigma);
                return 0;
            }
            std::set<Outcome> outcomes;
            long anomalies = 0;
            auto stats = enumerate_histories(p, w, sb, [&](const Snapshot& snap) {
                outcomes.insert(outcome_of(snap.sigma, snap.instances));
                std::set<std::pair<int, int>> dirs;
                bool cycle = false;
                for (const auto& e : snap.conflicts) {
                    dirs.emplace(e.from_inst, e.to_inst);
                    if (dirs.count({e.to_inst, e.from_inst})) cycle = true;
                }
                if (cycle) ++anomalies;
                return true;
            });
            std::cout << "histories " << stats.histories << ", distinct outcomes "
                      << outcomes.size() << ", conflict-cycle histories " << anomalies << "\n";
            if (stats.schedule_capped || stats.views_capped || stats.steps_capped)
                std::cout << "(bounds reached)\n";
            return 0;
        }

        if (*ver) {
            Program orig = load_program(ver_orig);
            Program refac = load_program(ver_refac);
            auto vcs = parse_correspondences(slurp(ver_vc), ver_vc);
            auto vset = refinement_correspondences(orig, vcs);
            std::vector<Workload> wls;
            for (const auto& path : ver_wls) wls.push_back(parse_workload(slurp(path), path));
            Bounds vb = env_bounds({});
            if (!bounds_arg.empty()) vb = parse_bounds(bounds_arg, vb);
            auto verdict = check_program_refinement(refac, orig, vset, wls, vb);
            auto json_text = verify_report_json(verdict, ver_orig, ver_refac, ver_wls, vb);
            if (!ver_out.empty()) spit(ver_out, json_text);
            if (as_json)
                std::cout << json_text;
            else
                std::cout << "refinement: " << verdict.str()
                          << (verdict.detail.empty() ? "" : " — " + verdict.detail) << "\n";
            return verdict.passed() ? 0 : 1;
        }

        if (*fmt) {
            Program p = load_program(fmt_prog);
            std::cout << pretty_print(p);
            return 0;
        }
    } catch (const EvalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

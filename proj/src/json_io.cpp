#include "atro/json_io.hpp"

#include <json.hpp>

namespace atro {

namespace {

using nlohmann::json;

json bounds_json(const Bounds& b) {
    return json{{"max_views", b.max_views_per_step}, {"schedule_cap", b.schedule_cap},
                {"max_steps", b.max_steps},          {"key_domain", b.key_domain_cap},
                {"arg_lo", b.arg_lo},                {"arg_hi", b.arg_hi}};
}

json pair_json(const AccessPair& p) {
    return json{{"txn", p.txn},
                {"c1", p.c1},
                {"f1", std::vector<std::string>(p.f1.begin(), p.f1.end())},
                {"c2", p.c2},
                {"f2", std::vector<std::string>(p.f2.begin(), p.f2.end())}};
}

json witness_json(const AnomalyWitness& w) {
    json invs = json::array();
    for (const auto& inv : w.invocations) invs.push_back(json{{"txn", inv.txn}, {"args", inv.args}});
    json sched = json::array();
    for (const auto& c : w.schedule) sched.push_back(json{{"instance", c.instance}, {"view", c.view_index}});
    return json{{"violated", w.violated == AnomalyWitness::Violated::Atomicity ? "atomicity" : "isolation"},
                {"kind", to_string(w.kind)},
                {"txn", w.txn},
                {"c1", w.c1},
                {"c2", w.c2},
                {"events", json{{"eta", w.eta}, {"eta_prime", w.eta_prime}, {"witness", w.eta_witness}}},
                {"invocations", invs},
                {"schedule", sched}};
}

} // namespace

std::string check_report_json(const DetectReport& r, const std::string& program_path) {
    json pairs = json::array();
    for (const auto& p : r.pairs) pairs.push_back(pair_json(p));
    json witnesses = json::array();
    for (const auto& w : r.witnesses) witnesses.push_back(witness_json(w));
    json kinds = json::array();
    for (const auto& k : r.kinds_by_pairing) kinds.push_back(k);
    json out{{"version", 1},
             {"program", program_path},
             {"bounds", bounds_json(r.bounds)},
             {"pairs", pairs},
             {"witnesses", witnesses},
             {"anomalies", kinds},
             {"histories", r.histories},
             {"pruned_branches", r.pruned},
             {"cap_exceeded", r.capped}};
    return out.dump(2) + "\n";
}

std::string repair_report_json(const RepairResult& r, const std::string& program_path) {
    json outcomes = json::array();
    for (const auto& o : r.report.outcomes)
        outcomes.push_back(json{{"pair", pair_json(o.pair)}, {"method", to_string(o.method)}});
    json steps = json::array();
    for (const auto& s : r.report.steps) steps.push_back(s.str());
    json vcs = json::array();
    for (const auto& c : r.correspondences) vcs.push_back(c.str());
    json pairs_in = json::array();
    for (const auto& p : r.report.pairs_in) pairs_in.push_back(pair_json(p));
    json out{{"version", 1},
             {"program", program_path},
             {"bounds", bounds_json(r.report.detection.bounds)},
             {"pairs_in", pairs_in},
             {"outcomes", outcomes},
             {"steps", steps},
             {"correspondences", vcs},
             {"repaired", r.report.repaired},
             {"remaining", r.report.remaining},
             {"recommend_serializable", r.report.recommend_serializable},
             {"cap_exceeded", r.report.detection.capped}};
    return out.dump(2) + "\n";
}

std::string verify_report_json(const RefinementVerdict& v, const std::string& original_path,
                               const std::string& refactored_path,
                               const std::vector<std::string>& workload_paths, const Bounds& b) {
    json out{{"version", 1},
             {"original", original_path},
             {"refactored", refactored_path},
             {"workloads", workload_paths},
             {"bounds", bounds_json(b)},
             {"verdict", v.str()},
             {"detail", v.detail},
             {"refactored_outcomes", v.refactored_outcomes},
             {"original_outcomes", v.original_outcomes},
             {"serial_histories", v.serial_histories},
             {"cap_exceeded", v.capped}};
    return out.dump(2) + "\n";
}

} // namespace atro

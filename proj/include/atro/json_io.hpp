#pragma once

#include <string>

#include "atro/anomaly.hpp"
#include "atro/refactor.hpp"
#include "atro/valuecorr.hpp"

namespace atro {

// Versioned machine-readable reports. Key order is sorted and all values
// are deterministic, so identical inputs yield identical bytes.
std::string check_report_json(const DetectReport& r, const std::string& program_path);
std::string repair_report_json(const RepairResult& r, const std::string& program_path);
std::string verify_report_json(const RefinementVerdict& v, const std::string& original_path,
                               const std::string& refactored_path,
                               const std::vector<std::string>& workload_paths, const Bounds& b);

} // namespace atro

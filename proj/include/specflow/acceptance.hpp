#pragma once

#include <string>
#include <vector>

namespace specflow {

struct CriterionResult {
  std::string id;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct CriterionInfo {
  std::string id;
  std::string name;
};

/// Identifiers C01..C11 with short names.
std::vector<CriterionInfo> acceptance_criteria();

/// Runs every criterion whose id or name contains `filter` (all when empty),
/// with fixed seeds. Failures and exceptions are reported, never thrown.
/// Criteria run on up to `threads` worker threads; results keep id order.
std::vector<CriterionResult> run_acceptance(const std::string& filter = "", int threads = 1);

/// "PASS C01 four_way_agreement: <detail> (1.23 s)"
std::string format_result(const CriterionResult& r);

}  // namespace specflow

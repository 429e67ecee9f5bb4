#pragma once

// End-to-end suite recommendation, reports, validation against other
// shipment sets, suite comparison and fine-tuning candidates.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "boxsuite/cost.hpp"
#include "boxsuite/fitmatrix.hpp"
#include "boxsuite/model.hpp"
#include "boxsuite/pmedian.hpp"

namespace boxsuite {

enum class PMedianMethod { Exact, Exchange, Grasp, Lagrangian };

std::string to_string(PMedianMethod m);
PMedianMethod parse_method(const std::string& s);

struct RunConfig {
  std::size_t p = 10;
  std::vector<Id> locked_ids;
  CostModel cost = CostModel::inner_volume();
  FitMatrixConfig fit;
  PMedianMethod method = PMedianMethod::Grasp;
  ExactConfig exact;
  GraspParams grasp;  // grasp.seed is the run seed
  LagrangianParams lagrangian;
  std::size_t threads = 1;
};

struct BoxReportRow {
  Id id = 0;
  Dims3 inner;
  double inner_volume = 0.0;
  std::size_t shipments = 0;
  double pct_shipments = 0.0;
  double liquid_volume = 0.0;
  double shipped_volume = 0.0;  // shipments * inner_volume
  double pct_void = 0.0;
};

struct SuiteReport {
  bool feasible = false;
  std::vector<BoxReportRow> rows;  // ascending inner volume
  std::size_t shipments = 0;       // I
  std::size_t packable = 0;        // hat I
  double total_inner_volume = 0.0;
  double total_liquid_volume = 0.0;
  double pct_void = 0.0;
  double cost = 0.0;  // Phi
  double gamma = 0.0;
  std::optional<double> lower_bound;
  std::optional<double> gap;
  std::string method;
};

struct Recommendation {
  std::optional<std::vector<std::size_t>> suite;  // box indices; empty when infeasible
  SuiteReport report;
  SolveResult solve;
  // Box index per packable shipment (aligned with packable.shipments).
  std::vector<std::size_t> assignment;
  PackableSet packable;
  std::vector<TimeoutRecord> timeouts;
  std::vector<BoundStep> bound_trace;  // lagrangian method only
};

// Throws ValidationError unless 0 <= k < p < J and the locks name known,
// distinct boxes.
std::vector<std::size_t> resolve_locks(const RunConfig& run, const BoxSet& boxes);

// Runs the p-median stage on a precomputed fit matrix.
Recommendation recommend_from_fit(const RunConfig& run, std::span<const Shipment> shipments, const BoxSet& boxes,
                                  const FitMatrix& fit);

// Nesting sets, fit matrix, then recommend_from_fit.
Recommendation recommend(const RunConfig& run, std::span<const Shipment> shipments, const BoxSet& boxes);

// Chosen p-median solver on the cost matrix.
SolveResult solve_pmedian(const RunConfig& run, const PMedianInstance& inst, std::vector<BoundStep>* trace = nullptr);

PMedianInstance to_instance(const CostMatrix& c, std::size_t p);

// CSV (rank,box_id,dim1,dim2,dim3,inner_volume,pct_shipments,pct_void) and a
// fixed-width text table with a caption holding totals and bounds.
void write_report_csv(const std::string& path, const SuiteReport& r);
std::string format_report(const SuiteReport& r);

// Min-cost fitting box of the suite per shipment (nullopt when none fits).
struct Packing {
  std::vector<std::optional<std::size_t>> box;  // box index per shipment
  std::vector<double> cost;                     // 0 when uncovered
};
Packing pack_into_suite(std::span<const Shipment> shipments, const BoxSet& boxes, std::span<const std::size_t> suite,
                        const CostModel& cost, const FitMatrixConfig& fit);

struct ValidationRow {
  Id id = 0;
  std::size_t shipments = 0;
  double pct_shipments = 0.0;
  double cost = 0.0;
  double pct_cost = 0.0;
  std::optional<double> pct_outer_volume;  // when outer volumes are given
  double pct_void = 0.0;
};

struct ValidationReport {
  std::vector<ValidationRow> rows;  // one per suite box, suite order
  std::size_t shipments = 0;
  std::size_t covered = 0;
  std::size_t uncovered = 0;
  double total_cost = 0.0;
  double pct_void = 0.0;
};

struct Divergence {
  Id box_id = 0;
  std::string metric;
  double a = 0.0;
  double b = 0.0;
  double relative = 0.0;  // |a - b| / max(|a|, |b|)
};

struct ValidationComparison {
  ValidationReport a;
  ValidationReport b;
  std::vector<Divergence> flagged;
};

struct ValidateConfig {
  double divergence_threshold = 0.10;
  // Outer volume per box id, for the outer-volume share metric.
  std::optional<std::unordered_map<Id, double>> outer_volume;
};

ValidationReport validation_report(std::span<const Shipment> shipments, const BoxSet& boxes,
                                   std::span<const std::size_t> suite, const Packing& packing,
                                   const ValidateConfig& cfg = {});

ValidationComparison validate(std::span<const std::size_t> suite, std::span<const Shipment> shipments_a,
                              std::span<const Shipment> shipments_b, const BoxSet& boxes, const CostModel& cost,
                              const FitMatrixConfig& fit, const ValidateConfig& cfg = {});

struct SuiteComparisonRow {
  std::string label;
  std::vector<Id> box_ids;
  double total_cost = 0.0;
  std::size_t uncovered = 0;
  bool feasible = false;
  // Percent by which the reference suite (row 0) costs less than this
  // suite; present only when both cover every shipment.
  std::optional<double> reduction_pct;
};

// suites[0] is the reference S*.
std::vector<SuiteComparisonRow> compare_suites(std::span<const std::vector<std::size_t>> suites,
                                               std::span<const std::string> labels,
                                               std::span<const Shipment> shipments, const BoxSet& boxes,
                                               const CostModel& cost, const FitMatrixConfig& fit);

// Locked boxes plus every +/- delta variation (per dimension) of each
// unlocked suite box, with positive dims, deduplicated by sorted dims.
// Variants matching a box of `boxes` keep its id; others get fresh ids
// above the largest existing id. The result is volume-sorted with `locked`
// pointing at the locked boxes.
BoxSet finetune_candidates(std::span<const std::size_t> suite, std::span<const std::size_t> locked, const BoxSet& boxes,
                           std::span<const double> deltas);

}  // namespace boxsuite

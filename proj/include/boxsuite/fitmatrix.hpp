#pragma once

// Shipment x box fit matrix: nesting sets, the tiered per-shipment scan and
// the packable set, plus CSV export/import.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boxsuite/fitting.hpp"
#include "boxsuite/model.hpp"

namespace boxsuite {

// free[j]: boxes j nests into with any rotation; ho[j]: with the two
// rotations that keep z vertical. Both lists start with j, then ascend.
struct NestSets {
  std::vector<std::vector<std::size_t>> free;
  std::vector<std::vector<std::size_t>> ho;
};

NestSets compute_nest_sets(const BoxSet& boxes);

// Sorted column indices per shipment.
struct FitMatrix {
  std::size_t num_shipments = 0;
  std::size_t num_boxes = 0;
  std::vector<std::vector<std::size_t>> rows;

  bool test(std::size_t i, std::size_t j) const;
  std::size_t nnz() const;
};

// W and the J_i lists. boxes[t] belongs to shipments[t].
struct PackableSet {
  std::vector<std::size_t> shipments;
  std::vector<std::vector<std::size_t>> boxes;

  std::size_t size() const { return shipments.size(); }
};

PackableSet packable_set(const FitMatrix& b);

// Columns computed earlier for the same shipments, reused for boxes with
// the same sorted dims (fine-tuning recomputes only new boxes).
struct PriorFits {
  const FitMatrix* matrix = nullptr;
  const BoxSet* boxes = nullptr;
  PackingRules rules;
};

struct FitMatrixConfig {
  SolverConfig solver;
  PackingRules rules;
  bool prescreen_pairs_triples = true;  // applied when n >= 4
  std::size_t threads = 0;               // 0: hardware concurrency
  std::optional<PriorFits> prior;
};

struct TimeoutRecord {
  Id shipment_id = 0;
  Id box_id = 0;
};

// Per-tier decision counts over all (shipment, box) evaluations.
struct FitScanStats {
  std::size_t liquid_only = 0;
  std::size_t skipped_by_nesting = 0;
  std::size_t reused = 0;
  std::size_t failed_necessary = 0;
  std::size_t single = 0;
  std::size_t stacking = 0;
  std::size_t exact_small = 0;
  std::size_t prescreen_rejects = 0;
  std::size_t solver_calls = 0;
  std::size_t solver_fits = 0;
  std::size_t solver_nofits = 0;
  std::size_t solver_timeouts = 0;
  double seconds = 0.0;
};

struct FitMatrixResult {
  FitMatrix matrix;
  PackableSet packable;
  std::vector<TimeoutRecord> timeouts;  // ordered by shipment, then box
  FitScanStats stats;
};

// Tiered scan over boxes in volume order for every shipment. Timeouts count
// as no-fit and are listed in the result.
FitMatrixResult compute_fit_matrix(std::span<const Shipment> shipments, const BoxSet& boxes, const NestSets& nests,
                                   const FitMatrixConfig& cfg);

// Decision for one (shipment, box) pair through the same tiers, without the
// nesting shortcut. Foldables count only through the volume test.
FitOutcome shipment_fits(const Shipment& shipment, const CandidateBox& box, const FitMatrixConfig& cfg,
                         FitScanStats* stats = nullptr);

// Writes `path` (shipment_id,box_id per set bit), `path`.manifest.json and
// `path`.timeouts.csv.
void export_fit_matrix(const std::string& path, const FitMatrixResult& result, std::span<const Shipment> shipments,
                       const BoxSet& boxes, const FitMatrixConfig& cfg);

// Reads a fit CSV against the given shipments and boxes; unknown ids are a
// ValidationError.
FitMatrix import_fit_matrix(const std::string& path, std::span<const Shipment> shipments, const BoxSet& boxes);

std::string config_hash(const FitMatrixConfig& cfg, std::span<const Shipment> shipments, const BoxSet& boxes);

}  // namespace boxsuite

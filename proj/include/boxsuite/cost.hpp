#pragma once

// Penalized cost matrix over packable shipments plus one fake row per
// locked box.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "boxsuite/fitmatrix.hpp"
#include "boxsuite/model.hpp"

namespace boxsuite {

enum class CostModelKind { InnerVolume, OuterVolume, MaterialWeight, ExternalTable };

class CostModel {
 public:
  // Cost of a fitting box is its inner volume.
  static CostModel inner_volume();
  // Per-box values (outer volume or material weight) read from a CSV
  // box_id,value; the cost does not depend on the shipment.
  static CostModel box_table(CostModelKind kind, const std::string& path);
  static CostModel box_table(CostModelKind kind, std::unordered_map<Id, double> values);
  // Per-pair costs read from a CSV shipment_id,box_id,cost.
  static CostModel external_table(const std::string& path);
  static CostModel external_table(std::map<std::pair<Id, Id>, double> costs);

  CostModelKind kind() const { return kind_; }
  // Throws ValidationError when the model has no value for the pair.
  double cost(const Shipment& shipment, const CandidateBox& box) const;
  // Stable identifier, e.g. "inner-volume" or "table:costs.csv".
  std::string id() const;

 private:
  CostModelKind kind_ = CostModelKind::InnerVolume;
  std::unordered_map<Id, double> box_values_;
  std::map<std::pair<Id, Id>, double> pair_costs_;
  std::string source_;
};

std::string to_string(CostModelKind k);

// Row-major (real_rows + fake_rows) x cols. Row t < real_rows is the t-th
// packable shipment; row real_rows + r is the fake shipment for locked[r].
struct CostMatrix {
  std::size_t real_rows = 0;
  std::size_t fake_rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  double gamma = 0.0;
  std::vector<std::size_t> locked;
  std::string model_id;

  std::size_t rows() const { return real_rows + fake_rows; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

// Costs for j in J_i from the model, every other entry Gamma, and a zero at
// the locked column of each fake row. Gamma is one more than the sum over
// packables of their largest fitting cost. Rejects negative, non-finite and
// >= Gamma model costs, and invalid or repeated locked indices.
CostMatrix build_cost_matrix(const PackableSet& packables, std::span<const Shipment> shipments, const BoxSet& boxes,
                             std::span<const std::size_t> locked, const CostModel& model, std::size_t threads = 1);

// CSV matrix (one row per line, shipment or fake id in the first column)
// and `path`.manifest.json with Gamma, k, T and the model id.
void export_cost_matrix(const std::string& path, const CostMatrix& c, const PackableSet& packables,
                        std::span<const Shipment> shipments, const BoxSet& boxes);
CostMatrix import_cost_matrix(const std::string& path);

}  // namespace boxsuite

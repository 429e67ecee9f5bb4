#pragma once

// Domain types for shipments and candidate boxes, plus CSV ingestion.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace boxsuite {

using Id = std::int64_t;

// Three lengths. Carton dims are (length, width, height); box dims are the
// inner (x, y, z) with z the vertical axis.
struct Dims3 {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double operator[](std::size_t i) const { return i == 0 ? a : (i == 1 ? b : c); }
  double& operator[](std::size_t i) { return i == 0 ? a : (i == 1 ? b : c); }
  double volume() const { return a * b * c; }
  double max() const;
  bool positive() const { return a > 0.0 && b > 0.0 && c > 0.0; }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

// Nonincreasing permutation of d.
Dims3 sort3(Dims3 d);

// Nonincreasing sort of the first two dims only; c is kept in place. This is
// the keying used for height-oriented cartons and boxes.
Dims3 sort2(Dims3 d);

// True iff a <= b componentwise, within tolerance eps.
bool leq3(const Dims3& a, const Dims3& b, double eps = 0.0);

struct Carton {
  Dims3 dims;
  bool height_oriented = false;
  bool bottom_resting = false;
  Id item_id = 0;  // provenance only; never used by the fitting logic
};

struct FoldableItem {
  Dims3 dims;
  Id item_id = 0;
};

struct Shipment {
  Id id = 0;
  std::vector<Carton> cartons;
  std::vector<FoldableItem> foldables;

  std::size_t height_oriented_count() const;
  std::size_t bottom_resting_count() const;
};

// Sum of all item volumes; foldables count as liquid.
double liquid_volume(const Shipment& s);

struct CandidateBox {
  Id id = 0;
  Dims3 inner;
  double volume = 0.0;
};

CandidateBox make_box(Id id, Dims3 inner);

// Boxes sorted by nondecreasing inner volume. `locked` holds indices into
// `boxes` (the set T), in the order given by the caller.
struct BoxSet {
  std::vector<CandidateBox> boxes;
  std::vector<std::size_t> locked;

  std::size_t size() const { return boxes.size(); }
  std::vector<double> volumes() const;
  std::optional<std::size_t> index_of(Id id) const;
  // Resolves box ids to indices; throws ValidationError on unknown or
  // repeated ids.
  std::vector<std::size_t> indices_of(std::span<const Id> ids) const;
};

// Stable sort by volume. Checks positivity and id uniqueness.
BoxSet make_box_set(std::vector<CandidateBox> boxes);

// Index (0-based) of the first value >= w in a nondecreasing sequence;
// values.size() if none. Equivalent to a 1-based "N+1 when absent" search
// shifted by one.
std::size_t search_sorted_first(std::span<const double> values, double w);

// Loaders. Files use comma separation with an optional header row.
//   boxes.csv      box_id,dim1,dim2,dim3
//   items.csv      item_id,dim1,dim2,dim3
//   shipments.csv  shipment_id,item_id,quantity,dim1,dim2,dim3[,ho,br,foldable]
// Extension columns ho/br/foldable are 0/1; they may also be placed anywhere
// when a header names them. With an items file, shipment rows may omit dims.
BoxSet load_boxes(const std::string& path);
std::vector<Shipment> load_shipments(const std::string& path,
                                     const std::optional<std::string>& items_path = std::nullopt);

struct Item {
  Id id = 0;
  Dims3 dims;
};
std::vector<Item> load_items(const std::string& path);

void write_boxes(const std::string& path, const BoxSet& boxes);
// One row per run of identical consecutive items; extension columns are
// written only when some item uses them.
void write_shipments(const std::string& path, std::span<const Shipment> shipments);

// The integral grid {x>=y>=z, xr>=x>=xl, ...} with the given step, in
// generation order (unsorted). Step 1 over (5..40, 4..20, 1..16) is the
// 5,284-box candidate set used for the public dataset.
std::vector<CandidateBox> box_grid(int x_lo, int x_hi, int y_lo, int y_hi, int z_lo, int z_hi,
                                   int step = 1);

}  // namespace boxsuite

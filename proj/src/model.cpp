#include "boxsuite/model.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "boxsuite/error.hpp"
#include "csv.hpp"

namespace boxsuite {

double Dims3::max() const { return std::max({a, b, c}); }

Dims3 sort3(Dims3 d) {
  if (d.a < d.b) std::swap(d.a, d.b);
  if (d.b < d.c) std::swap(d.b, d.c);
  if (d.a < d.b) std::swap(d.a, d.b);
  return d;
}

Dims3 sort2(Dims3 d) {
  if (d.a < d.b) std::swap(d.a, d.b);
  return d;
}

bool leq3(const Dims3& a, const Dims3& b, double eps) {
  return a.a <= b.a + eps && a.b <= b.b + eps && a.c <= b.c + eps;
}

std::size_t Shipment::height_oriented_count() const {
  return static_cast<std::size_t>(
      std::count_if(cartons.begin(), cartons.end(), [](const Carton& c) { return c.height_oriented; }));
}

std::size_t Shipment::bottom_resting_count() const {
  return static_cast<std::size_t>(
      std::count_if(cartons.begin(), cartons.end(), [](const Carton& c) { return c.bottom_resting; }));
}

double liquid_volume(const Shipment& s) {
  double v = 0.0;
  for (const auto& c : s.cartons) v += c.dims.volume();
  for (const auto& f : s.foldables) v += f.dims.volume();
  return v;
}

CandidateBox make_box(Id id, Dims3 inner) { return CandidateBox{id, inner, inner.volume()}; }

std::vector<double> BoxSet::volumes() const {
  std::vector<double> v;
  v.reserve(boxes.size());
  for (const auto& b : boxes) v.push_back(b.volume);
  return v;
}

std::optional<std::size_t> BoxSet::index_of(Id id) const {
  for (std::size_t j = 0; j < boxes.size(); ++j) {
    if (boxes[j].id == id) return j;
  }
  return std::nullopt;
}

std::vector<std::size_t> BoxSet::indices_of(std::span<const Id> ids) const {
  std::unordered_map<Id, std::size_t> where;
  for (std::size_t j = 0; j < boxes.size(); ++j) where.emplace(boxes[j].id, j);
  std::vector<std::size_t> out;
  std::unordered_set<Id> seen;
  for (Id id : ids) {
    auto it = where.find(id);
    if (it == where.end()) throw ValidationError("unknown box id " + std::to_string(id));
    if (!seen.insert(id).second) throw ValidationError("box id listed twice: " + std::to_string(id));
    out.push_back(it->second);
  }
  return out;
}

BoxSet make_box_set(std::vector<CandidateBox> boxes) {
  std::unordered_set<Id> ids;
  for (auto& b : boxes) {
    if (!b.inner.positive()) {
      throw ValidationError("box " + std::to_string(b.id) + " has a nonpositive dimension");
    }
    if (!ids.insert(b.id).second) throw ValidationError("duplicate box id " + std::to_string(b.id));
    b.volume = b.inner.volume();
  }
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const CandidateBox& l, const CandidateBox& r) { return l.volume < r.volume; });
  return BoxSet{std::move(boxes), {}};
}

std::size_t search_sorted_first(std::span<const double> values, double w) {
  return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), w) - values.begin());
}

namespace {

Dims3 read_dims(const std::string& path, const csv::Row& row, std::size_t first) {
  Dims3 d{csv::to_double(path, row, first), csv::to_double(path, row, first + 1),
          csv::to_double(path, row, first + 2)};
  if (!d.positive()) throw ValidationError(path + ":" + std::to_string(row.line) + ": nonpositive dimension");
  return d;
}

std::optional<std::size_t> column(const std::optional<std::vector<std::string>>& header,
                                  std::initializer_list<const char*> names) {
  if (!header) return std::nullopt;
  for (std::size_t i = 0; i < header->size(); ++i) {
    for (const char* n : names) {
      if ((*header)[i] == n) return i;
    }
  }
  return std::nullopt;
}

bool read_flag(const std::string& path, const csv::Row& row, std::optional<std::size_t> col) {
  if (!col || *col >= row.fields.size() || row.fields[*col].empty()) return false;
  long long v = csv::to_int(path, row, *col);
  if (v != 0 && v != 1) throw ParseError(path, row.line, "flag must be 0 or 1");
  return v == 1;
}

}  // namespace

BoxSet load_boxes(const std::string& path) {
  auto rows = csv::read_rows(path);
  auto header = csv::take_header(rows);
  std::size_t id_col = column(header, {"box_id", "id"}).value_or(0);
  std::size_t dim_col = column(header, {"dim1", "x"}).value_or(1);
  std::vector<CandidateBox> boxes;
  boxes.reserve(rows.size());
  for (const auto& row : rows) {
    if (row.fields.size() < 4) throw ParseError(path, row.line, "expected box_id,dim1,dim2,dim3");
    Id id = csv::to_int(path, row, id_col);
    boxes.push_back(make_box(id, sort3(read_dims(path, row, dim_col))));
  }
  return make_box_set(std::move(boxes));
}

std::vector<Item> load_items(const std::string& path) {
  auto rows = csv::read_rows(path);
  auto header = csv::take_header(rows);
  std::size_t id_col = column(header, {"item_id", "id"}).value_or(0);
  std::size_t dim_col = column(header, {"dim1"}).value_or(1);
  std::vector<Item> items;
  std::unordered_set<Id> ids;
  for (const auto& row : rows) {
    if (row.fields.size() < 4) throw ParseError(path, row.line, "expected item_id,dim1,dim2,dim3");
    Item it{csv::to_int(path, row, id_col), read_dims(path, row, dim_col)};
    if (!ids.insert(it.id).second) throw ValidationError("duplicate item id " + std::to_string(it.id));
    items.push_back(it);
  }
  return items;
}

std::vector<Shipment> load_shipments(const std::string& path, const std::optional<std::string>& items_path) {
  std::unordered_map<Id, Dims3> catalog;
  if (items_path) {
    for (const auto& it : load_items(*items_path)) catalog.emplace(it.id, it.dims);
  }
  auto rows = csv::read_rows(path);
  auto header = csv::take_header(rows);
  std::size_t sid_col = column(header, {"shipment_id"}).value_or(0);
  std::size_t iid_col = column(header, {"item_id"}).value_or(1);
  std::size_t qty_col = column(header, {"quantity", "qty"}).value_or(2);
  std::size_t dim_col = column(header, {"dim1"}).value_or(3);
  auto ho_col = column(header, {"ho"});
  auto br_col = column(header, {"br"});
  auto fold_col = column(header, {"foldable"});
  if (!header) {
    // Positional extension columns.
    ho_col = 6;
    br_col = 7;
    fold_col = 8;
  }

  std::vector<Shipment> out;
  std::unordered_map<Id, std::size_t> where;
  for (const auto& row : rows) {
    if (row.fields.size() < 3) throw ParseError(path, row.line, "expected shipment_id,item_id,quantity,...");
    Id sid = csv::to_int(path, row, sid_col);
    Id iid = csv::to_int(path, row, iid_col);
    long long qty = csv::to_int(path, row, qty_col);
    if (qty <= 0) throw ValidationError(path + ":" + std::to_string(row.line) + ": quantity must be positive");

    Dims3 dims;
    bool has_dims = row.fields.size() >= dim_col + 3 && !row.fields[dim_col].empty();
    if (has_dims) {
      dims = read_dims(path, row, dim_col);
      auto it = catalog.find(iid);
      if (items_path && it != catalog.end() && !(sort3(it->second) == sort3(dims))) {
        throw ValidationError(path + ":" + std::to_string(row.line) + ": dims disagree with items file for item " +
                              std::to_string(iid));
      }
    } else {
      auto it = catalog.find(iid);
      if (it == catalog.end()) throw ParseError(path, row.line, "no dims and item not in items file");
      dims = it->second;
    }

    bool ho = read_flag(path, row, ho_col);
    bool br = read_flag(path, row, br_col);
    bool foldable = read_flag(path, row, fold_col);
    if (foldable && (ho || br)) {
      throw ValidationError(path + ":" + std::to_string(row.line) + ": foldable items cannot carry ho/br flags");
    }

    auto [it, inserted] = where.emplace(sid, out.size());
    if (inserted) out.push_back(Shipment{sid, {}, {}});
    Shipment& s = out[it->second];
    for (long long q = 0; q < qty; ++q) {
      if (foldable) {
        s.foldables.push_back(FoldableItem{dims, iid});
      } else {
        s.cartons.push_back(Carton{dims, ho, br, iid});
      }
    }
  }
  return out;
}

void write_boxes(const std::string& path, const BoxSet& boxes) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out.precision(17);
  out << "box_id,dim1,dim2,dim3\n";
  for (const auto& b : boxes.boxes) {
    out << b.id << ',' << b.inner.a << ',' << b.inner.b << ',' << b.inner.c << '\n';
  }
}

void write_shipments(const std::string& path, std::span<const Shipment> shipments) {
  bool ext = false;
  for (const auto& s : shipments) {
    if (!s.foldables.empty() || s.height_oriented_count() > 0 || s.bottom_resting_count() > 0) ext = true;
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out.precision(17);
  out << "shipment_id,item_id,quantity,dim1,dim2,dim3" << (ext ? ",ho,br,foldable" : "") << '\n';

  struct Key {
    Id item;
    Dims3 dims;
    bool ho, br, fold;
    bool operator==(const Key&) const = default;
  };
  auto emit = [&](Id sid, const Key& k, std::size_t qty) {
    out << sid << ',' << k.item << ',' << qty << ',' << k.dims.a << ',' << k.dims.b << ',' << k.dims.c;
    if (ext) out << ',' << int(k.ho) << ',' << int(k.br) << ',' << int(k.fold);
    out << '\n';
  };
  for (const auto& s : shipments) {
    std::vector<Key> keys;
    for (const auto& c : s.cartons) keys.push_back(Key{c.item_id, c.dims, c.height_oriented, c.bottom_resting, false});
    for (const auto& f : s.foldables) keys.push_back(Key{f.item_id, f.dims, false, false, true});
    for (std::size_t i = 0; i < keys.size();) {
      std::size_t j = i;
      while (j < keys.size() && keys[j] == keys[i]) ++j;
      emit(s.id, keys[i], j - i);
      i = j;
    }
  }
}

std::vector<CandidateBox> box_grid(int x_lo, int x_hi, int y_lo, int y_hi, int z_lo, int z_hi, int step) {
  if (step <= 0) throw ValidationError("grid step must be positive");
  std::vector<CandidateBox> out;
  Id id = 1;
  for (int x = x_lo; x <= x_hi; x += step) {
    for (int y = y_lo; y <= y_hi && y <= x; y += step) {
      for (int z = z_lo; z <= z_hi && z <= y; z += step) {
        out.push_back(make_box(id++, Dims3{double(x), double(y), double(z)}));
      }
    }
  }
  return out;
}

}  // namespace boxsuite

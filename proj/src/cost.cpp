#include "boxsuite/cost.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "boxsuite/error.hpp"
#include "csv.hpp"
#include "parallel.hpp"

namespace boxsuite {

std::string to_string(CostModelKind k) {
  switch (k) {
    case CostModelKind::InnerVolume: return "inner-volume";
    case CostModelKind::OuterVolume: return "outer-volume";
    case CostModelKind::MaterialWeight: return "material-weight";
    case CostModelKind::ExternalTable: return "table";
  }
  return "?";
}

CostModel CostModel::inner_volume() { return CostModel{}; }

CostModel CostModel::box_table(CostModelKind kind, std::unordered_map<Id, double> values) {
  if (kind != CostModelKind::OuterVolume && kind != CostModelKind::MaterialWeight) {
    throw std::invalid_argument("box tables hold outer volume or material weight");
  }
  CostModel m;
  m.kind_ = kind;
  m.box_values_ = std::move(values);
  return m;
}

CostModel CostModel::box_table(CostModelKind kind, const std::string& path) {
  auto rows = csv::read_rows(path);
  csv::take_header(rows);
  std::unordered_map<Id, double> values;
  for (const auto& row : rows) {
    if (row.fields.size() < 2) throw ParseError(path, row.line, "expected box_id,value");
    Id id = csv::to_int(path, row, 0);
    if (!values.emplace(id, csv::to_double(path, row, 1)).second) {
      throw ValidationError(path + ": box id listed twice: " + std::to_string(id));
    }
  }
  CostModel m = box_table(kind, std::move(values));
  m.source_ = path;
  return m;
}

CostModel CostModel::external_table(std::map<std::pair<Id, Id>, double> costs) {
  CostModel m;
  m.kind_ = CostModelKind::ExternalTable;
  m.pair_costs_ = std::move(costs);
  return m;
}

CostModel CostModel::external_table(const std::string& path) {
  auto rows = csv::read_rows(path);
  csv::take_header(rows);
  std::map<std::pair<Id, Id>, double> costs;
  for (const auto& row : rows) {
    if (row.fields.size() < 3) throw ParseError(path, row.line, "expected shipment_id,box_id,cost");
    auto key = std::make_pair(Id(csv::to_int(path, row, 0)), Id(csv::to_int(path, row, 1)));
    if (!costs.emplace(key, csv::to_double(path, row, 2)).second) {
      throw ValidationError(path + ": pair listed twice at line " + std::to_string(row.line));
    }
  }
  CostModel m = external_table(std::move(costs));
  m.source_ = path;
  return m;
}

double CostModel::cost(const Shipment& shipment, const CandidateBox& box) const {
  switch (kind_) {
    case CostModelKind::InnerVolume:
      return box.volume;
    case CostModelKind::OuterVolume:
    case CostModelKind::MaterialWeight: {
      auto it = box_values_.find(box.id);
      if (it == box_values_.end()) throw ValidationError("no " + to_string(kind_) + " value for box " + std::to_string(box.id));
      return it->second;
    }
    case CostModelKind::ExternalTable: {
      auto it = pair_costs_.find({shipment.id, box.id});
      if (it == pair_costs_.end()) {
        throw ValidationError("no cost for shipment " + std::to_string(shipment.id) + " in box " + std::to_string(box.id));
      }
      return it->second;
    }
  }
  return 0.0;
}

std::string CostModel::id() const {
  std::string s = to_string(kind_);
  if (!source_.empty()) s += ":" + source_;
  return s;
}

CostMatrix build_cost_matrix(const PackableSet& packables, std::span<const Shipment> shipments, const BoxSet& boxes,
                             std::span<const std::size_t> locked, const CostModel& model, std::size_t threads) {
  const std::size_t J = boxes.size();
  std::unordered_set<std::size_t> seen;
  for (std::size_t t : locked) {
    if (t >= J) throw ValidationError("locked box index out of range");
    if (!seen.insert(t).second) throw ValidationError("locked box listed twice: " + std::to_string(boxes.boxes[t].id));
  }

  CostMatrix c;
  c.real_rows = packables.size();
  c.fake_rows = locked.size();
  c.cols = J;
  c.locked.assign(locked.begin(), locked.end());
  c.model_id = model.id();
  c.values.assign(c.rows() * J, 0.0);

  // Fitting costs first; everything else becomes Gamma below.
  std::vector<double> row_max(c.real_rows, 0.0);
  detail::parallel_for(c.real_rows, threads, [&](std::size_t t, std::size_t) {
    const Shipment& s = shipments[packables.shipments[t]];
    if (packables.boxes[t].empty()) throw ValidationError("packable shipment " + std::to_string(s.id) + " has no box");
    for (std::size_t j : packables.boxes[t]) {
      double v = model.cost(s, boxes.boxes[j]);
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("cost model gave " + std::to_string(v) + " for shipment " + std::to_string(s.id) +
                              " in box " + std::to_string(boxes.boxes[j].id));
      }
      c.values[t * J + j] = v;
      row_max[t] = std::max(row_max[t], v);
    }
  });
  double total = 0.0;
  for (double m : row_max) total += m;
  c.gamma = total + 1.0;

  for (std::size_t t = 0; t < c.real_rows; ++t) {
    std::vector<char> fits(J, 0);
    for (std::size_t j : packables.boxes[t]) {
      fits[j] = 1;
      if (c.values[t * J + j] >= c.gamma) throw ValidationError("cost model produced a cost at or above the penalty");
    }
    for (std::size_t j = 0; j < J; ++j) {
      if (!fits[j]) c.values[t * J + j] = c.gamma;
    }
  }
  for (std::size_t r = 0; r < c.fake_rows; ++r) {
    double* row = c.values.data() + (c.real_rows + r) * J;
    std::fill(row, row + J, c.gamma);
    row[locked[r]] = 0.0;
  }
  return c;
}

void export_cost_matrix(const std::string& path, const CostMatrix& c, const PackableSet& packables,
                        std::span<const Shipment> shipments, const BoxSet& boxes) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out.precision(17);
  out << "row";
  for (const auto& b : boxes.boxes) out << ',' << b.id;
  out << '\n';
  for (std::size_t i = 0; i < c.rows(); ++i) {
    if (i < c.real_rows) {
      out << shipments[packables.shipments[i]].id;
    } else {
      out << "fake" << boxes.boxes[c.locked[i - c.real_rows]].id;
    }
    for (double v : c.row(i)) out << ',' << v;
    out << '\n';
  }
  nlohmann::json m;
  m["gamma"] = c.gamma;
  m["k"] = c.fake_rows;
  m["real_rows"] = c.real_rows;
  m["cols"] = c.cols;
  nlohmann::json t = nlohmann::json::array();
  for (std::size_t j : c.locked) t.push_back(boxes.boxes[j].id);
  m["locked_box_ids"] = t;
  m["locked_indices"] = c.locked;
  m["model"] = c.model_id;
  std::ofstream mf(path + ".manifest.json");
  if (!mf) throw ValidationError("cannot write " + path + ".manifest.json");
  mf << m.dump(2) << '\n';
}

CostMatrix import_cost_matrix(const std::string& path) {
  std::ifstream mf(path + ".manifest.json");
  if (!mf) throw ValidationError("missing " + path + ".manifest.json");
  nlohmann::json m;
  try {
    mf >> m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ".manifest.json: " + e.what());
  }
  CostMatrix c;
  c.gamma = m.at("gamma").get<double>();
  c.fake_rows = m.at("k").get<std::size_t>();
  c.real_rows = m.at("real_rows").get<std::size_t>();
  c.cols = m.at("cols").get<std::size_t>();
  c.locked = m.at("locked_indices").get<std::vector<std::size_t>>();
  c.model_id = m.at("model").get<std::string>();

  auto rows = csv::read_rows(path);
  if (!rows.empty()) rows.erase(rows.begin());  // header of box ids
  if (rows.size() != c.rows()) throw ValidationError(path + ": row count does not match manifest");
  c.values.reserve(c.rows() * c.cols);
  for (const auto& row : rows) {
    if (row.fields.size() != c.cols + 1) throw ParseError(path, row.line, "wrong number of columns");
    for (std::size_t j = 0; j < c.cols; ++j) c.values.push_back(csv::to_double(path, row, j + 1));
  }
  return c;
}

}  // namespace boxsuite

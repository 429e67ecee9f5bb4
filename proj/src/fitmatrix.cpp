#include "boxsuite/fitmatrix.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_map>

#include "boxsuite/error.hpp"
#include "csv.hpp"
#include "parallel.hpp"

namespace boxsuite {

NestSets compute_nest_sets(const BoxSet& boxes) {
  const std::size_t J = boxes.size();
  NestSets n;
  n.free.resize(J);
  n.ho.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    const Dims3 sj = sort3(boxes.boxes[j].inner);
    const Dims3 hj = sort2(boxes.boxes[j].inner);
    n.free[j].push_back(j);
    n.ho[j].push_back(j);
    for (std::size_t k = j + 1; k < J; ++k) {
      const Dims3& inner = boxes.boxes[k].inner;
      if (leq3(sj, sort3(inner))) n.free[j].push_back(k);
      if (leq3(hj, sort2(inner))) n.ho[j].push_back(k);
    }
  }
  return n;
}

bool FitMatrix::test(std::size_t i, std::size_t j) const {
  const auto& r = rows[i];
  return std::binary_search(r.begin(), r.end(), j);
}

std::size_t FitMatrix::nnz() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.size();
  return n;
}

PackableSet packable_set(const FitMatrix& b) {
  PackableSet w;
  for (std::size_t i = 0; i < b.rows.size(); ++i) {
    if (b.rows[i].empty()) continue;
    w.shipments.push_back(i);
    w.boxes.push_back(b.rows[i]);
  }
  return w;
}

namespace {

// The three ways to stand a box on one of its faces, keeping the other two
// dims in order.
std::vector<Dims3> floor_choices(const Dims3& box) {
  std::vector<Dims3> out{box};
  for (Dims3 d : {Dims3{box.a, box.c, box.b}, Dims3{box.b, box.c, box.a}}) {
    if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
  }
  return out;
}

bool keyed_fit(std::span<const Dims3> keyed, const Dims3& box_keyed, double eps) {
  return std::all_of(keyed.begin(), keyed.end(), [&](const Dims3& d) { return leq3(d, box_keyed, eps); });
}

// Every pair and every triple must fit on its own.
bool subsets_fit(const FitProblem& p) {
  const std::size_t n = p.cartons.size();
  FitProblem sub{{}, p.box, p.rules};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      sub.cartons = {p.cartons[i], p.cartons[k]};
      if (!fits_exact_small(sub).fits()) return false;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      for (std::size_t l = k + 1; l < n; ++l) {
        sub.cartons = {p.cartons[i], p.cartons[k], p.cartons[l]};
        if (!fits_exact_small(sub).fits()) return false;
      }
    }
  }
  return true;
}

}  // namespace

FitOutcome shipment_fits(const Shipment& shipment, const CandidateBox& box, const FitMatrixConfig& cfg,
                         FitScanStats* stats) {
  FitScanStats local;
  FitScanStats& st = stats ? *stats : local;
  const double eps = default_eps(box.inner);
  const double v = liquid_volume(shipment);
  if (v > box.volume * (1.0 + 1e-12)) {
    ++st.failed_necessary;
    return FitOutcome::NoFit;
  }
  const auto& cartons = shipment.cartons;
  if (cartons.empty()) {
    ++st.liquid_only;
    return FitOutcome::Fit;
  }
  for (const auto& c : cartons) {
    if (!fits_single(c, box.inner, cfg.rules.enforce_ho && c.height_oriented, eps)) {
      ++st.failed_necessary;
      return FitOutcome::NoFit;
    }
  }
  if (cartons.size() == 1) {
    ++st.single;
    return FitOutcome::Fit;
  }

  const StackKeys keys = stacking_keys(cartons, cfg.rules);
  const Dims3 bk = box_key(box.inner, keys.height_oriented);
  if (keyed_fit(keys.cartons, bk, eps) && fits_stacking(keys.cartons, bk, keys.bottom_resting, eps)) {
    ++st.stacking;
    return FitOutcome::Fit;
  }

  // Without HO cartons the box may stand on any face, which keeps
  // rotation-based nesting sound when BR cartons are present.
  std::vector<Dims3> floors{box.inner};
  if (keys.height_oriented == 0 && keys.bottom_resting > 0) floors = floor_choices(box.inner);

  bool timed_out = false;
  for (const Dims3& inner : floors) {
    FitProblem p{cartons, inner, cfg.rules};
    if (cartons.size() <= 3) {
      ++st.exact_small;
      if (fits_exact_small(p).fits()) return FitOutcome::Fit;
      continue;
    }
    if (cfg.prescreen_pairs_triples && !subsets_fit(p)) {
      ++st.prescreen_rejects;
      continue;
    }
    ++st.solver_calls;
    FitVerdict verdict = solve_fit(p, cfg.solver);
    switch (verdict.outcome) {
      case FitOutcome::Fit:
        ++st.solver_fits;
        return FitOutcome::Fit;
      case FitOutcome::NoFit:
        ++st.solver_nofits;
        break;
      case FitOutcome::TimedOut:
        ++st.solver_timeouts;
        timed_out = true;
        break;
    }
  }
  return timed_out ? FitOutcome::TimedOut : FitOutcome::NoFit;
}

namespace {

void accumulate(FitScanStats& into, const FitScanStats& s) {
  into.liquid_only += s.liquid_only;
  into.skipped_by_nesting += s.skipped_by_nesting;
  into.reused += s.reused;
  into.failed_necessary += s.failed_necessary;
  into.single += s.single;
  into.stacking += s.stacking;
  into.exact_small += s.exact_small;
  into.prescreen_rejects += s.prescreen_rejects;
  into.solver_calls += s.solver_calls;
  into.solver_fits += s.solver_fits;
  into.solver_nofits += s.solver_nofits;
  into.solver_timeouts += s.solver_timeouts;
}

using DimsKey = std::array<double, 3>;

DimsKey dims_key(const Dims3& d) {
  Dims3 s = sort3(d);
  return {s.a, s.b, s.c};
}

}  // namespace

FitMatrixResult compute_fit_matrix(std::span<const Shipment> shipments, const BoxSet& boxes, const NestSets& nests,
                                   const FitMatrixConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  const std::size_t I = shipments.size();
  const std::size_t J = boxes.size();
  if (nests.free.size() != J || nests.ho.size() != J) throw std::invalid_argument("nest sets do not match boxes");

  // Prior column per box, when the sorted dims were evaluated before.
  std::vector<std::optional<std::size_t>> prior_col(J);
  if (cfg.prior && cfg.prior->matrix && cfg.prior->boxes) {
    if (cfg.prior->matrix->num_shipments != I) throw ValidationError("prior fit matrix has a different shipment count");
    const auto& pr = cfg.prior->rules;
    if (pr.enforce_ho == cfg.rules.enforce_ho && pr.enforce_br == cfg.rules.enforce_br) {
      std::map<DimsKey, std::size_t> where;
      for (std::size_t k = 0; k < cfg.prior->boxes->size(); ++k) {
        where.emplace(dims_key(cfg.prior->boxes->boxes[k].inner), k);
      }
      for (std::size_t j = 0; j < J; ++j) {
        auto it = where.find(dims_key(boxes.boxes[j].inner));
        if (it != where.end()) prior_col[j] = it->second;
      }
    }
  }

  const std::vector<double> volumes = boxes.volumes();
  FitMatrixResult res;
  res.matrix.num_shipments = I;
  res.matrix.num_boxes = J;
  res.matrix.rows.resize(I);
  std::vector<std::vector<TimeoutRecord>> timeouts(I);
  std::vector<FitScanStats> worker_stats(detail::resolve_threads(cfg.threads));

  detail::parallel_for(I, cfg.threads, [&](std::size_t i, std::size_t worker) {
    FitScanStats& st = worker_stats[worker];
    const Shipment& s = shipments[i];
    const double v = liquid_volume(s);
    std::size_t j0 = search_sorted_first(volumes, v * (1.0 - 1e-12));
    std::vector<char> row(J, 0);
    if (s.cartons.empty()) {
      for (std::size_t j = j0; j < J; ++j) row[j] = 1;
      st.liquid_only += J - j0;
    } else {
      const bool ho = cfg.rules.enforce_ho && s.height_oriented_count() > 0;
      const auto& theta = ho ? nests.ho : nests.free;
      for (std::size_t j = j0; j < J; ++j) {
        if (row[j]) {
          ++st.skipped_by_nesting;
          continue;
        }
        FitOutcome out;
        if (prior_col[j]) {
          ++st.reused;
          out = cfg.prior->matrix->test(i, *prior_col[j]) ? FitOutcome::Fit : FitOutcome::NoFit;
        } else {
          out = shipment_fits(s, boxes.boxes[j], cfg, &st);
        }
        if (out == FitOutcome::Fit) {
          for (std::size_t k : theta[j]) row[k] = 1;
        } else if (out == FitOutcome::TimedOut) {
          timeouts[i].push_back(TimeoutRecord{s.id, boxes.boxes[j].id});
        }
      }
    }
    auto& out = res.matrix.rows[i];
    for (std::size_t j = 0; j < J; ++j) {
      if (row[j]) out.push_back(j);
    }
  });

  for (const auto& st : worker_stats) accumulate(res.stats, st);
  for (auto& t : timeouts) res.timeouts.insert(res.timeouts.end(), t.begin(), t.end());
  res.packable = packable_set(res.matrix);
  res.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::string config_hash(const FitMatrixConfig& cfg, std::span<const Shipment> shipments, const BoxSet& boxes) {
  std::ostringstream os;
  os.precision(17);
  os << "t=" << cfg.solver.time_limit.count() << ";si=" << cfg.solver.use_identical_symmetry
     << ";so=" << cfg.solver.use_orthant_symmetry << ";ho=" << cfg.rules.enforce_ho << ";br=" << cfg.rules.enforce_br
     << ";ps=" << cfg.prescreen_pairs_triples << ";";
  for (const auto& b : boxes.boxes) os << b.id << ':' << b.inner.a << ',' << b.inner.b << ',' << b.inner.c << ';';
  for (const auto& s : shipments) {
    os << 's' << s.id << '[';
    for (const auto& c : s.cartons) {
      os << c.dims.a << ',' << c.dims.b << ',' << c.dims.c << ',' << c.height_oriented << c.bottom_resting << ';';
    }
    for (const auto& f : s.foldables) os << 'f' << f.dims.a << ',' << f.dims.b << ',' << f.dims.c << ';';
    os << ']';
  }
  std::ostringstream hex;
  hex << std::hex << std::hash<std::string>{}(os.str());
  return hex.str();
}

void export_fit_matrix(const std::string& path, const FitMatrixResult& result, std::span<const Shipment> shipments,
                       const BoxSet& boxes, const FitMatrixConfig& cfg) {
  if (result.matrix.rows.size() != shipments.size()) throw std::invalid_argument("fit matrix does not match shipments");
  {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "shipment_id,box_id\n";
    for (std::size_t i = 0; i < shipments.size(); ++i) {
      for (std::size_t j : result.matrix.rows[i]) out << shipments[i].id << ',' << boxes.boxes[j].id << '\n';
    }
  }
  {
    std::ofstream out(path + ".timeouts.csv");
    if (!out) throw ValidationError("cannot write " + path + ".timeouts.csv");
    out << "shipment_id,box_id\n";
    for (const auto& t : result.timeouts) out << t.shipment_id << ',' << t.box_id << '\n';
  }
  const auto& st = result.stats;
  nlohmann::json m;
  m["shipments"] = shipments.size();
  m["boxes"] = boxes.size();
  m["set_bits"] = result.matrix.nnz();
  m["packable"] = result.packable.size();
  m["config_hash"] = config_hash(cfg, shipments, boxes);
  m["time_limit_ms"] = cfg.solver.time_limit.count();
  m["symmetry"] = {{"identical", cfg.solver.use_identical_symmetry}, {"orthant", cfg.solver.use_orthant_symmetry}};
  m["rules"] = {{"enforce_ho", cfg.rules.enforce_ho}, {"enforce_br", cfg.rules.enforce_br}};
  m["prescreen_pairs_triples"] = cfg.prescreen_pairs_triples;
  nlohmann::json tl = nlohmann::json::array();
  for (const auto& t : result.timeouts) tl.push_back({t.shipment_id, t.box_id});
  m["timeouts"] = tl;
  m["stats"] = {{"liquid_only", st.liquid_only},
                {"skipped_by_nesting", st.skipped_by_nesting},
                {"reused", st.reused},
                {"failed_necessary", st.failed_necessary},
                {"single", st.single},
                {"stacking", st.stacking},
                {"exact_small", st.exact_small},
                {"prescreen_rejects", st.prescreen_rejects},
                {"solver_calls", st.solver_calls},
                {"solver_fits", st.solver_fits},
                {"solver_nofits", st.solver_nofits},
                {"solver_timeouts", st.solver_timeouts},
                {"seconds", st.seconds}};
  std::ofstream out(path + ".manifest.json");
  if (!out) throw ValidationError("cannot write " + path + ".manifest.json");
  out << m.dump(2) << '\n';
}

FitMatrix import_fit_matrix(const std::string& path, std::span<const Shipment> shipments, const BoxSet& boxes) {
  std::unordered_map<Id, std::size_t> ship_index;
  for (std::size_t i = 0; i < shipments.size(); ++i) ship_index.emplace(shipments[i].id, i);
  std::unordered_map<Id, std::size_t> box_index;
  for (std::size_t j = 0; j < boxes.size(); ++j) box_index.emplace(boxes.boxes[j].id, j);

  auto rows = csv::read_rows(path);
  csv::take_header(rows);
  FitMatrix b;
  b.num_shipments = shipments.size();
  b.num_boxes = boxes.size();
  b.rows.resize(shipments.size());
  for (const auto& row : rows) {
    if (row.fields.size() < 2) throw ParseError(path, row.line, "expected shipment_id,box_id");
    Id sid = csv::to_int(path, row, 0);
    Id bid = csv::to_int(path, row, 1);
    auto si = ship_index.find(sid);
    if (si == ship_index.end()) throw ValidationError(path + ": unknown shipment id " + std::to_string(sid));
    auto bi = box_index.find(bid);
    if (bi == box_index.end()) throw ValidationError(path + ": unknown box id " + std::to_string(bid));
    b.rows[si->second].push_back(bi->second);
  }
  for (auto& r : b.rows) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  return b;
}

}  // namespace boxsuite

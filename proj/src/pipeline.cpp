#include "boxsuite/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "boxsuite/error.hpp"
#include "parallel.hpp"

namespace boxsuite {

std::string to_string(PMedianMethod m) {
  switch (m) {
    case PMedianMethod::Exact: return "exact";
    case PMedianMethod::Exchange: return "exchange";
    case PMedianMethod::Grasp: return "grasp";
    case PMedianMethod::Lagrangian: return "lagrangian";
  }
  return "?";
}

PMedianMethod parse_method(const std::string& s) {
  if (s == "exact") return PMedianMethod::Exact;
  if (s == "exchange") return PMedianMethod::Exchange;
  if (s == "grasp") return PMedianMethod::Grasp;
  if (s == "lagrangian") return PMedianMethod::Lagrangian;
  throw ValidationError("unknown method '" + s + "' (exact, exchange, grasp, lagrangian)");
}

std::vector<std::size_t> resolve_locks(const RunConfig& run, const BoxSet& boxes) {
  const std::size_t k = run.locked_ids.size();
  if (run.p == 0) throw ValidationError("p must be at least 1");
  if (k >= run.p) {
    throw ValidationError("need fewer locked boxes than p (k = " + std::to_string(k) + ", p = " + std::to_string(run.p) +
                          ")");
  }
  if (run.p >= boxes.size()) {
    throw ValidationError("p must be smaller than the number of candidate boxes (" + std::to_string(boxes.size()) + ")");
  }
  return boxes.indices_of(run.locked_ids);
}

PMedianInstance to_instance(const CostMatrix& c, std::size_t p) { return PMedianInstance(c.rows(), c.cols, p, c.values); }

SolveResult solve_pmedian(const RunConfig& run, const PMedianInstance& inst, std::vector<BoundStep>* trace) {
  switch (run.method) {
    case PMedianMethod::Exact:
      return solve_exact(inst, run.exact);
    case PMedianMethod::Exchange:
      return local_search_interchange(inst, greedy_construct(inst, 0.0, run.grasp.seed));
    case PMedianMethod::Grasp: {
      GraspParams g = run.grasp;
      g.threads = run.threads;
      return solve_grasp(inst, g);
    }
    case PMedianMethod::Lagrangian:
      return lagrangian_bounds(inst, run.lagrangian, trace);
  }
  throw std::logic_error("unhandled method");
}

Recommendation recommend_from_fit(const RunConfig& run, std::span<const Shipment> shipments, const BoxSet& boxes,
                                  const FitMatrix& fit) {
  if (fit.num_shipments != shipments.size() || fit.num_boxes != boxes.size()) {
    throw ValidationError("fit matrix does not match the shipments and boxes");
  }
  const std::vector<std::size_t> locks = resolve_locks(run, boxes);
  Recommendation rec;
  rec.packable = packable_set(fit);
  const CostMatrix c = build_cost_matrix(rec.packable, shipments, boxes, locks, run.cost, run.threads);
  const PMedianInstance inst = to_instance(c, run.p);
  rec.solve = solve_pmedian(run, inst, &rec.bound_trace);
  rec.suite = check_feasible(rec.solve, c.gamma);

  SuiteReport& r = rec.report;
  r.feasible = rec.suite.has_value();
  r.shipments = shipments.size();
  r.packable = rec.packable.size();
  r.cost = rec.solve.cost;
  r.gamma = c.gamma;
  r.lower_bound = rec.solve.lower_bound;
  r.gap = rec.solve.gap;
  r.method = to_string(run.method);
  if (!rec.suite) return rec;

  const Assignment a = extract_assignment(inst, *rec.suite);
  rec.assignment.assign(a.facility.begin(), a.facility.begin() + static_cast<std::ptrdiff_t>(c.real_rows));
  std::map<std::size_t, BoxReportRow> rows;
  for (std::size_t j : *rec.suite) {
    const auto& b = boxes.boxes[j];
    rows[j] = BoxReportRow{b.id, b.inner, b.volume, 0, 0.0, 0.0, 0.0, 0.0};
  }
  for (std::size_t t = 0; t < rec.assignment.size(); ++t) {
    auto& row = rows[rec.assignment[t]];
    ++row.shipments;
    row.liquid_volume += liquid_volume(shipments[rec.packable.shipments[t]]);
    row.shipped_volume += row.inner_volume;
  }
  for (auto& [j, row] : rows) {
    row.pct_shipments = r.packable ? 100.0 * double(row.shipments) / double(r.packable) : 0.0;
    row.pct_void = row.shipped_volume > 0.0 ? 100.0 * (row.shipped_volume - row.liquid_volume) / row.shipped_volume : 0.0;
    r.total_inner_volume += row.shipped_volume;
    r.total_liquid_volume += row.liquid_volume;
    r.rows.push_back(row);
  }
  r.pct_void = r.total_inner_volume > 0.0
                   ? 100.0 * (r.total_inner_volume - r.total_liquid_volume) / r.total_inner_volume
                   : 0.0;
  return rec;
}

Recommendation recommend(const RunConfig& run, std::span<const Shipment> shipments, const BoxSet& boxes) {
  resolve_locks(run, boxes);  // fail before the expensive stage
  const NestSets nests = compute_nest_sets(boxes);
  FitMatrixConfig fcfg = run.fit;
  if (fcfg.threads == 0) fcfg.threads = run.threads;
  FitMatrixResult fit = compute_fit_matrix(shipments, boxes, nests, fcfg);
  Recommendation rec = recommend_from_fit(run, shipments, boxes, fit.matrix);
  rec.timeouts = std::move(fit.timeouts);
  return rec;
}

void write_report_csv(const std::string& path, const SuiteReport& r) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out.precision(12);
  out << "rank,box_id,dim1,dim2,dim3,inner_volume,pct_shipments,pct_void\n";
  for (std::size_t t = 0; t < r.rows.size(); ++t) {
    const auto& row = r.rows[t];
    out << t + 1 << ',' << row.id << ',' << row.inner.a << ',' << row.inner.b << ',' << row.inner.c << ','
        << row.inner_volume << ',' << row.pct_shipments << ',' << row.pct_void << '\n';
  }
}

std::string format_report(const SuiteReport& r) {
  std::ostringstream os;
  if (!r.feasible) {
    os << "There is no feasible solution: every suite of this size leaves a packable shipment or a locked box "
          "uncovered (cost "
       << std::setprecision(12) << r.cost << " >= penalty " << r.gamma << ").\n";
    return os.str();
  }
  auto dims = [](const Dims3& d) {
    std::ostringstream s;
    s << '(' << d.a << ',' << d.b << ',' << d.c << ')';
    return s.str();
  };
  os << std::left << std::setw(4) << "#" << std::setw(10) << "ID" << std::setw(20) << "Inner Dimensions"
     << std::setw(14) << "Inner Volume" << std::setw(34) << "% of Packable Shipments Shipped"
     << "% Liquid Void Volume Shipped\n";
  for (std::size_t t = 0; t < r.rows.size(); ++t) {
    const auto& row = r.rows[t];
    std::ostringstream pct;
    pct << std::fixed << std::setprecision(2) << row.pct_shipments;
    std::ostringstream vd;
    vd << std::fixed << std::setprecision(2) << row.pct_void;
    std::ostringstream vol;
    vol << row.inner_volume;
    os << std::left << std::setw(4) << t + 1 << std::setw(10) << row.id << std::setw(20) << dims(row.inner)
       << std::setw(14) << vol.str() << std::setw(34) << pct.str() << vd.str() << '\n';
  }
  os << std::fixed << std::setprecision(0);
  os << "\nTotal inner volume shipped: " << r.total_inner_volume << "\n";
  os << std::setprecision(2) << "Suite liquid void volume: " << r.pct_void << "%\n";
  os << "Packable shipments: " << r.packable << " of " << r.shipments << "\n";
  os << std::setprecision(0) << "Objective: " << r.cost << " (method " << r.method << ")\n";
  if (r.lower_bound) os << "Lower bound: " << *r.lower_bound << "\n";
  if (r.gap) os << std::setprecision(3) << "Optimality gap: " << 100.0 * *r.gap << "%\n";
  return os.str();
}

Packing pack_into_suite(std::span<const Shipment> shipments, const BoxSet& boxes, std::span<const std::size_t> suite,
                        const CostModel& cost, const FitMatrixConfig& fit) {
  Packing out;
  out.box.assign(shipments.size(), std::nullopt);
  out.cost.assign(shipments.size(), 0.0);
  detail::parallel_for(shipments.size(), fit.threads, [&](std::size_t i, std::size_t) {
    const Shipment& s = shipments[i];
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t j : suite) order.emplace_back(cost.cost(s, boxes.boxes[j]), j);
    std::stable_sort(order.begin(), order.end());
    for (const auto& [c, j] : order) {
      if (shipment_fits(s, boxes.boxes[j], fit) == FitOutcome::Fit) {
        out.box[i] = j;
        out.cost[i] = c;
        return;
      }
    }
  });
  return out;
}

ValidationReport validation_report(std::span<const Shipment> shipments, const BoxSet& boxes,
                                   std::span<const std::size_t> suite, const Packing& packing,
                                   const ValidateConfig& cfg) {
  ValidationReport r;
  r.shipments = shipments.size();
  std::map<std::size_t, std::size_t> where;
  for (std::size_t j : suite) {
    where[j] = r.rows.size();
    ValidationRow row;
    row.id = boxes.boxes[j].id;
    r.rows.push_back(row);
  }
  std::vector<double> inner(suite.size(), 0.0);
  std::vector<double> liquid(suite.size(), 0.0);
  std::vector<double> outer(suite.size(), 0.0);
  for (std::size_t i = 0; i < shipments.size(); ++i) {
    if (!packing.box[i]) {
      ++r.uncovered;
      continue;
    }
    ++r.covered;
    const std::size_t j = *packing.box[i];
    const std::size_t t = where.at(j);
    ++r.rows[t].shipments;
    r.rows[t].cost += packing.cost[i];
    r.total_cost += packing.cost[i];
    inner[t] += boxes.boxes[j].volume;
    liquid[t] += liquid_volume(shipments[i]);
    if (cfg.outer_volume) {
      auto it = cfg.outer_volume->find(boxes.boxes[j].id);
      if (it == cfg.outer_volume->end()) {
        throw ValidationError("no outer volume for box " + std::to_string(boxes.boxes[j].id));
      }
      outer[t] += it->second;
    }
  }
  const double total_outer = std::accumulate(outer.begin(), outer.end(), 0.0);
  double all_inner = 0.0;
  double all_liquid = 0.0;
  for (std::size_t t = 0; t < r.rows.size(); ++t) {
    auto& row = r.rows[t];
    row.pct_shipments = r.covered ? 100.0 * double(row.shipments) / double(r.covered) : 0.0;
    row.pct_cost = r.total_cost > 0.0 ? 100.0 * row.cost / r.total_cost : 0.0;
    if (cfg.outer_volume) row.pct_outer_volume = total_outer > 0.0 ? 100.0 * outer[t] / total_outer : 0.0;
    row.pct_void = inner[t] > 0.0 ? 100.0 * (inner[t] - liquid[t]) / inner[t] : 0.0;
    all_inner += inner[t];
    all_liquid += liquid[t];
  }
  r.pct_void = all_inner > 0.0 ? 100.0 * (all_inner - all_liquid) / all_inner : 0.0;
  return r;
}

namespace {

double relative_divergence(double a, double b) {
  double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

}  // namespace

ValidationComparison validate(std::span<const std::size_t> suite, std::span<const Shipment> shipments_a,
                              std::span<const Shipment> shipments_b, const BoxSet& boxes, const CostModel& cost,
                              const FitMatrixConfig& fit, const ValidateConfig& cfg) {
  if (suite.empty()) throw ValidationError("validation needs a nonempty suite");
  ValidationComparison out;
  out.a = validation_report(shipments_a, boxes, suite, pack_into_suite(shipments_a, boxes, suite, cost, fit), cfg);
  out.b = validation_report(shipments_b, boxes, suite, pack_into_suite(shipments_b, boxes, suite, cost, fit), cfg);
  auto check = [&](Id id, const std::string& metric, double a, double b) {
    double rel = relative_divergence(a, b);
    if (rel > cfg.divergence_threshold) out.flagged.push_back(Divergence{id, metric, a, b, rel});
  };
  for (std::size_t t = 0; t < out.a.rows.size(); ++t) {
    const auto& ra = out.a.rows[t];
    const auto& rb = out.b.rows[t];
    check(ra.id, "pct_shipments", ra.pct_shipments, rb.pct_shipments);
    check(ra.id, "pct_cost", ra.pct_cost, rb.pct_cost);
    check(ra.id, "pct_void", ra.pct_void, rb.pct_void);
    if (ra.pct_outer_volume && rb.pct_outer_volume) {
      check(ra.id, "pct_outer_volume", *ra.pct_outer_volume, *rb.pct_outer_volume);
    }
  }
  check(0, "suite_pct_void", out.a.pct_void, out.b.pct_void);
  return out;
}

std::vector<SuiteComparisonRow> compare_suites(std::span<const std::vector<std::size_t>> suites,
                                               std::span<const std::string> labels,
                                               std::span<const Shipment> shipments, const BoxSet& boxes,
                                               const CostModel& cost, const FitMatrixConfig& fit) {
  std::vector<SuiteComparisonRow> rows;
  for (std::size_t q = 0; q < suites.size(); ++q) {
    if (suites[q].empty()) throw ValidationError("cannot compare an empty suite");
    Packing pk = pack_into_suite(shipments, boxes, suites[q], cost, fit);
    SuiteComparisonRow row;
    row.label = q < labels.size() ? labels[q] : "suite" + std::to_string(q);
    for (std::size_t j : suites[q]) row.box_ids.push_back(boxes.boxes[j].id);
    for (std::size_t i = 0; i < shipments.size(); ++i) {
      if (pk.box[i]) {
        row.total_cost += pk.cost[i];
      } else {
        ++row.uncovered;
      }
    }
    row.feasible = row.uncovered == 0;
    rows.push_back(std::move(row));
  }
  if (!rows.empty() && rows[0].feasible) {
    for (auto& row : rows) {
      if (!row.feasible) continue;
      row.reduction_pct = row.total_cost > 0.0 ? 100.0 * (row.total_cost - rows[0].total_cost) / row.total_cost : 0.0;
    }
  }
  return rows;
}

BoxSet finetune_candidates(std::span<const std::size_t> suite, std::span<const std::size_t> locked, const BoxSet& boxes,
                           std::span<const double> deltas) {
  if (suite.empty()) throw ValidationError("fine-tuning needs a nonempty suite");
  for (double d : deltas) {
    if (!std::isfinite(d)) throw ValidationError("fine-tuning deltas must be finite");
  }
  using Key = std::array<double, 3>;
  auto key = [](const Dims3& d) {
    Dims3 s = sort3(d);
    return Key{s.a, s.b, s.c};
  };
  std::map<Key, Id> existing;
  Id next_id = 0;
  for (const auto& b : boxes.boxes) {
    existing.emplace(key(b.inner), b.id);
    next_id = std::max(next_id, b.id);
  }
  ++next_id;

  std::vector<CandidateBox> out;
  std::map<Key, std::size_t> taken;
  std::vector<Id> locked_ids;
  for (std::size_t t : locked) {
    const auto& b = boxes.boxes.at(t);
    locked_ids.push_back(b.id);
    taken.emplace(key(b.inner), out.size());
    out.push_back(b);
  }
  const std::unordered_set<std::size_t> locked_set(locked.begin(), locked.end());
  for (std::size_t j : suite) {
    if (locked_set.count(j)) continue;
    const Dims3 base = boxes.boxes.at(j).inner;
    for (double da : deltas) {
      for (double db : deltas) {
        for (double dc : deltas) {
          Dims3 d{base.a + da, base.b + db, base.c + dc};
          if (!d.positive()) continue;
          Dims3 s = sort3(d);
          Key k = key(s);
          if (taken.count(k)) continue;
          auto it = existing.find(k);
          Id id = it != existing.end() ? it->second : next_id++;
          taken.emplace(k, out.size());
          out.push_back(make_box(id, s));
        }
      }
    }
  }
  BoxSet result = make_box_set(std::move(out));
  result.locked = result.indices_of(locked_ids);
  return result;
}

}  // namespace boxsuite

// boxsuite: fit shipments into candidate boxes and recommend a box suite.
//
// Exit codes: 0 success (an infeasible suite is a valid outcome), 2 usage or
// input validation error, 3 internal error.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "boxsuite/cost.hpp"
#include "boxsuite/error.hpp"
#include "boxsuite/fitmatrix.hpp"
#include "boxsuite/fitting.hpp"
#include "boxsuite/model.hpp"
#include "boxsuite/pipeline.hpp"
#include "boxsuite/pmedian.hpp"

namespace fs = std::filesystem;
using namespace boxsuite;

namespace {

struct FitOptions {
  long long time_limit_ms = 5000;
  bool no_sym_identical = false;
  bool no_sym_orthant = false;
  bool no_ho = false;
  bool no_br = false;
  bool no_prescreen = false;
};

void add_fit_options(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("--time-limit-ms", o.time_limit_ms, "Per-solve time limit; a timeout counts as no fit")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_flag("--no-sym-identical", o.no_sym_identical, "Disable identical-carton symmetry breaking");
  cmd->add_flag("--no-sym-orthant", o.no_sym_orthant, "Disable first-orthant symmetry breaking");
  cmd->add_flag("--no-ho", o.no_ho, "Ignore height-oriented flags");
  cmd->add_flag("--no-br", o.no_br, "Ignore bottom-resting flags");
  cmd->add_flag("--no-prescreen", o.no_prescreen, "Skip the pair/triple pre-screen for 4+ cartons");
}

FitMatrixConfig make_fit_config(const FitOptions& o, std::size_t threads) {
  FitMatrixConfig cfg;
  cfg.solver.time_limit = std::chrono::milliseconds(o.time_limit_ms);
  cfg.solver.use_identical_symmetry = !o.no_sym_identical;
  cfg.solver.use_orthant_symmetry = !o.no_sym_orthant;
  cfg.rules.enforce_ho = !o.no_ho;
  cfg.rules.enforce_br = !o.no_br;
  cfg.prescreen_pairs_triples = !o.no_prescreen;
  cfg.threads = threads;
  return cfg;
}

// inner-volume | outer-volume:F | weight:F | table:F
CostModel parse_cost(const std::string& spec) {
  if (spec == "inner-volume") return CostModel::inner_volume();
  auto colon = spec.find(':');
  if (colon == std::string::npos) throw ValidationError("unknown cost model '" + spec + "'");
  const std::string kind = spec.substr(0, colon);
  const std::string path = spec.substr(colon + 1);
  if (kind == "table") return CostModel::external_table(path);
  if (kind == "outer-volume") return CostModel::box_table(CostModelKind::OuterVolume, path);
  if (kind == "weight") return CostModel::box_table(CostModelKind::MaterialWeight, path);
  throw ValidationError("unknown cost model '" + spec + "'");
}

std::size_t resolve_threads(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("BOXSUITE_THREADS")) {
    try {
      long long v = std::stoll(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ValidationError("BOXSUITE_THREADS must be a positive integer");
  }
  return 0;
}

std::vector<Shipment> load_shipments_opt(const std::string& path, const std::string& items) {
  return load_shipments(path, items.empty() ? std::nullopt : std::optional<std::string>(items));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out.precision(12);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Box suite recommendation: fitting, p-median solves, validation and fine-tuning"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from an INI/TOML file");
  std::size_t threads_flag = 0;
  app.add_option("--threads", threads_flag, "Worker threads (default: $BOXSUITE_THREADS, else all cores)");

  // fit
  std::string boxes_path;
  std::string shipments_path;
  std::string items_path;
  std::string out_path;
  std::string prior_fit;
  std::string prior_boxes;
  FitOptions fit_opts;
  auto* fit = app.add_subcommand("fit", "Compute the shipment x box fit matrix");
  fit->add_option("--boxes", boxes_path, "Candidate boxes CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--shipments", shipments_path, "Shipments CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--items", items_path, "Items CSV")->check(CLI::ExistingFile);
  fit->add_option("--out", out_path, "Fit CSV to write (manifest and timeouts alongside)")->required();
  fit->add_option("--prior-fit", prior_fit, "Earlier fit CSV whose columns are reused")->check(CLI::ExistingFile);
  fit->add_option("--prior-boxes", prior_boxes, "Boxes CSV the earlier fit was computed for")
      ->check(CLI::ExistingFile);
  add_fit_options(fit, fit_opts);

  // recommend
  std::string fit_path;
  std::size_t p = 0;
  std::vector<Id> lock_ids;
  std::string cost_spec = "inner-volume";
  std::string method = "grasp";
  GraspParams grasp;
  LagrangianParams lagr;
  std::string out_dir;
  auto* rec = app.add_subcommand("recommend", "Recommend a suite of p boxes");
  rec->add_option("--fit", fit_path, "Fit CSV from `fit` (computed here when omitted)")->check(CLI::ExistingFile);
  rec->add_option("--boxes", boxes_path, "Candidate boxes CSV")->required()->check(CLI::ExistingFile);
  rec->add_option("--shipments", shipments_path, "Shipments CSV")->required()->check(CLI::ExistingFile);
  rec->add_option("--items", items_path, "Items CSV")->check(CLI::ExistingFile);
  rec->add_option("-p", p, "Suite size")->required()->check(CLI::PositiveNumber);
  rec->add_option("--lock", lock_ids, "Box ids that must be in the suite")->delimiter(',');
  rec->add_option("--cost", cost_spec, "inner-volume | outer-volume:F | weight:F | table:F")->capture_default_str();
  rec->add_option("--method", method, "exact | exchange | grasp | lagrangian")
      ->check(CLI::IsMember({"exact", "exchange", "grasp", "lagrangian"}))
      ->capture_default_str();
  rec->add_option("--graspit", grasp.iterations, "GRASP iterations")->capture_default_str();
  rec->add_option("--elite", grasp.elite_size, "GRASP elite pool size")->capture_default_str();
  rec->add_option("--alpha", grasp.rcl_alpha, "GRASP candidate-list threshold in [0,1]")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  rec->add_option("--seed", grasp.seed, "Random seed")->capture_default_str();
  rec->add_option("--lagrangian-iters", lagr.max_iters, "Subgradient iterations")->capture_default_str();
  rec->add_option("--target-gap", lagr.target_gap, "Stop the subgradient loop at this relative gap")
      ->capture_default_str();
  rec->add_flag("--force-facilities", lagr.force_facilities, "Fix facilities in or out during the subgradient loop");
  rec->add_option("--out", out_dir, "Output directory")->required();
  add_fit_options(rec, fit_opts);

  // validate
  std::vector<Id> suite_ids;
  std::string shipments_b;
  std::string outer_path;
  double threshold = 0.10;
  auto* val = app.add_subcommand("validate", "Pack two shipment sets into a suite and compare the metrics");
  val->add_option("--boxes", boxes_path, "Candidate boxes CSV")->required()->check(CLI::ExistingFile);
  val->add_option("--suite", suite_ids, "Suite box ids")->required()->delimiter(',');
  val->add_option("--shipments-a", shipments_path, "Optimization shipment set")->required()->check(CLI::ExistingFile);
  val->add_option("--shipments-b", shipments_b, "Second (larger) shipment set")->required()->check(CLI::ExistingFile);
  val->add_option("--items", items_path, "Items CSV")->check(CLI::ExistingFile);
  val->add_option("--cost", cost_spec, "Cost model used to pick the box")->capture_default_str();
  val->add_option("--outer-volumes", outer_path, "CSV box_id,outer_volume for the outer-volume share")
      ->check(CLI::ExistingFile);
  val->add_option("--threshold", threshold, "Relative divergence that gets flagged")->capture_default_str();
  val->add_option("--out", out_dir, "Output directory")->required();
  add_fit_options(val, fit_opts);

  // compare
  std::vector<std::string> suites_raw;
  std::vector<std::string> labels;
  auto* cmp = app.add_subcommand("compare", "Compare suites on one shipment set against the first suite");
  cmp->add_option("--boxes", boxes_path, "Candidate boxes CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--shipments", shipments_path, "Shipments CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--items", items_path, "Items CSV")->check(CLI::ExistingFile);
  cmp->add_option("--suite", suites_raw, "Comma-separated box ids; repeat per suite, reference first")->required();
  cmp->add_option("--label", labels, "Label per suite, in order");
  cmp->add_option("--cost", cost_spec, "Cost model")->capture_default_str();
  cmp->add_option("--out", out_path, "Comparison CSV")->required();
  add_fit_options(cmp, fit_opts);

  // finetune
  std::vector<double> deltas{-2, -1, 0, 1, 2};
  auto* ft = app.add_subcommand("finetune", "Write candidate boxes around a suite for a second pass");
  ft->add_option("--boxes", boxes_path, "Candidate boxes CSV")->required()->check(CLI::ExistingFile);
  ft->add_option("--suite", suite_ids, "Suite box ids")->required()->delimiter(',');
  ft->add_option("--lock", lock_ids, "Locked box ids (always kept)")->delimiter(',');
  ft->add_option("--deltas", deltas, "Length offsets per dimension")->delimiter(',')->capture_default_str();
  ft->add_option("--out", out_path, "Boxes CSV to write")->required();

  // fitone
  Id shipment_id = 0;
  bool witness = false;
  auto* one = app.add_subcommand("fitone", "Cheapest suite box that fits one shipment");
  one->add_option("--shipments", shipments_path, "Shipments CSV")->required()->check(CLI::ExistingFile);
  one->add_option("--items", items_path, "Items CSV")->check(CLI::ExistingFile);
  one->add_option("--shipment", shipment_id, "Shipment id")->required();
  one->add_option("--boxes", boxes_path, "Candidate boxes CSV")->required()->check(CLI::ExistingFile);
  one->add_option("--suite", suite_ids, "Suite box ids (default: all boxes)")->delimiter(',');
  one->add_option("--cost", cost_spec, "Cost model")->capture_default_str();
  one->add_flag("--witness", witness, "Print the packing as JSON");
  add_fit_options(one, fit_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const std::size_t threads = resolve_threads(threads_flag);
    const FitMatrixConfig fcfg = make_fit_config(fit_opts, threads);

    if (*fit) {
      BoxSet boxes = load_boxes(boxes_path);
      auto shipments = load_shipments_opt(shipments_path, items_path);
      FitMatrixConfig cfg = fcfg;
      FitMatrix prior_matrix;
      BoxSet prior_box_set;
      if (!prior_fit.empty() || !prior_boxes.empty()) {
        if (prior_fit.empty() || prior_boxes.empty()) throw ValidationError("--prior-fit needs --prior-boxes");
        prior_box_set = load_boxes(prior_boxes);
        prior_matrix = import_fit_matrix(prior_fit, shipments, prior_box_set);
        cfg.prior = PriorFits{&prior_matrix, &prior_box_set, cfg.rules};
      }
      FitMatrixResult res = compute_fit_matrix(shipments, boxes, compute_nest_sets(boxes), cfg);
      export_fit_matrix(out_path, res, shipments, boxes, cfg);
      std::cout << "shipments " << shipments.size() << ", boxes " << boxes.size() << ", packable "
                << res.packable.size() << ", set bits " << res.matrix.nnz() << ", solver calls "
                << res.stats.solver_calls << ", timeouts " << res.timeouts.size() << ", " << std::fixed
                << std::setprecision(1) << res.stats.seconds << " s\n";
      return 0;
    }

    if (*rec) {
      BoxSet boxes = load_boxes(boxes_path);
      auto shipments = load_shipments_opt(shipments_path, items_path);
      RunConfig run;
      run.p = p;
      run.locked_ids = lock_ids;
      run.cost = parse_cost(cost_spec);
      run.fit = fcfg;
      run.method = parse_method(method);
      run.grasp = grasp;
      run.lagrangian = lagr;
      run.threads = threads;
      resolve_locks(run, boxes);
      Recommendation r;
      if (!fit_path.empty()) {
        r = recommend_from_fit(run, shipments, boxes, import_fit_matrix(fit_path, shipments, boxes));
      } else {
        r = recommend(run, shipments, boxes);
      }
      ensure_dir(out_dir);
      const std::string text = format_report(r.report);
      write_report_csv(out_dir + "/report.csv", r.report);
      open_out(out_dir + "/report.txt") << text;
      std::vector<std::int64_t> ids;
      for (const auto& b : boxes.boxes) ids.push_back(b.id);
      SolveResult shown = r.solve;
      if (!r.suite) shown.suite.clear();
      open_out(out_dir + "/result.json") << result_to_json(shown, ids) << '\n';
      {
        auto out = open_out(out_dir + "/assignment.csv");
        out << "shipment_id,box_id\n";
        for (std::size_t t = 0; t < r.assignment.size(); ++t) {
          out << shipments[r.packable.shipments[t]].id << ',' << boxes.boxes[r.assignment[t]].id << '\n';
        }
      }
      if (!r.bound_trace.empty()) {
        auto out = open_out(out_dir + "/bounds.log");
        out << "iteration dual lower upper theta forced_in forced_out\n";
        for (const auto& s : r.bound_trace) {
          out << s.iteration << ' ' << s.dual << ' ' << s.lower << ' ' << s.upper << ' ' << s.theta << ' '
              << s.forced_in << ' ' << s.forced_out << '\n';
        }
      }
      std::cout << text;
      return 0;
    }

    if (*val) {
      BoxSet boxes = load_boxes(boxes_path);
      auto a = load_shipments_opt(shipments_path, items_path);
      auto b = load_shipments_opt(shipments_b, items_path);
      const auto suite = boxes.indices_of(suite_ids);
      ValidateConfig vcfg;
      vcfg.divergence_threshold = threshold;
      if (!outer_path.empty()) {
        CostModel outer = CostModel::box_table(CostModelKind::OuterVolume, outer_path);
        std::unordered_map<Id, double> ov;
        for (const auto& box : boxes.boxes) {
          try {
            ov[box.id] = outer.cost(Shipment{}, box);
          } catch (const ValidationError&) {
          }
        }
        vcfg.outer_volume = std::move(ov);
      }
      ValidationComparison vc = validate(suite, a, b, boxes, parse_cost(cost_spec), fcfg, vcfg);
      ensure_dir(out_dir);
      {
        auto out = open_out(out_dir + "/validation.csv");
        out << "box_id,shipments_a,pct_shipments_a,pct_cost_a,pct_outer_a,pct_void_a,"
               "shipments_b,pct_shipments_b,pct_cost_b,pct_outer_b,pct_void_b\n";
        auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
        for (std::size_t t = 0; t < vc.a.rows.size(); ++t) {
          const auto& ra = vc.a.rows[t];
          const auto& rb = vc.b.rows[t];
          out << ra.id << ',' << ra.shipments << ',' << ra.pct_shipments << ',' << ra.pct_cost << ','
              << opt(ra.pct_outer_volume) << ',' << ra.pct_void << ',' << rb.shipments << ',' << rb.pct_shipments
              << ',' << rb.pct_cost << ',' << opt(rb.pct_outer_volume) << ',' << rb.pct_void << '\n';
        }
      }
      {
        auto out = open_out(out_dir + "/divergences.csv");
        out << "box_id,metric,a,b,relative\n";
        for (const auto& d : vc.flagged) {
          out << d.box_id << ',' << d.metric << ',' << d.a << ',' << d.b << ',' << d.relative << '\n';
        }
      }
      std::cout << "set a: " << vc.a.covered << " packed, " << vc.a.uncovered << " uncovered, void " << std::fixed
                << std::setprecision(2) << vc.a.pct_void << "%\n"
                << "set b: " << vc.b.covered << " packed, " << vc.b.uncovered << " uncovered, void " << vc.b.pct_void
                << "%\n"
                << vc.flagged.size() << " metric(s) diverge by more than " << 100.0 * threshold << "%\n";
      if (!vc.flagged.empty()) std::cout << "warning: consider re-running the optimization on a larger shipment set\n";
      return 0;
    }

    if (*cmp) {
      BoxSet boxes = load_boxes(boxes_path);
      auto shipments = load_shipments_opt(shipments_path, items_path);
      std::vector<std::vector<std::size_t>> suites;
      for (const auto& raw : suites_raw) {
        std::vector<Id> ids;
        for (const auto& f : CLI::detail::split(raw, ',')) {
          try {
            ids.push_back(std::stoll(f));
          } catch (const std::exception&) {
            throw ValidationError("bad box id '" + f + "' in --suite");
          }
        }
        suites.push_back(boxes.indices_of(ids));
      }
      auto rows = compare_suites(suites, labels, shipments, boxes, parse_cost(cost_spec), fcfg);
      auto out = open_out(out_path);
      out << "label,box_ids,total_cost,uncovered,feasible,reduction_pct\n";
      for (const auto& r : rows) {
        std::string ids;
        for (Id id : r.box_ids) ids += (ids.empty() ? "" : " ") + std::to_string(id);
        out << r.label << ',' << ids << ',' << r.total_cost << ',' << r.uncovered << ',' << (r.feasible ? 1 : 0) << ','
            << (r.reduction_pct ? std::to_string(*r.reduction_pct) : std::string()) << '\n';
        std::cout << std::left << std::setw(16) << r.label << " cost " << std::setprecision(12) << r.total_cost
                  << (r.feasible ? "" : " (does not cover every shipment)");
        if (r.reduction_pct) std::cout << ", reference saves " << std::setprecision(4) << *r.reduction_pct << "%";
        std::cout << '\n';
      }
      return 0;
    }

    if (*ft) {
      BoxSet boxes = load_boxes(boxes_path);
      const auto suite = boxes.indices_of(suite_ids);
      const auto locked = boxes.indices_of(lock_ids);
      BoxSet out = finetune_candidates(suite, locked, boxes, deltas);
      write_boxes(out_path, out);
      std::cout << out.size() << " candidate boxes written to " << out_path << '\n';
      return 0;
    }

    if (*one) {
      BoxSet boxes = load_boxes(boxes_path);
      auto shipments = load_shipments_opt(shipments_path, items_path);
      const Shipment* s = nullptr;
      for (const auto& sh : shipments) {
        if (sh.id == shipment_id) s = &sh;
      }
      if (!s) throw ValidationError("shipment " + std::to_string(shipment_id) + " not found");
      std::vector<std::size_t> suite;
      if (suite_ids.empty()) {
        for (std::size_t j = 0; j < boxes.size(); ++j) suite.push_back(j);
      } else {
        suite = boxes.indices_of(suite_ids);
      }
      Packing pk = pack_into_suite(std::span<const Shipment>(s, 1), boxes, suite, parse_cost(cost_spec), fcfg);
      if (!pk.box[0]) {
        std::cout << "none\n";
        return 0;
      }
      const auto& box = boxes.boxes[*pk.box[0]];
      std::cout << box.id << '\n';
      if (witness && !s->cartons.empty()) {
        SolverConfig sc = fcfg.solver;
        FitVerdict v = solve_fit(FitProblem{s->cartons, box.inner, fcfg.rules}, sc);
        if (v.fits()) std::cout << witness_to_json(*v.witness) << '\n';
      }
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const BudgetError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 3;
}

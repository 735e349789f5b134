#include "cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <openssl/opensslv.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "artifacts.hpp"
#include "cfs/dirac_sea.hpp"
#include "cfs/discrete_vp.hpp"
#include "cfs/experiments.hpp"
#include "cfs/io.hpp"
#include "cfs/lightcone.hpp"
#include "cfs/measure_opt.hpp"
#include "cfs/perturbation.hpp"

#ifndef CFSLAB_VERSION
#define CFSLAB_VERSION "0.0.0"
#endif

namespace cfs::cli {

namespace {

struct Context {
  Json config;  // effective, schema-checked
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool verbose = false;
  std::ostream* log = nullptr;
  ArtifactSet artifacts;
  Json summary = Json::object();

  void note(const std::string& msg) const {
    if (verbose) *log << "cfslab: " << msg << '\n';
  }
};

[[noreturn]] void bad_value(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::schema_error, "key '" + key + "' " + why);
}

int positive_int(const Json& c, const std::string& key) {
  const int v = c.at(key).get<int>();
  if (v < 1) bad_value(key, "must be positive");
  return v;
}

template <class F>
std::string to_text(F&& write) {
  std::ostringstream o;
  write(o);
  return o.str();
}

void cmd_eigencheck(Context& ctx) {
  const auto& c = ctx.config;
  const int pairs = positive_int(c, "pairs");
  const auto dims = c.at("dims").get<std::vector<int>>();
  const auto ns = c.at("spin_dims").get<std::vector<int>>();
  if (dims.empty() || ns.empty()) bad_value("dims", "and 'spin_dims' must be non-empty");
  const double tol = c.at("tolerance").get<double>();
  ctx.note("eigencheck: " + std::to_string(pairs * dims.size() * ns.size()) + " pairs");
  const auto rows = experiments::eigen_coincidence(ctx.seed, pairs, dims, ns, ctx.threads);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.relative());
  ctx.artifacts.add("coincidence.csv", to_text([&](std::ostream& o) { experiments::write_coincidence_csv(o, rows); }));
  ctx.summary["pairs"] = rows.size();
  ctx.summary["worst_relative"] = worst;
  ctx.summary["tolerance"] = tol;
  ctx.summary["pass"] = worst <= tol;
}

void cmd_vacuum_sweep(Context& ctx) {
  const auto& c = ctx.config;
  sea::MomentumLattice lat;
  lat.mode = sea::DimensionMode::d1p1;
  lat.points = c.at("lattice").at("points").get<int>();
  lat.length = c.at("lattice").at("length").get<double>();
  lat.mass = c.at("lattice").at("mass").get<double>();
  const auto eps = c.at("epsilons").get<std::vector<double>>();
  if (eps.empty()) bad_value("epsilons", "must be non-empty");
  const int pairs = positive_int(c, "pairs");
  const auto seaq = sea::build_sea(lat);
  const double step = c.at("grid_snap").get<bool>() ? sea::position_step(lat) : 0.0;
  const auto samples =
      sea::sample_pairs(ctx.seed, pairs, c.at("extent").get<double>(), c.at("margin").get<double>(), step);
  std::vector<sea::SweepRow> rows;
  for (double e : eps) {
    ctx.note("vacuum-sweep: epsilon = " + io::format_double(e));
    rows.push_back(sea::vacuum_sweep_row(seaq, e, samples));
  }
  std::ostringstream csv;
  csv << "epsilon,spacelike_count,spacelike_mean,spacelike_max,timelike_count,timelike_mean,timelike_max,ratio\r\n";
  bool decreasing = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv << io::format_double(r.epsilon) << ',' << r.spacelike.count << ',' << io::format_double(r.spacelike.mean) << ','
        << io::format_double(r.spacelike.max) << ',' << r.timelike.count << ',' << io::format_double(r.timelike.mean)
        << ',' << io::format_double(r.timelike.max) << ',' << io::format_double(r.ratio) << "\r\n";
    if (i > 0 && !(r.ratio < rows[i - 1].ratio)) decreasing = false;
  }
  ctx.artifacts.add("sweep.csv", csv.str());
  PlotSeries ratio{"spacelike/timelike", {}, {}};
  for (const auto& r : rows) {
    ratio.x.push_back(r.epsilon);
    ratio.y.push_back(r.ratio);
  }
  ctx.artifacts.add("sweep.svg", svg_line_plot({"Vacuum sweep", "epsilon", "mean L ratio", true, true}, {ratio}));
  ctx.summary["ratio_strictly_decreasing"] = decreasing;
  ctx.summary["ratios"] = ratio.y;
}

void cmd_minimize(Context& ctx) {
  const auto& c = ctx.config;
  const int atoms = positive_int(c, "atoms"), dim = positive_int(c, "dim"), n = positive_int(c, "spin_dim");
  OptConfig cfg;
  cfg.mu = c.at("mu").is_null() ? 1.0 / (2.0 * n) : c.at("mu").get<double>();
  cfg.max_iters = positive_int(c, "max_iters");
  cfg.volume_target = c.at("volume_target").get<double>();
  cfg.trace_target = c.at("trace_target").get<double>();
  cfg.seed = ctx.seed;
  std::mt19937_64 rng(ctx.seed);
  const auto start = experiments::random_system(rng, atoms, dim, n, cfg.volume_target, cfg.trace_target);
  ctx.note("minimize: " + std::to_string(atoms) + " atoms, N = " + std::to_string(dim));
  const auto res = minimize_measure(start, cfg);
  const CausalFermionSystem final_sys(dim, n, res.measure);
  const double final_obj = objective_mu(final_sys, cfg.mu);

  ctx.artifacts.add("iterations.csv", to_text([&](std::ostream& o) { write_iteration_csv(o, res.log); }));
  ctx.artifacts.add("system.txt", to_text([&](std::ostream& o) { io::write_system(o, final_sys); }));
  PlotSeries obj{"objective", {}, {}};
  for (const auto& r : res.log) {
    obj.x.push_back(r.iter);
    obj.y.push_back(r.objective);
  }
  ctx.artifacts.add("minimize.svg", svg_line_plot({"Measure optimization", "iteration", "objective", false, false}, {obj}));
  ctx.summary["status"] = to_string(res.status);
  ctx.summary["objective"] = final_obj;
  ctx.summary["volume_residual"] = res.volume_residual;
  ctx.summary["trace_residual"] = res.trace_residual;
  const int restarts = c.at("restarts").get<int>();
  if (restarts < 0) bad_value("restarts", "must be nonnegative");
  if (restarts > 0) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r)
      best = std::min(best, objective_mu(experiments::random_system(rng, atoms, dim, n, cfg.volume_target,
                                                                    cfg.trace_target),
                                         cfg.mu));
    ctx.summary["best_random_restart"] = best;
    ctx.summary["beats_restarts"] = final_obj <= best;
  }
}

void cmd_discrete_vp(Context& ctx) {
  const auto& c = ctx.config;
  const auto blocks = c.at("blocks").get<std::vector<int>>();
  if (blocks.empty()) bad_value("blocks", "must be non-empty");
  const int f = positive_int(c, "rank");
  const auto s = dvp::KreinSpace::canonical(blocks);
  const dvp::SpacetimePartition part(blocks);
  dvp::FlowConfig cfg;
  cfg.mu = c.at("mu").get<double>();
  cfg.max_iters = positive_int(c, "max_iters");
  cfg.step_init = c.at("step_init").get<double>();
  cfg.residual_reduction = c.at("residual_reduction").get<double>();
  cfg.preserve_constraint = c.at("preserve_constraint").get<bool>();
  const ComplexMatrix p0 = dvp::random_admissible(ctx.seed, s, f);
  ctx.note("discrete-vp: d = " + std::to_string(part.dim()));
  const auto res = dvp::flow_descent(p0, part, s, cfg);
  ctx.artifacts.add("flow.csv", to_text([&](std::ostream& o) { dvp::write_flow_csv(o, res.log); }));
  ctx.artifacts.add("final_problem.txt",
                    to_text([&](std::ostream& o) { dvp::write_problem(o, dvp::DvpProblem{s, part, res.p}); }));
  PlotSeries resid{"||[P,Q]||", {}, {}};
  for (const auto& r : res.log) {
    resid.x.push_back(r.iter);
    resid.y.push_back(r.el_residual);
  }
  ctx.artifacts.add("discrete_vp.svg", svg_line_plot({"Flow descent", "iteration", "EL residual", false, true}, {resid}));
  ctx.summary["initial_residual"] = res.initial_residual;
  ctx.summary["final_residual"] = res.final_residual;
  ctx.summary["reduction"] = res.final_residual > 0 ? res.initial_residual / res.final_residual : 0.0;
  ctx.summary["iterations"] = res.log.empty() ? 0 : res.log.back().iter;
  ctx.summary["stalled"] = res.stalled;
}

void cmd_sea_contour(Context& ctx) {
  const auto& c = ctx.config;
  const int dim = positive_int(c, "dim");
  const int max_order = c.at("max_order").get<int>();
  if (max_order < 0) bad_value("max_order", "must be nonnegative");
  pert::Contour contour;
  const auto& cc = c.at("contour");
  contour.center = Complex(cc.at("center_re").get<double>(), cc.at("center_im").get<double>());
  contour.radius = cc.at("radius").get<double>();
  contour.nodes = cc.at("nodes").get<int>();
  std::mt19937_64 rng(ctx.seed);
  const auto model = pert::random_model(rng, dim, c.at("dk_norm").get<double>());
  const auto rows = pert::contour_convergence(model, contour, max_order);
  ctx.artifacts.add("convergence.csv", to_text([&](std::ostream& o) { pert::write_convergence_csv(o, rows); }));
  ctx.artifacts.add("model.txt", to_text([&](std::ostream& o) { pert::write_model(o, model); }));
  PlotSeries defect{"defect", {}, {}}, bound{"bound", {}, {}};
  for (const auto& r : rows) {
    defect.x.push_back(r.order);
    defect.y.push_back(r.defect);
    bound.x.push_back(r.order);
    bound.y.push_back(r.bound);
  }
  ctx.artifacts.add("sea_contour.svg",
                    svg_line_plot({"Contour sea projector", "Neumann order", "Frobenius error", false, true}, {defect, bound}));
  const ComplexMatrix p = pert::contour_sea_projector(model, contour, max_order, ctx.threads);
  ctx.summary["dirac_identity_residual"] = pert::dirac_identity_residual(p, pert::perturbed_dirac_operator(model));
  ctx.summary["final_defect"] = rows.back().defect;
}

void cmd_pexp_test(Context& ctx) {
  const auto& c = ctx.config;
  const int dim = positive_int(c, "dim");
  const auto interval = c.at("interval").get<std::vector<double>>();
  if (interval.size() != 2 || !(interval[0] <= interval[1])) bad_value("interval", "must be [a, b] with a <= b");
  std::mt19937_64 rng(ctx.seed);
  const auto path = lc::random_smooth_path(rng, dim, c.at("scale").get<double>(), c.at("harmonics").get<int>());
  const auto rows = lc::pexp_convergence(path, interval[0], interval[1], c.at("max_order").get<int>());
  ctx.artifacts.add("pexp.csv", to_text([&](std::ostream& o) { lc::write_pexp_csv(o, rows); }));
  PlotSeries err{"||Dyson - ODE||", {}, {}}, bound{"bound", {}, {}};
  for (const auto& r : rows) {
    err.x.push_back(r.order);
    err.y.push_back(r.error);
    bound.x.push_back(r.order);
    bound.y.push_back(r.bound);
  }
  ctx.artifacts.add("pexp.svg", svg_line_plot({"Ordered exponential", "Dyson order", "error", false, true}, {err, bound}));
  ctx.summary["final_error"] = rows.back().error;
}

const std::map<std::string, std::function<void(Context&)>>& handlers() {
  static const std::map<std::string, std::function<void(Context&)>> h = {
      {"eigencheck", cmd_eigencheck},   {"vacuum-sweep", cmd_vacuum_sweep}, {"minimize", cmd_minimize},
      {"discrete-vp", cmd_discrete_vp}, {"sea-contour", cmd_sea_contour},   {"pexp-test", cmd_pexp_test},
  };
  return h;
}

Json load_config(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::parse_error, "cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::parse_error, "config '" + path + "' is not valid JSON: " + e.what());
  }
  // A manifest can be replayed: its effective config is used verbatim.
  if (j.is_object() && j.contains("manifest_version")) {
    if (j.value("command", "") != command)
      throw Error(ErrorCode::schema_error, "manifest was written by '" + j.value("command", "") + "'");
    return j.at("config");
  }
  return j;
}

Json versions() {
  return {{"cfslab", CFSLAB_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"openssl", OPENSSL_VERSION_TEXT},
          {"compiler", __VERSION__}};
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cfslab: experiment runner for finite causal fermion systems"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "cfslab-out";
  std::int64_t seed = -1;
  int threads = 0;
  bool verbose = false;
  const std::map<std::string, std::string> help = {
      {"eigencheck", "closed-chain versus dense-product eigenvalue coincidence"},
      {"vacuum-sweep", "Dirac-sea Lagrangian statistics by causal class over epsilon"},
      {"minimize", "causal action minimization over discrete measures"},
      {"discrete-vp", "flow descent on the discrete variational principle"},
      {"sea-contour", "Neumann/contour convergence table for the sea projector"},
      {"pexp-test", "Dyson versus ODE ordered-exponential convergence"},
  };
  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "JSON configuration (or a manifest to replay)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "overrides the configured seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", threads, "overrides the configured worker count")->check(CLI::PositiveNumber);
    sub->add_flag("--verbose", verbose, "progress on stderr");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  Context ctx;
  ctx.verbose = verbose;
  ctx.log = &err;
  try {
    Json raw = load_config(config_path, command);
    if (raw.is_object()) {
      if (seed >= 0) raw["seed"] = seed;
      if (threads > 0) raw["threads"] = threads;
    }
    ctx.config = apply_schema(raw, command_schema(command));
    if (ctx.config.at("seed").get<std::int64_t>() < 0) bad_value("seed", "must be nonnegative");
    if (ctx.config.at("threads").get<int>() < 1) bad_value("threads", "must be positive");
  } catch (const Error& e) {
    err << "cfslab: config error: " << e.what() << '\n';
    return 2;
  }
  ctx.seed = ctx.config.at("seed").get<std::uint64_t>();
  ctx.threads = ctx.config.at("threads").get<unsigned>();
  set_default_threads(ctx.threads);

  try {
    handlers().at(command)(ctx);
    ctx.artifacts.add("summary.json", ctx.summary.dump(2) + "\n");
    Json manifest = {{"manifest_version", 1},
                     {"command", command},
                     {"config", ctx.config},
                     {"config_sha256", sha256_hex(ctx.config.dump())},
                     {"seed", ctx.seed},
                     {"threads", ctx.threads},
                     {"versions", versions()}};
    ctx.artifacts.commit(out_dir, manifest);
  } catch (const Error& e) {
    err << "cfslab: " << command << ": " << e.what() << '\n';
    return e.code() == ErrorCode::schema_error ? 2 : 1;
  } catch (const std::exception& e) {
    err << "cfslab: " << command << ": " << e.what() << '\n';
    return 1;
  }
  out << "cfslab: " << command << " wrote " << ctx.artifacts.files().size() + 1 << " files to " << out_dir << '\n';
  return 0;
}

}  // namespace cfs::cli

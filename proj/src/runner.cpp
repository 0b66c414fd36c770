#include "harmonic_rank/runner.hpp"

#include "harmonic_rank/errors.hpp"
#include "harmonic_rank/flow.hpp"
#include "harmonic_rank/hyperbolicity.hpp"
#include "harmonic_rank/identities.hpp"
#include "harmonic_rank/parallel.hpp"
#include "harmonic_rank/rank.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#ifndef HARMONIC_RANK_VERSION
#define HARMONIC_RANK_VERSION "unknown"
#endif

namespace hrank {

namespace fs = std::filesystem;

std::string toolkit_version() { return HARMONIC_RANK_VERSION; }

const std::vector<std::string>& default_gallery() {
  static const std::vector<std::string> g{"h2", "h3", "h4", "h2:-4", "twoblock21", "flat2", "flat3", "h2xr"};
  return g;
}

namespace {

const std::set<std::string> kCommands{"density", "rank", "anosov", "hyperbolicity", "identities", "equivalence", "report"};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

template <class T>
T get(const Json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    config_error("key '" + key + "': " + e.what());
  }
}

void check_keys(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) config_error("unknown key '" + k + "' in " + where);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

RunConfig apply_config(const Json& j, RunConfig c) {
  check_keys(j, "config", {"command", "model", "model_file", "seed", "tol", "out", "threads", "r_max", "density", "rank",
                           "anosov", "hyperbolicity", "identities", "equivalence"});
  if (j.contains("command")) c.command = get<std::string>(j, "command");
  if (j.contains("model") && j.contains("model_file")) config_error("give either 'model' or 'model_file'");
  if (j.contains("model")) c.model = get<std::string>(j, "model");
  if (j.contains("model_file")) c.model = trim(read_text(get<std::string>(j, "model_file")));
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed");
  if (j.contains("tol")) c.tol = get<double>(j, "tol");
  if (j.contains("out")) c.out_dir = get<std::string>(j, "out");
  if (j.contains("threads")) c.threads = get<unsigned>(j, "threads");
  if (j.contains("r_max")) c.r_max = get<double>(j, "r_max");
  if (j.contains("density")) {
    const Json& d = j["density"];
    check_keys(d, "density", {"tmax", "step", "seeds"});
    if (d.contains("tmax")) c.tmax = get<double>(d, "tmax");
    if (d.contains("step")) c.step = get<double>(d, "step");
    if (d.contains("seeds")) c.seeds = get<std::size_t>(d, "seeds");
  }
  if (j.contains("rank")) {
    const Json& d = j["rank"];
    check_keys(d, "rank", {"eps"});
    if (d.contains("eps")) c.eps_rank = get<double>(d, "eps");
  }
  if (j.contains("anosov")) {
    const Json& d = j["anosov"];
    check_keys(d, "anosov", {"seeds", "horizon", "samples", "rho_tol"});
    if (d.contains("seeds")) c.seeds = get<std::size_t>(d, "seeds");
    if (d.contains("horizon")) c.horizon = get<double>(d, "horizon");
    if (d.contains("samples")) c.fit_samples = get<std::size_t>(d, "samples");
    if (d.contains("rho_tol")) c.rho_tol = get<double>(d, "rho_tol");
  }
  if (j.contains("hyperbolicity")) {
    const Json& d = j["hyperbolicity"];
    check_keys(d, "hyperbolicity",
               {"scales", "quadruples", "triangles", "side_samples", "mc", "delta_in", "r", "horizon"});
    if (d.contains("scales")) c.scales = get<std::vector<double>>(d, "scales");
    if (d.contains("quadruples")) c.quadruples = get<std::size_t>(d, "quadruples");
    if (d.contains("triangles")) c.triangles = get<std::size_t>(d, "triangles");
    if (d.contains("side_samples")) c.side_samples = get<std::size_t>(d, "side_samples");
    if (d.contains("mc")) c.mc = get<std::size_t>(d, "mc");
    if (d.contains("delta_in")) c.delta_in = get<double>(d, "delta_in");
    if (d.contains("r")) c.volume_r = get<double>(d, "r");
    if (d.contains("horizon")) c.horizon = get<double>(d, "horizon");
  }
  if (j.contains("identities")) {
    const Json& d = j["identities"];
    check_keys(d, "identities", {"samples", "range"});
    if (d.contains("samples")) c.identity_samples = get<std::size_t>(d, "samples");
    if (d.contains("range")) c.identity_range = get<double>(d, "range");
  }
  if (j.contains("equivalence")) {
    const Json& d = j["equivalence"];
    check_keys(d, "equivalence", {"gallery", "seeds"});
    if (d.contains("gallery")) {
      if (d["gallery"].is_string()) {
        if (d["gallery"] != "default") config_error("unknown gallery '" + d["gallery"].get<std::string>() + "'");
        c.gallery = default_gallery();
      } else {
        c.gallery = get<std::vector<std::string>>(d, "gallery");
      }
    }
    if (d.contains("seeds")) c.seeds = get<std::size_t>(d, "seeds");
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    config_error(path + ": " + e.what());
  }
  return apply_config(j);
}

void validate(const RunConfig& c) {
  if (!kCommands.count(c.command)) config_error("unknown command '" + c.command + "'");
  auto positive = [](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) config_error(std::string(name) + " must be positive");
  };
  auto within = [&](double x, const char* name) {
    positive(x, name);
    if (x > c.r_max) config_error(std::string(name) + " exceeds r_max");
  };
  positive(c.r_max, "r_max");
  if (c.tol) positive(*c.tol, "tol");
  positive(c.eps_rank, "rank.eps");
  positive(c.rho_tol, "anosov.rho_tol");
  positive(c.step, "density.step");
  within(c.tmax, "density.tmax");
  if (c.step > c.tmax) config_error("density.step exceeds density.tmax");
  within(c.horizon, "horizon");
  within(c.volume_r, "hyperbolicity.r");
  positive(c.delta_in, "hyperbolicity.delta_in");
  if (c.scales.empty()) config_error("hyperbolicity.scales is empty");
  for (std::size_t i = 0; i < c.scales.size(); ++i) {
    within(c.scales[i], "hyperbolicity.scales");
    if (i && c.scales[i] <= c.scales[i - 1]) config_error("hyperbolicity.scales must increase");
  }
  if (c.seeds == 0) config_error("seeds must be at least 1");
  if (c.quadruples == 0 || c.mc == 0 || c.fit_samples == 0 || c.identity_samples == 0)
    config_error("sample counts must be positive");
  if (c.triangles > 0 && c.side_samples < 2) config_error("hyperbolicity.side_samples must be at least 2");
  positive(c.identity_range, "identities.range");
  if (c.identity_range > 4.0) config_error("identities.range must be at most 4 (samples must keep |t+u| <= 8)");
  if (c.threads && *c.threads == 0) config_error("threads must be positive");
  for (const auto& g : c.gallery)
    if (g.empty()) config_error("empty gallery entry");
}

Summary::Summary(const std::string& command, const std::string& model) {
  j_["command"] = command;
  for (const auto& f : fields()) j_[f] = Json{{"skipped", "not computed by " + command}};
  if (!model.empty()) set("model", model, "curvature-models.parse_model_spec");
  set("version", toolkit_version(), "cli-runner.toolkit_version");
}

const std::vector<std::string>& Summary::fields() {
  static const std::vector<std::string> f{"model",         "h",          "rank",         "rho",
                                          "growth_class",  "growth_constants", "delta_verdict", "exponent_fits",
                                          "identities",    "wall_clock_s", "version"};
  return f;
}

void Summary::set(const std::string& field, Json value, const std::string& source) {
  j_[field] = Json{{"value", std::move(value)}, {"source", source}};
}

void Summary::skip(const std::string& field, const std::string& reason) { j_[field] = Json{{"skipped", reason}}; }

bool Summary::has(const std::string& field) const { return j_.contains(field) && j_[field].contains("value"); }

Json strip_wall_clock(const Json& j) {
  if (j.is_object()) {
    Json out = Json::object();
    for (const auto& [k, v] : j.items())
      if (k != "wall_clock_s") out[k] = strip_wall_clock(v);
    return out;
  }
  if (j.is_array()) {
    Json out = Json::array();
    for (const auto& v : j) out.push_back(strip_wall_clock(v));
    return out;
  }
  return j;
}

namespace {

std::string format_number(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

void write_table(const std::string& path, const std::vector<std::pair<std::string, std::string>>& meta,
                 const std::vector<std::string>& names, const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path);
  for (const auto& [k, v] : meta) out << "# " << k << ": " << v << "\n";
  out << "# columns:";
  for (const auto& n : names) out << " " << n;
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "\t" : "") << row[i];
    out << "\n";
  }
}

}  // namespace

void write_columns(const std::string& path, const std::vector<std::pair<std::string, std::string>>& meta,
                   const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns) {
  if (columns.size() != names.size()) throw Error(ErrorCode::InvalidArgument, "column/name count mismatch");
  const std::size_t n = columns.empty() ? 0 : columns[0].size();
  for (const auto& c : columns)
    if (c.size() != n) throw Error(ErrorCode::InvalidArgument, "columns have different lengths");
  std::vector<std::vector<std::string>> rows(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& c : columns) rows[i].push_back(format_number(c[i]));
  write_table(path, meta, names, rows);
}

namespace {

using Clock = std::chrono::steady_clock;

struct Context {
  const RunConfig& cfg;
  Model model;
  std::string canonical_spec;
  Summary summary;
  std::vector<std::string> files;
  Clock::time_point start = Clock::now();

  Context(const RunConfig& c, const std::string& spec_text)
      : cfg(c),
        model(build_model(parse_model_spec(spec_text))),
        canonical_spec(canonical(model.spec())),
        summary(c.command, canonical_spec) {
    summary.set("parameters", Json{{"seed", c.seed}}, "cli-runner.config");
  }

  void param(const std::string& key, Json value) { summary.json()["parameters"]["value"][key] = std::move(value); }

  std::string slug() const {
    std::string s;
    for (char ch : canonical_spec) {
      const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '.';
      if (keep)
        s += ch;
      else if (!s.empty() && s.back() != '_')
        s += '_';
    }
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s;
  }

  std::string path(const std::string& name, const std::string& ext) {
    fs::create_directories(cfg.out_dir);
    const std::string stem = cfg.command + "_" + slug() + (name.empty() ? "" : "_" + name);
    const std::string p = (fs::path(cfg.out_dir) / (stem + ext)).string();
    files.push_back(p);
    return p;
  }

  std::vector<std::pair<std::string, std::string>> meta(const std::string& source) const {
    return {{"model", canonical_spec},
            {"version", toolkit_version()},
            {"command", cfg.command},
            {"seed", std::to_string(cfg.seed)},
            {"source", source}};
  }

  void curve(const std::string& name, const std::string& source, const std::vector<std::string>& names,
             const std::vector<std::vector<double>>& columns) {
    if (cfg.out_dir.empty()) return;
    write_columns(path(name, ".tsv"), meta(source), names, columns);
  }

  CommandResult finish(int code = kExitOk) {
    summary.set("wall_clock_s", std::chrono::duration<double>(Clock::now() - start).count(), "cli-runner");
    CommandResult r;
    r.summary = summary.json();
    r.exit_code = code;
    if (!cfg.out_dir.empty()) {
      std::ofstream out(path("", ".summary.json"));
      out << r.summary.dump(2) << "\n";
    }
    r.files = files;
    return r;
  }
};

std::vector<Direction> seeds_for(const Model& m, std::size_t n, std::uint64_t seed) {
  std::vector<Direction> out{m.default_seed()};
  std::mt19937_64 rng(seed);
  while (out.size() < n) out.push_back(m.random_seed(rng));
  return out;
}

unsigned workers_for(const RunConfig& cfg) {
  const unsigned cap = worker_count();
  return cfg.threads ? std::min(cap, *cfg.threads) : cap;
}

Json growth_json(const GrowthReport& g) {
  if (g.cls == GrowthClass::PurelyExponential) return Json{{"a", g.a}, {"b", g.b}};
  return Json{{"degree", g.degree}, {"degree_fit", g.degree_fit}};
}

Json vec_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json fit_json(const ExponentFit& f, Subspace s) {
  Json j{{"alpha", f.alpha}, {"residual", f.residual}, {"samples", f.samples}};
  j[s == Subspace::Central ? "c" : "a"] = f.a;
  if (!f.per_direction.empty()) j["per_direction"] = f.per_direction;
  return j;
}

Json delta_json(const HyperbolicityReport& r) {
  Json j{{"verdict", to_string(r.verdict)}, {"method", r.method},       {"scales", r.scales},
         {"delta_hat", r.delta_hat},        {"delta_raw", r.delta_raw}, {"last_changes", r.last_changes},
         {"slope", r.slope},                {"samples_per_scale", r.samples_per_scale}, {"seed", r.seed}};
  if (r.divergence_alpha) j["divergence_alpha"] = *r.divergence_alpha;
  return j;
}

bool single_hyperbolic_factor(const DistanceOracle& o) {
  return o.factors().size() == 1 && o.factors()[0].curvature < 0.0;
}

}  // namespace

CommandResult cmd_density(const RunConfig& cfg) {
  Context ctx(cfg, cfg.model);
  const Model& m = ctx.model;
  const auto n = static_cast<std::size_t>(std::llround(cfg.tmax / cfg.step));
  std::vector<double> grid;
  for (std::size_t i = 1; i <= n; ++i) grid.push_back(static_cast<double>(i) * cfg.step);
  ctx.param("tmax", cfg.tmax);
  ctx.param("step", cfg.step);
  ctx.param("seeds", cfg.seeds);

  const DensityProfile p = density_profile(m, m.default_seed(), grid);
  ctx.summary.set("h", p.h, "rank-diagnostics.density_profile");
  ctx.summary.set("h_fit", Json{{"h", p.h}, {"k", p.k}, {"spread", p.h_spread}}, "rank-diagnostics.density_profile");
  const GrowthReport g = volume_growth_class(p);
  ctx.summary.set("growth_class", to_string(g.cls), "rank-diagnostics.volume_growth_class");
  ctx.summary.set("growth_constants", growth_json(g), "rank-diagnostics.volume_growth_class");

  if (m.log_density(grid.front())) {
    double dev = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double exact = *m.log_density(grid[i]);
      dev = std::max(dev, std::abs(p.log_f[i] - exact) / std::max(1.0, std::abs(exact)));
    }
    ctx.summary.set("closed_form_deviation", dev, "curvature-models.log_density");
  } else {
    ctx.summary.skip("closed_form_deviation", "model has no closed-form density");
  }

  if (cfg.seeds > 1) {
    const double hi = std::min(8.0, cfg.tmax);
    std::vector<double> hg;
    for (int i = 1; i <= static_cast<int>(std::floor(hi * 10 + 1e-9)); ++i) hg.push_back(0.1 * i);
    const double tol = cfg.tol.value_or(1e-4);
    const HarmonicityReport hr = harmonicity_check(m, seeds_for(m, cfg.seeds, cfg.seed), hg, tol);
    ctx.summary.set("harmonicity",
                    Json{{"deviation", hr.deviation}, {"pass", hr.pass}, {"seeds", hr.seeds}, {"tol", tol},
                         {"t_range", {hg.front(), hg.back()}}},
                    "rank-diagnostics.harmonicity_check");
  } else {
    ctx.summary.skip("harmonicity", "single seed");
  }

  std::vector<double> f(p.log_f.size());
  std::transform(p.log_f.begin(), p.log_f.end(), f.begin(), [](double x) { return std::exp(x); });
  ctx.curve("density", "rank-diagnostics.density_profile", {"t", "log_f", "f", "logderiv", "F"},
            {p.grid, p.log_f, f, p.logderiv, p.F});
  return ctx.finish();
}

CommandResult cmd_rank(const RunConfig& cfg) {
  Context ctx(cfg, cfg.model);
  const Model& m = ctx.model;
  ctx.param("eps_rank", cfg.eps_rank);
  const RankReport r = rank_of(m, m.default_seed(), cfg.eps_rank);
  ctx.summary.set("rank", r.rank, "rank-diagnostics.rank_of");
  ctx.summary.set("rho", r.rho, "rank-diagnostics.rank_of");
  ctx.summary.set("h", r.Up.trace(), "jacobi-engine.asymptotic_derivative");
  ctx.summary.set("rank_detail",
                  Json{{"kernel_dim", r.kernel_dim},
                       {"limit_eigs", vec_json(r.limit_eigs)},
                       {"beta_positive", r.beta_positive},
                       {"eigen_gap", r.eigen_gap},
                       {"eigen_monotone", r.eigen_monotone}},
                  "rank-diagnostics.rank_of");
  std::vector<std::string> names{"t"};
  std::vector<std::vector<double>> cols{r.trace_grid};
  for (Eigen::Index k = 0; k < r.limit_eigs.size(); ++k) {
    names.push_back("lambda" + std::to_string(k + 1));
    std::vector<double> c;
    for (const auto& e : r.eigen_trace) c.push_back(e(k));
    cols.push_back(c);
  }
  ctx.curve("eigen_trace", "rank-diagnostics.rank_of", names, cols);
  return ctx.finish();
}

CommandResult cmd_anosov(const RunConfig& cfg) {
  Context ctx(cfg, cfg.model);
  const Model& m = ctx.model;
  ctx.param("seeds", cfg.seeds);
  ctx.param("rho_tol", cfg.rho_tol);
  ctx.param("horizon", cfg.horizon);
  ctx.param("fit_samples", cfg.fit_samples);
  const AnosovReport a = anosov_certificate(m, seeds_for(m, cfg.seeds, cfg.seed), cfg.rho_tol);
  ctx.summary.set("rho", a.rho, "rank-diagnostics.anosov_certificate");
  ctx.summary.set("anosov",
                  Json{{"verdict", to_string(a.verdict)}, {"beta", a.beta}, {"per_seed_min", a.per_seed_min},
                       {"worst_seed", a.worst_seed}},
                  "rank-diagnostics.anosov_certificate");

  const FlowContext flow(m.field(m.default_seed()), cfg.horizon, cfg.eps_rank);
  ctx.summary.set("rank", flow.rank().rank, "rank-diagnostics.rank_of_field");
  Json fits = Json::object();
  for (Subspace s : {Subspace::Stable, Subspace::Unstable, Subspace::Central}) {
    try {
      const ExponentFit f = exponent_fit(flow, s, cfg.horizon, cfg.fit_samples, cfg.seed);
      fits[to_string(s)] = fit_json(f, s);
      ctx.curve("fit_" + to_string(s), "flow-dynamics.exponent_fit", {"t", "log_norm"}, {f.curve_t, f.curve_log_norm});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySubspace) throw;
      fits[to_string(s)] = Json{{"skipped", e.what()}};
    }
  }
  ctx.summary.set("exponent_fits", fits, "flow-dynamics.exponent_fit");
  return ctx.finish();
}

CommandResult cmd_hyperbolicity(const RunConfig& cfg) {
  Context ctx(cfg, cfg.model);
  const Model& m = ctx.model;
  ctx.param("scales", cfg.scales);
  ctx.param("quadruples", cfg.quadruples);
  ctx.param("triangles", cfg.triangles);
  ctx.param("side_samples", cfg.side_samples);
  ctx.param("mc", cfg.mc);
  ctx.param("delta_in", cfg.delta_in);
  ctx.param("r", cfg.volume_r);
  ctx.param("horizon", cfg.horizon);
  const DistanceOracle* o = m.distance_oracle();
  if (!o) {
    const std::string why = "model has no distance oracle";
    for (const char* f : {"delta_verdict", "thin_triangle", "divergence", "volume_comparison"}) ctx.summary.skip(f, why);
    return ctx.finish();
  }
  const unsigned workers = workers_for(cfg);
  HyperbolicityReport four = delta_four_point(m, cfg.scales, cfg.quadruples, cfg.seed, workers);
  ctx.curve("delta", "hyperbolicity-lab.delta_four_point", {"scale", "delta_hat", "delta_raw"},
            {four.scales, four.delta_hat, four.delta_raw});

  if (cfg.triangles > 0) {
    const HyperbolicityReport thin =
        thin_triangle_delta(m, cfg.scales, cfg.triangles, cfg.side_samples, cfg.seed, workers);
    ctx.summary.set("thin_triangle", delta_json(thin), "hyperbolicity-lab.thin_triangle_delta");
  } else {
    ctx.summary.skip("thin_triangle", "hyperbolicity.triangles = 0");
  }

  const int n = m.dim();
  const Vector v = Vector::Unit(n, 0);
  const Vector w = (Vector::Unit(n, 0) + Vector::Unit(n, n - 1)).normalized();
  std::optional<AnosovConstants> constants;
  const FlowContext flow(m.field(Direction(v)), cfg.horizon, cfg.eps_rank);
  if (flow.rank().kernel_dim == 0) {
    const ExponentFit fs = exponent_fit(flow, Subspace::Stable, cfg.horizon, cfg.fit_samples, cfg.seed);
    const ExponentFit fu = exponent_fit(flow, Subspace::Unstable, cfg.horizon, cfg.fit_samples, cfg.seed);
    constants = AnosovConstants{std::min(fs.alpha, fu.alpha), std::max(fs.a, fu.a)};
  }
  const DivergenceReport d = divergence_rate(m, v, w, cfg.horizon, constants);
  four.divergence_alpha = d.alpha;
  ctx.summary.set("delta_verdict", delta_json(four), "hyperbolicity-lab.delta_four_point");
  Json dj{{"alpha", d.alpha}, {"linear_ratio", d.linear_ratio}, {"angle", d.angle}, {"T", cfg.horizon}};
  if (!d.lower.empty()) {
    dj["lower_T"] = d.lower.back();
    dj["anosov_alpha"] = constants->alpha;
    dj["anosov_a"] = constants->a;
  }
  dj["upper_T"] = d.upper.back();
  ctx.summary.set("divergence", dj, "hyperbolicity-lab.divergence_rate");
  std::vector<double> lower = d.lower.empty() ? std::vector<double>(d.t.size(), std::nan("")) : d.lower;
  ctx.curve("divergence", "hyperbolicity-lab.divergence_rate", {"t", "upper", "lower"}, {d.t, d.upper, lower});

  if (single_hyperbolic_factor(*o)) {
    const VolumeComparison vc = volume_comparison(m, v, cfg.delta_in, cfg.volume_r, cfg.mc, cfg.seed, workers);
    ctx.summary.set("volume_comparison",
                    Json{{"ell", vc.ell},
                         {"rho", vc.rho},
                         {"r", vc.r},
                         {"fraction", vc.fraction},
                         {"fraction_se", vc.fraction_se},
                         {"lhs", vc.lhs},
                         {"lhs_se", vc.lhs_se},
                         {"rhs", vc.rhs},
                         {"ratio", vc.ratio},
                         {"holds", vc.holds},
                         {"n_mc", vc.n_mc},
                         {"seed", vc.seed}},
                    "hyperbolicity-lab.volume_comparison");
  } else {
    ctx.summary.skip("volume_comparison", "needs a single hyperbolic factor");
  }
  return ctx.finish();
}

CommandResult cmd_identities(const RunConfig& cfg) {
  Context ctx(cfg, cfg.model);
  const Model& m = ctx.model;
  IdentityOptions opt;
  opt.tol = cfg.tol.value_or(1e-8);
  opt.seed = cfg.seed;
  ctx.param("samples", cfg.identity_samples);
  ctx.param("range", cfg.identity_range);
  ctx.param("tol", opt.tol);
  const auto samples = random_samples(cfg.identity_samples, -cfg.identity_range, cfg.identity_range, cfg.seed);
  const auto reports = identity_suite(m.field(m.default_seed()), samples, opt);
  Json tags = Json::array();
  int passed = 0;
  for (const auto& r : reports) {
    passed += r.pass ? 1 : 0;
    Json t{{"tag", r.tag}, {"residual", r.residual}, {"pass", r.pass}, {"samples", r.samples}, {"passed", r.passed}};
    if (!r.note.empty()) t["note"] = r.note;
    tags.push_back(t);
  }
  ctx.summary.set("identities", Json{{"passed", passed}, {"total", reports.size()}, {"tags", tags}},
                  "jacobi-engine.identity_suite");
  return ctx.finish();
}

namespace {

struct GalleryRow {
  Json record;
  Json row;
  bool agree = false;
};

GalleryRow gallery_row(const RunConfig& cfg, const std::string& spec) {
  Context ctx(cfg, spec);
  const Model& m = ctx.model;
  GalleryRow out;

  const RankReport r = rank_of(m, m.default_seed(), cfg.eps_rank);
  ctx.summary.set("rank", r.rank, "rank-diagnostics.rank_of");
  ctx.summary.set("rho", r.rho, "rank-diagnostics.rank_of");

  const DensityProfile p = density_profile(m, m.default_seed(), uniform_grid(0.25, 20.0, 0.25));
  const GrowthReport g = volume_growth_class(p);
  ctx.summary.set("h", p.h, "rank-diagnostics.density_profile");
  ctx.summary.set("growth_class", to_string(g.cls), "rank-diagnostics.volume_growth_class");
  ctx.summary.set("growth_constants", growth_json(g), "rank-diagnostics.volume_growth_class");

  const AnosovReport a = anosov_certificate(m, seeds_for(m, std::max<std::size_t>(cfg.seeds, 3), cfg.seed), cfg.rho_tol);
  ctx.summary.set("anosov", Json{{"verdict", to_string(a.verdict)}, {"rho", a.rho}},
                  "rank-diagnostics.anosov_certificate");

  const bool rank_one = r.rank == 1;
  const bool pe = g.cls == GrowthClass::PurelyExponential;
  const bool anosov = a.verdict == AnosovVerdict::Anosov;
  out.agree = rank_one == pe && pe == anosov;
  out.row = Json{{"model", ctx.canonical_spec},
                 {"rank", r.rank},
                 {"rank_one", rank_one},
                 {"growth_class", to_string(g.cls)},
                 {"degree", g.degree},
                 {"rho", a.rho},
                 {"anosov", to_string(a.verdict)}};

  if (m.distance_oracle()) {
    const HyperbolicityReport h = delta_four_point(m, cfg.scales, cfg.quadruples, cfg.seed, 1);
    ctx.summary.set("delta_verdict", delta_json(h), "hyperbolicity-lab.delta_four_point");
    out.row["hyperbolicity"] = to_string(h.verdict);
    const bool hyp = h.verdict == HyperbolicityVerdict::Hyperbolic;
    if (h.verdict == HyperbolicityVerdict::Inconclusive || hyp != rank_one) out.agree = false;
  } else {
    ctx.summary.skip("delta_verdict", "model has no distance oracle");
    out.row["hyperbolicity"] = "Skipped";
  }
  out.row["agree"] = out.agree;
  ctx.summary.set("wall_clock_s", std::chrono::duration<double>(Clock::now() - ctx.start).count(), "cli-runner");
  out.record = ctx.summary.json();
  return out;
}

}  // namespace

CommandResult cmd_equivalence(const RunConfig& cfg) {
  const auto start = Clock::now();
  const std::vector<std::string> gallery = cfg.gallery.empty() ? default_gallery() : cfg.gallery;
  // Parse everything up front so a bad entry is a config error, not a
  // failure halfway through.
  for (const auto& g : gallery) build_model(parse_model_spec(g));
  std::vector<GalleryRow> rows(gallery.size());
  parallel_for(gallery.size(), workers_for(cfg), [&](std::size_t i) { rows[i] = gallery_row(cfg, gallery[i]); });

  Json out;
  out["command"] = "equivalence";
  out["version"] = Json{{"value", toolkit_version()}, {"source", "cli-runner.toolkit_version"}};
  out["parameters"] = Json{{"value",
                            {{"seed", cfg.seed},
                             {"scales", cfg.scales},
                             {"quadruples", cfg.quadruples},
                             {"anosov_seeds", std::max<std::size_t>(cfg.seeds, 3)},
                             {"rho_tol", cfg.rho_tol},
                             {"eps_rank", cfg.eps_rank}}},
                           {"source", "cli-runner.config"}};
  Json matrix = Json::array(), records = Json::array();
  bool all = true;
  for (const auto& r : rows) {
    matrix.push_back(r.row);
    records.push_back(r.record);
    all = all && r.agree;
  }
  out["matrix"] = Json{{"value", matrix}, {"source", "cli-runner.cmd_equivalence"}};
  out["agree"] = Json{{"value", all}, {"source", "cli-runner.cmd_equivalence"}};
  out["records"] = records;
  out["wall_clock_s"] =
      Json{{"value", std::chrono::duration<double>(Clock::now() - start).count()}, {"source", "cli-runner"}};

  CommandResult res;
  res.exit_code = all ? kExitOk : kExitMismatch;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    const std::string table = (fs::path(cfg.out_dir) / "equivalence_matrix.tsv").string();
    std::vector<std::vector<std::string>> body;
    for (const auto& r : matrix)
      body.push_back({r["model"].get<std::string>(), std::to_string(r["rank"].get<int>()),
                      r["growth_class"].get<std::string>(), format_number(r["rho"].get<double>()),
                      r["anosov"].get<std::string>(), r["hyperbolicity"].get<std::string>(),
                      r["agree"].get<bool>() ? "yes" : "no"});
    write_table(table,
                {{"version", toolkit_version()}, {"command", "equivalence"}, {"seed", std::to_string(cfg.seed)},
                 {"source", "cli-runner.cmd_equivalence"}},
                {"model", "rank", "growth_class", "rho", "anosov", "hyperbolicity", "agree"}, body);
    const std::string summary = (fs::path(cfg.out_dir) / "equivalence.summary.json").string();
    std::ofstream(summary) << out.dump(2) << "\n";
    res.files = {table, summary};
  }
  res.summary = std::move(out);
  return res;
}

CommandResult cmd_report(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) config_error("report needs --out DIR holding summary records");
  if (!fs::is_directory(cfg.out_dir)) config_error(cfg.out_dir + " is not a directory");
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(cfg.out_dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 13 && name.substr(name.size() - 13) == ".summary.json") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) config_error("no summary records in " + cfg.out_dir);

  auto cell = [](const Json& rec, const std::string& f) -> std::string {
    if (!rec.contains(f)) return "-";
    const Json& x = rec[f];
    if (!x.contains("value")) return "skipped";
    const Json& v = x["value"];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return format_number(v.get<double>());
    if (v.is_object() && v.contains("verdict")) return v["verdict"].get<std::string>();
    if (v.is_object() && v.contains("passed")) return v["passed"].dump() + "/" + v["total"].dump();
    return v.dump();
  };
  const std::vector<std::string> cols{"model", "h", "rank", "rho", "growth_class", "delta_verdict", "identities"};
  std::vector<std::vector<std::string>> body;
  Json entries = Json::array();
  auto add = [&](const std::string& file, const Json& rec) {
    std::vector<std::string> row{file, rec.value("command", "-")};
    for (const auto& c : cols) row.push_back(cell(rec, c));
    body.push_back(row);
    entries.push_back(Json{{"file", file}, {"record", rec}});
  };
  for (const auto& p : paths) {
    Json j;
    try {
      j = Json::parse(read_text(p.string()));
    } catch (const nlohmann::json::exception& e) {
      config_error(p.string() + ": " + e.what());
    }
    if (j.contains("records"))
      for (const auto& rec : j["records"]) add(p.filename().string(), rec);
    else
      add(p.filename().string(), j);
  }
  std::vector<std::string> names{"file", "command"};
  names.insert(names.end(), cols.begin(), cols.end());
  const std::string out_path = (fs::path(cfg.out_dir) / "report.tsv").string();
  write_table(out_path, {{"version", toolkit_version()}, {"command", "report"}, {"source", "cli-runner.cmd_report"}},
              names, body);
  CommandResult r;
  r.summary = Json{{"command", "report"},
                   {"version", Json{{"value", toolkit_version()}, {"source", "cli-runner.toolkit_version"}}},
                   {"entries", entries}};
  r.files = {out_path};
  return r;
}

CommandResult run_command(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.command == "density") return cmd_density(cfg);
  if (cfg.command == "rank") return cmd_rank(cfg);
  if (cfg.command == "anosov") return cmd_anosov(cfg);
  if (cfg.command == "hyperbolicity") return cmd_hyperbolicity(cfg);
  if (cfg.command == "identities") return cmd_identities(cfg);
  if (cfg.command == "equivalence") return cmd_equivalence(cfg);
  return cmd_report(cfg);
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->code()) {
      case ErrorCode::ConfigError:
      case ErrorCode::InvalidSpec:
      case ErrorCode::InvalidArgument:
      case ErrorCode::OracleUnavailable: return kExitConfig;
      default: return kExitNumerics;
    }
  }
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kExitConfig;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitConfig;
  return kExitNumerics;
}

}  // namespace hrank

#include "harmonic_rank/errors.hpp"
#include "harmonic_rank/runner.hpp"

#include <iostream>

#include "CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"harmonic-rank: Jacobi-tensor diagnostics for harmonic-type manifolds"};
  std::string command, model, config, out, gallery;
  std::uint64_t seed = 1;
  double tol = 0.0, tmax = 0.0;
  std::size_t seeds = 0, quadruples = 0, triangles = 0;
  unsigned threads = 0;

  app.add_option("command", command, "density|rank|anosov|hyperbolicity|identities|equivalence|report")->required();
  auto* o_model = app.add_option("--model", model, "model spec, e.g. h2, flat3, twoblock21, dr:2,1, h2xr");
  auto* o_config = app.add_option("--config", config, "JSON config file; flags override it")->check(CLI::ExistingFile);
  auto* o_seed = app.add_option("--seed", seed, "RNG seed");
  auto* o_tol = app.add_option("--tol", tol, "tolerance");
  auto* o_out = app.add_option("--out", out, "output directory");
  auto* o_tmax = app.add_option("--tmax", tmax, "density horizon");
  auto* o_seeds = app.add_option("--seeds", seeds, "number of seeds (density harmonicity, anosov)");
  auto* o_gallery = app.add_option("--gallery", gallery, "equivalence gallery: 'default' or ';'-separated specs (',' if no ';')");
  auto* o_quad = app.add_option("--quadruples", quadruples, "four-point samples per scale");
  auto* o_tri = app.add_option("--triangles", triangles, "thin-triangle samples per scale");
  auto* o_threads = app.add_option("--threads", threads, "worker threads (capped by HARMONIC_RANK_THREADS or core count)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hrank::kExitConfig;
  }

  try {
    hrank::RunConfig cfg;
    if (*o_config) cfg = hrank::load_config(config);
    cfg.command = command;
    if (*o_model) cfg.model = model;
    if (*o_seed) cfg.seed = seed;
    if (*o_tol) cfg.tol = tol;
    if (*o_out) cfg.out_dir = out;
    if (*o_tmax) cfg.tmax = tmax;
    if (*o_seeds) cfg.seeds = seeds;
    if (*o_quad) cfg.quadruples = quadruples;
    if (*o_tri) cfg.triangles = triangles;
    if (*o_threads) cfg.threads = threads;
    if (*o_gallery) {
      if (gallery == "default") {
        cfg.gallery = hrank::default_gallery();
      } else {
        cfg.gallery.clear();
        std::string cur;
        // Specs such as dr:2,1 contain commas, so split on ';' when present.
        const char sep = gallery.find(';') != std::string::npos ? ';' : ',';
        for (char ch : gallery + sep) {
          if (ch == sep) {
            if (!cur.empty()) cfg.gallery.push_back(cur);
            cur.clear();
          } else {
            cur += ch;
          }
        }
      }
    }
    const hrank::CommandResult r = hrank::run_command(cfg);
    std::cout << r.summary.dump(2) << "\n";
    for (const auto& f : r.files) std::cerr << "wrote " << f << "\n";
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hrank::exit_code_for(e);
  }
}

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lodwave/errors.hpp"
#include "lodwave/study.hpp"

using namespace lodwave;
namespace fs = std::filesystem;

namespace {

struct RunArgs {
  std::string example = "example2";
  std::uint64_t seed = 1;
  int coarse_level = 3;
  int fine_level = 7;
  int ell = 2;
  std::string method = "lod";
  double final_time = 1.0;
  double dt = 0;
  bool override_cfl = false;
  bool lumped_mass = false;
  int snapshot_every = 0;
  std::string out_dir = "run_out";
  std::string cache_dir;
  int jobs = 1;
  bool export_coefficient = false;
  bool dump_matrices = false;
};

std::string cache_dir_or_default(const std::string& flag, const std::string& out_dir) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("LODWAVE_CACHE_DIR"); env && *env) return env;
  return out_dir + "/cache";
}

int cmd_run(const RunArgs& args) {
  const Example example = example_from_name(args.example);
  const MethodSpec method{variant_from_name(args.method), args.lumped_mass};
  if (args.coarse_level > args.fine_level)
    throw ArgumentError("coarse level must not exceed the fine level");
  if (method.variant != MethodVariant::StandardFEM &&
      args.coarse_level == args.fine_level)
    throw ArgumentError("LOD variants need coarse level < fine level");

  fs::create_directories(args.out_dir);
  const std::string cache = cache_dir_or_default(args.cache_dir, args.out_dir);

  const ProblemSetup setup = build_problem(example, args.seed, args.fine_level);
  const double H = build_mesh(args.coarse_level).mesh_size();
  const double dt = args.dt > 0 ? args.dt : cfl_timestep(H, setup.beta);

  if (args.export_coefficient)
    write_coefficient_csv(args.out_dir + "/coefficient.csv", setup.coeff_values,
                          setup.fine.cells);

  const MethodRun mr = run_method(setup, args.coarse_level, args.ell, method, dt,
                                  args.final_time, cache, args.jobs, args.override_cfl);

  export_energy_csv(args.out_dir + "/energy.csv", mr.result.energy, mr.grid.dt);
  if (args.snapshot_every > 0)
    export_trajectory_csv(args.out_dir + "/trajectory.csv", mr.result.trajectory,
                          mr.basis, setup.fine, setup.fine_dofs, args.snapshot_every);
  if (args.dump_matrices) {
    if (method.variant == MethodVariant::StandardFEM &&
        args.coarse_level == args.fine_level) {
      write_matrix_market(args.out_dir + "/K.mtx", setup.K_free);
      write_matrix_market(args.out_dir + "/M.mtx", setup.M_free);
    } else if (method.variant != MethodVariant::StandardFEM) {
      const StructuredQuadMesh coarse = build_mesh(args.coarse_level);
      const auto ops =
          build_lod_assemblies(coarse, setup.fine, setup.coeff_values, setup.bc);
      const auto set = build_or_load_corrector_set(ops, args.ell, cache, args.jobs);
      const auto ms = build_multiscale_system(ops, set);
      write_matrix_market(args.out_dir + "/K.mtx", ms.K_ms);
      write_matrix_market(args.out_dir + "/M.mtx",
                          method.variant == MethodVariant::LOD ? ms.M_ms : ms.M_fem);
    }
  }

  nlohmann::json j;
  j["example"] = args.example;
  j["seed"] = args.seed;
  j["coarse_level"] = args.coarse_level;
  j["fine_level"] = args.fine_level;
  j["ell"] = args.ell;
  j["method"] = variant_name(method.variant);
  j["lumped_mass"] = args.lumped_mass;
  j["dt"] = mr.grid.dt;
  j["n_steps"] = mr.grid.n_steps;
  j["T"] = args.final_time;
  j["offline_seconds"] = mr.offline_seconds;
  j["final_energy"] = mr.result.energy.back();
  std::ofstream(args.out_dir + "/run.json") << j.dump(2) << '\n';

  std::cout << "run complete: " << mr.grid.n_steps << " steps, dt = " << mr.grid.dt
            << ", outputs in " << args.out_dir << "\n";
  return 0;
}

int cmd_study(const std::string& config_path, int jobs_override,
              const std::string& out_override) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (jobs_override > 0) cfg.jobs = jobs_override;
  if (!out_override.empty()) cfg.out_dir = out_override;
  const ErrorTable table = run_convergence_study(cfg);

  std::printf("%6s %12s %4s %16s %12s %8s %9s  %s\n", "level", "H", "ell", "variant",
              "error", "order", "seconds", "status");
  for (const auto& row : table.rows)
    std::printf("%6d %12.6g %4d %16s %12.6g %8.3g %9.2f  %s\n", row.coarse_level,
                row.H, row.ell, variant_name(row.variant).c_str(), row.error,
                row.order, row.seconds, row.status.c_str());
  std::cout << "outputs in " << cfg.out_dir << "\n";
  const bool all_ok = std::all_of(table.rows.begin(), table.rows.end(),
                                  [](const ErrorRow& r) { return r.status == "ok"; });
  return all_ok ? 0 : 1;
}

int cmd_correctors(const std::string& example, std::uint64_t seed, int coarse_level,
                   int fine_level, int ell, const std::string& cache_flag, int jobs) {
  const ProblemSetup setup = build_problem(example_from_name(example), seed, fine_level);
  const std::string cache = cache_dir_or_default(cache_flag, ".");
  const auto ops = build_lod_assemblies(build_mesh(coarse_level), setup.fine,
                                        setup.coeff_values, setup.bc);
  const auto set = build_or_load_corrector_set(ops, ell, cache, jobs);
  std::cout << (set.from_cache ? "loaded " : "built ") << set.Q.cols()
            << " corrector columns (" << set.Q.nonZeros() << " nonzeros)\n"
            << corrector_cache_path(cache, ops, ell) << "\n";
  return 0;
}

int cmd_decay(const std::string& example, std::uint64_t seed, int coarse_level,
              int fine_level, int ell_max, const std::string& out_csv, int jobs) {
  const ProblemSetup setup = build_problem(example_from_name(example), seed, fine_level);
  const auto ops = build_lod_assemblies(build_mesh(coarse_level), setup.fine,
                                        setup.coeff_values, setup.bc);
  const auto table = measure_localization_decay(ops, ell_max, jobs);
  std::printf("%4s %14s\n", "ell", "sup residual");
  for (const auto& entry : table)
    std::printf("%4d %14.6e\n", entry.ell, entry.residual);
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    out << "ell,residual\n";
    for (const auto& entry : table)
      out << entry.ell << ',' << entry.residual << '\n';
  }
  return 0;
}

int cmd_selftest() {
  int failures = 0;
  const auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << " (" << detail << ")\n";
    if (!ok) ++failures;
  };

  {
    const auto mesh = build_mesh(3);
    bool ok = mesh.n_elems() == 64 && mesh.n_verts() == 81;
    ok = ok && element_patch(mesh, mesh.elem_id(3, 3), 1).elems.size() == 9;
    ok = ok && element_patch(mesh, 0, mesh.cells).covers(mesh);
    report("mesh indexing and patches", ok, "level 3");
  }

  const auto coarse = build_mesh(2);
  const auto fine = build_mesh(4);
  const auto field = synthetic_checkerboard(1, 1.0 / 16, 0.25, 2.0);
  const auto ops = build_lod_assemblies(coarse, fine, sample_to_mesh(field, fine),
                                        BoundarySpec::FullBoundary);

  {
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
      Vec v(ops.coarse_dofs.n_free());
      for (int i = 0; i < v.size(); ++i) v[i] = std::sin(0.37 * (trial + 2) * (i + 1));
      worst = std::max(worst,
                       (ops.IH.matrix * (ops.P_free * v) - v).lpNorm<Eigen::Infinity>());
    }
    report("interpolation projectivity", worst <= 1e-12,
           "max deviation " + std::to_string(worst));
  }

  const auto set = build_corrector_set(ops, coarse.cells);
  const auto ms = build_multiscale_system(ops, set);

  {
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
      Vec v(ops.coarse_dofs.n_free());
      Vec r(ops.fine_dofs.n_free());
      for (int i = 0; i < v.size(); ++i) v[i] = std::cos(0.21 * (trial + 1) * (i + 3));
      for (int i = 0; i < r.size(); ++i) r[i] = std::sin(0.13 * (trial + 2) * (i + 1));
      const Vec w = r - ops.P_free * (ops.IH.matrix * r);
      const Vec bv = ms.B * v;
      const double s =
          std::sqrt(bv.dot(ops.K_free * bv)) * std::sqrt(w.dot(ops.K_free * w));
      worst = std::max(worst, std::abs(bv.dot(ops.K_free * w)) / s);
    }
    report("corrector a-orthogonality", worst <= 1e-8,
           "max relative " + std::to_string(worst));
  }

  {
    const double dt = cfl_timestep(coarse.mesh_size(), field.beta);
    const auto grid = make_time_grid(dt, 1.0);
    const SpdSolver msolver(ms.M_ms, "M_ms");
    Vec u0(ops.fine_dofs.n_free());
    for (int i = 0; i < u0.size(); ++i) u0[i] = std::sin(1.0 + i);
    const Vec u0_H = ops.IH.matrix * u0;
    const Vec zero = Vec::Zero(u0_H.size());
    const Vec u1 = taylor_first_step(msolver, ms.K_ms, u0_H, zero, zero, dt);
    const auto run = leapfrog_run(msolver, ms.K_ms, u0_H, u1, zero_load(), grid);
    double drift = 0;
    for (double e : run.energy)
      drift = std::max(drift, std::abs(e - run.energy.front()));
    const bool ok = drift <= 1e-10 * std::abs(run.energy.front());
    report("leapfrog energy conservation", ok,
           "relative drift " + std::to_string(drift / run.energy.front()));

    LoadFunction load;
    load.spatial = ms.B.transpose() * Vec(Vec::Ones(ops.fine_dofs.n_free()));
    load.time_scale = [](double t) { return 1.0 - 0.5 * t; };
    const Vec f0 = load.factor_at(0) * load.spatial;
    const Vec w1 = taylor_first_step(msolver, ms.K_ms, u0_H, zero, f0, dt);
    const auto forced = leapfrog_run(msolver, ms.K_ms, u0_H, w1, load, grid);
    const double res = energy_identity_max_residual(forced, load);
    report("leapfrog energy identity", res <= 1e-9,
           "max relative residual " + std::to_string(res));
  }

  std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale (LOD) leapfrog solver for the acoustic wave equation "
               "with rough coefficients on the unit square"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run a single simulation");
  run->add_option("--example", run_args.example, "example2 | synthetic");
  run->add_option("--seed", run_args.seed, "seed for the synthetic coefficient");
  run->add_option("--coarse-level", run_args.coarse_level, "coarse mesh level")
      ->required();
  run->add_option("--fine-level", run_args.fine_level, "fine (reference) mesh level")
      ->required();
  run->add_option("--ell", run_args.ell, "corrector localization layers");
  run->add_option("--method", run_args.method, "lod | lod-simplified | standardfem");
  run->add_option("--T", run_args.final_time, "final time");
  run->add_option("--dt", run_args.dt, "time step (default: CFL step for H)");
  run->add_flag("--override-cfl", run_args.override_cfl,
                "run even if dt violates the CFL bound");
  run->add_flag("--lumped-mass", run_args.lumped_mass, "experimental lumped mass");
  run->add_option("--snapshot-every", run_args.snapshot_every,
                  "write fine-grid snapshots every k steps");
  run->add_option("--out", run_args.out_dir, "output directory");
  run->add_option("--cache-dir", run_args.cache_dir, "corrector cache directory");
  run->add_option("--jobs", run_args.jobs, "offline-stage worker threads");
  run->add_flag("--export-coefficient", run_args.export_coefficient,
                "write the sampled coefficient as CSV");
  run->add_flag("--dump-matrices", run_args.dump_matrices,
                "write system matrices in MatrixMarket format");

  std::string config_path, study_out;
  int study_jobs = 0;
  auto* study = app.add_subcommand("study", "run a convergence study from a config");
  study->add_option("--config", config_path, "JSON config file")->required();
  study->add_option("--jobs", study_jobs, "override the config's jobs");
  study->add_option("--out-dir", study_out, "override the config's output directory");

  std::string c_example = "example2", c_cache;
  std::uint64_t c_seed = 1;
  int c_coarse = 3, c_fine = 7, c_ell = 2, c_jobs = 1;
  auto* correctors =
      app.add_subcommand("correctors", "offline corrector stage only (cached)");
  correctors->add_option("--example", c_example, "example2 | synthetic");
  correctors->add_option("--seed", c_seed, "coefficient seed");
  correctors->add_option("--coarse-level", c_coarse, "coarse level")->required();
  correctors->add_option("--fine-level", c_fine, "fine level")->required();
  correctors->add_option("--ell", c_ell, "localization layers")->required();
  correctors->add_option("--cache-dir", c_cache, "cache directory");
  correctors->add_option("--jobs", c_jobs, "worker threads");

  std::string d_example = "example2", d_out;
  std::uint64_t d_seed = 1;
  int d_coarse = 3, d_fine = 6, d_ellmax = 4, d_jobs = 1;
  auto* decay = app.add_subcommand("decay", "localization-decay table");
  decay->add_option("--example", d_example, "example2 | synthetic");
  decay->add_option("--seed", d_seed, "coefficient seed");
  decay->add_option("--coarse-level", d_coarse, "coarse level")->required();
  decay->add_option("--fine-level", d_fine, "fine level")->required();
  decay->add_option("--ell-max", d_ellmax, "largest patch size to measure");
  decay->add_option("--out", d_out, "CSV output path");
  decay->add_option("--jobs", d_jobs, "worker threads");

  auto* selftest = app.add_subcommand("selftest", "quick property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*study) return cmd_study(config_path, study_jobs, study_out);
    if (*correctors)
      return cmd_correctors(c_example, c_seed, c_coarse, c_fine, c_ell, c_cache, c_jobs);
    if (*decay)
      return cmd_decay(d_example, d_seed, d_coarse, d_fine, d_ellmax, d_out, d_jobs);
    if (*selftest) return cmd_selftest();
  } catch (const Error& e) {
    nlohmann::json j;
    j["error"] = "lodwave";
    j["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json j;
    j["error"] = "internal";
    j["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return 1;
  }
  return 0;
}

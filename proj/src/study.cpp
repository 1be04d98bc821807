#include "lodwave/study.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <cstring>
#include <limits>
#include <unistd.h>

#include <json.hpp>

#include "lodwave/errors.hpp"

namespace lodwave {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

SpMat identity(int n) {
  SpMat id(n, n);
  id.setIdentity();
  return id;
}

} // namespace

std::string example_name(Example ex) {
  return ex == Example::Example2 ? "example2" : "synthetic";
}

Example example_from_name(const std::string& name) {
  if (name == "example2" || name == "ex2") return Example::Example2;
  if (name == "synthetic" || name == "synthetic-ex1" || name == "ex1")
    return Example::SyntheticEx1;
  throw ArgumentError("unknown example: " + name);
}

ExperimentConfig experiment_config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  if (j.contains("example")) cfg.example = example_from_name(j["example"]);
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("coarse_levels"))
    cfg.coarse_levels = j["coarse_levels"].get<std::vector<int>>();
  if (j.contains("fine_level")) cfg.fine_level = j["fine_level"].get<int>();
  if (j.contains("ells"))
    cfg.ells = j["ells"].get<std::vector<int>>();
  else if (j.contains("ell"))
    cfg.ells = {j["ell"].get<int>()};
  if (j.contains("methods")) {
    cfg.variants.clear();
    for (const auto& m : j["methods"]) cfg.variants.push_back(variant_from_name(m));
  }
  if (j.contains("T")) cfg.final_time = j["T"].get<double>();
  if (j.contains("lumped_mass")) cfg.lumped_mass = j["lumped_mass"].get<bool>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("cache_dir")) cfg.cache_dir = j["cache_dir"].get<std::string>();
  if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return experiment_config_from_json(ss.str());
}

void validate_config(const ExperimentConfig& config) {
  if (config.coarse_levels.empty())
    throw ArgumentError("config needs at least one coarse level");
  const int max_coarse =
      *std::max_element(config.coarse_levels.begin(), config.coarse_levels.end());
  if (config.fine_level <= max_coarse)
    throw ArgumentError("fine_level must exceed every coarse level");
  if (config.example == Example::Example2 && config.fine_level < 6)
    throw ArgumentError("example2 requires fine_level >= 6 (coefficient resolution)");
  if (!(config.final_time > 0)) throw ArgumentError("final time must be positive");
  if (config.ells.empty()) throw ArgumentError("config needs at least one ell");
  if (config.jobs < 1) throw ArgumentError("jobs must be >= 1");
}

std::string resolve_cache_dir(const ExperimentConfig& config) {
  if (!config.cache_dir.empty()) return config.cache_dir;
  if (const char* env = std::getenv("LODWAVE_CACHE_DIR"); env && *env) return env;
  return config.out_dir + "/cache";
}

ProblemSetup build_problem(Example ex, std::uint64_t seed, int fine_level) {
  ProblemSetup setup;
  setup.example = ex;
  setup.seed = seed;
  setup.fine = build_mesh(fine_level);

  if (ex == Example::Example2) {
    setup.bc = BoundarySpec::LeftEdge;
    setup.field = example2_field();
  } else {
    setup.bc = BoundarySpec::FullBoundary;
    // The first experiment's coefficient formula lives in an external
    // reference; a seeded checkerboard with the same bounds stands in. The
    // scale is dyadic and never finer than the fine mesh.
    const double eps = 1.0 / (1 << std::min(fine_level, 7));
    setup.field = synthetic_checkerboard(seed, eps, 0.04, 1.96);
  }
  setup.beta = setup.field.beta;
  setup.coeff_values = sample_to_mesh(setup.field, setup.fine);
  setup.fine_dofs = make_dof_map(setup.fine, setup.bc);
  setup.K_free =
      restrict_to_free(assemble_stiffness_full(setup.fine, setup.coeff_values),
                       setup.fine_dofs);
  setup.M_free = restrict_to_free(assemble_mass_full(setup.fine), setup.fine_dofs);
  setup.K1_free = restrict_to_free(
      assemble_stiffness_full(setup.fine,
                              std::vector<double>(setup.fine.n_elems(), 1.0)),
      setup.fine_dofs);

  if (ex == Example::Example2) {
    // u0 solves a(u0, v) = (5 sin(pi x1) sin(pi x2), v) on the fine mesh.
    const Vec g = gather_free(
        assemble_load_full(setup.fine,
                           [](double x, double y) {
                             return 5.0 * std::sin(M_PI * x) * std::sin(M_PI * y);
                           }),
        setup.fine_dofs);
    setup.u0 = SpdSolver(setup.K_free, "fine stiffness").solve(g);
    setup.v0 = Vec::Zero(setup.fine_dofs.n_free());
    setup.load_spatial = gather_free(
        assemble_load_full(setup.fine,
                           [](double x, double) { return std::sin(4 * M_PI * x); }),
        setup.fine_dofs);
    setup.load_time = [](double t) { return 1.0 - t; };
  } else {
    setup.u0 = Vec::Zero(setup.fine_dofs.n_free());
    setup.v0 = Vec::Zero(setup.fine_dofs.n_free());
    setup.load_spatial = gather_free(
        assemble_load_full(setup.fine, [](double, double) { return 1.0; }),
        setup.fine_dofs);
    setup.load_time = [](double) { return 1.0; };
  }
  return setup;
}

namespace {

std::string reference_cache_path(const std::string& dir, const ProblemSetup& setup,
                                 double dt_fine, int substeps, int n_snapshots) {
  std::uint64_t dt_bits;
  std::memcpy(&dt_bits, &dt_fine, sizeof dt_bits);
  char tag[128];
  std::snprintf(tag, sizeof tag, "ref-%s-f%d-seed%" PRIu64 "-%016" PRIx64 "-m%d-n%d.bin",
                example_name(setup.example).c_str(), setup.fine.level, setup.seed,
                dt_bits, substeps, n_snapshots);
  return dir + "/" + tag;
}

constexpr char kRefMagic[8] = {'L', 'O', 'D', 'W', 'R', '1', '\n', '\0'};

struct RefHeader {
  char magic[8];
  std::int32_t example = 0;
  std::int32_t fine_level = 0;
  std::int32_t substeps = 0;
  std::int32_t n_snapshots = 0;
  std::int32_t dim = 0;
  std::int32_t pad = 0;
  std::uint64_t seed = 0;
  double dt_fine = 0;
};

bool load_reference_cache(const std::string& path, const ProblemSetup& setup,
                          double dt_fine, int substeps, int n_snapshots,
                          ReferenceSolution& ref) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  RefHeader h;
  in.read(reinterpret_cast<char*>(&h), sizeof h);
  if (!in || !std::equal(std::begin(kRefMagic), std::end(kRefMagic), h.magic))
    return false;
  if (h.example != static_cast<int>(setup.example) || h.fine_level != setup.fine.level ||
      h.substeps != substeps || h.n_snapshots != n_snapshots ||
      h.dim != setup.fine_dofs.n_free() || h.seed != setup.seed || h.dt_fine != dt_fine)
    return false;
  ref.snapshots.assign(n_snapshots + 1, Vec(h.dim));
  for (Vec& snap : ref.snapshots) {
    in.read(reinterpret_cast<char*>(snap.data()),
            static_cast<std::streamsize>(sizeof(double)) * h.dim);
    if (!in) return false;
  }
  return true;
}

void save_reference_cache(const std::string& path, const ProblemSetup& setup,
                          const ReferenceSolution& ref, int n_snapshots) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ArgumentError("cannot open " + tmp.string() + " for writing");
    RefHeader h;
    std::copy(std::begin(kRefMagic), std::end(kRefMagic), h.magic);
    h.example = static_cast<int>(setup.example);
    h.fine_level = setup.fine.level;
    h.substeps = ref.substeps;
    h.n_snapshots = n_snapshots;
    h.dim = setup.fine_dofs.n_free();
    h.seed = setup.seed;
    h.dt_fine = ref.dt_fine;
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    for (const Vec& snap : ref.snapshots)
      out.write(reinterpret_cast<const char*>(snap.data()),
                static_cast<std::streamsize>(sizeof(double)) * snap.size());
    if (!out) throw ArgumentError("failed writing reference cache " + tmp.string());
  }
  fs::rename(tmp, target);
}

} // namespace

ReferenceSolution reference_solution(const ProblemSetup& setup, double snap_dt,
                                     int n_snapshots, const std::string& cache_dir) {
  if (!(snap_dt > 0) || n_snapshots < 1)
    throw ArgumentError("reference needs snap_dt > 0 and n_snapshots >= 1");

  ReferenceSolution ref;
  const double cfl_fine = cfl_timestep(setup.fine.mesh_size(), setup.beta);
  ref.substeps = static_cast<int>(std::ceil(snap_dt / cfl_fine - 1e-12));
  if (ref.substeps < 1) ref.substeps = 1;
  ref.dt_fine = snap_dt / ref.substeps;
  ref.snap_dt = snap_dt;

  const std::string path =
      cache_dir.empty() ? std::string()
                        : reference_cache_path(cache_dir, setup, ref.dt_fine,
                                               ref.substeps, n_snapshots);
  if (!path.empty() &&
      load_reference_cache(path, setup, ref.dt_fine, ref.substeps, n_snapshots, ref))
    return ref;

  TimeGrid grid;
  grid.dt = ref.dt_fine;
  grid.n_steps = n_snapshots * ref.substeps;
  grid.final_time = grid.n_steps * grid.dt;

  const SpdSolver msolver(setup.M_free, "fine mass");
  const LoadFunction load{setup.load_spatial, setup.load_time};
  const Vec f0 = load.is_zero() ? Vec(Vec::Zero(setup.u0.size()))
                                : Vec(load.factor_at(0.0) * load.spatial);
  const Vec u1 =
      taylor_first_step(msolver, setup.K_free, setup.u0, setup.v0, f0, grid.dt);

  LeapfrogOptions opts;
  opts.record_stride = ref.substeps;
  opts.cfl_dt = cfl_fine;
  RunResult run = leapfrog_run(msolver, setup.K_free, setup.u0, u1, load, grid, opts);
  ref.snapshots = std::move(run.trajectory.states);

  if (!path.empty()) save_reference_cache(path, setup, ref, n_snapshots);
  return ref;
}

double error_norm(const Trajectory& traj, const SpMat& basis,
                  const ReferenceSolution& ref, const ProblemSetup& setup) {
  if (traj.stride != 1)
    throw ArgumentError("error_norm expects a stride-1 trajectory");
  const double dt = traj.grid.dt;
  const int align = static_cast<int>(std::lround(dt / ref.snap_dt));
  if (align < 1 || std::abs(align * ref.snap_dt - dt) > 1e-9 * dt)
    throw ArgumentError("trajectory time step does not lie on the reference grid");
  const int n = traj.grid.n_steps;
  if (static_cast<int>(ref.snapshots.size()) <= n * align)
    throw ArgumentError("reference does not cover the trajectory's final time");

  double acc = 0;
  for (int i = 1; i <= n; ++i) {
    Vec d = basis * traj.at_step(i);
    d -= ref.snapshots[static_cast<std::size_t>(i) * align];
    acc += d.dot(setup.M_free * d) + d.dot(setup.K1_free * d);
  }
  return std::sqrt(dt * acc);
}

MethodRun run_method(const ProblemSetup& setup, int coarse_level, int ell,
                     MethodSpec method, double dt, double final_time,
                     const std::string& cache_dir, int jobs, bool override_cfl,
                     int record_stride) {
  MethodRun mr;
  const StructuredQuadMesh coarse = build_mesh(coarse_level);
  mr.grid = make_time_grid(dt, final_time);

  LeapfrogOptions opts;
  opts.record_stride = record_stride;
  opts.override_cfl = override_cfl;

  SpMat mass, stiffness;
  Vec u0, v0, spatial;

  if (method.variant == MethodVariant::StandardFEM) {
    opts.cfl_dt = cfl_timestep(coarse_level == setup.fine.level
                                   ? setup.fine.mesh_size()
                                   : coarse.mesh_size(),
                               setup.beta);
    if (coarse_level == setup.fine.level) {
      mass = setup.M_free;
      stiffness = setup.K_free;
      u0 = setup.u0;
      v0 = setup.v0;
      spatial = setup.load_spatial;
      mr.basis = identity(setup.fine_dofs.n_free());
    } else {
      const std::vector<double> coarse_coeff = sample_to_mesh(setup.field, coarse);
      const DofMap coarse_dofs = make_dof_map(coarse, setup.bc);
      mass = restrict_to_free(assemble_mass_full(coarse), coarse_dofs);
      stiffness = restrict_to_free(assemble_stiffness_full(coarse, coarse_coeff),
                                   coarse_dofs);
      // Nodal restriction of the fine initial data (coarse vertices are fine
      // vertices).
      const int r = setup.fine.cells / coarse.cells;
      const Vec u0_full = scatter_free(setup.u0, setup.fine_dofs, setup.fine.n_verts());
      const Vec v0_full = scatter_free(setup.v0, setup.fine_dofs, setup.fine.n_verts());
      u0.resize(coarse_dofs.n_free());
      v0.resize(coarse_dofs.n_free());
      for (int k = 0; k < coarse_dofs.n_free(); ++k) {
        const int z = coarse_dofs.free_list[k];
        const int fv =
            setup.fine.vertex_id(coarse.vertex_i(z) * r, coarse.vertex_j(z) * r);
        u0[k] = u0_full[fv];
        v0[k] = v0_full[fv];
      }
      Vec coarse_load = Vec::Zero(coarse_dofs.n_free());
      if (setup.load_spatial.size() > 0) {
        // The load's spatial factor is re-assembled on the coarse mesh.
        const SpatialFn f =
            setup.example == Example::Example2
                ? SpatialFn([](double x, double) { return std::sin(4 * M_PI * x); })
                : SpatialFn([](double, double) { return 1.0; });
        coarse_load = gather_free(assemble_load_full(coarse, f), coarse_dofs);
      }
      spatial = coarse_load;
      mr.basis = restrict_to_free(prolongation_matrix(coarse, setup.fine),
                                  setup.fine_dofs, coarse_dofs);
    }
  } else {
    opts.cfl_dt = cfl_timestep(coarse.mesh_size(), setup.beta);
    const double offline_start = now_seconds();
    const LodAssemblies ops =
        build_lod_assemblies(coarse, setup.fine, setup.coeff_values, setup.bc);
    const CorrectorSet set = build_or_load_corrector_set(ops, ell, cache_dir, jobs);
    const MultiscaleSystem ms = build_multiscale_system(ops, set);
    mr.offline_seconds = now_seconds() - offline_start;

    stiffness = ms.K_ms;
    u0 = ops.IH.matrix * setup.u0;
    v0 = ops.IH.matrix * setup.v0;
    if (method.variant == MethodVariant::LOD) {
      mass = ms.M_ms;
      spatial = ms.B.transpose() * setup.load_spatial;
    } else {
      mass = ms.M_fem;
      spatial = ops.P_free.transpose() * setup.load_spatial;
    }
    mr.basis = ms.B;
  }

  if (method.lumped_mass) mass = lump_mass(mass);

  const SpdSolver msolver(std::move(mass), variant_name(method.variant) + " mass");
  const LoadFunction load{std::move(spatial), setup.load_time};
  const Vec f0 = load.is_zero() ? Vec(Vec::Zero(u0.size()))
                                : Vec(load.factor_at(0.0) * load.spatial);
  const Vec u1 = taylor_first_step(msolver, stiffness, u0, v0, f0, mr.grid.dt);
  mr.result = leapfrog_run(msolver, stiffness, u0, u1, load, mr.grid, opts);
  return mr;
}

ErrorTable run_convergence_study(const ExperimentConfig& config) {
  validate_config(config);
  const std::string cache_dir = resolve_cache_dir(config);
  fs::create_directories(config.out_dir);
  fs::create_directories(cache_dir);

  ProblemSetup setup = build_problem(config.example, config.seed, config.fine_level);

  std::vector<int> levels = config.coarse_levels;
  std::sort(levels.begin(), levels.end());
  const int level_max = levels.back();
  const double snap_dt = cfl_timestep(build_mesh(level_max).mesh_size(), setup.beta);

  int n_snapshots = 1;
  for (int level : levels) {
    const double dt = cfl_timestep(build_mesh(level).mesh_size(), setup.beta);
    const int n = make_time_grid(dt, config.final_time).n_steps;
    n_snapshots = std::max(n_snapshots, n * (1 << (level_max - level)));
  }
  const ReferenceSolution ref =
      reference_solution(setup, snap_dt, n_snapshots, cache_dir);

  ErrorTable table;
  for (MethodVariant variant : config.variants) {
    const std::vector<int> ells =
        variant == MethodVariant::StandardFEM ? std::vector<int>{0} : config.ells;
    for (int ell : ells) {
      double prev_error = std::numeric_limits<double>::quiet_NaN();
      for (int level : levels) {
        ErrorRow row;
        row.coarse_level = level;
        row.H = build_mesh(level).mesh_size();
        row.ell = ell;
        row.variant = variant;
        row.order = std::numeric_limits<double>::quiet_NaN();
        const double t0 = now_seconds();
        try {
          const double dt = cfl_timestep(row.H, setup.beta);
          MethodRun mr =
              run_method(setup, level, ell, MethodSpec{variant, config.lumped_mass},
                         dt, config.final_time, cache_dir, config.jobs);
          row.error = error_norm(mr.result.trajectory, mr.basis, ref, setup);
          if (std::isfinite(prev_error) && row.error > 0)
            row.order = std::log2(prev_error / row.error);
          prev_error = row.error;
        } catch (const Error& e) {
          row.error = std::numeric_limits<double>::quiet_NaN();
          row.status = e.what();
          prev_error = std::numeric_limits<double>::quiet_NaN();
        }
        row.seconds = now_seconds() - t0;
        table.rows.push_back(std::move(row));
      }
    }
  }

  write_study_outputs(config, table);
  return table;
}

void write_error_table_csv(const std::string& path, const ErrorTable& table) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open " + path + " for writing");
  out << "level,H,ell,variant,error,order,seconds,status\n";
  for (const ErrorRow& row : table.rows) {
    out << row.coarse_level << ',' << format_double(row.H) << ',' << row.ell << ','
        << variant_name(row.variant) << ',' << format_double(row.error) << ','
        << format_double(row.order) << ',' << format_double(row.seconds) << ','
        << (row.status == "ok" ? "ok" : "error") << '\n';
  }
}

void write_study_outputs(const ExperimentConfig& config, const ErrorTable& table) {
  fs::create_directories(config.out_dir);
  write_error_table_csv(config.out_dir + "/errors.csv", table);

  // Per-series data files for gnuplot, plus the script itself.
  struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
  };
  std::vector<Series> series;
  for (const ErrorRow& row : table.rows) {
    if (row.status != "ok" || !std::isfinite(row.error)) continue;
    std::string name = variant_name(row.variant);
    if (row.variant != MethodVariant::StandardFEM)
      name += "_l" + std::to_string(row.ell);
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const Series& s) { return s.name == name; });
    if (it == series.end()) {
      series.push_back({name, {}});
      it = std::prev(series.end());
    }
    it->points.emplace_back(row.H, row.error);
  }
  for (const Series& s : series) {
    std::ofstream dat(config.out_dir + "/series_" + s.name + ".dat");
    for (const auto& [h, e] : s.points)
      dat << format_double(h) << ' ' << format_double(e) << '\n';
  }

  {
    std::ofstream gp(config.out_dir + "/plot.gp");
    gp << "set terminal pngcairo size 900,700\n"
       << "set output 'errors.png'\n"
       << "set logscale xy\n"
       << "set xlabel 'mesh size H'\n"
       << "set ylabel 'error'\n"
       << "set key top left\n"
       << "set format y '10^{%L}'\n";
    double guide = 0.2;
    for (const Series& s : series)
      if (!s.points.empty()) guide = s.points.front().second / s.points.front().first;
    gp << "plot ";
    bool first = true;
    for (const Series& s : series) {
      if (!first) gp << ", \\\n     ";
      gp << "'series_" << s.name << ".dat' using 1:2 with linespoints title '"
         << s.name << "'";
      first = false;
    }
    if (!first) gp << ", \\\n     ";
    gp << format_double(guide) << "*x with lines dashtype 2 title 'order 1'\n";
  }

  json j;
  j["example"] = example_name(config.example);
  j["seed"] = config.seed;
  j["coarse_levels"] = config.coarse_levels;
  j["fine_level"] = config.fine_level;
  j["ells"] = config.ells;
  std::vector<std::string> methods;
  for (MethodVariant v : config.variants) methods.push_back(variant_name(v));
  j["methods"] = methods;
  j["T"] = config.final_time;
  j["lumped_mass"] = config.lumped_mass;
  j["rows"] = json::array();
  for (const ErrorRow& row : table.rows) {
    json r;
    r["level"] = row.coarse_level;
    r["H"] = row.H;
    r["ell"] = row.ell;
    r["variant"] = variant_name(row.variant);
    if (std::isfinite(row.error)) r["error"] = row.error;
    if (std::isfinite(row.order)) r["order"] = row.order;
    r["seconds"] = row.seconds;
    r["status"] = row.status;
    j["rows"].push_back(r);
  }
  std::ofstream out(config.out_dir + "/study.json");
  out << j.dump(2) << '\n';
}

void export_trajectory_csv(const std::string& path, const Trajectory& traj,
                           const SpMat& basis, const StructuredQuadMesh& fine,
                           const DofMap& fine_dofs, int every) {
  if (every < 1) throw ArgumentError("snapshot interval must be >= 1");
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open " + path + " for writing");
  out << "step,t";
  for (int v = 0; v < fine.n_verts(); ++v) out << ",v" << v;
  out << '\n';
  for (int k = 0; k < traj.n_recorded(); ++k) {
    const int step = k * traj.stride;
    if (step % every != 0) continue;
    const Vec fine_free = basis * traj.states[k];
    const Vec full = scatter_free(fine_free, fine_dofs, fine.n_verts());
    out << step << ',' << format_double(step * traj.grid.dt);
    for (int v = 0; v < full.size(); ++v) out << ',' << format_double(full[v]);
    out << '\n';
  }
}

void export_energy_csv(const std::string& path, const std::vector<double>& energy,
                       double dt) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open " + path + " for writing");
  out << "n,t_mid,energy\n";
  for (std::size_t n = 0; n < energy.size(); ++n)
    out << n << ',' << format_double((n + 0.5) * dt) << ','
        << format_double(energy[n]) << '\n';
}

} // namespace lodwave

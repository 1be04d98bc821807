#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lodwave/coefficient.hpp"
#include "lodwave/corrector.hpp"
#include "lodwave/leapfrog.hpp"

namespace lodwave {

/// The two experiment families. SyntheticEx1 stands in for the first
/// experiment with a seeded random checkerboard coefficient matching its
/// bounds (alpha = 0.04, beta = 1.96).
enum class Example { Example2, SyntheticEx1 };

std::string example_name(Example ex);
Example example_from_name(const std::string& name);

struct ExperimentConfig {
  Example example = Example::Example2;
  std::uint64_t seed = 1;
  std::vector<int> coarse_levels;
  int fine_level = 7;
  std::vector<int> ells = {2};
  std::vector<MethodVariant> variants = {MethodVariant::LOD};
  double final_time = 1.0;
  bool lumped_mass = false;
  std::string out_dir = "study_out";
  std::string cache_dir; ///< empty: $LODWAVE_CACHE_DIR, else out_dir/cache
  int jobs = 1;
};

ExperimentConfig experiment_config_from_json(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
void validate_config(const ExperimentConfig& config);
std::string resolve_cache_dir(const ExperimentConfig& config);

/// Everything defined on the reference fine mesh and shared by all rows of a
/// study: coefficient sample, matrices, initial data, load.
struct ProblemSetup {
  Example example = Example::Example2;
  std::uint64_t seed = 1;
  BoundarySpec bc = BoundarySpec::FullBoundary;
  StructuredQuadMesh fine;
  CoefficientField field;
  std::vector<double> coeff_values;
  DofMap fine_dofs;
  SpMat K_free;  ///< coefficient stiffness on free dofs
  SpMat M_free;  ///< mass on free dofs
  SpMat K1_free; ///< unit-coefficient stiffness (H1 seminorm)
  Vec u0;        ///< initial displacement, fine free dofs
  Vec v0;        ///< initial velocity, fine free dofs
  Vec load_spatial;
  std::function<double(double)> load_time;
  double beta = 1; ///< coefficient upper bound entering the CFL constant
};

ProblemSetup build_problem(Example ex, std::uint64_t seed, int fine_level);

/// Standard-FEM leapfrog solution on the fine mesh, stepped at
/// dt_fine = snap_dt / substeps <= CFL(h) and recorded on the snap_dt grid,
/// so every coarse-method time point lands on a snapshot. Cached on disk
/// keyed by the exact run parameters.
struct ReferenceSolution {
  double dt_fine = 0;
  int substeps = 1;
  double snap_dt = 0;
  std::vector<Vec> snapshots; ///< snapshots[k] at time k*snap_dt
};

ReferenceSolution reference_solution(const ProblemSetup& setup, double snap_dt,
                                     int n_snapshots, const std::string& cache_dir);

/// Discrete L2(0,T;H1_Gamma) norm of the difference between a stride-1
/// method trajectory (elevated through `basis`) and the reference, summed
/// over the trajectory's time points i*dt, i = 1..N.
double error_norm(const Trajectory& traj, const SpMat& basis,
                  const ReferenceSolution& ref, const ProblemSetup& setup);

/// One method run: offline corrector stage (cached), start step, leapfrog.
struct MethodRun {
  RunResult result;
  SpMat basis; ///< map of trajectory states to fine free dofs
  TimeGrid grid;
  double offline_seconds = 0;
};

MethodRun run_method(const ProblemSetup& setup, int coarse_level, int ell,
                     MethodSpec method, double dt, double final_time,
                     const std::string& cache_dir, int jobs,
                     bool override_cfl = false, int record_stride = 1);

struct ErrorRow {
  int coarse_level = 0;
  double H = 0;
  int ell = 0;
  MethodVariant variant = MethodVariant::LOD;
  double error = 0;
  double order = 0; ///< log2(e_{2H}/e_H); NaN on the first row of a series
  double seconds = 0;
  std::string status = "ok";
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
};

/// Runs every (variant, ell, H) combination of the config, coarsest H first,
/// against one shared reference. Errors in a row are recorded and the study
/// continues. Writes CSV, JSON and a gnuplot script into out_dir.
ErrorTable run_convergence_study(const ExperimentConfig& config);

void write_error_table_csv(const std::string& path, const ErrorTable& table);
void write_study_outputs(const ExperimentConfig& config, const ErrorTable& table);

/// Trajectory snapshots as CSV rows "step,t,v_0,...,v_{n-1}" over all fine
/// vertices (zeros on Gamma).
void export_trajectory_csv(const std::string& path, const Trajectory& traj,
                           const SpMat& basis, const StructuredQuadMesh& fine,
                           const DofMap& fine_dofs, int every);

void export_energy_csv(const std::string& path, const std::vector<double>& energy,
                       double dt);

} // namespace lodwave

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lodwave/fem.hpp"
#include "lodwave/linalg.hpp"

namespace lodwave {

/// Uniform time grid covering [0, final_time] with N = ceil(T/dt) steps,
/// so N dt >= T > (N-1) dt.
struct TimeGrid {
  double dt = 0;
  int n_steps = 0;
  double final_time = 0;
};

TimeGrid make_time_grid(double dt, double final_time);

/// Practical CFL step size dt = sqrt(2) beta^{-1/2} 0.14 H.
double cfl_timestep(double H, double beta);

enum class MethodVariant { StandardFEM, LOD, LODSimplified };
std::string variant_name(MethodVariant v);
MethodVariant variant_from_name(const std::string& name);

struct MethodSpec {
  MethodVariant variant = MethodVariant::LOD;
  bool lumped_mass = false; ///< experimental; see the study module
};

/// Separable right-hand side f(x,t) = time_scale(t) * spatial, with the
/// spatial part already projected onto the test space of the scheme. Both
/// study examples have this form. An empty spatial vector means f == 0.
struct LoadFunction {
  Vec spatial;
  std::function<double(double)> time_scale;

  bool is_zero() const { return spatial.size() == 0; }
  double factor_at(double t) const { return time_scale ? time_scale(t) : 1.0; }
};

inline LoadFunction zero_load() { return {}; }

/// Time-stepped states u_n recorded every `stride` steps (states[k] is the
/// state at step k*stride). Coarse runs record every step.
struct Trajectory {
  TimeGrid grid;
  int stride = 1;
  std::vector<Vec> states;

  const Vec& at_step(int step) const;
  int n_recorded() const { return static_cast<int>(states.size()); }
};

/// Trajectory plus the discrete energies E^{n+1/2}, n = 0..N-1.
struct RunResult {
  Trajectory trajectory;
  std::vector<double> energy;
};

struct LeapfrogOptions {
  int record_stride = 1;
  double cfl_dt = 0;        ///< CFL limit on dt; 0 disables the check
  bool override_cfl = false;
  double blowup_limit = 1e100; ///< sup-norm threshold treated as blow-up
};

/// Second-order Taylor start: u1 = u0 + dt v0 + dt^2/2 M^{-1}(f0 - K u0).
Vec taylor_first_step(const SpdSolver& mass_solver, const SpMat& stiffness,
                      const Vec& u0, const Vec& v0, const Vec& f0, double dt);

/// Central-difference leapfrog for M u'' + K u = F:
///   u_{n+1} = 2 u_n - u_{n-1} + dt^2 M^{-1}(F_n - K u_n),  n = 1..N-1,
/// from the given start pair (u0, u1). Throws InstabilityError naming the
/// step when a state stops being finite (CFL violation signal) and
/// ArgumentError when dt exceeds the CFL limit without the override flag.
RunResult leapfrog_run(const SpdSolver& mass_solver, const SpMat& stiffness,
                       const Vec& u0, const Vec& u1, const LoadFunction& load,
                       const TimeGrid& grid, const LeapfrogOptions& opts = {});

/// Fine-space representation basis * u_n of every recorded state.
std::vector<Vec> elevate_to_fine(const Trajectory& traj, const SpMat& basis);

/// Largest relative violation of the per-step identity
///   2(E^{n+1/2} - E^{n-1/2}) = dt (F_n, du_{n+1/2} + du_{n-1/2}),
/// an exact algebraic property of the scheme. Requires a stride-1 run.
double energy_identity_max_residual(const RunResult& run, const LoadFunction& load);

} // namespace lodwave

#include "lodwave/leapfrog.hpp"

#include <cmath>

#include "lodwave/errors.hpp"

namespace lodwave {

TimeGrid make_time_grid(double dt, double final_time) {
  if (!(dt > 0) || !(final_time > 0))
    throw ArgumentError("time grid requires dt > 0 and final_time > 0");
  TimeGrid grid;
  grid.dt = dt;
  // Guard against T/dt landing a hair above an integer.
  grid.n_steps = static_cast<int>(std::ceil(final_time / dt - 1e-12));
  if (grid.n_steps < 1) grid.n_steps = 1;
  grid.final_time = final_time;
  return grid;
}

double cfl_timestep(double H, double beta) {
  if (!(H > 0) || !(beta > 0)) throw ArgumentError("cfl_timestep requires H, beta > 0");
  return std::sqrt(2.0) * 0.14 / std::sqrt(beta) * H;
}

std::string variant_name(MethodVariant v) {
  switch (v) {
    case MethodVariant::StandardFEM: return "standardfem";
    case MethodVariant::LOD: return "lod";
    case MethodVariant::LODSimplified: return "lod-simplified";
  }
  return "unknown";
}

MethodVariant variant_from_name(const std::string& name) {
  if (name == "standardfem") return MethodVariant::StandardFEM;
  if (name == "lod") return MethodVariant::LOD;
  if (name == "lod-simplified" || name == "lodsimplified")
    return MethodVariant::LODSimplified;
  throw ArgumentError("unknown method variant: " + name);
}

const Vec& Trajectory::at_step(int step) const {
  if (step < 0 || step % stride != 0 ||
      step / stride >= static_cast<int>(states.size()))
    throw ArgumentError("trajectory state at step " + std::to_string(step) +
                        " was not recorded (stride " + std::to_string(stride) + ")");
  return states[step / stride];
}

Vec taylor_first_step(const SpdSolver& mass_solver, const SpMat& stiffness,
                      const Vec& u0, const Vec& v0, const Vec& f0, double dt) {
  const Vec accel = mass_solver.solve(f0 - stiffness * u0);
  return u0 + dt * v0 + 0.5 * dt * dt * accel;
}

RunResult leapfrog_run(const SpdSolver& mass_solver, const SpMat& stiffness,
                       const Vec& u0, const Vec& u1, const LoadFunction& load,
                       const TimeGrid& grid, const LeapfrogOptions& opts) {
  const int n = grid.n_steps;
  const double dt = grid.dt;
  if (opts.cfl_dt > 0 && !opts.override_cfl && grid.dt > opts.cfl_dt * (1 + 1e-9))
    throw ArgumentError("dt = " + std::to_string(grid.dt) + " violates the CFL limit " +
                        std::to_string(opts.cfl_dt) +
                        "; set the override flag to force the run");
  if (opts.record_stride < 1 || n % opts.record_stride != 0)
    throw ArgumentError("record stride must be positive and divide the step count");

  const SpMat& mass = mass_solver.matrix();

  RunResult out;
  out.trajectory.grid = grid;
  out.trajectory.stride = opts.record_stride;
  out.trajectory.states.reserve(n / opts.record_stride + 1);
  out.energy.reserve(n);

  Vec u_prev = u0;
  Vec u_cur = u1;
  out.trajectory.states.push_back(u_prev);
  if (opts.record_stride == 1) out.trajectory.states.push_back(u_cur);

  Vec ku = stiffness * u_cur;
  const auto record_energy = [&]() {
    // E^{n+1/2} with (u_prev, u_cur) = (u_n, u_{n+1}); ku = K u_{n+1}.
    const Vec du = (u_cur - u_prev) / dt;
    out.energy.push_back(0.5 * (du.dot(mass * du) + u_prev.dot(ku)));
  };

  for (int step = 1; step < n; ++step) {
    record_energy();
    Vec rhs = -ku;
    if (!load.is_zero()) rhs += load.factor_at(step * dt) * load.spatial;
    Vec u_next = 2.0 * u_cur - u_prev + dt * dt * mass_solver.solve(rhs);

    const double peak = u_next.array().abs().maxCoeff();
    if (!(peak <= opts.blowup_limit))
      throw InstabilityError(step + 1, "non-finite or blown-up state at step " +
                                           std::to_string(step + 1) +
                                           " (CFL violation signal)");

    u_prev = std::move(u_cur);
    u_cur = std::move(u_next);
    ku = stiffness * u_cur;
    if ((step + 1) % opts.record_stride == 0)
      out.trajectory.states.push_back(u_cur);
  }
  record_energy();
  return out;
}

std::vector<Vec> elevate_to_fine(const Trajectory& traj, const SpMat& basis) {
  std::vector<Vec> fine;
  fine.reserve(traj.states.size());
  for (const Vec& u : traj.states) fine.push_back(basis * u);
  return fine;
}

double energy_identity_max_residual(const RunResult& run, const LoadFunction& load) {
  const Trajectory& traj = run.trajectory;
  if (traj.stride != 1)
    throw ArgumentError("energy identity check requires a stride-1 trajectory");
  const double dt = traj.grid.dt;
  double worst = 0;
  for (int step = 1; step + 1 <= traj.grid.n_steps; ++step) {
    const double lhs = 2.0 * (run.energy[step] - run.energy[step - 1]);
    double rhs = 0;
    if (!load.is_zero()) {
      const Vec du = traj.states[step + 1] - traj.states[step - 1];
      rhs = load.factor_at(step * dt) * load.spatial.dot(du);
    }
    const double denom =
        std::max({std::abs(run.energy[step]), std::abs(run.energy[step - 1]), 1e-300});
    worst = std::max(worst, std::abs(lhs - rhs) / denom);
  }
  return worst;
}

} // namespace lodwave

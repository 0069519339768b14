#include "compdiff/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace compdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Workspace {
    std::vector<double> k1a, k1b, k2a, k2b, tmpa, tmpb, flux0, flux1, frozen_row;
    void resize(int nx) {
        for (auto* v : {&k1a, &k1b, &k2a, &k2b, &tmpa, &tmpb, &flux0, &flux1, &frozen_row})
            v->assign(nx, 0.0);
    }
};

inline int wrap(int i, int n) { return i < 0 ? i + n : (i >= n ? i - n : i); }

// d0/d1 may be null to skip a field (decoupled solves).
void eval_rhs(const SystemParams& p, const double* f0, const double* f1, double* d0, double* d1,
              Workspace& ws) {
    const int nx = p.grid.nx;
    const double dx = p.grid.dx();
    const double inv_dx2 = 1.0 / (dx * dx);
    const double R = p.reactions_enabled ? 1.0 : 0.0;
    const bool periodic = p.grid.bc == Bc::Periodic;

    auto lap = [&](const double* f, int i) {
        const int im = periodic ? wrap(i - 1, nx) : std::max(i - 1, 0);
        const int ip = periodic ? wrap(i + 1, nx) : std::min(i + 1, nx - 1);
        return (f[im] - 2.0 * f[i] + f[ip]) * inv_dx2;
    };

    if (p.system_id == SystemId::ReactionDiffusion) {
        const double du = p.diffusivities[0], dv = p.diffusivities[1];
        const double k = p.reaction_coeffs[0];
        for (int i = 0; i < nx; ++i) {
            if (d0) d0[i] = du * lap(f0, i) + R * (f0[i] - f0[i] * f0[i] * f0[i] - k - f1[i]);
            if (d1) d1[i] = dv * lap(f1, i) + R * (f0[i] - f1[i]);
        }
        return;
    }

    // Modified Burgers: f0 = c (reactive scalar), f1 = v (velocity).
    // Conservative fluxes at interfaces i+1/2 (Rusanov for v, upwind for c),
    // so the spatial means of both fields are conserved when reactions are off.
    const double dc = p.diffusivities[0], nu = p.diffusivities[1];
    const double g = p.reaction_coeffs[0], kr = p.reaction_coeffs[1];
    double* Gc = ws.flux0.data();
    double* Fv = ws.flux1.data();
    for (int i = 0; i < nx; ++i) {
        const int ip = periodic ? wrap(i + 1, nx) : std::min(i + 1, nx - 1);
        const double vl = f1[i], vr = f1[ip];
        const double a = std::max(std::abs(vl), std::abs(vr));
        Fv[i] = 0.25 * (vl * vl + vr * vr) - 0.5 * a * (vr - vl);
        const double vhat = 0.5 * (vl + vr);
        Gc[i] = vhat >= 0.0 ? vhat * f0[i] : vhat * f0[ip];
    }
    for (int i = 0; i < nx; ++i) {
        const int im = periodic ? wrap(i - 1, nx) : std::max(i - 1, 0);
        if (d0) d0[i] = -(Gc[i] - Gc[im]) / dx + dc * lap(f0, i) - R * kr * f0[i] * f1[i];
        if (d1) d1[i] = -(Fv[i] - Fv[im]) / dx + nu * lap(f1, i) - R * g * f0[i];
    }
}

double max_abs(const double* f, int n) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(f[i]));
    return m;
}

// Substeps for one output interval: dt_sub <= 0.4 dx^2 / (2 max D) and
// dt_sub <= 0.4 dx / max|v|.
int substeps(const SystemParams& p, double vmax, int refine) {
    const double dx = p.grid.dx();
    double bound = 0.4 * dx * dx / (2.0 * p.max_diffusivity());
    if (p.system_id == SystemId::ModifiedBurgers && vmax > 1e-12)
        bound = std::min(bound, 0.4 * dx / vmax);
    const double dt_out = p.grid.dt();
    int m = std::max(1, static_cast<int>(std::ceil(dt_out / bound)));
    return m * std::max(1, refine);
}

void check_finite(const double* f, int n, int step, const SystemParams& p) {
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(f[i]))
            throw NumericalError(
                "solver instability at output step " + std::to_string(step) +
                ": non-finite value; violated stability bound dt_sub <= min(0.4 dx^2/(2 D), "
                "0.4 dx/max|v|) with dx = " +
                std::to_string(p.grid.dx()));
}

void pin_dirichlet(double* f, const std::vector<double>& ic, int nx) {
    f[0] = ic[0];
    f[nx - 1] = ic[nx - 1];
}

}  // namespace

GridSpec SystemParams::default_grid(SystemId id, int nx, int nt) {
    if (id == SystemId::ReactionDiffusion)
        return GridSpec(nx > 0 ? nx : 20, nt > 0 ? nt : 500, -1.0, 1.0, 5.0, Bc::Periodic);
    return GridSpec(nx > 0 ? nx : 128, nt > 0 ? nt : 100, -1.0, 1.0, 1.0, Bc::Periodic);
}

SystemParams SystemParams::defaults(SystemId id, const GridSpec& g) {
    SystemParams p;
    p.system_id = id;
    p.grid = g;
    if (id == SystemId::ReactionDiffusion) {
        p.diffusivities = {1e-3, 5e-3};
        p.reaction_coeffs = {5e-3};
        p.viscosity = 0.0;
    } else {
        p.viscosity = 0.08 / kPi;
        p.diffusivities = {0.03, p.viscosity};
        p.reaction_coeffs = {0.5, 0.5};
    }
    p.validate();
    return p;
}

std::vector<std::string> SystemParams::field_names() const {
    if (system_id == SystemId::ReactionDiffusion) return {"u", "v"};
    return {"c", "v"};
}

double SystemParams::max_diffusivity() const {
    return *std::max_element(diffusivities.begin(), diffusivities.end());
}

void SystemParams::validate() const {
    if (diffusivities.size() != 2)
        throw UsageError("SystemParams: expected one diffusivity per field");
    for (double d : diffusivities)
        if (!(d > 0.0)) throw UsageError("SystemParams: diffusivities must be positive");
    const std::size_t want = system_id == SystemId::ReactionDiffusion ? 1 : 2;
    if (reaction_coeffs.size() != want)
        throw UsageError("SystemParams: wrong reaction coefficient count");
    if (!(0.4 * grid.dx() * grid.dx() / (2.0 * max_diffusivity()) > 0.0))
        throw UsageError("SystemParams: degenerate stability bound");
}

FieldSet solve_coupled(const SystemParams& params, const std::vector<std::vector<double>>& ics,
                       const SolveOptions& opt) {
    params.validate();
    const int nx = params.grid.nx, nt = params.grid.nt;
    if (ics.size() != 2) throw UsageError("solve_coupled: expected 2 initial conditions");
    for (const auto& ic : ics) {
        if (static_cast<int>(ic.size()) != nx) throw UsageError("solve_coupled: ic length != nx");
        for (double v : ic)
            if (!std::isfinite(v)) throw UsageError("solve_coupled: non-finite ic");
    }

    Tensor traj0({nt, nx}), traj1({nt, nx});
    std::vector<double> f0 = ics[0], f1 = ics[1];
    std::copy(f0.begin(), f0.end(), traj0.data());
    std::copy(f1.begin(), f1.end(), traj1.data());

    Workspace ws;
    ws.resize(nx);
    const double dt_out = params.grid.dt();
    for (int n = 1; n < nt; ++n) {
        const int m = substeps(params, max_abs(f1.data(), nx), opt.refine);
        const double dt = dt_out / m;
        for (int s = 0; s < m; ++s) {
            eval_rhs(params, f0.data(), f1.data(), ws.k1a.data(), ws.k1b.data(), ws);
            for (int i = 0; i < nx; ++i) {
                ws.tmpa[i] = f0[i] + dt * ws.k1a[i];
                ws.tmpb[i] = f1[i] + dt * ws.k1b[i];
            }
            eval_rhs(params, ws.tmpa.data(), ws.tmpb.data(), ws.k2a.data(), ws.k2b.data(), ws);
            for (int i = 0; i < nx; ++i) {
                f0[i] += 0.5 * dt * (ws.k1a[i] + ws.k2a[i]);
                f1[i] += 0.5 * dt * (ws.k1b[i] + ws.k2b[i]);
            }
            if (params.grid.bc == Bc::Dirichlet) {
                pin_dirichlet(f0.data(), ics[0], nx);
                pin_dirichlet(f1.data(), ics[1], nx);
            }
        }
        check_finite(f0.data(), nx, n, params);
        check_finite(f1.data(), nx, n, params);
        std::copy(f0.begin(), f0.end(), traj0.data() + static_cast<std::size_t>(n) * nx);
        std::copy(f1.begin(), f1.end(), traj1.data() + static_cast<std::size_t>(n) * nx);
    }

    const auto names = params.field_names();
    std::vector<Field> fields;
    fields.emplace_back(params.grid, std::move(traj0), names[0]);
    fields.emplace_back(params.grid, std::move(traj1), names[1]);
    return FieldSet(std::move(fields), ics, params.system_id);
}

Field solve_decoupled(const SystemParams& params, int solve_index, const Field& frozen,
                      const std::vector<double>& ic, const SolveOptions& opt) {
    params.validate();
    const int nx = params.grid.nx, nt = params.grid.nt;
    if (solve_index != 0 && solve_index != 1)
        throw UsageError("solve_decoupled: solve_index must be 0 or 1");
    if (frozen.data.dim(0) != nt || frozen.data.dim(1) != nx)
        throw UsageError("solve_decoupled: frozen field must have full (nt, nx) shape");
    if (static_cast<int>(ic.size()) != nx) throw UsageError("solve_decoupled: ic length != nx");

    Tensor traj({nt, nx});
    std::vector<double> f = ic;
    std::copy(f.begin(), f.end(), traj.data());

    Workspace ws;
    ws.resize(nx);
    const double dt_out = params.grid.dt();

    // Frozen trajectory linearly interpolated at substep times.
    auto frozen_at = [&](double time, double* row) {
        double s = time / dt_out;
        s = std::clamp(s, 0.0, static_cast<double>(nt - 1));
        const int i0 = std::min(static_cast<int>(s), nt - 2);
        const double w = s - i0;
        const double* r0 = frozen.data.data() + static_cast<std::size_t>(i0) * nx;
        const double* r1 = r0 + nx;
        for (int i = 0; i < nx; ++i) row[i] = (1.0 - w) * r0[i] + w * r1[i];
    };

    std::vector<double> other(nx), other2(nx);
    for (int n = 1; n < nt; ++n) {
        const double t0 = (n - 1) * dt_out;
        double vmax;
        if (solve_index == 1) {
            vmax = max_abs(f.data(), nx);
        } else {
            frozen_at(t0, other.data());
            vmax = max_abs(other.data(), nx);
        }
        const int m = substeps(params, vmax, opt.refine);
        const double dt = dt_out / m;
        for (int s = 0; s < m; ++s) {
            const double tau = t0 + s * dt;
            frozen_at(tau, other.data());
            frozen_at(tau + dt, other2.data());
            const double* self = f.data();
            double* k1 = ws.k1a.data();
            double* k2 = ws.k2a.data();
            if (solve_index == 0)
                eval_rhs(params, self, other.data(), k1, nullptr, ws);
            else
                eval_rhs(params, other.data(), self, nullptr, k1, ws);
            for (int i = 0; i < nx; ++i) ws.tmpa[i] = f[i] + dt * k1[i];
            if (solve_index == 0)
                eval_rhs(params, ws.tmpa.data(), other2.data(), k2, nullptr, ws);
            else
                eval_rhs(params, other2.data(), ws.tmpa.data(), nullptr, k2, ws);
            for (int i = 0; i < nx; ++i) f[i] += 0.5 * dt * (k1[i] + k2[i]);
            if (params.grid.bc == Bc::Dirichlet) pin_dirichlet(f.data(), ic, nx);
        }
        check_finite(f.data(), nx, n, params);
        std::copy(f.begin(), f.end(), traj.data() + static_cast<std::size_t>(n) * nx);
    }
    return Field(params.grid, std::move(traj), params.field_names()[solve_index]);
}

}  // namespace compdiff

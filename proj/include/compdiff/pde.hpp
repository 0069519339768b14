#pragma once

#include <vector>

#include "compdiff/grid.hpp"

namespace compdiff {

// Concrete coupled systems, N = 2 fields each.
//
// Reaction-Diffusion (fields u, v), FitzHugh-Nagumo-type pair:
//   u_t = D_u u_xx + u - u^3 - k - v
//   v_t = D_v v_xx + u - v
//
// Modified Burgers with reaction (fields c, v), conservative transport:
//   c_t + (v c)_x   = D_c c_xx - k_r c v
//   v_t + (v^2/2)_x = nu  v_xx - g c
// Defaults: nu = 0.08/pi, D_c = 0.03, g = 0.5, k_r = 0.5 on x in [-1,1],
// t in [0,1]; strong enough coupling to matter, diffusive enough that shock
// concentration stays resolved on the 128-point grid.
struct SystemParams {
    SystemId system_id = SystemId::ReactionDiffusion;
    GridSpec grid;
    std::vector<double> diffusivities;    // per field, in field order
    std::vector<double> reaction_coeffs;  // RD: {k}; Burgers: {g, k_r}
    double viscosity = 0.0;               // Burgers velocity viscosity (== diffusivities[1])
    bool reactions_enabled = true;        // false zeroes every non-transport term

    static SystemParams defaults(SystemId id, const GridSpec& g);
    static GridSpec default_grid(SystemId id, int nx = 0, int nt = 0);

    std::vector<std::string> field_names() const;
    int n_fields() const { return 2; }
    double max_diffusivity() const;
    void validate() const;
};

struct SolveOptions {
    int refine = 1;  // multiplies the substep count (self-convergence studies)
};

// Evolve both fields jointly from the given initial conditions.
FieldSet solve_coupled(const SystemParams& params, const std::vector<std::vector<double>>& ics,
                       const SolveOptions& opt = {});

// Evolve field `solve_index` with the other field frozen to the given
// trajectory (linearly interpolated in time at substeps).
Field solve_decoupled(const SystemParams& params, int solve_index, const Field& frozen,
                      const std::vector<double>& ic, const SolveOptions& opt = {});

}  // namespace compdiff

#pragma once

#include <string>
#include <vector>

#include "compdiff/tensor.hpp"

namespace compdiff {

enum class Bc { Periodic, Dirichlet };

enum class SystemId { ReactionDiffusion, ModifiedBurgers };

std::string to_string(Bc bc);
std::string to_string(SystemId id);
Bc bc_from_string(const std::string& s);
SystemId system_from_string(const std::string& s);

// Space-time grid. Fields are stored time-major, shape (nt, nx).
struct GridSpec {
    int nx = 0;
    int nt = 0;
    double x_min = 0.0;
    double x_max = 0.0;
    double t_max = 0.0;
    Bc bc = Bc::Periodic;

    GridSpec() = default;
    GridSpec(int nx_, int nt_, double x_min_, double x_max_, double t_max_, Bc bc_);

    // Periodic grids exclude the duplicated endpoint, Dirichlet grids include both.
    double dx() const {
        return bc == Bc::Periodic ? (x_max - x_min) / nx : (x_max - x_min) / (nx - 1);
    }
    double dt() const { return t_max / (nt - 1); }
    double x(int i) const { return x_min + dx() * i; }
    double t(int n) const { return dt() * n; }

    bool operator==(const GridSpec& o) const = default;
};

// One scalar PDE variable on a space-time grid.
struct Field {
    GridSpec grid;
    Tensor data;  // shape (nt, nx)
    std::string name;

    Field() = default;
    Field(GridSpec g, Tensor d, std::string name_);

    static Field zeros(const GridSpec& g, std::string name = "");
};

// The coupled fields of one sample plus their initial conditions.
struct FieldSet {
    std::vector<Field> fields;
    std::vector<std::vector<double>> ics;  // each length nx
    SystemId system_id = SystemId::ReactionDiffusion;

    FieldSet() = default;
    FieldSet(std::vector<Field> fields_, std::vector<std::vector<double>> ics_, SystemId id);

    const GridSpec& grid() const { return fields.front().grid; }
    int n_fields() const { return static_cast<int>(fields.size()); }
};

struct FieldStats {
    double mean = 0.0;
    double std = 0.0;
};

// Mean and population standard deviation over all nt*nx entries.
FieldStats field_stats(const Field& f);

}  // namespace compdiff

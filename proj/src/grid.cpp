#include "compdiff/grid.hpp"

#include <cmath>

namespace compdiff {

std::string to_string(Bc bc) { return bc == Bc::Periodic ? "periodic" : "dirichlet"; }

std::string to_string(SystemId id) {
    return id == SystemId::ReactionDiffusion ? "rd" : "burgers";
}

Bc bc_from_string(const std::string& s) {
    if (s == "periodic") return Bc::Periodic;
    if (s == "dirichlet") return Bc::Dirichlet;
    throw UsageError("unknown boundary condition: " + s);
}

SystemId system_from_string(const std::string& s) {
    if (s == "rd") return SystemId::ReactionDiffusion;
    if (s == "burgers") return SystemId::ModifiedBurgers;
    throw UsageError("unknown system: " + s);
}

GridSpec::GridSpec(int nx_, int nt_, double x_min_, double x_max_, double t_max_, Bc bc_)
    : nx(nx_), nt(nt_), x_min(x_min_), x_max(x_max_), t_max(t_max_), bc(bc_) {
    if (nx < 4) throw UsageError("GridSpec: nx must be >= 4");
    if (nt < 2) throw UsageError("GridSpec: nt must be >= 2");
    if (!(x_max > x_min)) throw UsageError("GridSpec: x_max must exceed x_min");
    if (!(t_max > 0.0)) throw UsageError("GridSpec: t_max must be positive");
}

Field::Field(GridSpec g, Tensor d, std::string name_)
    : grid(g), data(std::move(d)), name(std::move(name_)) {
    if (data.ndim() != 2 || data.dim(0) != grid.nt || data.dim(1) != grid.nx)
        throw UsageError("Field: data shape must be (nt, nx) = (" + std::to_string(grid.nt) +
                         "," + std::to_string(grid.nx) + "), got " + shape_str(data));
    if (!data.all_finite()) throw NumericalError("Field: non-finite entries");
}

Field Field::zeros(const GridSpec& g, std::string name) {
    return Field(g, Tensor({g.nt, g.nx}), std::move(name));
}

FieldSet::FieldSet(std::vector<Field> fields_, std::vector<std::vector<double>> ics_, SystemId id)
    : fields(std::move(fields_)), ics(std::move(ics_)), system_id(id) {
    if (fields.empty() || fields.size() != ics.size())
        throw UsageError("FieldSet: fields and ics must be non-empty and equal length");
    for (const auto& f : fields)
        if (!(f.grid == fields.front().grid))
            throw UsageError("FieldSet: all fields must share one grid");
    for (size_t i = 0; i < fields.size(); ++i) {
        if (static_cast<int>(ics[i].size()) != fields[i].grid.nx)
            throw UsageError("FieldSet: ic length must equal nx");
        for (int j = 0; j < fields[i].grid.nx; ++j)
            if (fields[i].data.at(0, j) != ics[i][j])
                throw UsageError("FieldSet: fields[i].data[0,:] must equal ics[i]");
    }
}

FieldStats field_stats(const Field& f) {
    if (!f.data.all_finite()) throw NumericalError("field_stats: non-finite entries");
    const double* p = f.data.data();
    const std::size_t n = f.data.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += p[i];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = p[i] - mean;
        ss += d * d;
    }
    return {mean, std::sqrt(ss / static_cast<double>(n))};
}

}  // namespace compdiff

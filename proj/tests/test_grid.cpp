#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "compdiff/grf.hpp"
#include "compdiff/grid.hpp"
#include "compdiff/pde.hpp"
#include "compdiff/rng.hpp"

using namespace compdiff;

TEST_CASE("GridSpec invariants and dx conventions") {
    GridSpec per(20, 500, -1.0, 1.0, 5.0, Bc::Periodic);
    CHECK(per.dx() == doctest::Approx(2.0 / 20));
    GridSpec dir(21, 500, -1.0, 1.0, 5.0, Bc::Dirichlet);
    CHECK(dir.dx() == doctest::Approx(2.0 / 20));
    CHECK_THROWS_AS(GridSpec(3, 10, 0.0, 1.0, 1.0, Bc::Periodic), UsageError);
    CHECK_THROWS_AS(GridSpec(4, 1, 0.0, 1.0, 1.0, Bc::Periodic), UsageError);
    CHECK_THROWS_AS(GridSpec(4, 10, 1.0, 0.0, 1.0, Bc::Periodic), UsageError);
    CHECK_THROWS_AS(GridSpec(4, 10, 0.0, 1.0, 0.0, Bc::Periodic), UsageError);
}

TEST_CASE("Field shape mismatch is rejected, always") {
    GridSpec g(8, 4, 0.0, 1.0, 1.0, Bc::Periodic);
    CHECK_THROWS_AS(Field(g, Tensor({4, 7}), "f"), UsageError);
    CHECK_THROWS_AS(Field(g, Tensor({8, 4}), "f"), UsageError);
    Tensor bad({4, 8});
    bad[3] = std::nan("");
    CHECK_THROWS_AS(Field(g, bad, "f"), NumericalError);
    CHECK_NOTHROW(Field(g, Tensor({4, 8}), "f"));
}

TEST_CASE("FieldSet requires row 0 to equal the ics exactly") {
    GridSpec g(8, 4, 0.0, 1.0, 1.0, Bc::Periodic);
    Tensor d({4, 8});
    for (int i = 0; i < 8; ++i) d.at(0, i) = 0.5 * i;
    std::vector<double> ic(8);
    for (int i = 0; i < 8; ++i) ic[i] = 0.5 * i;
    std::vector<Field> fs;
    fs.emplace_back(g, d, "a");
    fs.emplace_back(g, d, "b");
    CHECK_NOTHROW(FieldSet(fs, {ic, ic}, SystemId::ReactionDiffusion));
    auto ic2 = ic;
    ic2[3] += 1e-9;
    CHECK_THROWS_AS(FieldSet(fs, {ic, ic2}, SystemId::ReactionDiffusion), UsageError);
}

TEST_CASE("field_stats trivial cases") {
    GridSpec g(8, 4, 0.0, 1.0, 1.0, Bc::Periodic);
    Field c(g, Tensor::full({4, 8}, 3.0), "c");
    auto st = field_stats(c);
    CHECK(st.mean == doctest::Approx(3.0));
    CHECK(st.std == doctest::Approx(0.0));

    Tensor pm({4, 8});
    for (std::size_t i = 0; i < pm.size(); ++i) pm[i] = (i % 2 == 0) ? 1.0 : -1.0;
    auto st2 = field_stats(Field(g, pm, "pm"));
    CHECK(st2.mean == doctest::Approx(0.0));
    CHECK(st2.std == doctest::Approx(1.0));
}

TEST_CASE("field_stats matches an independent two-pass oracle on a stored RD sample") {
    SystemParams sys = SystemParams::defaults(
        SystemId::ReactionDiffusion, SystemParams::default_grid(SystemId::ReactionDiffusion, 20, 64));
    GrfParams gp = GrfParams::defaults(sys.grid, 42);
    GrfParams gp2 = gp;
    gp2.seed = 43;
    FieldSet fs = solve_coupled(sys, {grf_sample_1d(sys.grid, gp), grf_sample_1d(sys.grid, gp2)});
    const Field& f = fs.fields[0];

    // independent two-pass oracle in long double
    long double sum = 0.0L;
    const std::size_t n = f.data.size();
    for (std::size_t i = 0; i < n; ++i) sum += f.data[i];
    const long double mean = sum / n;
    long double ss = 0.0L;
    for (std::size_t i = 0; i < n; ++i) ss += (f.data[i] - mean) * (f.data[i] - mean);
    const long double stdev = std::sqrt(static_cast<double>(ss / n));

    auto st = field_stats(f);
    CHECK(std::abs(st.mean - static_cast<double>(mean)) <=
          1e-12 * std::max(1.0, std::abs(static_cast<double>(mean))));
    CHECK(std::abs(st.std - static_cast<double>(stdev)) <= 1e-12 * static_cast<double>(stdev));
}

TEST_CASE("field_stats is invariant under entry permutation") {
    GridSpec g(8, 4, 0.0, 1.0, 1.0, Bc::Periodic);
    Rng rng(11);
    Tensor d({4, 8});
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = rng.normal();
    auto st = field_stats(Field(g, d, "d"));
    // reverse-permute the entries
    Tensor p({4, 8});
    for (std::size_t i = 0; i < d.size(); ++i) p[i] = d[d.size() - 1 - i];
    auto st2 = field_stats(Field(g, p, "p"));
    CHECK(st.mean == doctest::Approx(st2.mean).epsilon(1e-12));
    CHECK(st.std == doctest::Approx(st2.std).epsilon(1e-12));
}

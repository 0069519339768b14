#include "compdiff/evalh.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "compdiff/rng.hpp"

namespace compdiff {

namespace fs = std::filesystem;

double mae(const Field& pred, const Field& truth) {
    if (!(pred.grid == truth.grid)) throw UsageError("mae: grid mismatch");
    const std::size_t n = pred.data.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(pred.data[i] - truth.data[i]);
    return s / static_cast<double>(n);
}

double rmse(const Field& pred, const Field& truth) {
    if (!(pred.grid == truth.grid)) throw UsageError("rmse: grid mismatch");
    const std::size_t n = pred.data.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred.data[i] - truth.data[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(n));
}

const std::vector<ReferenceError>& reference_error_table() {
    static const std::vector<ReferenceError> table = {
        {"rd", "compose-eps", "u", 1.03e-2, 1.49e-2},
        {"rd", "compose-eps", "v", 2.5e-3, 3.1e-3},
        {"rd", "compose-v", "u", 4.2e-3, 5.4e-3},
        {"rd", "compose-v", "v", 1.2e-3, 1.5e-3},
        {"rd", "fno", "u", 4e-4, 7e-4},
        {"rd", "fno", "v", 3e-4, 4e-4},
        {"burgers", "compose-eps", "c", 9.4e-3, 1.26e-2},
        {"burgers", "compose-eps", "v", 1.12e-2, 1.54e-2},
        {"burgers", "compose-v", "c", 9.8e-3, 1.3e-2},
        {"burgers", "compose-v", "v", 1.1e-2, 1.52e-2},
        {"burgers", "fno", "c", 1.1e-3, 1.6e-3},
        {"burgers", "fno", "v", 1.2e-3, 1.7e-3},
    };
    return table;
}

void write_report_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write report: " + path);
    f << "system,method,field,mae,rmse,n_test,lambda,K,T,seed,checkpoint_digest\n";
    for (const auto& r : rows)
        f << r.system << "," << r.method << "," << r.field << "," << r.mae << "," << r.rmse << ","
          << r.n_test << "," << r.lambda << "," << r.K << "," << r.T << "," << r.seed << ","
          << r.checkpoint_digest << "\n";
}

std::string render_report_table(const std::vector<EvalRow>& rows) {
    std::ostringstream os;
    os << "system    method        field      mae         rmse        n\n";
    os << "-----------------------------------------------------------\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-9s %-13s %-6s %11.4e %11.4e %5d\n", r.system.c_str(),
                      r.method.c_str(), r.field.c_str(), r.mae, r.rmse, r.n_test);
        os << buf;
    }
    os << "\nfull-scale reference errors (context only):\n";
    for (const auto& r : reference_error_table()) {
        std::snprintf(buf, sizeof(buf), "%-9s %-13s %-6s %11.4e %11.4e\n", r.system, r.method,
                      r.field, r.mae, r.rmse);
        os << buf;
    }
    return os.str();
}

std::vector<EvalRow> evaluate_compose(const std::vector<Expert*>& experts,
                                      const NoiseSchedule& sched, const DatasetReader& test,
                                      const ComposeConfig& cfg, int n_limit,
                                      const std::string& method_name, const std::string& digest) {
    if (test.manifest().kind != "coupled")
        throw IncompatibilityError("evaluate_compose: test dataset must be coupled");
    const int n = n_limit > 0 ? std::min(n_limit, test.n_samples()) : test.n_samples();
    if (n < 1) throw UsageError("evaluate_compose: empty test set");
    const int nf = static_cast<int>(experts.size());
    std::vector<double> sum_mae(nf, 0.0), sum_sq(nf, 0.0);
    std::vector<std::string> names(nf);
    for (int s = 0; s < n; ++s) {
        FieldSet truth = test.coupled_fieldset(s);
        ComposeConfig c = cfg;
        c.seed = derive_seed(cfg.seed, 0xE7Au, static_cast<std::uint64_t>(s));
        FieldSet pred = compose(experts, sched, test.manifest().grid, truth.ics,
                                test.manifest().system_id, c);
        for (int i = 0; i < nf; ++i) {
            sum_mae[i] += mae(pred.fields[i], truth.fields[i]);
            const double r = rmse(pred.fields[i], truth.fields[i]);
            sum_sq[i] += r * r;
            names[i] = truth.fields[i].name;
        }
    }
    std::vector<EvalRow> rows;
    for (int i = 0; i < nf; ++i) {
        EvalRow r;
        r.system = to_string(test.manifest().system_id);
        r.method = method_name;
        r.field = names[i];
        r.mae = sum_mae[i] / n;
        r.rmse = std::sqrt(sum_sq[i] / n);
        r.n_test = n;
        r.lambda = cfg.lambda;
        r.K = cfg.K;
        r.T = sched.T();
        r.seed = cfg.seed;
        r.checkpoint_digest = digest;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<EvalRow> evaluate_fno(Fno& net, const CheckpointMeta& meta, const DatasetReader& test,
                                  int n_limit, const std::string& digest) {
    if (test.manifest().kind != "coupled")
        throw IncompatibilityError("evaluate_fno: test dataset must be coupled");
    if (!(meta.grid == test.manifest().grid))
        throw IncompatibilityError("evaluate_fno: checkpoint/test grid mismatch");
    const int n = n_limit > 0 ? std::min(n_limit, test.n_samples()) : test.n_samples();
    if (n < 1) throw UsageError("evaluate_fno: empty test set");
    const GridSpec& g = test.manifest().grid;
    const std::size_t plane = static_cast<std::size_t>(g.nt) * g.nx;
    std::vector<double> sum_mae(2, 0.0), sum_sq(2, 0.0);
    std::vector<std::string> names(2);

    Tensor x({1, 4, g.nt, g.nx});
    for (int s = 0; s < n; ++s) {
        FieldSet truth = test.coupled_fieldset(s);
        for (int ti = 0; ti < g.nt; ++ti)
            for (int xi = 0; xi < g.nx; ++xi) {
                const std::size_t p = static_cast<std::size_t>(ti) * g.nx + xi;
                x[p] = (g.x(xi) - g.x_min) / (g.x_max - g.x_min);
                x[plane + p] = g.t(ti) / g.t_max;
                x[2 * plane + p] = (truth.ics[0][xi] - meta.norm_mean[2]) / meta.norm_std[2];
                x[3 * plane + p] = (truth.ics[1][xi] - meta.norm_mean[3]) / meta.norm_std[3];
            }
        Tensor out = net.forward(x);
        for (int i = 0; i < 2; ++i) {
            Tensor f({g.nt, g.nx});
            for (std::size_t p = 0; p < plane; ++p)
                f[p] = out[i * plane + p] * meta.norm_std[i] + meta.norm_mean[i];
            Field pf(g, std::move(f), truth.fields[i].name);
            sum_mae[i] += mae(pf, truth.fields[i]);
            const double r = rmse(pf, truth.fields[i]);
            sum_sq[i] += r * r;
            names[i] = truth.fields[i].name;
        }
    }
    std::vector<EvalRow> rows;
    for (int i = 0; i < 2; ++i) {
        EvalRow r;
        r.system = to_string(test.manifest().system_id);
        r.method = "fno";
        r.field = names[i];
        r.mae = sum_mae[i] / n;
        r.rmse = std::sqrt(sum_sq[i] / n);
        r.n_test = n;
        r.T = 1;
        r.seed = meta.seed;
        r.checkpoint_digest = digest;
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

// viridis anchors (matplotlib), linearly interpolated.
const unsigned char kViridis[][3] = {
    {68, 1, 84},    {71, 13, 96},   {72, 24, 106},  {72, 35, 116},  {71, 46, 124},
    {69, 56, 130},  {66, 65, 134},  {62, 74, 137},  {58, 84, 140},  {54, 93, 141},
    {50, 101, 142}, {46, 109, 142}, {43, 117, 142}, {40, 125, 142}, {37, 132, 142},
    {34, 140, 141}, {31, 148, 140}, {30, 156, 137}, {31, 163, 134}, {37, 171, 130},
    {47, 178, 124}, {61, 185, 117}, {78, 191, 107}, {96, 198, 95},  {117, 203, 82},
    {139, 208, 67}, {162, 213, 50}, {186, 216, 33}, {210, 219, 27}, {234, 221, 37},
    {253, 231, 37}};

void colormap(double v01, unsigned char* rgb) {
    const int n = static_cast<int>(sizeof(kViridis) / sizeof(kViridis[0]));
    double s = std::clamp(v01, 0.0, 1.0) * (n - 1);
    const int i = std::min(static_cast<int>(s), n - 2);
    const double w = s - i;
    for (int c = 0; c < 3; ++c)
        rgb[c] = static_cast<unsigned char>((1.0 - w) * kViridis[i][c] + w * kViridis[i + 1][c] +
                                            0.5);
}

}  // namespace

std::string render_heatmaps(const std::vector<FieldSet>& sets, const std::string& out_dir) {
    if (sets.empty()) throw UsageError("render_heatmaps: need at least one field set");
    const GridSpec& g = sets.front().grid();
    const int nf = sets.front().n_fields();
    for (const auto& s : sets)
        if (!(s.grid() == g) || s.n_fields() != nf)
            throw UsageError("render_heatmaps: field sets must share grid and field count");

    // Panels are t horizontal, x vertical; integer upscale for visibility.
    const int scale = std::clamp(512 / std::max(g.nt, g.nx), 1, 8);
    const int pw = g.nt * scale, ph = g.nx * scale, margin = 4;
    const bool with_err = sets.size() >= 2;
    const int rows = static_cast<int>(sets.size()) + (with_err ? 1 : 0);
    const int W = margin + nf * (pw + margin);
    const int H = margin + rows * (ph + margin);

    std::vector<unsigned char> img(static_cast<std::size_t>(W) * H * 3, 255);

    // Shared color scale per field across all sets.
    std::vector<double> fmin(nf, 1e300), fmax(nf, -1e300);
    for (const auto& s : sets)
        for (int f = 0; f < nf; ++f)
            for (std::size_t i = 0; i < s.fields[f].data.size(); ++i) {
                fmin[f] = std::min(fmin[f], s.fields[f].data[i]);
                fmax[f] = std::max(fmax[f], s.fields[f].data[i]);
            }

    auto draw = [&](int row, int col, const Tensor& data, double lo, double hi) {
        const double span = hi > lo ? hi - lo : 1.0;
        const int x0 = margin + col * (pw + margin);
        const int y0 = margin + row * (ph + margin);
        for (int yi = 0; yi < ph; ++yi)
            for (int xi = 0; xi < pw; ++xi) {
                const int tt = xi / scale;
                const int xx = g.nx - 1 - yi / scale;
                unsigned char rgb[3];
                colormap((data.at(tt, xx) - lo) / span, rgb);
                unsigned char* px = img.data() +
                                    (static_cast<std::size_t>(y0 + yi) * W + x0 + xi) * 3;
                px[0] = rgb[0];
                px[1] = rgb[1];
                px[2] = rgb[2];
            }
    };

    for (std::size_t s = 0; s < sets.size(); ++s)
        for (int f = 0; f < nf; ++f)
            draw(static_cast<int>(s), f, sets[s].fields[f].data, fmin[f], fmax[f]);
    if (with_err) {
        for (int f = 0; f < nf; ++f) {
            Tensor err({g.nt, g.nx});
            double emax = 0.0;
            for (std::size_t i = 0; i < err.size(); ++i) {
                err[i] = std::abs(sets.front().fields[f].data[i] - sets.back().fields[f].data[i]);
                emax = std::max(emax, err[i]);
            }
            draw(rows - 1, f, err, 0.0, emax);
        }
    }

    fs::create_directories(out_dir);
    const std::string path = (fs::path(out_dir) / "heatmaps.ppm").string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write heatmap: " + path);
    f << "P6\n" << W << " " << H << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    return path;
}

}  // namespace compdiff

#include "compdiff/dataset.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "compdiff/rng.hpp"

namespace compdiff {

namespace fs = std::filesystem;
using nlohmann::json;

void DatasetManifest::validate() const {
    if (format_version != 1)
        throw IncompatibilityError("unsupported dataset format_version " +
                                   std::to_string(format_version));
    if (n_samples < 1) throw IoError("dataset manifest: n_samples must be >= 1");
    if (channels.empty() || norm_mean.size() != channels.size() ||
        norm_std.size() != channels.size())
        throw IoError("dataset manifest: channel/stats arity mismatch");
    for (double s : norm_std)
        if (!(s > 0.0)) throw IoError("dataset manifest: norm_std entries must be positive");
    if (kind != "decoupled" && kind != "coupled")
        throw IoError("dataset manifest: unknown kind " + kind);
}

std::string manifest_path(const std::string& base) {
    if (base.size() > 5 && base.substr(base.size() - 5) == ".json") return base;
    return base + ".json";
}

std::string payload_path_for(const std::string& manifest_file, const std::string& payload_file) {
    return (fs::path(manifest_file).parent_path() / payload_file).string();
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    json j;
    j["format_version"] = m.format_version;
    j["system_id"] = to_string(m.system_id);
    j["kind"] = m.kind;
    j["field_index"] = m.field_index;
    j["nx"] = m.grid.nx;
    j["nt"] = m.grid.nt;
    j["x_min"] = m.grid.x_min;
    j["x_max"] = m.grid.x_max;
    j["t_max"] = m.grid.t_max;
    j["bc"] = to_string(m.grid.bc);
    j["n_samples"] = m.n_samples;
    j["channels"] = m.channels;
    j["norm_mean"] = m.norm_mean;
    j["norm_std"] = m.norm_std;
    j["grf_lx"] = m.grf_lx;
    j["grf_lt"] = m.grf_lt;
    j["grf_amp"] = m.grf_amp;
    j["seed0"] = m.seed0;
    j["payload_file"] = m.payload_file;
    j["payload_crc32"] = m.payload_crc32;
    if (!m.compose_json.empty()) j["compose"] = json::parse(m.compose_json);
    std::ofstream f(path);
    if (!f) throw IoError("cannot write manifest: " + path);
    f << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest: " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw IoError("malformed manifest " + path + ": " + e.what());
    }
    DatasetManifest m;
    try {
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != 1)
            throw IncompatibilityError("unsupported dataset format_version " +
                                       std::to_string(m.format_version));
        m.system_id = system_from_string(j.at("system_id").get<std::string>());
        m.kind = j.at("kind").get<std::string>();
        m.field_index = j.at("field_index").get<int>();
        m.grid = GridSpec(j.at("nx").get<int>(), j.at("nt").get<int>(), j.at("x_min").get<double>(),
                          j.at("x_max").get<double>(), j.at("t_max").get<double>(),
                          bc_from_string(j.at("bc").get<std::string>()));
        m.n_samples = j.at("n_samples").get<int>();
        m.channels = j.at("channels").get<std::vector<std::string>>();
        m.norm_mean = j.at("norm_mean").get<std::vector<double>>();
        m.norm_std = j.at("norm_std").get<std::vector<double>>();
        m.grf_lx = j.at("grf_lx").get<double>();
        m.grf_lt = j.at("grf_lt").get<double>();
        m.grf_amp = j.at("grf_amp").get<double>();
        m.seed0 = j.at("seed0").get<std::uint64_t>();
        m.payload_file = j.at("payload_file").get<std::string>();
        m.payload_crc32 = j.at("payload_crc32").get<std::uint32_t>();
        if (j.contains("compose")) m.compose_json = j["compose"].dump();
    } catch (const IncompatibilityError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError("malformed manifest " + path + ": " + e.what());
    }
    m.validate();
    return m;
}

namespace {

struct StatsAcc {
    std::vector<double> sum, sumsq;
    std::size_t count_per_channel = 0;
    void init(int channels) {
        sum.assign(channels, 0.0);
        sumsq.assign(channels, 0.0);
        count_per_channel = 0;
    }
    void add_sample(const std::vector<float>& sample, int channels, std::size_t plane) {
        for (int c = 0; c < channels; ++c) {
            double s = 0.0, ss = 0.0;
            const float* p = sample.data() + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                s += p[i];
                ss += static_cast<double>(p[i]) * p[i];
            }
            sum[c] += s;
            sumsq[c] += ss;
        }
        count_per_channel += plane;
    }
    void finish(std::vector<double>& mean, std::vector<double>& stdev) const {
        const double n = static_cast<double>(count_per_channel);
        mean.resize(sum.size());
        stdev.resize(sum.size());
        for (std::size_t c = 0; c < sum.size(); ++c) {
            mean[c] = sum[c] / n;
            const double var = std::max(sumsq[c] / n - mean[c] * mean[c], 0.0);
            stdev[c] = std::sqrt(var);
        }
    }
};

void broadcast_ic(const std::vector<double>& ic, int nt, int nx, float* out) {
    for (int n = 0; n < nt; ++n)
        for (int i = 0; i < nx; ++i) out[static_cast<std::size_t>(n) * nx + i] =
            static_cast<float>(ic[i]);
}

// Generates samples chunk-by-chunk (parallel within a chunk, writes in
// order), retrying failed solves with follow-on seeds.
template <typename MakeSample>
std::string generate_dataset(DatasetManifest m, int n, const std::string& out_base,
                             MakeSample&& make_sample) {
    const std::string mpath = manifest_path(out_base);
    const std::string base = mpath.substr(0, mpath.size() - 5);
    const std::string ppath = base + ".bin";
    if (auto dir = fs::path(mpath).parent_path(); !dir.empty()) fs::create_directories(dir);

    const int channels = m.n_channels();
    const std::size_t plane = static_cast<std::size_t>(m.grid.nt) * m.grid.nx;
    const std::size_t selems = static_cast<std::size_t>(channels) * plane;

    container::PayloadWriter writer(ppath);
    StatsAcc stats;
    stats.init(channels);
    std::atomic<int> failures{0};
    const int max_failures = std::max(1, n / 20);  // abort past 5%

    const int chunk = 64;
    std::vector<std::vector<float>> buf(std::min(chunk, n));
    std::exception_ptr err = nullptr;
    for (int s0 = 0; s0 < n && !err; s0 += chunk) {
        const int cn = std::min(chunk, n - s0);
#pragma omp parallel for schedule(dynamic)
        for (int k = 0; k < cn; ++k) {
            try {
                std::vector<float> sample(selems);
                bool ok = false;
                for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
                    try {
                        make_sample(s0 + k, attempt, sample.data());
                        ok = true;
                    } catch (const NumericalError& e) {
                        const int f = ++failures;
#pragma omp critical(compdiff_dataset_log)
                        std::cerr << "sample " << s0 + k << " attempt " << attempt
                                  << " failed: " << e.what() << "\n";
                        if (f > max_failures)
                            throw NumericalError("more than 5% of solves failed; aborting");
                    }
                }
                if (!ok) throw NumericalError("sample generation failed after retries");
                buf[k] = std::move(sample);
            } catch (...) {
#pragma omp critical(compdiff_dataset_err)
                if (!err) err = std::current_exception();
            }
        }
        if (err) break;
        for (int k = 0; k < cn; ++k) {
            stats.add_sample(buf[k], channels, plane);
            writer.append(buf[k].data(), buf[k].size());
        }
    }
    if (err) std::rethrow_exception(err);

    stats.finish(m.norm_mean, m.norm_std);
    for (auto& s : m.norm_std) s = std::max(s, 1e-12);
    m.n_samples = n;
    m.payload_file = fs::path(ppath).filename().string();
    m.payload_crc32 = writer.finish();
    save_manifest(mpath, m);
    return mpath;
}

}  // namespace

std::string generate_decoupled(const SystemParams& sys, const GrfParams& grf, int field_index,
                               int n, std::uint64_t seed, const std::string& out_base) {
    if (n < 1) throw UsageError("generate_decoupled: n must be >= 1");
    if (field_index != 0 && field_index != 1)
        throw UsageError("generate_decoupled: field_index must be 0 or 1");
    const auto names = sys.field_names();
    const int other = 1 - field_index;

    DatasetManifest m;
    m.system_id = sys.system_id;
    m.kind = "decoupled";
    m.field_index = field_index;
    m.grid = sys.grid;
    m.channels = {"out_" + names[field_index], "cond_" + names[other], "ic_" + names[field_index]};
    m.grf_lx = grf.length_scale_x;
    m.grf_lt = grf.length_scale_t;
    m.grf_amp = grf.amplitude;
    m.seed0 = seed;

    const int nt = sys.grid.nt, nx = sys.grid.nx;
    const std::size_t plane = static_cast<std::size_t>(nt) * nx;
    return generate_dataset(std::move(m), n, out_base, [&](int idx, int attempt, float* out) {
        GrfParams g2 = grf;
        g2.seed = derive_seed(seed, idx, 1, attempt);
        Tensor cond = grf_sample_2d(sys.grid, g2);
        GrfParams g1 = grf;
        g1.seed = derive_seed(seed, idx, 2, attempt);
        std::vector<double> ic = grf_sample_1d(sys.grid, g1);
        Field frozen(sys.grid, cond, "cond");
        Field solved = solve_decoupled(sys, field_index, frozen, ic);
        for (std::size_t i = 0; i < plane; ++i) out[i] = static_cast<float>(solved.data[i]);
        for (std::size_t i = 0; i < plane; ++i) out[plane + i] = static_cast<float>(cond[i]);
        broadcast_ic(ic, nt, nx, out + 2 * plane);
    });
}

std::string generate_coupled(const SystemParams& sys, const GrfParams& grf, int n,
                             std::uint64_t seed, const std::string& out_base) {
    if (n < 1) throw UsageError("generate_coupled: n must be >= 1");
    const auto names = sys.field_names();

    DatasetManifest m;
    m.system_id = sys.system_id;
    m.kind = "coupled";
    m.field_index = -1;
    m.grid = sys.grid;
    m.channels = {names[0], names[1], "ic_" + names[0], "ic_" + names[1], "xcoord", "tcoord"};
    m.grf_lx = grf.length_scale_x;
    m.grf_lt = grf.length_scale_t;
    m.grf_amp = grf.amplitude;
    m.seed0 = seed;

    const int nt = sys.grid.nt, nx = sys.grid.nx;
    const std::size_t plane = static_cast<std::size_t>(nt) * nx;
    return generate_dataset(std::move(m), n, out_base, [&](int idx, int attempt, float* out) {
        GrfParams g1 = grf, g2 = grf;
        g1.seed = derive_seed(seed, idx, 1, attempt);
        g2.seed = derive_seed(seed, idx, 2, attempt);
        std::vector<std::vector<double>> ics = {grf_sample_1d(sys.grid, g1),
                                                grf_sample_1d(sys.grid, g2)};
        FieldSet fs = solve_coupled(sys, ics);
        for (std::size_t i = 0; i < plane; ++i) {
            out[i] = static_cast<float>(fs.fields[0].data[i]);
            out[plane + i] = static_cast<float>(fs.fields[1].data[i]);
        }
        broadcast_ic(ics[0], nt, nx, out + 2 * plane);
        broadcast_ic(ics[1], nt, nx, out + 3 * plane);
        for (int tI = 0; tI < nt; ++tI)
            for (int xI = 0; xI < nx; ++xI) {
                const std::size_t p = static_cast<std::size_t>(tI) * nx + xI;
                out[4 * plane + p] =
                    static_cast<float>((sys.grid.x(xI) - sys.grid.x_min) /
                                       (sys.grid.x_max - sys.grid.x_min));
                out[5 * plane + p] = static_cast<float>(sys.grid.t(tI) / sys.grid.t_max);
            }
    });
}

std::string save_fieldsets(const std::vector<FieldSet>& sets, const std::string& out_base,
                           const std::string& compose_json) {
    if (sets.empty()) throw UsageError("save_fieldsets: empty list");
    const FieldSet& first = sets.front();
    const GridSpec& g = first.grid();
    SystemParams sys = SystemParams::defaults(first.system_id, g);
    const auto names = sys.field_names();

    DatasetManifest m;
    m.system_id = first.system_id;
    m.kind = "coupled";
    m.field_index = -1;
    m.grid = g;
    m.channels = {names[0], names[1], "ic_" + names[0], "ic_" + names[1], "xcoord", "tcoord"};
    m.grf_lx = m.grf_lt = m.grf_amp = 0.0;
    m.seed0 = 0;
    m.compose_json = compose_json;

    const int nt = g.nt, nx = g.nx;
    const std::size_t plane = static_cast<std::size_t>(nt) * nx;
    return generate_dataset(std::move(m), static_cast<int>(sets.size()), out_base,
                            [&](int idx, int, float* out) {
                                const FieldSet& fs = sets[idx];
                                for (std::size_t i = 0; i < plane; ++i) {
                                    out[i] = static_cast<float>(fs.fields[0].data[i]);
                                    out[plane + i] = static_cast<float>(fs.fields[1].data[i]);
                                }
                                broadcast_ic(fs.ics[0], nt, nx, out + 2 * plane);
                                broadcast_ic(fs.ics[1], nt, nx, out + 3 * plane);
                                for (int tI = 0; tI < nt; ++tI)
                                    for (int xI = 0; xI < nx; ++xI) {
                                        const std::size_t p = static_cast<std::size_t>(tI) * nx + xI;
                                        out[4 * plane + p] = static_cast<float>(
                                            (g.x(xI) - g.x_min) / (g.x_max - g.x_min));
                                        out[5 * plane + p] = static_cast<float>(g.t(tI) / g.t_max);
                                    }
                            });
}

DatasetReader::DatasetReader(const std::string& manifest_or_base) {
    const std::string mpath = manifest_path(manifest_or_base);
    manifest_ = load_manifest(mpath);
    const std::string ppath = payload_path_for(mpath, manifest_.payload_file);
    reader_ = std::make_unique<container::PayloadReader>(
        ppath, static_cast<std::size_t>(manifest_.n_samples) * manifest_.sample_elems());
    if (reader_->crc() != manifest_.payload_crc32)
        throw IoError("checksum mismatch between manifest and payload: " + ppath);
}

Tensor DatasetReader::sample(int idx, bool normalized) const {
    if (idx < 0 || idx >= manifest_.n_samples)
        throw UsageError("DatasetReader: sample index out of range");
    const std::size_t selems = manifest_.sample_elems();
    Tensor out({manifest_.n_channels(), manifest_.grid.nt, manifest_.grid.nx});
    reader_->read(static_cast<std::size_t>(idx) * selems, selems, out.data());
    if (normalized) {
        const std::size_t plane = static_cast<std::size_t>(manifest_.grid.nt) * manifest_.grid.nx;
        for (int c = 0; c < manifest_.n_channels(); ++c) {
            const double mu = manifest_.norm_mean[c], inv = 1.0 / manifest_.norm_std[c];
            double* p = out.data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - mu) * inv;
        }
    }
    return out;
}

Tensor DatasetReader::channel(int idx, int ch, bool normalized) const {
    if (ch < 0 || ch >= manifest_.n_channels())
        throw UsageError("DatasetReader: channel index out of range");
    const std::size_t plane = static_cast<std::size_t>(manifest_.grid.nt) * manifest_.grid.nx;
    Tensor out({manifest_.grid.nt, manifest_.grid.nx});
    reader_->read(static_cast<std::size_t>(idx) * manifest_.sample_elems() + ch * plane, plane,
                  out.data());
    if (normalized) {
        const double mu = manifest_.norm_mean[ch], inv = 1.0 / manifest_.norm_std[ch];
        for (std::size_t i = 0; i < plane; ++i) out[i] = (out[i] - mu) * inv;
    }
    return out;
}

FieldSet DatasetReader::coupled_fieldset(int idx) const {
    if (manifest_.kind != "coupled")
        throw IncompatibilityError("coupled_fieldset: dataset kind is " + manifest_.kind);
    SystemParams sys = SystemParams::defaults(manifest_.system_id, manifest_.grid);
    const auto names = sys.field_names();
    Tensor f0 = channel(idx, 0, false);
    Tensor f1 = channel(idx, 1, false);
    Tensor ic0 = channel(idx, 2, false);
    Tensor ic1 = channel(idx, 3, false);
    std::vector<std::vector<double>> ics(2, std::vector<double>(manifest_.grid.nx));
    for (int i = 0; i < manifest_.grid.nx; ++i) {
        ics[0][i] = ic0.at(0, i);
        ics[1][i] = ic1.at(0, i);
    }
    // float32 storage may perturb row 0 relative to the ic channel; force the
    // FieldSet invariant exactly.
    for (int i = 0; i < manifest_.grid.nx; ++i) {
        f0.at(0, i) = ics[0][i];
        f1.at(0, i) = ics[1][i];
    }
    std::vector<Field> fields;
    fields.emplace_back(manifest_.grid, std::move(f0), names[0]);
    fields.emplace_back(manifest_.grid, std::move(f1), names[1]);
    return FieldSet(std::move(fields), std::move(ics), manifest_.system_id);
}

}  // namespace compdiff

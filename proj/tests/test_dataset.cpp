#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "compdiff/dataset.hpp"

using namespace compdiff;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("compdiff_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string str(const std::string& name) const { return (path / name).string(); }
};

SystemParams small_rd() {
    return SystemParams::defaults(SystemId::ReactionDiffusion,
                                  SystemParams::default_grid(SystemId::ReactionDiffusion, 12, 16));
}

}  // namespace

TEST_CASE("decoupled generation: deterministic, bit-identical reload") {
    TempDir td;
    SystemParams sys = small_rd();
    GrfParams grf = GrfParams::defaults(sys.grid, 7);
    const std::string p1 = generate_decoupled(sys, grf, 0, 1, 7, td.str("a"));
    const std::string p2 = generate_decoupled(sys, grf, 0, 1, 7, td.str("b"));
    DatasetReader r1(p1), r2(p2);
    CHECK(r1.manifest().payload_crc32 == r2.manifest().payload_crc32);
    Tensor s1 = r1.sample(0, false), s2 = r2.sample(0, false);
    for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i] == s2[i]);
    CHECK(r1.manifest().channels == std::vector<std::string>{"out_u", "cond_v", "ic_u"});
}

TEST_CASE("manifest bookkeeping: n_samples and tensor leading dimension") {
    TempDir td;
    SystemParams sys = small_rd();
    GrfParams grf = GrfParams::defaults(sys.grid, 3);
    const std::string p = generate_decoupled(sys, grf, 1, 10, 3, td.str("d"));
    DatasetReader r(p);
    CHECK(r.manifest().n_samples == 10);
    CHECK(r.n_samples() == 10);
    // last sample is readable and finite (leading dimension really is 10)
    Tensor s = r.sample(9, false);
    CHECK(s.all_finite());
    CHECK_THROWS_AS(r.sample(10, false), UsageError);
}

TEST_CASE("norm stats match an independent recomputation over stored raw tensors") {
    TempDir td;
    SystemParams sys = small_rd();
    GrfParams grf = GrfParams::defaults(sys.grid, 11);
    const std::string p = generate_decoupled(sys, grf, 0, 8, 11, td.str("n"));
    DatasetReader r(p);
    const auto& m = r.manifest();
    const std::size_t plane = static_cast<std::size_t>(m.grid.nt) * m.grid.nx;
    for (int c = 0; c < m.n_channels(); ++c) {
        long double sum = 0.0L, sq = 0.0L;
        for (int s = 0; s < m.n_samples; ++s) {
            Tensor t = r.channel(s, c, false);
            for (std::size_t i = 0; i < plane; ++i) {
                sum += t[i];
                sq += static_cast<long double>(t[i]) * t[i];
            }
        }
        const double n = static_cast<double>(plane) * m.n_samples;
        const double mean = static_cast<double>(sum) / n;
        const double stdev = std::sqrt(std::max(0.0, static_cast<double>(sq) / n - mean * mean));
        CHECK(std::abs(m.norm_mean[c] - mean) < 1e-6);
        CHECK(std::abs(m.norm_std[c] - stdev) < 1e-6);
    }
}

TEST_CASE("normalized channels have mean ~0 and std ~1 over the split") {
    TempDir td;
    SystemParams sys = small_rd();
    GrfParams grf = GrfParams::defaults(sys.grid, 13);
    const std::string p = generate_decoupled(sys, grf, 0, 12, 13, td.str("z"));
    DatasetReader r(p);
    const auto& m = r.manifest();
    const std::size_t plane = static_cast<std::size_t>(m.grid.nt) * m.grid.nx;
    for (int c = 0; c < m.n_channels(); ++c) {
        double sum = 0.0, sq = 0.0;
        for (int s = 0; s < m.n_samples; ++s) {
            Tensor t = r.channel(s, c, true);
            for (std::size_t i = 0; i < plane; ++i) {
                sum += t[i];
                sq += t[i] * t[i];
            }
        }
        const double n = static_cast<double>(plane) * m.n_samples;
        CHECK(std::abs(sum / n) < 1e-3);
        CHECK(std::abs(std::sqrt(sq / n) - 1.0) < 1e-2);
    }
}

TEST_CASE("coupled generation carries 6 channels with coordinates in [0,1]") {
    TempDir td;
    SystemParams sys = small_rd();
    GrfParams grf = GrfParams::defaults(sys.grid, 17);
    const std::string p = generate_coupled(sys, grf, 3, 17, td.str("c"));
    DatasetReader r(p);
    CHECK(r.manifest().n_channels() == 6);
    Tensor xc = r.channel(1, 4, false), tc = r.channel(1, 5, false);
    for (std::size_t i = 0; i < xc.size(); ++i) {
        CHECK(xc[i] >= 0.0);
        CHECK(xc[i] <= 1.0);
        CHECK(tc[i] >= 0.0);
        CHECK(tc[i] <= 1.0);
    }
    FieldSet fsets = r.coupled_fieldset(2);
    CHECK(fsets.n_fields() == 2);
    CHECK(fsets.fields[0].name == "u");
}

TEST_CASE("corrupted payload byte raises a checksum error") {
    TempDir td;
    SystemParams sys = small_rd();
    GrfParams grf = GrfParams::defaults(sys.grid, 19);
    const std::string p = generate_decoupled(sys, grf, 0, 2, 19, td.str("k"));
    const std::string payload = td.str("k.bin");
    {
        std::fstream f(payload, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(37);
        char b;
        f.seekg(37);
        f.read(&b, 1);
        b ^= 0x40;
        f.seekp(37);
        f.write(&b, 1);
    }
    try {
        DatasetReader r(p);
        CHECK(false);
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }
}

TEST_CASE("truncated payload raises a distinct error") {
    TempDir td;
    SystemParams sys = small_rd();
    GrfParams grf = GrfParams::defaults(sys.grid, 23);
    const std::string p = generate_decoupled(sys, grf, 0, 2, 23, td.str("t"));
    const std::string payload = td.str("t.bin");
    fs::resize_file(payload, fs::file_size(payload) - 9);
    try {
        DatasetReader r(p);
        CHECK(false);
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
}

TEST_CASE("unknown format version raises an incompatibility error") {
    TempDir td;
    SystemParams sys = small_rd();
    GrfParams grf = GrfParams::defaults(sys.grid, 29);
    const std::string p = generate_decoupled(sys, grf, 0, 1, 29, td.str("v"));
    // bump the version field in the manifest
    std::ifstream in(p);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, std::string("\"format_version\": 1").size(), "\"format_version\": 9");
    std::ofstream out(p);
    out << text;
    out.close();
    CHECK_THROWS_AS(DatasetReader r(p), IncompatibilityError);
}

TEST_CASE("save_fieldsets round-trips composer output as a coupled dataset") {
    TempDir td;
    SystemParams sys = small_rd();
    GrfParams gp = GrfParams::defaults(sys.grid, 31);
    GrfParams gp2 = gp;
    gp2.seed = 32;
    FieldSet fs = solve_coupled(sys, {grf_sample_1d(sys.grid, gp), grf_sample_1d(sys.grid, gp2)});
    const std::string p = save_fieldsets({fs}, td.str("f"), R"({"lambda":0.2})");
    DatasetReader r(p);
    CHECK(r.manifest().compose_json.find("lambda") != std::string::npos);
    FieldSet back = r.coupled_fieldset(0);
    // float32 storage rounding only
    for (int i = 0; i < 2; ++i)
        for (std::size_t k = 0; k < fs.fields[i].data.size(); ++k)
            CHECK(back.fields[i].data[k] ==
                  doctest::Approx(fs.fields[i].data[k]).epsilon(1e-6));
}

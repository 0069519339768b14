#include "compdiff/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>
#include <zlib.h>

#include "compdiff/errors.hpp"

namespace compdiff {

namespace fs = std::filesystem;
using nlohmann::json;

std::string checkpoint_manifest_path(const std::string& base) {
    if (base.size() > 5 && base.substr(base.size() - 5) == ".json") return base;
    return base + ".json";
}

std::string CheckpointMeta::digest() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", payload_crc32);
    return buf;
}

namespace {

struct TensorRecord {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

std::uint32_t write_records(const std::string& path, const std::vector<TensorRecord>& recs) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write checkpoint payload: " + path);
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    auto put = [&](const void* p, std::size_t n) {
        crc = crc32(crc, static_cast<const Bytef*>(p), static_cast<uInt>(n));
        if (std::fwrite(p, 1, n, f) != n) {
            std::fclose(f);
            throw IoError("short write: " + path);
        }
    };
    for (const auto& r : recs) {
        const std::uint32_t nl = static_cast<std::uint32_t>(r.name.size());
        put(&nl, 4);
        put(r.name.data(), nl);
        const std::uint32_t nd = static_cast<std::uint32_t>(r.shape.size());
        put(&nd, 4);
        for (int d : r.shape) {
            const std::uint32_t u = static_cast<std::uint32_t>(d);
            put(&u, 4);
        }
        put(r.data.data(), r.data.size() * sizeof(float));
    }
    if (std::fwrite(&crc, 1, 4, f) != 4) {
        std::fclose(f);
        throw IoError("short write: " + path);
    }
    std::fclose(f);
    return crc;
}

std::vector<TensorRecord> read_records(const std::string& path, std::uint32_t expect_crc) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open checkpoint payload: " + path);
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    if (size < 4) {
        std::fclose(f);
        throw IoError("truncated checkpoint payload: " + path);
    }
    std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
    if (std::fread(bytes.data(), 1, bytes.size(), f) != bytes.size()) {
        std::fclose(f);
        throw IoError("short read: " + path);
    }
    std::fclose(f);
    const std::size_t body = bytes.size() - 4;
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(body));
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + body, 4);
    if (stored != crc || crc != expect_crc)
        throw IoError("checksum mismatch in checkpoint payload: " + path);

    std::vector<TensorRecord> recs;
    std::size_t off = 0;
    auto need = [&](std::size_t n) {
        if (off + n > body) throw IoError("truncated checkpoint payload: " + path);
    };
    while (off < body) {
        TensorRecord r;
        std::uint32_t nl;
        need(4);
        std::memcpy(&nl, bytes.data() + off, 4);
        off += 4;
        need(nl);
        r.name.assign(reinterpret_cast<char*>(bytes.data() + off), nl);
        off += nl;
        std::uint32_t nd;
        need(4);
        std::memcpy(&nd, bytes.data() + off, 4);
        off += 4;
        std::size_t count = 1;
        r.shape.resize(nd);
        for (std::uint32_t i = 0; i < nd; ++i) {
            std::uint32_t d;
            need(4);
            std::memcpy(&d, bytes.data() + off, 4);
            off += 4;
            r.shape[i] = static_cast<int>(d);
            count *= d;
        }
        need(count * sizeof(float));
        r.data.resize(count);
        std::memcpy(r.data.data(), bytes.data() + off, count * sizeof(float));
        off += count * sizeof(float);
        recs.push_back(std::move(r));
    }
    return recs;
}

json grid_to_json(const GridSpec& g) {
    return json{{"nx", g.nx},       {"nt", g.nt},       {"x_min", g.x_min},
                {"x_max", g.x_max}, {"t_max", g.t_max}, {"bc", to_string(g.bc)}};
}

GridSpec grid_from_json(const json& j) {
    return GridSpec(j.at("nx").get<int>(), j.at("nt").get<int>(), j.at("x_min").get<double>(),
                    j.at("x_max").get<double>(), j.at("t_max").get<double>(),
                    bc_from_string(j.at("bc").get<std::string>()));
}

}  // namespace

std::string save_checkpoint(const std::string& out_base, const CheckpointMeta& meta,
                            nn::ParamStore& store) {
    const std::string mpath = checkpoint_manifest_path(out_base);
    const std::string base = mpath.substr(0, mpath.size() - 5);
    const std::string ppath = base + ".bin";
    if (auto dir = fs::path(mpath).parent_path(); !dir.empty()) fs::create_directories(dir);

    std::vector<TensorRecord> recs;
    for (const char* group : {"raw", "ema"}) {
        for (auto& p : store.items()) {
            TensorRecord r;
            r.name = std::string(group) + "/" + p->name;
            r.shape = p->w.shape();
            const Tensor& src = std::string(group) == "raw" ? p->w : p->ema;
            r.data.resize(src.size());
            for (std::size_t i = 0; i < src.size(); ++i)
                r.data[i] = static_cast<float>(src[i]);
            recs.push_back(std::move(r));
        }
    }
    const std::uint32_t crc = write_records(ppath, recs);

    json j;
    j["format_version"] = meta.format_version;
    j["model"] = meta.model;
    j["param_kind"] = to_string(meta.param_kind);
    if (meta.model == "ddpm-unet") {
        j["unet"] = {{"base_channels", meta.unet.base_channels},
                     {"in_channels", meta.unet.in_channels},
                     {"out_channels", meta.unet.out_channels},
                     {"embed_dim", meta.unet.embed_dim},
                     {"attention_stages",
                      std::vector<int>(meta.unet.attention_stages.begin(),
                                       meta.unet.attention_stages.end())},
                     {"time_coord_channel", meta.unet.time_coord_channel},
                     {"norm_groups", meta.unet.norm_groups}};
    } else {
        j["fno"] = {{"modes_t", meta.fno.modes_t},   {"modes_x", meta.fno.modes_x},
                    {"width", meta.fno.width},       {"n_layers", meta.fno.n_layers},
                    {"in_channels", meta.fno.in_channels}, {"out_channels", meta.fno.out_channels}};
    }
    j["schedule"] = {{"T", meta.schedule_T}, {"beta_start", meta.beta_start},
                     {"beta_end", meta.beta_end}};
    j["system_id"] = to_string(meta.system_id);
    j["field_index"] = meta.field_index;
    j["grid"] = grid_to_json(meta.grid);
    j["channels"] = meta.channels;
    j["norm_mean"] = meta.norm_mean;
    j["norm_std"] = meta.norm_std;
    j["train"] = {{"steps", meta.train_steps}, {"batch_size", meta.batch_size},
                  {"lr", meta.lr},             {"ema_decay", meta.ema_decay},
                  {"seed", meta.seed}};
    j["payload_file"] = fs::path(ppath).filename().string();
    j["payload_crc32"] = crc;
    std::ofstream f(mpath);
    if (!f) throw IoError("cannot write checkpoint manifest: " + mpath);
    f << j.dump(2) << "\n";
    return mpath;
}

CheckpointMeta load_checkpoint_meta(const std::string& path_or_base) {
    const std::string mpath = checkpoint_manifest_path(path_or_base);
    std::ifstream f(mpath);
    if (!f) throw IoError("cannot open checkpoint manifest: " + mpath);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw IoError("malformed checkpoint manifest " + mpath + ": " + e.what());
    }
    CheckpointMeta m;
    try {
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != 1)
            throw IncompatibilityError("unsupported checkpoint format_version " +
                                       std::to_string(m.format_version));
        m.model = j.at("model").get<std::string>();
        m.param_kind = param_kind_from_string(j.at("param_kind").get<std::string>());
        if (m.model == "ddpm-unet") {
            const auto& u = j.at("unet");
            m.unet.base_channels = u.at("base_channels").get<int>();
            m.unet.in_channels = u.at("in_channels").get<int>();
            m.unet.out_channels = u.at("out_channels").get<int>();
            m.unet.embed_dim = u.at("embed_dim").get<int>();
            const auto stages = u.at("attention_stages").get<std::vector<int>>();
            m.unet.attention_stages = std::set<int>(stages.begin(), stages.end());
            m.unet.time_coord_channel = u.at("time_coord_channel").get<bool>();
            m.unet.norm_groups = u.at("norm_groups").get<int>();
            m.unet.param_kind = m.param_kind;
        } else if (m.model == "fno") {
            const auto& u = j.at("fno");
            m.fno.modes_t = u.at("modes_t").get<int>();
            m.fno.modes_x = u.at("modes_x").get<int>();
            m.fno.width = u.at("width").get<int>();
            m.fno.n_layers = u.at("n_layers").get<int>();
            m.fno.in_channels = u.at("in_channels").get<int>();
            m.fno.out_channels = u.at("out_channels").get<int>();
        } else {
            throw IncompatibilityError("unknown checkpoint model kind: " + m.model);
        }
        m.schedule_T = j.at("schedule").at("T").get<int>();
        m.beta_start = j.at("schedule").at("beta_start").get<double>();
        m.beta_end = j.at("schedule").at("beta_end").get<double>();
        m.system_id = system_from_string(j.at("system_id").get<std::string>());
        m.field_index = j.at("field_index").get<int>();
        m.grid = grid_from_json(j.at("grid"));
        m.channels = j.at("channels").get<std::vector<std::string>>();
        m.norm_mean = j.at("norm_mean").get<std::vector<double>>();
        m.norm_std = j.at("norm_std").get<std::vector<double>>();
        m.train_steps = j.at("train").at("steps").get<int>();
        m.batch_size = j.at("train").at("batch_size").get<int>();
        m.lr = j.at("train").at("lr").get<double>();
        m.ema_decay = j.at("train").at("ema_decay").get<double>();
        m.seed = j.at("train").at("seed").get<std::uint64_t>();
        m.payload_file = j.at("payload_file").get<std::string>();
        m.payload_crc32 = j.at("payload_crc32").get<std::uint32_t>();
    } catch (const IncompatibilityError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError("malformed checkpoint manifest " + mpath + ": " + e.what());
    }
    return m;
}

void load_checkpoint_weights(const std::string& path_or_base, nn::ParamStore& store) {
    const std::string mpath = checkpoint_manifest_path(path_or_base);
    const CheckpointMeta meta = load_checkpoint_meta(mpath);
    const std::string ppath =
        (fs::path(mpath).parent_path() / meta.payload_file).string();
    const auto recs = read_records(ppath, meta.payload_crc32);

    auto fill = [&](const std::string& group, auto select) {
        for (auto& p : store.items()) {
            const std::string want = group + "/" + p->name;
            const TensorRecord* found = nullptr;
            for (const auto& r : recs)
                if (r.name == want) {
                    found = &r;
                    break;
                }
            if (!found)
                throw IncompatibilityError("checkpoint missing tensor " + want + " in " + ppath);
            if (found->shape != p->w.shape())
                throw IncompatibilityError("checkpoint tensor shape mismatch for " + want);
            Tensor& dst = select(*p);
            for (std::size_t i = 0; i < dst.size(); ++i)
                dst[i] = static_cast<double>(found->data[i]);
        }
    };
    fill("raw", [](nn::Param& p) -> Tensor& { return p.w; });
    fill("ema", [](nn::Param& p) -> Tensor& { return p.ema; });
}

}  // namespace compdiff

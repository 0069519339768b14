#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "compdiff/container.hpp"
#include "compdiff/grf.hpp"
#include "compdiff/grid.hpp"
#include "compdiff/pde.hpp"
#include "compdiff/tensor.hpp"

namespace compdiff {

// Typed description of a persisted dataset. The manifest is a JSON file next
// to a float32 payload of shape (n_samples, channels, nt, nx).
struct DatasetManifest {
    int format_version = 1;
    SystemId system_id = SystemId::ReactionDiffusion;
    std::string kind;     // "decoupled" | "coupled"
    int field_index = -1;  // which field a decoupled set solves for
    GridSpec grid;
    int n_samples = 0;
    std::vector<std::string> channels;
    std::vector<double> norm_mean, norm_std;
    double grf_lx = 0.0, grf_lt = 0.0, grf_amp = 0.0;
    std::uint64_t seed0 = 0;
    std::string payload_file;
    std::uint32_t payload_crc32 = 0;
    // Optional compose metadata (lambda, picard, steps, seed, checkpoint digests).
    std::string compose_json;

    int n_channels() const { return static_cast<int>(channels.size()); }
    std::size_t sample_elems() const {
        return static_cast<std::size_t>(n_channels()) * grid.nt * grid.nx;
    }
    void validate() const;
};

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

// Resolves "base" or "base.json" to the manifest/payload path pair.
std::string manifest_path(const std::string& base);
std::string payload_path_for(const std::string& manifest_file, const std::string& payload_file);

// Generate n decoupled samples for one field: channels
// [output, conditional (space-time GRF), ic broadcast]. Solver failures are
// retried with follow-on seeds; more than 5% failures aborts. Returns the
// manifest path.
std::string generate_decoupled(const SystemParams& sys, const GrfParams& grf, int field_index,
                               int n, std::uint64_t seed, const std::string& out_base);

// Generate n coupled samples: channels
// [field0, field1, ic0 broadcast, ic1 broadcast, x coord in [0,1], t coord in [0,1]].
std::string generate_coupled(const SystemParams& sys, const GrfParams& grf, int n,
                             std::uint64_t seed, const std::string& out_base);

// Persist arbitrary FieldSets (composer output) in the coupled layout.
std::string save_fieldsets(const std::vector<FieldSet>& sets, const std::string& out_base,
                           const std::string& compose_json = "");

// Streaming reader; CRC-verified at open. Samples are returned as
// (channels, nt, nx) tensors, z-scored with the manifest stats when
// `normalized` is set.
class DatasetReader {
public:
    explicit DatasetReader(const std::string& manifest_or_base);
    const DatasetManifest& manifest() const { return manifest_; }
    int n_samples() const { return manifest_.n_samples; }
    Tensor sample(int idx, bool normalized) const;
    Tensor channel(int idx, int ch, bool normalized) const;  // (nt, nx)
    FieldSet coupled_fieldset(int idx) const;                 // coupled datasets only

private:
    DatasetManifest manifest_;
    std::unique_ptr<container::PayloadReader> reader_;
};

}  // namespace compdiff

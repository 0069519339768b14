#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "compdiff/checkpoint.hpp"
#include "compdiff/ddpm.hpp"
#include "compdiff/grid.hpp"
#include "compdiff/schedule.hpp"
#include "compdiff/tensor.hpp"
#include "compdiff/unet.hpp"

namespace compdiff {

// A conditional denoiser for one field. States and predictions live in the
// expert's own normalized space; the stats below let the composer move
// cross-conditioning values between expert spaces.
class Expert {
public:
    virtual ~Expert() = default;
    virtual int field_index() const = 0;
    virtual ParamKind param_kind() const = 0;
    // z_t: (nt, nx) noisy state; cond: [cross-field channel, ic channel]
    // (normalized for this expert); returns the eps or v prediction.
    virtual Tensor predict(const Tensor& z_t, const std::vector<Tensor>& cond, int t) = 0;
    virtual double out_mean() const = 0;
    virtual double out_std() const = 0;
    virtual double cond_mean() const = 0;
    virtual double cond_std() const = 0;
    virtual double ic_mean() const = 0;
    virtual double ic_std() const = 0;
};

// Expert backed by a trained UNet checkpoint (EMA weights).
class NetExpert : public Expert {
public:
    explicit NetExpert(const std::string& checkpoint_path);
    int field_index() const override { return meta_.field_index; }
    ParamKind param_kind() const override { return meta_.param_kind; }
    Tensor predict(const Tensor& z_t, const std::vector<Tensor>& cond, int t) override;
    double out_mean() const override { return meta_.norm_mean[0]; }
    double out_std() const override { return meta_.norm_std[0]; }
    double cond_mean() const override { return meta_.norm_mean[1]; }
    double cond_std() const override { return meta_.norm_std[1]; }
    double ic_mean() const override { return meta_.norm_mean[2]; }
    double ic_std() const override { return meta_.norm_std[2]; }
    const CheckpointMeta& meta() const { return meta_; }

private:
    CheckpointMeta meta_;
    std::unique_ptr<UNet> net_;
};

struct ComposeConfig {
    int K = 2;            // Picard iterations per diffusion step
    double lambda = 0.2;  // Euler step size
    std::uint64_t seed = 0;
    bool renoise_picard = false;  // ablation: re-noise iterates to level t
    // Teacher-forced ablation: physical-space conditioning fields, one per
    // field index, used instead of the running cross-field estimates.
    std::vector<Tensor> frozen_cond;

    void validate() const;
};

// z^{t,k+1} = z^{t,k} + lambda (z0_hat - z^{t,k})
Tensor picard_update(const Tensor& z_tk, const Tensor& z0_hat, double lambda);

// Symmetric (Jacobi) product-of-experts sampler. Experts are matched to
// fields by their field_index, so the result is independent of argument
// order; per-field noise streams are keyed by (seed, field, t).
FieldSet compose(const std::vector<Expert*>& experts, const NoiseSchedule& sched,
                 const GridSpec& grid, const std::vector<std::vector<double>>& ics,
                 SystemId system, const ComposeConfig& cfg);

}  // namespace compdiff

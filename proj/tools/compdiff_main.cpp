// compdiff: train conditional denoising diffusion models on decoupled PDE
// data and compose them at inference into coupled trajectories; includes an
// FNO baseline trained on coupled data, dataset generation, evaluation, and
// plotting.

#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "compdiff/composer.hpp"
#include "compdiff/dataset.hpp"
#include "compdiff/evalh.hpp"
#include "compdiff/kernels.hpp"
#include "compdiff/trainer.hpp"

using namespace compdiff;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

struct Presets {
    int base_channels, steps, batch, sched_T;
    double beta_start, beta_end;
};

Presets preset_named(const std::string& name) {
    // paper: full-size configuration; desk: scaled down so the whole pipeline
    // finishes on a workstation. The desk schedule keeps the same terminal
    // signal level by scaling beta with 500/T.
    if (name == "paper") return {48, 50000, 32, 500, 1e-4, 0.02};
    if (name == "desk") return {8, 5000, 16, 50, 1e-3, 0.2};
    throw UsageError("unknown preset: " + name);
}

int field_index_from_kind(const std::string& kind, SystemId system) {
    // decoupled-u / decoupled-v address the first/second field of the system
    // (rd: u,v; burgers: c,v). decoupled-c and decoupled-0/1 are aliases.
    const std::string tag = kind.substr(std::string("decoupled-").size());
    if (tag == "0" || tag == "u" || (system == SystemId::ModifiedBurgers && tag == "c")) return 0;
    if (tag == "1" || tag == "v") return 1;
    throw UsageError("unknown decoupled field tag: " + kind);
}

json grid_json(const GridSpec& g) {
    return json{{"nx", g.nx},       {"nt", g.nt},       {"x_min", g.x_min},
                {"x_max", g.x_max}, {"t_max", g.t_max}, {"bc", to_string(g.bc)}};
}

// Shared by compose/evaluate: load experts, check mutual compatibility,
// return them with the common schedule.
struct ExpertBundle {
    std::vector<std::unique_ptr<NetExpert>> owned;
    std::vector<Expert*> ptrs;
    NoiseSchedule sched;
    GridSpec grid;
    SystemId system;
    std::string digest;
};

ExpertBundle load_experts(const std::vector<std::string>& paths) {
    if (paths.empty()) throw UsageError("no model checkpoints given");
    ExpertBundle b;
    for (const auto& p : paths) b.owned.push_back(std::make_unique<NetExpert>(p));
    const CheckpointMeta& m0 = b.owned.front()->meta();
    b.sched = m0.schedule();
    b.grid = m0.grid;
    b.system = m0.system_id;
    std::string digest;
    for (auto& e : b.owned) {
        const CheckpointMeta& m = e->meta();
        if (m.schedule_T != m0.schedule_T || m.beta_start != m0.beta_start ||
            m.beta_end != m0.beta_end)
            throw IncompatibilityError("checkpoints disagree on the noise schedule");
        if (!(m.grid == m0.grid)) throw IncompatibilityError("checkpoints disagree on the grid");
        if (m.system_id != m0.system_id)
            throw IncompatibilityError("checkpoints disagree on the system");
        if (m.param_kind != m0.param_kind)
            throw IncompatibilityError("checkpoints mix eps and v parameterizations");
        digest += (digest.empty() ? "" : "+") + m.digest();
        b.ptrs.push_back(e.get());
    }
    b.digest = digest;
    return b;
}

int run(int argc, char** argv) {
    CLI::App app{"compositional diffusion surrogates for coupled PDEs"};
    app.require_subcommand(1);
    int threads = 0;
    bool print_config = false;
    app.add_option("--threads", threads, "cap worker threads (0 = all cores)");
    app.add_flag("--print-config", print_config, "print the resolved configuration and exit");

    // generate-data ----------------------------------------------------------
    auto* gen = app.add_subcommand("generate-data", "generate decoupled or coupled datasets");
    std::string g_system = "rd", g_kind = "coupled", g_out;
    int g_n = 100, g_nx = 0, g_nt = 0;
    std::uint64_t g_seed = 0;
    double g_amp = 0.0, g_lx = 0.0, g_lt = 0.0;
    gen->add_option("--system", g_system, "rd | burgers")->check(CLI::IsMember({"rd", "burgers"}));
    gen->add_option("--kind", g_kind, "decoupled-u | decoupled-v | coupled");
    gen->add_option("--n", g_n, "number of samples")->check(CLI::PositiveNumber);
    gen->add_option("--seed", g_seed, "base seed");
    gen->add_option("--out", g_out, "output base path")->required();
    gen->add_option("--nx", g_nx, "spatial points (0 = system default)");
    gen->add_option("--nt", g_nt, "time points (0 = system default)");
    gen->add_option("--grf-amp", g_amp, "GRF amplitude (0 = default 0.5)");
    gen->add_option("--grf-lx", g_lx, "GRF x length scale (0 = default)");
    gen->add_option("--grf-lt", g_lt, "GRF t length scale (0 = default)");

    // train -------------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "train a denoiser or the FNO baseline");
    std::string t_dataset, t_model = "ddpm-v", t_preset = "desk", t_out, t_loss_log,
                t_attention = "default";
    int t_steps = 0, t_batch = 0, t_ckpt_every = 0;
    double t_lr = 2e-4, t_ema = 0.999;
    std::uint64_t t_seed = 0;
    tr->add_option("--dataset", t_dataset, "training dataset manifest")->required();
    tr->add_option("--model", t_model, "ddpm-eps | ddpm-v | fno")
        ->check(CLI::IsMember({"ddpm-eps", "ddpm-v", "fno"}));
    tr->add_option("--preset", t_preset, "paper | desk")->check(CLI::IsMember({"paper", "desk"}));
    tr->add_option("--out", t_out, "checkpoint base path")->required();
    tr->add_option("--steps", t_steps, "training steps (0 = preset)");
    tr->add_option("--batch", t_batch, "batch size (0 = preset)");
    tr->add_option("--lr", t_lr, "learning rate");
    tr->add_option("--ema-decay", t_ema, "EMA decay");
    tr->add_option("--seed", t_seed, "training seed");
    tr->add_option("--attention", t_attention, "default | all (attention stages)");
    tr->add_option("--checkpoint-every", t_ckpt_every, "intermediate checkpoint interval");
    tr->add_option("--loss-log", t_loss_log, "loss CSV path");

    // compose ------------------------------------------------------------------
    auto* co = app.add_subcommand("compose", "compose coupled fields from per-field models");
    std::string c_models, c_ics, c_out;
    int c_picard = 2, c_steps = 0, c_sample = 0;
    double c_lambda = 0.2;
    std::uint64_t c_seed = 0;
    bool c_renoise = false;
    co->add_option("--models", c_models, "comma-separated checkpoints (one per field)")
        ->required();
    co->add_option("--ics", c_ics, "coupled dataset supplying initial conditions")->required();
    co->add_option("--sample", c_sample, "sample index within --ics");
    co->add_option("--lambda", c_lambda, "Picard step size");
    co->add_option("--picard", c_picard, "coupling iterations per diffusion step");
    co->add_option("--steps", c_steps, "diffusion steps (must match checkpoints; 0 = theirs)");
    co->add_option("--seed", c_seed, "sampling seed");
    co->add_flag("--renoise-picard", c_renoise, "re-noise iterates between Picard updates");
    co->add_option("--out", c_out, "output base path")->required();

    // evaluate -----------------------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "error metrics over a coupled test set");
    std::string e_method = "compose-v", e_test, e_report, e_models, e_model;
    int e_n = 0, e_picard = 2, e_steps = 0;
    double e_lambda = 0.2;
    std::uint64_t e_seed = 0;
    ev->add_option("--method", e_method, "compose-eps | compose-v | fno")
        ->check(CLI::IsMember({"compose-eps", "compose-v", "fno"}));
    ev->add_option("--test", e_test, "coupled test dataset")->required();
    ev->add_option("--report", e_report, "report CSV path")->required();
    ev->add_option("--models", e_models, "checkpoints for compose methods");
    ev->add_option("--model", e_model, "checkpoint for fno");
    ev->add_option("--n", e_n, "evaluate only the first n samples (0 = all)");
    ev->add_option("--lambda", e_lambda, "Picard step size");
    ev->add_option("--picard", e_picard, "coupling iterations");
    ev->add_option("--steps", e_steps, "diffusion steps (must match checkpoints; 0 = theirs)");
    ev->add_option("--seed", e_seed, "sampling seed");

    // plot ----------------------------------------------------------------------
    auto* pl = app.add_subcommand("plot", "render space-time heatmaps");
    std::string p_fields, p_out;
    int p_sample = 0;
    pl->add_option("--fields", p_fields, "comma-separated dataset paths")->required();
    pl->add_option("--out", p_out, "output directory")->required();
    pl->add_option("--sample", p_sample, "sample index within each dataset");

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) kernels::set_threads(threads);

    if (gen->parsed()) {
        const SystemId sys_id = system_from_string(g_system);
        GridSpec grid = SystemParams::default_grid(sys_id, g_nx, g_nt);
        SystemParams sys = SystemParams::defaults(sys_id, grid);
        GrfParams grf = GrfParams::defaults(grid, g_seed);
        if (g_amp > 0.0) grf.amplitude = g_amp;
        if (g_lx > 0.0) grf.length_scale_x = g_lx;
        if (g_lt > 0.0) grf.length_scale_t = g_lt;
        if (print_config) {
            json j{{"command", "generate-data"}, {"system", g_system}, {"kind", g_kind},
                   {"n", g_n},                   {"seed", g_seed},     {"out", g_out},
                   {"grid", grid_json(grid)},    {"grf_amp", grf.amplitude},
                   {"grf_lx", grf.length_scale_x}, {"grf_lt", grf.length_scale_t}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        std::string path;
        if (g_kind == "coupled")
            path = generate_coupled(sys, grf, g_n, g_seed, g_out);
        else if (g_kind.rfind("decoupled-", 0) == 0)
            path = generate_decoupled(sys, grf, field_index_from_kind(g_kind, sys_id), g_n,
                                      g_seed, g_out);
        else
            throw UsageError("unknown kind: " + g_kind);
        std::cout << "wrote " << path << "\n";
        return 0;
    }

    if (tr->parsed()) {
        const Presets ps = preset_named(t_preset);
        TrainConfig tc;
        tc.steps = t_steps > 0 ? t_steps : ps.steps;
        tc.batch_size = t_batch > 0 ? t_batch : ps.batch;
        tc.lr = t_lr;
        tc.ema_decay = t_ema;
        tc.seed = t_seed;
        tc.checkpoint_every = t_ckpt_every;
        tc.loss_log_path = t_loss_log;
        if (print_config) {
            json j{{"command", "train"},   {"dataset", t_dataset}, {"model", t_model},
                   {"preset", t_preset},   {"steps", tc.steps},    {"batch", tc.batch_size},
                   {"lr", tc.lr},          {"ema_decay", tc.ema_decay},
                   {"seed", tc.seed},      {"out", t_out},
                   {"schedule_T", ps.sched_T}, {"base_channels", ps.base_channels},
                   {"attention", t_attention}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        DatasetReader data(t_dataset);
        std::string path;
        if (t_model == "fno") {
            tc.param_kind = ParamKind::V;
            FnoConfig fc;
            path = train_fno(data, fc, tc, t_out);
        } else {
            tc.param_kind = t_model == "ddpm-eps" ? ParamKind::Epsilon : ParamKind::V;
            UNetConfig uc;
            uc.base_channels = ps.base_channels;
            uc.param_kind = tc.param_kind;
            if (t_attention == "all") uc.attention_stages = {0, 1, 2};
            NoiseSchedule sched = build_linear_schedule(ps.sched_T, ps.beta_start, ps.beta_end);
            path = train_denoiser(data, uc, sched, tc, t_out);
        }
        std::cout << "wrote " << path << "\n";
        return 0;
    }

    if (co->parsed()) {
        ExpertBundle b = load_experts(split_csv(c_models));
        if (c_steps > 0 && c_steps != b.sched.T())
            throw IncompatibilityError("--steps " + std::to_string(c_steps) +
                                       " does not match the checkpoints' T = " +
                                       std::to_string(b.sched.T()));
        ComposeConfig cc;
        cc.K = c_picard;
        cc.lambda = c_lambda;
        cc.seed = c_seed;
        cc.renoise_picard = c_renoise;
        if (print_config) {
            json j{{"command", "compose"}, {"models", c_models}, {"ics", c_ics},
                   {"sample", c_sample},   {"lambda", cc.lambda}, {"picard", cc.K},
                   {"steps", b.sched.T()}, {"seed", cc.seed},     {"out", c_out},
                   {"renoise_picard", cc.renoise_picard}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        DatasetReader ics_data(c_ics);
        if (!(ics_data.manifest().grid == b.grid))
            throw IncompatibilityError("compose: --ics grid does not match the checkpoints");
        FieldSet truth = ics_data.coupled_fieldset(c_sample);
        FieldSet out = compose(b.ptrs, b.sched, b.grid, truth.ics, b.system, cc);
        json cj{{"lambda", cc.lambda},
                {"picard", cc.K},
                {"steps", b.sched.T()},
                {"seed", cc.seed},
                {"checkpoint_digests", b.digest}};
        const std::string path = save_fieldsets({out}, c_out, cj.dump());
        std::cout << "wrote " << path << "\n";
        return 0;
    }

    if (ev->parsed()) {
        if (print_config) {
            json j{{"command", "evaluate"}, {"method", e_method}, {"test", e_test},
                   {"report", e_report},    {"n", e_n},           {"lambda", e_lambda},
                   {"picard", e_picard},    {"seed", e_seed}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        DatasetReader test(e_test);
        std::vector<EvalRow> rows;
        if (e_method == "fno") {
            if (e_model.empty()) throw UsageError("evaluate --method fno needs --model");
            CheckpointMeta meta = load_checkpoint_meta(e_model);
            if (meta.model != "fno") throw IncompatibilityError("--model is not an fno checkpoint");
            Fno net(meta.fno, 0);
            load_checkpoint_weights(e_model, net.params());
            net.use_ema_weights();
            rows = evaluate_fno(net, meta, test, e_n, meta.digest());
        } else {
            if (e_models.empty()) throw UsageError("evaluate compose methods need --models");
            ExpertBundle b = load_experts(split_csv(e_models));
            if (e_steps > 0 && e_steps != b.sched.T())
                throw IncompatibilityError("--steps does not match the checkpoints' schedule");
            const ParamKind want =
                e_method == "compose-eps" ? ParamKind::Epsilon : ParamKind::V;
            for (auto& e : b.owned)
                if (e->param_kind() != want)
                    throw IncompatibilityError("checkpoint parameterization does not match " +
                                               e_method);
            ComposeConfig cc;
            cc.K = e_picard;
            cc.lambda = e_lambda;
            cc.seed = e_seed;
            rows = evaluate_compose(b.ptrs, b.sched, test, cc, e_n, e_method, b.digest);
        }
        write_report_csv(e_report, rows);
        std::cout << render_report_table(rows);
        std::cout << "wrote " << e_report << "\n";
        return 0;
    }

    if (pl->parsed()) {
        if (print_config) {
            json j{{"command", "plot"}, {"fields", p_fields}, {"out", p_out},
                   {"sample", p_sample}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        std::vector<FieldSet> sets;
        for (const auto& path : split_csv(p_fields)) {
            DatasetReader r(path);
            sets.push_back(r.coupled_fieldset(p_sample));
        }
        const std::string path = render_heatmaps(sets, p_out);
        std::cout << "wrote " << path << "\n";
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 2;
    } catch (const IncompatibilityError& e) {
        std::cerr << "incompatibility: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

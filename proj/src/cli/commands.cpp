#include "uat/cli/commands.hpp"

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "uat/adiff/gradcheck.hpp"
#include "uat/channels/dataset.hpp"
#include "uat/cli/run_config.hpp"
#include "uat/error.hpp"
#include "uat/eval/reference.hpp"
#include "uat/eval/sweep.hpp"
#include "uat/nets/checkpoint.hpp"
#include "uat/problems/toy.hpp"
#include "uat/train/train.hpp"

#ifndef UAT_GIT_DESCRIBE
#define UAT_GIT_DESCRIBE "unknown"
#endif

namespace uat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version() { return UAT_GIT_DESCRIBE; }

namespace {

class MissingCheckpoint : public Error {
public:
    using Error::Error;
};

class ToleranceBreach : public Error {
public:
    using Error::Error;
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f || !(f << text) || !f.flush()) throw IoError("cannot write " + p.string());
}

void make_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

// Resolved config plus the provenance every run directory carries.
void write_provenance(const fs::path& dir, const RunConfig& cfg, const std::string& command) {
    write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
    write_text(dir / "run.json",
               json{{"command", command}, {"seed", cfg.train.seed}, {"version", version()}}.dump(2) + "\n");
}

std::vector<std::size_t> parse_widths(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            std::size_t used = 0;
            const unsigned long v = std::stoul(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("bad width list '" + s + "'");
        }
    }
    return out;
}

// Flags shared by commands that build a RunConfig. Each applies only when given.
struct Overrides {
    std::string config;
    std::optional<std::string> method, cost_mode, arch, activation, widths, mult_arch, mult_widths, family, data;
    std::optional<std::size_t> epochs, batches, batch_size, ea, t, k, nt, nrf, count, pgd_steps, n_test;
    std::optional<double> lr_policy, lr_multiplier, eps, gamma, kappa_db, rho_u, rho_a, snr_min_db, snr_max_db,
        snr_db, tau, pgd_step, pgd_radius;
    std::optional<int> paths;
    std::optional<std::uint64_t> seed, data_seed, test_seed;
    std::optional<std::size_t> threads;

    void add_model(CLI::App& a) {
        a.add_option("--config", config, "JSON config file; flags override its values");
        a.add_option("--k", k, "number of users K (default 3)");
        a.add_option("--nt", nt, "transmit antennas N_T (default 8)");
        a.add_option("--nrf", nrf, "RF chains N_RF (default 4)");
        a.add_option("--gamma", gamma, "per-user rate requirement in bits/s/Hz (default 1)");
    }
    void add_channel(CLI::App& a) {
        a.add_option("--family", family, "rayleigh, rician, correlated or sparse (default rayleigh)");
        a.add_option("--kappa-db", kappa_db, "Rician factor in dB (default 10)");
        a.add_option("--rho-u", rho_u, "user correlation (default 0)");
        a.add_option("--rho-a", rho_a, "antenna correlation (default 0)");
        a.add_option("--paths", paths, "sparse-channel path count L (default 4)");
    }
    void add_train(CLI::App& a) {
        a.add_option("--method", method, "pdl, uat or pgd_baseline (default pdl)");
        a.add_option("--epochs", epochs, "epochs E (default 20)");
        a.add_option("--batches", batches, "batches per epoch B; 0 uses the whole set (default 0)");
        a.add_option("--batch-size", batch_size, "batch size N_B (default 100)");
        a.add_option("--lr-policy", lr_policy, "policy learning rate (default 3e-3)");
        a.add_option("--lr-multiplier", lr_multiplier, "multiplier learning rate (default 1e-4)");
        a.add_option("--ea", ea, "first adversarial epoch E_A (default E/2)");
        a.add_option("--t", t, "adversarial rounds T per batch (default 5)");
        a.add_option("--eps", eps, "perturbation range per round (default 0.078125)");
        a.add_option("--cost-mode", cost_mode, "objective_only or objective_plus_violation");
        a.add_option("--pgd-steps", pgd_steps, "baseline ascent steps (default 7)");
        a.add_option("--pgd-step", pgd_step, "baseline step size (default 0.03125)");
        a.add_option("--pgd-radius", pgd_radius, "baseline projection radius (default 0.125)");
        a.add_option("--seed", seed, "training seed (default 1)");
        a.add_option("--arch", arch, "policy architecture: mlp or edge_gnn (default edge_gnn)");
        a.add_option("--widths", widths, "policy hidden widths, comma separated (default 32,32,32)");
        a.add_option("--activation", activation, "tanh or relu (default relu)");
        a.add_option("--mult-arch", mult_arch, "multiplier architecture (default edge_gnn)");
        a.add_option("--mult-widths", mult_widths, "multiplier hidden widths (default 16,16)");
        a.add_option("--data", data, "training set file; generated from the config when absent");
        a.add_option("--count", count, "generated training samples (default 20000)");
        a.add_option("--data-seed", data_seed, "training set seed (default 1)");
        a.add_option("--snr-min-db", snr_min_db, "lowest training P/sigma^2 in dB (default 0)");
        a.add_option("--snr-max-db", snr_max_db, "highest training P/sigma^2 in dB (default 20)");
    }
    void add_test(CLI::App& a) {
        a.add_option("--n-test", n_test, "test samples per distribution (default 2000)");
        a.add_option("--snr-db", snr_db, "test P/sigma^2 in dB (default 10)");
        a.add_option("--test-seed", test_seed, "test set seed (default 7)");
        a.add_option("--tau", tau, "violation tolerance (default 1e-6)");
    }

    RunConfig resolve() const {
        RunConfig c;
        if (!config.empty()) c = merge_json(c, read_json_file(config));
        if (k || nt || nrf || gamma) {
            auto& p = c.precoding;
            p = problems::PrecodingConfig::uniform(nt.value_or(p.n_t), nrf.value_or(p.n_rf), k.value_or(p.k),
                                                   gamma.value_or(p.gamma.empty() ? 1.0 : p.gamma[0]));
        }
        auto& t = c.train;
        if (method) t.method = train::parse_method(*method);
        if (cost_mode) t.cost_mode = train::parse_cost_mode(*cost_mode);
        if (epochs) t.epochs = *epochs;
        if (batches) t.batches = *batches;
        if (batch_size) t.batch_size = *batch_size;
        if (lr_policy) t.lr_policy = *lr_policy;
        if (lr_multiplier) t.lr_multiplier = *lr_multiplier;
        if (ea) t.at_start_epoch = *ea;
        if (this->t) t.adv_iters = *this->t;
        if (eps) t.perturb_range = *eps;
        if (pgd_steps) t.pgd.steps = *pgd_steps;
        if (pgd_step) t.pgd.step_size = *pgd_step;
        if (pgd_radius) t.pgd.radius = *pgd_radius;
        if (seed) t.seed = *seed;
        if (arch) c.policy.arch = nets::parse_arch(*arch);
        if (activation) {
            c.policy.activation = nets::parse_activation(*activation);
            c.multiplier.activation = c.policy.activation;
        }
        if (widths) {
            c.policy.widths = parse_widths(*widths);
            c.policy.hidden_layers = c.policy.widths.size();
        }
        if (mult_arch) c.multiplier.arch = nets::parse_arch(*mult_arch);
        if (mult_widths) {
            c.multiplier.widths = parse_widths(*mult_widths);
            c.multiplier.hidden_layers = c.multiplier.widths.size();
        }
        if (family) c.data.family = channels::parse_family(*family);
        if (kappa_db) c.data.kappa_db = *kappa_db;
        if (rho_u) c.data.rho_u = *rho_u;
        if (rho_a) c.data.rho_a = *rho_a;
        if (paths) c.data.n_paths = *paths;
        if (count) c.data.count = *count;
        if (data_seed) c.data.seed = *data_seed;
        if (snr_min_db) c.data.snr_min_db = *snr_min_db;
        if (snr_max_db) c.data.snr_max_db = *snr_max_db;
        if (data) c.data.path = *data;
        if (n_test) c.sweep.n_test = *n_test;
        if (snr_db) c.sweep.snr_db = *snr_db;
        if (test_seed) c.sweep.seed = *test_seed;
        if (tau) c.sweep.tau = *tau;
        if (threads) c.threads = *threads;
        c.validate();
        return c;
    }
};

channels::Dataset training_set(const RunConfig& c) {
    if (!c.data.path.empty()) {
        channels::Dataset d = channels::load_dataset(c.data.path);
        if (d.k != c.precoding.k || d.n_t != c.precoding.n_t) {
            throw ConfigError("dataset " + c.data.path + " does not match K and N_T of the config");
        }
        return d;
    }
    return channels::generate_dataset(c.data.model(), c.precoding.k, c.precoding.n_t, c.data.count,
                                      {c.data.snr_min_db, c.data.snr_max_db}, c.data.seed);
}

int cmd_gen_data(const Overrides& o, const std::string& out_path, std::ostream& out) {
    const RunConfig c = o.resolve();
    const channels::Dataset d = channels::generate_dataset(c.data.model(), c.precoding.k, c.precoding.n_t,
                                                           c.data.count, {c.data.snr_min_db, c.data.snr_max_db},
                                                           c.data.seed);
    fs::path p = out_path;
    if (p.empty()) {
        p = channels::to_string(c.data.family) + "_" + std::to_string(c.data.count) + "_s" +
            std::to_string(c.data.seed) + ".uatds";
    }
    channels::save_dataset(d, p);
    out << "wrote " << d.samples.size() << " samples to " << p.string() << "\n";
    return kOk;
}

int cmd_train(const Overrides& o, const std::string& out_dir, std::ostream& out) {
    RunConfig c = o.resolve();
    c.train.at_start_epoch = c.train.ea();
    Eigen::setNbThreads(static_cast<int>(c.threads));
    const fs::path dir = out_dir;
    make_dir(dir);
    write_provenance(dir, c, "train");

    const channels::Dataset ds = training_set(c);
    const problems::PrecodingProblem problem(c.precoding);
    const train::Model model{&problem, nets::Network(c.policy, nets::Role::Policy, nets::Layout::precoding_policy(c.precoding)),
                             nets::Network(c.multiplier, nets::Role::Multiplier,
                                           nets::Layout::precoding_multiplier(c.precoding))};
    const train::Data data{problems::pack_channels(ds.samples), problems::pack_snr(ds.samples)};

    std::ofstream log(dir / "log.jsonl", std::ios::binary);
    if (!log) throw IoError("cannot write " + (dir / "log.jsonl").string());
    const auto on_epoch = [&](const train::EpochLog& l, const train::TrainState&) {
        const std::string line = train::to_json(l).dump();
        log << line << '\n' << std::flush;
        out << line << '\n' << std::flush;
    };
    const train::TrainState s = train::train(model, data, c.train, train::initial_state(model, c.train.seed), on_epoch);

    nets::Checkpoint ck{c.policy, s.theta, c.multiplier, s.xi, s.epoch, c.train.seed,
                        json{{"method", train::to_string(c.train.method)},
                             {"precoding", eval::to_json(c.precoding)},
                             {"train", train::to_json(c.train)}}};
    nets::save_checkpoint(ck, dir / "model.ckpt");
    out << "wrote " << (dir / "model.ckpt").string() << "\n";
    return kOk;
}

struct SweepArgs {
    std::vector<std::string> checkpoints;
    std::vector<std::string> logs;
    std::string preset;
    std::string out;
    bool strict = false;
};

problems::PrecodingConfig sweep_precoding(const Overrides& o, const RunConfig& c, const std::vector<std::string>& cks) {
    if (!o.config.empty() || o.k || o.nt || o.nrf || o.gamma) return c.precoding;
    for (const auto& p : cks) {
        try {
            const auto ck = nets::load_checkpoint(p);
            if (ck.meta.contains("precoding")) return eval::precoding_config_from_json(ck.meta["precoding"]);
        } catch (const IoError&) {
        }
    }
    return c.precoding;
}

eval::SweepResult run_sweep(const Overrides& o, const RunConfig& c, const SweepArgs& a,
                            const std::vector<eval::TestSpec>& tests, std::ostream& out) {
    if (a.checkpoints.empty()) throw ConfigError("no checkpoints given (use --checkpoint)");
    eval::SweepSpec spec;
    spec.tests = tests;
    spec.n_test = c.sweep.n_test;
    spec.snr_db = c.sweep.snr_db;
    spec.seed = c.sweep.seed;
    spec.tau = c.sweep.tau;
    for (const auto& p : a.checkpoints) spec.methods.push_back({"", "", p});
    const eval::SweepResult r = eval::ood_sweep(sweep_precoding(o, c, a.checkpoints), spec);

    const fs::path dir = a.out;
    make_dir(dir);
    write_provenance(dir, c, "sweep");
    write_text(dir / "sweep.csv", eval::sweep_csv(r));
    const std::string md = eval::sweep_markdown(r);
    write_text(dir / "sweep.md", md);
    if (!a.logs.empty()) {
        std::vector<std::pair<std::string, fs::path>> logs;
        for (const auto& l : a.logs) {
            const auto eq = l.find('=');
            if (eq == std::string::npos) throw ConfigError("--log expects label=path, got '" + l + "'");
            logs.emplace_back(l.substr(0, eq), l.substr(eq + 1));
        }
        write_text(dir / "curves.csv", eval::epoch_curves_csv(logs));
    }
    out << md;
    if (a.strict && !r.absent.empty()) {
        throw MissingCheckpoint("missing checkpoint " + r.absent.front().checkpoint.string());
    }
    return r;
}

int cmd_grad_check(const std::string& ops, std::size_t points, std::size_t instances, std::uint64_t seed,
                   std::ostream& out) {
    std::vector<std::string> kinds;
    std::stringstream in(ops);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (!tok.empty()) kinds.push_back(tok);
    }
    bool ok = true;
    out << std::left << std::setw(24) << "op" << std::setw(8) << "points" << "max_rel_error\n";
    for (const auto& r : adiff::finite_difference_suite(kinds, points, seed)) {
        out << std::setw(24) << r.op << std::setw(8) << r.points << std::scientific << std::setprecision(3)
            << r.max_rel_error << std::defaultfloat << (r.passed ? "" : "  FAIL") << "\n";
        ok = ok && r.passed;
    }
    if (instances > 0) {
        const auto env = problems::toy_envelope_check(instances, seed);
        const bool env_ok = env.max_rel_error < 1e-3;
        out << std::setw(24) << "envelope(water-filling)" << std::setw(8) << env.instances << std::scientific
            << std::setprecision(3) << env.max_rel_error << std::defaultfloat << (env_ok ? "" : "  FAIL") << "\n";
        ok = ok && env_ok;
    }
    if (!ok) throw ToleranceBreach("gradient check tolerance exceeded");
    out << "all checks passed\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Unsupervised adversarial training for QoS-constrained hybrid precoding", "uat"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version());

    Overrides o;
    app.add_option("--threads", o.threads, "worker thread cap (default 1)")->check(CLI::PositiveNumber);
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "generate and save a channel dataset");
    o.add_model(*gen);
    o.add_channel(*gen);
    gen->add_option("--count", o.count, "number of samples")->required();
    gen->add_option("--seed", o.data_seed, "dataset seed (default 1)");
    gen->add_option("--snr-min-db", o.snr_min_db, "lowest P/sigma^2 in dB (default 0)");
    gen->add_option("--snr-max-db", o.snr_max_db, "highest P/sigma^2 in dB (default 20)");
    gen->add_option("--out", gen_out, "output file (default <family>_<count>_s<seed>.uatds)");

    std::string train_out;
    auto* tr = app.add_subcommand("train", "train a policy and write checkpoint, config and log");
    o.add_model(*tr);
    o.add_train(*tr);
    o.add_channel(*tr);
    tr->add_option("--out", train_out, "run directory")->required();

    SweepArgs ev_args;
    auto* ev = app.add_subcommand("eval", "score checkpoints on one test distribution");
    o.add_model(*ev);
    o.add_channel(*ev);
    o.add_test(*ev);
    ev->add_option("--checkpoint", ev_args.checkpoints, "checkpoint file (repeatable)");
    ev->add_option("--out", ev_args.out, "report directory")->required();
    ev->add_flag("--strict", ev_args.strict, "exit 5 when a checkpoint is missing");

    SweepArgs sw_args;
    auto* sw = app.add_subcommand("sweep", "score checkpoints over a preset grid of test distributions");
    o.add_model(*sw);
    o.add_test(*sw);
    sw->add_option("--preset", sw_args.preset, "rician, correlated, sparse or rayleigh (default rician)");
    sw->add_option("--checkpoint", sw_args.checkpoints, "checkpoint file (repeatable)");
    sw->add_option("--log", sw_args.logs, "training log as label=path for per-epoch curves (repeatable)");
    sw->add_option("--out", sw_args.out, "report directory")->required();
    sw->add_flag("--strict", sw_args.strict, "exit 5 when a checkpoint is missing");

    std::string ops;
    std::size_t points = 100;
    std::size_t instances = 100;
    std::uint64_t gc_seed = 1;
    auto* gc = app.add_subcommand("grad-check", "finite-difference and envelope-theorem checks");
    gc->add_option("--ops", ops, "comma-separated op kinds (default all)");
    gc->add_option("--points", points, "random points per op (default 100)");
    gc->add_option("--instances", instances, "water-filling instances, 0 to skip (default 100)");
    gc->add_option("--seed", gc_seed, "seed (default 1)");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << version() << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(o, gen_out, out);
        if (tr->parsed()) return cmd_train(o, train_out, out);
        if (ev->parsed()) {
            const RunConfig c = o.resolve();
            const auto m = c.data.model();
            std::string name = "none";
            double value = 0.0;
            switch (m.family) {
                case channels::Family::Rician: name = "kappa_db", value = c.data.kappa_db; break;
                case channels::Family::Correlated:
                    name = c.data.rho_a != 0.0 && c.data.rho_u == 0.0 ? "rho_a" : "rho_u";
                    value = name == "rho_a" ? c.data.rho_a : c.data.rho_u;
                    break;
                case channels::Family::Sparse: name = "n_paths", value = c.data.n_paths; break;
                case channels::Family::Rayleigh: break;
            }
            run_sweep(o, c, ev_args, {{m, name, value}}, out);
            return kOk;
        }
        if (sw->parsed()) {
            RunConfig c = o.resolve();
            if (!sw_args.preset.empty()) c.sweep.preset = sw_args.preset;
            run_sweep(o, c, sw_args, eval::preset(c.sweep.preset), out);
            return kOk;
        }
        if (gc->parsed()) return cmd_grad_check(ops, points, instances, gc_seed, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const MissingCheckpoint& e) {
        err << e.what() << "\n";
        return kMissingCheckpoint;
    } catch (const ToleranceBreach& e) {
        err << e.what() << "\n";
        return kToleranceBreach;
    } catch (const NumericalError& e) {
        err << "non-finite value: " << e.what() << "\n";
        return kNonFinite;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kIoError;
    } catch (const channels::DatasetError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kIoError;
    } catch (const ShapeError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return kOk;
}

}  // namespace uat::cli

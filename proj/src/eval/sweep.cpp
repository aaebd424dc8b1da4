#include "uat/eval/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <limits>
#include <sstream>
#include <tuple>

#include "uat/channels/dataset.hpp"
#include "uat/error.hpp"
#include "uat/eval/reference.hpp"
#include "uat/rng.hpp"

namespace uat::eval {

using nlohmann::json;

json to_json(const problems::PrecodingConfig& cfg) {
    return {{"n_t", cfg.n_t}, {"n_rf", cfg.n_rf}, {"k", cfg.k}, {"gamma", cfg.gamma}};
}

problems::PrecodingConfig precoding_config_from_json(const json& j) {
    try {
        problems::PrecodingConfig cfg;
        cfg.n_t = j.at("n_t").get<std::size_t>();
        cfg.n_rf = j.at("n_rf").get<std::size_t>();
        cfg.k = j.at("k").get<std::size_t>();
        cfg.gamma = j.at("gamma").get<std::vector<double>>();
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad precoding configuration: ") + e.what());
    }
}

std::vector<TestSpec> preset(std::string_view name) {
    using channels::ChannelModelSpec;
    std::vector<TestSpec> out;
    if (name == "rician") {
        for (double db : {0.0, 5.0, 10.0, 15.0, 20.0}) out.push_back({ChannelModelSpec::rician_db(db), "kappa_db", db});
    } else if (name == "correlated") {
        for (double r : {0.2, 0.4, 0.6, 0.8}) out.push_back({ChannelModelSpec::correlated(r, 0.0), "rho_u", r});
        for (double r : {0.2, 0.4, 0.6, 0.8}) out.push_back({ChannelModelSpec::correlated(0.0, r), "rho_a", r});
    } else if (name == "sparse") {
        for (int l : {5, 4, 3, 2}) out.push_back({ChannelModelSpec::sparse(l), "n_paths", static_cast<double>(l)});
    } else if (name == "rayleigh") {
        out.push_back({ChannelModelSpec::rayleigh(), "none", 0.0});
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "' (rician, correlated, sparse, rayleigh)");
    }
    return out;
}

void SweepSpec::validate() const {
    if (n_test < 1) throw ConfigError("n_test must be at least 1");
    if (tests.empty()) throw ConfigError("sweep has no test distributions");
    if (methods.empty()) throw ConfigError("sweep has no methods");
    if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
    for (const auto& t : tests) t.model.validate();
}

std::vector<channels::ChannelSample> sweep_test_set(const problems::PrecodingConfig& cfg, const SweepSpec& spec,
                                                   std::size_t i) {
    const std::uint64_t seed = Rng::substream(spec.seed, i)();
    return channels::generate_dataset(spec.tests.at(i).model, cfg.k, cfg.n_t, spec.n_test,
                                      {spec.snr_db, spec.snr_db}, seed)
        .samples;
}

MetricsReport evaluate_checkpoint(const problems::PrecodingConfig& cfg, const nets::Checkpoint& ckpt,
                                  std::span<const channels::ChannelSample> samples, double tau,
                                  bool keep_per_sample) {
    const problems::PrecodingProblem problem(cfg);
    const nets::Network policy(ckpt.policy_spec, nets::Role::Policy, nets::Layout::precoding_policy(cfg));
    policy.check(ckpt.policy);
    return asr_vr(problem, policy, ckpt.policy, problems::pack_channels(samples), problems::pack_snr(samples), tau,
                  keep_per_sample);
}

namespace {

bool same_config(const problems::PrecodingConfig& a, const problems::PrecodingConfig& b) {
    return a.n_t == b.n_t && a.n_rf == b.n_rf && a.k == b.k && a.gamma == b.gamma;
}

struct Loaded {
    MethodEntry entry;
    nets::Checkpoint ckpt;
};

}  // namespace

SweepResult ood_sweep(const problems::PrecodingConfig& cfg, const SweepSpec& spec) {
    cfg.validate();
    spec.validate();
    SweepResult out;
    std::vector<Loaded> loaded;
    for (const auto& m : spec.methods) {
        nets::Checkpoint ckpt;
        try {
            ckpt = nets::load_checkpoint(m.checkpoint);
        } catch (const IoError&) {
            out.absent.push_back(m);
            continue;
        }
        if (ckpt.meta.contains("precoding") && !same_config(precoding_config_from_json(ckpt.meta["precoding"]), cfg)) {
            throw ConfigError("checkpoint " + m.checkpoint.string() + " was trained for another precoding setup");
        }
        Loaded l{m, std::move(ckpt)};
        if (l.entry.model.empty()) l.entry.model = nets::to_string(l.ckpt.policy_spec.arch);
        if (l.entry.method.empty()) l.entry.method = l.ckpt.meta.value("method", std::string("unknown"));
        loaded.push_back(std::move(l));
    }

    for (std::size_t i = 0; i < spec.tests.size(); ++i) {
        const TestSpec& t = spec.tests[i];
        const auto samples = sweep_test_set(cfg, spec, i);
        const MetricsReport ref = zf_reference(cfg, samples, spec.tau);
        const auto row = [&](const std::string& model, const std::string& method, const MetricsReport& r) {
            out.rows.push_back({model, method, channels::to_string(t.model.family), t.param_name, t.param_value,
                                spec.snr_db, spec.n_test, r.asr, r.vr,
                                ref.asr > 0.0 ? r.asr / ref.asr : std::numeric_limits<double>::quiet_NaN()});
        };
        row("zf", "reference", ref);
        for (const auto& l : loaded) row(l.entry.model, l.entry.method, evaluate_checkpoint(cfg, l.ckpt, samples, spec.tau));
    }
    return out;
}

namespace {

std::string num(double v, int digits = 6) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

}  // namespace

std::string sweep_csv(const SweepResult& r) {
    std::ostringstream s;
    s << "model,method,family,param_name,param_value,snr_db,n_test,asr_bps_hz,vr,asr_rel_reference\n";
    for (const auto& row : r.rows) {
        s << row.model << ',' << row.method << ',' << row.family << ',' << row.param_name << ','
          << num(row.param_value) << ',' << num(row.snr_db) << ',' << row.n_test << ',' << num(row.asr, 10) << ','
          << num(row.vr, 10) << ',' << num(row.asr_rel_reference, 10) << '\n';
    }
    return s.str();
}

std::string sweep_markdown(const SweepResult& r) {
    std::ostringstream s;
    // tables in first-seen order of (family, param)
    std::vector<std::pair<std::string, std::string>> groups;
    for (const auto& row : r.rows) {
        const std::pair<std::string, std::string> g{row.family, row.param_name};
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
    for (const auto& [family, param] : groups) {
        std::vector<double> cols;
        std::vector<std::pair<std::string, std::string>> models;
        std::map<std::tuple<std::string, std::string, double>, const SweepRow*> cell;
        for (const auto& row : r.rows) {
            if (row.family != family || row.param_name != param) continue;
            if (std::find(cols.begin(), cols.end(), row.param_value) == cols.end()) cols.push_back(row.param_value);
            const std::pair<std::string, std::string> m{row.model, row.method};
            if (std::find(models.begin(), models.end(), m) == models.end()) models.push_back(m);
            cell[{row.model, row.method, row.param_value}] = &row;
        }
        s << "### " << family << " (" << param << ")\n\n| model | method |";
        for (double c : cols) s << ' ' << param << '=' << num(c) << " |";
        s << "\n|---|---|";
        for (std::size_t i = 0; i < cols.size(); ++i) s << "---|";
        s << '\n';
        for (const auto& [model, method] : models) {
            s << "| " << model << " | " << method << " |";
            for (double c : cols) {
                const auto it = cell.find({model, method, c});
                if (it == cell.end()) {
                    s << " - |";
                } else {
                    s << ' ' << std::fixed << std::setprecision(3) << it->second->asr << " (" << std::setprecision(1)
                      << 100.0 * it->second->vr << " %) |" << std::defaultfloat;
                }
            }
            s << '\n';
        }
        s << '\n';
    }
    if (!r.absent.empty()) {
        s << "Absent checkpoints:\n";
        for (const auto& m : r.absent) s << "- " << m.checkpoint.string() << '\n';
    }
    return s.str();
}

std::string epoch_curves_csv(const std::vector<std::pair<std::string, std::filesystem::path>>& logs) {
    std::ostringstream s;
    s << "run,epoch,method,mean_lagrangian,mean_F,id_asr,id_vr,updates_so_far\n";
    for (const auto& [label, path] : logs) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read training log " + path.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                const json j = json::parse(line);
                s << label << ',' << j.at("epoch").get<std::size_t>() << ',' << j.at("method").get<std::string>() << ','
                  << num(j.at("mean_lagrangian").get<double>(), 10) << ',' << num(j.at("mean_F").get<double>(), 10)
                  << ',' << num(j.at("id_asr").get<double>(), 10) << ',' << num(j.at("id_vr").get<double>(), 10)
                  << ',' << j.at("updates_so_far").get<std::uint64_t>() << '\n';
            } catch (const json::exception& e) {
                throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    return s.str();
}

}  // namespace uat::eval

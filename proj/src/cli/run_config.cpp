#include "uat/cli/run_config.hpp"

#include <fstream>

#include "uat/error.hpp"
#include "uat/eval/sweep.hpp"
#include "uat/nets/checkpoint.hpp"

namespace uat::cli {

using nlohmann::json;

channels::ChannelModelSpec DataConfig::model() const {
    switch (family) {
        case channels::Family::Rayleigh: return channels::ChannelModelSpec::rayleigh();
        case channels::Family::Rician: return channels::ChannelModelSpec::rician_db(kappa_db);
        case channels::Family::Correlated: return channels::ChannelModelSpec::correlated(rho_u, rho_a);
        case channels::Family::Sparse: return channels::ChannelModelSpec::sparse(n_paths);
    }
    throw ConfigError("unknown channel family");
}

train::TrainConfig RunConfig::default_train() {
    train::TrainConfig t;
    t.epochs = 20;
    t.lr_policy = 3e-3;
    t.lr_multiplier = 1e-4;
    return t;
}

void RunConfig::validate() const {
    precoding.validate();
    policy.validate();
    multiplier.validate();
    train.validate();
    data.model().validate();
    if (data.count == 0) throw ConfigError("data.count must be at least 1");
    if (data.snr_min_db > data.snr_max_db) throw ConfigError("data.snr_min_db exceeds data.snr_max_db");
    if (sweep.n_test == 0) throw ConfigError("sweep.n_test must be at least 1");
    if (threads == 0) throw ConfigError("threads must be at least 1");
}

json to_json(const RunConfig& c) {
    return {{"precoding", eval::to_json(c.precoding)},
            {"policy", nets::spec_to_json(c.policy)},
            {"multiplier", nets::spec_to_json(c.multiplier)},
            {"train", train::to_json(c.train)},
            {"data",
             {{"family", channels::to_string(c.data.family)},
              {"kappa_db", c.data.kappa_db},
              {"rho_u", c.data.rho_u},
              {"rho_a", c.data.rho_a},
              {"n_paths", c.data.n_paths},
              {"count", c.data.count},
              {"snr_min_db", c.data.snr_min_db},
              {"snr_max_db", c.data.snr_max_db},
              {"seed", c.data.seed},
              {"path", c.data.path}}},
            {"sweep",
             {{"preset", c.sweep.preset},
              {"n_test", c.sweep.n_test},
              {"snr_db", c.sweep.snr_db},
              {"seed", c.sweep.seed},
              {"tau", c.sweep.tau}}},
            {"threads", c.threads}};
}

RunConfig merge_json(RunConfig c, const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::vector<std::string> known{"precoding", "policy", "multiplier", "train", "data", "sweep", "threads"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
    }
    try {
        if (j.contains("precoding")) {
            json p = eval::to_json(c.precoding);
            p.update(j.at("precoding"));
            c.precoding = eval::precoding_config_from_json(p);
        }
        if (j.contains("policy")) {
            json p = nets::spec_to_json(c.policy);
            p.update(j.at("policy"));
            c.policy = nets::spec_from_json(p);
        }
        if (j.contains("multiplier")) {
            json p = nets::spec_to_json(c.multiplier);
            p.update(j.at("multiplier"));
            c.multiplier = nets::spec_from_json(p);
        }
        if (j.contains("train")) {
            json t = train::to_json(c.train);
            t.update(j.at("train"));
            c.train = train::train_config_from_json(t);
        }
        if (j.contains("data")) {
            const json& d = j.at("data");
            if (d.contains("family")) c.data.family = channels::parse_family(d.at("family").get<std::string>());
            c.data.kappa_db = d.value("kappa_db", c.data.kappa_db);
            c.data.rho_u = d.value("rho_u", c.data.rho_u);
            c.data.rho_a = d.value("rho_a", c.data.rho_a);
            c.data.n_paths = d.value("n_paths", c.data.n_paths);
            c.data.count = d.value("count", c.data.count);
            c.data.snr_min_db = d.value("snr_min_db", c.data.snr_min_db);
            c.data.snr_max_db = d.value("snr_max_db", c.data.snr_max_db);
            c.data.seed = d.value("seed", c.data.seed);
            c.data.path = d.value("path", c.data.path);
        }
        if (j.contains("sweep")) {
            const json& s = j.at("sweep");
            c.sweep.preset = s.value("preset", c.sweep.preset);
            c.sweep.n_test = s.value("n_test", c.sweep.n_test);
            c.sweep.snr_db = s.value("snr_db", c.sweep.snr_db);
            c.sweep.seed = s.value("seed", c.sweep.seed);
            c.sweep.tau = s.value("tau", c.sweep.tau);
        }
        c.threads = j.value("threads", c.threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    return c;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
}

}  // namespace uat::cli

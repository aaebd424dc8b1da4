#include "uat/train/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "uat/error.hpp"
#include "uat/eval/metrics.hpp"
#include "uat/rng.hpp"

namespace uat::train {

using adiff::Tape;
using adiff::Tensor;
using adiff::Var;

namespace {

// Substream tag for batch shuffling, kept apart from weight initialization.
constexpr std::uint64_t kShuffleTag = 0x53485546464C45ULL;

std::vector<Var> concat_vars(const std::vector<Var>& a, const std::vector<Var>& b) {
    std::vector<Var> out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

void require_finite(const std::vector<Tensor>& grads, const char* what) {
    for (const Tensor& g : grads) {
        if (!g.all_finite()) throw NumericalError(std::string("non-finite ") + what + " gradient");
    }
}

// Per-sample Euclidean norms of the rows of t.
std::vector<double> row_norms(const Tensor& t) {
    const std::size_t n = t.dim(0);
    const std::size_t per = t.size() / n;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < per; ++j) s += t[i * per + j] * t[i * per + j];
        out[i] = std::sqrt(s);
    }
    return out;
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::PDL: return "pdl";
        case Method::UAT: return "uat";
        case Method::PGDBaseline: return "pgd_baseline";
    }
    return "?";
}

std::string to_string(CostMode m) {
    return m == CostMode::ObjectiveOnly ? "objective_only" : "objective_plus_violation";
}

Method parse_method(std::string_view s) {
    if (s == "pdl") return Method::PDL;
    if (s == "uat") return Method::UAT;
    if (s == "pgd_baseline" || s == "pgd") return Method::PGDBaseline;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected pdl, uat or pgd_baseline)");
}

CostMode parse_cost_mode(std::string_view s) {
    if (s == "objective_only") return CostMode::ObjectiveOnly;
    if (s == "objective_plus_violation") return CostMode::ObjectivePlusViolation;
    throw ConfigError("unknown cost_mode '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("epochs must be at least 1");
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (!(lr_policy >= 0.0) || !(lr_multiplier >= 0.0)) throw ConfigError("learning rates must be nonnegative");
    if (at_start_epoch && (*at_start_epoch == 0 || *at_start_epoch > epochs)) {
        throw ConfigError("at_start_epoch must lie in [1, epochs]");
    }
    if (method != Method::PDL && adv_iters == 0) throw ConfigError("adv_iters must be at least 1");
    if (!(perturb_range > 0.0)) throw ConfigError("perturb_range must be positive");
    if (pgd.steps == 0 || !(pgd.step_size > 0.0) || !(pgd.radius > 0.0)) {
        throw ConfigError("pgd settings must be positive");
    }
}

std::size_t TrainConfig::ea() const { return at_start_epoch ? *at_start_epoch : std::max<std::size_t>(1, epochs / 2); }

std::size_t TrainConfig::resolved_batches(std::size_t data_size) const {
    const std::size_t b = batches == 0 ? data_size / batch_size : batches;
    if (b == 0 || b * batch_size > data_size) {
        throw ConfigError("dataset of " + std::to_string(data_size) + " samples cannot fill " +
                          std::to_string(b == 0 ? 1 : b) + " batches of " + std::to_string(batch_size));
    }
    return b;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batches", c.batches},
            {"batch_size", c.batch_size},
            {"lr_policy", c.lr_policy},
            {"lr_multiplier", c.lr_multiplier},
            {"at_start_epoch", c.at_start_epoch ? nlohmann::json(*c.at_start_epoch) : nlohmann::json(nullptr)},
            {"adv_iters", c.adv_iters},
            {"perturb_range", c.perturb_range},
            {"seed", c.seed},
            {"method", to_string(c.method)},
            {"cost_mode", to_string(c.cost_mode)},
            {"pgd_steps", c.pgd.steps},
            {"pgd_step_size", c.pgd.step_size},
            {"pgd_radius", c.pgd.radius},
            {"id_eval_samples", c.id_eval_samples}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.batches = j.value("batches", c.batches);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lr_policy = j.value("lr_policy", c.lr_policy);
        c.lr_multiplier = j.value("lr_multiplier", c.lr_multiplier);
        if (j.contains("at_start_epoch") && !j.at("at_start_epoch").is_null()) {
            c.at_start_epoch = j.at("at_start_epoch").get<std::size_t>();
        }
        c.adv_iters = j.value("adv_iters", c.adv_iters);
        c.perturb_range = j.value("perturb_range", c.perturb_range);
        c.seed = j.value("seed", c.seed);
        c.method = parse_method(j.value("method", to_string(c.method)));
        c.cost_mode = parse_cost_mode(j.value("cost_mode", to_string(c.cost_mode)));
        c.pgd.steps = j.value("pgd_steps", c.pgd.steps);
        c.pgd.step_size = j.value("pgd_step_size", c.pgd.step_size);
        c.pgd.radius = j.value("pgd_radius", c.pgd.radius);
        c.id_eval_samples = j.value("id_eval_samples", c.id_eval_samples);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad training config: ") + e.what());
    }
    c.validate();
    return c;
}

Data Data::select(const std::vector<std::size_t>& idx) const {
    adiff::Shape shape = x.shape();
    const std::size_t per = x.size() / shape[0];
    shape[0] = idx.size();
    Data out{Tensor(shape), Tensor({idx.size()})};
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::memcpy(out.x.data() + i * per, x.data() + idx[i] * per, per * sizeof(double));
        out.side[i] = side[idx[i]];
    }
    return out;
}

Data Data::head(std::size_t n) const {
    n = std::min(n, size());
    return {eval::rows(x, 0, n), eval::rows(side, 0, n)};
}

void Adam::step(nets::NetworkWeights& w, const std::vector<Tensor>& grads, double lr, bool ascend) {
    if (m.empty()) {
        for (const Tensor& p : w.tensors) {
            m.emplace_back(p.shape(), 0.0);
            v.emplace_back(p.shape(), 0.0);
        }
    }
    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    const double sign = ascend ? 1.0 : -1.0;
    for (std::size_t i = 0; i < w.tensors.size(); ++i) {
        double* p = w.tensors[i].data();
        double* mi = m[i].data();
        double* vi = v[i].data();
        const double* g = grads[i].data();
        for (std::size_t j = 0; j < w.tensors[i].size(); ++j) {
            mi[j] = kBeta1 * mi[j] + (1.0 - kBeta1) * g[j];
            vi[j] = kBeta2 * vi[j] + (1.0 - kBeta2) * g[j] * g[j];
            p[j] += sign * lr * (mi[j] / c1) / (std::sqrt(vi[j] / c2) + kEps);
        }
    }
}

TrainState initial_state(const Model& model, std::uint64_t seed) {
    TrainState s;
    s.theta = model.policy.init(seed);
    s.xi = model.multiplier.init(seed);
    return s;
}

Var lagrangian(const Var& f, const Var& g, const Var& lambda) {
    return adiff::mean(adiff::add(f, adiff::sum(adiff::mul(lambda, g), 1)));
}

double lagrangian_value(const Model& model, const TrainState& s, const Data& batch) {
    Tape tape;
    const auto th = model.policy.bind(tape, s.theta, false);
    const auto xi = model.multiplier.bind(tape, s.xi, false);
    const Var x = tape.constant(batch.x);
    const Var y = model.problem->realize(model.policy.forward(th, x, batch.side));
    const Var lam = model.multiplier.forward(xi, x, batch.side);
    return lagrangian(model.problem->objective(x, y, batch.side), model.problem->constraints(x, y, batch.side), lam)
        .value()
        .item();
}

StepStats pdl_step(const Model& model, TrainState& s, const Data& batch, double lr_policy,
                   double lr_multiplier) {
    Tape tape;
    const auto th = model.policy.bind(tape, s.theta, true);
    const auto xi = model.multiplier.bind(tape, s.xi, true);
    const Var x = tape.constant(batch.x);
    Var f, l;
    try {
        const Var y = model.problem->realize(model.policy.forward(th, x, batch.side));
        f = model.problem->objective(x, y, batch.side);
        const Var lam = model.multiplier.forward(xi, x, batch.side);
        l = lagrangian(f, model.problem->constraints(x, y, batch.side), lam);
    } catch (const DomainError& e) {
        // NaN weights or inputs surface as domain failures inside the forward pass
        throw NumericalError(std::string("forward pass failed: ") + e.what());
    }

    StepStats stats{l.value().item(), adiff::mean(f).value().item()};
    if (!std::isfinite(stats.lagrangian)) throw NumericalError("non-finite Lagrangian");

    const std::vector<Var> leaves = concat_vars(th, xi);
    std::vector<Tensor> grads = tape.backward(l, leaves);
    require_finite(grads, "parameter");
    std::vector<Tensor> g_xi(std::make_move_iterator(grads.begin() + static_cast<std::ptrdiff_t>(th.size())),
                             std::make_move_iterator(grads.end()));
    grads.resize(th.size());
    s.adam_theta.step(s.theta, grads, lr_policy, false);
    s.adam_xi.step(s.xi, g_xi, lr_multiplier, true);
    ++s.updates;
    return stats;
}

Directions adversarial_directions(const Model& model, const TrainState& s, const Data& batch, CostMode mode) {
    const auto& problem = *model.problem;
    Tape tape;
    const auto th = model.policy.bind(tape, s.theta, false);
    const Var x_in = tape.input(batch.x);
    const Var x_fixed = tape.constant(batch.x);
    const Var y = problem.realize(model.policy.forward(th, x_in, batch.side));
    Var cost = problem.objective(x_fixed, y, batch.side);
    if (mode == CostMode::ObjectivePlusViolation) {
        cost = adiff::add(cost, adiff::sum(adiff::hinge(problem.constraints(x_fixed, y, batch.side)), 1));
    }
    Tensor num = tape.backward(adiff::sum(cost), x_in);

    if (problem.constraints_depend_on_input()) {
        const auto xi = model.multiplier.bind(tape, s.xi, false);
        const Tensor lam = model.multiplier.forward(xi, x_fixed, batch.side).value();
        const Var x_g = tape.input(batch.x);
        const Var g = problem.constraints(x_g, tape.constant(y.value()), batch.side);
        const Tensor g_term = tape.vjp(g, lam, x_g);
        for (std::size_t i = 0; i < num.size(); ++i) num[i] -= g_term[i];
    }
    if (!num.all_finite()) throw NumericalError("non-finite adversarial direction");

    const std::size_t n = batch.size();
    const std::size_t per = num.size() / n;
    const std::vector<double> norms = row_norms(num);
    Directions out{Tensor(num.shape(), 0.0), std::vector<bool>(n, false)};
    for (std::size_t i = 0; i < n; ++i) {
        if (!(norms[i] >= kDegenerateNorm)) continue;
        out.valid[i] = true;
        for (std::size_t j = 0; j < per; ++j) out.d[i * per + j] = num[i * per + j] / norms[i];
    }
    return out;
}

Data adversarial_examples(const Model& model, const Data& batch, const Directions& d, double eps) {
    const std::size_t n = batch.size();
    const std::size_t per = batch.x.size() / n;
    Tensor moved = batch.x;
    for (std::size_t i = 0; i < n; ++i) {
        if (!d.valid[i]) continue;
        for (std::size_t j = 0; j < per; ++j) moved[i * per + j] += eps * d.d[i * per + j];
    }
    Tensor projected = model.problem->project_input(moved);
    for (std::size_t i = 0; i < n; ++i) {
        if (d.valid[i]) continue;
        std::memcpy(projected.data() + i * per, batch.x.data() + i * per, per * sizeof(double));
    }
    return {std::move(projected), batch.side};
}

Data pgd_baseline_examples(const Model& model, const TrainState& s, const Data& batch, const PgdSettings& pgd) {
    const auto& problem = *model.problem;
    const std::size_t n = batch.size();
    const std::size_t per = batch.x.size() / n;
    Tensor cur = batch.x;
    for (std::size_t step = 0; step < pgd.steps; ++step) {
        Tape tape;
        const auto th = model.policy.bind(tape, s.theta, false);
        const Var x = tape.input(cur);
        const Var y = problem.realize(model.policy.forward(th, x, batch.side));
        const Tensor g = tape.backward(adiff::sum(problem.objective(x, y, batch.side)), x);
        if (!g.all_finite()) throw NumericalError("non-finite cost gradient in PGD step");
        const std::vector<double> norms = row_norms(g);
        for (std::size_t i = 0; i < n; ++i) {
            if (!(norms[i] >= kDegenerateNorm)) continue;
            double* c = cur.data() + i * per;
            const double* origin = batch.x.data() + i * per;
            double dist2 = 0.0;
            for (std::size_t j = 0; j < per; ++j) {
                c[j] += pgd.step_size * g[i * per + j] / norms[i];
                dist2 += (c[j] - origin[j]) * (c[j] - origin[j]);
            }
            const double dist = std::sqrt(dist2);
            if (dist > pgd.radius) {
                for (std::size_t j = 0; j < per; ++j) c[j] = origin[j] + (c[j] - origin[j]) * (pgd.radius / dist);
            }
        }
        cur = problem.project_input(cur);
    }
    return {std::move(cur), batch.side};
}

void uat_rounds(const Model& model, TrainState& s, const Data& batch, const TrainConfig& cfg) {
    Data adv = batch;
    for (std::size_t t = 0; t < cfg.adv_iters; ++t) {
        const Directions d = adversarial_directions(model, s, adv, cfg.cost_mode);
        adv = adversarial_examples(model, adv, d, cfg.perturb_range);
        pdl_step(model, s, adv, cfg.lr_policy, cfg.lr_multiplier);
    }
}

nlohmann::json to_json(const EpochLog& e) {
    return {{"epoch", e.epoch},
            {"method", to_string(e.method)},
            {"mean_lagrangian", e.mean_lagrangian},
            {"mean_F", e.mean_f},
            {"id_asr", e.id_asr},
            {"id_vr", e.id_vr},
            {"updates_so_far", e.updates_so_far},
            {"wall_ms", e.wall_ms}};
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t data_size) {
    std::vector<std::size_t> order(data_size);
    for (std::size_t i = 0; i < data_size; ++i) order[i] = i;
    Rng rng = Rng::substream(seed ^ kShuffleTag, epoch);
    for (std::size_t i = data_size; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

TrainState train(const Model& model, const Data& data, const TrainConfig& cfg, TrainState s,
                 const EpochCallback& on_epoch, std::optional<std::size_t> until) {
    cfg.validate();
    const std::size_t n_batches = cfg.resolved_batches(data.size());
    const std::size_t last = std::min(cfg.epochs, until.value_or(cfg.epochs));
    const Data id_set = data.head(cfg.id_eval_samples);

    for (std::size_t epoch = s.epoch + 1; epoch <= last; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const bool adversarial = cfg.method != Method::PDL && epoch >= cfg.ea();
        const std::vector<std::size_t> order = epoch_order(cfg.seed, epoch, data.size());
        double sum_l = 0.0;
        double sum_f = 0.0;
        for (std::size_t b = 0; b < n_batches; ++b) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b * cfg.batch_size),
                                               order.begin() + static_cast<std::ptrdiff_t>((b + 1) * cfg.batch_size));
            const Data batch = data.select(idx);
            try {
                const StepStats st = pdl_step(model, s, batch, cfg.lr_policy, cfg.lr_multiplier);
                sum_l += st.lagrangian;
                sum_f += st.mean_f;
                if (adversarial && cfg.method == Method::UAT) {
                    uat_rounds(model, s, batch, cfg);
                } else if (adversarial) {
                    const Data adv = pgd_baseline_examples(model, s, batch, cfg.pgd);
                    pdl_step(model, s, adv, cfg.lr_policy, cfg.lr_multiplier);
                }
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(b));
            }
        }
        s.epoch = epoch;

        EpochLog log;
        log.epoch = epoch;
        log.method = cfg.method;
        log.adversarial = adversarial;
        log.mean_lagrangian = sum_l / static_cast<double>(n_batches);
        log.mean_f = sum_f / static_cast<double>(n_batches);
        if (id_set.size() > 0) {
            const auto m = eval::asr_vr(*model.problem, model.policy, s.theta, id_set.x, id_set.side);
            log.id_asr = m.asr;
            log.id_vr = m.vr;
        }
        log.updates_so_far = s.updates;
        log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (on_epoch) on_epoch(log, s);
    }
    return s;
}

}  // namespace uat::train

#include "uat/problems/toy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "uat/error.hpp"
#include "uat/rng.hpp"

namespace uat::problems {

using adiff::Tensor;
using adiff::Var;

namespace {

void validate(const ToyPowerProblem& p) {
    if (p.gains.size() == 0) throw ConfigError("toy problem needs at least one gain");
    if (!(p.budget > 0.0)) throw ConfigError("toy budget must be positive");
    for (Eigen::Index i = 0; i < p.gains.size(); ++i) {
        if (!(p.gains[i] > 0.0)) throw ConfigError("toy gains must be positive");
    }
}

}  // namespace

EnvelopeCheck toy_envelope_check(std::size_t instances, std::uint64_t seed) {
    EnvelopeCheck out{instances, 0.0};
    for (std::size_t t = 0; t < instances; ++t) {
        Rng rng = Rng::substream(seed, t);
        const auto k = static_cast<Eigen::Index>(2 + t % 7);
        ToyPowerProblem p{Eigen::VectorXd(k), rng.uniform(0.1, 5.0)};
        for (Eigen::Index i = 0; i < k; ++i) p.gains[i] = std::exp(rng.uniform(-2.0, 2.0));
        const Eigen::VectorXd grad = toy_envelope_gradient(p);
        for (Eigen::Index i = 0; i < k; ++i) {
            const double h = 1e-6 * p.gains[i];
            ToyPowerProblem up = p;
            ToyPowerProblem dn = p;
            up.gains[i] += h;
            dn.gains[i] -= h;
            const double fd = (toy_optimal(up).sum_rate - toy_optimal(dn).sum_rate) / (2 * h);
            out.max_rel_error = std::max(out.max_rel_error, std::abs(grad[i] - fd) / std::max(std::abs(fd), 1e-6));
        }
    }
    return out;
}

double toy_sum_rate(const Eigen::VectorXd& gains, const Eigen::VectorXd& powers) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < gains.size(); ++i) total += std::log2(1.0 + powers[i] * gains[i]);
    return total;
}

ToySolution toy_optimal(const ToyPowerProblem& p) {
    validate(p);
    const auto k = static_cast<std::size_t>(p.gains.size());
    std::vector<double> floors(k);
    for (std::size_t i = 0; i < k; ++i) floors[i] = 1.0 / p.gains[static_cast<Eigen::Index>(i)];
    std::vector<double> sorted = floors;
    std::sort(sorted.begin(), sorted.end());

    // Largest active set whose water level clears every member's floor.
    double level = 0.0;
    double prefix = 0.0;
    for (std::size_t m = 1; m <= k; ++m) {
        prefix += sorted[m - 1];
        const double candidate = (p.budget + prefix) / static_cast<double>(m);
        if (candidate <= sorted[m - 1]) break;
        level = candidate;
    }

    ToySolution s;
    s.water_level = level;
    s.powers.resize(p.gains.size());
    for (std::size_t i = 0; i < k; ++i) {
        s.powers[static_cast<Eigen::Index>(i)] = std::max(0.0, level - floors[i]);
    }
    s.multiplier = 1.0 / (level * std::numbers::ln2);
    s.sum_rate = toy_sum_rate(p.gains, s.powers);
    return s;
}

Eigen::VectorXd toy_envelope_gradient(const ToyPowerProblem& p) {
    const ToySolution s = toy_optimal(p);
    Eigen::VectorXd grad(p.gains.size());
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
        const double power = s.powers[i];
        grad[i] = power / ((1.0 + power * p.gains[i]) * std::numbers::ln2);
    }
    return grad;
}

WaterFillingProblem::WaterFillingProblem(std::size_t k, double budget) : k_(k), budget_(budget) {
    if (k == 0) throw ConfigError("toy problem needs at least one user");
    if (!(budget > 0.0)) throw ConfigError("toy budget must be positive");
}

Var WaterFillingProblem::realize(const Var& raw) const { return adiff::softplus(raw); }

Var WaterFillingProblem::objective(const Var& x, const Var& y, const Tensor&) const {
    return adiff::neg(adiff::sum(adiff::log2(adiff::shift(adiff::mul(x, y), 1.0)), 1));
}

Var WaterFillingProblem::constraints(const Var&, const Var& y, const Tensor&) const {
    return adiff::shift(adiff::sum(y, 1, true), -budget_);
}

Tensor WaterFillingProblem::project_input(const Tensor& x) const {
    Tensor out = x;
    for (double& v : out.values()) v = std::max(v, kMinGain);
    return out;
}

Tensor toy_gains(std::size_t k, std::size_t count, std::uint64_t seed, double lo, double hi) {
    if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError("toy gain range must be positive and ordered");
    Tensor g({count, k});
    for (std::size_t n = 0; n < count; ++n) {
        Rng rng = Rng::substream(seed, n);
        for (std::size_t i = 0; i < k; ++i) g[n * k + i] = std::exp(rng.uniform(std::log(lo), std::log(hi)));
    }
    return g;
}

}  // namespace uat::problems

#include "uat/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "uat/error.hpp"
#include "uat/rng.hpp"

namespace uat::eval {

using adiff::Tape;
using adiff::Tensor;

MetricsReport asr_vr(const Tensor& f, const Tensor& g, double tau, bool keep_per_sample) {
    const std::size_t n = f.size();
    if (n == 0) throw ConfigError("metrics need at least one sample");
    if (g.rank() != 2 || g.dim(0) != n) throw ShapeError("constraint values must be [N, N_C]");
    const std::size_t nc = g.dim(1);

    MetricsReport r;
    r.n_samples = n;
    r.violation_tol = tau;
    if (keep_per_sample) r.per_sample = Eigen::MatrixXd(n, nc + 1);
    double total = 0.0;
    std::size_t violating = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = true;
        for (std::size_t c = 0; c < nc; ++c) ok = ok && !(g[i * nc + c] > tau);
        if (ok) {
            total += -f[i];
        } else {
            ++violating;
        }
        if (keep_per_sample) {
            (*r.per_sample)(static_cast<Eigen::Index>(i), 0) = -f[i];
            for (std::size_t c = 0; c < nc; ++c) {
                (*r.per_sample)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c + 1)) = g[i * nc + c];
            }
        }
    }
    r.asr = total / static_cast<double>(n);
    r.vr = static_cast<double>(violating) / static_cast<double>(n);
    return r;
}

Eigen::VectorXd asr_terms(const MetricsReport& r) {
    if (!r.per_sample) throw ConfigError("report holds no per-sample values");
    const Eigen::MatrixXd& p = *r.per_sample;
    Eigen::VectorXd out(p.rows());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const bool ok = p.cols() == 1 || !(p.row(i).tail(p.cols() - 1).maxCoeff() > r.violation_tol);
        out[i] = ok ? p(i, 0) : 0.0;
    }
    return out;
}

BootstrapInterval paired_bootstrap(const Eigen::VectorXd& a, const Eigen::VectorXd& b, std::size_t reps,
                                   std::uint64_t seed, double level) {
    if (a.size() != b.size() || a.size() == 0) throw ConfigError("bootstrap needs equal nonempty samples");
    if (reps == 0 || !(level > 0.0 && level < 1.0)) throw ConfigError("bad bootstrap settings");
    const Eigen::VectorXd d = a - b;
    const auto n = static_cast<std::uint64_t>(d.size());
    std::vector<double> means(reps);
    Rng rng(seed);
    for (auto& m : means) {
        double s = 0.0;
        for (std::uint64_t i = 0; i < n; ++i) s += d[static_cast<Eigen::Index>(rng.below(n))];
        m = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const auto at = [&](double q) {
        const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(reps - 1) + 0.5));
        return means[std::min(idx, reps - 1)];
    };
    return {d.mean(), at((1.0 - level) / 2.0), at((1.0 + level) / 2.0)};
}

Tensor rows(const Tensor& t, std::size_t begin, std::size_t end) {
    if (t.rank() == 0 || end > t.dim(0) || begin > end) throw ShapeError("row range out of bounds");
    adiff::Shape shape = t.shape();
    const std::size_t per = t.size() / shape[0];
    shape[0] = end - begin;
    Tensor out(shape);
    if (out.size() > 0) std::memcpy(out.data(), t.data() + begin * per, out.size() * sizeof(double));
    return out;
}

MetricsReport asr_vr(const problems::ConstrainedProblem& problem, const nets::Network& policy,
                     const nets::NetworkWeights& theta, const Tensor& x, const Tensor& side, double tau,
                     bool keep_per_sample) {
    const std::size_t n = x.dim(0);
    if (n == 0) throw ConfigError("metrics need at least one sample");
    const std::size_t nc = problem.n_constraints();
    Tensor f({n});
    Tensor g({n, nc});
    constexpr std::size_t kChunk = 500;
    for (std::size_t b = 0; b < n; b += kChunk) {
        const std::size_t e = std::min(n, b + kChunk);
        Tape tape;
        const auto p = policy.bind(tape, theta, false);
        const auto xv = tape.constant(rows(x, b, e));
        const Tensor s = side.size() == n ? rows(side, b, e) : Tensor({e - b});
        const auto y = problem.realize(policy.forward(p, xv, s));
        const Tensor fb = problem.objective(xv, y, s).value();
        const Tensor gb = problem.constraints(xv, y, s).value();
        std::copy(fb.values().begin(), fb.values().end(), f.values().begin() + static_cast<std::ptrdiff_t>(b));
        std::copy(gb.values().begin(), gb.values().end(), g.values().begin() + static_cast<std::ptrdiff_t>(b * nc));
    }
    return asr_vr(f, g, tau, keep_per_sample);
}

}  // namespace uat::eval

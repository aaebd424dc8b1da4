#include "uat/adiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "uat/adiff/ops.hpp"
#include "uat/error.hpp"
#include "uat/rng.hpp"

namespace uat::adiff {

namespace {

enum class Domain {
    Any,       // [-1, 1]
    Positive,  // [0.5, 2]
    AwayFromZero,  // ±[0.1, 1], keeps kinks outside the FD stencil
};

struct InputSpec {
    Shape shape;
    Domain domain = Domain::Any;
};

struct Case {
    std::vector<InputSpec> inputs;
    std::function<Var(const std::vector<Var>&)> fn;
};

Tensor random_tensor(const InputSpec& spec, Rng& rng) {
    Tensor t(spec.shape);
    for (double& v : t.values()) {
        switch (spec.domain) {
            case Domain::Any:
                v = rng.uniform(-1.0, 1.0);
                break;
            case Domain::Positive:
                v = rng.uniform(0.5, 2.0);
                break;
            case Domain::AwayFromZero:
                v = rng.uniform(0.1, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
                break;
        }
    }
    return t;
}

const std::map<std::string, Case>& cases() {
    using V = std::vector<Var>;
    static const std::map<std::string, Case> table = {
        {"add", {{{{3, 4}}, {{3, 4}}}, [](const V& v) { return add(v[0], v[1]); }}},
        {"add_broadcast", {{{{3, 4}}, {{4}}}, [](const V& v) { return add(v[0], v[1]); }}},
        {"sub", {{{{3, 4}}, {{3, 1}}}, [](const V& v) { return sub(v[0], v[1]); }}},
        {"mul", {{{{2, 3, 4}}, {{2, 3, 4}}}, [](const V& v) { return mul(v[0], v[1]); }}},
        {"div",
         {{{{3, 4}}, {{3, 4}, Domain::Positive}}, [](const V& v) { return div(v[0], v[1]); }}},
        {"scale", {{{{5}}}, [](const V& v) { return scale(v[0], -2.5); }}},
        {"shift", {{{{5}}}, [](const V& v) { return shift(v[0], 0.75); }}},
        {"exp", {{{{6}}}, [](const V& v) { return exp(v[0]); }}},
        {"log2", {{{{6}, Domain::Positive}}, [](const V& v) { return log2(v[0]); }}},
        {"sqrt", {{{{6}, Domain::Positive}}, [](const V& v) { return sqrt(v[0]); }}},
        {"square", {{{{6}}}, [](const V& v) { return square(v[0]); }}},
        {"tanh", {{{{6}}}, [](const V& v) { return tanh(v[0]); }}},
        {"relu", {{{{6}, Domain::AwayFromZero}}, [](const V& v) { return relu(v[0]); }}},
        {"hinge", {{{{6}, Domain::AwayFromZero}}, [](const V& v) { return hinge(v[0]); }}},
        {"softplus", {{{{6}}}, [](const V& v) { return softplus(v[0]); }}},
        {"sin", {{{{6}}}, [](const V& v) { return sin(v[0]); }}},
        {"cos", {{{{6}}}, [](const V& v) { return cos(v[0]); }}},
        {"matmul", {{{{3, 4}}, {{4, 2}}}, [](const V& v) { return matmul(v[0], v[1]); }}},
        {"matmul_batched",
         {{{{2, 3, 4}}, {{2, 4, 5}}}, [](const V& v) { return matmul(v[0], v[1]); }}},
        {"sum", {{{{3, 4}}}, [](const V& v) { return sum(v[0]); }}},
        {"sum_axis", {{{{2, 3, 4}}}, [](const V& v) { return sum(v[0], 1); }}},
        {"mean", {{{{3, 4}}}, [](const V& v) { return mean(v[0]); }}},
        {"mean_axis", {{{{2, 3, 4}}}, [](const V& v) { return mean(v[0], 2, true); }}},
        {"broadcast", {{{{3, 1}}}, [](const V& v) { return broadcast_to(v[0], {2, 3, 4}); }}},
        {"concat",
         {{{{2, 3}}, {{2, 5}}}, [](const V& v) { return concat({v[0], v[1]}, 1); }}},
        {"slice", {{{{4, 5}}}, [](const V& v) { return slice(v[0], 1, 1, 4); }}},
        {"transpose", {{{{2, 3, 4}}}, [](const V& v) { return transpose(v[0], 0, 2); }}},
        {"reshape", {{{{2, 6}}}, [](const V& v) { return reshape(v[0], {3, 4}); }}},
        {"complex_abs2", {{{{3, 2}}}, [](const V& v) { return complex_abs2(v[0]); }}},
        {"complex_arg", {{{{3, 2}}}, [](const V& v) { return complex_arg(v[0]); }}},
        {"complex_mul",
         {{{{3, 2}}, {{3, 2}}}, [](const V& v) { return complex_mul(v[0], v[1]); }}},
        {"complex_conj", {{{{3, 2}}}, [](const V& v) { return complex_conj(v[0]); }}},
        {"complex_exp_i", {{{{4}}}, [](const V& v) { return complex_exp_i(v[0]); }}},
        {"complex_matmul",
         {{{{2, 3, 4, 2}}, {{2, 4, 2, 2}}}, [](const V& v) { return complex_matmul(v[0], v[1]); }}},
        {"complex_inverse",
         {{{{2, 3, 3, 2}}},
          [](const V& v) {
              // diagonally dominant, so the FD stencil stays well conditioned
              Tensor eye({3, 3, 2}, 0.0);
              for (std::size_t i = 0; i < 3; ++i) eye[(i * 3 + i) * 2] = 3.0;
              return complex_inverse(add(v[0], v[0].tape()->constant(eye)));
          }}},
        {"complex_matmul_shared",
         {{{{2, 3, 4, 2}}, {{4, 2, 2}}}, [](const V& v) { return complex_matmul(v[0], v[1]); }}},
    };
    return table;
}

// Scalar probe: Σ weights ⊙ fn(inputs).
double probe(const Case& c, const std::vector<Tensor>& inputs, const Tensor& weights) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.input(t));
    const Var out = c.fn(vars);
    double total = 0.0;
    for (std::size_t i = 0; i < out.value().size(); ++i) total += weights[i] * out.value()[i];
    return total;
}

OpCheckResult check_case(const std::string& name, const Case& c, std::size_t points, Rng& rng,
                         double step, double tolerance) {
    OpCheckResult result{name, points, 0.0, true};
    for (std::size_t p = 0; p < points; ++p) {
        std::vector<Tensor> inputs;
        std::vector<Tensor> direction;
        for (const InputSpec& spec : c.inputs) {
            inputs.push_back(random_tensor(spec, rng));
            direction.push_back(random_tensor({spec.shape, Domain::Any}, rng));
        }

        Tape tape;
        std::vector<Var> vars;
        for (const Tensor& t : inputs) vars.push_back(tape.input(t));
        const Var out = c.fn(vars);
        Tensor weights(out.shape());
        for (double& w : weights.values()) w = rng.uniform(-1.0, 1.0);
        const Var scalar = sum(mul(out, tape.constant(weights)));
        const std::vector<Tensor> grads = tape.backward(scalar, vars);

        double analytic = 0.0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            for (std::size_t j = 0; j < inputs[i].size(); ++j) {
                analytic += grads[i][j] * direction[i][j];
            }
        }

        auto shifted = [&](double sign) {
            std::vector<Tensor> moved = inputs;
            for (std::size_t i = 0; i < moved.size(); ++i) {
                for (std::size_t j = 0; j < moved[i].size(); ++j) {
                    moved[i][j] += sign * step * direction[i][j];
                }
            }
            return probe(c, moved, weights);
        };
        const double fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * step);
        const double rel = std::abs(analytic - fd) / (std::abs(analytic) + 1e-12);
        result.max_rel_error = std::max(result.max_rel_error, rel);
    }
    result.passed = result.max_rel_error < tolerance;
    return result;
}

}  // namespace

std::vector<std::string> gradcheck_op_kinds() {
    std::vector<std::string> names;
    for (const auto& [name, c] : cases()) names.push_back(name);
    return names;
}

std::vector<OpCheckResult> finite_difference_suite(const std::vector<std::string>& ops,
                                                   std::size_t points, std::uint64_t seed,
                                                   double step, double tolerance) {
    const auto& table = cases();
    std::vector<std::string> selected = ops.empty() ? gradcheck_op_kinds() : ops;
    for (const std::string& name : selected) {
        if (!table.contains(name)) throw ConfigError("unknown op kind '" + name + "'");
    }
    std::vector<OpCheckResult> results;
    std::uint64_t index = 0;
    for (const std::string& name : selected) {
        Rng rng = Rng::substream(seed, index++);
        results.push_back(check_case(name, table.at(name), points, rng, step, tolerance));
    }
    return results;
}

}  // namespace uat::adiff

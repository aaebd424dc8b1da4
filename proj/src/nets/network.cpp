#include "uat/nets/network.hpp"

#include <cmath>

#include "uat/error.hpp"
#include "uat/rng.hpp"

namespace uat::nets {

using adiff::Shape;
using adiff::Tape;
using adiff::Tensor;
using adiff::Var;

std::string to_string(Arch a) { return a == Arch::MLP ? "mlp" : "edge_gnn"; }
std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }
std::string to_string(Role r) { return r == Role::Policy ? "policy" : "multiplier"; }

Arch parse_arch(std::string_view s) {
    if (s == "mlp") return Arch::MLP;
    if (s == "edge_gnn" || s == "edgegnn") return Arch::EdgeGNN;
    throw ConfigError("unknown architecture '" + std::string(s) + "' (expected mlp or edge_gnn)");
}

Activation parse_activation(std::string_view s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw ConfigError("unknown activation '" + std::string(s) + "' (expected tanh or relu)");
}

Role parse_role(std::string_view s) {
    if (s == "policy") return Role::Policy;
    if (s == "multiplier") return Role::Multiplier;
    throw ConfigError("unknown network role '" + std::string(s) + "'");
}

void NetworkSpec::validate() const {
    if (widths.size() != hidden_layers) {
        throw ConfigError("network widths list has " + std::to_string(widths.size()) +
                          " entries but hidden_layers is " + std::to_string(hidden_layers));
    }
    for (std::size_t w : widths) {
        if (w == 0) throw ConfigError("network widths must be positive");
    }
}

bool NetworkWeights::all_finite() const {
    for (const Tensor& t : tensors) {
        if (!t.all_finite()) return false;
    }
    return true;
}

std::size_t NetworkWeights::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.size();
    return n;
}

Layout Layout::precoding_policy(const problems::PrecodingConfig& cfg) {
    Layout l;
    l.input = Input::Channel;
    l.k = cfg.k;
    l.n_t = cfg.n_t;
    l.n_rf = cfg.n_rf;
    l.outputs = cfg.n_t * cfg.n_rf + cfg.n_rf * cfg.k * 2;
    return l;
}

Layout Layout::precoding_multiplier(const problems::PrecodingConfig& cfg) {
    Layout l = precoding_policy(cfg);
    l.outputs = cfg.k;
    return l;
}

Layout Layout::plain(std::size_t in, std::size_t out) {
    Layout l;
    l.plain_dim = in;
    l.outputs = out;
    return l;
}

Network::Network(NetworkSpec spec, Role role, Layout layout)
    : spec_(std::move(spec)), role_(role), layout_(layout) {
    spec_.validate();
    if (layout_.outputs == 0) throw ConfigError("network must have at least one output");
    if (spec_.arch == Arch::EdgeGNN) {
        if (layout_.input != Layout::Input::Channel) {
            throw ConfigError("edge_gnn needs a user-by-antenna input grid");
        }
        if (role_ == Role::Multiplier && layout_.outputs != layout_.k) {
            throw ConfigError("edge_gnn multiplier emits one value per user");
        }
    }
}

std::vector<std::string> Network::parameter_names() const {
    std::vector<std::string> names;
    const std::size_t layers = spec_.hidden_layers;
    if (spec_.arch == Arch::MLP) {
        for (std::size_t i = 0; i < layers; ++i) {
            names.push_back("hidden" + std::to_string(i) + ".w");
            names.push_back("hidden" + std::to_string(i) + ".b");
        }
        names.insert(names.end(), {"out.w", "out.b"});
        return names;
    }
    auto edge_layers = [&](const std::string& stem) {
        for (std::size_t i = 0; i < layers; ++i) {
            const std::string p = stem + std::to_string(i) + ".";
            names.insert(names.end(), {p + "w_self", p + "w_row", p + "w_col", p + "b"});
        }
    };
    edge_layers("edge");
    if (role_ == Role::Policy) {
        names.insert(names.end(), {"phase.w", "phase.b"});
        if (layout_.n_rf > layout_.k) names.insert(names.end(), {"spare.w", "spare.b"});
        edge_layers("bbedge");
        names.insert(names.end(), {"power.w", "power.b", "reg.w", "reg.b"});
    } else {
        names.insert(names.end(), {"out.w", "out.b"});
    }
    return names;
}

std::vector<Shape> Network::parameter_shapes() const {
    std::vector<Shape> shapes;
    if (spec_.arch == Arch::MLP) {
        std::size_t in = layout_.input == Layout::Input::Channel ? 2 * layout_.k * layout_.n_t + 1
                                                                 : layout_.plain_dim;
        for (std::size_t w : spec_.widths) {
            shapes.push_back({in, w});
            shapes.push_back({w});
            in = w;
        }
        shapes.push_back({in, layout_.outputs});
        shapes.push_back({layout_.outputs});
        return shapes;
    }
    auto edge_layers = [&]() {
        std::size_t in = 3;
        for (std::size_t w : spec_.widths) {
            shapes.insert(shapes.end(), {{in, w}, {in, w}, {in, w}, {w}});
            in = w;
        }
        return in;
    };
    const std::size_t c = edge_layers();
    if (role_ == Role::Policy) {
        shapes.insert(shapes.end(), {{c + 3, 2}, {2}});
        if (layout_.n_rf > layout_.k) {
            const std::size_t spare = layout_.n_rf - layout_.k;
            shapes.insert(shapes.end(), {{c, spare}, {spare}});
        }
        edge_layers();
        shapes.insert(shapes.end(), {{c, 1}, {1}, {c, 1}, {1}});
    } else {
        shapes.insert(shapes.end(), {{c, 1}, {1}});
    }
    return shapes;
}

NetworkWeights Network::init(std::uint64_t seed) const {
    Rng rng = Rng::substream(seed, role_ == Role::Policy ? 0 : 1);
    NetworkWeights w;
    w.role = role_;
    w.names = parameter_names();
    const std::vector<Shape> shapes = parameter_shapes();
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        Tensor t(shapes[i], 0.0);
        if (shapes[i].size() == 2) {
            // the three message matrices of an edge layer share one fan-in
            const bool edge = w.names[i].find(".w_") != std::string::npos;
            const double fan_in = static_cast<double>(shapes[i][0] * (edge ? 3 : 1));
            const double bound = 1.0 / std::sqrt(fan_in);
            for (double& v : t.values()) v = rng.uniform(-bound, bound);
        }
        w.tensors.push_back(std::move(t));
    }
    return w;
}

void Network::check(const NetworkWeights& w) const {
    const std::vector<Shape> shapes = parameter_shapes();
    if (w.role != role_) throw ShapeError("weights are for a " + to_string(w.role) + " network");
    if (w.tensors.size() != shapes.size() || w.names.size() != shapes.size()) {
        throw ShapeError("network expects " + std::to_string(shapes.size()) + " parameter tensors, got " +
                         std::to_string(w.tensors.size()));
    }
    const std::vector<std::string> names = parameter_names();
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (w.names[i] != names[i] || w.tensors[i].shape() != shapes[i]) {
            throw ShapeError("parameter " + std::to_string(i) + " expected " + names[i] + " " +
                             adiff::shape_string(shapes[i]) + ", got " + w.names[i] + " " +
                             adiff::shape_string(w.tensors[i].shape()));
        }
    }
}

std::vector<Var> Network::bind(Tape& tape, const NetworkWeights& w, bool trainable) const {
    check(w);
    std::vector<Var> out;
    out.reserve(w.tensors.size());
    for (const Tensor& t : w.tensors) out.push_back(trainable ? tape.parameter(t) : tape.constant(t));
    return out;
}

Var Network::activate(const Var& v) const {
    return spec_.activation == Activation::Tanh ? adiff::tanh(v) : adiff::relu(v);
}

Var Network::encode(const Var& x, const Tensor& side) const {
    Tape& tape = *x.tape();
    const std::size_t n = x.dim(0);
    if (layout_.input == Layout::Input::Plain) {
        if (x.shape() != Shape{n, layout_.plain_dim}) {
            throw ShapeError("network input must be [N, " + std::to_string(layout_.plain_dim) + "], got " +
                             adiff::shape_string(x.shape()));
        }
        return x;
    }
    const std::size_t k = layout_.k;
    const std::size_t m = layout_.n_t;
    if (x.shape() != Shape{n, k, m, 2}) {
        throw ShapeError("network input must be [N, " + std::to_string(k) + ", " + std::to_string(m) +
                         ", 2], got " + adiff::shape_string(x.shape()));
    }
    if (side.size() != n) throw ShapeError("network needs one SNR per sample");
    if (spec_.arch == Arch::MLP) {
        Tensor feature({n, 1});
        for (std::size_t i = 0; i < n; ++i) feature[i] = snr_feature(side[i]);
        return adiff::concat({adiff::reshape(x, {n, 2 * k * m}), tape.constant(feature)}, 1);
    }
    Tensor feature({n, k, m, 1});
    for (std::size_t i = 0; i < n; ++i) {
        const double f = snr_feature(side[i]);
        for (std::size_t j = 0; j < k * m; ++j) feature[i * k * m + j] = f;
    }
    return adiff::concat({x, tape.constant(feature)}, 3);
}

Var Network::mlp(std::span<const Var> p, const Var& x, const Tensor& side) const {
    Var h = encode(x, side);
    std::size_t i = 0;
    for (std::size_t l = 0; l < spec_.hidden_layers; ++l, i += 2) {
        h = activate(adiff::add(adiff::matmul(h, p[i]), p[i + 1]));
    }
    Var out = adiff::add(adiff::matmul(h, p[i]), p[i + 1]);
    return role_ == Role::Multiplier ? adiff::softplus(out) : out;
}

Var Network::edge_layers(std::span<const Var> p, Var h) const {
    for (std::size_t l = 0; l < spec_.hidden_layers; ++l) {
        const Var own = adiff::matmul(h, p[4 * l]);
        const Var row = adiff::matmul(adiff::mean(h, 2, true), p[4 * l + 1]);
        const Var col = adiff::matmul(adiff::mean(h, 1, true), p[4 * l + 2]);
        h = activate(adiff::add(adiff::add(adiff::add(own, row), col), p[4 * l + 3]));
    }
    return h;
}

Var Network::edge_gnn(std::span<const Var> p, const Var& x, const Tensor& side) const {
    const std::size_t n = x.dim(0);
    const std::size_t k = layout_.k;
    const std::size_t m = layout_.n_t;
    const std::size_t per_stage = 4 * spec_.hidden_layers;
    const Var enc = encode(x, side);                          // [N, K, M, 3]
    const Var h = edge_layers(p.subspan(0, per_stage), enc);  // [N, K, M, C]
    std::size_t i = per_stage;
    if (role_ == Role::Multiplier) {
        const Var out = adiff::add(adiff::matmul(adiff::mean(h, 2), p[i]), p[i + 1]);
        return adiff::softplus(adiff::reshape(out, {n, k}));
    }

    // Analog stage. RF chain j < K belongs to user j: entry (m, j) is the angle
    // of a complex pair read from edge (j, m), raw features included. The
    // other R − K chains read phases from user-pooled features.
    const std::size_t rf = layout_.n_rf;
    const Var pair = adiff::add(adiff::matmul(adiff::concat({h, enc}, 3), p[i]), p[i + 1]);  // [N, K, M, 2]
    Var phases = adiff::transpose(adiff::complex_arg(pair), 1, 2);                          // [N, M, K]
    i += 2;
    if (rf > k) {
        phases = adiff::concat({phases, adiff::add(adiff::matmul(adiff::mean(h, 1), p[i]), p[i + 1])}, 2);
        i += 2;
    }

    // Baseband stage: a second edge grid over (user, RF chain) carrying the
    // effective gains E = conj(H)·W_RF yields per-user powers p and a
    // regularizer ρ for W_BB ∝ Eᴴ(EEᴴ + ρK/snr·I)⁻¹ diag(√p).
    const Var w_rf = adiff::complex_exp_i(phases);                        // [N, M, R, 2]
    const Var eff = adiff::complex_matmul(adiff::complex_conj(x), w_rf);  // [N, K, R, 2]
    Tensor feature({n, k, rf, 1});
    Tensor eye({n, k, k, 2}, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        const double f = snr_feature(side[s]);
        for (std::size_t j = 0; j < k * rf; ++j) feature[s * k * rf + j] = f;
        for (std::size_t j = 0; j < k; ++j) eye[((s * k + j) * k + j) * 2] = static_cast<double>(k) / side[s];
    }
    Tape& tape = *x.tape();
    const Var g = edge_layers(p.subspan(i, per_stage), adiff::concat({eff, tape.constant(feature)}, 3));
    i += per_stage;
    const Var power = adiff::softplus(adiff::reshape(adiff::add(adiff::matmul(adiff::mean(g, 2), p[i]), p[i + 1]), {n, k}));
    const Var reg = adiff::softplus(adiff::add(adiff::matmul(adiff::mean(adiff::mean(g, 2), 1), p[i + 2]), p[i + 3]));

    const Var eff_h = adiff::transpose(adiff::complex_conj(eff), 1, 2);  // [N, R, K, 2]
    const Var gram = adiff::add(adiff::complex_matmul(eff, eff_h),
                                adiff::mul(tape.constant(eye), adiff::reshape(reg, {n, 1, 1, 1})));
    const Var bb = adiff::complex_matmul(eff_h, adiff::complex_inverse(gram));  // [N, R, K, 2]
    const Var beams = adiff::complex_matmul(w_rf, bb);                          // [N, M, K, 2]
    const Var beam_power = adiff::sum(adiff::sum(adiff::square(beams), 3), 1);  // [N, K]
    const Var gain = adiff::sqrt(adiff::div(power, beam_power));
    const Var w_bb = adiff::mul(bb, adiff::reshape(gain, {n, 1, k, 1}));
    return adiff::concat({adiff::reshape(phases, {n, m * rf}), adiff::reshape(w_bb, {n, rf * k * 2})}, 1);
}

Var Network::forward(std::span<const Var> params, const Var& x, const Tensor& side) const {
    if (params.size() != parameter_shapes().size()) {
        throw ShapeError("network expects " + std::to_string(parameter_shapes().size()) +
                         " parameter tensors, got " + std::to_string(params.size()));
    }
    return spec_.arch == Arch::MLP ? mlp(params, x, side) : edge_gnn(params, x, side);
}

double snr_feature(double snr) {
    if (!(snr > 0.0)) throw DomainError("snr must be positive");
    return std::log10(snr) / 2.0;
}

Tensor encode_input(const channels::ChannelSample& sample, Arch arch) {
    const auto k = static_cast<std::size_t>(sample.h_norm.rows());
    const auto m = static_cast<std::size_t>(sample.h_norm.cols());
    const double f = snr_feature(sample.snr);
    const std::size_t stride = arch == Arch::MLP ? 2 : 3;
    Tensor out = arch == Arch::MLP ? Tensor({2 * k * m + 1}) : Tensor({k, m, 3});
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
            const auto v = sample.h_norm(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            const std::size_t at = (r * m + c) * stride;
            out[at] = v.real();
            out[at + 1] = v.imag();
            if (arch == Arch::EdgeGNN) out[at + 2] = f;
        }
    }
    if (arch == Arch::MLP) out[2 * k * m] = f;
    return out;
}

problems::PrecoderPair forward_policy(const Network& net, const NetworkWeights& w,
                                      const problems::PrecodingProblem& problem,
                                      const channels::ChannelSample& sample) {
    Tape tape;
    const std::vector<Var> p = net.bind(tape, w, false);
    const std::vector<channels::ChannelSample> one{sample};
    const Var x = tape.constant(problems::pack_channels(one));
    const Var y = problem.realize(net.forward(p, x, problems::pack_snr(one)));
    return problems::unpack_precoder(problem.config(), y.value(), 0);
}

Eigen::VectorXd forward_multiplier(const Network& net, const NetworkWeights& w,
                                   const channels::ChannelSample& sample) {
    Tape tape;
    const std::vector<Var> p = net.bind(tape, w, false);
    const std::vector<channels::ChannelSample> one{sample};
    const Var x = tape.constant(problems::pack_channels(one));
    const Tensor lam = net.forward(p, x, problems::pack_snr(one)).value();
    return Eigen::Map<const Eigen::VectorXd>(lam.data(), static_cast<Eigen::Index>(lam.size()));
}

Tensor grad_output_wrt_input(const Network& net, const NetworkWeights& w, const Tensor& x,
                             const Tensor& side, const Tensor& cotangent) {
    Tape tape;
    const std::vector<Var> p = net.bind(tape, w, false);
    const Var xv = tape.input(x);
    return tape.vjp(net.forward(p, xv, side), cotangent, xv);
}

}  // namespace uat::nets

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uat/adiff/ops.hpp"
#include "uat/channels/channels.hpp"
#include "uat/problems/precoding.hpp"

namespace uat::nets {

enum class Arch { MLP, EdgeGNN };
enum class Activation { Tanh, Relu };
enum class Role { Policy, Multiplier };

std::string to_string(Arch a);
std::string to_string(Activation a);
std::string to_string(Role r);
Arch parse_arch(std::string_view s);
Activation parse_activation(std::string_view s);
Role parse_role(std::string_view s);

struct NetworkSpec {
    Arch arch = Arch::EdgeGNN;
    std::size_t hidden_layers = 3;
    std::vector<std::size_t> widths{32, 32, 32};
    Activation activation = Activation::Relu;

    void validate() const;
    bool operator==(const NetworkSpec&) const = default;
};

/// Parameters of one network in a fixed order.
struct NetworkWeights {
    Role role = Role::Policy;
    std::vector<std::string> names;
    std::vector<adiff::Tensor> tensors;

    bool all_finite() const;
    std::size_t parameter_count() const;
    bool operator==(const NetworkWeights&) const = default;
};

/// How a network reads x and what it emits.
///
/// Channel layout: x is [N, K, N_T, 2] and side holds the linear SNR; the
/// SNR enters as log10(snr)/2. Plain layout: x is [N, D], side is ignored.
struct Layout {
    enum class Input { Channel, Plain };
    Input input = Input::Plain;
    std::size_t k = 0;
    std::size_t n_t = 0;
    std::size_t n_rf = 0;
    std::size_t plain_dim = 0;
    std::size_t outputs = 0;  ///< raw width (policy) or number of multipliers

    static Layout precoding_policy(const problems::PrecodingConfig& cfg);
    static Layout precoding_multiplier(const problems::PrecodingConfig& cfg);
    static Layout plain(std::size_t in, std::size_t out);
};

class Network {
public:
    Network(NetworkSpec spec, Role role, Layout layout);

    const NetworkSpec& spec() const noexcept { return spec_; }
    Role role() const noexcept { return role_; }
    const Layout& layout() const noexcept { return layout_; }

    /// Uniform(±1/sqrt(fan_in)) weights, zero biases.
    NetworkWeights init(std::uint64_t seed) const;

    /// Names and shapes expected by forward().
    std::vector<std::string> parameter_names() const;
    std::vector<adiff::Shape> parameter_shapes() const;
    /// Throws ShapeError when w does not fit this network.
    void check(const NetworkWeights& w) const;

    /// Policy: raw output [N, outputs]. Multiplier: softplus output [N, outputs].
    adiff::Var forward(std::span<const adiff::Var> params, const adiff::Var& x,
                       const adiff::Tensor& side) const;

    /// Records w on the tape, as trainable leaves or as constants.
    std::vector<adiff::Var> bind(adiff::Tape& tape, const NetworkWeights& w, bool trainable) const;

private:
    adiff::Var encode(const adiff::Var& x, const adiff::Tensor& side) const;
    adiff::Var mlp(std::span<const adiff::Var> p, const adiff::Var& x, const adiff::Tensor& side) const;
    adiff::Var edge_gnn(std::span<const adiff::Var> p, const adiff::Var& x,
                        const adiff::Tensor& side) const;
    adiff::Var edge_layers(std::span<const adiff::Var> p, adiff::Var h) const;
    adiff::Var activate(const adiff::Var& v) const;

    NetworkSpec spec_;
    Role role_;
    Layout layout_;
};

/// log10(snr)/2.
double snr_feature(double snr);

/// Single-sample network input: flat [2·K·N_T + 1] for MLP or [K, N_T, 3] for EdgeGNN.
adiff::Tensor encode_input(const channels::ChannelSample& sample, Arch arch);

/// Runs the policy on one sample and applies the power projection.
problems::PrecoderPair forward_policy(const Network& net, const NetworkWeights& w,
                                      const problems::PrecodingProblem& problem,
                                      const channels::ChannelSample& sample);

/// Multipliers for one sample.
Eigen::VectorXd forward_multiplier(const Network& net, const NetworkWeights& w,
                                   const channels::ChannelSample& sample);

/// cotangentᵀ · ∂(raw output)/∂x for a batch; the SNR feature is excluded.
adiff::Tensor grad_output_wrt_input(const Network& net, const NetworkWeights& w,
                                    const adiff::Tensor& x, const adiff::Tensor& side,
                                    const adiff::Tensor& cotangent);

}  // namespace uat::nets

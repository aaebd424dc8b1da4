#pragma once

#include <cstddef>
#include <string>

#include "uat/adiff/ops.hpp"

namespace uat::problems {

/// A parametric constrained program
///     min_y F(x, y)  s.t.  G_i(x, y) ≤ 0,  i = 1..N_C
/// evaluated on batches. The leading axis of every tensor is the sample axis.
///
/// `side` carries one auxiliary scalar per sample that the problem needs but
/// that is never perturbed (the SNR for precoding).
class ConstrainedProblem {
public:
    virtual ~ConstrainedProblem() = default;

    virtual std::string name() const = 0;
    virtual std::size_t n_constraints() const = 0;

    /// Per-sample shape of x.
    virtual adiff::Shape input_shape() const = 0;

    /// Width of the raw policy-network output consumed by realize().
    virtual std::size_t raw_output_dim() const = 0;

    /// Maps raw network outputs [N, D] to decisions y that satisfy every
    /// constraint not involving x (handled by construction or projection).
    virtual adiff::Var realize(const adiff::Var& raw) const = 0;

    /// F(x, y) per sample, shape [N].
    virtual adiff::Var objective(const adiff::Var& x, const adiff::Var& y,
                                 const adiff::Tensor& side) const = 0;

    /// G(x, y) per sample, shape [N, N_C].
    virtual adiff::Var constraints(const adiff::Var& x, const adiff::Var& y,
                                   const adiff::Tensor& side) const = 0;

    /// Whether any G_i depends on x. When false, ∂G_i/∂x vanishes.
    virtual bool constraints_depend_on_input() const = 0;

    /// Restores input-space invariants after x has been perturbed.
    virtual adiff::Tensor project_input(const adiff::Tensor& x) const { return x; }
};

}  // namespace uat::problems

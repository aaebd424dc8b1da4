#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "uat/adiff/tensor.hpp"

namespace uat::adiff {

class Tape;

enum class LeafKind { Operation, Parameter, Input, Constant };

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t dim(std::size_t axis) const { return value().dim(axis); }
    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Reverse-mode computation record. Nodes are appended in evaluation order, so
/// the node list is always topologically sorted.
///
/// A tape is single-threaded. Separate tapes may be used concurrently.
class Tape {
public:
    /// Accumulates the contribution of one node into the adjoints of its
    /// inputs. `input_grads[i]` is null when input i does not need a gradient.
    using BackwardFn = std::function<void(const Tensor& grad, const Tensor& out,
                                          std::span<Tensor* const> input_grads)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var parameter(Tensor value);
    Var input(Tensor value, bool requires_grad = true);
    Var constant(Tensor value);

    /// Appends an operation node. Backward is skipped entirely when no input
    /// requires a gradient.
    Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    LeafKind kind(std::size_t id) const { return nodes_[id].kind; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Gradients of a scalar output with respect to each leaf. Leaves the
    /// output does not depend on receive zero tensors.
    std::vector<Tensor> backward(const Var& output, std::span<const Var> leaves) const;
    Tensor backward(const Var& output, const Var& leaf) const;

    /// cotangentᵀ · ∂output/∂leaf for each leaf.
    std::vector<Tensor> vjp(const Var& output, const Tensor& cotangent,
                            std::span<const Var> leaves) const;
    Tensor vjp(const Var& output, const Tensor& cotangent, const Var& leaf) const;

private:
    struct Node {
        Tensor value;
        LeafKind kind = LeafKind::Operation;
        bool requires_grad = false;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
    };

    Var push_leaf(Tensor value, LeafKind kind, bool requires_grad);
    void check_owned(const Var& v, const char* what) const;

    std::vector<Node> nodes_;
};

}  // namespace uat::adiff

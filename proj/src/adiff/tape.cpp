#include "uat/adiff/tape.hpp"

#include <optional>

#include "uat/error.hpp"

namespace uat::adiff {

const Tensor& Var::value() const {
    if (!tape_) throw Error("use of an unbound Var");
    return tape_->value(id_);
}

Var Tape::push_leaf(Tensor value, LeafKind kind, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), kind, requires_grad, {}, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor value) { return push_leaf(std::move(value), LeafKind::Parameter, true); }

Var Tape::input(Tensor value, bool requires_grad) {
    return push_leaf(std::move(value), LeafKind::Input, requires_grad);
}

Var Tape::constant(Tensor value) { return push_leaf(std::move(value), LeafKind::Constant, false); }

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    node.inputs.reserve(inputs.size());
    for (const Var& in : inputs) {
        check_owned(in, "operand");
        node.inputs.push_back(in.id());
        node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v, const char* what) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
        throw Error(std::string(what) + " is not recorded on this tape");
    }
}

std::vector<Tensor> Tape::vjp(const Var& output, const Tensor& cotangent,
                              std::span<const Var> leaves) const {
    check_owned(output, "output");
    for (const Var& leaf : leaves) check_owned(leaf, "leaf");
    const Tensor& out_value = nodes_[output.id()].value;
    if (cotangent.shape() != out_value.shape()) {
        throw ShapeError("cotangent shape " + shape_string(cotangent.shape()) +
                         " does not match output shape " + shape_string(out_value.shape()));
    }

    const std::size_t last = output.id();
    std::vector<std::optional<Tensor>> adjoint(last + 1);
    adjoint[last] = cotangent;
    std::vector<char> keep(last + 1, 0);
    for (const Var& leaf : leaves) {
        if (leaf.id() <= last) keep[leaf.id()] = 1;
    }

    std::vector<Tensor*> slots;
    for (std::size_t id = last + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        if (!adjoint[id] || !node.backward) continue;
        slots.assign(node.inputs.size(), nullptr);
        for (std::size_t i = 0; i < node.inputs.size(); ++i) {
            const std::size_t in = node.inputs[i];
            if (!nodes_[in].requires_grad) continue;
            if (!adjoint[in]) adjoint[in].emplace(nodes_[in].value.shape(), 0.0);
            slots[i] = &*adjoint[in];
        }
        node.backward(*adjoint[id], node.value, slots);
        // Interior adjoints are no longer needed once propagated.
        if (!keep[id]) adjoint[id].reset();
    }

    std::vector<Tensor> result;
    result.reserve(leaves.size());
    for (const Var& leaf : leaves) {
        if (leaf.id() <= last && adjoint[leaf.id()]) {
            result.push_back(*adjoint[leaf.id()]);
        } else {
            result.emplace_back(nodes_[leaf.id()].value.shape(), 0.0);
        }
    }
    return result;
}

Tensor Tape::vjp(const Var& output, const Tensor& cotangent, const Var& leaf) const {
    return std::move(vjp(output, cotangent, std::span<const Var>(&leaf, 1)).front());
}

std::vector<Tensor> Tape::backward(const Var& output, std::span<const Var> leaves) const {
    check_owned(output, "output");
    const Tensor& out_value = nodes_[output.id()].value;
    if (out_value.size() != 1) {
        throw ShapeError("backward requires a scalar output, got shape " +
                         shape_string(out_value.shape()));
    }
    return vjp(output, Tensor(out_value.shape(), 1.0), leaves);
}

Tensor Tape::backward(const Var& output, const Var& leaf) const {
    return std::move(backward(output, std::span<const Var>(&leaf, 1)).front());
}

}  // namespace uat::adiff

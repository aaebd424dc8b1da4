#include "uat/adiff/ops.hpp"

#include <Eigen/Core>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "uat/error.hpp"

namespace uat::adiff {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;
using ComplexRowMatrix =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstComplexMap = Eigen::Map<const ComplexRowMatrix>;
using ComplexMap = Eigen::Map<ComplexRowMatrix>;

Tape& common_tape(const Var& a, const Var& b) {
    if (!a.valid() || !b.valid()) throw Error("operation on an unbound Var");
    if (a.tape() != b.tape()) throw Error("operands recorded on different tapes");
    return *a.tape();
}

Tape& tape_of(const Var& a) {
    if (!a.valid()) throw Error("operation on an unbound Var");
    return *a.tape();
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t d = shape.size(); d-- > 1;) strides[d - 1] = strides[d] * shape[d];
    return strides;
}

// Calls f(linear_index, strided_offset) over a row-major walk of `shape`.
template <class F>
void for_each_strided(const Shape& shape, const std::vector<std::size_t>& strides, F&& f) {
    const std::size_t n = element_count(shape);
    const std::size_t rank = shape.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < n; ++i) {
        f(i, offset);
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < shape[d]) {
                offset += strides[d];
                break;
            }
            offset -= strides[d] * (shape[d] - 1);
            idx[d] = 0;
        }
    }
}

// Strides of `in` viewed inside the broadcast shape `out` (0 on broadcast axes).
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
    std::vector<std::size_t> strides(out.size(), 0);
    const auto in_strides = row_major_strides(in);
    const std::size_t lead = out.size() - in.size();
    for (std::size_t d = 0; d < in.size(); ++d) {
        if (in[d] != 1) strides[lead + d] = in_strides[d];
    }
    return strides;
}

// Splits a shape at `axis` into (outer, axis length, inner).
struct AxisView {
    std::size_t outer = 1, length = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape));
    }
    AxisView v;
    for (std::size_t d = 0; d < axis; ++d) v.outer *= shape[d];
    v.length = shape[axis];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) v.inner *= shape[d];
    return v;
}

template <class Fwd, class Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
    Tape& tape = tape_of(a);
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
    return tape.record(std::move(y), {a},
                       [tp = &tape, id = a.id(), deriv](const Tensor& g, const Tensor& out,
                                                   std::span<Tensor* const> grads) {
                           const Tensor& x = tp->value(id);
                           Tensor& gx = *grads[0];
                           for (std::size_t i = 0; i < x.size(); ++i) {
                               gx[i] += g[i] * deriv(x[i], out[i]);
                           }
                       });
}

enum class BinaryKind { Add, Sub, Mul, Div };

Var binary_same_shape(const Var& a, const Var& b, BinaryKind kind) {
    Tape& tape = common_tape(a, b);
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    Tensor y(x.shape());
    const std::size_t n = x.size();
    switch (kind) {
        case BinaryKind::Add:
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + z[i];
            break;
        case BinaryKind::Sub:
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - z[i];
            break;
        case BinaryKind::Mul:
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * z[i];
            break;
        case BinaryKind::Div:
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] / z[i];
            break;
    }
    return tape.record(
        std::move(y), {a, b},
        [tp = &tape, ia = a.id(), ib = b.id(), kind](const Tensor& g, const Tensor& out,
                                                std::span<Tensor* const> grads) {
            const std::size_t n = g.size();
            const Tensor& x = tp->value(ia);
            const Tensor& z = tp->value(ib);
            Tensor* ga = grads[0];
            Tensor* gb = grads[1];
            switch (kind) {
                case BinaryKind::Add:
                    if (ga) accumulate(*ga, g);
                    if (gb) accumulate(*gb, g);
                    break;
                case BinaryKind::Sub:
                    if (ga) accumulate(*ga, g);
                    if (gb)
                        for (std::size_t i = 0; i < n; ++i) (*gb)[i] -= g[i];
                    break;
                case BinaryKind::Mul:
                    if (ga)
                        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] * z[i];
                    if (gb)
                        for (std::size_t i = 0; i < n; ++i) (*gb)[i] += g[i] * x[i];
                    break;
                case BinaryKind::Div:
                    if (ga)
                        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] / z[i];
                    if (gb)
                        for (std::size_t i = 0; i < n; ++i) (*gb)[i] -= g[i] * out[i] / z[i];
                    break;
            }
        });
}

Var binary(const Var& a, const Var& b, BinaryKind kind) {
    common_tape(a, b);
    if (a.shape() == b.shape()) return binary_same_shape(a, b, kind);
    const Shape out = broadcast_shapes(a.shape(), b.shape());
    const Var ab = a.shape() == out ? a : broadcast_to(a, out);
    const Var bb = b.shape() == out ? b : broadcast_to(b, out);
    return binary_same_shape(ab, bb, kind);
}

void require_complex(const Var& a, const char* op) {
    if (a.shape().empty() || a.shape().back() != 2) {
        throw ShapeError(std::string(op) + " expects a trailing (re, im) dimension, got " +
                         shape_string(a.shape()));
    }
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("shapes " + shape_string(a) + " and " + shape_string(b) +
                             " cannot be broadcast");
        }
        out[i] = da == 1 ? db : da;
    }
    return out;
}

Var add(const Var& a, const Var& b) { return binary(a, b, BinaryKind::Add); }
Var sub(const Var& a, const Var& b) { return binary(a, b, BinaryKind::Sub); }
Var mul(const Var& a, const Var& b) { return binary(a, b, BinaryKind::Mul); }
Var div(const Var& a, const Var& b) { return binary(a, b, BinaryKind::Div); }

Var scale(const Var& a, double factor) {
    return unary(a, [factor](double x) { return factor * x; },
                 [factor](double, double) { return factor; });
}

Var shift(const Var& a, double offset) {
    return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var exp(const Var& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log2(const Var& a) {
    for (double v : a.value().values()) {
        if (!(v > 0.0)) throw DomainError("log2 of non-positive value " + std::to_string(v));
    }
    return unary(a, [](double x) { return std::log2(x); },
                 [](double x, double) { return 1.0 / (x * std::numbers::ln2); });
}

Var sqrt(const Var& a) {
    for (double v : a.value().values()) {
        if (!(v > 0.0)) throw DomainError("sqrt of non-positive value " + std::to_string(v));
    }
    return unary(a, [](double x) { return std::sqrt(x); },
                 [](double, double y) { return 0.5 / y; });
}

Var square(const Var& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var tanh(const Var& a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var hinge(const Var& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x >= 0.0 ? 1.0 : 0.0; });
}

Var softplus(const Var& a) {
    return unary(
        a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) {
            // logistic sigmoid, evaluated without overflow
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        });
}

Var sin(const Var& a) {
    return unary(a, [](double x) { return std::sin(x); },
                 [](double x, double) { return std::cos(x); });
}

Var cos(const Var& a) {
    return unary(a, [](double x) { return std::cos(x); },
                 [](double x, double) { return -std::sin(x); });
}

Var matmul(const Var& a, const Var& b) {
    Tape& tape = common_tape(a, b);
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2) {
        throw ShapeError("matmul needs rank >= 2 operands, got " + shape_string(sa) + " and " +
                         shape_string(sb));
    }
    const std::size_t m = sa[sa.size() - 2];
    const std::size_t k = sa.back();
    const std::size_t n = sb.back();
    const bool shared_rhs = sb.size() == 2;
    const Shape batch_a(sa.begin(), sa.end() - 2);
    if (sb[sb.size() - 2] != k || (!shared_rhs && Shape(sb.begin(), sb.end() - 2) != batch_a)) {
        throw ShapeError("matmul shape mismatch: " + shape_string(sa) + " x " + shape_string(sb));
    }
    const std::size_t batch = element_count(batch_a);

    Shape out_shape = batch_a;
    out_shape.push_back(m);
    out_shape.push_back(n);
    Tensor out(out_shape);
    if (shared_rhs) {
        Map(out.data(), batch * m, n).noalias() =
            ConstMap(a.value().data(), batch * m, k) * ConstMap(b.value().data(), k, n);
    } else {
        for (std::size_t i = 0; i < batch; ++i) {
            Map(out.data() + i * m * n, m, n).noalias() =
                ConstMap(a.value().data() + i * m * k, m, k) *
                ConstMap(b.value().data() + i * k * n, k, n);
        }
    }

    return tape.record(
        std::move(out), {a, b},
        [tp = &tape, ia = a.id(), ib = b.id(), batch, m, k, n, shared_rhs](
            const Tensor& g, const Tensor&, std::span<Tensor* const> grads) {
            const Tensor& av = tp->value(ia);
            const Tensor& bv = tp->value(ib);
            if (shared_rhs) {
                const ConstMap gm(g.data(), batch * m, n);
                if (grads[0]) {
                    Map(grads[0]->data(), batch * m, k).noalias() +=
                        gm * ConstMap(bv.data(), k, n).transpose();
                }
                if (grads[1]) {
                    Map(grads[1]->data(), k, n).noalias() +=
                        ConstMap(av.data(), batch * m, k).transpose() * gm;
                }
                return;
            }
            for (std::size_t i = 0; i < batch; ++i) {
                const ConstMap gm(g.data() + i * m * n, m, n);
                if (grads[0]) {
                    Map(grads[0]->data() + i * m * k, m, k).noalias() +=
                        gm * ConstMap(bv.data() + i * k * n, k, n).transpose();
                }
                if (grads[1]) {
                    Map(grads[1]->data() + i * k * n, k, n).noalias() +=
                        ConstMap(av.data() + i * m * k, m, k).transpose() * gm;
                }
            }
        });
}

Var sum(const Var& a) {
    Tape& tape = tape_of(a);
    double total = 0.0;
    for (double v : a.value().values()) total += v;
    return tape.record(Tensor::scalar(total), {a},
                       [](const Tensor& g, const Tensor&, std::span<Tensor* const> grads) {
                           const double s = g[0];
                           for (double& v : grads[0]->values()) v += s;
                       });
}

Var sum(const Var& a, std::size_t axis, bool keepdim) {
    Tape& tape = tape_of(a);
    const AxisView view = axis_view(a.shape(), axis);
    Shape out_shape = a.shape();
    if (keepdim) {
        out_shape[axis] = 1;
    } else {
        out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    }
    Tensor out(out_shape);
    const double* x = a.value().data();
    for (std::size_t o = 0; o < view.outer; ++o) {
        double* dst = out.data() + o * view.inner;
        for (std::size_t l = 0; l < view.length; ++l) {
            const double* src = x + (o * view.length + l) * view.inner;
            for (std::size_t i = 0; i < view.inner; ++i) dst[i] += src[i];
        }
    }
    return tape.record(std::move(out), {a},
                       [view](const Tensor& g, const Tensor&, std::span<Tensor* const> grads) {
                           double* gx = grads[0]->data();
                           for (std::size_t o = 0; o < view.outer; ++o) {
                               const double* src = g.data() + o * view.inner;
                               for (std::size_t l = 0; l < view.length; ++l) {
                                   double* dst = gx + (o * view.length + l) * view.inner;
                                   for (std::size_t i = 0; i < view.inner; ++i) dst[i] += src[i];
                               }
                           }
                       });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean(const Var& a, std::size_t axis, bool keepdim) {
    const std::size_t length = axis_view(a.shape(), axis).length;
    return scale(sum(a, axis, keepdim), 1.0 / static_cast<double>(length));
}

Var reshape(const Var& a, Shape shape) {
    Tape& tape = tape_of(a);
    Tensor out = a.value().reshaped(std::move(shape));
    return tape.record(std::move(out), {a},
                       [](const Tensor& g, const Tensor&, std::span<Tensor* const> grads) {
                           accumulate(*grads[0], g);
                       });
}

Var broadcast_to(const Var& a, const Shape& shape) {
    Tape& tape = tape_of(a);
    const Shape& in = a.shape();
    if (in.size() > shape.size() || broadcast_shapes(in, shape) != shape) {
        throw ShapeError("cannot broadcast " + shape_string(in) + " to " + shape_string(shape));
    }
    const auto strides = broadcast_strides(in, shape);
    Tensor out(shape);
    const double* x = a.value().data();
    for_each_strided(shape, strides, [&](std::size_t i, std::size_t off) { out[i] = x[off]; });
    return tape.record(std::move(out), {a},
                       [shape, strides](const Tensor& g, const Tensor&,
                                        std::span<Tensor* const> grads) {
                           double* gx = grads[0]->data();
                           for_each_strided(shape, strides, [&](std::size_t i, std::size_t off) {
                               gx[off] += g[i];
                           });
                       });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    Tape& tape = tape_of(parts.front());
    const Shape& first = parts.front().shape();
    axis_view(first, axis);
    Shape out_shape = first;
    out_shape[axis] = 0;
    std::vector<AxisView> views;
    for (const Var& p : parts) {
        common_tape(parts.front(), p);
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
        if (!ok) {
            throw ShapeError("concat along axis " + std::to_string(axis) + ": " +
                             shape_string(first) + " vs " + shape_string(s));
        }
        out_shape[axis] += s[axis];
        views.push_back(axis_view(s, axis));
    }
    const AxisView out_view = axis_view(out_shape, axis);
    Tensor out(out_shape);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const double* src = parts[p].value().data();
        const std::size_t block = views[p].length * views[p].inner;
        for (std::size_t o = 0; o < out_view.outer; ++o) {
            std::copy_n(src + o * block, block,
                        out.data() + o * out_view.length * out_view.inner + offset);
        }
        offset += block;
    }
    return tape.record(std::move(out), parts,
                       [views, out_view](const Tensor& g, const Tensor&,
                                         std::span<Tensor* const> grads) {
                           std::size_t offset = 0;
                           for (std::size_t p = 0; p < views.size(); ++p) {
                               const std::size_t block = views[p].length * views[p].inner;
                               if (Tensor* gp = grads[p]) {
                                   for (std::size_t o = 0; o < out_view.outer; ++o) {
                                       const double* src = g.data() +
                                                           o * out_view.length * out_view.inner +
                                                           offset;
                                       double* dst = gp->data() + o * block;
                                       for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                                   }
                               }
                               offset += block;
                           }
                       });
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
    Tape& tape = tape_of(a);
    const AxisView view = axis_view(a.shape(), axis);
    if (begin >= end || end > view.length) {
        throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for axis " + std::to_string(axis) + " of " +
                         shape_string(a.shape()));
    }
    Shape out_shape = a.shape();
    out_shape[axis] = end - begin;
    const std::size_t block = (end - begin) * view.inner;
    Tensor out(out_shape);
    const double* x = a.value().data();
    for (std::size_t o = 0; o < view.outer; ++o) {
        std::copy_n(x + (o * view.length + begin) * view.inner, block, out.data() + o * block);
    }
    return tape.record(std::move(out), {a},
                       [view, begin, block](const Tensor& g, const Tensor&,
                                            std::span<Tensor* const> grads) {
                           double* gx = grads[0]->data();
                           for (std::size_t o = 0; o < view.outer; ++o) {
                               double* dst = gx + (o * view.length + begin) * view.inner;
                               const double* src = g.data() + o * block;
                               for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                           }
                       });
}

Var transpose(const Var& a, std::size_t axis0, std::size_t axis1) {
    Tape& tape = tape_of(a);
    const Shape& in = a.shape();
    if (axis0 >= in.size() || axis1 >= in.size()) {
        throw ShapeError("transpose axes out of range for " + shape_string(in));
    }
    Shape out_shape = in;
    std::swap(out_shape[axis0], out_shape[axis1]);
    // Walking the output in row-major order reads the input with swapped strides.
    auto strides = row_major_strides(in);
    std::swap(strides[axis0], strides[axis1]);
    Tensor out(out_shape);
    const double* x = a.value().data();
    for_each_strided(out_shape, strides, [&](std::size_t i, std::size_t off) { out[i] = x[off]; });
    return tape.record(std::move(out), {a},
                       [out_shape, strides](const Tensor& g, const Tensor&,
                                            std::span<Tensor* const> grads) {
                           double* gx = grads[0]->data();
                           for_each_strided(out_shape, strides,
                                            [&](std::size_t i, std::size_t off) {
                                                gx[off] += g[i];
                                            });
                       });
}

Var complex_abs2(const Var& a) {
    require_complex(a, "complex_abs2");
    Tape& tape = tape_of(a);
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    Tensor out(out_shape);
    const double* x = a.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[2 * i] * x[2 * i] + x[2 * i + 1] * x[2 * i + 1];
    }
    return tape.record(std::move(out), {a},
                       [tp = &tape, id = a.id()](const Tensor& g, const Tensor&,
                                            std::span<Tensor* const> grads) {
                           const double* x = tp->value(id).data();
                           double* gx = grads[0]->data();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               gx[2 * i] += 2.0 * g[i] * x[2 * i];
                               gx[2 * i + 1] += 2.0 * g[i] * x[2 * i + 1];
                           }
                       });
}

Var complex_arg(const Var& a) {
    require_complex(a, "complex_arg");
    Tape& tape = tape_of(a);
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    Tensor out(out_shape);
    const double* x = a.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (x[2 * i] == 0.0 && x[2 * i + 1] == 0.0) throw DomainError("argument of complex zero");
        out[i] = std::atan2(x[2 * i + 1], x[2 * i]);
    }
    return tape.record(std::move(out), {a},
                       [tp = &tape, id = a.id()](const Tensor& g, const Tensor&,
                                            std::span<Tensor* const> grads) {
                           const double* x = tp->value(id).data();
                           double* gx = grads[0]->data();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               const double r2 = x[2 * i] * x[2 * i] + x[2 * i + 1] * x[2 * i + 1];
                               gx[2 * i] -= g[i] * x[2 * i + 1] / r2;
                               gx[2 * i + 1] += g[i] * x[2 * i] / r2;
                           }
                       });
}

Var complex_mul(const Var& a, const Var& b) {
    require_complex(a, "complex_mul");
    require_complex(b, "complex_mul");
    Tape& tape = common_tape(a, b);
    if (a.shape() != b.shape()) {
        throw ShapeError("complex_mul shape mismatch: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
    const std::size_t n = a.value().size() / 2;
    Tensor out(a.shape());
    const auto* x = reinterpret_cast<const std::complex<double>*>(a.value().data());
    const auto* z = reinterpret_cast<const std::complex<double>*>(b.value().data());
    auto* y = reinterpret_cast<std::complex<double>*>(out.data());
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * z[i];
    return tape.record(
        std::move(out), {a, b},
        [tp = &tape, ia = a.id(), ib = b.id(), n](const Tensor& g, const Tensor&,
                                             std::span<Tensor* const> grads) {
            const auto* x = reinterpret_cast<const std::complex<double>*>(tp->value(ia).data());
            const auto* z = reinterpret_cast<const std::complex<double>*>(tp->value(ib).data());
            const auto* gc = reinterpret_cast<const std::complex<double>*>(g.data());
            if (grads[0]) {
                auto* ga = reinterpret_cast<std::complex<double>*>(grads[0]->data());
                for (std::size_t i = 0; i < n; ++i) ga[i] += gc[i] * std::conj(z[i]);
            }
            if (grads[1]) {
                auto* gb = reinterpret_cast<std::complex<double>*>(grads[1]->data());
                for (std::size_t i = 0; i < n; ++i) gb[i] += gc[i] * std::conj(x[i]);
            }
        });
}

Var complex_conj(const Var& a) {
    require_complex(a, "complex_conj");
    Tape& tape = tape_of(a);
    Tensor out = a.value();
    for (std::size_t i = 1; i < out.size(); i += 2) out[i] = -out[i];
    return tape.record(std::move(out), {a},
                       [](const Tensor& g, const Tensor&, std::span<Tensor* const> grads) {
                           double* gx = grads[0]->data();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               gx[i] += (i % 2 == 0) ? g[i] : -g[i];
                           }
                       });
}

Var complex_exp_i(const Var& phase) {
    Tape& tape = tape_of(phase);
    Shape out_shape = phase.shape();
    out_shape.push_back(2);
    Tensor out(out_shape);
    const Tensor& p = phase.value();
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[2 * i] = std::cos(p[i]);
        out[2 * i + 1] = std::sin(p[i]);
    }
    return tape.record(std::move(out), {phase},
                       [](const Tensor& g, const Tensor& out, std::span<Tensor* const> grads) {
                           double* gp = grads[0]->data();
                           for (std::size_t i = 0; i < grads[0]->size(); ++i) {
                               // d cos = -sin, d sin = cos
                               gp[i] += -g[2 * i] * out[2 * i + 1] + g[2 * i + 1] * out[2 * i];
                           }
                       });
}

Var complex_matmul(const Var& a, const Var& b) {
    require_complex(a, "complex_matmul");
    require_complex(b, "complex_matmul");
    Tape& tape = common_tape(a, b);
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() < 3 || sb.size() < 3) {
        throw ShapeError("complex_matmul needs [..., M, P, 2] operands, got " + shape_string(sa) +
                         " and " + shape_string(sb));
    }
    const std::size_t m = sa[sa.size() - 3];
    const std::size_t p = sa[sa.size() - 2];
    const std::size_t q = sb[sb.size() - 2];
    const bool shared_rhs = sb.size() == 3;
    const Shape batch_a(sa.begin(), sa.end() - 3);
    if (sb[sb.size() - 3] != p || (!shared_rhs && Shape(sb.begin(), sb.end() - 3) != batch_a)) {
        throw ShapeError("complex_matmul shape mismatch: " + shape_string(sa) + " x " +
                         shape_string(sb));
    }
    const std::size_t batch = element_count(batch_a);
    Shape out_shape = batch_a;
    out_shape.insert(out_shape.end(), {m, q, 2});
    Tensor out(out_shape);

    auto cdata = [](const Tensor& t) {
        return reinterpret_cast<const std::complex<double>*>(t.data());
    };
    auto mdata = [](Tensor& t) { return reinterpret_cast<std::complex<double>*>(t.data()); };

    if (shared_rhs) {
        ComplexMap(mdata(out), batch * m, q).noalias() =
            ConstComplexMap(cdata(a.value()), batch * m, p) *
            ConstComplexMap(cdata(b.value()), p, q);
    } else {
        for (std::size_t i = 0; i < batch; ++i) {
            ComplexMap(mdata(out) + i * m * q, m, q).noalias() =
                ConstComplexMap(cdata(a.value()) + i * m * p, m, p) *
                ConstComplexMap(cdata(b.value()) + i * p * q, p, q);
        }
    }

    return tape.record(
        std::move(out), {a, b},
        [tp = &tape, ia = a.id(), ib = b.id(), batch, m, p, q, shared_rhs, cdata, mdata](
            const Tensor& g, const Tensor&, std::span<Tensor* const> grads) {
            const Tensor& av = tp->value(ia);
            const Tensor& bv = tp->value(ib);
            // For a real loss, grad_A = grad_C · Bᴴ and grad_B = Aᴴ · grad_C.
            if (shared_rhs) {
                const ConstComplexMap gm(cdata(g), batch * m, q);
                if (grads[0]) {
                    ComplexMap(mdata(*grads[0]), batch * m, p).noalias() +=
                        gm * ConstComplexMap(cdata(bv), p, q).adjoint();
                }
                if (grads[1]) {
                    ComplexMap(mdata(*grads[1]), p, q).noalias() +=
                        ConstComplexMap(cdata(av), batch * m, p).adjoint() * gm;
                }
                return;
            }
            for (std::size_t i = 0; i < batch; ++i) {
                const ConstComplexMap gm(cdata(g) + i * m * q, m, q);
                if (grads[0]) {
                    ComplexMap(mdata(*grads[0]) + i * m * p, m, p).noalias() +=
                        gm * ConstComplexMap(cdata(bv) + i * p * q, p, q).adjoint();
                }
                if (grads[1]) {
                    ComplexMap(mdata(*grads[1]) + i * p * q, p, q).noalias() +=
                        ConstComplexMap(cdata(av) + i * m * p, m, p).adjoint() * gm;
                }
            }
        });
}

Var complex_inverse(const Var& a) {
    require_complex(a, "complex_inverse");
    const Shape& sa = a.shape();
    if (sa.size() < 3 || sa[sa.size() - 3] != sa[sa.size() - 2]) {
        throw ShapeError("complex_inverse needs [..., M, M, 2], got " + shape_string(sa));
    }
    Tape& tape = *a.tape();
    const std::size_t m = sa[sa.size() - 2];
    const std::size_t batch = element_count(Shape(sa.begin(), sa.end() - 3));
    Tensor out(sa);
    const auto* in = reinterpret_cast<const std::complex<double>*>(a.value().data());
    auto* res = reinterpret_cast<std::complex<double>*>(out.data());
    for (std::size_t i = 0; i < batch; ++i) {
        const ConstComplexMap src(in + i * m * m, m, m);
        const Eigen::PartialPivLU<ComplexRowMatrix> lu(src);
        if (!(std::abs(lu.determinant()) > 0.0)) throw DomainError("complex_inverse of a singular matrix");
        ComplexMap(res + i * m * m, m, m) = lu.inverse();
    }
    if (!out.all_finite()) throw DomainError("complex_inverse of a singular matrix");

    return tape.record(std::move(out), {a}, [batch, m](const Tensor& g, const Tensor& c, std::span<Tensor* const> grads) {
        // dC = −C dA C, so grad_A = −Cᴴ · grad_C · Cᴴ.
        const auto* cv = reinterpret_cast<const std::complex<double>*>(c.data());
        const auto* gv = reinterpret_cast<const std::complex<double>*>(g.data());
        auto* ga = reinterpret_cast<std::complex<double>*>(grads[0]->data());
        for (std::size_t i = 0; i < batch; ++i) {
            const ConstComplexMap ci(cv + i * m * m, m, m);
            ComplexMap(ga + i * m * m, m, m).noalias() -=
                ci.adjoint() * ConstComplexMap(gv + i * m * m, m, m) * ci.adjoint();
        }
    });
}

}  // namespace uat::adiff

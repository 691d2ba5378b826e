#include "flowdet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace flowdet::ad {

namespace {

void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw NumericError(std::string("non-finite result in op '") + op + "'");
}

NodePtr finish(Tensor out, std::vector<NodePtr> parents, const char* op,
               std::function<void(const Node&)> bp) {
    check_finite(out, op);
    auto n = std::make_shared<Node>();
    n->grad = Tensor(out.shape);
    n->value = std::move(out);
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backprop = std::move(bp);
    }
    return n;
}

enum class Bcast { kNone, kColumn, kScalar };

Bcast broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
    if (a.same_shape(b)) return Bcast::kNone;
    if (b.rows() == 1 && b.cols() == 1) return Bcast::kScalar;
    if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::kColumn;
    throw ShapeError(std::string(op) + ": shapes do not conform");
}

// Accumulates g (shaped like a) into gb with the inverse of the broadcast.
void reduce_into(const Tensor& g, Tensor& gb, Bcast mode, std::size_t rows, std::size_t cols,
                 double sign = 1.0) {
    switch (mode) {
        case Bcast::kNone:
            for (std::size_t i = 0; i < g.values.size(); ++i) gb.values[i] += sign * g.values[i];
            break;
        case Bcast::kScalar: {
            double s = 0.0;
            for (double v : g.values) s += v;
            gb.values[0] += sign * s;
            break;
        }
        case Bcast::kColumn:
            for (std::size_t r = 0; r < rows; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < cols; ++c) s += g.values[r * cols + c];
                gb.values[r] += sign * s;
            }
            break;
    }
}

double bval(const Tensor& b, Bcast mode, std::size_t r, std::size_t c, std::size_t cols) {
    switch (mode) {
        case Bcast::kNone: return b.values[r * cols + c];
        case Bcast::kScalar: return b.values[0];
        case Bcast::kColumn: return b.values[r];
    }
    return 0.0;
}

template <typename Fwd, typename Bwd>
NodePtr elementwise_binary(const NodePtr& a, const NodePtr& b, const char* op, Fwd fwd, Bwd bwd) {
    Bcast mode = broadcast_mode(a->value, b->value, op);
    std::size_t rows = a->value.rows(), cols = a->value.cols();
    Tensor out(a->value.shape);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            std::size_t i = r * cols + c;
            out.values[i] = fwd(a->value.values[i], bval(b->value, mode, r, c, cols));
        }
    Node* pa = a.get();
    Node* pb = b.get();
    return finish(std::move(out), {a, b}, op, [pa, pb, mode, rows, cols, bwd](const Node& self) {
        bwd(self, pa, pb, mode, rows, cols);
    });
}

template <typename Fwd, typename Grad>
NodePtr elementwise_unary(const NodePtr& a, const char* op, Fwd fwd, Grad grad_fn) {
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = fwd(a->value.values[i]);
    Node* pa = a.get();
    return finish(std::move(out), {a}, op, [pa, grad_fn](const Node& self) {
        if (!pa->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.values.size(); ++i)
            pa->grad.values[i] += self.grad.values[i] * grad_fn(pa->value.values[i], self.value.values[i]);
    });
}

}  // namespace

NodePtr make_constant(Tensor v) {
    auto n = std::make_shared<Node>();
    n->grad = Tensor(v.shape);
    n->value = std::move(v);
    n->requires_grad = false;
    return n;
}

NodePtr make_param(Tensor v) {
    auto n = make_constant(std::move(v));
    n->requires_grad = true;
    return n;
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    const Tensor& A = a->value;
    const Tensor& B = b->value;
    if (A.cols() != B.rows()) throw ShapeError("matmul: inner dimensions differ");
    std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    Tensor out(Shape{n, m});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = A.values[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) out.values[i * m + j] += av * B.values[p * m + j];
        }
    Node* pa = a.get();
    Node* pb = b.get();
    return finish(std::move(out), {a, b}, "matmul", [pa, pb, n, k, m](const Node& self) {
        const auto& G = self.grad.values;
        if (pa->requires_grad) {
            // dA += G * B^T
            auto& gA = pa->grad.values;
            const auto& Bv = pb->value.values;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) s += G[i * m + j] * Bv[p * m + j];
                    gA[i * k + p] += s;
                }
        }
        if (pb->requires_grad) {
            // dB += A^T * G
            auto& gB = pb->grad.values;
            const auto& Av = pa->value.values;
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t i = 0; i < n; ++i) {
                    double av = Av[i * k + p];
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < m; ++j) gB[p * m + j] += av * G[i * m + j];
                }
        }
    });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    return elementwise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](const Node& self, Node* pa, Node* pb, Bcast mode, std::size_t rows, std::size_t cols) {
            if (pa->requires_grad)
                for (std::size_t i = 0; i < self.grad.values.size(); ++i)
                    pa->grad.values[i] += self.grad.values[i];
            if (pb->requires_grad) reduce_into(self.grad, pb->grad, mode, rows, cols);
        });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    return elementwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](const Node& self, Node* pa, Node* pb, Bcast mode, std::size_t rows, std::size_t cols) {
            if (pa->requires_grad)
                for (std::size_t i = 0; i < self.grad.values.size(); ++i)
                    pa->grad.values[i] += self.grad.values[i];
            if (pb->requires_grad) reduce_into(self.grad, pb->grad, mode, rows, cols, -1.0);
        });
}

NodePtr elemwise_mul(const NodePtr& a, const NodePtr& b) {
    return elementwise_binary(
        a, b, "elemwise_mul", [](double x, double y) { return x * y; },
        [](const Node& self, Node* pa, Node* pb, Bcast mode, std::size_t rows, std::size_t cols) {
            if (pa->requires_grad)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) {
                        std::size_t i = r * cols + c;
                        pa->grad.values[i] +=
                            self.grad.values[i] * bval(pb->value, mode, r, c, cols);
                    }
            if (pb->requires_grad) {
                Tensor weighted(self.grad.shape);
                for (std::size_t i = 0; i < weighted.values.size(); ++i)
                    weighted.values[i] = self.grad.values[i] * pa->value.values[i];
                reduce_into(weighted, pb->grad, mode, rows, cols);
            }
        });
}

NodePtr relu(const NodePtr& a) {
    return elementwise_unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

NodePtr exp_op(const NodePtr& a) {
    return elementwise_unary(
        a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

NodePtr log_op(const NodePtr& a) {
    return elementwise_unary(
        a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

NodePtr tanh_op(const NodePtr& a) {
    return elementwise_unary(
        a, "tanh", [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

NodePtr abs_op(const NodePtr& a) {
    // Subgradient at 0 is 0.
    return elementwise_unary(
        a, "abs", [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

NodePtr sum(const NodePtr& a) {
    double s = 0.0;
    for (double v : a->value.values) s += v;
    Node* pa = a.get();
    return finish(Tensor::scalar(s), {a}, "sum", [pa](const Node& self) {
        if (!pa->requires_grad) return;
        double g = self.grad.values[0];
        for (double& gv : pa->grad.values) gv += g;
    });
}

NodePtr slice_rows(const NodePtr& a, std::size_t r0, std::size_t r1) {
    const Tensor& A = a->value;
    if (r0 >= r1 || r1 > A.rows()) throw ShapeError("slice_rows: bad row range");
    std::size_t cols = A.cols();
    Tensor out(Shape{r1 - r0, cols});
    std::copy(A.values.begin() + r0 * cols, A.values.begin() + r1 * cols, out.values.begin());
    Node* pa = a.get();
    return finish(std::move(out), {a}, "slice_rows", [pa, r0, cols](const Node& self) {
        if (!pa->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.values.size(); ++i)
            pa->grad.values[r0 * cols + i] += self.grad.values[i];
    });
}

NodePtr concat_rows(std::span<const NodePtr> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no operands");
    std::size_t cols = parts[0]->value.cols();
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p->value.cols() != cols) throw ShapeError("concat_rows: column counts differ");
        rows += p->value.rows();
    }
    Tensor out(Shape{rows, cols});
    std::size_t off = 0;
    std::vector<NodePtr> parents;
    std::vector<std::pair<Node*, std::size_t>> layout;
    for (const auto& p : parts) {
        std::copy(p->value.values.begin(), p->value.values.end(), out.values.begin() + off);
        layout.emplace_back(p.get(), off);
        parents.push_back(p);
        off += p->value.values.size();
    }
    return finish(std::move(out), std::move(parents), "concat_rows",
                  [layout = std::move(layout)](const Node& self) {
                      for (const auto& [p, start] : layout) {
                          if (!p->requires_grad) continue;
                          for (std::size_t i = 0; i < p->grad.values.size(); ++i)
                              p->grad.values[i] += self.grad.values[start + i];
                      }
                  });
}

NodePtr scale(const NodePtr& a, double c) {
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = a->value.values[i] * c;
    Node* pa = a.get();
    return finish(std::move(out), {a}, "scale", [pa, c](const Node& self) {
        if (!pa->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.values.size(); ++i)
            pa->grad.values[i] += self.grad.values[i] * c;
    });
}

NodePtr apply_primitive(OpKind kind, std::span<const NodePtr> ops, const PrimitiveArgs& args) {
    auto need = [&](std::size_t n) {
        if (ops.size() != n) throw ShapeError("apply_primitive: wrong operand count");
    };
    switch (kind) {
        case OpKind::kMatmul: need(2); return matmul(ops[0], ops[1]);
        case OpKind::kAdd: need(2); return add(ops[0], ops[1]);
        case OpKind::kSub: need(2); return sub(ops[0], ops[1]);
        case OpKind::kElemwiseMul: need(2); return elemwise_mul(ops[0], ops[1]);
        case OpKind::kRelu: need(1); return relu(ops[0]);
        case OpKind::kExp: need(1); return exp_op(ops[0]);
        case OpKind::kLog: need(1); return log_op(ops[0]);
        case OpKind::kTanh: need(1); return tanh_op(ops[0]);
        case OpKind::kAbs: need(1); return abs_op(ops[0]);
        case OpKind::kSum: need(1); return sum(ops[0]);
        case OpKind::kSliceRows: need(1); return slice_rows(ops[0], args.r0, args.r1);
        case OpKind::kConcatRows: return concat_rows(ops);
        case OpKind::kScale: need(1); return scale(ops[0], args.c);
    }
    throw ShapeError("apply_primitive: unknown op kind");
}

namespace {

// Reverse post-order over the parent DAG (output first).
std::vector<Node*> topo_order(Node* out) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(out, 0);
    visited.insert(out);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

}  // namespace

void backward(const NodePtr& output) {
    if (output->value.numel() != 1) throw ShapeError("backward: output must be scalar");
    auto order = topo_order(output.get());
    // Interior gradients are per-call scratch; leaf gradients accumulate.
    for (Node* n : order)
        if (n->backprop) n->grad.fill(0.0);
    if (output->backprop)
        output->grad.values[0] = 1.0;
    else if (output->requires_grad)
        output->grad.values[0] += 1.0;  // leaf used directly as loss
    for (Node* n : order)
        if (n->backprop) n->backprop(*n);
}

void zero_grads(std::span<const NodePtr> params) {
    for (const auto& p : params) p->grad.fill(0.0);
}

AdamState AdamState::init(std::span<const NodePtr> params, double lr) {
    AdamState st;
    st.learning_rate = lr;
    for (const auto& p : params) {
        st.first_moment.emplace_back(p->value.shape);
        st.second_moment.emplace_back(p->value.shape);
    }
    return st;
}

void adam_step(std::span<const NodePtr> params, AdamState& st) {
    if (st.first_moment.size() != params.size() || st.second_moment.size() != params.size())
        throw ParamError("adam_step: state not initialized for this parameter list");
    st.step_count += 1;
    double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
    double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Node& p = *params[k];
        if (!st.first_moment[k].same_shape(p.value))
            throw ParamError("adam_step: moment shape does not match parameter");
        auto& m = st.first_moment[k].values;
        auto& v = st.second_moment[k].values;
        for (std::size_t i = 0; i < p.value.values.size(); ++i) {
            double g = p.grad.values[i];
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g;
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g * g;
            double mhat = m[i] / c1;
            double vhat = v[i] / c2;
            p.value.values[i] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
        }
        p.grad.fill(0.0);
    }
}

GradCheckReport gradient_check(const std::function<NodePtr()>& build_loss,
                               std::span<const NodePtr> params, double tolerance,
                               double h) {
    zero_grads(params);
    NodePtr loss = build_loss();
    backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p->grad);
    zero_grads(params);

    GradCheckReport rep;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Node& p = *params[k];
        for (std::size_t i = 0; i < p.value.values.size(); ++i) {
            double saved = p.value.values[i];
            p.value.values[i] = saved + h;
            double lp = build_loss()->value.values[0];
            p.value.values[i] = saved - h;
            double lm = build_loss()->value.values[0];
            p.value.values[i] = saved;
            double numeric = (lp - lm) / (2.0 * h);
            double a = analytic[k].values[i];
            double rel = std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_param = k;
                rep.worst_index = i;
            }
            ++rep.entries_checked;
        }
    }
    rep.pass = rep.max_rel_error <= tolerance;
    return rep;
}

}  // namespace flowdet::ad

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flowdet/tensor.hpp"

namespace flowdet::ad {

// Reverse-mode graph node. Children own their parents, so releasing the
// output releases the whole expression; leaf parameters survive because the
// caller keeps them. Gradients accumulate until zeroed (adam_step zeroes its
// parameters after every update).
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Node&)> backprop;  // pushes this->grad into parents
};

using NodePtr = std::shared_ptr<Node>;

NodePtr make_constant(Tensor v);
NodePtr make_param(Tensor v);

// Forward primitives. add/sub/elemwise_mul accept equal shapes, or a second
// operand that is n x 1 (broadcast across columns) or 1 x 1 (broadcast
// everywhere). Every primitive checks the result for NaN/Inf and throws
// NumericError on violation.
NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr elemwise_mul(const NodePtr& a, const NodePtr& b);
NodePtr relu(const NodePtr& a);
NodePtr exp_op(const NodePtr& a);
NodePtr log_op(const NodePtr& a);
NodePtr tanh_op(const NodePtr& a);
NodePtr abs_op(const NodePtr& a);
NodePtr sum(const NodePtr& a);
NodePtr slice_rows(const NodePtr& a, std::size_t r0, std::size_t r1);
NodePtr concat_rows(std::span<const NodePtr> parts);
NodePtr scale(const NodePtr& a, double c);

enum class OpKind {
    kMatmul,
    kAdd,
    kSub,
    kElemwiseMul,
    kRelu,
    kExp,
    kLog,
    kTanh,
    kAbs,
    kSum,
    kSliceRows,
    kConcatRows,
    kScale,
};

struct PrimitiveArgs {
    std::size_t r0 = 0, r1 = 0;  // slice_rows
    double c = 0.0;              // scale
};

NodePtr apply_primitive(OpKind kind, std::span<const NodePtr> operands, const PrimitiveArgs& args = {});

// Reverse pass from a scalar output. Internal node gradients are reset on
// every call; leaf gradients accumulate across calls.
void backward(const NodePtr& output);

void zero_grads(std::span<const NodePtr> params);

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t step_count = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;

    static AdamState init(std::span<const NodePtr> params, double lr = 1e-3);
};

// Bias-corrected Adam update; zeroes the parameter gradients afterwards.
void adam_step(std::span<const NodePtr> params, AdamState& state);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t entries_checked = 0;
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
    bool pass = false;
};

// Compares analytic gradients against central finite differences of the loss
// produced by `build_loss` (which must reconstruct the scalar loss from the
// current parameter values on every call).
GradCheckReport gradient_check(const std::function<NodePtr()>& build_loss,
                               std::span<const NodePtr> params, double tolerance,
                               double perturbation = 1e-5);

}  // namespace flowdet::ad

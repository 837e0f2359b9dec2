#include "rtbpcl/grad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rtbpcl/error.hpp"

namespace rtbpcl::grad {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

bool is_unary(Op op) {
    switch (op) {
        case Op::neg:
        case Op::exp:
        case Op::log:
        case Op::tanh:
        case Op::softplus:
        case Op::square:
            return true;
        default:
            return false;
    }
}

Tape& common_tape(Var a, Var b) {
    if (a.tape() == nullptr || a.tape() != b.tape()) {
        throw PreconditionError("operands belong to different tapes");
    }
    return *a.tape();
}

Tape& tape_of(Var a) {
    if (a.tape() == nullptr) {
        throw PreconditionError("variable is not attached to a tape");
    }
    return *a.tape();
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Node and adjoint buffers are recycled between tapes so that large
// per-iteration tapes do not fault in fresh pages every time.
thread_local std::vector<Node> spare_nodes;
thread_local std::vector<std::uint32_t> spare_operands;
thread_local std::vector<double> spare_adjoints;

double affine_value(const std::vector<Node>& nodes, const std::uint32_t* ops, const ParamStore& params,
                    std::uint32_t bias) {
    const std::uint32_t w = ops[0];
    const std::uint32_t count = ops[1];
    double acc = params[bias];
    for (std::uint32_t i = 0; i < count; ++i) {
        acc += params[w + i] * nodes[ops[2 + i]].value;
    }
    return acc;
}

}  // namespace

Tape::Tape(const ParamStore& params) : params_(&params) {
    nodes_.swap(spare_nodes);
    nodes_.clear();
    operands_.swap(spare_operands);
    operands_.clear();
}

Tape::~Tape() {
    if (nodes_.capacity() > spare_nodes.capacity()) {
        nodes_.swap(spare_nodes);
    }
    if (operands_.capacity() > spare_operands.capacity()) {
        operands_.swap(spare_operands);
    }
}

std::string_view op_name(Op op) {
    switch (op) {
        case Op::constant: return "constant";
        case Op::param: return "param";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::div: return "div";
        case Op::neg: return "neg";
        case Op::exp: return "exp";
        case Op::log: return "log";
        case Op::tanh: return "tanh";
        case Op::softplus: return "softplus";
        case Op::square: return "square";
        case Op::affine: return "affine";
    }
    return "unknown";
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double apply_op(Op op, double a, double b) {
    switch (op) {
        case Op::add: return a + b;
        case Op::sub: return a - b;
        case Op::mul: return a * b;
        case Op::div: return a / b;
        case Op::neg: return -a;
        case Op::exp: return std::exp(a);
        case Op::log: return std::log(a);
        case Op::tanh: return std::tanh(a);
        case Op::softplus: return softplus(a);
        case Op::square: return a * a;
        case Op::constant:
        case Op::param:
        case Op::affine:
            break;
    }
    throw PreconditionError("apply_op called on a leaf or affine node");
}

Var Tape::push(Op op, std::uint32_t lhs, std::uint32_t rhs, double value) {
    if (nodes_.size() >= kNone) {
        throw PreconditionError("tape node limit exceeded");
    }
    nodes_.push_back(Node{op, lhs, rhs, value});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(double v) { return push(Op::constant, kNone, kNone, v); }

Var Tape::param(std::size_t index) {
    if (index >= params_->size()) {
        throw PreconditionError("parameter read at index " + std::to_string(index) + " outside store of size " +
                                std::to_string(params_->size()));
    }
    return push(Op::param, static_cast<std::uint32_t>(index), kNone, (*params_)[index]);
}

Var Tape::unary(Op op, Var a) {
    if (!is_unary(op)) {
        throw PreconditionError("not a unary op: " + std::string(op_name(op)));
    }
    return push(op, a.id(), kNone, apply_op(op, a.value(), 0.0));
}

Var Tape::binary(Op op, Var a, Var b) {
    if (is_unary(op) || op == Op::constant || op == Op::param || op == Op::affine) {
        throw PreconditionError("not a binary op: " + std::string(op_name(op)));
    }
    return push(op, a.id(), b.id(), apply_op(op, a.value(), b.value()));
}

Var Tape::affine(std::size_t weights, std::size_t bias, std::span<const Var> inputs) {
    if (bias >= params_->size() || weights + inputs.size() > params_->size()) {
        throw PreconditionError("affine parameter range outside store of size " + std::to_string(params_->size()));
    }
    const auto start = static_cast<std::uint32_t>(operands_.size());
    operands_.push_back(static_cast<std::uint32_t>(weights));
    operands_.push_back(static_cast<std::uint32_t>(inputs.size()));
    for (const Var& x : inputs) {
        if (x.tape() != this) {
            throw PreconditionError("affine input belongs to another tape");
        }
        operands_.push_back(x.id());
    }
    const double v = affine_value(nodes_, operands_.data() + start, *params_, static_cast<std::uint32_t>(bias));
    return push(Op::affine, start, static_cast<std::uint32_t>(bias), v);
}

void Tape::set_output(Var v) {
    if (v.tape() != this) {
        throw PreconditionError("output variable belongs to another tape");
    }
    output_ = v.id();
}

Var operator+(Var a, Var b) { return common_tape(a, b).binary(Op::add, a, b); }
Var operator-(Var a, Var b) { return common_tape(a, b).binary(Op::sub, a, b); }
Var operator*(Var a, Var b) { return common_tape(a, b).binary(Op::mul, a, b); }
Var operator/(Var a, Var b) { return common_tape(a, b).binary(Op::div, a, b); }
Var operator-(Var a) { return tape_of(a).unary(Op::neg, a); }
Var operator+(Var a, double b) { return a + tape_of(a).constant(b); }
Var operator+(double a, Var b) { return tape_of(b).constant(a) + b; }
Var operator-(Var a, double b) { return a - tape_of(a).constant(b); }
Var operator-(double a, Var b) { return tape_of(b).constant(a) - b; }
Var operator*(Var a, double b) { return a * tape_of(a).constant(b); }
Var operator*(double a, Var b) { return tape_of(b).constant(a) * b; }
Var operator/(Var a, double b) { return a / tape_of(a).constant(b); }
Var operator/(double a, Var b) { return tape_of(b).constant(a) / b; }
Var& operator+=(Var& a, Var b) { return a = a + b; }
Var& operator+=(Var& a, double b) { return a = a + b; }

Var exp(Var a) { return tape_of(a).unary(Op::exp, a); }
Var log(Var a) { return tape_of(a).unary(Op::log, a); }
Var tanh(Var a) { return tape_of(a).unary(Op::tanh, a); }
Var softplus(Var a) { return tape_of(a).unary(Op::softplus, a); }
Var square(Var a) { return tape_of(a).unary(Op::square, a); }

double evaluate(Tape& tape, const ParamStore& params) {
    if (!tape.output()) {
        throw PreconditionError("tape has no output node");
    }
    if (params.size() < tape.bound_params().size()) {
        throw PreconditionError("store of size " + std::to_string(params.size()) + " is smaller than the one recorded");
    }
    auto& nodes = tape.nodes();
    const auto& ops = tape.operands();
    const std::uint32_t out = *tape.output();
    for (std::uint32_t i = 0; i <= out; ++i) {
        Node& n = nodes[i];
        switch (n.op) {
            case Op::constant:
                break;
            case Op::param:
                n.value = params[n.lhs];
                break;
            case Op::affine:
                n.value = affine_value(nodes, ops.data() + n.lhs, params, n.rhs);
                break;
            default:
                n.value = apply_op(n.op, nodes[n.lhs].value, n.rhs == kNone ? 0.0 : nodes[n.rhs].value);
                break;
        }
        if (!std::isfinite(n.value)) {
            throw NonFiniteError("non-finite value at node " + std::to_string(i) + " (" +
                                 std::string(op_name(n.op)) + ")");
        }
    }
    tape.rebind(params);
    return nodes[out].value;
}

std::vector<double> gradient(Tape& tape, const ParamStore& params) {
    evaluate(tape, params);
    return backward(tape);
}

std::vector<double> backward(const Tape& tape) {
    if (!tape.output()) {
        throw PreconditionError("tape has no output node");
    }
    const auto& nodes = tape.nodes();
    const auto& ops = tape.operands();
    const ParamStore& params = tape.bound_params();
    const std::uint32_t out = *tape.output();
    std::vector<double>& adj = spare_adjoints;
    adj.assign(out + 1, 0.0);
    std::vector<double> grad(tape.bound_params().size(), 0.0);
    adj[out] = 1.0;
    for (std::uint32_t i = out + 1; i-- > 0;) {
        const double g = adj[i];
        if (g == 0.0) {
            continue;
        }
        const Node& n = nodes[i];
        switch (n.op) {
            case Op::constant:
                break;
            case Op::param:
                grad[n.lhs] += g;
                break;
            case Op::add:
                adj[n.lhs] += g;
                adj[n.rhs] += g;
                break;
            case Op::sub:
                adj[n.lhs] += g;
                adj[n.rhs] -= g;
                break;
            case Op::mul:
                adj[n.lhs] += g * nodes[n.rhs].value;
                adj[n.rhs] += g * nodes[n.lhs].value;
                break;
            case Op::div: {
                const double b = nodes[n.rhs].value;
                adj[n.lhs] += g / b;
                adj[n.rhs] -= g * n.value / b;
                break;
            }
            case Op::neg:
                adj[n.lhs] -= g;
                break;
            case Op::exp:
                adj[n.lhs] += g * n.value;
                break;
            case Op::log:
                adj[n.lhs] += g / nodes[n.lhs].value;
                break;
            case Op::tanh:
                adj[n.lhs] += g * (1.0 - n.value * n.value);
                break;
            case Op::softplus:
                adj[n.lhs] += g * sigmoid(nodes[n.lhs].value);
                break;
            case Op::square:
                adj[n.lhs] += 2.0 * g * nodes[n.lhs].value;
                break;
            case Op::affine: {
                const std::uint32_t w = ops[n.lhs];
                const std::uint32_t count = ops[n.lhs + 1];
                const std::uint32_t* in = ops.data() + n.lhs + 2;
                grad[n.rhs] += g;
                for (std::uint32_t k = 0; k < count; ++k) {
                    grad[w + k] += g * nodes[in[k]].value;
                    adj[in[k]] += g * params[w + k];
                }
                break;
            }
        }
    }
    return grad;
}

double check_gradient(Tape& tape, const ParamStore& params, double epsilon, double floor) {
    if (!(epsilon > 0.0)) {
        throw PreconditionError("check_gradient requires epsilon > 0");
    }
    const std::vector<double> analytic = gradient(tape, params);
    ParamStore probe = params;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double x = params[i];
        probe[i] = x + epsilon;
        const double up = evaluate(tape, probe);
        probe[i] = x - epsilon;
        const double down = evaluate(tape, probe);
        probe[i] = x;
        const double fd = (up - down) / (2.0 * epsilon);
        if (!std::isfinite(fd)) {
            throw NonFiniteError("finite difference for parameter " + std::to_string(i) + " is not finite");
        }
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd), floor});
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
    evaluate(tape, params);
    return worst;
}

}  // namespace rtbpcl::grad

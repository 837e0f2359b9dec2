#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rtbpcl/grad/param_store.hpp"

namespace rtbpcl::grad {

enum class Op : std::uint8_t {
    constant,
    param,
    add,
    sub,
    mul,
    div,
    neg,
    exp,
    log,
    tanh,
    softplus,
    square,
    affine,
};

std::string_view op_name(Op op);

// One recorded operation. For `param` nodes `lhs` is the parameter index;
// for unary ops only `lhs` is meaningful. For `affine` nodes `lhs` indexes
// the tape's operand list (weight offset, count, input ids) and `rhs` is the
// bias parameter index.
struct Node {
    Op op;
    std::uint32_t lhs;
    std::uint32_t rhs;
    double value;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    double value() const;
    std::uint32_t id() const { return id_; }
    Tape* tape() const { return tape_; }

private:
    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

// Define-by-run recording of a scalar computation. Values are computed
// eagerly while recording (reading from the bound ParamStore) and can be
// recomputed later against any store of the same size via evaluate().
class Tape {
public:
    explicit Tape(const ParamStore& params);
    ~Tape();

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(double v);
    Var param(std::size_t index);
    Var param(const Slice& slice, std::size_t i) { return param(slice.offset + i); }

    // Records `v` as a constant holding its current value (stop-gradient).
    Var stop_gradient(Var v) { return constant(v.value()); }

    Var unary(Op op, Var a);
    Var binary(Op op, Var a, Var b);
    // p[bias] + Σ_i p[weights + i] · inputs[i] as a single node.
    Var affine(std::size_t weights, std::size_t bias, std::span<const Var> inputs);

    void set_output(Var v);
    std::optional<std::uint32_t> output() const { return output_; }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    std::vector<Node>& nodes() { return nodes_; }
    double value(std::uint32_t id) const { return nodes_[id].value; }
    const std::vector<std::uint32_t>& operands() const { return operands_; }
    // Store the node values currently reflect: the bound store, or the
    // last one passed to evaluate().
    const ParamStore& bound_params() const { return *params_; }
    void rebind(const ParamStore& params) { params_ = &params; }

private:
    Var push(Op op, std::uint32_t lhs, std::uint32_t rhs, double value);

    const ParamStore* params_;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> operands_;
    std::optional<std::uint32_t> output_;
};

inline double Var::value() const { return tape_->value(id_); }

// Forward rule shared by recording and re-evaluation.
double apply_op(Op op, double a, double b);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);
Var& operator+=(Var& a, Var b);
Var& operator+=(Var& a, double b);

Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var softplus(Var a);
Var square(Var a);

// Same names for plain doubles so templated model code reads identically.
double softplus(double x);
inline double square(double x) { return x * x; }

// Recomputes every node against `params`, rebinds the tape to it and returns
// the output value.
// Throws NonFiniteError naming the first node that is NaN/Inf and
// PreconditionError if the tape has no output or a parameter read is out of range.
double evaluate(Tape& tape, const ParamStore& params);

// Reverse-mode gradient of the output with respect to every entry of
// `params`. Runs evaluate() first. Entries not read by the tape are exactly 0.
std::vector<double> gradient(Tape& tape, const ParamStore& params);

// Reverse pass over the current node values, without re-evaluating. Only
// valid while the store they were computed from is unchanged.
std::vector<double> backward(const Tape& tape);

// Maximum over parameters of |g - fd| / max(|g|, |fd|, floor) where fd is
// the central finite difference with step `epsilon`. Leaves the tape
// evaluated at the unperturbed parameters.
double check_gradient(Tape& tape, const ParamStore& params, double epsilon, double floor = 1e-3);

}  // namespace rtbpcl::grad

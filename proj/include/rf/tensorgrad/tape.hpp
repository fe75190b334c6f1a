#pragma once

#include "rf/tensorgrad/tensor.hpp"

#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace rf::tg {

// Trainable (or fittable) array. The optimizer scales its step by lr_mult.
struct Parameter {
    std::string name;
    Tensor value;
    double lr_mult = 1.0;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t size() const { return value().size(); }
    bool requires_grad() const;
};

// dloss/dparam for every parameter registered on a tape, in registration order.
class Gradients {
public:
    const Tensor* find(const Parameter& p) const;
    const Tensor& at(const Parameter& p) const;
    const std::vector<std::pair<Parameter*, Tensor>>& entries() const { return entries_; }

    // Adds other's entries into this one, matching by parameter.
    void accumulate(const Gradients& other, double scale = 1.0);
    void scale(double s);

private:
    friend class Tape;
    Tensor& slot(Parameter& p);
    std::vector<std::pair<Parameter*, Tensor>> entries_;
};

// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so a
// reverse sweep visits every node after all of its consumers.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& out, const Tensor& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var variable(Tensor value);
    Var param(Parameter& p);
    // Later param() calls for p record a constant: no gradient is collected for it.
    void freeze(const Parameter& p) { frozen_.insert(&p); }
    // Same value as v, cut off from v's gradient.
    Var detach(Var v);

    // Used by op implementations. `backward` is dropped when no input tracks gradients.
    Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
    Var record(std::string_view op, Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

    const Tensor& value(Var v) const;
    bool requires_grad(Var v) const;

    // Gradient buffer of an input inside a backward rule; null when the input
    // does not track gradients. Lazily zero-initialised.
    Tensor* grad_sink(Var v);

    // Gradient of the last backward() w.r.t. v (zeros if v was not reached).
    Tensor grad(Var v) const;

    // Clears all node gradients, seeds dloss = 1 and sweeps in reverse.
    // Throws on a non-scalar loss, a loss from another tape, or non-finite gradients.
    Gradients backward(Var loss);

    std::size_t size() const { return nodes_.size(); }
    bool owns(Var v) const { return v.tape == this && v.id >= 0 && static_cast<std::size_t>(v.id) < nodes_.size(); }

private:
    struct Node {
        std::string op;
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        Parameter* param = nullptr;
        BackwardFn backward;
        std::vector<int> inputs;
    };

    Var push(Node node);

    std::deque<Node> nodes_;
    std::unordered_set<const Parameter*> frozen_;
};

// Test hook: when set, the named op's backward rule receives a perturbed
// upstream gradient, which gradient checks must detect.
void set_injected_fault(std::string op);
const std::string& injected_fault();

} // namespace rf::tg

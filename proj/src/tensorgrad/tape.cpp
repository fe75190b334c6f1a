#include "rf/tensorgrad/tape.hpp"

#include "rf/core/error.hpp"


namespace rf::tg {

namespace {

std::string& fault_slot()
{
    static std::string op;
    return op;
}

} // namespace

void set_injected_fault(std::string op) { fault_slot() = std::move(op); }
const std::string& injected_fault() { return fault_slot(); }

const Tensor& Var::value() const { return tape->value(*this); }
bool Var::requires_grad() const { return tape->requires_grad(*this); }

const Tensor* Gradients::find(const Parameter& p) const
{
    for (const auto& [param, g] : entries_)
        if (param == &p) return &g;
    return nullptr;
}

const Tensor& Gradients::at(const Parameter& p) const
{
    const Tensor* g = find(p);
    if (!g) throw InvalidArgument("no gradient recorded for parameter '" + p.name + "'");
    return *g;
}

Tensor& Gradients::slot(Parameter& p)
{
    for (auto& [param, g] : entries_)
        if (param == &p) return g;
    entries_.emplace_back(&p, Tensor(p.value.shape()));
    return entries_.back().second;
}

void Gradients::accumulate(const Gradients& other, double scale)
{
    for (const auto& [param, g] : other.entries_) slot(*param).add_scaled(g, scale);
}

void Gradients::scale(double s)
{
    for (auto& entry : entries_)
        for (double& v : entry.second.storage()) v *= s;
}

Var Tape::push(Node node)
{
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value)
{
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::variable(Tensor value)
{
    Node n;
    n.op = "variable";
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::param(Parameter& p)
{
    if (frozen_.contains(&p)) return constant(p.value);
    Node n;
    n.op = "param";
    n.value = p.value;
    n.requires_grad = true;
    n.param = &p;
    return push(std::move(n));
}

Var Tape::detach(Var v) { return constant(value(v)); }

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward)
{
    return record(op, std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(std::string_view op, Tensor value, const std::vector<Var>& inputs, BackwardFn backward)
{
    Node n;
    n.op = std::string(op);
    for (const Var& in : inputs) {
        if (!owns(in)) throw InvalidArgument(n.op + ": input belongs to a different tape");
        n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
        n.inputs.push_back(in.id);
    }
    if (!value.all_finite()) throw NumericError(n.op + ": non-finite value in forward pass");
    n.value = std::move(value);
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
}

const Tensor& Tape::value(Var v) const
{
    if (!owns(v)) throw InvalidArgument("variable does not belong to this tape");
    return nodes_[v.id].value;
}

bool Tape::requires_grad(Var v) const
{
    if (!owns(v)) throw InvalidArgument("variable does not belong to this tape");
    return nodes_[v.id].requires_grad;
}

Tensor* Tape::grad_sink(Var v)
{
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
    return &n.grad;
}

Tensor Tape::grad(Var v) const
{
    if (!owns(v)) throw InvalidArgument("variable does not belong to this tape");
    const Node& n = nodes_[v.id];
    return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
}

Gradients Tape::backward(Var loss)
{
    if (!owns(loss)) throw InvalidArgument("backward: loss is not on this tape");
    if (nodes_[loss.id].value.size() != 1)
        throw InvalidArgument("backward: loss must be a scalar, got shape " +
                              shape_string(nodes_[loss.id].value.shape()));
    for (Node& n : nodes_) n.grad = Tensor();

    const std::string& fault = injected_fault();
    if (nodes_[loss.id].requires_grad) {
        nodes_[loss.id].grad = Tensor(nodes_[loss.id].value.shape(), 1.0);
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.backward || n.grad.empty()) continue;
            if (!n.grad.all_finite()) throw NumericError("backward: non-finite gradient reaching op '" + n.op + "'");
            if (!fault.empty() && n.op == fault) {
                Tensor perturbed = n.grad;
                for (double& g : perturbed.storage()) g *= 1.5;
                n.backward(*this, n.value, perturbed);
            } else {
                n.backward(*this, n.value, n.grad);
            }
            for (int in : n.inputs)
                if (!nodes_[in].grad.all_finite())
                    throw NumericError("backward: op '" + n.op + "' produced a non-finite gradient");
        }
    }

    Gradients out;
    for (Node& n : nodes_) {
        if (!n.param) continue;
        Tensor& slot = out.slot(*n.param);
        if (n.grad.empty()) continue;
        if (!n.grad.all_finite()) throw NumericError("backward: non-finite gradient for parameter '" + n.param->name + "'");
        slot.add_scaled(n.grad);
    }
    return out;
}

} // namespace rf::tg

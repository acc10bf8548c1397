#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "camscope/core/error.hpp"
#include "camscope/nn/layer.hpp"

namespace camscope::nn {

// A feed-forward DAG of layers. Nodes are appended in topological order;
// node 0 is the input placeholder. Forward caches every node output, which
// both backward and activation taps rely on.
class Network {
public:
    struct Node {
        std::string name;
        std::unique_ptr<Layer> layer;  // null for the input placeholder
        std::vector<int> inputs;
        Tensor out;
        Tensor grad;
        int rank = 4;
    };

    Network() {
        Node in;
        in.name = "input";
        in.rank = 4;
        nodes_.push_back(std::move(in));
    }

    int input() const { return 0; }

    int add(std::string name, std::unique_ptr<Layer> layer, std::vector<int> inputs) {
        Node n;
        n.name = std::move(name);
        std::vector<int> in_ranks;
        for (int id : inputs) {
            if (id < 0 || id >= static_cast<int>(nodes_.size()))
                throw Error("network: bad input node id for " + n.name);
            in_ranks.push_back(nodes_[id].rank);
        }
        n.rank = layer->out_rank(in_ranks);
        n.layer = std::move(layer);
        n.inputs = std::move(inputs);
        nodes_.push_back(std::move(n));
        output_ = static_cast<int>(nodes_.size()) - 1;
        return output_;
    }

    int output() const { return output_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    const std::string& name(int id) const { return nodes_[id].name; }
    int rank(int id) const { return nodes_[id].rank; }
    const std::vector<int>& inputs_of(int id) const { return nodes_[id].inputs; }

    int find(const std::string& name) const {
        for (int i = 0; i < size(); ++i)
            if (nodes_[i].name == name) return i;
        return -1;
    }

    const Tensor& forward(const Tensor& x, bool training) {
        nodes_[0].out = x;
        for (int i = 1; i < size(); ++i) run_node(i, training);
        return nodes_[output_].out;
    }

    // Replace one node's cached output and recompute everything downstream
    // (eval mode). Upstream caches are left as the last forward produced them.
    const Tensor& forward_from(int node, const Tensor& replaced) {
        if (node < 0 || node >= size()) throw Error("network: bad node id");
        nodes_[node].out = replaced;
        for (int i = node + 1; i < size(); ++i) run_node(i, false);
        return nodes_[output_].out;
    }

    // Reverse accumulation from the output node. Requires a prior forward;
    // the training flag of that forward governs layer behavior (BatchNorm).
    // Parameter gradients accumulate; call zero_grads() between uses.
    void backward(const Tensor& gout) {
        for (Node& n : nodes_) n.grad = Tensor();
        nodes_[output_].grad = gout;
        for (int i = size() - 1; i >= 1; --i) {
            Node& n = nodes_[i];
            if (n.grad.empty()) continue;
            std::vector<const Tensor*> ins;
            ins.reserve(n.inputs.size());
            for (int id : n.inputs) ins.push_back(&nodes_[id].out);
            std::vector<Tensor> gins = n.layer->backward(ins, n.out, n.grad);
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                Node& src = nodes_[n.inputs[k]];
                if (src.grad.empty()) src.grad = std::move(gins[k]);
                else src.grad.add_(gins[k]);
            }
        }
    }

    const Tensor& node_output(int id) const { return nodes_[id].out; }
    const Tensor& node_grad(int id) const { return nodes_[id].grad; }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (Node& n : nodes_)
            if (n.layer)
                for (Param* p : n.layer->params()) out.push_back(p);
        return out;
    }

    // node-qualified names, stable across rebuilds of the same architecture
    std::vector<std::pair<std::string, Param*>> named_params() {
        std::vector<std::pair<std::string, Param*>> out;
        for (Node& n : nodes_)
            if (n.layer)
                for (Param* p : n.layer->params())
                    out.emplace_back(n.name + "." + p->name, p);
        return out;
    }

    std::vector<std::pair<std::string, Param*>> named_state() {
        std::vector<std::pair<std::string, Param*>> out;
        for (Node& n : nodes_)
            if (n.layer)
                for (Param* p : n.layer->state())
                    out.emplace_back(n.name + "." + p->name, p);
        return out;
    }

    void zero_grads() {
        for (Param* p : params()) p->grad.zero();
    }

    Layer* layer(int id) { return nodes_[id].layer.get(); }

private:
    void run_node(int i, bool training) {
        Node& n = nodes_[i];
        std::vector<const Tensor*> ins;
        ins.reserve(n.inputs.size());
        for (int id : n.inputs) ins.push_back(&nodes_[id].out);
        n.out = n.layer->forward(ins, training);
    }

    std::vector<Node> nodes_;
    int output_ = 0;
};

}  // namespace camscope::nn

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mbnn/tape.hpp"
#include "mbnn/tensor.hpp"

namespace mbnn {

using ParamGrads = std::map<std::string, Tensor, std::less<>>;

/// Named parameter tensors in insertion order. Names are unique and shapes
/// never change after `add`.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor value;
        bool trainable = true;
    };

    void add(std::string name, Tensor value, bool trainable = true);
    bool contains(std::string_view name) const;
    const Tensor& get(std::string_view name) const;
    const Entry& entry(std::string_view name) const;
    /// Replace a value; the new tensor must have the registered shape.
    void set(std::string_view name, Tensor value);
    void set_trainable(std::string_view name, bool trainable);

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t trainable_count() const;

    bool operator==(const ParamSet& other) const;

private:
    std::size_t index_of(std::string_view name) const;

    std::vector<Entry> entries_;
};

/// A ParamSet placed on a tape: trainable entries become differentiable leaves.
class BoundParams {
public:
    BoundParams(Tape& tape, const ParamSet& params);

    Var operator[](std::string_view name) const;
    const ParamSet& params() const noexcept { return *params_; }
    Tape& tape() const noexcept { return *tape_; }
    /// Gradient per trainable entry.
    ParamGrads gradients(const Gradients& g) const;

private:
    Tape* tape_;
    const ParamSet* params_;
    std::vector<Var> vars_;
};

}  // namespace mbnn

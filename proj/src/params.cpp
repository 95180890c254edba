#include "mbnn/params.hpp"

#include "mbnn/errors.hpp"

namespace mbnn {

std::size_t ParamSet::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].name == name) return i;
    return entries_.size();
}

void ParamSet::add(std::string name, Tensor value, bool trainable) {
    if (name.empty()) throw StructureError("parameter name must not be empty");
    if (contains(name)) throw StructureError("duplicate parameter '" + name + "'");
    entries_.push_back({std::move(name), std::move(value), trainable});
}

bool ParamSet::contains(std::string_view name) const { return index_of(name) < entries_.size(); }

const ParamSet::Entry& ParamSet::entry(std::string_view name) const {
    const auto i = index_of(name);
    if (i == entries_.size()) throw StructureError("unknown parameter '" + std::string(name) + "'");
    return entries_[i];
}

const Tensor& ParamSet::get(std::string_view name) const { return entry(name).value; }

void ParamSet::set(std::string_view name, Tensor value) {
    const auto i = index_of(name);
    if (i == entries_.size()) throw StructureError("unknown parameter '" + std::string(name) + "'");
    if (value.shape() != entries_[i].value.shape()) {
        throw DimensionError("parameter '" + std::string(name) + "' has shape " + shape_string(entries_[i].value.shape()) +
                             ", cannot assign " + shape_string(value.shape()));
    }
    entries_[i].value = std::move(value);
}

void ParamSet::set_trainable(std::string_view name, bool trainable) {
    const auto i = index_of(name);
    if (i == entries_.size()) throw StructureError("unknown parameter '" + std::string(name) + "'");
    entries_[i].trainable = trainable;
}

std::size_t ParamSet::trainable_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.trainable ? 1 : 0;
    return n;
}

bool ParamSet::operator==(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& a = entries_[i];
        const auto& b = other.entries_[i];
        if (a.name != b.name || a.trainable != b.trainable || !(a.value == b.value)) return false;
    }
    return true;
}

BoundParams::BoundParams(Tape& tape, const ParamSet& params) : tape_(&tape), params_(&params) {
    vars_.reserve(params.size());
    for (const auto& e : params.entries()) vars_.push_back(e.trainable ? tape.variable(e.value) : tape.constant(e.value));
}

Var BoundParams::operator[](std::string_view name) const {
    const auto& entries = params_->entries();
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name == name) return vars_[i];
    throw StructureError("parameter '" + std::string(name) + "' is not bound");
}

ParamGrads BoundParams::gradients(const Gradients& g) const {
    ParamGrads out;
    const auto& entries = params_->entries();
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].trainable) out.emplace(entries[i].name, g[vars_[i]]);
    return out;
}

}  // namespace mbnn

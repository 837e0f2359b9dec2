#include "rtbpcl/grad/param_store.hpp"

#include <algorithm>

#include "rtbpcl/error.hpp"

namespace rtbpcl::grad {

ParamStore::ParamStore(std::vector<Slice> layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
    std::size_t cursor = 0;
    for (const auto& s : layout_) {
        if (s.offset != cursor) {
            throw PreconditionError("parameter slice '" + s.name + "' is not contiguous with its predecessor");
        }
        cursor += s.length;
    }
    if (cursor != values_.size()) {
        throw PreconditionError("parameter layout covers " + std::to_string(cursor) + " values but store has " +
                                std::to_string(values_.size()));
    }
    for (std::size_t i = 0; i < layout_.size(); ++i) {
        for (std::size_t j = i + 1; j < layout_.size(); ++j) {
            if (layout_[i].name == layout_[j].name) {
                throw PreconditionError("duplicate parameter slice '" + layout_[i].name + "'");
            }
        }
    }
}

const Slice& ParamStore::add(std::string name, std::size_t length, double init) {
    if (contains(name)) {
        throw PreconditionError("duplicate parameter slice '" + name + "'");
    }
    layout_.push_back(Slice{std::move(name), values_.size(), length});
    values_.resize(values_.size() + length, init);
    return layout_.back();
}

bool ParamStore::contains(std::string_view name) const {
    return std::any_of(layout_.begin(), layout_.end(), [&](const Slice& s) { return s.name == name; });
}

const Slice& ParamStore::slice(std::string_view name) const {
    for (const auto& s : layout_) {
        if (s.name == name) {
            return s;
        }
    }
    throw PreconditionError("unknown parameter slice '" + std::string(name) + "'");
}

std::span<double> ParamStore::view(std::string_view name) {
    const auto& s = slice(name);
    return std::span<double>(values_).subspan(s.offset, s.length);
}

std::span<const double> ParamStore::view(std::string_view name) const {
    const auto& s = slice(name);
    return std::span<const double>(values_).subspan(s.offset, s.length);
}

}  // namespace rtbpcl::grad

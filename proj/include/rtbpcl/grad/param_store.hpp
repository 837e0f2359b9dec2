#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rtbpcl::grad {

// A named, contiguous range of the flat parameter vector.
struct Slice {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;

    std::size_t end() const { return offset + length; }
};

// Flat real vector partitioned into disjoint named slices that cover it exactly.
// Slices are appended in order, so the layout is always a partition.
class ParamStore {
public:
    ParamStore() = default;

    // Rebuilds a store from a serialized layout. Throws PreconditionError if
    // the slices are not an in-order partition of `values`.
    ParamStore(std::vector<Slice> layout, std::vector<double> values);

    const Slice& add(std::string name, std::size_t length, double init = 0.0);

    bool contains(std::string_view name) const;
    // Throws PreconditionError for unknown names.
    const Slice& slice(std::string_view name) const;

    std::span<double> view(std::string_view name);
    std::span<const double> view(std::string_view name) const;

    std::size_t size() const { return values_.size(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<Slice>& layout() const { return layout_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

private:
    std::vector<Slice> layout_;
    std::vector<double> values_;
};

}  // namespace rtbpcl::grad

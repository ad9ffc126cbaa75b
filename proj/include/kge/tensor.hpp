#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kge/error.hpp"

namespace kge {

/// Row-major dense matrix of trainable values.
struct Tensor {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::string n, std::size_t r, std::size_t c, double fill = 0.0)
        : name(std::move(n)), rows(r), cols(c), data(r * c, fill) {}

    std::size_t size() const { return data.size(); }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool operator==(const Tensor&) const = default;
};

/// Ordered collection of named tensors; order is part of the checkpoint format.
class ParamSet {
public:
    std::size_t add(Tensor t) {
        tensors_.push_back(std::move(t));
        return tensors_.size() - 1;
    }

    std::size_t count() const { return tensors_.size(); }
    Tensor& operator[](std::size_t i) { return tensors_[i]; }
    const Tensor& operator[](std::size_t i) const { return tensors_[i]; }

    const Tensor& at(const std::string& name) const {
        for (const auto& t : tensors_)
            if (t.name == name) return t;
        throw InputError("no tensor named '" + name + "'");
    }
    Tensor& at(const std::string& name) {
        return const_cast<Tensor&>(static_cast<const ParamSet&>(*this).at(name));
    }

    auto begin() { return tensors_.begin(); }
    auto end() { return tensors_.end(); }
    auto begin() const { return tensors_.begin(); }
    auto end() const { return tensors_.end(); }

    bool operator==(const ParamSet&) const = default;

private:
    std::vector<Tensor> tensors_;
};

/// Gradient buffers mirroring a ParamSet, with per-row touch tracking so that
/// only rows that received gradient are visited by the optimizer.
class GradSet {
public:
    GradSet() = default;
    explicit GradSet(const ParamSet& params) {
        for (const auto& t : params) {
            Slot s;
            s.cols = t.cols;
            s.data.assign(t.size(), 0.0);
            s.touched.assign(t.rows, 0);
            slots_.push_back(std::move(s));
        }
    }

    /// Marks the row as touched and returns it for accumulation.
    std::span<double> row(std::size_t tensor, std::size_t r) {
        auto& s = slots_[tensor];
        if (!s.touched[r]) {
            s.touched[r] = 1;
            s.rows.push_back(r);
        }
        return {s.data.data() + r * s.cols, s.cols};
    }

    std::span<const double> row(std::size_t tensor, std::size_t r) const {
        const auto& s = slots_[tensor];
        return {s.data.data() + r * s.cols, s.cols};
    }

    const std::vector<std::size_t>& touched_rows(std::size_t tensor) const { return slots_[tensor].rows; }
    std::size_t count() const { return slots_.size(); }

    /// Adds `other` into this buffer (touched rows only).
    void merge(const GradSet& other) {
        for (std::size_t t = 0; t < slots_.size(); ++t) {
            for (std::size_t r : other.slots_[t].rows) {
                auto dst = row(t, r);
                auto src = other.row(t, r);
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
            }
        }
    }

    void scale(double s) {
        for (auto& slot : slots_)
            for (std::size_t r : slot.rows)
                for (std::size_t j = 0; j < slot.cols; ++j) slot.data[r * slot.cols + j] *= s;
    }

    bool all_finite() const {
        for (const auto& slot : slots_)
            for (std::size_t r : slot.rows)
                for (std::size_t j = 0; j < slot.cols; ++j)
                    if (!std::isfinite(slot.data[r * slot.cols + j])) return false;
        return true;
    }

    /// Zeroes touched rows and forgets them.
    void clear() {
        for (auto& slot : slots_) {
            for (std::size_t r : slot.rows) {
                slot.touched[r] = 0;
                std::fill_n(slot.data.begin() + static_cast<std::ptrdiff_t>(r * slot.cols), slot.cols, 0.0);
            }
            slot.rows.clear();
        }
    }

private:
    struct Slot {
        std::size_t cols = 0;
        std::vector<double> data;
        std::vector<char> touched;
        std::vector<std::size_t> rows;
    };
    std::vector<Slot> slots_;
};

}  // namespace kge

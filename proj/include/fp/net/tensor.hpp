#pragma once

#include <cstddef>
#include <vector>

namespace fp::net {

// Dense row-major tensor, (batch, channels, height, width) for feature maps
// and (batch, features) for fully-connected stages. double in tests, float in
// production training.
template <typename T>
struct TensorND {
    std::vector<int> shape;
    std::vector<T> data;

    TensorND() = default;
    explicit TensorND(std::vector<int> s) : shape(std::move(s)) {
        data.assign(count(), T(0));
    }

    std::size_t count() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }
};

}  // namespace fp::net

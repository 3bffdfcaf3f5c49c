// Minimal use of the library: hierarchical attention on random inputs,
// compared against exact softmax attention.

#include <iostream>

#include "hattn/hattn.hpp"

int main() {
    using namespace hattn;

    const auto params = derive_params(/*seq_len=*/1024, /*embed_dim=*/32, /*rank=*/16, Mode::banded);
    const auto q = gaussian_matrix<double>(1024, 32, 1);
    const auto k = gaussian_matrix<double>(1024, 32, 2);
    const auto v = gaussian_matrix<double>(1024, 32, 3);

    const auto result = h_attention(q, k, v, params);
    const auto exact = oracle::dense_attention(q, k, v);

    std::cout << "levels: " << params.levels << '\n'
              << "stored entries: " << result.stored_entries << " (dense would need " << 1024 * 1024 << ")\n"
              << "relative error vs softmax attention: " << relative_frobenius_distance(result.z, exact) << '\n';
}

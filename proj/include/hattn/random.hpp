#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "hattn/matrix.hpp"

namespace hattn {

// Standard-normal sampler with a frozen algorithm:
//   * bits: std::mt19937_64 seeded with the 64-bit seed (sequence fixed by the
//     C++ standard),
//   * uniforms: top 53 bits scaled to [0, 1), mapped to [-1, 1),
//   * normals: Marsaglia polar method evaluated in double, both variates used.
// f32 matrices round the double variates to nearest.
class NormalStream {
  public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }

  private:
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// rows x cols matrix of standard-normal entries, filled row-major.
template <Real T>
Matrix<T> gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix<T> m(rows, cols);
    NormalStream stream(seed);
    for (T& x : m.values())
        x = static_cast<T>(stream.next());
    return m;
}

} // namespace hattn

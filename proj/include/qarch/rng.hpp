// Seedable random streams with hand-rolled transforms so that a given
// (seed, draw sequence) is bit-identical across platforms. mt19937_64 is
// fully specified by the standard; std::normal_distribution and friends
// are not.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace qarch {

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1)
    double uniform_pos() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // standard normal, Box-Muller with cached second draw
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform_pos();
        const double v = uniform();
        const double rad = std::sqrt(-2.0 * std::log(u));
        const double ang = 6.283185307179586476925286766559 * v;
        spare_ = rad * std::sin(ang);
        have_spare_ = true;
        return rad * std::cos(ang);
    }

    // gamma(shape, scale) via Marsaglia-Tsang; shape > 0
    double gamma(double shape, double scale) {
        if (shape < 1.0) {
            const double u = uniform_pos();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    double chi_squared(double dof) { return gamma(0.5 * dof, 2.0); }

    // Student-t with nu dof, scaled to unit variance (requires nu > 2)
    double student_unit(double nu) {
        if (!(nu > 2.0)) throw std::invalid_argument("student_unit: nu must exceed 2");
        const double z = normal();
        const double w = chi_squared(nu);
        return z / std::sqrt(w / nu) * std::sqrt((nu - 2.0) / nu);
    }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // rejection-free enough for test/shuffle use; modulo bias negligible for n << 2^64
        return engine_() % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace qarch

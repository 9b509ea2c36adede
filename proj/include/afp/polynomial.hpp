#pragma once

#include <cmath>
#include <vector>

#include "afp/errors.hpp"

namespace afp {

/** Real polynomial in one variable, coefficients in increasing degree. */
struct Polynomial {
    std::vector<double> coeffs;

    Polynomial() = default;
    Polynomial(std::vector<double> c) : coeffs(std::move(c)) {
        for (double a : coeffs)
            if (!std::isfinite(a)) throw InvalidParameter("polynomial coefficients must be finite");
    }

    static Polynomial monomial(int n) {
        std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
        c.back() = 1.0;
        return Polynomial(std::move(c));
    }

    double operator()(double x) const {
        double s = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) s = s * x + *it;
        return s;
    }

    Polynomial derivative() const {
        if (coeffs.size() <= 1) return Polynomial({0.0});
        std::vector<double> d(coeffs.size() - 1);
        for (std::size_t k = 1; k < coeffs.size(); ++k) d[k - 1] = static_cast<double>(k) * coeffs[k];
        return Polynomial(std::move(d));
    }
};

/** Polynomial in (r, z); coeffs[i][j] multiplies r^i z^j. */
struct Polynomial2 {
    std::vector<std::vector<double>> coeffs;

    double operator()(double r, double z) const {
        double s = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
            double inner = 0.0;
            for (auto jt = it->rbegin(); jt != it->rend(); ++jt) inner = inner * z + *jt;
            s = s * r + inner;
        }
        return s;
    }

    Polynomial2 d_r() const {
        Polynomial2 out;
        for (std::size_t i = 1; i < coeffs.size(); ++i) {
            std::vector<double> row = coeffs[i];
            for (double& a : row) a *= static_cast<double>(i);
            out.coeffs.push_back(std::move(row));
        }
        return out;
    }

    Polynomial2 d_z() const {
        Polynomial2 out;
        for (const auto& row : coeffs) {
            std::vector<double> d;
            for (std::size_t j = 1; j < row.size(); ++j) d.push_back(static_cast<double>(j) * row[j]);
            out.coeffs.push_back(std::move(d));
        }
        return out;
    }
};

} // namespace afp

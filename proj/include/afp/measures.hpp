#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "afp/errors.hpp"

namespace afp {

struct Atom {
    double location;
    double mass;
    bool operator==(const Atom&) const = default;
};

inline constexpr double kMergeDistance = 1e-12;

namespace detail {

// Sorts by location and merges atoms closer than kMergeDistance to the first
// atom of their run. Zero masses are dropped.
inline std::vector<Atom> canonical_atoms(std::vector<Atom> atoms) {
    std::erase_if(atoms, [](const Atom& a) { return a.mass == 0.0; });
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const Atom& a, const Atom& b) { return a.location < b.location; });
    std::vector<Atom> out;
    out.reserve(atoms.size());
    for (const Atom& a : atoms) {
        if (!out.empty() && a.location - out.back().location < kMergeDistance)
            out.back().mass += a.mass;
        else
            out.push_back(a);
    }
    return out;
}

inline void check_mass(const Atom& a) {
    if (!std::isfinite(a.mass) || a.mass < 0.0) {
        std::ostringstream os;
        os << "atom at " << a.location << " has invalid mass " << a.mass;
        throw InvalidParameter(os.str());
    }
}

} // namespace detail

/** Finite atomic measure on (0, inf), kept in canonical form. */
class AtomicMeasure {
public:
    AtomicMeasure() = default;
    AtomicMeasure(std::vector<Atom> atoms) {
        for (const Atom& a : atoms) {
            detail::check_mass(a);
            if (!std::isfinite(a.location) || a.location <= 0.0)
                throw InvalidParameter("atom location must be positive and finite, got " +
                                       std::to_string(a.location));
        }
        atoms_ = detail::canonical_atoms(std::move(atoms));
    }
    AtomicMeasure(std::initializer_list<Atom> atoms) : AtomicMeasure(std::vector<Atom>(atoms)) {}

    const std::vector<Atom>& atoms() const { return atoms_; }
    bool empty() const { return atoms_.empty(); }
    std::size_t size() const { return atoms_.size(); }

    double total_mass() const {
        double s = 0.0;
        for (const Atom& a : atoms_) s += a.mass;
        return s;
    }

    bool operator==(const AtomicMeasure&) const = default;

private:
    std::vector<Atom> atoms_;
};

/** Finite measure on [0,1): a point mass at 0 plus atoms inside (0,1). */
class MeasureOn01 {
public:
    MeasureOn01() = default;
    MeasureOn01(double mass_at_zero, std::vector<Atom> atoms) : mass_at_zero_(mass_at_zero) {
        if (!std::isfinite(mass_at_zero) || mass_at_zero < 0.0)
            throw InvalidParameter("mass at zero must be nonnegative");
        for (const Atom& a : atoms) {
            detail::check_mass(a);
            if (!(a.location > 0.0 && a.location < 1.0))
                throw InvalidParameter("atom location must lie in (0,1), got " + std::to_string(a.location));
        }
        atoms_ = detail::canonical_atoms(std::move(atoms));
    }

    double mass_at_zero() const { return mass_at_zero_; }
    const std::vector<Atom>& atoms() const { return atoms_; }

    double total_mass() const {
        double s = mass_at_zero_;
        for (const Atom& a : atoms_) s += a.mass;
        return s;
    }

    bool operator==(const MeasureOn01&) const = default;

private:
    double mass_at_zero_ = 0.0;
    std::vector<Atom> atoms_;
};

/** Interval with explicit endpoint inclusivity. */
struct Region {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    bool lo_closed = false;
    bool hi_closed = false;

    bool contains(double x) const {
        bool above = lo_closed ? x >= lo : x > lo;
        bool below = hi_closed ? x <= hi : x < hi;
        return above && below;
    }

    static Region positive() { return {0.0, std::numeric_limits<double>::infinity(), false, false}; }
    static Region nonnegative() { return {0.0, std::numeric_limits<double>::infinity(), true, false}; }
    static Region below_one() { return {0.0, 1.0, false, false}; }
    static Region from_one() { return {1.0, std::numeric_limits<double>::infinity(), true, false}; }
};

inline double tz_map(double w, double z) {
    if (!(z > 0.0)) throw InvalidParameter("z must be positive");
    if (!(w >= 0.0)) throw InvalidParameter("w must be nonnegative");
    if (std::isinf(w)) return 1.0;
    return w / (w + z);
}

inline double tz_inverse(double u, double z) {
    if (!(z > 0.0)) throw InvalidParameter("z must be positive");
    if (!(u >= 0.0 && u < 1.0)) throw InvalidParameter("u must lie in [0,1)");
    return u * z / (1.0 - u);
}

inline MeasureOn01 pushforward(const AtomicMeasure& m, double z) {
    std::vector<Atom> out;
    out.reserve(m.size());
    for (const Atom& a : m.atoms()) out.push_back({tz_map(a.location, z), a.mass});
    return MeasureOn01(0.0, std::move(out));
}

inline AtomicMeasure pullback(const MeasureOn01& m, double z) {
    if (m.mass_at_zero() != 0.0) throw InvalidParameter("pullback of a measure with an atom at 0");
    std::vector<Atom> out;
    out.reserve(m.atoms().size());
    for (const Atom& a : m.atoms()) out.push_back({tz_inverse(a.location, z), a.mass});
    return AtomicMeasure(std::move(out));
}

namespace detail {

template <class F>
double checked_term(const F& f, double x, double mass) {
    double y = f(x);
    if (!std::isfinite(y)) {
        std::ostringstream os;
        os << "integrand is not finite at atom " << x;
        throw EvaluationError(os.str(), x);
    }
    return mass * y;
}

} // namespace detail

template <class F>
double integrate(const AtomicMeasure& m, const F& f, const Region& region = Region::positive()) {
    double s = 0.0;
    for (const Atom& a : m.atoms())
        if (region.contains(a.location)) s += detail::checked_term(f, a.location, a.mass);
    return s;
}

template <class F>
double integrate(const MeasureOn01& m, const F& f, const Region& region = Region::nonnegative()) {
    double s = 0.0;
    if (m.mass_at_zero() > 0.0 && region.contains(0.0)) s += detail::checked_term(f, 0.0, m.mass_at_zero());
    for (const Atom& a : m.atoms())
        if (region.contains(a.location)) s += detail::checked_term(f, a.location, a.mass);
    return s;
}

} // namespace afp

#pragma once

#include "afp/mechanisms.hpp"
#include "afp/rng.hpp"

namespace afp {

/**
 * Pure-jump pair: type i jumps by w_i at rate v_i per unit mass, with w_i
 * chosen so that the frequency jump at level z is y_i.
 */
inline PopulationModel two_atom_model(double z = 10.0, double v1 = 1.0, double v2 = 1.2, double y1 = 0.3,
                                      double y2 = 0.3) {
    PopulationModel m;
    m.z = z;
    m.mech1.m = AtomicMeasure{{y1 * z / (1.0 - y1), v1}};
    m.mech2.m = AtomicMeasure{{y2 * z / (1.0 - y2), v2}};
    return m;
}

/** Same jump sizes w_i for any z. */
inline PopulationModel two_atom_model_fixed_w(double z, double w, double v1, double v2) {
    PopulationModel m;
    m.z = z;
    m.mech1.m = AtomicMeasure{{w, v1}};
    m.mech2.m = AtomicMeasure{{w, v2}};
    return m;
}

inline AtomicMeasure random_measure(Stream& rng, int max_atoms, double max_mass) {
    std::vector<Atom> atoms;
    int k = static_cast<int>(rng.uniform() * (max_atoms + 1));
    for (int i = 0; i < k; ++i) {
        // Mix small (compensated) and large jumps.
        double w = rng.uniform() < 0.5 ? 0.02 + 0.95 * rng.uniform() : 1.0 + 4.0 * rng.uniform();
        atoms.push_back({w, max_mass * rng.uniform()});
    }
    return AtomicMeasure(std::move(atoms));
}

inline BranchingMechanism random_mechanism(Stream& rng) {
    BranchingMechanism m;
    m.b = 2.0 * rng.uniform() - 1.0;
    m.c = rng.uniform() < 0.7 ? rng.uniform() : 0.0;
    m.m = random_measure(rng, 3, 2.0);
    return m;
}

inline ImmigrationMechanism random_immigration(Stream& rng) {
    ImmigrationMechanism im;
    if (rng.uniform() < 0.5) im.eta = rng.uniform();
    if (rng.uniform() < 0.5) im.nu = random_measure(rng, 2, 1.0);
    return im;
}

inline PopulationModel random_model(Stream& rng) {
    PopulationModel m;
    m.mech1 = random_mechanism(rng);
    m.mech2 = random_mechanism(rng);
    m.imm1 = random_immigration(rng);
    m.imm2 = random_immigration(rng);
    m.z = 0.5 + 19.5 * rng.uniform();
    return m;
}

} // namespace afp

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "afp/mechanisms.hpp"

namespace afp {

using json = nlohmann::json;

inline void to_json(json& j, const AtomicMeasure& m) {
    json atoms = json::array();
    for (const Atom& a : m.atoms()) atoms.push_back({a.location, a.mass});
    j = json{{"atoms", atoms}};
}

namespace detail {

inline std::vector<Atom> atoms_from_json(const json& j) {
    std::vector<Atom> out;
    if (j.is_object() && !j.contains("atoms")) return out;
    if (!j.is_object() && !j.is_array()) throw InvalidConfig("measure must be an object or an array of atoms");
    for (const auto& a : j.is_array() ? j : j.at("atoms")) {
        if (!a.is_array() || a.size() != 2) throw InvalidConfig("atoms must be [location, mass] pairs");
        out.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return out;
}

} // namespace detail

inline void from_json(const json& j, AtomicMeasure& m) { m = AtomicMeasure(detail::atoms_from_json(j)); }

inline void to_json(json& j, const MeasureOn01& m) {
    json atoms = json::array();
    for (const Atom& a : m.atoms()) atoms.push_back({a.location, a.mass});
    j = json{{"mass_at_zero", m.mass_at_zero()}, {"atoms", atoms}};
}

inline void from_json(const json& j, MeasureOn01& m) {
    m = MeasureOn01(j.value("mass_at_zero", 0.0), detail::atoms_from_json(j));
}

inline void to_json(json& j, const BranchingMechanism& m) { j = json{{"b", m.b}, {"c", m.c}, {"m", m.m}}; }

inline void from_json(const json& j, BranchingMechanism& m) {
    m.b = j.value("b", 0.0);
    m.c = j.value("c", 0.0);
    m.m = j.contains("m") ? j.at("m").get<AtomicMeasure>() : AtomicMeasure{};
    m.validate();
}

inline void to_json(json& j, const ImmigrationMechanism& m) { j = json{{"eta", m.eta}, {"nu", m.nu}}; }

inline void from_json(const json& j, ImmigrationMechanism& m) {
    m.eta = j.value("eta", 0.0);
    m.nu = j.contains("nu") ? j.at("nu").get<AtomicMeasure>() : AtomicMeasure{};
    m.validate();
}

inline void to_json(json& j, const PopulationModel& m) {
    j = json{{"mech1", m.mech1}, {"mech2", m.mech2}, {"imm1", m.imm1}, {"imm2", m.imm2}, {"z", m.z}};
}

inline void from_json(const json& j, PopulationModel& m) {
    if (!j.contains("mech1") || !j.contains("mech2") || !j.contains("z"))
        throw InvalidConfig("model needs mech1, mech2 and z");
    m.mech1 = j.at("mech1").get<BranchingMechanism>();
    m.mech2 = j.at("mech2").get<BranchingMechanism>();
    m.imm1 = j.contains("imm1") ? j.at("imm1").get<ImmigrationMechanism>() : ImmigrationMechanism{};
    m.imm2 = j.contains("imm2") ? j.at("imm2").get<ImmigrationMechanism>() : ImmigrationMechanism{};
    m.z = j.at("z").get<double>();
    m.validate();
}

/** FNV-1a hash of the canonical JSON text, as 16 hex digits. */
inline std::string digest(const json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidConfig("cannot parse " + path + ": " + e.what());
    }
}

/** Writes via a temporary file in the same directory and renames it into place. */
inline void write_atomically(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InvalidConfig("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw InvalidConfig("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw InvalidConfig("cannot rename into " + path + ": " + ec.message());
}

inline std::string fmt_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace afp

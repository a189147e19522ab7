#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "polyspread/atomic_measure.hpp"
#include "polyspread/bordered.hpp"
#include "polyspread/configuration.hpp"
#include "polyspread/errors.hpp"
#include "polyspread/rstar_polymorphism.hpp"

namespace polyspread {

// ---------------------------------------------------------------------------
// Deterministic JSON emission. Numbers are printed with 17 significant
// digits, which round-trips doubles exactly and keeps re-emission byte-stable.

inline std::string json_num(double x) {
    if (!std::isfinite(x)) return "null";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string json_num(int x) { return std::to_string(x); }
inline std::string json_num(std::size_t x) { return std::to_string(x); }

inline std::string json_str(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

inline std::string json_bool(bool b) { return b ? "true" : "false"; }

inline std::string json_arr(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += items[i];
    }
    return out + "]";
}

inline std::string json_obj(
    const std::vector<std::pair<std::string, std::string>>& fields) {
    std::string out = "{";
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += json_str(fields[i].first) + ":" + fields[i].second;
    }
    return out + "}";
}

inline std::string emit_measure(const AtomicMeasure& m) {
    std::vector<std::string> atoms;
    atoms.reserve(m.size());
    for (const Atom& a : m.atoms())
        atoms.push_back(json_arr({json_num(a.position), json_num(a.mass)}));
    return json_arr(atoms);
}

inline std::string emit_masses(const std::vector<double>& v) {
    std::vector<std::string> items;
    items.reserve(v.size());
    for (double x : v) items.push_back(json_num(x));
    return json_arr(items);
}

inline std::string emit_policy(const TruncationPolicy& p) {
    return json_obj({{"max_multiplicity", json_num(p.max_multiplicity)},
                     {"tail_mass", json_num(p.tail_mass)},
                     {"series_tail", json_num(p.series_tail)},
                     {"max_atoms", json_num(p.max_atoms)}});
}

// ---------------------------------------------------------------------------
// Instance files

struct Instance {
    enum class Kind { measure, rstar, bordered };
    Kind kind = Kind::measure;
    AtomicMeasure measure;
    RStarPolymorphism rstar;
    VPolymorphism bordered;
    TruncationPolicy policy;
    bool has_policy = false;
};

inline std::string emit_instance(const Instance& inst) {
    std::vector<std::pair<std::string, std::string>> fields;
    switch (inst.kind) {
        case Instance::Kind::measure:
            fields.emplace_back("kind", json_str("measure"));
            fields.emplace_back("atoms", emit_measure(inst.measure));
            break;
        case Instance::Kind::rstar: {
            fields.emplace_back("kind", json_str("rstar"));
            fields.emplace_back("source", emit_masses(inst.rstar.source.masses));
            fields.emplace_back("target", emit_masses(inst.rstar.target.masses));
            std::vector<std::string> rows;
            for (const auto& row : inst.rstar.entries) {
                std::vector<std::string> cells;
                for (const AtomicMeasure& m : row) cells.push_back(emit_measure(m));
                rows.push_back(json_arr(cells));
            }
            fields.emplace_back("entries", json_arr(rows));
            break;
        }
        case Instance::Kind::bordered: {
            fields.emplace_back("kind", json_str("bordered"));
            fields.emplace_back("source_masses",
                                emit_masses(inst.bordered.source.finite_masses));
            fields.emplace_back("target_masses",
                                emit_masses(inst.bordered.target.finite_masses));
            std::vector<std::string> rows;
            for (const auto& row : inst.bordered.fin_fin) {
                std::vector<std::string> cells;
                for (const AtomicMeasure& m : row) cells.push_back(emit_measure(m));
                rows.push_back(json_arr(cells));
            }
            fields.emplace_back("fin_fin", json_arr(rows));
            std::vector<std::string> fi, if_;
            for (const AtomicMeasure& m : inst.bordered.fin_inf)
                fi.push_back(emit_measure(m));
            for (const AtomicMeasure& m : inst.bordered.inf_fin)
                if_.push_back(emit_measure(m));
            fields.emplace_back("fin_inf", json_arr(fi));
            fields.emplace_back("inf_fin", json_arr(if_));
            fields.emplace_back("inf_inf", emit_measure(inst.bordered.inf_inf));
            break;
        }
    }
    if (inst.has_policy) fields.emplace_back("policy", emit_policy(inst.policy));
    return json_obj(fields) + "\n";
}

inline AtomicMeasure parse_measure_literal(const nlohmann::json& j) {
    if (!j.is_array()) throw SchemaError("measure literal must be an array");
    std::vector<Atom> atoms;
    atoms.reserve(j.size());
    for (const auto& pair : j) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
            !pair[1].is_number())
            throw SchemaError("measure atom must be a [position, mass] pair");
        atoms.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
    try {
        return canonicalize(std::move(atoms));
    } catch (const std::domain_error& e) {
        throw SchemaError(std::string("bad measure literal: ") + e.what());
    }
}

inline std::vector<double> parse_masses(const nlohmann::json& j,
                                        const char* what) {
    if (!j.is_array())
        throw SchemaError(std::string(what) + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number())
            throw SchemaError(std::string(what) + " must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline TruncationPolicy parse_policy(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("policy must be an object");
    TruncationPolicy p;
    if (j.contains("max_multiplicity")) {
        if (!j["max_multiplicity"].is_number_integer())
            throw SchemaError("max_multiplicity must be an integer");
        p.max_multiplicity = j["max_multiplicity"].get<int>();
    }
    if (j.contains("tail_mass")) p.tail_mass = j["tail_mass"].get<double>();
    if (j.contains("series_tail")) p.series_tail = j["series_tail"].get<double>();
    if (j.contains("max_atoms")) {
        if (!j["max_atoms"].is_number_unsigned() &&
            !j["max_atoms"].is_number_integer())
            throw SchemaError("max_atoms must be an integer");
        const long long v = j["max_atoms"].get<long long>();
        if (v <= 0) throw SchemaError("max_atoms must be positive");
        p.max_atoms = static_cast<std::size_t>(v);
    }
    try {
        check_policy(p);
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("bad policy: ") + e.what());
    }
    return p;
}

inline Instance parse_instance_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw SchemaError("instance must be an object with a \"kind\" string");
    Instance inst;
    const std::string kind = j["kind"].get<std::string>();
    try {
        if (kind == "measure") {
            inst.kind = Instance::Kind::measure;
            if (!j.contains("atoms")) throw SchemaError("measure needs \"atoms\"");
            inst.measure = parse_measure_literal(j["atoms"]);
        } else if (kind == "rstar") {
            inst.kind = Instance::Kind::rstar;
            for (const char* k : {"source", "target", "entries"})
                if (!j.contains(k))
                    throw SchemaError(std::string("rstar needs \"") + k + "\"");
            inst.rstar.source.masses = parse_masses(j["source"], "source");
            inst.rstar.target.masses = parse_masses(j["target"], "target");
            if (!j["entries"].is_array())
                throw SchemaError("entries must be a matrix of measure literals");
            for (const auto& row : j["entries"]) {
                if (!row.is_array())
                    throw SchemaError("entries must be a matrix of measure literals");
                std::vector<AtomicMeasure> r;
                for (const auto& cell : row) r.push_back(parse_measure_literal(cell));
                inst.rstar.entries.push_back(std::move(r));
            }
            check_shape(inst.rstar);
        } else if (kind == "bordered") {
            inst.kind = Instance::Kind::bordered;
            for (const char* k : {"source_masses", "target_masses", "fin_fin",
                                  "fin_inf", "inf_fin", "inf_inf"})
                if (!j.contains(k))
                    throw SchemaError(std::string("bordered needs \"") + k + "\"");
            inst.bordered.source.finite_masses =
                parse_masses(j["source_masses"], "source_masses");
            inst.bordered.target.finite_masses =
                parse_masses(j["target_masses"], "target_masses");
            if (!j["fin_fin"].is_array())
                throw SchemaError("fin_fin must be a matrix of measure literals");
            for (const auto& row : j["fin_fin"]) {
                if (!row.is_array())
                    throw SchemaError("fin_fin must be a matrix of measure literals");
                std::vector<AtomicMeasure> r;
                for (const auto& cell : row) r.push_back(parse_measure_literal(cell));
                inst.bordered.fin_fin.push_back(std::move(r));
            }
            for (const auto& cell : j["fin_inf"])
                inst.bordered.fin_inf.push_back(parse_measure_literal(cell));
            for (const auto& cell : j["inf_fin"])
                inst.bordered.inf_fin.push_back(parse_measure_literal(cell));
            inst.bordered.inf_inf = parse_measure_literal(j["inf_inf"]);
            check_shape(inst.bordered);
        } else {
            throw SchemaError("unknown kind \"" + kind + "\"");
        }
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("bad instance: ") + e.what());
    }
    if (j.contains("policy")) {
        inst.policy = parse_policy(j["policy"]);
        inst.has_policy = true;
    }
    return inst;
}

inline Instance parse_instance(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("invalid JSON: ") + e.what());
    }
    return parse_instance_json(j);
}

inline Instance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_instance(ss.str());
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path);
    out << text;
}

}  // namespace polyspread

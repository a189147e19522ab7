// Batch front door: parse instance files, run validation, composition,
// coarsening, the configuration-space functor, verification suites, and
// Monte Carlo checks; emit machine-readable JSON reports.
//
// Exit codes: 0 pass, 2 validation failure, 3 tolerance failure,
// 4 truncation insufficiency, 5 schema error.

#include <CLI11.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "polyspread/bordered.hpp"
#include "polyspread/configuration.hpp"
#include "polyspread/errors.hpp"
#include "polyspread/io.hpp"
#include "polyspread/mc_sampler.hpp"
#include "polyspread/mellin_oracle.hpp"
#include "polyspread/omega.hpp"
#include "polyspread/rstar_polymorphism.hpp"

using namespace polyspread;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitValidation = 2;
constexpr int kExitTolerance = 3;
constexpr int kExitTruncation = 4;
constexpr int kExitSchema = 5;

struct CommonFlags {
    double tol = kDefaultMarginalTol;
    int cap = 5;
    double tail = 1e-6;
    double series_tail = 1e-9;
    std::string grid_spec;
    std::uint64_t seed = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--tol", f.tol, "acceptance tolerance for residuals");
    cmd->add_option("--cap", f.cap, "multiplicity cap for configuration boxes");
    cmd->add_option("--tail", f.tail, "allowed Poisson tail outside the box");
    cmd->add_option("--series-tail", f.series_tail,
                    "allowed truncation tail of exponential series");
    cmd->add_option("--mellin-grid", f.grid_spec,
                    "comma-separated exponents, e.g. 0,1,i,-i,2i,-2i,1+i,1-i");
    cmd->add_option("--seed", f.seed, "seed for randomized suites");
}

TruncationPolicy policy_from(const Instance& inst, const CommonFlags& f,
                             const CLI::App* cmd) {
    TruncationPolicy p = inst.has_policy ? inst.policy : TruncationPolicy{};
    if (cmd->count("--cap")) p.max_multiplicity = f.cap;
    if (cmd->count("--tail")) p.tail_mass = f.tail;
    if (cmd->count("--series-tail")) p.series_tail = f.series_tail;
    if (!inst.has_policy && !cmd->count("--cap")) p.max_multiplicity = f.cap;
    if (!inst.has_policy && !cmd->count("--tail")) p.tail_mass = f.tail;
    if (!inst.has_policy && !cmd->count("--series-tail"))
        p.series_tail = f.series_tail;
    try {
        check_policy(p);
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("bad policy: ") + e.what());
    }
    return p;
}

std::complex<double> parse_complex(std::string s) {
    auto fail = [&] { throw SchemaError("cannot parse exponent \"" + s + "\""); };
    if (s.empty()) fail();
    // forms: a, bi, a+bi, a-bi, i, -i
    double re = 0.0, im = 0.0;
    std::size_t split = std::string::npos;
    for (std::size_t k = 1; k < s.size(); ++k)
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E')
            split = k;
    try {
        if (s.back() == 'i') {
            std::string re_part, im_part;
            if (split == std::string::npos) {
                im_part = s.substr(0, s.size() - 1);
            } else {
                re_part = s.substr(0, split);
                im_part = s.substr(split, s.size() - split - 1);
            }
            if (im_part.empty() || im_part == "+")
                im = 1.0;
            else if (im_part == "-")
                im = -1.0;
            else
                im = std::stod(im_part);
            if (!re_part.empty()) re = std::stod(re_part);
        } else {
            re = std::stod(s);
        }
    } catch (const std::exception&) {
        fail();
    }
    return {re, im};
}

std::vector<std::complex<double>> grid_from(const CommonFlags& f) {
    if (f.grid_spec.empty()) return default_mellin_grid();
    std::vector<std::complex<double>> grid;
    std::string cur;
    for (char c : f.grid_spec + ",") {
        if (c == ',') {
            if (!cur.empty()) grid.push_back(parse_complex(cur));
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (grid.empty()) throw SchemaError("empty Mellin grid");
    return grid;
}

std::string grid_json(const std::vector<std::complex<double>>& grid) {
    std::vector<std::string> items;
    for (auto s : grid)
        items.push_back(json_arr({json_num(s.real()), json_num(s.imag())}));
    return json_arr(items);
}

std::string defaults_json(const CommonFlags& f, const TruncationPolicy& p) {
    return json_obj({{"tol", json_num(f.tol)},
                     {"max_multiplicity", json_num(p.max_multiplicity)},
                     {"tail_mass", json_num(p.tail_mass)},
                     {"series_tail", json_num(p.series_tail)},
                     {"mellin_grid", grid_json(grid_from(f))},
                     {"seed", json_num(f.seed)}});
}

void emit_report(const std::string& body, const std::string& out_path) {
    if (out_path.empty())
        std::cout << body << "\n";
    else
        write_text(out_path, body + "\n");
}

std::string config_json(const Configuration& c) {
    std::vector<std::string> xs;
    for (int x : c.multiplicities) xs.push_back(json_num(x));
    return json_arr(xs);
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& path, const CommonFlags& f,
                 const CLI::App* cmd, const std::string& out) {
    const Instance inst = load_instance(path);
    const TruncationPolicy policy = policy_from(inst, f, cmd);
    std::vector<std::pair<std::string, std::string>> fields;
    fields.emplace_back("command", json_str("validate"));
    fields.emplace_back("input", json_str(path));
    bool accepted = true;
    if (inst.kind == Instance::Kind::measure) {
        fields.emplace_back("kind", json_str("measure"));
        fields.emplace_back("atoms", json_num(inst.measure.size()));
        fields.emplace_back("total_mass", json_num(inst.measure.total_mass()));
        fields.emplace_back("first_moment",
                            json_num(inst.measure.first_moment()));
        fields.emplace_back("abs_dev_mass",
                            json_num(inst.measure.abs_dev_mass()));
    } else if (inst.kind == Instance::Kind::rstar) {
        const MarginalReport rep = validate(inst.rstar, f.tol);
        fields.emplace_back("kind", json_str("rstar"));
        fields.emplace_back("max_row_residual", json_num(rep.max_row_residual));
        fields.emplace_back("max_col_residual", json_num(rep.max_col_residual));
        accepted = rep.accepted;
    } else {
        const MarginalReport rep = validate_v(inst.bordered, f.tol);
        fields.emplace_back("kind", json_str("bordered"));
        fields.emplace_back("max_row_residual", json_num(rep.max_row_residual));
        fields.emplace_back("max_col_residual", json_num(rep.max_col_residual));
        accepted = rep.accepted;
    }
    fields.emplace_back("accepted", json_bool(accepted));
    fields.emplace_back("defaults", defaults_json(f, policy));
    emit_report(json_obj(fields), out);
    return accepted ? kExitPass : kExitValidation;
}

int cmd_compose(const std::string& path_q, const std::string& path_p,
                const std::string& out) {
    const Instance q = load_instance(path_q);
    const Instance p = load_instance(path_p);
    if (q.kind != p.kind || q.kind == Instance::Kind::measure)
        throw SchemaError("compose expects two kernel instances of one kind");
    Instance r;
    r.kind = q.kind;
    try {
        if (q.kind == Instance::Kind::rstar)
            r.rstar = compose(q.rstar, p.rstar);
        else
            r.bordered = compose_v(q.bordered, p.bordered);
    } catch (const std::invalid_argument& e) {
        std::cout << json_obj({{"error",
                                json_obj({{"code", json_num(kExitValidation)},
                                          {"kind", json_str("validation")},
                                          {"message", json_str(e.what())}})}})
                  << "\n";
        return kExitValidation;
    }
    const std::string text = emit_instance(r);
    if (out.empty())
        std::cout << text;
    else
        write_text(out, text);
    return kExitPass;
}

Partition parse_groups(const std::string& spec, std::size_t expected) {
    std::vector<std::size_t> groups;
    std::string cur;
    for (char c : spec + ",") {
        if (c == ',') {
            if (cur.empty()) continue;
            try {
                const long v = std::stol(cur);
                if (v < 0) throw SchemaError("group labels must be >= 0");
                groups.push_back(static_cast<std::size_t>(v));
            } catch (const std::exception&) {
                throw SchemaError("cannot parse group spec \"" + spec + "\"");
            }
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (groups.size() != expected)
        throw SchemaError("group spec length does not match the space");
    try {
        return make_partition(groups);
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("bad partition: ") + e.what());
    }
}

int cmd_coarsen(const std::string& path, const std::string& source_spec,
                const std::string& target_spec, const std::string& out) {
    const Instance inst = load_instance(path);
    Instance r;
    r.kind = inst.kind;
    if (inst.kind == Instance::Kind::rstar) {
        const Partition s = parse_groups(source_spec, inst.rstar.rows());
        const Partition t = parse_groups(target_spec, inst.rstar.cols());
        r.rstar = coarsen(inst.rstar, s, t);
    } else if (inst.kind == Instance::Kind::bordered) {
        const Partition s = parse_groups(source_spec, inst.bordered.rows());
        const Partition t = parse_groups(target_spec, inst.bordered.cols());
        r.bordered = coarsen_v(inst.bordered, s, t);
    } else {
        throw SchemaError("coarsen expects a kernel instance");
    }
    const std::string text = emit_instance(r);
    if (out.empty())
        std::cout << text;
    else
        write_text(out, text);
    return kExitPass;
}

int cmd_omega(const std::string& path, const CommonFlags& f, const CLI::App* cmd,
              const std::string& out, const std::string& csv) {
    const Instance inst = load_instance(path);
    if (inst.kind != Instance::Kind::bordered)
        throw SchemaError("omega expects a bordered instance");
    const TruncationPolicy policy = policy_from(inst, f, cmd);
    const OmegaMatrix w = omega(inst.bordered, policy);

    std::vector<std::string> src_cfg, tgt_cfg, rows;
    for (const Configuration& c : w.source_configs)
        src_cfg.push_back(config_json(c));
    for (const Configuration& c : w.target_configs)
        tgt_cfg.push_back(config_json(c));
    for (const auto& row : w.poly.entries) {
        std::vector<std::string> cells;
        for (const AtomicMeasure& e : row) cells.push_back(emit_measure(e));
        rows.push_back(json_arr(cells));
    }
    const std::string cert = json_obj(
        {{"source_box_tail", json_num(w.source_box_tail)},
         {"target_box_tail", json_num(w.target_box_tail)},
         {"row_tail_bound", json_num(w.row_tail_bound)},
         {"col_tail_bound", json_num(w.col_tail_bound)}});
    const MarginalReport rep = validate(w.poly, 1.0);
    const std::string body = json_obj(
        {{"command", json_str("omega")},
         {"input", json_str(path)},
         {"source_configs", json_arr(src_cfg)},
         {"target_configs", json_arr(tgt_cfg)},
         {"source_masses", emit_masses(w.poly.source.masses)},
         {"target_masses", emit_masses(w.poly.target.masses)},
         {"entries", json_arr(rows)},
         {"max_row_residual", json_num(rep.max_row_residual)},
         {"max_col_residual", json_num(rep.max_col_residual)},
         {"certificate", cert},
         {"defaults", defaults_json(f, policy)}});
    emit_report(body, out);

    if (!csv.empty()) {
        std::string lines = "phi,psi,position,mass\n";
        for (std::size_t a = 0; a < w.source_configs.size(); ++a)
            for (std::size_t b = 0; b < w.target_configs.size(); ++b)
                for (const Atom& at : w.poly.entries[a][b].atoms()) {
                    std::string phi, psi;
                    for (std::size_t k = 0; k < w.source_configs[a].size(); ++k)
                        phi += (k ? " " : "") +
                               std::to_string(w.source_configs[a].multiplicities[k]);
                    for (std::size_t k = 0; k < w.target_configs[b].size(); ++k)
                        psi += (k ? " " : "") +
                               std::to_string(w.target_configs[b].multiplicities[k]);
                    lines += "\"" + phi + "\",\"" + psi + "\"," +
                             json_num(at.position) + "," + json_num(at.mass) + "\n";
                }
        write_text(csv, lines);
    }
    const bool ok = rep.max_row_residual <= 10 * std::max(w.row_tail_bound, 1e-12) &&
                    rep.max_col_residual <= 10 * std::max(w.col_tail_bound, 1e-12);
    return ok ? kExitPass : kExitTolerance;
}

// --------------------------- verification suites ---------------------------

struct SuiteResult {
    bool pass = true;
    double worst = 0.0;
    std::vector<std::pair<std::string, std::string>> details;
};

std::vector<AtomicMeasure> measure_pool(const Instance& inst) {
    std::vector<AtomicMeasure> pool;
    auto take = [&](const AtomicMeasure& m) {
        if (!m.empty()) pool.push_back(m);
    };
    switch (inst.kind) {
        case Instance::Kind::measure:
            take(inst.measure);
            break;
        case Instance::Kind::rstar:
            for (const auto& row : inst.rstar.entries)
                for (const auto& e : row) take(e);
            break;
        case Instance::Kind::bordered:
            for (const auto& row : inst.bordered.fin_fin)
                for (const auto& e : row) take(e);
            for (const auto& e : inst.bordered.fin_inf) take(e);
            for (const auto& e : inst.bordered.inf_fin) take(e);
            take(inst.bordered.inf_inf);
            break;
    }
    return pool;
}

AtomicMeasure random_pool_measure(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> pos(-1.2, 1.2), mass(0.05, 1.0);
    std::uniform_int_distribution<int> n(1, 3);
    std::vector<Atom> atoms;
    const int k = n(gen);
    for (int i = 0; i < k; ++i)
        atoms.push_back({std::exp(pos(gen)), mass(gen)});
    return canonicalize(atoms);
}

SuiteResult suite_semiring(const Instance& inst, double tol, std::uint64_t seed) {
    SuiteResult r;
    std::vector<AtomicMeasure> pool = measure_pool(inst);
    std::mt19937_64 gen(seed);
    while (pool.size() < 12) pool.push_back(random_pool_measure(gen));
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int trial = 0; trial < 200; ++trial) {
        const AtomicMeasure& u = pool[pick(gen)];
        const AtomicMeasure& v = pool[pick(gen)];
        const AtomicMeasure& w = pool[pick(gen)];
        r.worst = std::max(r.worst,
                           measure_distance(convolve(u, v), convolve(v, u)).value);
        r.worst = std::max(r.worst, measure_distance(convolve(convolve(u, v), w),
                                                     convolve(u, convolve(v, w)))
                                        .value);
        r.worst = std::max(
            r.worst, measure_distance(convolve(u, add(v, w)),
                                      add(convolve(u, v), convolve(u, w)))
                         .value);
        r.worst = std::max(
            r.worst, measure_distance(convolve(u, delta(1.0, 1.0)), u).value);
    }
    r.pass = r.worst <= tol;
    r.details.emplace_back("max_law_distance", json_num(r.worst));
    return r;
}

SuiteResult suite_assoc(const Instance& a, const Instance* b, double tol) {
    SuiteResult r;
    if (a.kind == Instance::Kind::rstar) {
        const RStarPolymorphism& p = a.rstar;
        const RStarPolymorphism& q = b ? b->rstar : a.rstar;
        const RStarPolymorphism left = compose(p, compose(q, p));
        const RStarPolymorphism right = compose(compose(p, q), p);
        for (std::size_t i = 0; i < left.rows(); ++i)
            for (std::size_t j = 0; j < left.cols(); ++j)
                r.worst = std::max(r.worst,
                                   measure_distance(left.entries[i][j],
                                                    right.entries[i][j])
                                       .value);
        const MarginalReport rep = validate(compose(q, p), tol);
        r.details.emplace_back("composed_row_residual",
                               json_num(rep.max_row_residual));
        r.details.emplace_back("composed_col_residual",
                               json_num(rep.max_col_residual));
        r.pass = r.worst <= tol && rep.accepted;
    } else if (a.kind == Instance::Kind::bordered) {
        const VPolymorphism& p = a.bordered;
        const VPolymorphism& q = b ? b->bordered : a.bordered;
        const VPolymorphism left = compose_v(p, compose_v(q, p));
        const VPolymorphism right = compose_v(compose_v(p, q), p);
        for (std::size_t i = 0; i < left.rows(); ++i)
            for (std::size_t j = 0; j < left.cols(); ++j)
                r.worst = std::max(r.worst,
                                   measure_distance(left.fin_fin[i][j],
                                                    right.fin_fin[i][j])
                                       .value);
        for (std::size_t i = 0; i < left.rows(); ++i)
            r.worst = std::max(
                r.worst,
                measure_distance(left.fin_inf[i], right.fin_inf[i]).value);
        for (std::size_t j = 0; j < left.cols(); ++j)
            r.worst = std::max(
                r.worst,
                measure_distance(left.inf_fin[j], right.inf_fin[j]).value);
        r.worst = std::max(r.worst,
                           measure_distance(left.inf_inf, right.inf_inf).value);
        const MarginalReport rep = validate_v(compose_v(q, p), tol);
        r.details.emplace_back("composed_row_residual",
                               json_num(rep.max_row_residual));
        r.details.emplace_back("composed_col_residual",
                               json_num(rep.max_col_residual));
        r.pass = r.worst <= tol && rep.accepted;
    } else {
        throw SchemaError("assoc suite expects kernel instances");
    }
    r.details.emplace_back("max_assoc_distance", json_num(r.worst));
    return r;
}

SuiteResult suite_mellin(const Instance& a, const Instance* b,
                         const std::vector<std::complex<double>>& grid,
                         double tol) {
    SuiteResult r;
    if (a.kind == Instance::Kind::rstar) {
        const RStarPolymorphism& p = a.rstar;
        const RStarPolymorphism& q = b ? b->rstar : a.rstar;
        const RStarPolymorphism comp = compose(q, p);
        for (const std::complex<double> s : grid) {
            if (s.real() < 0.0 || s.real() > 1.0) continue;
            const ComplexMatrix tp = t_operator(p, s), tq = t_operator(q, s),
                                tr = t_operator(comp, s);
            for (std::size_t i = 0; i < comp.rows(); ++i)
                for (std::size_t k = 0; k < comp.cols(); ++k) {
                    std::complex<double> expect = 0.0;
                    for (std::size_t j = 0; j < p.cols(); ++j)
                        expect += tp[i][j] * tq[j][k] / p.target.masses[j];
                    r.worst = std::max(r.worst, std::abs(tr[i][k] - expect));
                }
        }
    } else if (a.kind == Instance::Kind::bordered) {
        const VPolymorphism& p = a.bordered;
        const VPolymorphism& q = b ? b->bordered : a.bordered;
        const VPolymorphism comp = compose_v(q, p);
        for (const std::complex<double> s : grid) {
            if (s.real() < 0.0 || s.real() > 1.0) continue;
            const OperatorData direct = shadow_of_v(comp, s);
            const OperatorData composed = compose_shadows(
                shadow_of_v(q, s), shadow_of_v(p, s), p.target.finite_masses);
            for (std::size_t i = 0; i < direct.rows(); ++i)
                for (std::size_t j = 0; j < direct.cols(); ++j)
                    r.worst = std::max(
                        r.worst, std::abs(direct.a[i][j] - composed.a[i][j]));
            for (std::size_t i = 0; i < direct.rows(); ++i)
                r.worst =
                    std::max(r.worst, std::abs(direct.b[i] - composed.b[i]));
            for (std::size_t j = 0; j < direct.cols(); ++j)
                r.worst =
                    std::max(r.worst, std::abs(direct.c[j] - composed.c[j]));
            r.worst = std::max(r.worst,
                               std::abs(direct.prefactor - composed.prefactor));
        }
    } else {
        throw SchemaError("mellin suite expects kernel instances");
    }
    r.pass = r.worst <= tol;
    r.details.emplace_back("max_commutation_distance", json_num(r.worst));
    return r;
}

SuiteResult suite_degeneration(const Instance& a, const Instance* b) {
    if (a.kind != Instance::Kind::bordered)
        throw SchemaError("degeneration suite expects bordered instances");
    SuiteResult r;
    const VPolymorphism& p = a.bordered;
    const VPolymorphism& q = b ? b->bordered : a.bordered;
    const std::complex<double> s(0.5, 0.5);
    const double r2 = eps_degeneration_check(p, q, s, 1e-2);
    const double r3 = eps_degeneration_check(p, q, s, 1e-3);
    const double r4 = eps_degeneration_check(p, q, s, 1e-4);
    r.details.emplace_back("residual_1e-2", json_num(r2));
    r.details.emplace_back("residual_1e-3", json_num(r3));
    r.details.emplace_back("residual_1e-4", json_num(r4));
    r.worst = r3;
    r.pass = r3 <= 1e-2 * 1e-3 && r4 <= r2;
    if (r2 > 1e-13 && r4 > 1e-14) {
        const double slope = std::log(r2 / r4) / std::log(1e2);
        r.details.emplace_back("slope", json_num(slope));
        r.pass = r.pass && slope >= 1.0 / 3.0 && slope <= 3.0;
    }
    return r;
}

SuiteResult suite_functorial(const Instance& a, const Instance* b,
                             const TruncationPolicy& policy) {
    if (a.kind != Instance::Kind::bordered)
        throw SchemaError("functorial suite expects bordered instances");
    SuiteResult r;
    const VPolymorphism& p = a.bordered;
    const VPolymorphism& q = b ? b->bordered : a.bordered;
    const OmegaMatrix wp = omega(p, policy);
    const OmegaMatrix wq = omega(q, policy);
    const OmegaMatrix wr = omega(compose_v(q, p), policy);
    const RStarPolymorphism composed = compose(wq.poly, wp.poly);
    double worst_excess = 0.0;
    for (std::size_t i = 0; i < wr.source_configs.size(); ++i) {
        double row_in = 0.0;
        for (const auto& e : wp.poly.entries[i]) row_in += e.total_mass();
        const double row_deficit =
            std::max(wp.poly.source.masses[i] - row_in, 0.0);
        for (std::size_t j = 0; j < wr.target_configs.size(); ++j) {
            double col_in = 0.0;
            for (std::size_t mid = 0; mid < wq.source_configs.size(); ++mid)
                col_in += wq.poly.entries[mid][j].first_moment();
            const double col_deficit =
                std::max(wq.poly.target.masses[j] - col_in, 0.0);
            const double budget = row_deficit + col_deficit + 1e-8;
            const double d = measure_distance(composed.entries[i][j],
                                              wr.poly.entries[i][j])
                                 .value;
            r.worst = std::max(r.worst, d);
            worst_excess = std::max(worst_excess, d - budget);
        }
    }
    r.details.emplace_back("max_entry_distance", json_num(r.worst));
    r.details.emplace_back("worst_excess_over_budget", json_num(worst_excess));
    r.pass = worst_excess <= 0.0;
    return r;
}

int cmd_verify(const std::string& path, const std::string& path_q,
               const std::string& suite, const CommonFlags& f,
               const CLI::App* cmd, const std::string& out) {
    const Instance a = load_instance(path);
    Instance b_store;
    const Instance* b = nullptr;
    if (!path_q.empty()) {
        b_store = load_instance(path_q);
        if (b_store.kind != a.kind)
            throw SchemaError("verify expects instances of one kind");
        b = &b_store;
    }
    const TruncationPolicy policy = policy_from(a, f, cmd);
    const std::vector<std::complex<double>> grid = grid_from(f);

    SuiteResult res;
    double tol = f.tol;
    if (suite == "semiring") {
        if (!cmd->count("--tol")) tol = 1e-10;
        res = suite_semiring(a, tol, f.seed);
    } else if (suite == "assoc") {
        if (!cmd->count("--tol")) tol = 1e-9;
        res = suite_assoc(a, b, tol);
    } else if (suite == "mellin") {
        if (!cmd->count("--tol")) tol = 1e-10;
        res = suite_mellin(a, b, grid, tol);
    } else if (suite == "degeneration") {
        res = suite_degeneration(a, b);
    } else if (suite == "functorial") {
        res = suite_functorial(a, b, policy);
    } else {
        throw SchemaError("unknown suite \"" + suite + "\"");
    }

    std::vector<std::pair<std::string, std::string>> fields;
    fields.emplace_back("command", json_str("verify"));
    fields.emplace_back("suite", json_str(suite));
    fields.emplace_back("input", json_str(path));
    if (!path_q.empty()) fields.emplace_back("input_q", json_str(path_q));
    for (const auto& kv : res.details) fields.emplace_back(kv);
    fields.emplace_back("pass", json_bool(res.pass));
    fields.emplace_back("defaults", defaults_json(f, policy));
    emit_report(json_obj(fields), out);
    return res.pass ? kExitPass : kExitTolerance;
}

int cmd_mc_verify(const std::string& path, std::size_t samples,
                  const CommonFlags& f, const CLI::App* cmd,
                  const WeightBins& bins, const std::string& out) {
    const Instance inst = load_instance(path);
    if (inst.kind != Instance::Kind::bordered)
        throw SchemaError("mc-verify expects a bordered instance");
    const TruncationPolicy policy = policy_from(inst, f, cmd);
    const VPolymorphism& p = inst.bordered;
    const OmegaMatrix w = omega(p, policy);
    RoutingSampler sampler(p);
    SampleRng rng({f.seed, 0});
    std::vector<RoutingSample> draws;
    draws.reserve(samples);
    for (std::size_t k = 0; k < samples; ++k) draws.push_back(sampler.draw(rng));

    bool pass = true;
    std::vector<std::string> cells;
    const double n = static_cast<double>(samples);
    for (std::size_t a = 0; a < w.source_configs.size(); ++a)
        for (std::size_t b = 0; b < w.target_configs.size(); ++b) {
            const std::vector<double> analytic =
                analytic_bin_masses(w.poly.entries[a][b], bins);
            const BinnedMeasure emp = empirical_entry(
                draws, w.source_configs[a], w.target_configs[b], bins);
            for (std::size_t bin = 0; bin < analytic.size(); ++bin) {
                if (analytic[bin] < 1e-4) continue;
                const double sigma =
                    std::sqrt(analytic[bin] * (1.0 - analytic[bin]) / n);
                const double z = (emp.mass[bin] - analytic[bin]) / sigma;
                if (std::abs(z) > 4.0) pass = false;
                const auto [lo, hi] = bins.edges(bin);
                cells.push_back(json_obj(
                    {{"phi", config_json(w.source_configs[a])},
                     {"psi", config_json(w.target_configs[b])},
                     {"bin", json_arr({json_num(lo), json_num(hi)})},
                     {"analytic", json_num(analytic[bin])},
                     {"empirical", json_num(emp.mass[bin])},
                     {"sigma", json_num(sigma)},
                     {"z", json_num(z)}}));
            }
        }

    std::vector<std::string> marginals;
    for (std::size_t a = 0; a < w.source_configs.size(); ++a) {
        const double pm = poisson_mass(p.source, w.source_configs[a]);
        if (pm < 1e-4) continue;
        std::size_t count = 0;
        for (const RoutingSample& s : draws)
            if (s.source_config == w.source_configs[a]) ++count;
        const double sigma = std::sqrt(pm * (1.0 - pm) / n);
        const double z = (static_cast<double>(count) / n - pm) / sigma;
        if (std::abs(z) > 4.0) pass = false;
        marginals.push_back(json_obj({{"side", json_str("source")},
                                      {"config", config_json(w.source_configs[a])},
                                      {"poisson", json_num(pm)},
                                      {"empirical", json_num(count / n)},
                                      {"z", json_num(z)}}));
    }
    for (std::size_t b = 0; b < w.target_configs.size(); ++b) {
        const double pm = poisson_mass(p.target, w.target_configs[b]);
        if (pm < 1e-4) continue;
        double sum = 0.0, sumsq = 0.0;
        for (const RoutingSample& s : draws) {
            const double x =
                s.target_config == w.target_configs[b] ? s.weight : 0.0;
            sum += x;
            sumsq += x * x;
        }
        const double mean = sum / n;
        const double var = std::max(sumsq / n - mean * mean, 0.0);
        const double sigma = std::sqrt(var / n) + 1e-300;
        const double z = (mean - pm) / sigma;
        if (std::abs(z) > 4.0) pass = false;
        marginals.push_back(json_obj({{"side", json_str("target_weighted")},
                                      {"config", config_json(w.target_configs[b])},
                                      {"poisson", json_num(pm)},
                                      {"empirical", json_num(mean)},
                                      {"z", json_num(z)}}));
    }

    const std::string body = json_obj(
        {{"command", json_str("mc-verify")},
         {"input", json_str(path)},
         {"samples", json_num(samples)},
         {"seed", json_num(f.seed)},
         {"cells", json_arr(cells)},
         {"marginals", json_arr(marginals)},
         {"pass", json_bool(pass)},
         {"defaults", defaults_json(f, policy)}});
    emit_report(body, out);
    return pass ? kExitPass : kExitTolerance;
}

int error_object(int code, const char* kind, const std::string& message) {
    std::cout << json_obj({{"error", json_obj({{"code", json_num(code)},
                                               {"kind", json_str(kind)},
                                               {"message", json_str(message)}})}})
              << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"algebra of measure-valued spreading maps"};
    app.require_subcommand(1);

    CommonFlags f;
    std::string path, path_q, out, csv, suite, source_groups, target_groups;
    std::size_t samples = 1000000;
    WeightBins bins;

    CLI::App* validate_cmd = app.add_subcommand("validate", "check marginal laws");
    validate_cmd->add_option("path", path)->required();
    validate_cmd->add_option("--out", out);
    add_common(validate_cmd, f);

    CLI::App* compose_cmd =
        app.add_subcommand("compose", "compose two kernels, second applied first");
    compose_cmd->add_option("path_q", path_q)->required();
    compose_cmd->add_option("path_p", path)->required();
    compose_cmd->add_option("--out", out);
    add_common(compose_cmd, f);

    CLI::App* coarsen_cmd = app.add_subcommand("coarsen", "group points");
    coarsen_cmd->add_option("path", path)->required();
    coarsen_cmd->add_option("--source-groups", source_groups)->required();
    coarsen_cmd->add_option("--target-groups", target_groups)->required();
    coarsen_cmd->add_option("--out", out);
    add_common(coarsen_cmd, f);

    CLI::App* omega_cmd = app.add_subcommand(
        "omega", "configuration-space kernel with truncation certificate");
    omega_cmd->add_option("path", path)->required();
    omega_cmd->add_option("--out", out);
    omega_cmd->add_option("--csv", csv);
    add_common(omega_cmd, f);

    CLI::App* verify_cmd = app.add_subcommand("verify", "run a verification suite");
    verify_cmd->add_option("path", path)->required();
    verify_cmd->add_option("path_q", path_q);
    verify_cmd->add_option("--suite", suite)
        ->required()
        ->check(CLI::IsMember(
            {"semiring", "assoc", "functorial", "mellin", "degeneration"}));
    verify_cmd->add_option("--out", out);
    add_common(verify_cmd, f);

    CLI::App* mc_cmd = app.add_subcommand("mc-verify", "Monte Carlo comparison");
    mc_cmd->add_option("path", path)->required();
    mc_cmd->add_option("--samples", samples);
    mc_cmd->add_option("--bins", bins.count);
    mc_cmd->add_option("--bin-lo", bins.lo);
    mc_cmd->add_option("--bin-hi", bins.hi);
    mc_cmd->add_option("--out", out);
    add_common(mc_cmd, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitSchema;
    }

    try {
        if (validate_cmd->parsed())
            return cmd_validate(path, f, validate_cmd, out);
        if (compose_cmd->parsed()) return cmd_compose(path_q, path, out);
        if (coarsen_cmd->parsed())
            return cmd_coarsen(path, source_groups, target_groups, out);
        if (omega_cmd->parsed())
            return cmd_omega(path, f, omega_cmd, out, csv);
        if (verify_cmd->parsed())
            return cmd_verify(path, path_q, suite, f, verify_cmd, out);
        if (mc_cmd->parsed()) {
            try {
                check_bins(bins);
            } catch (const std::invalid_argument& e) {
                throw SchemaError(e.what());
            }
            return cmd_mc_verify(path, samples, f, mc_cmd, bins, out);
        }
    } catch (const SchemaError& e) {
        return error_object(kExitSchema, "schema", e.what());
    } catch (const TruncationError& e) {
        return error_object(kExitTruncation, "truncation", e.what());
    } catch (const AtomBudgetError& e) {
        return error_object(kExitTruncation, "atom_budget", e.what());
    } catch (const std::invalid_argument& e) {
        return error_object(kExitValidation, "validation", e.what());
    } catch (const std::domain_error& e) {
        return error_object(kExitValidation, "validation", e.what());
    }
    return kExitSchema;
}

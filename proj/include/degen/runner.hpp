#pragma once

// Batch experiment driver behind the degen-lab command line tool. Needs the
// vendored nlohmann/json header on the include path.

#include "degen/carleman.hpp"
#include "degen/evolution.hpp"
#include "degen/norms.hpp"
#include "degen/observability.hpp"
#include "degen/random.hpp"
#include "degen/shape_design.hpp"
#include "degen/spectral.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace degen {

/// Invalid configuration; `field` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("config field '" + field + "': " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"spectrum", "evolve",        "hardy",      "delta-sweep",
                                                "carleman", "observability", "full-report"};
    return names;
}

struct ExperimentConfig {
    std::string experiment = "spectrum";
    DomainKind domain = DomainKind::interval;
    double alpha = 0.5;
    double T = 1.0;
    int n = 256;
    double grading = 2.0;
    int steps = 200;
    std::vector<double> deltas{0.2, 0.1, 0.05, 0.025};
    double delta = 0.1;
    std::vector<double> s_grid = default_s_grid();
    int K = 5;
    std::vector<int> K_list{5, 10, 15};
    std::uint64_t seed = 1;
    int random_count = 5;
    int runs = 20;
    double theta = 1.0;
    double cap = 60.0;
    std::string datum = "mode";
    std::string source = "none";
    double tolerance = 1e-3;
    std::vector<int> residual_ladder{288, 576, 1152};
    nlohmann::json raw; ///< validated input, echoed in the summary
    std::vector<ExperimentConfig> parts; ///< sub-experiments of full-report
};

namespace detail {

inline const std::set<std::string>& config_keys() {
    static const std::set<std::string> keys{
        "experiment", "domain", "alpha", "T",     "n",      "grading", "steps",     "deltas",          "delta",
        "s_grid",     "K",      "K_list", "seed", "random_count", "runs", "theta",   "cap",   "datum", "source",
        "tolerance",  "residual_ladder"};
    return keys;
}

inline double get_number(const nlohmann::json& j, const std::string& key) {
    if (!j.at(key).is_number()) throw ConfigError(key, "expected a number");
    return j.at(key).get<double>();
}

inline int get_int(const nlohmann::json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) throw ConfigError(key, "out of range");
    return int(x);
}

inline std::vector<double> get_number_list(const nlohmann::json& j, const std::string& key) {
    if (!j.at(key).is_array() || j.at(key).empty()) throw ConfigError(key, "expected a nonempty array of numbers");
    std::vector<double> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number()) throw ConfigError(key, "expected a nonempty array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

inline std::vector<int> get_int_list(const nlohmann::json& j, const std::string& key) {
    if (!j.at(key).is_array() || j.at(key).empty()) throw ConfigError(key, "expected a nonempty array of integers");
    std::vector<int> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number_integer()) throw ConfigError(key, "expected a nonempty array of integers");
        out.push_back(v.get<int>());
    }
    return out;
}

inline std::string get_string(const nlohmann::json& j, const std::string& key, const std::vector<std::string>& allowed) {
    if (!j.at(key).is_string()) throw ConfigError(key, "expected a string");
    const auto s = j.at(key).get<std::string>();
    for (const auto& a : allowed)
        if (s == a) return s;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError(key, "'" + s + "' is not one of " + list);
}

inline bool on_uniform_grid(double delta, int n) {
    const double k = delta * n;
    return std::abs(k - std::round(k)) <= 1e-9 * std::max(1.0, k);
}

inline void apply_fields(ExperimentConfig& c, const nlohmann::json& j) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!config_keys().count(it.key())) throw ConfigError(it.key(), "unknown key");
    if (j.contains("domain")) c.domain = parse_domain_kind(get_string(j, "domain", {"interval", "square"}));
    if (j.contains("alpha")) c.alpha = get_number(j, "alpha");
    if (j.contains("T")) c.T = get_number(j, "T");
    if (j.contains("n")) c.n = get_int(j, "n");
    if (j.contains("grading")) c.grading = get_number(j, "grading");
    if (j.contains("steps")) c.steps = get_int(j, "steps");
    if (j.contains("deltas")) c.deltas = get_number_list(j, "deltas");
    if (j.contains("delta")) c.delta = get_number(j, "delta");
    if (j.contains("s_grid")) {
        const auto& g = j.at("s_grid");
        if (g.is_array()) {
            c.s_grid = get_number_list(j, "s_grid");
        } else if (g.is_object()) {
            for (auto it = g.begin(); it != g.end(); ++it)
                if (it.key() != "min" && it.key() != "max" && it.key() != "points")
                    throw ConfigError("s_grid." + it.key(), "unknown key");
            const double lo = g.contains("min") ? get_number(g, "min") : 1.0;
            const double hi = g.contains("max") ? get_number(g, "max") : 200.0;
            const int pts = g.contains("points") ? get_int(g, "points") : 20;
            if (!(lo >= 1.0 && hi > lo && pts >= 2)) throw ConfigError("s_grid", "need 1 <= min < max and points >= 2");
            c.s_grid = default_s_grid(pts, lo, hi);
        } else {
            throw ConfigError("s_grid", "expected an array or {min, max, points}");
        }
    }
    if (j.contains("K")) c.K = get_int(j, "K");
    if (j.contains("K_list")) c.K_list = get_int_list(j, "K_list");
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed", "expected a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("random_count")) c.random_count = get_int(j, "random_count");
    if (j.contains("runs")) c.runs = get_int(j, "runs");
    if (j.contains("theta")) c.theta = get_number(j, "theta");
    if (j.contains("cap")) c.cap = get_number(j, "cap");
    if (j.contains("datum")) c.datum = get_string(j, "datum", {"mode", "bump", "random"});
    if (j.contains("source")) c.source = get_string(j, "source", {"none", "constant"});
    if (j.contains("tolerance")) c.tolerance = get_number(j, "tolerance");
    if (j.contains("residual_ladder")) c.residual_ladder = get_int_list(j, "residual_ladder");
}

inline void validate(const ExperimentConfig& c) {
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");
    if (!(c.T > 0.0) || !std::isfinite(c.T)) throw ConfigError("T", "must be positive");
    if (c.n < 4) throw ConfigError("n", "must be at least 4");
    if (c.domain == DomainKind::square && c.n > 128) throw ConfigError("n", "square meshes are limited to 128 x 128");
    if (!(c.grading >= 1.0 && c.grading <= 8.0)) throw ConfigError("grading", "must lie in [1, 8]");
    if (c.steps < 8) throw ConfigError("steps", "must be at least 8");
    if (c.K < 1) throw ConfigError("K", "must be positive");
    for (int k : c.K_list)
        if (k < 1) throw ConfigError("K_list", "entries must be positive");
    if (c.random_count < 0) throw ConfigError("random_count", "must be non-negative");
    if (c.runs < 0) throw ConfigError("runs", "must be non-negative");
    if (!(c.theta >= 0.5 && c.theta <= 1.0)) throw ConfigError("theta", "must lie in [0.5, 1]");
    if (!(c.cap > 0.0)) throw ConfigError("cap", "must be positive");
    if (!(c.tolerance > 0.0)) throw ConfigError("tolerance", "must be positive");
    const double delta0 = 0.25;
    for (std::size_t i = 0; i < c.deltas.size(); ++i) {
        const double d = c.deltas[i];
        if (!(d > 0.0 && d < delta0)) throw ConfigError("deltas", "entries must lie in (0, 0.25)");
        if (i > 0 && !(d < c.deltas[i - 1])) throw ConfigError("deltas", "must be strictly descending");
        if (c.experiment == "delta-sweep" && !on_uniform_grid(d, c.n))
            throw ConfigError("deltas", "delta = " + std::to_string(d) + " is not a node of the uniform mesh with n = " +
                                            std::to_string(c.n));
    }
    if (!(c.delta > 0.0 && c.delta < delta0)) throw ConfigError("delta", "must lie in (0, 0.25)");
    for (std::size_t i = 0; i < c.s_grid.size(); ++i) {
        if (!(c.s_grid[i] >= 1.0)) throw ConfigError("s_grid", "entries must be at least 1");
        if (i > 0 && !(c.s_grid[i] > c.s_grid[i - 1])) throw ConfigError("s_grid", "must be strictly ascending");
    }
    for (std::size_t i = 0; i < c.residual_ladder.size(); ++i) {
        if (c.residual_ladder[i] < 8) throw ConfigError("residual_ladder", "entries must be at least 8");
        if (i > 0 && c.residual_ladder[i] != 2 * c.residual_ladder[i - 1])
            throw ConfigError("residual_ladder", "each entry must double the previous one");
    }
    if (c.experiment == "carleman" && c.steps % 2 != 0) throw ConfigError("steps", "must be even (a node at T/2)");
    if (c.experiment == "observability" && c.steps % 4 != 0) throw ConfigError("steps", "must be divisible by 4");
}

} // namespace detail

/// Builds a validated configuration from parsed JSON. `experiment` is the
/// command-line choice; a config "experiment" key, if present, must agree.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::string& experiment) {
    bool known = false;
    for (const auto& e : experiment_names()) known = known || e == experiment;
    if (!known) throw ConfigError("experiment", "unknown experiment '" + experiment + "'");
    if (!j.is_object()) throw ConfigError("<root>", "expected an object");
    if (j.contains("experiment") && (!j.at("experiment").is_string() || j.at("experiment").get<std::string>() != experiment))
        throw ConfigError("experiment", "config is for a different experiment");
    ExperimentConfig c;
    c.experiment = experiment;
    c.raw = j;
    if (experiment == "delta-sweep") c.datum = "bump";
    if (experiment != "full-report") {
        detail::apply_fields(c, j);
        detail::validate(c);
        return c;
    }
    // full-report: shared keys at top level, per-experiment overrides in sub-objects
    nlohmann::json shared = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "experiment") continue;
        bool sub = false;
        for (const auto& e : experiment_names()) sub = sub || (e == it.key() && e != "full-report");
        if (sub) {
            if (!it.value().is_object()) throw ConfigError(it.key(), "expected an object");
            continue;
        }
        shared[it.key()] = it.value();
    }
    for (const auto& e : experiment_names()) {
        if (e == "full-report") continue;
        nlohmann::json merged = shared;
        if (j.contains(e))
            for (auto it = j.at(e).begin(); it != j.at(e).end(); ++it) merged[it.key()] = it.value();
        try {
            c.parts.push_back(parse_config(merged, e));
        } catch (const ConfigError& err) {
            throw ConfigError(e + "." + err.field(), std::string(err.what()).substr(std::string(err.what()).find(": ") + 2));
        }
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::string& experiment) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("--config", std::string("parse error: ") + e.what());
    }
    return parse_config(j, experiment);
}

using Cell = std::variant<double, long long, std::string>;

struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;
};

struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double limit = 0.0;
    std::string detail;
};

struct Report {
    std::string experiment;
    std::vector<Table> tables;
    std::vector<Check> checks;
    nlohmann::json info = nlohmann::json::object();
    std::string context; ///< parameter comment written at the top of every CSV

    bool passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }
    void check(std::string name, bool ok, double value, double limit, std::string detail = {}) {
        checks.push_back({std::move(name), ok, value, limit, std::move(detail)});
    }
};

namespace detail {

/// Shortest round-trip decimal form.
inline std::string short_num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string format_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) {
        if (std::isnan(*d)) return "nan";
        if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        return buf;
    }
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

inline nlohmann::json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

inline std::string context_line(const ExperimentConfig& c, const std::string& s_text, const std::string& delta_text) {
    std::ostringstream o;
    o << "# alpha=" << short_num(c.alpha) << ",T=" << short_num(c.T) << ",n=" << c.n
      << ",g=" << short_num(c.grading) << ",delta=" << delta_text << ",s=" << s_text << ",K=" << c.K;
    return o.str();
}

inline std::string join(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ";") + short_num(x);
    return s;
}

inline double bump(Point p) {
    const double r = (p.xn - 0.7) / 0.25;
    return std::abs(r) < 1 ? std::exp(1 - 1 / (1 - r * r)) : 0.0;
}

inline InitialFn bump_datum(DomainKind kind) {
    if (kind == DomainKind::interval) return bump;
    return [](Point p) { return bump(p) * std::sin(M_PI * p.x1); };
}

/// Modes used for modal evolution: all of them when cheap, else a leading block.
inline Spectrum evolution_spectrum(const OperatorPair& ops) {
    return compute_spectrum(ops, std::min<Eigen::Index>(ops.dofs(), ops.dofs() <= 800 ? ops.dofs() : 200));
}

/// Order estimates log2(e_i / e_{i+1}) for a halving ladder.
inline std::vector<double> halving_orders(const std::vector<double>& e) {
    std::vector<double> o;
    for (std::size_t i = 1; i < e.size(); ++i) o.push_back(std::log2(e[i - 1] / e[i]));
    return o;
}

/// First `count` Bessel-zero eigenvalues ((2-alpha)/2)^2 j_{nu,k}^2 with nu = (1-alpha)/(2-alpha).
inline std::vector<double> bessel_eigenvalues(double alpha, int count) {
    const double nu = (1.0 - alpha) / (2.0 - alpha);
    std::vector<double> out;
    double x = 0.05, fx = std::cyl_bessel_j(nu, x);
    while (int(out.size()) < count) {
        const double y = x + 0.05, fy = std::cyl_bessel_j(nu, y);
        if (fx * fy < 0.0) {
            double a = x, b = y, fa = fx;
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (a + b), fm = std::cyl_bessel_j(nu, m);
                if (fa * fm <= 0.0) b = m;
                else {
                    a = m;
                    fa = fm;
                }
            }
            const double j = 0.5 * (a + b);
            out.push_back(std::pow((2.0 - alpha) / 2.0, 2) * j * j);
        }
        x = y;
        fx = fy;
    }
    return out;
}

// ---------------------------------------------------------------- experiments

inline Report run_spectrum(const ExperimentConfig& c, int) {
    Report r;
    const auto d = make_domain(c.domain, c.alpha);
    const auto ops = assemble(build_mesh(d, c.n, c.grading));
    if (c.K > ops.dofs()) throw ConfigError("K", "exceeds the number of degrees of freedom");
    const auto spec = compute_spectrum(ops, c.K);
    const bool interval = c.domain == DomainKind::interval;
    const auto ref = interval ? bessel_eigenvalues(c.alpha, c.K) : std::vector<double>{};

    Table t{"eigenvalues", {"mode", "lambda", "rayleigh", "reference", "relative_error"}, {}};
    double rq_gap = 0.0, ortho = 0.0, poincare = 0.0;
    bool ascending = true;
    const Eigen::MatrixXd gram = spec.vectors.transpose() * (ops.mass * spec.vectors);
    ortho = (gram - Eigen::MatrixXd::Identity(c.K, c.K)).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < c.K; ++i) {
        const auto u = mode(ops, spec, i);
        const double lam = spec.values[i], rq = rayleigh(ops, u);
        rq_gap = std::max(rq_gap, std::abs(rq - lam) / lam);
        poincare = std::max(poincare, poincare_check(ops, u));
        if (i > 0 && spec.values[i] < spec.values[i - 1]) ascending = false;
        const double reference = interval ? ref[std::size_t(i)] : std::numeric_limits<double>::quiet_NaN();
        t.rows.push_back({(long long)(i + 1), lam, rq, reference, interval ? std::abs(lam - reference) / reference : reference});
    }
    r.tables.push_back(t);
    r.check("ascending", ascending, 0, 0);
    r.check("rayleigh_consistency", rq_gap <= 1e-8, rq_gap, 1e-8);
    r.check("mass_orthonormality", ortho <= 1e-10, ortho, 1e-10);
    const double pgap = std::abs(poincare * spec.values[0] - 1.0);
    r.check("poincare_sharpness", pgap <= 1e-8, pgap, 1e-8, "max ||u||^2 / B[u] over computed modes against 1 / lambda_1");
    if (interval) {
        const double e1 = std::abs(spec.values[0] - ref[0]) / ref[0];
        r.check("bessel_lambda1", e1 <= c.tolerance, e1, c.tolerance);
    }
    r.info["lambda1"] = spec.values[0];
    r.context = context_line(c, "none", "0");
    return r;
}

inline Report run_evolve(const ExperimentConfig& c, int) {
    Report r;
    const auto d = make_domain(c.domain, c.alpha);
    const auto ops = assemble(build_mesh(d, c.n, c.grading));
    const auto spec = evolution_spectrum(ops);
    const auto grid = make_time_grid(c.T, c.steps);
    Eigen::VectorXd y0;
    if (c.datum == "mode") y0 = mode(ops, spec, 0);
    else if (c.datum == "bump") y0 = ops.mesh->sample(bump_datum(c.domain));
    else y0 = random_admissible(ops, c.seed, 0);
    Source f;
    if (c.source == "constant") {
        Eigen::VectorXd one = ops.to_nodes(Eigen::VectorXd::Ones(ops.dofs()));
        f = constant_source(one, grid);
    }
    const auto exact = solve_spectral(ops, spec, y0, f, grid);
    const auto implicit = solve_implicit(ops, y0, f, grid, c.theta);
    const auto e_exact = energy_history(exact, ops), e_imp = energy_history(implicit, ops);
    const auto flux = flux_history(exact, ops, BoundaryPart::gamma_plus);

    Table t{"evolution", {"t", "spectral_l2", "implicit_l2", "gap_l2", "flux_squared"}, {}};
    for (int j = 0; j < grid.nodes(); ++j) {
        const Eigen::VectorXd g = ops.to_interior(exact.values[std::size_t(j)] - implicit.values[std::size_t(j)]);
        t.rows.push_back({grid.t(j), e_exact[std::size_t(j)], e_imp[std::size_t(j)], std::sqrt(g.dot(ops.mass * g)),
                          flux.squared[std::size_t(j)]});
    }
    r.tables.push_back(t);

    if (c.source == "none") {
        double worst = 0.0;
        for (const auto* e : {&e_exact, &e_imp})
            for (std::size_t j = 1; j < e->size(); ++j) worst = std::max(worst, (*e)[j] - (*e)[j - 1]);
        r.check("energy_non_increasing", worst <= 1e-12 * e_exact.front(), worst, 1e-12 * e_exact.front());
        if (c.datum == "mode") {
            double gap = 0.0;
            for (int j = 0; j < grid.nodes(); ++j)
                gap = std::max(gap, (exact.values[std::size_t(j)] - std::exp(-spec.values[0] * grid.t(j)) * y0).cwiseAbs().maxCoeff());
            r.check("mode_exactness", gap <= 1e-10, gap, 1e-10);
        }
    }
    // time-step ladder of the implicit scheme against the exact modal solution
    Table lad{"time_ladder", {"steps", "dt", "final_gap", "order"}, {}};
    std::vector<double> gaps;
    for (int k = 0; k < 4; ++k) {
        const auto g = make_time_grid(c.T, c.steps << k);
        const auto a = solve_spectral(ops, spec, y0, f.empty() ? Source{} : constant_source(f.front(), g), g);
        const auto b = solve_implicit(ops, y0, f.empty() ? Source{} : constant_source(f.front(), g), g, c.theta);
        const Eigen::VectorXd e = ops.to_interior(a.values.back() - b.values.back());
        gaps.push_back(std::sqrt(e.dot(ops.mass * e)));
    }
    const auto orders = halving_orders(gaps);
    for (int k = 0; k < 4; ++k)
        lad.rows.push_back({(long long)(c.steps << k), c.T / (c.steps << k), gaps[std::size_t(k)],
                            k == 0 ? std::numeric_limits<double>::quiet_NaN() : orders[std::size_t(k - 1)]});
    r.tables.push_back(lad);
    const double expected = c.theta == 0.5 ? 2.0 : 1.0;
    const double last = orders.back();
    if (c.theta == 1.0 || c.theta == 0.5)
        r.check("time_order", std::abs(last - expected) <= 0.1 * expected, last, expected, "finest-rung order, +-10%");
    r.context = context_line(c, "none", "0");
    return r;
}

inline Report run_hardy(const ExperimentConfig& c, int) {
    Report r;
    const auto d = make_domain(c.domain, c.alpha);
    const auto ops = assemble(build_mesh(d, c.n, c.grading));
    const int modes = int(std::min<Eigen::Index>(10, ops.dofs()));
    const auto spec = compute_spectrum(ops, modes);
    Table t{"hardy", {"index", "kind", "hardy_ratio", "bound", "poincare_ratio"}, {}};
    const double bound = hardy_constant(c.alpha);
    double worst = 0.0, pmax = 0.0;
    auto add = [&](long long idx, const std::string& kind, const Eigen::VectorXd& u) {
        const auto h = hardy_check(ops, u);
        const double p = poincare_check(ops, u);
        worst = std::max(worst, h.ratio);
        if (kind == "mode") pmax = std::max(pmax, p);
        t.rows.push_back({idx, kind, h.ratio, bound, p});
    };
    for (int i = 0; i < c.random_count; ++i) add(i, "random", random_admissible(ops, c.seed, std::uint64_t(i)));
    for (int i = 0; i < modes; ++i) add(i, "mode", mode(ops, spec, i));
    r.tables.push_back(t);
    r.check("hardy_bound", worst <= bound * 1.02, worst, bound * 1.02);
    const double pgap = std::abs(pmax * spec.values[0] - 1.0);
    r.check("poincare_sharpness", pgap <= 1e-8, pgap, 1e-8);
    r.info["hardy_max_ratio"] = worst;
    r.info["hardy_bound"] = bound;
    r.context = context_line(c, "none", "0");
    return r;
}

inline Report run_delta_sweep(const ExperimentConfig& c, int) {
    Report r;
    const auto d = make_domain(c.domain, c.alpha);
    const auto grid = make_time_grid(c.T, c.steps);
    SourceFn f;
    if (c.source == "constant") f = [](double, Point) { return 1.0; };
    if (c.datum != "bump") throw ConfigError("datum", "delta-sweep uses the compactly supported bump datum");
    const auto rep = delta_sweep(d, bump_datum(c.domain), f, grid, c.deltas, c.n);
    Table t{"delta_sweep", {"delta", "solution_error", "final_error", "flux_error", "stability_ratio", "solution_rate"}, {}};
    for (std::size_t i = 0; i < rep.deltas.size(); ++i)
        t.rows.push_back({rep.deltas[i], rep.solution_error[i], rep.final_error[i], rep.flux_error[i], rep.stability_ratio[i],
                          i == 0 ? std::numeric_limits<double>::quiet_NaN() : rep.solution_rate[i - 1]});
    r.tables.push_back(t);
    bool dec = true, fdec = true;
    for (std::size_t i = 1; i < rep.deltas.size(); ++i) {
        dec = dec && rep.solution_error[i] < rep.solution_error[i - 1];
        fdec = fdec && rep.flux_error[i] < rep.flux_error[i - 1];
    }
    r.check("solution_error_decreasing", dec, 0, 0);
    const double red = rep.solution_error.back() / rep.solution_error.front();
    r.check("error_reduction", red <= 0.25, red, 0.25, "last / first solution error");
    if (rep.homogeneous) r.check("flux_error_decreasing", fdec, 0, 0);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double s : rep.stability_ratio) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    const double spread = (hi - lo) / hi;
    r.check("stability_uniform", spread <= 0.25, spread, 0.25, "(max - min) / max over deltas");
    r.info["self_convergence"] = json_number(rep.self_convergence);
    r.info["reference_norm"] = rep.reference_norm;
    auto uniform = c;
    uniform.grading = 1.0; // the sweep meshes are uniform so deltas stay on nodes
    r.context = context_line(uniform, "none", join(c.deltas));
    return r;
}

struct CarlemanSuite {
    std::shared_ptr<const Mesh> mesh;
    OperatorPair ops;
    std::vector<SpaceTimeField> fields;
    std::vector<std::string> kinds;
    std::size_t mode_count = 0;
};

/// Eigenmode data followed by seeded random data, evolved forward on the
/// truncated domain with the modal solver.
inline CarlemanSuite carleman_suite(const DomainSpec& d, double delta, int n, const TimeGrid& grid, int modes,
                                    int randoms, std::uint64_t seed) {
    CarlemanSuite s;
    s.mesh = std::make_shared<const Mesh>(build_mesh(truncate(d, delta), n));
    s.ops = assemble(*s.mesh);
    if (modes > s.ops.dofs()) throw ConfigError("K", "exceeds the number of degrees of freedom");
    const auto spec = evolution_spectrum(s.ops);
    for (int i = 0; i < modes; ++i) {
        s.fields.push_back(solve_spectral(s.ops, spec, mode(s.ops, spec, i), {}, grid));
        s.kinds.push_back("mode");
    }
    s.mode_count = s.fields.size();
    for (int i = 0; i < randoms; ++i) {
        s.fields.push_back(solve_spectral(s.ops, spec, random_admissible(s.ops, seed, std::uint64_t(i)), {}, grid));
        s.kinds.push_back("random");
    }
    return s;
}

struct CarlemanFit {
    double constant = 0.0;
    S0Result s0;
};

/// C is calibrated as the largest quotient of the eigenmode fields at the
/// smallest grid s; s0 is then searched over the whole suite.
inline CarlemanFit fit_carleman(const CarlemanSuite& s, const CarlemanWeights& w, const std::vector<double>& grid,
                                CarlemanForm form, int jobs) {
    const auto q = quotient_table(s.fields, w, s.ops, grid, form, jobs);
    CarlemanFit f;
    for (std::size_t i = 0; i < s.mode_count; ++i) f.constant = std::max(f.constant, q[i].front());
    f.s0 = find_s0(q, grid, f.constant);
    return f;
}

/// y = (1 + t) sin(k (x_N - delta)) [sin(pi x_1)], backward convention, with its source.
inline SpaceTimeField manufactured_backward(const DomainSpec& d, double delta, int n, double T) {
    auto mesh = std::make_shared<const Mesh>(build_mesh(truncate(d, delta), n));
    const auto grid = make_time_grid(T, n);
    const double k = M_PI / (1.0 - delta), a = d.alpha;
    const bool sq = d.kind == DomainKind::square;
    SpaceTimeField y;
    y.mesh = mesh;
    y.grid = grid;
    y.direction = Direction::backward;
    for (int j = 0; j < grid.nodes(); ++j) {
        const double t = grid.t(j);
        y.values.push_back(mesh->sample([&](Point p) {
            return (1 + t) * std::sin(k * (p.xn - delta)) * (sq ? std::sin(M_PI * p.x1) : 1.0);
        }));
    }
    y.datum = y.values.back();
    y.source = sample_source(*mesh, grid, [&](double t, Point p) {
        const double x = p.xn, ph = k * (x - delta), sx = sq ? std::sin(M_PI * p.x1) : 1.0;
        const double u = std::sin(ph), lap = a * std::pow(x, a - 1) * k * std::cos(ph) - std::pow(x, a) * k * k * u;
        return sx * (u + (1 + t) * lap) - (sq ? (1 + t) * M_PI * M_PI * u * sx : 0.0);
    });
    return y;
}

inline Report run_carleman(const ExperimentConfig& c, int jobs) {
    Report r;
    const auto d = make_domain(c.domain, c.alpha);
    const auto grid = make_time_grid(c.T, c.steps);
    const auto suite = carleman_suite(d, c.delta, c.n, grid, c.K, c.random_count, c.seed);
    const auto w = make_weights(d, c.T, c.s_grid.front());

    Table q{"carleman_quotients", {"form", "field", "kind", "s", "quotient", "holds"}, {}};
    for (auto form : {CarlemanForm::z_form, CarlemanForm::y_form}) {
        const std::string fname = form == CarlemanForm::z_form ? "z_form" : "y_form";
        const auto fit = fit_carleman(suite, w, c.s_grid, form, jobs);
        for (std::size_t f = 0; f < suite.fields.size(); ++f)
            for (std::size_t i = 0; i < c.s_grid.size(); ++i) {
                const double v = fit.s0.quotient[f][i];
                q.rows.push_back({fname, (long long)f, suite.kinds[f], c.s_grid[i], v, (long long)(v <= fit.constant)});
            }
        r.check(fname + "_s0_found", fit.s0.found && fit.s0.s0 <= c.s_grid.back(), fit.s0.found ? fit.s0.s0 : NAN,
                c.s_grid.back(), "inequality holds for every field at every grid s >= s0");
        double rise = 0.0;
        if (fit.s0.found)
            for (const auto& row : fit.s0.quotient)
                for (std::size_t i = fit.s0.index + 1; i < row.size(); ++i) rise = std::max(rise, row[i] / row[i - 1] - 1.0);
        r.check(fname + "_quotient_non_increasing", rise <= 1e-9, rise, 1e-9, "quotient in s beyond s0");
        r.info[fname] = {{"constant", fit.constant}, {"s0", json_number(fit.s0.found ? fit.s0.s0 : NAN)},
                         {"fitted_constant", fit.s0.fitted_constant}};
    }
    r.tables.push_back(q);

    const auto g = fit_growth(w, grid);
    r.check("theta_growth_first", g.exponent_first <= 1.25 + 0.05, g.exponent_first, 1.3);
    r.check("theta_growth_second", g.exponent_second <= 1.5 + 0.05, g.exponent_second, 1.55);

    if (!c.residual_ladder.empty()) {
        Table res{"carleman_residual", {"n", "steps", "s", "relative_residual", "order"}, {}};
        std::vector<double> rel;
        const double s_res = c.s_grid.front();
        for (int n : c.residual_ladder) {
            const auto y = manufactured_backward(d, c.delta, n, c.T);
            const auto ops = assemble(*y.mesh);
            rel.push_back(p_residual(y, with_s(w, s_res), ops).relative());
        }
        const auto orders = halving_orders(rel);
        for (std::size_t i = 0; i < rel.size(); ++i)
            res.rows.push_back({(long long)c.residual_ladder[i], (long long)c.residual_ladder[i], s_res, rel[i],
                                i == 0 ? std::numeric_limits<double>::quiet_NaN() : orders[i - 1]});
        r.tables.push_back(res);
        if (!orders.empty()) {
            const double mn = *std::min_element(orders.begin(), orders.end());
            r.check("residual_order", mn >= 1.0, mn, 1.0, "smallest order over the (h, dt) halving ladder");
        }
    }
    r.context = context_line(c, short_num(c.s_grid.front()) + ":" + short_num(c.s_grid.back()) + ":" +
                                    std::to_string(c.s_grid.size()),
                             short_num(c.delta));
    return r;
}

inline Report run_observability(const ExperimentConfig& c, int jobs) {
    Report r;
    const auto d = make_domain(c.domain, c.alpha);
    const int kmax = *std::max_element(c.K_list.begin(), c.K_list.end());
    Table t{"observability", {"K", "modes_used", "lambda_K", "lambda_K_T", "C_obs", "C_obs_fine", "drift", "singular"}, {}};
    const auto coarse = assemble(build_mesh(d, c.n, c.grading));
    const auto fine = assemble(build_mesh(d, 2 * c.n, c.grading));
    if (kmax > coarse.dofs()) throw ConfigError("K_list", "exceeds the number of degrees of freedom");
    const auto sc = compute_spectrum(coarse, kmax), sf = compute_spectrum(fine, kmax);
    bool finite = true, monotone = true, full = true;
    double drift_max = 0.0, prev = 0.0;
    auto ks = c.K_list;
    std::sort(ks.begin(), ks.end());
    for (int k : ks) {
        const auto a = estimate_constant(coarse, sc, k, c.T, c.cap, jobs);
        const auto b = estimate_constant(fine, sf, k, c.T, c.cap, jobs);
        const double drift = std::abs(b.constant - a.constant) / b.constant;
        finite = finite && !a.singular && std::isfinite(a.constant);
        monotone = monotone && a.constant >= prev * (1 - 1e-12);
        full = full && a.modes == k;
        prev = a.constant;
        drift_max = std::max(drift_max, drift);
        t.rows.push_back({(long long)k, (long long)a.modes, a.lambda_max_used, a.lambda_max_used * c.T, a.constant,
                          b.constant, drift, (long long)a.singular});
    }
    r.tables.push_back(t);
    r.check("constants_finite", finite, 0, 0);
    r.check("constant_non_decreasing_in_K", monotone, 0, 0);
    r.check("all_modes_within_cap", full, 0, c.cap, "lambda_K T <= cap for every requested K");
    r.check("refinement_drift", drift_max <= 0.25, drift_max, 0.25, "n against 2n");

    // classical limit: closed-form single-mode heat ratios
    Table cl{"classical_limit", {"mode", "ratio", "oracle", "quotient"}, {}};
    {
        const auto ops = assemble(build_mesh(make_domain(DomainKind::interval, 1e-12), 400, 1.0));
        const auto spec = compute_spectrum(ops, 5);
        double lo = 10, hi = 0;
        for (int m = 1; m <= 5; ++m) {
            const auto rep = estimate_constant(ops, spec, m, c.T, std::numeric_limits<double>::infinity());
            const double ratio = rep.mode_ratios.back();
            const double oracle = 1.0 / (-std::expm1(-2.0 * m * m * M_PI * M_PI * c.T));
            lo = std::min(lo, ratio / oracle);
            hi = std::max(hi, ratio / oracle);
            cl.rows.push_back({(long long)m, ratio, oracle, ratio / oracle});
        }
        r.check("classical_limit_low", lo >= 0.9, lo, 0.9);
        r.check("classical_limit_high", hi <= 1.2, hi, 1.2);
    }
    r.tables.push_back(cl);

    // window bound on seeded backward-convention runs
    Table wb{"window_bound", {"run", "lhs", "rhs", "holds"}, {}};
    bool all = true;
    const auto spec_all = evolution_spectrum(coarse);
    const auto grid = make_time_grid(c.T, c.steps);
    for (int i = 0; i < c.runs; ++i) {
        const auto y = solve_spectral(coarse, spec_all, random_admissible(coarse, c.seed, std::uint64_t(i)), {}, grid);
        const auto w = window_bound_check(time_reverse(y), coarse);
        all = all && w.holds;
        wb.rows.push_back({(long long)i, w.lhs, w.rhs, (long long)w.holds});
    }
    r.tables.push_back(wb);
    if (c.runs > 0) r.check("window_bound", all, 0, 0);
    r.context = context_line(c, "none", "0");
    r.info["K_list"] = ks;
    return r;
}

} // namespace detail

/// Runs one experiment (or all of them for full-report).
inline std::vector<Report> run(const ExperimentConfig& c, int jobs = 1) {
    if (c.experiment == "full-report") {
        std::vector<Report> all;
        for (const auto& p : c.parts)
            for (auto& r : run(p, jobs)) all.push_back(std::move(r));
        return all;
    }
    Report r;
    if (c.experiment == "spectrum") r = detail::run_spectrum(c, jobs);
    else if (c.experiment == "evolve") r = detail::run_evolve(c, jobs);
    else if (c.experiment == "hardy") r = detail::run_hardy(c, jobs);
    else if (c.experiment == "delta-sweep") r = detail::run_delta_sweep(c, jobs);
    else if (c.experiment == "carleman") r = detail::run_carleman(c, jobs);
    else r = detail::run_observability(c, jobs);
    r.experiment = c.experiment;
    r.info["config"] = c.raw;
    return {r};
}

inline void write_csv(const std::filesystem::path& path, const Table& t, const std::string& context) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << context << '\n';
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << detail::format_cell(row[i]);
        out << '\n';
    }
}

/// Writes every table as <out>/<experiment>/<table>.csv (or <out>/<table>.csv
/// for a single experiment) plus <out>/summary.json. Returns true iff every
/// check passed.
inline bool write_reports(const std::filesystem::path& out, const std::vector<Report>& reports, const std::string& experiment) {
    std::filesystem::create_directories(out);
    nlohmann::json summary;
    summary["experiment"] = experiment;
    bool ok = true;
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& r : reports) {
        const auto dir = reports.size() > 1 ? out / r.experiment : out;
        std::filesystem::create_directories(dir);
        nlohmann::json jr;
        jr["experiment"] = r.experiment;
        jr["info"] = r.info;
        nlohmann::json files = nlohmann::json::array();
        for (const auto& t : r.tables) {
            write_csv(dir / (t.name + ".csv"), t, r.context);
            files.push_back((reports.size() > 1 ? r.experiment + "/" : std::string()) + t.name + ".csv");
        }
        jr["tables"] = files;
        nlohmann::json checks = nlohmann::json::array();
        for (const auto& c : r.checks)
            checks.push_back({{"name", c.name},
                              {"passed", c.passed},
                              {"value", detail::json_number(c.value)},
                              {"limit", detail::json_number(c.limit)},
                              {"detail", c.detail}});
        jr["checks"] = checks;
        jr["passed"] = r.passed();
        ok = ok && r.passed();
        parts.push_back(jr);
    }
    summary["reports"] = parts;
    summary["passed"] = ok;
    std::ofstream s(out / "summary.json", std::ios::binary);
    s << summary.dump(2) << '\n';
    return ok;
}

} // namespace degen

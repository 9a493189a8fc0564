#include "fqr/config.hpp"

#include "fqr/errors.hpp"
#include "fqr/io.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>

namespace fqr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside double quotes.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        if (line[k] == '"') quoted = !quoted;
        if (line[k] == '#' && !quoted) return line.substr(0, k);
    }
    return line;
}

std::string unquote(const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

std::vector<std::string> list_items(std::string v) {
    v = trim(v);
    if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto end = v.find(',', start);
        const std::string item = unquote(trim(v.substr(start, end == std::string::npos ? std::string::npos : end - start)));
        if (!item.empty()) out.push_back(item);
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) { return parse_number(v, "config key '" + key + "'"); }

int to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw ValidationError("config key '" + key + "' must be an integer");
    return static_cast<int>(d);
}

std::uint64_t to_seed(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long s = std::stoull(v, &pos);
        if (pos != v.size() || v.front() == '-') throw std::invalid_argument(v);
        return s;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "' must be a non-negative integer");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config key '" + key + "' must be true or false");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : list_items(v)) out.push_back(to_double(key, item));
    if (out.empty()) throw ValidationError("config key '" + key + "' needs at least one value");
    return out;
}

CurveCoefficients to_coefficients(const std::string& key, const std::string& v) {
    const auto values = to_list(key, v);
    if (values.size() != 5) throw ValidationError("config key '" + key + "' needs 5 shape coefficients");
    CurveCoefficients c{};
    for (std::size_t k = 0; k < 5; ++k) c[k] = values[k];
    return c;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
    KeyValues out;
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(line_no) + " is not of the form key = value");
        }
        const std::string key = trim(body.substr(0, eq));
        const std::string value = unquote(trim(body.substr(eq + 1)));
        if (key.empty()) throw ValidationError("config line " + std::to_string(line_no) + " has an empty key");
        if (!seen.insert(key).second) throw ValidationError("config key '" + key + "' appears twice");
        out.emplace_back(key, value);
    }
    return out;
}

Eigen::VectorXd parse_points(const std::string& text, const std::string& key) {
    const std::string v = trim(text);
    if (v.find(':') != std::string::npos && v.find(',') == std::string::npos) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (;;) {
            const auto end = v.find(':', start);
            parts.push_back(v.substr(start, end == std::string::npos ? std::string::npos : end - start));
            if (end == std::string::npos) break;
            start = end + 1;
        }
        if (parts.size() != 3) throw ValidationError("config key '" + key + "' range must be lo:hi:count");
        const double lo = to_double(key, parts[0]);
        const double hi = to_double(key, parts[1]);
        const int n = to_int(key, parts[2]);
        if (n < 1 || (n > 1 && !(lo < hi))) throw ValidationError("config key '" + key + "' needs lo < hi and count >= 1");
        if (n == 1) return Eigen::VectorXd::Constant(1, lo);
        return Eigen::VectorXd::LinSpaced(n, lo, hi);
    }
    const auto values = to_list(key, v);
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

SimScenario SimulationConfig::scenario(double tau, std::uint64_t seed) const {
    SimScenario sc;
    sc.num_clusters = clusters;
    sc.n_min = n_min;
    sc.n_max = n_max;
    if (grid_points < 2) throw ValidationError("sim_grid_points must be >= 2");
    if (!(s_range.lo < s_range.hi)) throw ValidationError("sim_s_lo must be below sim_s_hi");
    sc.grid = Eigen::VectorXd::LinSpaced(grid_points, s_range.lo, s_range.hi);
    sc.t_range = t_range;
    sc.alpha_true = alpha_preset(alpha, t_range);
    sc.beta_true = beta_preset(beta, s_range, t_range, beta_amplitude);
    sc.sigma_u = sigma_u;
    sc.error = error;
    sc.error_scale = error_scale;
    sc.skew_shape = skew_shape;
    sc.hetero_slope = hetero_slope;
    sc.noise_sd = noise_sd;
    sc.tau = tau;
    sc.seed = seed;
    sc.validate();
    return sc;
}

RunConfig make_run_config(const KeyValues& values, const std::filesystem::path& base_dir) {
    RunConfig c;
    c.echo = values;
    auto path = [&](const std::string& v) {
        const std::filesystem::path p(v);
        return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    };
    std::map<std::string, double> lambdas;
    std::optional<LambdaGrid> base_grid;
    std::map<std::string, std::vector<double>> grid_overrides;
    std::optional<double> t_lo;
    std::optional<double> t_hi;
    auto& sim = c.simulation;

    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters{
        {"responses", [&](auto&, auto& v) { c.responses = path(v); }},
        {"curves", [&](auto&, auto& v) { c.curves = path(v); }},
        {"target_curves", [&](auto&, auto& v) { c.target_curves = path(v); }},
        {"fit", [&](auto&, auto& v) { c.fit = path(v); }},
        {"tau", [&](auto& k, auto& v) { c.spec.tau = to_double(k, v); }},
        {"variant", [&](auto&, auto& v) { c.spec.variant = variant_from_string(v); }},
        {"num_t", [&](auto& k, auto& v) { c.spec.num_t = to_int(k, v); }},
        {"num_s", [&](auto& k, auto& v) { c.spec.num_s = to_int(k, v); }},
        {"basis_t", [&](auto&, auto& v) { c.spec.basis_t_kind = basis_kind_from_string(v); }},
        {"basis_s", [&](auto&, auto& v) { c.spec.basis_s_kind = basis_kind_from_string(v); }},
        {"penalty_order", [&](auto& k, auto& v) { c.spec.penalty_order = to_int(k, v); }},
        {"t_lo", [&](auto& k, auto& v) { t_lo = to_double(k, v); }},
        {"t_hi", [&](auto& k, auto& v) { t_hi = to_double(k, v); }},
        {"pve", [&](auto& k, auto& v) { c.pve = to_double(k, v); }},
        {"smooth_curves", [&](auto& k, auto& v) { c.smooth_curves = to_bool(k, v); }},
        {"lambda_alpha", [&](auto& k, auto& v) { lambdas[k] = to_double(k, v); }},
        {"lambda_beta_s", [&](auto& k, auto& v) { lambdas[k] = to_double(k, v); }},
        {"lambda_beta_t", [&](auto& k, auto& v) { lambdas[k] = to_double(k, v); }},
        {"lambda_u", [&](auto& k, auto& v) { lambdas[k] = to_double(k, v); }},
        {"lambda_grid",
         [&](auto& k, auto& v) {
             std::vector<std::string> parts;
             std::size_t start = 0;
             for (;;) {
                 const auto end = v.find(':', start);
                 parts.push_back(v.substr(start, end == std::string::npos ? std::string::npos : end - start));
                 if (end == std::string::npos) break;
                 start = end + 1;
             }
             if (parts.size() != 3) throw ValidationError("lambda_grid must be log10 lo:hi:points");
             base_grid = LambdaGrid::log_spaced(to_double(k, parts[0]), to_double(k, parts[1]), to_int(k, parts[2]));
         }},
        {"lambda_alpha_grid", [&](auto& k, auto& v) { grid_overrides["alpha"] = to_list(k, v); }},
        {"lambda_beta_s_grid", [&](auto& k, auto& v) { grid_overrides["beta_s"] = to_list(k, v); }},
        {"lambda_beta_t_grid", [&](auto& k, auto& v) { grid_overrides["beta_t"] = to_list(k, v); }},
        {"lambda_u_grid", [&](auto& k, auto& v) { grid_overrides["u"] = to_list(k, v); }},
        {"cv_folds", [&](auto& k, auto& v) { c.cv_folds = to_int(k, v); }},
        {"bandwidth", [&](auto& k, auto& v) { c.bandwidth = to_double(k, v); }},
        {"target", [&](auto&, auto& v) { c.target = v; }},
        {"t_points", [&](auto& k, auto& v) { c.t_points = parse_points(v, k); }},
        {"compare_variants",
         [&](auto&, auto& v) {
             c.compare_variants.clear();
             for (const auto& item : list_items(v)) c.compare_variants.push_back(variant_from_string(item));
         }},
        {"b_bias", [&](auto& k, auto& v) { c.b_bias = to_int(k, v); }},
        {"b_sd", [&](auto& k, auto& v) { c.b_sd = to_int(k, v); }},
        {"alpha", [&](auto& k, auto& v) { c.alpha = to_double(k, v); }},
        {"seed", [&](auto& k, auto& v) { c.seed = to_seed(k, v); }},
        {"threads", [&](auto& k, auto& v) { c.threads = to_int(k, v); }},
        {"write_replicates", [&](auto& k, auto& v) { c.write_replicates = to_bool(k, v); }},
        {"plot", [&](auto& k, auto& v) { c.plot = to_bool(k, v); }},
        {"sim_clusters", [&](auto& k, auto& v) { sim.clusters = to_int(k, v); }},
        {"sim_n_min", [&](auto& k, auto& v) { sim.n_min = to_int(k, v); }},
        {"sim_n_max", [&](auto& k, auto& v) { sim.n_max = to_int(k, v); }},
        {"sim_grid_points", [&](auto& k, auto& v) { sim.grid_points = to_int(k, v); }},
        {"sim_s_lo", [&](auto& k, auto& v) { sim.s_range.lo = to_double(k, v); }},
        {"sim_s_hi", [&](auto& k, auto& v) { sim.s_range.hi = to_double(k, v); }},
        {"sim_t_lo", [&](auto& k, auto& v) { sim.t_range.lo = to_double(k, v); }},
        {"sim_t_hi", [&](auto& k, auto& v) { sim.t_range.hi = to_double(k, v); }},
        {"sim_alpha", [&](auto&, auto& v) { sim.alpha = v; }},
        {"sim_beta", [&](auto&, auto& v) { sim.beta = v; }},
        {"sim_beta_amplitude", [&](auto& k, auto& v) { sim.beta_amplitude = to_double(k, v); }},
        {"sim_sigma_u", [&](auto& k, auto& v) { sim.sigma_u = to_double(k, v); }},
        {"sim_error", [&](auto&, auto& v) { sim.error = error_law_from_string(v); }},
        {"sim_error_scale", [&](auto& k, auto& v) { sim.error_scale = to_double(k, v); }},
        {"sim_skew_shape", [&](auto& k, auto& v) { sim.skew_shape = to_double(k, v); }},
        {"sim_hetero_slope", [&](auto& k, auto& v) { sim.hetero_slope = to_double(k, v); }},
        {"sim_noise_sd", [&](auto& k, auto& v) { sim.noise_sd = to_double(k, v); }},
        {"sim_pair_a", [&](auto& k, auto& v) { sim.pair_a = to_coefficients(k, v); }},
        {"sim_pair_b", [&](auto& k, auto& v) { sim.pair_b = to_coefficients(k, v); }},
    };

    for (const auto& [key, value] : values) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw ValidationError("unknown config key '" + key + "'");
        it->second(key, value);
    }

    if (!lambdas.empty()) {
        for (const char* k : {"lambda_alpha", "lambda_beta_s", "lambda_beta_t", "lambda_u"}) {
            if (!lambdas.count(k)) throw ValidationError(std::string("fixed smoothing needs every lambda; missing '") + k + "'");
        }
        c.smoothing = SmoothingParams{lambdas["lambda_alpha"], lambdas["lambda_beta_s"], lambdas["lambda_beta_t"],
                                      lambdas["lambda_u"]};
    }
    if (base_grid) c.lambda_grid = *base_grid;
    if (grid_overrides.count("alpha")) c.lambda_grid.alpha = grid_overrides["alpha"];
    if (grid_overrides.count("beta_s")) c.lambda_grid.beta_s = grid_overrides["beta_s"];
    if (grid_overrides.count("beta_t")) c.lambda_grid.beta_t = grid_overrides["beta_t"];
    if (grid_overrides.count("u")) c.lambda_grid.u = grid_overrides["u"];
    if (t_lo.has_value() != t_hi.has_value()) throw ValidationError("t_lo and t_hi must be given together");
    if (t_lo) c.spec.t_domain = Interval{*t_lo, *t_hi};
    c.validate();
    return c;
}

void RunConfig::validate() const {
    spec.validate();
    if (!(pve > 0.0 && pve < 1.0)) throw ValidationError("pve must lie in (0, 1)");
    if (smoothing) smoothing->validate();
    lambda_grid.validate();
    if (cv_folds < 2) throw ValidationError("cv_folds must be >= 2");
    if (bandwidth && !(*bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
    if (target && *target != "linear_predictor" && *target != "difference") {
        throw ValidationError("target must be linear_predictor or difference");
    }
    if (compare_variants.empty()) throw ValidationError("compare_variants needs at least one variant");
    if (b_bias < 2 || b_sd < 2) throw ValidationError("b_bias and b_sd must be >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    if (threads < 0) throw ValidationError("threads must be >= 0");
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
    return make_run_config(parse_key_values(in), path.parent_path());
}

}  // namespace fqr

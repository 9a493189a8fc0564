#include "fqr/artifact.hpp"

#include "fqr/errors.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace fqr {

using Json = nlohmann::ordered_json;

namespace {

Json to_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
    return a;
}

Json to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
    return rows;
}

Eigen::VectorXd vector_from(const Json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
    return v;
}

Eigen::MatrixXd matrix_from(const Json& j, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) throw ValidationError("fit file: ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = j[r][static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

}  // namespace

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fit_to_json(const FitArtifact& art) {
    const FitResult& f = art.fit;
    if (!f.bases) throw ValidationError("fit has no bases");
    Json j;
    j["format"] = "fqr-fit";
    j["version"] = fit_format_version;
    j["created_at"] = art.created_at;
    j["software"] = {{"fqr", fqr_version},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"boost", BOOST_LIB_VERSION}};
    Json cfg = Json::object();
    for (const auto& [k, v] : art.config) cfg[k] = v;
    j["config"] = cfg;

    const Interval td = f.bases->t.domain();
    j["spec"] = {{"tau", f.spec.tau},
                 {"variant", to_string(f.spec.variant)},
                 {"basis_t", to_string(f.spec.basis_t_kind)},
                 {"num_t", f.spec.num_t},
                 {"basis_s", to_string(f.spec.basis_s_kind)},
                 {"num_s", f.spec.num_s},
                 {"penalty_order", f.spec.penalty_order},
                 {"t_domain", {td.lo, td.hi}}};
    j["grid"] = to_json(f.bases->grid);
    j["smoother"] = {{"applied", art.smoother.applied},
                     {"pve", art.smoother.pve},
                     {"pve_achieved", art.smoother.pve_achieved},
                     {"components", art.smoother.components},
                     {"noise_variance", art.smoother.noise_variance}};
    j["smoothing"] = {{"lambda_alpha", f.smoothing.lambda_alpha},
                      {"lambda_beta_s", f.smoothing.lambda_beta_s},
                      {"lambda_beta_t", f.smoothing.lambda_beta_t},
                      {"lambda_u", f.smoothing.lambda_u}};
    j["bandwidth"] = f.bandwidth;
    j["a"] = to_json(f.a);
    j["delta"] = to_json(f.delta);
    j["u"] = to_json(f.u);
    j["cluster_ids"] = art.cluster_ids;
    j["Vp"] = to_json(f.Vp);
    j["edf_ab"] = f.edf_ab;
    j["edf_u"] = f.edf_u;
    j["loglik"] = f.loglik;
    j["aic"] = f.aic;
    j["objective"] = f.objective;
    j["gradient_max"] = f.gradient_max;
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["objective_trace"] = f.objective_trace;
    return j.dump(2) + "\n";
}

FitArtifact fit_from_json(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("fit file is not valid JSON: ") + e.what());
    }
    try {
        if (j.value("format", std::string()) != "fqr-fit") throw ValidationError("not an fqr fit file");
        const int version = j.at("version").get<int>();
        if (version != fit_format_version) {
            throw ValidationError("fit file version " + std::to_string(version) + " does not match supported version " +
                                  std::to_string(fit_format_version));
        }
        FitArtifact art;
        art.created_at = j.value("created_at", std::string());
        for (const auto& [k, v] : j.at("config").items()) art.config.emplace_back(k, v.get<std::string>());
        const Json& s = j.at("spec");
        FitResult& f = art.fit;
        f.spec.tau = s.at("tau").get<double>();
        f.spec.variant = variant_from_string(s.at("variant").get<std::string>());
        f.spec.basis_t_kind = basis_kind_from_string(s.at("basis_t").get<std::string>());
        f.spec.num_t = s.at("num_t").get<int>();
        f.spec.basis_s_kind = basis_kind_from_string(s.at("basis_s").get<std::string>());
        f.spec.num_s = s.at("num_s").get<int>();
        f.spec.penalty_order = s.at("penalty_order").get<int>();
        f.spec.t_domain = Interval{s.at("t_domain").at(0).get<double>(), s.at("t_domain").at(1).get<double>()};
        f.spec.validate();
        const Eigen::VectorXd grid = vector_from(j.at("grid"));
        f.bases = std::make_shared<const ModelBases>(make_model_bases(f.spec, *f.spec.t_domain, grid));

        const Json& sm = j.at("smoother");
        art.smoother = {sm.at("applied").get<bool>(), sm.at("pve").get<double>(), sm.at("pve_achieved").get<double>(),
                        sm.at("components").get<int>(), sm.at("noise_variance").get<double>()};
        const Json& l = j.at("smoothing");
        f.smoothing = {l.at("lambda_alpha").get<double>(), l.at("lambda_beta_s").get<double>(),
                       l.at("lambda_beta_t").get<double>(), l.at("lambda_u").get<double>()};
        f.bandwidth = j.at("bandwidth").get<double>();
        f.a = vector_from(j.at("a"));
        f.delta = vector_from(j.at("delta"));
        f.u = vector_from(j.at("u"));
        art.cluster_ids = j.at("cluster_ids").get<std::vector<std::string>>();
        const Eigen::Index p = f.a.size() + f.delta.size();
        f.Vp = matrix_from(j.at("Vp"), p);
        if (f.a.size() != f.bases->t.size() || f.delta.size() != f.bases->t.size() * f.bases->s.size() ||
            f.Vp.rows() != p || static_cast<std::size_t>(f.u.size()) != art.cluster_ids.size()) {
            throw ValidationError("fit file coefficient dimensions do not match its bases");
        }
        f.edf_ab = j.at("edf_ab").get<double>();
        f.edf_u = j.at("edf_u").get<double>();
        f.loglik = j.at("loglik").get<double>();
        f.aic = j.at("aic").get<double>();
        f.objective = j.at("objective").get<double>();
        f.gradient_max = j.at("gradient_max").get<double>();
        f.converged = j.at("converged").get<bool>();
        f.iterations = j.at("iterations").get<int>();
        f.objective_trace = j.at("objective_trace").get<std::vector<double>>();
        return art;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("fit file is missing or has malformed fields: ") + e.what());
    }
}

void save_fit(const std::filesystem::path& path, const FitArtifact& artifact) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << fit_to_json(artifact);
}

FitArtifact load_fit(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open fit file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return fit_from_json(ss.str());
}

}  // namespace fqr

#pragma once

// Model-file serialization: UTF-8 JSON with the model_type discriminator
// first, complex scalars as [re, im] pairs, matrices as row arrays. The dump
// uses shortest-round-trip double formatting, so parse(serialize(m)) is
// bit-exact for finite doubles and files stay human-diffable.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "useq/controlled.hpp"
#include "useq/errors.hpp"
#include "useq/linalg.hpp"
#include "useq/models.hpp"

namespace useq {

using Json = nlohmann::ordered_json;

inline constexpr const char* kModelFormatVersion = "1";

namespace detail {

inline Json complex_to_json(const Complex& z) { return Json::array({z.real(), z.imag()}); }

inline Json vector_to_json(const ComplexVector& v) {
    Json out = Json::array();
    for (std::size_t i = 0; i < v.dim(); ++i) out.push_back(complex_to_json(v[i]));
    return out;
}

inline Json matrix_to_json(const ComplexMatrix& m) {
    Json out = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
        out.push_back(std::move(row));
    }
    return out;
}

inline Json matrix_list_to_json(const std::vector<ComplexMatrix>& ms) {
    Json out = Json::array();
    for (const auto& m : ms) out.push_back(matrix_to_json(m));
    return out;
}

inline Complex complex_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw Error(ErrorKind::ParseError, "complex scalar must be a [re, im] pair");
    return Complex(j[0].get<double>(), j[1].get<double>());
}

inline ComplexVector vector_from_json(const Json& j, const char* what) {
    if (!j.is_array()) throw Error(ErrorKind::ParseError, std::string(what) + " must be an array");
    ComplexVector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = complex_from_json(j[i]);
    return v;
}

inline ComplexMatrix matrix_from_json(const Json& j, const char* what) {
    if (!j.is_array() || j.empty())
        throw Error(ErrorKind::ParseError, std::string(what) + " must be a nonempty row array");
    const std::size_t rows = j.size();
    if (!j[0].is_array() || j[0].empty())
        throw Error(ErrorKind::ParseError, std::string(what) + " rows must be nonempty arrays");
    const std::size_t cols = j[0].size();
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw Error(ErrorKind::ParseError, std::string(what) + " has ragged rows");
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = complex_from_json(j[i][c]);
    }
    return m;
}

inline std::vector<ComplexMatrix> matrix_list_from_json(const Json& j, const char* what) {
    if (!j.is_array() || j.empty())
        throw Error(ErrorKind::ParseError, std::string(what) + " must be a nonempty array");
    std::vector<ComplexMatrix> out;
    out.reserve(j.size());
    for (const auto& item : j) out.push_back(matrix_from_json(item, what));
    return out;
}

inline KrausSet kraus_from_json(const Json& j, const char* what) {
    return KrausSet(matrix_list_from_json(j, what));
}

inline const Json& field(const Json& j, const char* name) {
    const auto it = j.find(name);
    if (it == j.end())
        throw Error(ErrorKind::ParseError, std::string("missing field '") + name + "'");
    return *it;
}

}  // namespace detail

inline Json to_json(const Model& model) {
    Json j;
    j["model_type"] = model_kind_name(kind_of(model));
    j["format_version"] = kModelFormatVersion;
    std::visit(
        [&j](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Umps>) {
                j["obs_count"] = m.obs_count();
                j["dim"] = m.bond_dim();
                j["sigma"] = detail::vector_to_json(m.sigma);
                j["cores"] = detail::matrix_list_to_json(m.cores);
                j["rho0"] = detail::vector_to_json(m.rho0);
            } else if constexpr (std::is_same_v<T, MpsChain>) {
                j["obs_count"] = m.obs_count();
                j["length"] = m.length();
                Json sites = Json::array();
                for (const auto& site : m.site_cores) sites.push_back(detail::matrix_list_to_json(site));
                j["sites"] = std::move(sites);
            } else if constexpr (std::is_same_v<T, Psr>) {
                j["obs_count"] = m.obs_count();
                j["dim"] = m.dim();
                j["sigma"] = detail::vector_to_json(m.sigma);
                j["ops"] = detail::matrix_list_to_json(m.ops);
                j["x0"] = detail::vector_to_json(m.x0);
            } else if constexpr (std::is_same_v<T, Hmm>) {
                j["obs_count"] = m.obs_count();
                j["dim"] = m.state_dim();
                j["transition"] = detail::matrix_to_json(m.transition);
                j["emission"] = detail::matrix_to_json(m.emission);
                j["x0"] = detail::vector_to_json(m.x0);
            } else if constexpr (std::is_same_v<T, Ubm>) {
                j["obs_count"] = m.obs_count();
                j["dim"] = m.bond_dim();
                j["alpha"] = detail::vector_to_json(m.alpha);
                j["cores"] = detail::matrix_list_to_json(m.cores);
                j["omega0"] = detail::vector_to_json(m.omega0);
            } else if constexpr (std::is_same_v<T, Noom>) {
                j["obs_count"] = m.obs_count();
                j["dim"] = m.dim();
                j["phis"] = detail::matrix_list_to_json(m.phis);
                j["psi0"] = detail::vector_to_json(m.psi0);
            } else if constexpr (std::is_same_v<T, Hqmm>) {
                j["obs_count"] = m.obs_count();
                j["dim"] = m.state_dim();
                Json kraus = Json::array();
                for (const auto& ks : m.kraus_by_obs) kraus.push_back(detail::matrix_list_to_json(ks.ops));
                j["kraus_by_obs"] = std::move(kraus);
                j["rho0"] = detail::vector_to_json(m.rho0);
            } else {  // Ulps
                j["obs_count"] = m.obs_count();
                j["dim"] = m.bond_dim();
                j["left_kraus"] = detail::matrix_list_to_json(m.left_kraus.ops);
                Json cores = Json::array();
                for (const auto& ks : m.core_kraus) cores.push_back(detail::matrix_list_to_json(ks.ops));
                j["core_kraus"] = std::move(cores);
                j["right_kraus"] = detail::matrix_list_to_json(m.right_kraus.ops);
            }
        },
        model);
    return j;
}

inline Json to_json(const ControlledModel& model) {
    Json j;
    std::visit(
        [&j](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Pomdp>) {
                j["model_type"] = "pomdp";
                j["format_version"] = kModelFormatVersion;
                j["obs_count"] = m.obs_count();
                j["dim"] = m.state_dim();
                j["action_count"] = m.action_count();
                j["transitions"] = detail::matrix_list_to_json(m.transitions);
                j["emissions"] = detail::matrix_list_to_json(m.emissions);
                j["x0"] = detail::vector_to_json(m.x0);
            } else if constexpr (std::is_same_v<T, IoHqmm>) {
                j["model_type"] = "io_hqmm";
                j["format_version"] = kModelFormatVersion;
                j["obs_count"] = m.obs_count();
                j["dim"] = m.state_dim();
                j["action_count"] = m.action_count();
                Json kraus = Json::array();
                for (const auto& per_action : m.kraus) {
                    Json row = Json::array();
                    for (const auto& ks : per_action) row.push_back(detail::matrix_list_to_json(ks.ops));
                    kraus.push_back(std::move(row));
                }
                j["kraus"] = std::move(kraus);
                j["rho0"] = detail::vector_to_json(m.rho0);
            } else {  // Qomdp
                j["model_type"] = "qomdp";
                j["format_version"] = kModelFormatVersion;
                j["obs_count"] = m.obs_count();
                j["dim"] = m.state_dim();
                j["action_count"] = m.action_count();
                Json kraus = Json::array();
                for (const auto& per_action : m.kraus) kraus.push_back(detail::matrix_list_to_json(per_action));
                j["kraus"] = std::move(kraus);
                j["rho0"] = detail::matrix_to_json(m.rho0);
            }
        },
        model);
    return j;
}

// Either family, discriminated by model_type.
struct AnyModel {
    std::variant<Model, ControlledModel> value;

    bool controlled() const { return value.index() == 1; }
    const Model& model() const {
        if (controlled()) throw Error(ErrorKind::InvalidModel, "operation needs an uncontrolled model");
        return std::get<Model>(value);
    }
    const ControlledModel& controlled_model() const {
        if (!controlled()) throw Error(ErrorKind::InvalidModel, "operation needs a controlled model");
        return std::get<ControlledModel>(value);
    }
};

inline AnyModel model_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorKind::ParseError, "model file must be a JSON object");
    const std::string type = detail::field(j, "model_type").get<std::string>();
    const std::string version = detail::field(j, "format_version").get<std::string>();
    if (version != kModelFormatVersion)
        throw Error(ErrorKind::ParseError, "unsupported format_version '" + version + "'");

    try {
        if (type == "umps") {
            return {Model(Umps(detail::vector_from_json(detail::field(j, "sigma"), "sigma"),
                               detail::matrix_list_from_json(detail::field(j, "cores"), "cores"),
                               detail::vector_from_json(detail::field(j, "rho0"), "rho0")))};
        } else if (type == "mps_chain") {
            const Json& sites = detail::field(j, "sites");
            if (!sites.is_array() || sites.empty())
                throw Error(ErrorKind::ParseError, "sites must be a nonempty array");
            std::vector<std::vector<ComplexMatrix>> site_cores;
            for (const auto& site : sites)
                site_cores.push_back(detail::matrix_list_from_json(site, "site"));
            return {Model(MpsChain(std::move(site_cores)))};
        } else if (type == "psr") {
            return {Model(Psr(detail::vector_from_json(detail::field(j, "sigma"), "sigma"),
                              detail::matrix_list_from_json(detail::field(j, "ops"), "ops"),
                              detail::vector_from_json(detail::field(j, "x0"), "x0")))};
        } else if (type == "hmm") {
            return {Model(Hmm(detail::matrix_from_json(detail::field(j, "transition"), "transition"),
                              detail::matrix_from_json(detail::field(j, "emission"), "emission"),
                              detail::vector_from_json(detail::field(j, "x0"), "x0")))};
        } else if (type == "ubm") {
            return {Model(Ubm(detail::vector_from_json(detail::field(j, "alpha"), "alpha"),
                              detail::matrix_list_from_json(detail::field(j, "cores"), "cores"),
                              detail::vector_from_json(detail::field(j, "omega0"), "omega0")))};
        } else if (type == "noom") {
            return {Model(Noom(detail::matrix_list_from_json(detail::field(j, "phis"), "phis"),
                               detail::vector_from_json(detail::field(j, "psi0"), "psi0")))};
        } else if (type == "hqmm") {
            const Json& kraus = detail::field(j, "kraus_by_obs");
            if (!kraus.is_array() || kraus.empty())
                throw Error(ErrorKind::ParseError, "kraus_by_obs must be a nonempty array");
            std::vector<KrausSet> by_obs;
            for (const auto& ks : kraus) by_obs.push_back(detail::kraus_from_json(ks, "kraus_by_obs"));
            return {Model(Hqmm(std::move(by_obs),
                               detail::vector_from_json(detail::field(j, "rho0"), "rho0")))};
        } else if (type == "ulps") {
            const Json& cores = detail::field(j, "core_kraus");
            if (!cores.is_array() || cores.empty())
                throw Error(ErrorKind::ParseError, "core_kraus must be a nonempty array");
            std::vector<KrausSet> core_kraus;
            for (const auto& ks : cores) core_kraus.push_back(detail::kraus_from_json(ks, "core_kraus"));
            return {Model(Ulps(detail::kraus_from_json(detail::field(j, "left_kraus"), "left_kraus"),
                               std::move(core_kraus),
                               detail::kraus_from_json(detail::field(j, "right_kraus"), "right_kraus")))};
        } else if (type == "pomdp") {
            return {ControlledModel(
                Pomdp(detail::matrix_list_from_json(detail::field(j, "transitions"), "transitions"),
                      detail::matrix_list_from_json(detail::field(j, "emissions"), "emissions"),
                      detail::vector_from_json(detail::field(j, "x0"), "x0")))};
        } else if (type == "io_hqmm") {
            const Json& kraus = detail::field(j, "kraus");
            if (!kraus.is_array() || kraus.empty())
                throw Error(ErrorKind::ParseError, "kraus must be a nonempty array");
            std::vector<std::vector<KrausSet>> per_action;
            for (const auto& row : kraus) {
                if (!row.is_array() || row.empty())
                    throw Error(ErrorKind::ParseError, "kraus rows must be nonempty arrays");
                std::vector<KrausSet> sets;
                for (const auto& ks : row) sets.push_back(detail::kraus_from_json(ks, "kraus"));
                per_action.push_back(std::move(sets));
            }
            return {ControlledModel(IoHqmm(std::move(per_action),
                                           detail::vector_from_json(detail::field(j, "rho0"), "rho0")))};
        } else if (type == "qomdp") {
            const Json& kraus = detail::field(j, "kraus");
            if (!kraus.is_array() || kraus.empty())
                throw Error(ErrorKind::ParseError, "kraus must be a nonempty array");
            std::vector<std::vector<ComplexMatrix>> per_action;
            for (const auto& row : kraus)
                per_action.push_back(detail::matrix_list_from_json(row, "kraus"));
            return {ControlledModel(Qomdp(std::move(per_action),
                                          detail::matrix_from_json(detail::field(j, "rho0"), "rho0")))};
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
    throw Error(ErrorKind::ParseError, "unknown model_type '" + type + "'");
}

namespace detail {

inline bool inline_friendly(const Json& j) {
    if (!j.is_array()) return false;
    for (const auto& item : j)
        if (!item.is_number() && !inline_friendly(item)) return false;
    return true;
}

// Numeric leaf arrays (complex pairs, matrix rows) stay on one line so model
// files diff cleanly; everything else is indented.
inline void dump_pretty(const Json& j, std::string& out, int level) {
    const std::string pad(static_cast<std::size_t>(level) * 2, ' ');
    const std::string pad_in(static_cast<std::size_t>(level + 1) * 2, ' ');
    if (j.is_object()) {
        out += "{\n";
        std::size_t i = 0;
        for (auto it = j.begin(); it != j.end(); ++it, ++i) {
            out += pad_in + Json(it.key()).dump() + ": ";
            dump_pretty(it.value(), out, level + 1);
            if (i + 1 < j.size()) out += ",";
            out += "\n";
        }
        out += pad + "}";
    } else if (j.is_array()) {
        const std::string compact = j.dump();
        if (inline_friendly(j) && compact.size() <= 100) {
            out += compact;
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            out += pad_in;
            dump_pretty(j[i], out, level + 1);
            if (i + 1 < j.size()) out += ",";
            out += "\n";
        }
        out += pad + "]";
    } else {
        out += j.dump();
    }
}

}  // namespace detail

inline std::string serialize_model(const AnyModel& any) {
    const Json j = any.controlled() ? to_json(any.controlled_model()) : to_json(any.model());
    std::string out;
    detail::dump_pretty(j, out, 0);
    out += "\n";
    return out;
}

inline AnyModel parse_model(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
    return model_from_json(j);
}

// "-" reads standard input.
inline AnyModel load_model_file(const std::string& path) {
    std::string text;
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        text = ss.str();
    } else {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    return parse_model(text);
}

inline void write_model_file(const std::string& path, const AnyModel& any) {
    const std::string text = serialize_model(any);
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
    out << text;
}

}  // namespace useq

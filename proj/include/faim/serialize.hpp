#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faim/errors.hpp"
#include "faim/model.hpp"

namespace faim {

// Versioned, self-describing model file. nlohmann::json emits the shortest
// round-tripping decimal form of every double, so save/load is bit-exact.

namespace detail {

inline nlohmann::json histogram_to_json(const ScoreHistogram& h) { return h.mass(); }

inline ScoreHistogram histogram_from_json(const nlohmann::json& j, const ScoreGrid& grid) {
    return ScoreHistogram(grid, j.get<std::vector<double>>());
}

inline nlohmann::json map_to_json(const TransportMap& m) {
    nlohmann::json j;
    std::vector<double> target(m.grid().bins());
    std::vector<int> defined(m.grid().bins());
    for (std::size_t i = 0; i < m.grid().bins(); ++i) {
        target[i] = m.target(i);
        defined[i] = m.defined(i) ? 1 : 0;
    }
    j["target"] = target;
    j["defined"] = defined;
    return j;
}

inline TransportMap map_from_json(const nlohmann::json& j, const ScoreGrid& grid) {
    auto target = j.at("target").get<std::vector<double>>();
    auto defined_int = j.at("defined").get<std::vector<int>>();
    std::vector<bool> defined(defined_int.size());
    for (std::size_t i = 0; i < defined_int.size(); ++i) defined[i] = defined_int[i] != 0;
    return TransportMap(grid, std::move(target), std::move(defined));
}

} // namespace detail

inline nlohmann::json model_to_json(const FaimModel& model) {
    nlohmann::json j;
    j["format"] = "faim-model";
    j["version"] = 1;
    j["grid"]["stepsize"] = model.grid.stepsize();
    nlohmann::json groups;
    for (const auto& [name, gm] : model.groups) {
        nlohmann::json g;
        const ThetaWeights& theta = model.thetas.at(name);
        g["theta"] = {{"a", theta.a}, {"b", theta.b}, {"c", theta.c}};
        g["n_total"] = gm.n_total;
        g["n_positive"] = gm.n_positive;
        g["lambda_pos"] = gm.lambda_pos;
        g["nu"] = detail::histogram_to_json(gm.nu);
        g["mu_a"] = detail::histogram_to_json(gm.mu_a);
        g["mu_b"] = gm.mu_b ? detail::histogram_to_json(*gm.mu_b) : nlohmann::json();
        g["mu_c"] = gm.mu_c ? detail::histogram_to_json(*gm.mu_c) : nlohmann::json();
        g["mu_bar"] = detail::histogram_to_json(gm.mu_bar);
        g["final_map"] = detail::map_to_json(gm.final_map);
        groups[name] = std::move(g);
    }
    j["groups"] = std::move(groups);
    return j;
}

inline FaimModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != "faim-model")
        throw data_error("not a faim model file");
    if (j.value("version", 0) != 1)
        throw data_error("unsupported model file version");
    ScoreGrid grid(j.at("grid").at("stepsize").get<double>());
    FaimModel model{grid, {}, {}};
    for (const auto& [name, g] : j.at("groups").items()) {
        ThetaWeights theta{g.at("theta").at("a").get<double>(),
                           g.at("theta").at("b").get<double>(),
                           g.at("theta").at("c").get<double>()};
        std::optional<ScoreHistogram> mu_b, mu_c;
        if (!g.at("mu_b").is_null()) mu_b = detail::histogram_from_json(g.at("mu_b"), grid);
        if (!g.at("mu_c").is_null()) mu_c = detail::histogram_from_json(g.at("mu_c"), grid);
        model.groups.emplace(name,
                             GroupModel{name, detail::histogram_from_json(g.at("nu"), grid),
                                        g.at("lambda_pos").get<std::vector<double>>(),
                                        detail::histogram_from_json(g.at("mu_a"), grid),
                                        std::move(mu_b), std::move(mu_c),
                                        detail::histogram_from_json(g.at("mu_bar"), grid),
                                        detail::map_from_json(g.at("final_map"), grid),
                                        g.at("n_total").get<long long>(),
                                        g.at("n_positive").get<long long>()});
        model.thetas.emplace(name, theta);
    }
    if (model.groups.empty()) throw data_error("model file contains no groups");
    return model;
}

inline void save_model(const std::string& path, const FaimModel& model) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write file '" + path + "'");
    out << model_to_json(model).dump(2) << '\n';
    if (!out) throw config_error("cannot write file '" + path + "'");
}

inline FaimModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw data_error("cannot parse model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

} // namespace faim

#include "reserve_mdn/json_io.hpp"

#include "reserve_mdn/error.hpp"

namespace rmdn {

nlohmann::json to_json(const MdnConfig& c) {
    return {{"lambda_w", c.lambda_w},         {"lambda_sigma", c.lambda_sigma},
            {"dropout", c.dropout},           {"neurons", c.neurons},
            {"layers", c.layers},             {"components", c.components},
            {"mse_weight", c.mse_weight},     {"scale", to_string(c.scale)},
            {"max_epochs", c.max_epochs},     {"patience", c.patience},
            {"learning_rate", c.learning_rate}, {"lambda_c", c.lambda_c}};
}

MdnConfig config_from_json(const nlohmann::json& j, MdnConfig c) {
    try {
        c.lambda_w = j.value("lambda_w", c.lambda_w);
        c.lambda_sigma = j.value("lambda_sigma", c.lambda_sigma);
        c.dropout = j.value("dropout", c.dropout);
        c.neurons = j.value("neurons", c.neurons);
        c.layers = j.value("layers", c.layers);
        c.components = j.value("components", c.components);
        c.mse_weight = j.value("mse_weight", c.mse_weight);
        if (j.contains("scale")) c.scale = scale_kind_from_string(j.at("scale").get<std::string>());
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.patience = j.value("patience", c.patience);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.lambda_c = j.value("lambda_c", c.lambda_c);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad model configuration: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const Normalizer& nz) {
    return {{"mean", nz.mean}, {"std", nz.std}, {"scale", to_string(nz.scale)}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
    try {
        return {j.at("mean").get<double>(), j.at("std").get<double>(),
                scale_kind_from_string(j.at("scale").get<std::string>())};
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad normaliser: ") + e.what());
    }
}

nlohmann::json to_json(const CcOdpFit& fit) { return {{"A", fit.A}, {"B", fit.B}, {"D", fit.D}}; }

CcOdpFit ccodp_from_json(const nlohmann::json& j) {
    try {
        CcOdpFit f;
        f.A = j.at("A").get<std::vector<double>>();
        f.B = j.at("B").get<std::vector<double>>();
        f.D = j.at("D").get<double>();
        if (f.A.size() != f.B.size()) throw InputError("ccODP effects differ in length");
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad ccODP parameters: ") + e.what());
    }
}

}  // namespace rmdn

#include "sharplab/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sharplab {

using nlohmann::json;

std::string model_to_json(const MlpNetwork& net) {
    json doc;
    doc["version"] = kModelFormatVersion;
    doc["class_count"] = net.num_classes();
    json layers = json::array();
    for (const auto& layer : net.layers()) {
        json jl;
        jl["rows"] = layer.weight.rows();
        jl["cols"] = layer.weight.cols();
        jl["weights"] = layer.weight.data();
        jl["activation"] = layer.activation == Activation::relu ? "relu" : "identity";
        if (layer.bias) jl["bias"] = *layer.bias;
        layers.push_back(std::move(jl));
    }
    doc["layers"] = std::move(layers);
    return doc.dump(2);
}

MlpNetwork model_from_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("model: malformed JSON: ") + e.what());
    }
    if (!doc.contains("version") || doc["version"].get<int>() != kModelFormatVersion) {
        std::ostringstream os;
        os << "model: version mismatch (expected " << kModelFormatVersion << ")";
        throw std::runtime_error(os.str());
    }
    std::vector<Layer> layers;
    std::size_t index = 0;
    for (const auto& jl : doc.at("layers")) {
        Layer layer;
        const auto rows = jl.at("rows").get<std::size_t>();
        const auto cols = jl.at("cols").get<std::size_t>();
        auto weights = jl.at("weights").get<Vector>();
        if (weights.size() != rows * cols) {
            std::ostringstream os;
            os << "model: dimension inconsistency at layer " << index << " (" << rows << "x"
               << cols << " vs " << weights.size() << " weights)";
            throw std::runtime_error(os.str());
        }
        layer.weight = Matrix(rows, cols, std::move(weights));
        const auto act = jl.at("activation").get<std::string>();
        if (act == "relu")
            layer.activation = Activation::relu;
        else if (act == "identity")
            layer.activation = Activation::identity;
        else
            throw std::runtime_error("model: unknown activation tag " + act);
        if (jl.contains("bias")) {
            layer.bias = jl["bias"].get<Vector>();
            if (layer.bias->size() != rows) {
                std::ostringstream os;
                os << "model: dimension inconsistency at layer " << index << " (bias length)";
                throw std::runtime_error(os.str());
            }
        }
        layers.push_back(std::move(layer));
        ++index;
    }
    try {
        MlpNetwork net(std::move(layers));
        if (net.num_classes() != doc.at("class_count").get<std::size_t>())
            throw std::invalid_argument("class_count does not match the final layer");
        return net;
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("model: dimension inconsistency: ") + e.what());
    }
}

void save_model(const MlpNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("model: cannot write " + path);
    out << model_to_json(net) << '\n';
}

MlpNetwork load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("model: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace sharplab

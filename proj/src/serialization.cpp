#include "kbrn/serialization.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kbrn {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.rows * m.cols) {
        throw std::invalid_argument("model json: matrix data length " +
                                    std::to_string(data.size()) + " does not match " +
                                    std::to_string(m.rows) + "x" + std::to_string(m.cols));
    }
    m.data = std::move(data);
    return m;
}

}  // namespace

json model_to_json(const RecurrentModel& model) {
    json doc;
    doc["format"] = "kbrn-model-v1";
    doc["cell"] = to_string(model.kind());
    doc["input_dim"] = model.input_dim();
    doc["hidden_dim"] = model.hidden_dim();
    doc["num_classes"] = model.num_classes();

    json params;
    if (const auto* cell = std::get_if<KbrnCell>(&model.cell)) {
        doc["dictionary"] = json{{"centers", cell->dict().centers()},
                                 {"bandwidth", cell->dict().bandwidth()}};
        doc["learn_centers"] = cell->learn_centers;
        doc["bandwidth_factor"] = model.spec.bandwidth_factor;
        params["w_in"] = matrix_to_json(cell->w_in);
        params["w_rec"] = matrix_to_json(cell->w_rec);
        params["b"] = cell->b;
        json alphas = json::array();
        for (const auto& u : cell->units) alphas.push_back(u.coeffs());
        params["alpha"] = std::move(alphas);
    } else if (const auto* tcell = std::get_if<TanhCell>(&model.cell)) {
        params["w_in"] = matrix_to_json(tcell->w_in);
        params["w_rec"] = matrix_to_json(tcell->w_rec);
        params["b"] = tcell->b;
    } else {
        const auto& lcell = std::get<LstmCell>(model.cell);
        params["w_i"] = matrix_to_json(lcell.w_i);
        params["w_f"] = matrix_to_json(lcell.w_f);
        params["w_o"] = matrix_to_json(lcell.w_o);
        params["w_g"] = matrix_to_json(lcell.w_g);
        params["b_i"] = lcell.b_i;
        params["b_f"] = lcell.b_f;
        params["b_o"] = lcell.b_o;
        params["b_g"] = lcell.b_g;
    }
    params["readout_w"] = matrix_to_json(model.readout.w);
    params["readout_b"] = model.readout.b;
    doc["params"] = std::move(params);
    return doc;
}

std::string model_to_json_text(const RecurrentModel& model, const json* config_echo) {
    json doc = model_to_json(model);
    if (config_echo != nullptr) doc["config"] = *config_echo;
    return doc.dump(2) + "\n";
}

RecurrentModel model_from_json(const json& doc) {
    if (doc.at("format").get<std::string>() != "kbrn-model-v1") {
        throw std::invalid_argument("model json: unsupported format tag");
    }
    RecurrentModel model;
    ModelSpec spec;
    spec.kind = cell_kind_from_string(doc.at("cell").get<std::string>());
    spec.input = doc.at("input_dim").get<std::size_t>();
    spec.hidden = doc.at("hidden_dim").get<std::size_t>();
    spec.num_classes = doc.at("num_classes").get<std::size_t>();

    const json& params = doc.at("params");
    if (spec.kind == CellKind::kbrn) {
        const json& dj = doc.at("dictionary");
        auto dict = std::make_shared<const KernelDictionary>(
            dj.at("centers").get<Vector>(), dj.at("bandwidth").get<double>());
        spec.dict_size = dict->size();
        spec.learn_centers = doc.value("learn_centers", false);
        spec.bandwidth_factor = doc.value("bandwidth_factor", 1.0);
        KbrnCell cell;
        cell.w_in = matrix_from_json(params.at("w_in"));
        cell.w_rec = matrix_from_json(params.at("w_rec"));
        cell.b = params.at("b").get<Vector>();
        cell.learn_centers = spec.learn_centers;
        auto alphas = params.at("alpha").get<std::vector<Vector>>();
        if (alphas.size() != spec.hidden) {
            throw std::invalid_argument("model json: coefficient count does not match hidden dim");
        }
        for (const auto& a : alphas) cell.units.emplace_back(dict, a);
        cell.set_dictionary(std::move(dict), std::move(alphas));
        model.cell = std::move(cell);
    } else if (spec.kind == CellKind::tanh_rnn) {
        TanhCell cell;
        cell.w_in = matrix_from_json(params.at("w_in"));
        cell.w_rec = matrix_from_json(params.at("w_rec"));
        cell.b = params.at("b").get<Vector>();
        model.cell = std::move(cell);
    } else {
        LstmCell cell;
        cell.w_i = matrix_from_json(params.at("w_i"));
        cell.w_f = matrix_from_json(params.at("w_f"));
        cell.w_o = matrix_from_json(params.at("w_o"));
        cell.w_g = matrix_from_json(params.at("w_g"));
        cell.b_i = params.at("b_i").get<Vector>();
        cell.b_f = params.at("b_f").get<Vector>();
        cell.b_o = params.at("b_o").get<Vector>();
        cell.b_g = params.at("b_g").get<Vector>();
        model.cell = std::move(cell);
    }
    model.readout.w = matrix_from_json(params.at("readout_w"));
    model.readout.b = params.at("readout_b").get<Vector>();
    model.spec = spec;
    return model;
}

RecurrentModel model_from_json_text(const std::string& text) {
    return model_from_json(json::parse(text));
}

void write_model(const RecurrentModel& model, const std::string& path,
                 const json* config_echo) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << model_to_json_text(model, config_echo);
}

RecurrentModel read_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return model_from_json_text(ss.str());
}

}  // namespace kbrn

#include "kbrn/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kbrn {

std::string to_string(CellKind kind) {
    switch (kind) {
        case CellKind::kbrn: return "kbrn";
        case CellKind::tanh_rnn: return "tanh";
        case CellKind::lstm: return "lstm";
    }
    return "?";
}

CellKind cell_kind_from_string(const std::string& name) {
    if (name == "kbrn") return CellKind::kbrn;
    if (name == "tanh") return CellKind::tanh_rnn;
    if (name == "lstm") return CellKind::lstm;
    throw std::invalid_argument("unknown cell kind '" + name + "' (expected kbrn|tanh|lstm)");
}

void RecurrentModel::commit_params() {
    if (is_kbrn() && kbrn().learn_centers) kbrn().sync_dictionary();
}

RecurrentModel init_model(const ModelSpec& spec, Rng& rng) {
    if (spec.hidden == 0 || spec.input == 0) {
        throw std::invalid_argument("init_model: hidden and input dims must be positive");
    }
    RecurrentModel m;
    m.spec = spec;
    switch (spec.kind) {
        case CellKind::kbrn: {
            if (spec.dict_size < 2) {
                throw std::invalid_argument("init_model: kernel dictionary needs K >= 2");
            }
            const double spacing = 6.0 / static_cast<double>(spec.dict_size - 1);
            auto dict = std::make_shared<const KernelDictionary>(
                build_dictionary_uniform(-3.0, 3.0, spec.dict_size,
                                         spacing * spec.bandwidth_factor));
            const Vector coeffs = init_coeffs_mimic(
                *dict, [](double a) { return std::tanh(a); }, 200, 1e-6);
            m.cell = init_kbrn_cell(spec.hidden, spec.input, dict, coeffs, rng,
                                    spec.learn_centers);
            break;
        }
        case CellKind::tanh_rnn:
            m.cell = init_tanh_cell(spec.hidden, spec.input, rng);
            break;
        case CellKind::lstm:
            m.cell = init_lstm_cell(spec.hidden, spec.input, rng);
            break;
    }
    m.readout = init_readout(spec.num_classes, spec.hidden, rng);
    return m;
}

namespace {

ParamView view(const std::string& name, Matrix& m) {
    return ParamView{name, m.data.data(), m.data.size()};
}
ParamView view(const std::string& name, Vector& v) {
    return ParamView{name, v.data(), v.size()};
}

}  // namespace

std::vector<ParamView> param_views(RecurrentModel& model) {
    std::vector<ParamView> out;
    if (auto* cell = std::get_if<KbrnCell>(&model.cell)) {
        out.push_back(view("w_in", cell->w_in));
        out.push_back(view("w_rec", cell->w_rec));
        out.push_back(view("b", cell->b));
        for (std::size_t i = 0; i < cell->units.size(); ++i) {
            out.push_back(view("alpha_" + std::to_string(i), cell->units[i].coeffs()));
        }
        if (cell->learn_centers) out.push_back(view("centers", cell->centers_param));
    } else if (auto* tcell = std::get_if<TanhCell>(&model.cell)) {
        out.push_back(view("w_in", tcell->w_in));
        out.push_back(view("w_rec", tcell->w_rec));
        out.push_back(view("b", tcell->b));
    } else {
        auto& lcell = std::get<LstmCell>(model.cell);
        out.push_back(view("w_i", lcell.w_i));
        out.push_back(view("w_f", lcell.w_f));
        out.push_back(view("w_o", lcell.w_o));
        out.push_back(view("w_g", lcell.w_g));
        out.push_back(view("b_i", lcell.b_i));
        out.push_back(view("b_f", lcell.b_f));
        out.push_back(view("b_o", lcell.b_o));
        out.push_back(view("b_g", lcell.b_g));
    }
    out.push_back(view("readout_w", model.readout.w));
    out.push_back(view("readout_b", model.readout.b));
    return out;
}

ForwardTrace unroll(const RecurrentModel& model, std::span<const Vector> inputs) {
    if (inputs.empty()) throw std::invalid_argument("unroll: empty sequence");
    const std::size_t h = model.hidden_dim();
    if (auto* cell = std::get_if<KbrnCell>(&model.cell)) {
        std::vector<KbrnCell::Step> steps;
        steps.reserve(inputs.size());
        Vector hv(h, 0.0);
        for (const auto& x : inputs) {
            steps.push_back(cell->step(x, hv));
            hv = steps.back().h;
        }
        return steps;
    }
    if (auto* tcell = std::get_if<TanhCell>(&model.cell)) {
        std::vector<TanhCell::Step> steps;
        steps.reserve(inputs.size());
        Vector hv(h, 0.0);
        for (const auto& x : inputs) {
            steps.push_back(tcell->step(x, hv));
            hv = steps.back().h;
        }
        return steps;
    }
    const auto& lcell = std::get<LstmCell>(model.cell);
    std::vector<LstmCell::Step> steps;
    steps.reserve(inputs.size());
    Vector hv(h, 0.0);
    Vector cv(h, 0.0);
    for (const auto& x : inputs) {
        steps.push_back(lcell.step(x, hv, cv));
        hv = steps.back().h;
        cv = steps.back().c;
    }
    return steps;
}

const Vector& final_hidden(const ForwardTrace& trace) {
    return std::visit([](const auto& steps) -> const Vector& { return steps.back().h; }, trace);
}

Vector model_logits(const RecurrentModel& model, std::span<const Vector> inputs) {
    const ForwardTrace trace = unroll(model, inputs);
    return readout_logits(model.readout, final_hidden(trace));
}

int predict_class(const RecurrentModel& model, std::span<const Vector> inputs) {
    const Vector logits = model_logits(model, inputs);
    return static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
}

}  // namespace kbrn

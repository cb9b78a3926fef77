#include "kbrn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace kbrn {

SoftmaxLoss softmax_cross_entropy(const Vector& logits, int label) {
    const std::size_t c = logits.size();
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
        throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                    " outside " + std::to_string(c) + " classes");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    Vector p(c);
    for (std::size_t i = 0; i < c; ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    const double loss = std::log(z) - (logits[static_cast<std::size_t>(label)] - mx);
    p[static_cast<std::size_t>(label)] -= 1.0;
    return {loss, std::move(p)};
}

GradientSet zeros_like(const RecurrentModel& model) {
    GradientSet g;
    if (const auto* cell = std::get_if<KbrnCell>(&model.cell)) {
        KbrnGradients kg;
        kg.w_in = Matrix(cell->w_in.rows, cell->w_in.cols);
        kg.w_rec = Matrix(cell->w_rec.rows, cell->w_rec.cols);
        kg.b = Vector(cell->b.size(), 0.0);
        kg.alphas.assign(cell->units.size(), Vector(cell->dict().size(), 0.0));
        kg.has_centers = cell->learn_centers;
        if (kg.has_centers) kg.centers = Vector(cell->dict().size(), 0.0);
        g.cell = std::move(kg);
    } else if (const auto* tcell = std::get_if<TanhCell>(&model.cell)) {
        TanhGradients tg;
        tg.w_in = Matrix(tcell->w_in.rows, tcell->w_in.cols);
        tg.w_rec = Matrix(tcell->w_rec.rows, tcell->w_rec.cols);
        tg.b = Vector(tcell->b.size(), 0.0);
        g.cell = std::move(tg);
    } else {
        const auto& lcell = std::get<LstmCell>(model.cell);
        LstmGradients lg;
        lg.w_i = Matrix(lcell.w_i.rows, lcell.w_i.cols);
        lg.w_f = Matrix(lcell.w_f.rows, lcell.w_f.cols);
        lg.w_o = Matrix(lcell.w_o.rows, lcell.w_o.cols);
        lg.w_g = Matrix(lcell.w_g.rows, lcell.w_g.cols);
        lg.b_i = Vector(lcell.b_i.size(), 0.0);
        lg.b_f = Vector(lcell.b_f.size(), 0.0);
        lg.b_o = Vector(lcell.b_o.size(), 0.0);
        lg.b_g = Vector(lcell.b_g.size(), 0.0);
        g.cell = std::move(lg);
    }
    g.readout.w = Matrix(model.readout.w.rows, model.readout.w.cols);
    g.readout.b = Vector(model.readout.b.size(), 0.0);
    return g;
}

namespace {

ParamView view(const std::string& name, Matrix& m) {
    return ParamView{name, m.data.data(), m.data.size()};
}
ParamView view(const std::string& name, Vector& v) {
    return ParamView{name, v.data(), v.size()};
}

}  // namespace

std::vector<ParamView> param_views(GradientSet& grads) {
    std::vector<ParamView> out;
    if (auto* kg = std::get_if<KbrnGradients>(&grads.cell)) {
        out.push_back(view("w_in", kg->w_in));
        out.push_back(view("w_rec", kg->w_rec));
        out.push_back(view("b", kg->b));
        for (std::size_t i = 0; i < kg->alphas.size(); ++i) {
            out.push_back(view("alpha_" + std::to_string(i), kg->alphas[i]));
        }
        if (kg->has_centers) out.push_back(view("centers", kg->centers));
    } else if (auto* tg = std::get_if<TanhGradients>(&grads.cell)) {
        out.push_back(view("w_in", tg->w_in));
        out.push_back(view("w_rec", tg->w_rec));
        out.push_back(view("b", tg->b));
    } else {
        auto& lg = std::get<LstmGradients>(grads.cell);
        out.push_back(view("w_i", lg.w_i));
        out.push_back(view("w_f", lg.w_f));
        out.push_back(view("w_o", lg.w_o));
        out.push_back(view("w_g", lg.w_g));
        out.push_back(view("b_i", lg.b_i));
        out.push_back(view("b_f", lg.b_f));
        out.push_back(view("b_o", lg.b_o));
        out.push_back(view("b_g", lg.b_g));
    }
    out.push_back(view("readout_w", grads.readout.w));
    out.push_back(view("readout_b", grads.readout.b));
    return out;
}

void scale(GradientSet& grads, double factor) {
    for (auto& pv : param_views(grads)) {
        for (std::size_t i = 0; i < pv.size; ++i) pv.data[i] *= factor;
    }
}

void accumulate(GradientSet& into, const GradientSet& other) {
    auto dst = param_views(into);
    auto src = param_views(const_cast<GradientSet&>(other));
    if (dst.size() != src.size()) throw ShapeError("accumulate: gradient sets differ in layout");
    for (std::size_t p = 0; p < dst.size(); ++p) {
        if (dst[p].size != src[p].size) {
            throw ShapeError("accumulate: buffer " + dst[p].name + " sizes " +
                             std::to_string(dst[p].size) + " vs " + std::to_string(src[p].size));
        }
        for (std::size_t i = 0; i < dst[p].size; ++i) dst[p].data[i] += src[p].data[i];
    }
}

double global_norm(GradientSet& grads) {
    double acc = 0.0;
    for (auto& pv : param_views(grads)) {
        for (std::size_t i = 0; i < pv.size; ++i) acc += pv.data[i] * pv.data[i];
    }
    return std::sqrt(acc);
}

bool has_non_finite(GradientSet& grads) {
    for (auto& pv : param_views(grads)) {
        for (std::size_t i = 0; i < pv.size; ++i) {
            if (!std::isfinite(pv.data[i])) return true;
        }
    }
    return false;
}

namespace {

void check_finite_grad(const Vector& grad_h, std::size_t timestep) {
    for (double v : grad_h) {
        if (!std::isfinite(v)) {
            throw NumericalError("bptt: non-finite gradient at timestep " +
                                 std::to_string(timestep));
        }
    }
}

// lambda_weight decays the weight matrices only (never biases or kernel
// coefficients, which have their own penalty).
template <typename AddW>
void weight_decay_terms(const RecurrentModel& model, GradientSet& grads, double lambda_weight,
                        double& loss, AddW&& add) {
    if (lambda_weight == 0.0) return;
    if (const auto* cell = std::get_if<KbrnCell>(&model.cell)) {
        auto& kg = std::get<KbrnGradients>(grads.cell);
        loss += lambda_weight * (frobenius_sq(cell->w_in) + frobenius_sq(cell->w_rec));
        add(cell->w_in, kg.w_in);
        add(cell->w_rec, kg.w_rec);
    } else if (const auto* tcell = std::get_if<TanhCell>(&model.cell)) {
        auto& tg = std::get<TanhGradients>(grads.cell);
        loss += lambda_weight * (frobenius_sq(tcell->w_in) + frobenius_sq(tcell->w_rec));
        add(tcell->w_in, tg.w_in);
        add(tcell->w_rec, tg.w_rec);
    } else {
        const auto& lcell = std::get<LstmCell>(model.cell);
        auto& lg = std::get<LstmGradients>(grads.cell);
        loss += lambda_weight * (frobenius_sq(lcell.w_i) + frobenius_sq(lcell.w_f) +
                                 frobenius_sq(lcell.w_o) + frobenius_sq(lcell.w_g));
        add(lcell.w_i, lg.w_i);
        add(lcell.w_f, lg.w_f);
        add(lcell.w_o, lg.w_o);
        add(lcell.w_g, lg.w_g);
    }
    loss += lambda_weight * frobenius_sq(model.readout.w);
    add(model.readout.w, grads.readout.w);
}

}  // namespace

BpttResult bptt(const RecurrentModel& model, std::span<const Vector> inputs, int label,
                double lambda_smooth, double lambda_weight) {
    if (inputs.empty()) throw std::invalid_argument("bptt: empty sequence");
    const std::size_t t_max = inputs.size();
    const std::size_t h = model.hidden_dim();

    BpttResult res;
    res.grads = zeros_like(model);

    const ForwardTrace trace = unroll(model, inputs);
    res.logits = readout_logits(model.readout, final_hidden(trace));
    auto [loss, grad_logits] = softmax_cross_entropy(res.logits, label);
    res.loss = loss;
    if (!std::isfinite(res.loss)) throw NumericalError("bptt: non-finite loss");

    add_outer(res.grads.readout.w, grad_logits, final_hidden(trace));
    for (std::size_t i = 0; i < grad_logits.size(); ++i) res.grads.readout.b[i] += grad_logits[i];
    Vector grad_h = mat_tvec(model.readout.w, grad_logits);

    const Vector zero_h(h, 0.0);
    if (const auto* cell = std::get_if<KbrnCell>(&model.cell)) {
        const auto& steps = std::get<std::vector<KbrnCell::Step>>(trace);
        auto& kg = std::get<KbrnGradients>(res.grads.cell);
        Vector grad_prev;
        for (std::size_t t = t_max; t-- > 0;) {
            check_finite_grad(grad_h, t + 1);
            const Vector& h_prev = t == 0 ? zero_h : steps[t - 1].h;
            kbrn_backward_step(*cell, steps[t], inputs[t], h_prev, grad_h, kg, grad_prev);
            grad_h = std::move(grad_prev);
        }
        if (lambda_smooth != 0.0) {
            const GramMatrix& gram = cell->gram();
            for (std::size_t i = 0; i < cell->units.size(); ++i) {
                res.loss += lambda_smooth * smoothness_penalty(cell->units[i], gram);
                const Vector pg = smoothness_penalty_grad(cell->units[i], gram);
                for (std::size_t k = 0; k < pg.size(); ++k) {
                    kg.alphas[i][k] += lambda_smooth * pg[k];
                }
            }
        }
    } else if (const auto* tcell = std::get_if<TanhCell>(&model.cell)) {
        const auto& steps = std::get<std::vector<TanhCell::Step>>(trace);
        auto& tg = std::get<TanhGradients>(res.grads.cell);
        Vector grad_prev;
        for (std::size_t t = t_max; t-- > 0;) {
            check_finite_grad(grad_h, t + 1);
            const Vector& h_prev = t == 0 ? zero_h : steps[t - 1].h;
            tanh_backward_step(*tcell, steps[t], inputs[t], h_prev, grad_h, tg, grad_prev);
            grad_h = std::move(grad_prev);
        }
    } else {
        const auto& lcell = std::get<LstmCell>(model.cell);
        const auto& steps = std::get<std::vector<LstmCell::Step>>(trace);
        auto& lg = std::get<LstmGradients>(res.grads.cell);
        Vector grad_c(h, 0.0);
        Vector grad_prev, grad_c_prev;
        for (std::size_t t = t_max; t-- > 0;) {
            check_finite_grad(grad_h, t + 1);
            const Vector& h_prev = t == 0 ? zero_h : steps[t - 1].h;
            const Vector& c_prev = t == 0 ? zero_h : steps[t - 1].c;
            lstm_backward_step(lcell, steps[t], inputs[t], h_prev, c_prev, grad_h, grad_c, lg,
                               grad_prev, grad_c_prev);
            grad_h = std::move(grad_prev);
            grad_c = std::move(grad_c_prev);
        }
    }

    weight_decay_terms(model, res.grads, lambda_weight, res.loss,
                       [lambda_weight](const Matrix& w, Matrix& gw) {
                           for (std::size_t i = 0; i < w.data.size(); ++i) {
                               gw.data[i] += 2.0 * lambda_weight * w.data[i];
                           }
                       });
    return res;
}

Vector finite_diff(const std::function<double()>& f, double* data, std::size_t n, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_diff: eps must be positive");
    Vector g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double orig = data[i];
        data[i] = orig + eps;
        const double fp = f();
        data[i] = orig - eps;
        const double fm = f();
        data[i] = orig;
        g[i] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

GradientSet finite_diff_grad(RecurrentModel& model, const std::function<double()>& loss_fn,
                             double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be positive");
    GradientSet out = zeros_like(model);
    auto params = param_views(model);
    auto grads = param_views(out);
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].size; ++i) {
            const double orig = params[p].data[i];
            params[p].data[i] = orig + eps;
            model.commit_params();
            const double fp = loss_fn();
            params[p].data[i] = orig - eps;
            model.commit_params();
            const double fm = loss_fn();
            params[p].data[i] = orig;
            model.commit_params();
            grads[p].data[i] = (fp - fm) / (2.0 * eps);
        }
    }
    return out;
}

void sgd_step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
              double lr) {
    if (params.size() != grads.size()) throw ShapeError("sgd_step: layout mismatch");
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (params[p].size != grads[p].size) {
            throw ShapeError("sgd_step: buffer " + params[p].name + " sizes " +
                             std::to_string(params[p].size) + " vs " +
                             std::to_string(grads[p].size));
        }
        for (std::size_t i = 0; i < params[p].size; ++i) {
            params[p].data[i] -= lr * grads[p].data[i];
        }
    }
}

AdamState init_adam_state(const std::vector<ParamView>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& pv : params) {
        s.m.emplace_back(pv.size, 0.0);
        s.v.emplace_back(pv.size, 0.0);
    }
    return s;
}

void adam_step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeError("adam_step: layout mismatch");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (params[p].size != grads[p].size || params[p].size != state.m[p].size()) {
            throw ShapeError("adam_step: buffer " + params[p].name + " shape mismatch");
        }
        for (std::size_t i = 0; i < params[p].size; ++i) {
            const double g = grads[p].data[i];
            state.m[p][i] = beta1 * state.m[p][i] + (1.0 - beta1) * g;
            state.v[p][i] = beta2 * state.v[p][i] + (1.0 - beta2) * g * g;
            const double mhat = state.m[p][i] / bc1;
            const double vhat = state.v[p][i] / bc2;
            params[p].data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

Optimizer optimizer_from_string(const std::string& name) {
    if (name == "sgd") return Optimizer::sgd;
    if (name == "adam") return Optimizer::adam;
    throw std::invalid_argument("unknown optimizer '" + name + "' (expected sgd|adam)");
}

std::string to_string(Optimizer opt) { return opt == Optimizer::sgd ? "sgd" : "adam"; }

namespace {

std::string fmt9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

std::string history_to_csv(const TrainHistory& history) {
    std::ostringstream out;
    out << "epoch,train_loss,train_acc,val_acc,seconds\n";
    for (const auto& r : history.records) {
        // seconds pinned to 0 in the CSV body: reruns must be byte-identical,
        // measured timings are in the summary JSON
        out << r.epoch << ',' << fmt9(r.train_loss) << ',' << fmt9(r.train_acc) << ','
            << fmt9(r.val_acc) << ',' << fmt9(0.0) << '\n';
    }
    return out.str();
}

BatchResult batch_gradients(const RecurrentModel& model,
                            const std::vector<std::vector<Vector>>& inputs,
                            const std::vector<int>& labels,
                            std::span<const std::size_t> indices, double lambda_smooth,
                            double lambda_weight) {
    if (indices.empty()) throw std::invalid_argument("batch_gradients: empty batch");
    BatchResult out;
    out.grads = zeros_like(model);
    for (const std::size_t idx : indices) {
        BpttResult r = bptt(model, inputs[idx], labels[idx], lambda_smooth, lambda_weight);
        out.loss += r.loss;
        accumulate(out.grads, r.grads);
        const auto arg = static_cast<int>(
            std::max_element(r.logits.begin(), r.logits.end()) - r.logits.begin());
        if (arg == labels[idx]) ++out.correct;
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    out.loss *= inv;
    scale(out.grads, inv);
    return out;
}

double dataset_accuracy(const RecurrentModel& model,
                        const std::vector<std::vector<Vector>>& inputs,
                        const std::vector<int>& labels) {
    if (inputs.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (predict_class(model, inputs[i]) == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

namespace {

// Pre-activation pool for dictionary construction: capped reservoir so the
// clustering cost stays bounded.
class ReservoirPool {
public:
    explicit ReservoirPool(std::size_t cap, Rng& rng) : cap_(cap), rng_(rng) {}

    void add(double v) {
        ++seen_;
        if (pool_.size() < cap_) {
            pool_.push_back(v);
            return;
        }
        const auto j = static_cast<std::uint64_t>(
            rng_.uniform_int(0, static_cast<std::int64_t>(seen_) - 1));
        if (j < cap_) pool_[static_cast<std::size_t>(j)] = v;
    }

    Vector take() { return std::move(pool_); }

private:
    std::size_t cap_;
    Rng& rng_;
    Vector pool_;
    std::uint64_t seen_ = 0;
};

void build_kbrn_dictionary(RecurrentModel& model,
                           const std::vector<std::vector<Vector>>& inputs, Rng& rng) {
    auto& cell = model.kbrn();
    ReservoirPool pool(10000, rng);
    for (const auto& seq : inputs) {
        Vector h(cell.hidden_dim(), 0.0);
        for (const auto& x : seq) {
            auto step = cell.step(x, h);
            for (double a : step.a) pool.add(a);
            h = std::move(step.h);
        }
    }
    const Vector samples = pool.take();
    auto dict = std::make_shared<const KernelDictionary>(
        build_dictionary_from_samples(samples, model.spec.dict_size,
                                      model.spec.bandwidth_factor, rng));
    const Vector coeffs = init_coeffs_mimic(
        *dict, [](double a) { return std::tanh(a); }, 200, 1e-6);
    std::vector<Vector> per_unit(cell.hidden_dim(), coeffs);
    cell.set_dictionary(std::move(dict), std::move(per_unit));
}

}  // namespace

TrainResult train(ModelSpec spec, const SequenceDataset& train_ds,
                  const SequenceDataset& val_ds, const TrainConfig& cfg) {
    if (train_ds.size() == 0) throw std::invalid_argument("train: empty training set");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
    if (cfg.lambda_smooth < 0.0 || cfg.lambda_weight < 0.0) {
        throw std::invalid_argument("train: penalty weights must be nonnegative");
    }

    spec.input = train_ds.alphabet;
    spec.num_classes = train_ds.num_classes;

    std::vector<std::vector<Vector>> train_x;
    train_x.reserve(train_ds.size());
    for (const auto& s : train_ds.sequences) train_x.push_back(encode_one_hot(s, spec.input));
    std::vector<std::vector<Vector>> val_x;
    val_x.reserve(val_ds.size());
    for (const auto& s : val_ds.sequences) val_x.push_back(encode_one_hot(s, spec.input));

    Rng rng(cfg.seed);
    TrainResult result{init_model(spec, rng), {}, false};
    RecurrentModel& model = result.model;

    // warm-up pass: run the mimic-initialized model over the training set and
    // cluster the observed pre-activations into the final dictionary
    if (model.is_kbrn()) build_kbrn_dictionary(model, train_x, rng);

    auto params = param_views(model);
    AdamState adam = init_adam_state(params);

    std::vector<std::size_t> order(train_x.size());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t n = train_x.size();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        // Fisher-Yates with the training rng
        for (std::size_t i = n; i > 1; --i) {
            const auto j = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t correct = 0;
        bool bad = false;
        for (std::size_t start = 0; start < n && !bad; start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, n - start);
            std::span<const std::size_t> idx(order.data() + start, len);
            try {
                BatchResult batch = batch_gradients(model, train_x, train_ds.labels, idx,
                                                    cfg.lambda_smooth, cfg.lambda_weight);
                if (!std::isfinite(batch.loss) || has_non_finite(batch.grads)) {
                    bad = true;
                    break;
                }
                loss_sum += batch.loss * static_cast<double>(len);
                correct += batch.correct;
                if (cfg.clip_norm > 0.0) {
                    const double gn = global_norm(batch.grads);
                    if (gn > cfg.clip_norm) scale(batch.grads, cfg.clip_norm / gn);
                }
                auto gviews = param_views(batch.grads);
                if (cfg.optimizer == Optimizer::adam) {
                    adam_step(params, gviews, adam, cfg.lr);
                } else {
                    sgd_step(params, gviews, cfg.lr);
                }
                model.commit_params();
            } catch (const NumericalError&) {
                bad = true;
            }
        }
        if (bad) {
            result.diverged = true;  // history already holds the last good epoch
            break;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
        rec.val_acc = dataset_accuracy(model, val_x, val_ds.labels);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.records.push_back(rec);

        if (cfg.stop_at_val_acc > 0.0 && rec.val_acc >= cfg.stop_at_val_acc) break;
    }
    return result;
}

}  // namespace kbrn

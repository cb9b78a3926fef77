#include "kbrn/cells.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace kbrn {

namespace {

void check_len(const Vector& v, std::size_t want, const char* what) {
    if (v.size() != want) {
        throw ShapeError(std::string(what) + ": got length " + std::to_string(v.size()) +
                         ", want " + std::to_string(want));
    }
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    // std = 1/sqrt(fan-in) keeps warm-up pre-activations near the
    // dictionary-construction range
    Matrix m(rows, cols);
    const double std = 1.0 / std::sqrt(static_cast<double>(cols));
    for (auto& x : m.data) x = rng.gaussian(0.0, std);
    return m;
}

}  // namespace

Vector readout_logits(const Readout& r, const Vector& h) {
    Vector logits = mat_vec(r.w, h);
    check_len(r.b, logits.size(), "readout bias");
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += r.b[i];
    return logits;
}

// --------------------------------------------------------------------------
// Feedforward layer
// --------------------------------------------------------------------------

FeedforwardLayer::Step FeedforwardLayer::forward(const Vector& x) const {
    Step s;
    s.a = mat_vec(w, x);
    for (std::size_t i = 0; i < s.a.size(); ++i) s.a[i] += b[i];
    s.h.resize(s.a.size());
    s.kappa.resize(s.a.size());
    for (std::size_t i = 0; i < s.a.size(); ++i) {
        s.kappa[i] = units[i].grad_coeffs(s.a[i]);  // kernel values at a_i
        s.h[i] = dot(units[i].coeffs(), s.kappa[i]);
    }
    return s;
}

FeedforwardLayer::Gradients FeedforwardLayer::backward(const Step& step, const Vector& x,
                                                       const Vector& grad_h) const {
    check_len(grad_h, out_dim(), "ff_backward grad_h");
    Gradients g;
    g.w = Matrix(w.rows, w.cols);
    g.b = Vector(b.size(), 0.0);
    g.alphas.resize(units.size());
    const double gamma = units.front().dict().bandwidth();
    const auto& centers = units.front().dict().centers();
    const double inv_g2 = 1.0 / (gamma * gamma);

    Vector grad_a(out_dim(), 0.0);
    for (std::size_t i = 0; i < out_dim(); ++i) {
        // d sigma / d a from the cached kernel values
        double slope = 0.0;
        const Vector& kap = step.kappa[i];
        const Vector& alpha = units[i].coeffs();
        for (std::size_t k = 0; k < kap.size(); ++k) {
            slope += alpha[k] * (centers[k] - step.a[i]) * inv_g2 * kap[k];
        }
        grad_a[i] = grad_h[i] * slope;
        g.alphas[i] = kap;
        for (auto& v : g.alphas[i]) v *= grad_h[i];
        g.b[i] = grad_a[i];
    }
    add_outer(g.w, grad_a, x);
    g.x = mat_tvec(w, grad_a);
    return g;
}

FeedforwardLayer init_feedforward_layer(std::size_t out, std::size_t in,
                                        std::shared_ptr<const KernelDictionary> dict,
                                        const Vector& coeffs, Rng& rng) {
    FeedforwardLayer layer;
    layer.w = gaussian_matrix(out, in, rng);
    layer.b = Vector(out, 0.0);
    layer.units.reserve(out);
    for (std::size_t i = 0; i < out; ++i) layer.units.emplace_back(dict, coeffs);
    return layer;
}

// --------------------------------------------------------------------------
// KBRN cell
// --------------------------------------------------------------------------

KbrnCell::Step KbrnCell::step(const Vector& x, const Vector& h_prev) const {
    check_len(h_prev, hidden_dim(), "kbrn_step h_prev");
    Step s;
    s.a = mat_vec(w_in, x);
    const Vector rec = mat_vec(w_rec, h_prev);
    for (std::size_t i = 0; i < s.a.size(); ++i) s.a[i] += rec[i] + b[i];
    s.h.resize(s.a.size());
    s.kappa.resize(s.a.size());
    for (std::size_t i = 0; i < s.a.size(); ++i) {
        s.kappa[i] = units[i].grad_coeffs(s.a[i]);
        s.h[i] = dot(units[i].coeffs(), s.kappa[i]);
    }
    return s;
}

void KbrnCell::set_dictionary(std::shared_ptr<const KernelDictionary> dict,
                              std::vector<Vector> coeffs) {
    if (coeffs.size() != units.size()) {
        throw ShapeError("set_dictionary: " + std::to_string(coeffs.size()) +
                         " coefficient vectors for " + std::to_string(units.size()) + " units");
    }
    gram_ = gram_matrix(*dict);
    std::vector<KernelActivation> next;
    next.reserve(units.size());
    for (auto& c : coeffs) next.emplace_back(dict, std::move(c));
    units = std::move(next);
    if (learn_centers) centers_param = dict->centers();
}

void KbrnCell::sync_dictionary() {
    if (!learn_centers) return;
    Vector centers = centers_param;
    std::vector<std::size_t> order(centers.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
    bool permuted = false;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] != i) {
            permuted = true;
            break;
        }
    }
    Vector sorted(centers.size());
    for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = centers[order[i]];
    // keep centers strictly increasing even if updates made two collide
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (!(sorted[i] > sorted[i - 1])) {
            sorted[i] = std::nextafter(sorted[i - 1], std::numeric_limits<double>::infinity());
        }
    }
    auto dict = std::make_shared<const KernelDictionary>(sorted, this->dict().bandwidth());
    std::vector<Vector> coeffs;
    coeffs.reserve(units.size());
    for (auto& u : units) {
        Vector alpha = u.coeffs();
        if (permuted) {
            Vector p(alpha.size());
            for (std::size_t i = 0; i < order.size(); ++i) p[i] = alpha[order[i]];
            alpha = std::move(p);
        }
        coeffs.push_back(std::move(alpha));
    }
    set_dictionary(std::move(dict), std::move(coeffs));
}

void kbrn_backward_step(const KbrnCell& cell, const KbrnCell::Step& step, const Vector& x,
                        const Vector& h_prev, const Vector& grad_h, KbrnGradients& grads,
                        Vector& grad_h_prev) {
    const std::size_t h = cell.hidden_dim();
    check_len(grad_h, h, "kbrn_backward grad_h");
    const auto& dict = cell.dict();
    const auto& centers = dict.centers();
    const double inv_g2 = 1.0 / (dict.bandwidth() * dict.bandwidth());

    Vector grad_a(h, 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        const Vector& kap = step.kappa[i];
        const Vector& alpha = cell.units[i].coeffs();
        const double gh = grad_h[i];
        double slope = 0.0;
        Vector& ga = grads.alphas[i];
        for (std::size_t k = 0; k < kap.size(); ++k) {
            const double diff = centers[k] - step.a[i];
            slope += alpha[k] * diff * inv_g2 * kap[k];
            ga[k] += gh * kap[k];
            if (grads.has_centers) {
                // d kappa / d c_k = (a - c_k)/gamma^2 * kappa
                grads.centers[k] += gh * alpha[k] * (-diff) * inv_g2 * kap[k];
            }
        }
        grad_a[i] = gh * slope;
        grads.b[i] += grad_a[i];
    }
    add_outer(grads.w_in, grad_a, x);
    add_outer(grads.w_rec, grad_a, h_prev);
    grad_h_prev = mat_tvec(cell.w_rec, grad_a);
}

KbrnCell init_kbrn_cell(std::size_t hidden, std::size_t input,
                        std::shared_ptr<const KernelDictionary> dict, const Vector& coeffs,
                        Rng& rng, bool learn_centers) {
    KbrnCell cell;
    cell.w_in = gaussian_matrix(hidden, input, rng);
    cell.w_rec = gaussian_matrix(hidden, hidden, rng);
    cell.b = Vector(hidden, 0.0);
    cell.learn_centers = learn_centers;
    std::vector<Vector> cs(hidden, coeffs);
    cell.units.reserve(hidden);
    for (std::size_t i = 0; i < hidden; ++i) cell.units.emplace_back(dict, coeffs);
    cell.set_dictionary(dict, std::move(cs));
    return cell;
}

// --------------------------------------------------------------------------
// tanh cell
// --------------------------------------------------------------------------

TanhCell::Step TanhCell::step(const Vector& x, const Vector& h_prev) const {
    check_len(h_prev, hidden_dim(), "tanh_step h_prev");
    Step s;
    s.a = mat_vec(w_in, x);
    const Vector rec = mat_vec(w_rec, h_prev);
    s.h.resize(s.a.size());
    for (std::size_t i = 0; i < s.a.size(); ++i) {
        s.a[i] += rec[i] + b[i];
        s.h[i] = std::tanh(s.a[i]);
    }
    return s;
}

void tanh_backward_step(const TanhCell& cell, const TanhCell::Step& step, const Vector& x,
                        const Vector& h_prev, const Vector& grad_h, TanhGradients& grads,
                        Vector& grad_h_prev) {
    const std::size_t h = cell.hidden_dim();
    check_len(grad_h, h, "tanh_backward grad_h");
    Vector grad_a(h);
    for (std::size_t i = 0; i < h; ++i) {
        grad_a[i] = grad_h[i] * (1.0 - step.h[i] * step.h[i]);
        grads.b[i] += grad_a[i];
    }
    add_outer(grads.w_in, grad_a, x);
    add_outer(grads.w_rec, grad_a, h_prev);
    grad_h_prev = mat_tvec(cell.w_rec, grad_a);
}

TanhCell init_tanh_cell(std::size_t hidden, std::size_t input, Rng& rng) {
    TanhCell cell;
    cell.w_in = gaussian_matrix(hidden, input, rng);
    cell.w_rec = gaussian_matrix(hidden, hidden, rng);
    cell.b = Vector(hidden, 0.0);
    return cell;
}

// --------------------------------------------------------------------------
// LSTM cell
// --------------------------------------------------------------------------

LstmCell::Step LstmCell::step(const Vector& x, const Vector& h_prev, const Vector& c_prev) const {
    const std::size_t h = hidden_dim();
    check_len(h_prev, h, "lstm_step h_prev");
    check_len(c_prev, h, "lstm_step c_prev");
    if (x.size() != input_dim()) {
        throw ShapeError("lstm_step: input length " + std::to_string(x.size()) + ", want " +
                         std::to_string(input_dim()));
    }
    Vector z(x.size() + h);
    std::copy(x.begin(), x.end(), z.begin());
    std::copy(h_prev.begin(), h_prev.end(), z.begin() + static_cast<std::ptrdiff_t>(x.size()));

    Step s;
    s.i = mat_vec(w_i, z);
    s.f = mat_vec(w_f, z);
    s.o = mat_vec(w_o, z);
    s.g = mat_vec(w_g, z);
    s.c.resize(h);
    s.tanh_c.resize(h);
    s.h.resize(h);
    for (std::size_t j = 0; j < h; ++j) {
        s.i[j] = sigmoid(s.i[j] + b_i[j]);
        s.f[j] = sigmoid(s.f[j] + b_f[j]);
        s.o[j] = sigmoid(s.o[j] + b_o[j]);
        s.g[j] = std::tanh(s.g[j] + b_g[j]);
        s.c[j] = s.f[j] * c_prev[j] + s.i[j] * s.g[j];
        s.tanh_c[j] = std::tanh(s.c[j]);
        s.h[j] = s.o[j] * s.tanh_c[j];
    }
    return s;
}

void lstm_backward_step(const LstmCell& cell, const LstmCell::Step& step, const Vector& x,
                        const Vector& h_prev, const Vector& c_prev, const Vector& grad_h,
                        const Vector& grad_c, LstmGradients& grads, Vector& grad_h_prev,
                        Vector& grad_c_prev) {
    const std::size_t h = cell.hidden_dim();
    const std::size_t d = cell.input_dim();
    check_len(grad_h, h, "lstm_backward grad_h");
    check_len(grad_c, h, "lstm_backward grad_c");

    Vector z(d + h);
    std::copy(x.begin(), x.end(), z.begin());
    std::copy(h_prev.begin(), h_prev.end(), z.begin() + static_cast<std::ptrdiff_t>(d));

    Vector da_i(h), da_f(h), da_o(h), da_g(h);
    grad_c_prev.assign(h, 0.0);
    for (std::size_t j = 0; j < h; ++j) {
        const double dc = grad_c[j] + grad_h[j] * step.o[j] * (1.0 - step.tanh_c[j] * step.tanh_c[j]);
        const double do_ = grad_h[j] * step.tanh_c[j];
        const double di = dc * step.g[j];
        const double df = dc * c_prev[j];
        const double dg = dc * step.i[j];
        da_i[j] = di * step.i[j] * (1.0 - step.i[j]);
        da_f[j] = df * step.f[j] * (1.0 - step.f[j]);
        da_o[j] = do_ * step.o[j] * (1.0 - step.o[j]);
        da_g[j] = dg * (1.0 - step.g[j] * step.g[j]);
        grad_c_prev[j] = dc * step.f[j];
        grads.b_i[j] += da_i[j];
        grads.b_f[j] += da_f[j];
        grads.b_o[j] += da_o[j];
        grads.b_g[j] += da_g[j];
    }
    add_outer(grads.w_i, da_i, z);
    add_outer(grads.w_f, da_f, z);
    add_outer(grads.w_o, da_o, z);
    add_outer(grads.w_g, da_g, z);

    Vector dz = mat_tvec(cell.w_i, da_i);
    const Vector dz_f = mat_tvec(cell.w_f, da_f);
    const Vector dz_o = mat_tvec(cell.w_o, da_o);
    const Vector dz_g = mat_tvec(cell.w_g, da_g);
    for (std::size_t j = 0; j < dz.size(); ++j) dz[j] += dz_f[j] + dz_o[j] + dz_g[j];
    grad_h_prev.assign(dz.begin() + static_cast<std::ptrdiff_t>(d), dz.end());
}

LstmCell init_lstm_cell(std::size_t hidden, std::size_t input, Rng& rng) {
    LstmCell cell;
    const std::size_t cat = input + hidden;
    cell.w_i = gaussian_matrix(hidden, cat, rng);
    cell.w_f = gaussian_matrix(hidden, cat, rng);
    cell.w_o = gaussian_matrix(hidden, cat, rng);
    cell.w_g = gaussian_matrix(hidden, cat, rng);
    cell.b_i = Vector(hidden, 0.0);
    cell.b_f = Vector(hidden, 1.0);  // forget bias +1, standard long-dependency baseline
    cell.b_o = Vector(hidden, 0.0);
    cell.b_g = Vector(hidden, 0.0);
    return cell;
}

Readout init_readout(std::size_t num_classes, std::size_t hidden, Rng& rng) {
    if (num_classes < 2) {
        throw std::invalid_argument("init_readout: need at least 2 classes, got " +
                                    std::to_string(num_classes));
    }
    Readout r;
    r.w = gaussian_matrix(num_classes, hidden, rng);
    r.b = Vector(num_classes, 0.0);
    return r;
}

}  // namespace kbrn

#include "kbrn/kernel_activation.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

namespace kbrn {

double gaussian_kernel(double a, double c, double gamma) {
    const double d = a - c;
    return std::exp(-d * d / (2.0 * gamma * gamma));
}

double gaussian_kernel_dc(double a, double c, double gamma) {
    const double d = a - c;
    return d / (gamma * gamma) * std::exp(-d * d / (2.0 * gamma * gamma));
}

KernelDictionary::KernelDictionary(Vector centers, double bandwidth)
    : centers_(std::move(centers)), bandwidth_(bandwidth) {
    if (centers_.empty()) throw std::invalid_argument("KernelDictionary: no centers");
    if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) {
        throw std::invalid_argument("KernelDictionary: bandwidth must be positive, got " +
                                    std::to_string(bandwidth_));
    }
    for (std::size_t i = 0; i < centers_.size(); ++i) {
        if (!std::isfinite(centers_[i])) {
            throw std::invalid_argument("KernelDictionary: non-finite center");
        }
        if (i > 0 && !(centers_[i - 1] < centers_[i])) {
            throw std::invalid_argument("KernelDictionary: centers must be strictly increasing");
        }
    }
}

GramMatrix gram_matrix(const KernelDictionary& dict) {
    const auto& c = dict.centers();
    const std::size_t k = c.size();
    Matrix g(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        g(i, i) = 1.0;
        for (std::size_t j = i + 1; j < k; ++j) {
            const double v = gaussian_kernel(c[i], c[j], dict.bandwidth());
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return GramMatrix{std::move(g)};
}

KernelActivation::KernelActivation(std::shared_ptr<const KernelDictionary> dict, Vector coeffs)
    : dict_(std::move(dict)), coeffs_(std::move(coeffs)) {
    if (!dict_) throw std::invalid_argument("KernelActivation: null dictionary");
    if (coeffs_.size() != dict_->size()) {
        throw ShapeError("KernelActivation: " + std::to_string(coeffs_.size()) +
                         " coefficients against dictionary of size " +
                         std::to_string(dict_->size()));
    }
}

double KernelActivation::operator()(double a) const {
    const auto& c = dict_->centers();
    const double gamma = dict_->bandwidth();
    double acc = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        acc += coeffs_[k] * gaussian_kernel(a, c[k], gamma);
    }
    return acc;
}

double KernelActivation::grad_input(double a) const {
    const auto& c = dict_->centers();
    const double gamma = dict_->bandwidth();
    const double inv_g2 = 1.0 / (gamma * gamma);
    double acc = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        acc += coeffs_[k] * (c[k] - a) * inv_g2 * gaussian_kernel(a, c[k], gamma);
    }
    return acc;
}

Vector KernelActivation::grad_coeffs(double a) const {
    const auto& c = dict_->centers();
    const double gamma = dict_->bandwidth();
    Vector out(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) out[k] = gaussian_kernel(a, c[k], gamma);
    return out;
}

KernelDictionary build_dictionary_uniform(double lo, double hi, std::size_t k, double gamma) {
    if (!(lo < hi)) {
        throw std::invalid_argument("build_dictionary_uniform: lo " + std::to_string(lo) +
                                    " must be < hi " + std::to_string(hi));
    }
    if (k < 2) throw std::invalid_argument("build_dictionary_uniform: K must be >= 2");
    Vector centers(k);
    const double spacing = (hi - lo) / static_cast<double>(k - 1);
    for (std::size_t i = 0; i < k; ++i) centers[i] = lo + spacing * static_cast<double>(i);
    centers.front() = lo;
    centers.back() = hi;
    return KernelDictionary(std::move(centers), gamma);
}

namespace {

double kmeans_objective(const Vector& samples, const Vector& centers) {
    double obj = 0.0;
    for (double x : samples) {
        double best = std::numeric_limits<double>::infinity();
        for (double c : centers) {
            const double d = x - c;
            if (d * d < best) best = d * d;
        }
        obj += best;
    }
    return obj;
}

// One Lloyd run from a kmeans++ seeding. Returns (centers, objective).
std::pair<Vector, double> lloyd_run(const Vector& samples, std::size_t k, std::size_t max_iter,
                                    double tol, Rng& rng) {
    const std::size_t n = samples.size();
    Vector centers;
    centers.reserve(k);
    // kmeans++: first center uniform, then proportional to squared distance.
    centers.push_back(samples[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))]);
    Vector d2(n);
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : centers) {
                const double d = samples[i] - c;
                if (d * d < best) best = d * d;
            }
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            while (pick + 1 < n && r >= d2[pick]) {
                r -= d2[pick];
                ++pick;
            }
            // land on a sample with positive mass
            while (pick > 0 && d2[pick] == 0.0) --pick;
        } else {
            pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
        }
        centers.push_back(samples[pick]);
    }

    std::vector<std::size_t> assign(n, 0);
    double prev_obj = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // assignment step
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = samples[i] - centers[c];
                if (d * d < best) {
                    best = d * d;
                    arg = c;
                }
            }
            assign[i] = arg;
        }
        // empty clusters: re-seed at the sample farthest from its assigned
        // center (strictly lowers that sample's cost, so monotonicity holds)
        for (std::size_t c = 0; c < k; ++c) {
            bool used = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (assign[i] == c) {
                    used = true;
                    break;
                }
            }
            if (used) continue;
            double worst = -1.0;
            std::size_t worst_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = samples[i] - centers[assign[i]];
                if (d * d > worst) {
                    worst = d * d;
                    worst_i = i;
                }
            }
            centers[c] = samples[worst_i];
            assign[worst_i] = c;
        }
        // update step
        Vector sums(k, 0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[assign[i]] += samples[i];
            ++counts[assign[i]];
        }
        double movement = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // handled above; cannot recur within one iter
            const double next = sums[c] / static_cast<double>(counts[c]);
            movement = std::max(movement, std::fabs(next - centers[c]));
            centers[c] = next;
        }
        const double obj = kmeans_objective(samples, centers);
        assert(obj <= prev_obj * (1.0 + 1e-12) + 1e-12);
        prev_obj = obj;
        if (movement < tol) break;
    }
    std::sort(centers.begin(), centers.end());
    return {std::move(centers), prev_obj};
}

}  // namespace

Vector fit_centers_kmeans_1d(const Vector& samples, std::size_t k, std::size_t max_iter,
                             double tol, Rng& rng) {
    if (samples.empty()) throw std::invalid_argument("fit_centers_kmeans_1d: empty samples");
    if (k < 1) throw std::invalid_argument("fit_centers_kmeans_1d: K must be >= 1");
    const std::set<double> distinct(samples.begin(), samples.end());
    if (k > distinct.size()) {
        throw std::invalid_argument("fit_centers_kmeans_1d: K=" + std::to_string(k) +
                                    " exceeds " + std::to_string(distinct.size()) +
                                    " distinct sample values");
    }

    constexpr std::size_t kRestarts = 8;
    Vector best;
    double best_obj = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < kRestarts; ++r) {
        auto [centers, obj] = lloyd_run(samples, k, max_iter, tol, rng);
        if (obj < best_obj) {
            best_obj = obj;
            best = std::move(centers);
        }
    }
    return best;
}

double bandwidth_from_centers(const Vector& centers, double spread_factor) {
    if (centers.size() < 2) return spread_factor;
    double acc = 0.0;
    for (std::size_t i = 1; i < centers.size(); ++i) acc += centers[i] - centers[i - 1];
    return spread_factor * acc / static_cast<double>(centers.size() - 1);
}

KernelDictionary build_dictionary_from_samples(const Vector& samples, std::size_t k,
                                               double spread_factor, Rng& rng) {
    if (samples.empty()) {
        throw std::invalid_argument("build_dictionary_from_samples: empty samples");
    }
    if (k < 1) throw std::invalid_argument("build_dictionary_from_samples: K must be >= 1");
    const std::set<double> distinct(samples.begin(), samples.end());

    if (distinct.size() < k) {
        // degenerate input guard: uniform fallback over the sample range
        double lo = *distinct.begin();
        double hi = *distinct.rbegin();
        if (!(lo < hi)) {
            lo = -1.0;
            hi = 1.0;
        }
        if (k == 1) {
            return KernelDictionary(Vector{0.5 * (lo + hi)}, std::max(spread_factor, 1e-12));
        }
        Vector centers(k);
        const double spacing = (hi - lo) / static_cast<double>(k - 1);
        for (std::size_t i = 0; i < k; ++i) centers[i] = lo + spacing * static_cast<double>(i);
        const double bw = bandwidth_from_centers(centers, spread_factor);
        return KernelDictionary(std::move(centers), bw);
    }

    Vector centers = fit_centers_kmeans_1d(samples, k, 100, 1e-10, rng);
    // Lloyd's can in principle converge with coincident centers; the
    // dictionary requires strictly increasing ones.
    bool strict = true;
    for (std::size_t i = 1; i < centers.size(); ++i) {
        if (!(centers[i - 1] < centers[i])) {
            strict = false;
            break;
        }
    }
    if (!strict) {
        double lo = *distinct.begin();
        double hi = *distinct.rbegin();
        Vector uniform(k);
        const double spacing = (hi - lo) / static_cast<double>(k - 1);
        for (std::size_t i = 0; i < k; ++i) uniform[i] = lo + spacing * static_cast<double>(i);
        centers = std::move(uniform);
    }
    double bw = bandwidth_from_centers(centers, spread_factor);
    if (!(bw > 0.0)) bw = std::max(spread_factor, 1e-12);
    return KernelDictionary(std::move(centers), bw);
}

Vector init_coeffs_mimic(const KernelDictionary& dict,
                         const std::function<double(double)>& target, std::size_t grid_n,
                         double ridge) {
    const std::size_t k = dict.size();
    if (grid_n < k) {
        throw std::invalid_argument("init_coeffs_mimic: grid_n " + std::to_string(grid_n) +
                                    " < dictionary size " + std::to_string(k));
    }
    if (ridge < 0.0) throw std::invalid_argument("init_coeffs_mimic: negative ridge");

    const double gamma = dict.bandwidth();
    const double lo = dict.centers().front() - 2.0 * gamma;
    const double hi = dict.centers().back() + 2.0 * gamma;

    // Normal equations (Phi^T Phi + ridge I) alpha = Phi^T y over the grid.
    Matrix ata(k, k);
    Vector aty(k, 0.0);
    Vector phi(k);
    for (std::size_t g = 0; g < grid_n; ++g) {
        const double a =
            grid_n == 1 ? lo : lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_n - 1);
        for (std::size_t j = 0; j < k; ++j) phi[j] = gaussian_kernel(a, dict.centers()[j], gamma);
        const double y = target(a);
        for (std::size_t i = 0; i < k; ++i) {
            aty[i] += phi[i] * y;
            for (std::size_t j = i; j < k; ++j) ata(i, j) += phi[i] * phi[j];
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        ata(i, i) += ridge;
        for (std::size_t j = 0; j < i; ++j) ata(i, j) = ata(j, i);
    }
    try {
        return solve_linear(std::move(ata), std::move(aty));
    } catch (const NumericalError&) {
        throw std::invalid_argument(
            "init_coeffs_mimic: normal matrix is singular; raise the ridge parameter "
            "(currently " +
            std::to_string(ridge) + ")");
    }
}

double smoothness_penalty(const KernelActivation& act, const GramMatrix& gram) {
    const std::size_t k = act.coeffs().size();
    if (gram.entries.rows != k || gram.entries.cols != k) {
        throw ShapeError("smoothness_penalty: Gram " + std::to_string(gram.entries.rows) + "x" +
                         std::to_string(gram.entries.cols) + " against " + std::to_string(k) +
                         " coefficients");
    }
    const Vector ga = mat_vec(gram.entries, act.coeffs());
    return dot(act.coeffs(), ga);
}

Vector smoothness_penalty_grad(const KernelActivation& act, const GramMatrix& gram) {
    const std::size_t k = act.coeffs().size();
    if (gram.entries.rows != k || gram.entries.cols != k) {
        throw ShapeError("smoothness_penalty_grad: Gram " + std::to_string(gram.entries.rows) +
                         "x" + std::to_string(gram.entries.cols) + " against " +
                         std::to_string(k) + " coefficients");
    }
    Vector g = mat_vec(gram.entries, act.coeffs());
    for (auto& x : g) x *= 2.0;
    return g;
}

}  // namespace kbrn

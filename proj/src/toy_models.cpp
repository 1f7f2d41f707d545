#include "lowbit/toy_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lowbit {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::vector<double> random_direction(std::size_t features, Rng& rng) {
    std::vector<double> w(features);
    for (auto& x : w) {
        x = rng.normal();
    }
    const double norm = std::sqrt(dot(w, w));
    for (auto& x : w) {
        x /= norm;
    }
    return w;
}

} // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::LinearRegression: return "linear";
    case ModelKind::LogisticRegression: return "logistic";
    case ModelKind::Mlp: return "mlp";
    }
    return "unknown";
}

ModelKind model_from_string(std::string_view name) {
    for (auto kind : {ModelKind::LinearRegression, ModelKind::LogisticRegression, ModelKind::Mlp}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

Dataset make_regression_data(std::size_t n, std::size_t features, double noise, Rng& rng) {
    Dataset data;
    data.features = features;
    std::vector<double> w(features);
    for (auto& x : w) {
        x = rng.normal();
    }
    const double bias = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
        double y = bias;
        for (std::size_t j = 0; j < features; ++j) {
            const double x = rng.normal();
            data.inputs.push_back(x);
            y += w[j] * x;
        }
        data.targets.push_back(y + noise * rng.normal());
    }
    return data;
}

Dataset make_separable_data(std::size_t n, std::size_t features, double margin, Rng& rng) {
    Dataset data;
    data.features = features;
    const std::vector<double> w = random_direction(features, rng);
    std::vector<double> x(features);
    while (data.size() < n) {
        for (auto& v : x) {
            v = rng.normal();
        }
        const double side = dot(w, x);
        if (std::abs(side) < margin) {
            continue;
        }
        data.inputs.insert(data.inputs.end(), x.begin(), x.end());
        data.targets.push_back(side > 0.0 ? 1.0 : 0.0);
    }
    return data;
}

Dataset make_nonlinear_data(std::size_t n, std::size_t features, Rng& rng) {
    Dataset data;
    data.features = features;
    const std::vector<double> w = random_direction(features, rng);
    std::vector<double> x(features);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : x) {
            v = rng.normal();
        }
        data.inputs.insert(data.inputs.end(), x.begin(), x.end());
        data.targets.push_back(std::sin(dot(w, x)) + 0.5 * x[0]);
    }
    return data;
}

ToyModel::ToyModel(ModelKind kind, Dataset data, std::size_t hidden)
    : m_kind(kind), m_data(std::move(data)), m_hidden(hidden) {
    if (m_data.size() == 0 || m_data.features == 0 || m_data.inputs.size() != m_data.size() * m_data.features) {
        throw std::invalid_argument("dataset shape is inconsistent");
    }
    if (kind == ModelKind::Mlp && hidden == 0) {
        throw std::invalid_argument("the MLP needs at least one hidden unit");
    }
}

std::size_t ToyModel::parameter_count() const {
    if (m_kind == ModelKind::Mlp) {
        return m_hidden * m_data.features + 2 * m_hidden + 1;
    }
    return m_data.features + 1;
}

std::vector<double> ToyModel::initial_parameters(Rng& rng) const {
    std::vector<double> params(parameter_count(), 0.0);
    if (m_kind == ModelKind::Mlp) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(m_data.features));
        for (std::size_t i = 0; i < m_hidden * m_data.features; ++i) {
            params[i] = scale * rng.normal();
        }
        for (std::size_t k = 0; k < m_hidden; ++k) {
            params[m_hidden * m_data.features + m_hidden + k] = rng.normal() / std::sqrt(static_cast<double>(m_hidden));
        }
    }
    return params;
}

double ToyModel::example_loss(std::span<const double> params, std::size_t i, std::span<double> grad,
                              double weight) const {
    const auto x = m_data.row(i);
    const double y = m_data.targets[i];
    const std::size_t d = m_data.features;
    const bool want_grad = !grad.empty();

    if (m_kind != ModelKind::Mlp) {
        const double score = dot(params.first(d), x) + params[d];
        double loss = 0.0;
        double dscore = 0.0;
        if (m_kind == ModelKind::LinearRegression) {
            const double r = score - y;
            loss = 0.5 * r * r;
            dscore = r;
        } else {
            // y log(1 + e^-s) + (1 - y) log(1 + e^s)
            loss = y * softplus(-score) + (1.0 - y) * softplus(score);
            dscore = sigmoid(score) - y;
        }
        if (want_grad) {
            for (std::size_t j = 0; j < d; ++j) {
                grad[j] += weight * dscore * x[j];
            }
            grad[d] += weight * dscore;
        }
        return loss;
    }

    const std::size_t h = m_hidden;
    const auto w1 = params.subspan(0, h * d);
    const auto b1 = params.subspan(h * d, h);
    const auto w2 = params.subspan(h * d + h, h);
    const double b2 = params[h * d + 2 * h];
    std::vector<double> act(h);
    double out = b2;
    for (std::size_t k = 0; k < h; ++k) {
        act[k] = std::tanh(dot(w1.subspan(k * d, d), x) + b1[k]);
        out += w2[k] * act[k];
    }
    const double r = out - y;
    if (want_grad) {
        const double dout = weight * r;
        for (std::size_t k = 0; k < h; ++k) {
            const double dpre = dout * w2[k] * (1.0 - act[k] * act[k]);
            for (std::size_t j = 0; j < d; ++j) {
                grad[k * d + j] += dpre * x[j];
            }
            grad[h * d + k] += dpre;
            grad[h * d + h + k] += dout * act[k];
        }
        grad[h * d + 2 * h] += dout;
    }
    return 0.5 * r * r;
}

double ToyModel::loss(std::span<const double> params) const {
    std::vector<std::size_t> all(m_data.size());
    std::iota(all.begin(), all.end(), 0);
    return loss(params, all);
}

double ToyModel::loss(std::span<const double> params, std::span<const std::size_t> batch) const {
    if (params.size() != parameter_count()) {
        throw std::invalid_argument("parameter vector has the wrong length");
    }
    double total = 0.0;
    for (std::size_t i : batch) {
        total += example_loss(params, i, {}, 0.0);
    }
    return total / static_cast<double>(batch.size());
}

std::vector<double> ToyModel::gradient(std::span<const double> params) const {
    std::vector<std::size_t> all(m_data.size());
    std::iota(all.begin(), all.end(), 0);
    return gradient(params, all);
}

std::vector<double> ToyModel::gradient(std::span<const double> params, std::span<const std::size_t> batch) const {
    if (params.size() != parameter_count()) {
        throw std::invalid_argument("parameter vector has the wrong length");
    }
    std::vector<double> grad(params.size(), 0.0);
    const double weight = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i : batch) {
        example_loss(params, i, grad, weight);
    }
    return grad;
}

double finite_difference_check(const ToyModel& model, std::span<const double> point, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("finite-difference step must be positive");
    }
    const std::vector<double> analytic = model.gradient(point);
    std::vector<double> probe(point.begin(), point.end());
    double worst = 0.0;
    for (std::size_t j = 0; j < probe.size(); ++j) {
        const double saved = probe[j];
        probe[j] = saved + epsilon;
        const double up = model.loss(probe);
        probe[j] = saved - epsilon;
        const double down = model.loss(probe);
        probe[j] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom = std::max({std::abs(analytic[j]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[j] - numeric) / denom);
    }
    return worst;
}

} // namespace lowbit

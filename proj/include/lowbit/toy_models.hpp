#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "lowbit/random.hpp"

namespace lowbit {

enum class ModelKind { LinearRegression, LogisticRegression, Mlp };

std::string_view to_string(ModelKind kind);
ModelKind model_from_string(std::string_view name);

/// Row-major design matrix with one target per row.
struct Dataset {
    std::size_t features = 0;
    std::vector<double> inputs;
    std::vector<double> targets;

    std::size_t size() const { return targets.size(); }
    std::span<const double> row(std::size_t i) const { return {inputs.data() + i * features, features}; }
};

/// Gaussian inputs, y = <w*, x> + b* + noise.
Dataset make_regression_data(std::size_t n, std::size_t features, double noise, Rng& rng);
/// Gaussian inputs labelled by a random hyperplane; points closer than
/// `margin` to it are redrawn, so the classes are linearly separable.
Dataset make_separable_data(std::size_t n, std::size_t features, double margin, Rng& rng);
/// Smooth non-linear target y = sin(<w*, x>) + 0.5 * x_0 for the MLP.
Dataset make_nonlinear_data(std::size_t n, std::size_t features, Rng& rng);

/// Desk-scale model with an analytic gradient.
///
/// Parameters are one flat vector:
///   linear / logistic: weights (features), bias
///   MLP: W1 (hidden x features, row-major), b1 (hidden), w2 (hidden), b2
/// Losses: half mean squared error (linear, MLP), mean logistic loss with
/// labels in {0, 1} (logistic). The MLP uses tanh hidden units.
class ToyModel {
public:
    ToyModel(ModelKind kind, Dataset data, std::size_t hidden = 0);

    ModelKind kind() const { return m_kind; }
    const Dataset& data() const { return m_data; }
    std::size_t hidden() const { return m_hidden; }
    std::size_t parameter_count() const;

    /// Small random parameters (zeros for the linear models).
    std::vector<double> initial_parameters(Rng& rng) const;

    double loss(std::span<const double> params) const;
    double loss(std::span<const double> params, std::span<const std::size_t> batch) const;
    std::vector<double> gradient(std::span<const double> params) const;
    std::vector<double> gradient(std::span<const double> params, std::span<const std::size_t> batch) const;

private:
    double example_loss(std::span<const double> params, std::size_t i, std::span<double> grad, double weight) const;

    ModelKind m_kind;
    Dataset m_data;
    std::size_t m_hidden;
};

/// Largest coordinate-wise relative error between the analytic gradient and
/// central differences with step `epsilon`. Denominators are floored at 1e-6.
double finite_difference_check(const ToyModel& model, std::span<const double> point, double epsilon);

} // namespace lowbit

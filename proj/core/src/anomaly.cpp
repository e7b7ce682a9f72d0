#include "waterlab/anomaly.hpp"

#include "waterlab/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace waterlab {

void DetectorConfig::validate() const {
    std::vector<std::string> problems;
    if (window < 1) problems.emplace_back("detector window must be >= 1");
    if (!(forgetting > 0.0 && forgetting <= 1.0)) problems.emplace_back("detector forgetting must be in (0, 1]");
    if (!(threshold_k > 0.0)) problems.emplace_back("detector threshold_k must be positive");
    if (!(regularization > 0.0)) problems.emplace_back("detector regularization must be positive");
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

RlsDetector::RlsDetector(DetectorConfig cfg, std::size_t extra_features)
    : cfg_(cfg), dim_(cfg.window + extra_features + 1), lags_(cfg.window) {
    cfg_.validate();
    warmup_ = cfg_.warmup.value_or(10 * dim_);
    const auto n = static_cast<Eigen::Index>(dim_);
    weights_ = Eigen::VectorXd::Zero(n);
    scales_ = Eigen::VectorXd::Ones(n);
    information_ = Eigen::MatrixXd::Zero(n, n);
    cross_ = Eigen::VectorXd::Zero(n);
}

Eigen::VectorXd RlsDetector::augment(std::span<const double> regressor) const {
    if (regressor.size() != dim_ - 1) {
        throw ValidationError("detector regressor has " + std::to_string(regressor.size()) + " features, expected " +
                              std::to_string(dim_ - 1));
    }
    Eigen::VectorXd phi(static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < regressor.size(); ++i) phi(static_cast<Eigen::Index>(i)) = regressor[i];
    phi(static_cast<Eigen::Index>(dim_ - 1)) = 1.0;
    return phi;
}

void RlsDetector::check_input(std::span<const double> regressor, double actual) const {
    if (!std::isfinite(actual)) throw ValidationError("non-finite sample rejected by detector");
    for (double x : regressor) {
        if (!std::isfinite(x)) throw ValidationError("non-finite regressor rejected by detector");
    }
}

void RlsDetector::capture_scales(const Eigen::VectorXd& phi) {
    const auto lags = static_cast<Eigen::Index>(lags_);
    double lag_scale = std::sqrt(phi.head(lags).squaredNorm() / static_cast<double>(lags_));
    if (!(lag_scale > 0.0)) lag_scale = 1.0;
    scales_.head(lags).setConstant(lag_scale);
    for (Eigen::Index i = lags; i + 1 < phi.size(); ++i) {
        scales_(i) = std::abs(phi(i)) > 0.0 ? std::abs(phi(i)) : 1.0;
    }
    scales_(phi.size() - 1) = 1.0;
    scales_set_ = true;
}

Eigen::MatrixXd RlsDetector::ridge() const {
    return (cfg_.regularization * scales_.array().square()).matrix().asDiagonal();
}

double RlsDetector::predict(std::span<const double> regressor) const {
    return weights_.dot(augment(regressor));
}

Eigen::MatrixXd RlsDetector::inverse_covariance() const {
    if (!warming_up() && inv_cov_.size() > 0) return inv_cov_;
    return (information_ + ridge()).ldlt().solve(Eigen::MatrixXd::Identity(information_.rows(), information_.cols()));
}

void RlsDetector::update_weights(const Eigen::VectorXd& phi, double actual, double residual) {
    const double lambda = cfg_.forgetting;
    if (warming_up()) {
        information_ = lambda * information_ + phi * phi.transpose();
        cross_ = lambda * cross_ + phi * actual;
        const Eigen::MatrixXd regularized = information_ + ridge();
        weights_ = regularized.ldlt().solve(cross_);
        ++samples_;
        if (!warming_up()) {
            inv_cov_ = regularized.ldlt().solve(Eigen::MatrixXd::Identity(phi.size(), phi.size()));
            inv_cov_ = 0.5 * (inv_cov_ + inv_cov_.transpose()).eval();
            trace_bound_ = (scales_.asDiagonal() * inv_cov_ * scales_.asDiagonal()).trace();
        }
        return;
    }
    if (inv_cov_.size() == 0) {  // zero-length warmup
        inv_cov_ = ridge().inverse();
        trace_bound_ = (scales_.asDiagonal() * inv_cov_ * scales_.asDiagonal()).trace();
    }

    const Eigen::VectorXd p_phi = inv_cov_ * phi;
    const double denom = lambda + phi.dot(p_phi);
    const Eigen::VectorXd gain = p_phi / denom;
    weights_ += gain * residual;
    Eigen::MatrixXd next = inv_cov_ - gain * p_phi.transpose();

    // Forgetting inflates P in unexcited directions without bound; skip it
    // when the scaled trace would exceed its post-warmup value.
    if (lambda < 1.0) {
        const double scaled_trace = (scales_.asDiagonal() * next * scales_.asDiagonal()).trace() / lambda;
        if (scaled_trace <= trace_bound_) next /= lambda;
    }
    inv_cov_ = 0.5 * (next + next.transpose());
    ++samples_;
}

void RlsDetector::update_moments(double residual) {
    const double lambda = cfg_.forgetting;
    moment_weight_ = lambda * moment_weight_ + 1.0;
    const double delta = residual - mean_;
    mean_ += delta / moment_weight_;
    m2_ = lambda * m2_ + delta * (residual - mean_);
}

double RlsDetector::rls_update(std::span<const double> regressor, double actual) {
    const Eigen::VectorXd phi = augment(regressor);
    check_input(regressor, actual);
    if (!scales_set_) capture_scales(phi);
    const double residual = actual - weights_.dot(phi);
    update_weights(phi, actual, residual);
    update_moments(residual);
    return residual;
}

Verdict RlsDetector::detect(double residual) const {
    Verdict v;
    v.residual = residual;
    if (warming_up()) return v;
    const double deviation = std::abs(residual - mean_);
    const double sigma = std::sqrt(residual_variance());
    if (sigma > 0.0) {
        v.score = deviation / sigma;
        v.anomalous = deviation > cfg_.threshold_k * sigma;
    } else if (deviation > 0.0) {
        v.score = std::numeric_limits<double>::infinity();
        v.anomalous = true;
    }
    return v;
}

Verdict RlsDetector::observe(std::span<const double> regressor, double actual) {
    const Eigen::VectorXd phi = augment(regressor);
    check_input(regressor, actual);
    if (!scales_set_) capture_scales(phi);
    const double residual = actual - weights_.dot(phi);
    const Verdict verdict = detect(residual);
    if (!verdict.anomalous) {
        update_weights(phi, actual, residual);
        update_moments(residual);
    } else if (verdict.score < 2.0 * cfg_.threshold_k) {
        update_weights(phi, actual, residual);
    } else {
        ++samples_;
    }
    return verdict;
}

std::optional<std::vector<double>> fuse_neighbor(std::span<const double> own_window,
                                                 const std::optional<NeighborSample>& neighbor, double now,
                                                 double staleness_bound) {
    if (!neighbor || !(now - neighbor->time <= staleness_bound)) return std::nullopt;
    std::vector<double> out(own_window.begin(), own_window.end());
    out.push_back(neighbor->value);
    return out;
}

FusedDetector::FusedDetector(DetectorConfig cfg, double staleness_bound)
    : solo_(cfg, 0), augmented_(cfg, 1), staleness_bound_(staleness_bound) {
    if (!(staleness_bound >= 0.0)) throw ValidationError("staleness bound must be nonnegative");
}

Verdict FusedDetector::observe(std::span<const double> own_window, double actual,
                               const std::optional<NeighborSample>& neighbor, double now) {
    const Verdict solo = solo_.observe(own_window, actual);
    if (auto fused = fuse_neighbor(own_window, neighbor, now, staleness_bound_)) {
        ++fused_;
        return augmented_.observe(*fused, actual);
    }
    ++fallbacks_;
    return solo;
}

} // namespace waterlab

#pragma once

// Streaming anomaly detection: a linear autoregressive predictor fitted by
// exponentially weighted recursive least squares, with residual-based
// flagging in units of the running residual standard deviation.

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace waterlab {

struct DetectorConfig {
    std::size_t window = 5;       // AR order w
    double forgetting = 0.995;    // in (0, 1]
    double threshold_k = 4.0;     // flag when |r - mean| > k sigma
    double regularization = 1e-9; // relative ridge used to initialize the inverse covariance
    /// Samples before the detector may flag. Empty means 10 * (regressor
    /// dimension), i.e. 10 (w + 1) for a solo detector.
    std::optional<std::size_t> warmup;

    bool operator==(const DetectorConfig&) const = default;

    void validate() const;
};

struct Verdict {
    bool anomalous = false;
    double score = 0.0;  // |r - mean| / sigma
    double residual = 0.0;
};

/// DetectorState for one sensor stream.
///
/// A regressor is the lag window (oldest first) followed by any extra
/// features; the bias term is appended internally. During warmup the normal
/// equations are accumulated and solved directly; at the end of warmup the
/// inverse covariance is formed once and rank-one updates take over. The
/// ridge is scaled per feature by the magnitude of the first regressor, which
/// makes the detector equivariant under rescaling of the stream.
class RlsDetector {
public:
    explicit RlsDetector(DetectorConfig cfg = {}, std::size_t extra_features = 0);

    std::size_t dimension() const noexcept { return dim_; }
    std::size_t feature_count() const noexcept { return dim_ - 1; }
    const DetectorConfig& config() const noexcept { return cfg_; }

    double predict(std::span<const double> regressor) const;

    /// Residual of `actual` against the current prediction, then an
    /// unconditional update of weights, inverse covariance and residual
    /// moments. Non-finite input throws ValidationError and leaves the state
    /// untouched.
    double rls_update(std::span<const double> regressor, double actual);

    /// Classifies a residual against the running moments. Always normal
    /// during warmup.
    Verdict detect(double residual) const;

    /// predict + detect + update with the contamination policy: flagged
    /// samples never update the residual moments, and update the weights only
    /// when their score is below 2k.
    Verdict observe(std::span<const double> regressor, double actual);

    bool warming_up() const noexcept { return samples_ < warmup_; }
    std::size_t samples_seen() const noexcept { return samples_; }
    std::size_t warmup_length() const noexcept { return warmup_; }

    const Eigen::VectorXd& weights() const noexcept { return weights_; }
    /// Inverse of the (regularized, exponentially weighted) information matrix.
    Eigen::MatrixXd inverse_covariance() const;

    double residual_mean() const noexcept { return mean_; }
    double residual_variance() const noexcept { return moment_weight_ > 0.0 ? m2_ / moment_weight_ : 0.0; }

private:
    Eigen::VectorXd augment(std::span<const double> regressor) const;
    void check_input(std::span<const double> regressor, double actual) const;
    void capture_scales(const Eigen::VectorXd& phi);
    Eigen::MatrixXd ridge() const;
    void update_weights(const Eigen::VectorXd& phi, double actual, double residual);
    void update_moments(double residual);

    DetectorConfig cfg_;
    std::size_t dim_;
    std::size_t lags_;
    std::size_t warmup_;
    std::size_t samples_ = 0;

    Eigen::VectorXd weights_;
    Eigen::VectorXd scales_;          // per-feature magnitude, set on first sample
    bool scales_set_ = false;
    Eigen::MatrixXd information_;     // warmup accumulation
    Eigen::VectorXd cross_;           // warmup accumulation
    Eigen::MatrixXd inv_cov_;         // recursive phase
    double trace_bound_ = 0.0;

    double moment_weight_ = 0.0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct NeighborSample {
    double value = 0.0;
    double time = 0.0;  // when the neighbor took the value
};

/// Lag window with the neighbor's latest sample appended, or empty when the
/// sample is missing or older than `staleness_bound` at time `now`.
std::optional<std::vector<double>> fuse_neighbor(std::span<const double> own_window,
                                                 const std::optional<NeighborSample>& neighbor, double now,
                                                 double staleness_bound);

/// Solo detector plus a neighbor-augmented one. The augmented detector is
/// used whenever a fresh neighbor sample exists; otherwise the solo detector
/// decides and the fallback is counted. Both see every sample they can.
class FusedDetector {
public:
    FusedDetector(DetectorConfig cfg, double staleness_bound);

    Verdict observe(std::span<const double> own_window, double actual,
                    const std::optional<NeighborSample>& neighbor, double now);

    std::size_t fallbacks() const noexcept { return fallbacks_; }
    std::size_t fused_decisions() const noexcept { return fused_; }
    const RlsDetector& solo() const noexcept { return solo_; }
    const RlsDetector& augmented() const noexcept { return augmented_; }

private:
    RlsDetector solo_;
    RlsDetector augmented_;
    double staleness_bound_;
    std::size_t fallbacks_ = 0;
    std::size_t fused_ = 0;
};

} // namespace waterlab

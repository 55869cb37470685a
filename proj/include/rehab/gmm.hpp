#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rehab/error.hpp"
#include "rehab/metrics.hpp"
#include "rehab/motion.hpp"
#include "rehab/rng.hpp"

namespace rehab {

namespace detail {

inline double log_sum_exp(std::span<const double> values) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : values) m = std::max(m, v);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double v : values) s += std::exp(v - m);
    return m + std::log(s);
}

inline double half_log_two_pi() { return 0.5 * std::log(2.0 * std::numbers::pi); }

} // namespace detail

/// log N(point; mean, covariance), evaluated through a Cholesky factor.
/// Throws NumericalError when the covariance is not positive definite.
inline double gaussian_log_density(const Eigen::VectorXd& point, const Eigen::VectorXd& mean,
                                   const Eigen::MatrixXd& covariance) {
    if (point.size() != mean.size() || covariance.rows() != mean.size() || covariance.cols() != mean.size())
        throw SchemaError("gaussian_log_density: dimension mismatch");
    const Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance matrix is not positive definite");
    const Eigen::VectorXd z = llt.matrixL().solve(point - mean);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * z.squaredNorm() - 0.5 * log_det - static_cast<double>(mean.size()) * detail::half_log_two_pi();
}

/// One weighted Gaussian over [t | x]. The leading coordinate of the mean
/// and the leading row/column of the covariance belong to time.
struct GmmComponent {
    double weight = 1.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;

    double time_mean() const { return mean[0]; }
    Eigen::VectorXd position_mean() const { return mean.tail(mean.size() - 1); }
    double time_variance() const { return covariance(0, 0); }
    Eigen::MatrixXd position_covariance() const {
        const auto n = covariance.rows() - 1;
        return covariance.bottomRightCorner(n, n);
    }
    Eigen::VectorXd position_time_covariance() const { return covariance.col(0).tail(covariance.rows() - 1); }
};

enum class GmmInit { time_uniform, kmeans };

struct GmmFitConfig {
    std::size_t components = 8;
    std::size_t max_iterations = 200;
    double tolerance = 1e-6;
    double covariance_floor = 1e-6;
    GmmInit init = GmmInit::time_uniform;
    std::uint64_t seed = 0;

    bool operator==(const GmmFitConfig&) const = default;

    void validate() const {
        if (components == 0) throw ConfigError("GMM needs at least one component");
        if (max_iterations == 0) throw ConfigError("max_iterations must be positive");
        if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
        if (!(covariance_floor > 0.0)) throw ConfigError("covariance_floor must be positive");
    }
};

struct GmmFitMetadata {
    std::size_t iterations = 0;
    /// Training log-likelihood of the returned parameters (plain mixture density).
    double final_log_likelihood = 0.0;
    /// Objective EM climbs at each iteration: the training log-likelihood with
    /// the covariance-floor term (see fit_gmm). Non-decreasing by construction.
    std::vector<double> objective_history;
    std::uint64_t seed = 0;
};

/// Mixture of Gaussians over [t, x] datapoints. Immutable after construction;
/// Cholesky factors are precomputed, so scoring is safe from many threads.
class GmmModel {
public:
    GmmModel() = default;

    GmmModel(std::vector<GmmComponent> components, std::string exercise_id, GmmFitConfig config = {},
             GmmFitMetadata metadata = {})
        : components_(std::move(components)), exercise_id_(std::move(exercise_id)), config_(config),
          metadata_(std::move(metadata)) {
        if (components_.empty()) throw ConfigError("GMM needs at least one component");
        dimension_ = static_cast<std::size_t>(components_.front().mean.size());
        double total = 0.0;
        for (std::size_t i = 0; i < components_.size(); ++i) {
            const auto& c = components_[i];
            if (static_cast<std::size_t>(c.mean.size()) != dimension_ ||
                static_cast<std::size_t>(c.covariance.rows()) != dimension_ ||
                static_cast<std::size_t>(c.covariance.cols()) != dimension_)
                throw SchemaError("component " + std::to_string(i) + " has inconsistent dimension");
            if (!(c.weight > 0.0 && c.weight <= 1.0))
                throw NumericalError("component " + std::to_string(i) + " weight outside (0, 1]");
            total += c.weight;
            Factor f;
            f.llt.compute(c.covariance);
            if (f.llt.info() != Eigen::Success)
                throw NumericalError("component " + std::to_string(i) + ": covariance is not positive definite");
            const double log_det = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
            f.log_norm = std::log(c.weight) - 0.5 * log_det -
                         static_cast<double>(dimension_) * detail::half_log_two_pi();
            factors_.push_back(std::move(f));
        }
        if (std::abs(total - 1.0) > 1e-9) throw NumericalError("mixture weights do not sum to 1");
    }

    const std::vector<GmmComponent>& components() const { return components_; }
    std::size_t component_count() const { return components_.size(); }
    std::size_t dimension() const { return dimension_; }
    const std::string& exercise_id() const { return exercise_id_; }
    const GmmFitConfig& config() const { return config_; }
    const GmmFitMetadata& metadata() const { return metadata_; }

    /// N x K matrix of log(phi_k) + log N(x_n; mu_k, Sigma_k), one row per point.
    Eigen::MatrixXd weighted_log_densities(const Eigen::MatrixXd& points) const {
        check_width(points);
        Eigen::MatrixXd out(points.rows(), static_cast<Eigen::Index>(components_.size()));
        for (std::size_t k = 0; k < components_.size(); ++k) {
            Eigen::MatrixXd centered = (points.rowwise() - components_[k].mean.transpose()).transpose();
            factors_[k].llt.matrixL().solveInPlace(centered);
            out.col(static_cast<Eigen::Index>(k)) =
                (-0.5 * centered.colwise().squaredNorm().array() + factors_[k].log_norm).matrix().transpose();
        }
        return out;
    }

    /// log p(x_n) for every row of `points`.
    Eigen::VectorXd log_density(const Eigen::MatrixXd& points) const {
        const Eigen::MatrixXd w = weighted_log_densities(points);
        Eigen::VectorXd out(w.rows());
        std::vector<double> row(static_cast<std::size_t>(w.cols()));
        for (Eigen::Index n = 0; n < w.rows(); ++n) {
            for (Eigen::Index k = 0; k < w.cols(); ++k) row[static_cast<std::size_t>(k)] = w(n, k);
            out[n] = detail::log_sum_exp(row);
        }
        return out;
    }

    double log_density(const Eigen::VectorXd& point) const {
        return log_density(Eigen::MatrixXd(point.transpose()))[0];
    }

private:
    struct Factor {
        Eigen::LLT<Eigen::MatrixXd> llt;
        double log_norm = 0.0;
    };

    void check_width(const Eigen::MatrixXd& points) const {
        if (static_cast<std::size_t>(points.cols()) != dimension_)
            throw SchemaError("datapoint dimension " + std::to_string(points.cols()) + " does not match model dimension " +
                              std::to_string(dimension_));
    }

    std::vector<GmmComponent> components_;
    std::vector<Factor> factors_;
    std::size_t dimension_ = 0;
    std::string exercise_id_;
    GmmFitConfig config_;
    GmmFitMetadata metadata_;
};

namespace detail {

inline Eigen::MatrixXd pool_datapoints(std::span<const MotionSequence> sequences) {
    if (sequences.empty()) throw ConfigError("GMM fit needs at least one sequence");
    const auto& first = sequences.front();
    Eigen::Index rows = 0;
    for (const auto& s : sequences) {
        if (s.joint_count() != first.joint_count() || s.dims() != first.dims())
            throw SchemaError("training sequences do not share one skeleton layout");
        if (s.exercise_id != first.exercise_id)
            throw ConfigError("training sequences mix exercises '" + first.exercise_id + "' and '" + s.exercise_id + "'");
        rows += static_cast<Eigen::Index>(s.frame_count);
    }
    Eigen::MatrixXd pooled(rows, static_cast<Eigen::Index>(first.frame_stride() + 1));
    Eigen::Index r = 0;
    for (const auto& s : sequences) {
        const Eigen::MatrixXd p = to_gmm_datapoints(s);
        pooled.middleRows(r, p.rows()) = p;
        r += p.rows();
    }
    return pooled;
}

// Hard assignment of each point to the time bin [(i-1)/K, i/K). Falls back
// to equal-count chunks in time order when a bin would be empty.
inline std::vector<std::size_t> time_uniform_assignment(const Eigen::MatrixXd& points, std::size_t k) {
    const auto n = static_cast<std::size_t>(points.rows());
    const double lo = points.col(0).minCoeff();
    const double hi = points.col(0).maxCoeff();
    std::vector<std::size_t> assign(n);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = hi > lo ? (points(static_cast<Eigen::Index>(i), 0) - lo) / (hi - lo) : 0.0;
        assign[i] = std::min(k - 1, static_cast<std::size_t>(u * static_cast<double>(k)));
        ++counts[assign[i]];
    }
    if (std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; })) return assign;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return points(static_cast<Eigen::Index>(a), 0) < points(static_cast<Eigen::Index>(b), 0);
    });
    for (std::size_t r = 0; r < n; ++r) assign[order[r]] = r * k / n;
    return assign;
}

// k-means++ seeding followed by Lloyd iterations.
inline std::vector<std::size_t> kmeans_assignment(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(points.rows());
    Rng rng(derive_seed(seed, "kmeans"));
    Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), points.cols());
    centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(n)));
    Eigen::VectorXd d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (std::size_t c = 1; c < k; ++c) {
        const double total = d2.sum();
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (; pick + 1 < n; ++pick) {
                target -= d2[static_cast<Eigen::Index>(pick)];
                if (target < 0.0) break;
            }
        } else {
            pick = static_cast<std::size_t>(rng.below(n));
        }
        centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
        d2 = d2.cwiseMin((points.rowwise() - centers.row(static_cast<Eigen::Index>(c))).rowwise().squaredNorm());
    }

    std::vector<std::size_t> assign(n, 0);
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = iter == 0;
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            (centers.rowwise() - points.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&best);
            changed = changed || assign[i] != static_cast<std::size_t>(best);
            assign[i] = static_cast<std::size_t>(best);
        }
        if (!changed) break;
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centers.rows(), centers.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(static_cast<Eigen::Index>(assign[i])) += points.row(static_cast<Eigen::Index>(i));
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0) centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
    }
    return assign;
}

struct MStepResult {
    std::vector<GmmComponent> components;
    std::vector<double> trace_precision; // tr(Sigma_k^-1) per component
};

// Weighted maximum-likelihood update with the covariance floor added to every
// diagonal. Components whose total responsibility is exactly zero carry no
// mass and are dropped.
inline MStepResult m_step(const Eigen::MatrixXd& points, const Eigen::MatrixXd& resp, double floor) {
    const Eigen::Index d = points.cols();
    MStepResult out;
    const Eigen::VectorXd mass = resp.colwise().sum().transpose();
    double kept_mass = 0.0;
    for (Eigen::Index k = 0; k < resp.cols(); ++k)
        if (mass[k] > 0.0) kept_mass += mass[k];
    for (Eigen::Index k = 0; k < resp.cols(); ++k) {
        if (!(mass[k] > 0.0)) continue;
        GmmComponent c;
        c.weight = mass[k] / kept_mass;
        c.mean = (points.transpose() * resp.col(k)) / mass[k];
        const Eigen::MatrixXd centered = points.rowwise() - c.mean.transpose();
        c.covariance = (centered.transpose() * resp.col(k).asDiagonal() * centered) / mass[k];
        c.covariance = 0.5 * (c.covariance + c.covariance.transpose()).eval();
        c.covariance.diagonal().array() += floor;
        const Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
        if (llt.info() != Eigen::Success)
            throw NumericalError("component " + std::to_string(k) + ": covariance lost positive definiteness");
        const Eigen::MatrixXd l_inv = llt.matrixL().solve(Eigen::MatrixXd::Identity(d, d));
        out.trace_precision.push_back(l_inv.squaredNorm());
        out.components.push_back(std::move(c));
    }
    if (out.components.empty()) throw NumericalError("all mixture components collapsed");
    return out;
}

} // namespace detail

/// Fits a GMM on pooled [t, x] datapoints of one exercise by EM.
///
/// The covariance floor eps enters every M-step as Sigma = S + eps*I. That
/// update is the exact maximizer of the expected complete-data likelihood
/// when each component density carries the factor exp(-eps/2 tr Sigma^-1)
/// (the expected log-density of x under N(0, eps*I) jitter), so E-steps use
/// that factor and the recorded objective is monotone.
inline GmmModel fit_gmm_points(const Eigen::MatrixXd& points, const GmmFitConfig& cfg, const std::string& exercise_id = {}) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(points.rows());
    if (n < cfg.components)
        throw ConfigError("GMM fit has " + std::to_string(n) + " datapoints, fewer than K = " +
                          std::to_string(cfg.components));
    if (!points.allFinite()) throw NumericalError("training datapoints contain non-finite values");

    const auto assign = cfg.init == GmmInit::kmeans ? detail::kmeans_assignment(points, cfg.components, cfg.seed)
                                                    : detail::time_uniform_assignment(points, cfg.components);
    Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(points.rows(), static_cast<Eigen::Index>(cfg.components));
    for (std::size_t i = 0; i < n; ++i) resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(assign[i])) = 1.0;

    auto current = detail::m_step(points, resp, cfg.covariance_floor);
    GmmFitMetadata meta;
    meta.seed = cfg.seed;

    for (std::size_t iter = 0;; ++iter) {
        const GmmModel model(current.components, exercise_id, cfg);
        Eigen::MatrixXd logw = model.weighted_log_densities(points);
        for (Eigen::Index k = 0; k < logw.cols(); ++k)
            logw.col(k).array() -= 0.5 * cfg.covariance_floor * current.trace_precision[static_cast<std::size_t>(k)];

        double objective = 0.0;
        resp.resize(logw.rows(), logw.cols());
        std::vector<double> row(static_cast<std::size_t>(logw.cols()));
        for (Eigen::Index i = 0; i < logw.rows(); ++i) {
            for (Eigen::Index k = 0; k < logw.cols(); ++k) row[static_cast<std::size_t>(k)] = logw(i, k);
            const double lse = detail::log_sum_exp(row);
            objective += lse;
            resp.row(i) = (logw.row(i).array() - lse).exp();
        }
        if (!std::isfinite(objective))
            throw NumericalError("EM produced a non-finite likelihood at iteration " + std::to_string(iter));
        meta.objective_history.push_back(objective);

        const bool converged =
            iter > 0 && std::abs(objective - meta.objective_history[iter - 1]) <=
                            cfg.tolerance * std::abs(meta.objective_history[iter - 1]);
        if (converged || iter >= cfg.max_iterations) {
            meta.iterations = iter;
            meta.final_log_likelihood = model.log_density(points).sum();
            return GmmModel(std::move(current.components), exercise_id, cfg, std::move(meta));
        }
        current = detail::m_step(points, resp, cfg.covariance_floor);
    }
}

/// Fits one model on the correct demonstrations of a single exercise.
inline GmmModel fit_gmm(std::span<const MotionSequence> correct_sequences, const GmmFitConfig& cfg) {
    const Eigen::MatrixXd points = detail::pool_datapoints(correct_sequences);
    return fit_gmm_points(points, cfg, correct_sequences.front().exercise_id);
}

/// Mean per-frame log-likelihood of a (preprocessed) sequence.
inline double score(const GmmModel& model, const MotionSequence& sequence) {
    if (sequence.frame_stride() + 1 != model.dimension())
        throw SchemaError("sequence datapoints have dimension " + std::to_string(sequence.frame_stride() + 1) +
                          ", model expects " + std::to_string(model.dimension()));
    return model.log_density(to_gmm_datapoints(sequence)).mean();
}

struct ThresholdChoice {
    double threshold = -std::numeric_limits<double>::infinity();
    double f1 = 0.0;
};

/// Picks the F1-maximizing threshold for the rule (score >= threshold ->
/// correct). Candidates are -inf, +inf and midpoints of consecutive distinct
/// sorted scores; ties go to the smallest threshold.
inline ThresholdChoice choose_threshold(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
    if (scores.empty()) throw UsageError("threshold calibration needs validation data");
    std::vector<std::pair<double, Label>> items;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw NumericalError("validation score is NaN");
        items.emplace_back(scores[i], labels[i]);
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    ConfusionCounts counts;
    for (const auto& [s, l] : items) (l == Label::correct ? counts.tp : counts.fp) += 1;

    ThresholdChoice best{-std::numeric_limits<double>::infinity(), counts.f1()};
    std::size_t i = 0;
    while (i < items.size()) {
        // Raising the threshold past the group of equal scores at i turns
        // all of them into "incorrect" predictions.
        const double value = items[i].first;
        std::size_t j = i;
        while (j < items.size() && items[j].first == value) {
            if (items[j].second == Label::correct) {
                --counts.tp;
                ++counts.fn;
            } else {
                --counts.fp;
                ++counts.tn;
            }
            ++j;
        }
        const double candidate = j < items.size() ? value + 0.5 * (items[j].first - value)
                                                  : std::numeric_limits<double>::infinity();
        const double f1 = counts.f1();
        if (f1 > best.f1) best = {candidate, f1};
        i = j;
    }
    return best;
}

struct GmmClassifier {
    GmmModel model;
    double threshold = -std::numeric_limits<double>::infinity();
    double validation_f1 = 0.0;
};

inline GmmClassifier calibrate_threshold(GmmModel model, std::span<const MotionSequence> validation,
                                         std::span<const Label> labels) {
    if (validation.empty()) throw UsageError("threshold calibration needs validation data");
    std::vector<double> scores;
    scores.reserve(validation.size());
    for (const auto& s : validation) scores.push_back(score(model, s));
    const auto choice = choose_threshold(scores, labels);
    return {std::move(model), choice.threshold, choice.f1};
}

/// Uses each sequence's own label.
inline GmmClassifier calibrate_threshold(GmmModel model, std::span<const MotionSequence> validation) {
    std::vector<Label> labels;
    for (const auto& s : validation) {
        if (!s.label) throw DataError("validation sequence of subject '" + s.subject_id + "' has no label");
        labels.push_back(*s.label);
    }
    return calibrate_threshold(std::move(model), validation, labels);
}

inline Label classify_score(double s, double threshold) { return s >= threshold ? Label::correct : Label::incorrect; }

inline Label classify(const GmmClassifier& c, const MotionSequence& sequence) {
    return classify_score(score(c.model, sequence), c.threshold);
}

// ---- persistence -------------------------------------------------------------

namespace detail {

inline nlohmann::json real_to_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    return v;
}

inline double real_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw ParseError("<real>", "unexpected string '" + s + "'");
    }
    return j.get<double>();
}

} // namespace detail

inline nlohmann::json gmm_fit_config_to_json(const GmmFitConfig& c) {
    return {{"components", c.components},
            {"max_iterations", c.max_iterations},
            {"tolerance", c.tolerance},
            {"covariance_floor", c.covariance_floor},
            {"init", c.init == GmmInit::kmeans ? "kmeans" : "time_uniform"},
            {"seed", c.seed}};
}

inline GmmFitConfig gmm_fit_config_from_json(const nlohmann::json& j, GmmFitConfig c = {}) {
    try {
        c.components = j.value("components", c.components);
        c.max_iterations = j.value("max_iterations", c.max_iterations);
        c.tolerance = j.value("tolerance", c.tolerance);
        c.covariance_floor = j.value("covariance_floor", c.covariance_floor);
        if (j.contains("init")) {
            const auto s = j.at("init").get<std::string>();
            if (s == "kmeans") c.init = GmmInit::kmeans;
            else if (s == "time_uniform") c.init = GmmInit::time_uniform;
            else throw ParseError("gmm.init", "expected 'time_uniform' or 'kmeans'");
        }
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("gmm", e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::json gmm_to_json(const GmmModel& m) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : m.components()) {
        std::vector<double> cov;
        cov.reserve(static_cast<std::size_t>(c.covariance.size()));
        for (Eigen::Index r = 0; r < c.covariance.rows(); ++r)
            for (Eigen::Index k = 0; k < c.covariance.cols(); ++k) cov.push_back(c.covariance(r, k));
        comps.push_back({{"weight", c.weight},
                         {"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                         {"covariance", cov}});
    }
    const auto& md = m.metadata();
    return {{"kind", "gmm"},
            {"dimension", m.dimension()},
            {"components_count", m.component_count()},
            {"exercise_id", m.exercise_id()},
            {"fit_config", gmm_fit_config_to_json(m.config())},
            {"fit_metadata",
             {{"iterations", md.iterations},
              {"final_log_likelihood", md.final_log_likelihood},
              {"objective_history", md.objective_history},
              {"seed", md.seed}}},
            {"components", comps}};
}

inline GmmModel gmm_from_json(const nlohmann::json& j) {
    try {
        const auto dim = j.at("dimension").get<std::size_t>();
        std::vector<GmmComponent> comps;
        for (const auto& c : j.at("components")) {
            GmmComponent comp;
            comp.weight = c.at("weight").get<double>();
            const auto mean = c.at("mean").get<std::vector<double>>();
            const auto cov = c.at("covariance").get<std::vector<double>>();
            if (mean.size() != dim || cov.size() != dim * dim) throw SchemaError("GMM component size mismatch");
            comp.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(dim));
            comp.covariance = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                cov.data(), static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
            comps.push_back(std::move(comp));
        }
        GmmFitMetadata md;
        if (j.contains("fit_metadata")) {
            const auto& m = j.at("fit_metadata");
            md.iterations = m.value("iterations", std::size_t{0});
            md.final_log_likelihood = m.value("final_log_likelihood", 0.0);
            md.objective_history = m.value("objective_history", std::vector<double>{});
            md.seed = m.value("seed", std::uint64_t{0});
        }
        const auto cfg = j.contains("fit_config") ? gmm_fit_config_from_json(j.at("fit_config")) : GmmFitConfig{};
        return GmmModel(std::move(comps), j.value("exercise_id", std::string{}), cfg, std::move(md));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("gmm model", e.what());
    }
}

inline nlohmann::json classifier_to_json(const GmmClassifier& c) {
    return {{"kind", "gmm_classifier"},
            {"threshold", detail::real_to_json(c.threshold)},
            {"validation_f1", c.validation_f1},
            {"model", gmm_to_json(c.model)}};
}

inline GmmClassifier classifier_from_json(const nlohmann::json& j) {
    try {
        GmmClassifier c;
        c.model = gmm_from_json(j.at("model"));
        c.threshold = detail::real_from_json(j.at("threshold"));
        c.validation_f1 = j.value("validation_f1", 0.0);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("gmm classifier", e.what());
    }
}

} // namespace rehab

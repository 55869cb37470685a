#pragma once

// Reference implementations written from the textbook definitions, sharing
// no code with the library. Slow on purpose.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "rehab/gmm.hpp"
#include "rehab/metrics.hpp"
#include "rehab/stgcn.hpp"

namespace oracle {

using rehab::Label;

// log N(x; mu, S) in long double via Gaussian elimination with partial pivoting.
inline long double log_gaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
    const auto n = static_cast<std::size_t>(x.size());
    std::vector<std::vector<long double>> a(n, std::vector<long double>(n + 1));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) a[r][c] = cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        a[r][n] = static_cast<long double>(x[static_cast<Eigen::Index>(r)]) - mu[static_cast<Eigen::Index>(r)];
    }
    long double logdet = 0.0L;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        std::swap(a[piv], a[col]);
        logdet += std::log(std::fabs(a[col][col]));
        for (std::size_t r = col + 1; r < n; ++r) {
            const long double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<long double> y(n);
    for (std::size_t r = n; r-- > 0;) {
        long double s = a[r][n];
        for (std::size_t c = r + 1; c < n; ++c) s -= a[r][c] * y[c];
        y[r] = s / a[r][r];
    }
    long double quad = 0.0L;
    for (std::size_t r = 0; r < n; ++r)
        quad += (static_cast<long double>(x[static_cast<Eigen::Index>(r)]) - mu[static_cast<Eigen::Index>(r)]) * y[r];
    const long double log2pi = std::log(2.0L * 3.141592653589793238462643383279502884L);
    return -0.5L * (static_cast<long double>(n) * log2pi + logdet + quad);
}

// Mixture log-density by direct summation of weighted densities.
inline long double log_mixture(const Eigen::VectorXd& x, const std::vector<rehab::GmmComponent>& comps) {
    long double sum = 0.0L;
    for (const auto& c : comps) sum += static_cast<long double>(c.weight) * std::exp(log_gaussian(x, c.mean, c.covariance));
    return std::log(sum);
}

struct Counts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts count(const std::vector<Label>& pred, const std::vector<Label>& truth) {
    Counts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == Label::correct, t = truth[i] == Label::correct;
        if (p && t) ++c.tp;
        if (p && !t) ++c.fp;
        if (!p && t) ++c.fn;
        if (!p && !t) ++c.tn;
    }
    return c;
}

inline double f1(const std::vector<Label>& pred, const std::vector<Label>& truth) {
    const auto c = count(pred, truth);
    if (c.tp + c.fp + c.fn == 0) return 1.0;
    // 2PR/(P+R) simplifies to 2TP / (2TP + FP + FN).
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

inline double accuracy(const std::vector<Label>& pred, const std::vector<Label>& truth) {
    const auto c = count(pred, truth);
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(pred.size());
}

// Cohen's kappa from the explicit 2x2 contingency table.
inline double kappa(const std::vector<Label>& a, const std::vector<Label>& b) {
    double table[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < a.size(); ++i) table[static_cast<int>(a[i])][static_cast<int>(b[i])] += 1.0;
    const double n = static_cast<double>(a.size());
    const double po = (table[0][0] + table[1][1]) / n;
    const double pe = ((table[0][0] + table[0][1]) * (table[0][0] + table[1][0]) +
                       (table[1][0] + table[1][1]) * (table[0][1] + table[1][1])) /
                      (n * n);
    if (pe == 1.0) return 1.0;
    return (po - pe) / (1.0 - pe);
}

// Krippendorff's nominal alpha from pairwise disagreement counts:
// alpha = 1 - (n - 1) * sum_u D_u / (m_u - 1) / sum_{c != k} n_c n_k.
inline double alpha(const std::vector<std::vector<std::optional<int>>>& table) {
    std::map<int, double> totals;
    double weighted_disagreement = 0.0;
    double n = 0.0;
    for (const auto& unit : table) {
        std::vector<int> v;
        for (const auto& x : unit)
            if (x) v.push_back(*x);
        if (v.size() < 2) continue;
        double disagree = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = 0; j < v.size(); ++j)
                if (i != j && v[i] != v[j]) disagree += 1.0;
        weighted_disagreement += disagree / static_cast<double>(v.size() - 1);
        for (int x : v) totals[x] += 1.0;
        n += static_cast<double>(v.size());
    }
    double expected = 0.0;
    for (const auto& [c, nc] : totals)
        for (const auto& [k, nk] : totals)
            if (c != k) expected += nc * nk;
    return 1.0 - (n - 1.0) * weighted_disagreement / expected;
}

// Best F1 over every candidate threshold, and the smallest threshold reaching it.
struct ScanResult {
    double threshold;
    double f1;
};

inline ScanResult threshold_scan(const std::vector<double>& scores, const std::vector<Label>& labels) {
    std::set<double> distinct(scores.begin(), scores.end());
    std::vector<double> sorted(distinct.begin(), distinct.end());
    std::vector<double> candidates{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    std::sort(candidates.begin(), candidates.end());
    ScanResult best{0.0, -1.0};
    for (double t : candidates) {
        std::vector<Label> pred;
        for (double s : scores) pred.push_back(s >= t ? Label::correct : Label::incorrect);
        const double f = f1(pred, labels);
        if (f > best.f1) best = {t, f};
    }
    return best;
}

// Valid-mode convolution along time with explicit loops.
inline Eigen::MatrixXd temporal_conv(const rehab::FeatureMap& x, const rehab::TemporalKernel& k) {
    const std::size_t cin = x.channels(), cout = k.out_channels(), t_out = x.frames - k.size + 1;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(t_out * x.joints), static_cast<Eigen::Index>(cout));
    for (std::size_t t = 0; t < t_out; ++t)
        for (std::size_t j = 0; j < x.joints; ++j)
            for (std::size_t o = 0; o < cout; ++o) {
                double s = k.bias(0, static_cast<Eigen::Index>(o));
                for (std::size_t tau = 0; tau < k.size; ++tau)
                    for (std::size_t c = 0; c < cin; ++c)
                        s += x.data(static_cast<Eigen::Index>((t + tau) * x.joints + j), static_cast<Eigen::Index>(c)) *
                             k.weight(static_cast<Eigen::Index>(tau * cin + c), static_cast<Eigen::Index>(o));
                out(static_cast<Eigen::Index>(t * x.joints + j), static_cast<Eigen::Index>(o)) = s;
            }
    return out;
}

inline Eigen::MatrixXd gated_conv(const rehab::FeatureMap& x, const rehab::TemporalKernel& v, const rehab::TemporalKernel& g) {
    const Eigen::MatrixXd a = temporal_conv(x, v), b = temporal_conv(x, g);
    Eigen::MatrixXd out(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) / (1.0 + std::exp(-b(r, c)));
    return out;
}

// out[t, j, o] = sum_i sum_c A[j, i] x[t, i, c] W[c, o]
inline Eigen::MatrixXd graph_conv(const rehab::FeatureMap& x, const Eigen::MatrixXd& adj, const Eigen::MatrixXd& w) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.data.rows(), w.cols());
    const auto J = static_cast<Eigen::Index>(x.joints);
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(x.frames); ++t)
        for (Eigen::Index j = 0; j < J; ++j)
            for (Eigen::Index o = 0; o < w.cols(); ++o) {
                double s = 0.0;
                for (Eigen::Index i = 0; i < J; ++i)
                    for (Eigen::Index c = 0; c < w.rows(); ++c) s += adj(j, i) * x.data(t * J + i, c) * w(c, o);
                out(t * J + j, o) = s;
            }
    return out;
}

// Plain 1-D two-component EM with a variance floor, iterated to a fixed point.
struct Em1d {
    double w[2], mu[2], var[2];
};

inline Em1d em_1d(const std::vector<double>& x, Em1d m, double floor, int iterations = 2000) {
    const double pi = 3.141592653589793;
    std::vector<double> r0(x.size());
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            double p[2];
            for (int k = 0; k < 2; ++k)
                p[k] = m.w[k] * std::exp(-0.5 * (x[i] - m.mu[k]) * (x[i] - m.mu[k]) / m.var[k]) / std::sqrt(2 * pi * m.var[k]);
            r0[i] = p[0] / (p[0] + p[1]);
        }
        for (int k = 0; k < 2; ++k) {
            double nk = 0, sx = 0, sxx = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double r = k == 0 ? r0[i] : 1.0 - r0[i];
                nk += r;
                sx += r * x[i];
            }
            m.mu[k] = sx / nk;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double r = k == 0 ? r0[i] : 1.0 - r0[i];
                sxx += r * (x[i] - m.mu[k]) * (x[i] - m.mu[k]);
            }
            m.var[k] = sxx / nk + floor;
            m.w[k] = nk / static_cast<double>(x.size());
        }
    }
    return m;
}

} // namespace oracle

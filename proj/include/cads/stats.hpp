#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "cads/errors.hpp"

namespace cads::stats {

struct PairwiseP {
    int a = 0;
    int b = 0;
    double statistic = 0.0;
    double p = 1.0;
};

struct TestResult {
    std::string name;
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<PairwiseP> pairwise;  // post-hoc families only
    std::string note;
};

using Sample = std::vector<double>;
using Groups = std::vector<Sample>;

namespace detail {

inline double mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double sum_sq_dev(std::span<const double> x, double m) {
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s;
}

inline double normal_sf(double z) {
    static const boost::math::normal_distribution<double> n01;
    return boost::math::cdf(boost::math::complement(n01, z));
}

inline double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> n01;
    return boost::math::quantile(n01, p);
}

inline double f_sf(double x, double df1, double df2) {
    if (!std::isfinite(x)) return x > 0 ? 0.0 : 1.0;
    if (x <= 0) return 1.0;
    boost::math::fisher_f_distribution<double> f(df1, df2);
    return boost::math::cdf(boost::math::complement(f, x));
}

inline double chi2_sf(double x, double df) {
    if (x <= 0) return 1.0;
    boost::math::chi_squared_distribution<double> c(df);
    return boost::math::cdf(boost::math::complement(c, x));
}

// midranks of the pooled sample plus the tie-group sizes
inline std::pair<std::vector<double>, std::vector<std::size_t>> midranks(const std::vector<double>& pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(n);
    std::vector<std::size_t> ties;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        ties.push_back(j - i + 1);
        i = j + 1;
    }
    return {std::move(ranks), std::move(ties)};
}

inline void require_groups(const Groups& g, std::size_t min_groups, std::size_t min_each,
                           const char* who) {
    if (g.size() < min_groups)
        throw SampleTooSmall(std::string(who) + ": needs at least " + std::to_string(min_groups) + " groups");
    for (const auto& s : g)
        if (s.size() < min_each)
            throw SampleTooSmall(std::string(who) + ": every group needs n >= " + std::to_string(min_each));
}

}  // namespace detail

// Shapiro-Wilk normality test, Royston's AS R94 approximation.
inline TestResult shapiro_wilk(std::span<const double> sample) {
    const std::size_t n = sample.size();
    if (n < 3) throw SampleTooSmall("shapiro_wilk: n must be >= 3");
    if (n > 5000) throw Error("shapiro_wilk: n must be <= 5000");

    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    if (x.front() == x.back()) throw DegenerateSample("shapiro_wilk: constant sample");

    const double an = static_cast<double>(n);
    std::vector<double> a(n, 0.0);
    if (n == 3) {
        const double sqrth = std::sqrt(0.5);
        a[0] = -sqrth;
        a[2] = sqrth;
    } else {
        std::vector<double> m(n);
        double ssumm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = detail::normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
            ssumm2 += m[i] * m[i];
        }
        const double rms = std::sqrt(ssumm2);
        const double rsn = 1.0 / std::sqrt(an);
        auto poly5 = [&](double c1, double c2, double c3, double c4, double c5) {
            return ((((c5 * rsn + c4) * rsn + c3) * rsn + c2) * rsn + c1) * rsn;
        };
        const double a_n = poly5(0.221157, -0.147981, -2.071190, 4.434685, -2.706056) + m[n - 1] / rms;
        double phi;
        if (n > 5) {
            const double a_n1 =
                poly5(0.042981, -0.293762, -1.752461, 5.682633, -3.582633) + m[n - 2] / rms;
            phi = (ssumm2 - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2]) /
                  (1.0 - 2.0 * a_n * a_n - 2.0 * a_n1 * a_n1);
            a[n - 1] = a_n;
            a[n - 2] = a_n1;
            a[0] = -a_n;
            a[1] = -a_n1;
            for (std::size_t i = 2; i < n - 2; ++i) a[i] = m[i] / std::sqrt(phi);
        } else {
            phi = (ssumm2 - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * a_n * a_n);
            a[n - 1] = a_n;
            a[0] = -a_n;
            for (std::size_t i = 1; i < n - 1; ++i) a[i] = m[i] / std::sqrt(phi);
        }
    }

    const double xbar = detail::mean(x);
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) num += a[i] * x[i];
    const double denom = detail::sum_sq_dev(x, xbar);
    double w = (num * num) / denom;
    if (w > 1.0) w = 1.0;

    double p;
    if (n == 3) {
        constexpr double pi6 = 1.90985931710274;   // 6/pi
        constexpr double stqr = 1.04719755119660;  // asin(sqrt(3/4))
        p = pi6 * (std::asin(std::sqrt(w)) - stqr);
        p = std::clamp(p, 0.0, 1.0);
    } else {
        const double w1 = std::max(1.0 - w, 1e-15);
        double z;
        if (n <= 11) {
            const double gamma = 0.459 * an - 2.273;
            const double y = -std::log(gamma - std::log(w1));
            const double mu = 0.5440 + an * (-0.39978 + an * (0.025054 - an * 0.0006714));
            const double sigma = std::exp(1.3822 + an * (-0.77857 + an * (0.062767 - an * 0.0020322)));
            z = (y - mu) / sigma;
        } else {
            const double ln_n = std::log(an);
            const double y = std::log(w1);
            const double mu = -1.5861 + ln_n * (-0.31082 + ln_n * (-0.083751 + ln_n * 0.0038915));
            const double sigma = std::exp(-0.4803 + ln_n * (-0.082676 + ln_n * 0.0030302));
            z = (y - mu) / sigma;
        }
        p = detail::normal_sf(z);
    }
    return {"shapiro_wilk", w, p, {}, ""};
}

// Levene's test for variance equality, mean-centered.
inline TestResult levene(const Groups& groups) {
    detail::require_groups(groups, 2, 2, "levene");
    const std::size_t k = groups.size();
    std::size_t n_total = 0;
    std::vector<std::vector<double>> z(k);
    std::vector<double> zbar(k);
    double grand = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double m = detail::mean(groups[i]);
        z[i].reserve(groups[i].size());
        for (double v : groups[i]) z[i].push_back(std::abs(v - m));
        zbar[i] = detail::mean(z[i]);
        grand += zbar[i] * static_cast<double>(z[i].size());
        n_total += groups[i].size();
    }
    grand /= static_cast<double>(n_total);

    double between = 0.0, within = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        between += static_cast<double>(z[i].size()) * (zbar[i] - grand) * (zbar[i] - grand);
        within += detail::sum_sq_dev(z[i], zbar[i]);
    }
    const double df1 = static_cast<double>(k - 1);
    const double df2 = static_cast<double>(n_total - k);
    double stat;
    if (between == 0.0)
        stat = 0.0;
    else if (within == 0.0)
        stat = std::numeric_limits<double>::infinity();
    else
        stat = (df2 / df1) * (between / within);
    return {"levene", stat, detail::f_sf(stat, df1, df2), {}, ""};
}

inline TestResult one_way_anova(const Groups& groups) {
    detail::require_groups(groups, 2, 2, "one_way_anova");
    const std::size_t k = groups.size();
    std::size_t n_total = 0;
    double grand = 0.0;
    std::vector<double> means(k);
    for (std::size_t i = 0; i < k; ++i) {
        means[i] = detail::mean(groups[i]);
        grand += means[i] * static_cast<double>(groups[i].size());
        n_total += groups[i].size();
    }
    grand /= static_cast<double>(n_total);

    double ssb = 0.0, ssw = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        ssb += static_cast<double>(groups[i].size()) * (means[i] - grand) * (means[i] - grand);
        ssw += detail::sum_sq_dev(groups[i], means[i]);
    }
    const double df1 = static_cast<double>(k - 1);
    const double df2 = static_cast<double>(n_total - k);
    double stat;
    if (ssb == 0.0)
        stat = 0.0;  // includes the all-values-identical convention
    else if (ssw == 0.0)
        stat = std::numeric_limits<double>::infinity();
    else
        stat = (ssb / df1) / (ssw / df2);
    return {"anova", stat, detail::f_sf(stat, df1, df2), {}, ""};
}

inline TestResult welch_anova(const Groups& groups) {
    detail::require_groups(groups, 2, 2, "welch_anova");
    const std::size_t k = groups.size();

    bool all_identical = true;
    const double first = groups[0][0];
    for (const auto& g : groups)
        for (double v : g) all_identical = all_identical && (v == first);
    if (all_identical) return {"welch_anova", 0.0, 1.0, {}, ""};

    std::vector<double> w(k), means(k);
    double sum_w = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        means[i] = detail::mean(groups[i]);
        const double var = detail::sum_sq_dev(groups[i], means[i]) /
                           static_cast<double>(groups[i].size() - 1);
        if (var == 0.0)
            throw DegenerateSample("welch_anova: a group has zero variance");
        w[i] = static_cast<double>(groups[i].size()) / var;
        sum_w += w[i];
    }
    double mean_w = 0.0;
    for (std::size_t i = 0; i < k; ++i) mean_w += w[i] * means[i];
    mean_w /= sum_w;

    const double kk = static_cast<double>(k);
    double tmp = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double r = 1.0 - w[i] / sum_w;
        tmp += r * r / static_cast<double>(groups[i].size() - 1);
    }
    tmp /= (kk * kk - 1.0);

    double num = 0.0;
    for (std::size_t i = 0; i < k; ++i) num += w[i] * (means[i] - mean_w) * (means[i] - mean_w);
    num /= (kk - 1.0);
    const double stat = num / (1.0 + 2.0 * (kk - 2.0) * tmp);
    const double df1 = kk - 1.0;
    const double df2 = 1.0 / (3.0 * tmp);
    return {"welch_anova", stat, detail::f_sf(stat, df1, df2), {}, ""};
}

inline TestResult kruskal_wallis(const Groups& groups) {
    detail::require_groups(groups, 2, 1, "kruskal_wallis");
    const std::size_t k = groups.size();
    std::vector<double> pooled;
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) {
        pooled.insert(pooled.end(), g.begin(), g.end());
        sizes.push_back(g.size());
    }
    const std::size_t n = pooled.size();
    std::string note;
    if (n < 5) note = "fewer than 5 total samples; asymptotic p-value unreliable";

    const auto [ranks, ties] = detail::midranks(pooled);
    const double dn = static_cast<double>(n);
    double h = 0.0;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < k; ++i) {
        double rsum = 0.0;
        for (std::size_t j = 0; j < sizes[i]; ++j) rsum += ranks[offset + j];
        offset += sizes[i];
        h += rsum * rsum / static_cast<double>(sizes[i]);
    }
    h = 12.0 / (dn * (dn + 1.0)) * h - 3.0 * (dn + 1.0);

    double tie_sum = 0.0;
    for (std::size_t t : ties) {
        const double td = static_cast<double>(t);
        tie_sum += td * td * td - td;
    }
    const double correction = 1.0 - tie_sum / (dn * dn * dn - dn);
    if (correction == 0.0) return {"kruskal_wallis", 0.0, 1.0, {}, "all values tied"};
    h /= correction;
    if (std::abs(h) < 1e-13) h = 0.0;
    const double p = h == 0.0 ? 1.0 : detail::chi2_sf(h, static_cast<double>(k - 1));
    return {"kruskal_wallis", h, p, {}, note};
}

// --- studentized range distribution (numerical integration) ---

namespace detail {

// P(range of k iid standard normals <= w)
inline double normal_range_cdf(double w, int k) {
    if (w <= 0.0) return 0.0;
    static const boost::math::normal_distribution<double> n01;
    auto integrand = [&](double z) {
        const double lo = boost::math::cdf(n01, z - w);
        const double hi = boost::math::cdf(n01, z);
        const double diff = hi - lo;
        if (diff <= 0.0) return 0.0;
        return boost::math::pdf(n01, z) * std::pow(diff, k - 1);
    };
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        integrand, -std::numeric_limits<double>::infinity(),
        std::numeric_limits<double>::infinity(), 12, 1e-10);
    return std::min(1.0, k * v);
}

}  // namespace detail

inline double studentized_range_cdf(double q, int k, double df) {
    if (q <= 0.0) return 0.0;
    if (k < 2) throw Error("studentized range needs k >= 2");
    if (df <= 0.0) throw Error("studentized range needs df > 0");
    // integrate the scaled-chi density of s = sqrt(chi2_df/df) against the
    // conditional range probability
    const double half_df = 0.5 * df;
    const double log_coeff = half_df * std::log(df) - std::lgamma(half_df) -
                             (half_df - 1.0) * std::log(2.0);
    auto integrand = [&](double s) {
        if (s <= 0.0) return 0.0;
        const double log_pdf = log_coeff + (df - 1.0) * std::log(s) - df * s * s / 2.0;
        return std::exp(log_pdf) * detail::normal_range_cdf(q * s, k);
    };
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        integrand, 0.0, std::numeric_limits<double>::infinity(), 12, 1e-9);
    return std::clamp(v, 0.0, 1.0);
}

inline double studentized_range_quantile(double p, int k, double df) {
    if (!(p > 0.0 && p < 1.0)) throw Error("studentized range quantile needs p in (0,1)");
    auto f = [&](double q) { return studentized_range_cdf(q, k, df) - p; };
    double lo = 1e-3, hi = 4.0;
    while (f(hi) < 0.0 && hi < 1e4) hi *= 2.0;
    std::uintmax_t max_iter = 128;
    auto r = boost::math::tools::toms748_solve(f, lo, hi,
                                               boost::math::tools::eps_tolerance<double>(40),
                                               max_iter);
    return 0.5 * (r.first + r.second);
}

// Tukey's HSD (Tukey-Kramer for unequal n). Pairwise p-values come from the
// studentized range distribution with df = N - k.
inline TestResult tukey_hsd(const Groups& groups) {
    detail::require_groups(groups, 2, 2, "tukey_hsd");
    const std::size_t k = groups.size();
    std::size_t n_total = 0;
    std::vector<double> means(k);
    double ssw = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        means[i] = detail::mean(groups[i]);
        ssw += detail::sum_sq_dev(groups[i], means[i]);
        n_total += groups[i].size();
    }
    const double df = static_cast<double>(n_total - k);
    const double mse = ssw / df;

    TestResult out{"tukey_hsd", 0.0, 1.0, {}, ""};
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            const double se = std::sqrt(mse / 2.0 * (1.0 / static_cast<double>(groups[i].size()) +
                                                     1.0 / static_cast<double>(groups[j].size())));
            double stat, p;
            if (mse == 0.0) {
                stat = (means[i] == means[j]) ? 0.0 : std::numeric_limits<double>::infinity();
                p = (means[i] == means[j]) ? 1.0 : 0.0;
            } else {
                stat = (means[i] - means[j]) / se;
                p = 1.0 - studentized_range_cdf(std::abs(stat), static_cast<int>(k), df);
            }
            out.pairwise.push_back({static_cast<int>(i), static_cast<int>(j), stat, p});
            out.statistic = std::max(out.statistic, std::abs(stat));
            out.p_value = std::min(out.p_value, p);
        }
    return out;
}

// Dunn's z-tests on rank sums, Bonferroni-adjusted.
inline TestResult dunn(const Groups& groups) {
    detail::require_groups(groups, 2, 1, "dunn");
    const std::size_t k = groups.size();
    std::vector<double> pooled;
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) {
        pooled.insert(pooled.end(), g.begin(), g.end());
        sizes.push_back(g.size());
    }
    const double n = static_cast<double>(pooled.size());
    const auto [ranks, ties] = detail::midranks(pooled);

    std::vector<double> mean_rank(k);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < k; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < sizes[i]; ++j) s += ranks[offset + j];
        mean_rank[i] = s / static_cast<double>(sizes[i]);
        offset += sizes[i];
    }
    double tie_sum = 0.0;
    for (std::size_t t : ties) {
        const double td = static_cast<double>(t);
        tie_sum += td * td * td - td;
    }
    const double tie_term = tie_sum / (12.0 * (n - 1.0));
    const double base_var = n * (n + 1.0) / 12.0 - tie_term;
    const double m = static_cast<double>(k * (k - 1) / 2);

    TestResult out{"dunn", 0.0, 1.0, {}, ""};
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            const double var = base_var * (1.0 / static_cast<double>(sizes[i]) +
                                           1.0 / static_cast<double>(sizes[j]));
            double z, p;
            if (var <= 0.0) {
                z = 0.0;
                p = 1.0;
            } else {
                z = (mean_rank[i] - mean_rank[j]) / std::sqrt(var);
                p = std::min(1.0, 2.0 * detail::normal_sf(std::abs(z)) * m);
            }
            out.pairwise.push_back({static_cast<int>(i), static_cast<int>(j), z, p});
            out.statistic = std::max(out.statistic, std::abs(z));
            out.p_value = std::min(out.p_value, p);
        }
    return out;
}

}  // namespace cads::stats

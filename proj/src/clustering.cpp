#include "exoval/clustering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "exoval/error.hpp"
#include "exoval/rng.hpp"

namespace exoval {

// k-means -----------------------------------------------------------------------

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
}

std::vector<std::vector<double>> standardize(const std::vector<std::vector<double>>& panel) {
    const std::size_t d = panel.front().size();
    const double n = static_cast<double>(panel.size());
    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    for (const auto& p : panel) {
        if (p.size() != d) throw ConfigError("k-means panel rows differ in length");
        for (std::size_t j = 0; j < d; ++j) mean[j] += p[j] / n;
    }
    for (const auto& p : panel)
        for (std::size_t j = 0; j < d; ++j) sd[j] += (p[j] - mean[j]) * (p[j] - mean[j]) / n;
    std::vector<std::vector<double>> z(panel.size(), std::vector<double>(d));
    for (std::size_t i = 0; i < panel.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double s = std::sqrt(sd[j]);
            z[i][j] = s > 0.0 ? (panel[i][j] - mean[j]) / s : 0.0;
        }
    return z;
}

KMeansResult lloyd(const std::vector<std::vector<double>>& z, Rng& rng) {
    const std::size_t n = z.size();
    const std::size_t d = z.front().size();

    // k-means++ seeding.
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::array<std::vector<double>, 2> centre{z[pick(rng)], {}};
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(z[i], centre[0]);
    std::discrete_distribution<std::size_t> second(dist.begin(), dist.end());
    centre[1] = z[second(rng)];

    KMeansResult r;
    r.labels.assign(n, -1);
    for (r.iterations = 1; r.iterations <= 300; ++r.iterations) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int lab = squared_distance(z[i], centre[1]) < squared_distance(z[i], centre[0]) ? 1 : 0;
            if (lab != r.labels[i]) changed = true;
            r.labels[i] = lab;
        }
        std::array<std::size_t, 2> count{0, 0};
        for (int c = 0; c < 2; ++c) centre[c].assign(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& c = centre[r.labels[i]];
            for (std::size_t j = 0; j < d; ++j) c[j] += z[i][j];
            ++count[r.labels[i]];
        }
        for (int c = 0; c < 2; ++c) {
            if (count[c] == 0) {
                // Re-seed an empty cluster with the point farthest from the other centre.
                const int other = 1 - c;
                std::size_t far = 0;
                double best = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dd = squared_distance(z[i], centre[other]);
                    if (dd > best) best = dd, far = i;
                }
                centre[c] = z[far];
                changed = true;
                continue;
            }
            for (double& x : centre[c]) x /= static_cast<double>(count[c]);
        }
        if (!changed) break;
    }
    r.wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) r.wcss += squared_distance(z[i], centre[r.labels[i]]);
    return r;
}

}  // namespace

KMeansResult kmeans2(const std::vector<std::vector<double>>& panel, int restarts, std::uint64_t seed) {
    if (panel.size() < 4) throw ConfigError("k-means needs at least 4 vectors");
    if (restarts < 1) throw ConfigError("k-means needs at least one restart");
    const auto z = standardize(panel);

    bool identical = true;
    for (std::size_t i = 1; i < panel.size() && identical; ++i) identical = panel[i] == panel[0];
    if (identical) {
        KMeansResult r;
        r.labels.assign(panel.size(), 0);
        r.degenerate = true;
        return r;
    }

    KMeansResult best;
    best.wcss = std::numeric_limits<double>::infinity();
    for (int k = 0; k < restarts; ++k) {
        Rng rng = substream(seed, static_cast<std::uint64_t>(k));
        KMeansResult r = lloyd(z, rng);
        if (r.wcss < best.wcss) best = std::move(r);
    }
    return best;
}

// Mutual information ------------------------------------------------------------

namespace {

struct Contingency {
    std::vector<double> a;                // row sums
    std::vector<double> b;                // column sums
    std::vector<std::vector<double>> n;  // counts
    double total = 0.0;
};

std::vector<int> compact(std::span<const int> labels) {
    std::map<int, int> ids;
    for (int l : labels) ids.emplace(l, 0);
    int next = 0;
    for (auto& [label, id] : ids) id = next++;
    std::vector<int> out;
    for (int l : labels) out.push_back(ids[l]);
    return out;
}

Contingency contingency(std::span<const int> u, std::span<const int> v) {
    if (u.size() != v.size()) throw ConfigError("labelings differ in length");
    if (u.size() < 2) throw ConfigError("labelings need at least two points");
    const auto cu = compact(u);
    const auto cv = compact(v);
    const int ru = *std::max_element(cu.begin(), cu.end()) + 1;
    const int rv = *std::max_element(cv.begin(), cv.end()) + 1;
    Contingency c;
    c.a.assign(ru, 0.0);
    c.b.assign(rv, 0.0);
    c.n.assign(ru, std::vector<double>(rv, 0.0));
    for (std::size_t i = 0; i < cu.size(); ++i) {
        c.n[cu[i]][cv[i]] += 1.0;
        c.a[cu[i]] += 1.0;
        c.b[cv[i]] += 1.0;
    }
    c.total = static_cast<double>(u.size());
    return c;
}

double entropy_of(const std::vector<double>& counts, double total) {
    double h = 0.0;
    for (double c : counts)
        if (c > 0.0) h -= c / total * std::log(c / total);
    return h;
}

double mi_of(const Contingency& c) {
    double mi = 0.0;
    for (std::size_t i = 0; i < c.a.size(); ++i)
        for (std::size_t j = 0; j < c.b.size(); ++j) {
            const double nij = c.n[i][j];
            if (nij > 0.0) mi += nij / c.total * std::log(c.total * nij / (c.a[i] * c.b[j]));
        }
    return std::max(mi, 0.0);
}

double emi_of(const Contingency& c) {
    const double N = c.total;
    const double lgN = std::lgamma(N + 1.0);
    double emi = 0.0;
    for (double ai : c.a)
        for (double bj : c.b) {
            const double lo = std::max(1.0, ai + bj - N);
            const double hi = std::min(ai, bj);
            const double fixed = std::lgamma(ai + 1.0) + std::lgamma(bj + 1.0) + std::lgamma(N - ai + 1.0) +
                                 std::lgamma(N - bj + 1.0) - lgN;
            for (double nij = lo; nij <= hi; nij += 1.0) {
                const double logP = fixed - std::lgamma(nij + 1.0) - std::lgamma(ai - nij + 1.0) -
                                    std::lgamma(bj - nij + 1.0) - std::lgamma(N - ai - bj + nij + 1.0);
                emi += nij / N * std::log(N * nij / (ai * bj)) * std::exp(logP);
            }
        }
    return emi;
}

// True when the two labelings induce the same partition.
bool same_partition(const Contingency& c) {
    if (c.a.size() != c.b.size()) return false;
    for (const auto& row : c.n)
        if (std::count_if(row.begin(), row.end(), [](double x) { return x > 0.0; }) != 1) return false;
    return true;
}

}  // namespace

double entropy(std::span<const int> labels) {
    const auto c = contingency(labels, labels);
    return entropy_of(c.a, c.total);
}

double mutual_information(std::span<const int> u, std::span<const int> v) { return mi_of(contingency(u, v)); }

double expected_mutual_information(std::span<const int> u, std::span<const int> v) {
    return emi_of(contingency(u, v));
}

AmiValue adjusted_mutual_information(std::span<const int> u, std::span<const int> v, AmiNormalization norm) {
    const Contingency c = contingency(u, v);
    AmiValue r;
    if (c.a.size() == 1 || c.b.size() == 1) {
        r.zeroEntropy = true;
        return r;
    }
    if (same_partition(c)) {
        r.value = 1.0;
        return r;
    }
    const double hu = entropy_of(c.a, c.total);
    const double hv = entropy_of(c.b, c.total);
    const double mi = mi_of(c);
    const double emi = emi_of(c);
    const double scale = norm == AmiNormalization::arithmetic ? 0.5 * (hu + hv) : std::max(hu, hv);
    r.value = (mi - emi) / (scale - emi);
    return r;
}

// Sampling check ----------------------------------------------------------------

AmiReport validate_sampling(const std::vector<std::vector<double>>& historical,
                            const std::vector<std::vector<double>>& sampled, const SamplingCheckConfig& cfg) {
    if (historical.empty() || sampled.empty()) throw ConfigError("both surface panels must be nonempty");
    if (cfg.baselineTrials < 1) throw ConfigError("baselineTrials must be positive");
    const std::size_t m = std::min(historical.size(), sampled.size());

    auto subset = [&](const std::vector<std::vector<double>>& panel, std::uint64_t tag) {
        std::vector<std::size_t> idx(panel.size());
        std::iota(idx.begin(), idx.end(), 0);
        if (panel.size() > m) {
            Rng rng(derive_seed(cfg.seed, tag));
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(m);
            std::sort(idx.begin(), idx.end());
        }
        std::vector<std::vector<double>> out;
        for (std::size_t i : idx) out.push_back(panel[i]);
        return out;
    };

    auto merged = subset(historical, stream_tag("historical"));
    auto other = subset(sampled, stream_tag("sampled"));
    merged.insert(merged.end(), other.begin(), other.end());
    std::vector<int> origin(2 * m, 0);
    std::fill(origin.begin() + static_cast<std::ptrdiff_t>(m), origin.end(), 1);

    AmiReport rep;
    rep.panelSize = m;
    const KMeansResult km = kmeans2(merged, cfg.restarts, derive_seed(cfg.seed, stream_tag("kmeans")));
    if (km.degenerate) {
        rep.verdict = Verdict::reject;
        rep.diagnostic = "all surfaces identical; clustering is degenerate";
        return rep;
    }
    rep.amiClustering = adjusted_mutual_information(km.labels, origin).value;

    Rng rng(derive_seed(cfg.seed, stream_tag("baseline")));
    std::vector<int> shuffled = origin;
    double sum = 0.0;
    for (int t = 0; t < cfg.baselineTrials; ++t) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        sum += adjusted_mutual_information(km.labels, shuffled).value;
    }
    rep.amiRandomBaseline = sum / cfg.baselineTrials;
    rep.verdict = rep.amiClustering < rep.amiRandomBaseline + cfg.margin ? Verdict::accept : Verdict::reject;
    return rep;
}

}  // namespace exoval

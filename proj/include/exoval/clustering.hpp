#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace exoval {

struct KMeansResult {
    std::vector<int> labels;  // 0 or 1
    double wcss = 0.0;        // within-cluster sum of squares, standardized units
    bool degenerate = false;  // every point identical: one cluster
    int iterations = 0;
};

// Lloyd iteration with k = 2 on per-column standardized vectors, keeping the
// restart with the lowest WCSS. Restart r seeds from substream (seed, r).
KMeansResult kmeans2(const std::vector<std::vector<double>>& panel, int restarts = 10, std::uint64_t seed = 1);

enum class AmiNormalization { arithmetic, max };

struct AmiValue {
    double value = 0.0;
    bool zeroEntropy = false;  // a labelling with one cluster; value is 0
};

// Chance-adjusted mutual information with the exact expected MI under the
// hypergeometric permutation model.
AmiValue adjusted_mutual_information(std::span<const int> u, std::span<const int> v,
                                     AmiNormalization norm = AmiNormalization::arithmetic);

double mutual_information(std::span<const int> u, std::span<const int> v);
double expected_mutual_information(std::span<const int> u, std::span<const int> v);
double entropy(std::span<const int> labels);

enum class Verdict { accept, reject };

struct AmiReport {
    double amiClustering = 0.0;
    double amiRandomBaseline = 0.0;
    Verdict verdict = Verdict::reject;
    std::size_t panelSize = 0;  // per origin, after balancing
    std::string diagnostic;
};

struct SamplingCheckConfig {
    int restarts = 10;
    int baselineTrials = 100;
    double margin = 0.05;
    std::uint64_t seed = 1;
};

// Merges equal-size subsets of both panels (the larger one is down-sampled),
// clusters them and compares the clusters with the origin labels. Sampled
// surfaces are accepted when the AMI stays within `margin` of the mean AMI of
// randomly permuted origin labels.
AmiReport validate_sampling(const std::vector<std::vector<double>>& historical,
                            const std::vector<std::vector<double>>& sampled, const SamplingCheckConfig& cfg = {});

}  // namespace exoval

#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exoval/market_models.hpp"
#include "exoval/pricing_mc.hpp"

namespace exoval {

inline constexpr std::size_t kGridMaturities = 5;
inline constexpr std::size_t kGridMoneyness = 5;
inline constexpr std::size_t kGridNodes = kGridMaturities * kGridMoneyness;
inline constexpr std::array<double, kGridMaturities> kMaturities{1.0 / 12.0, 0.25, 0.5, 1.0, 2.0};
inline constexpr std::array<double, kGridMoneyness> kMoneyness{0.7, 0.85, 1.0, 1.15, 1.3};

// Node index, maturity-major.
constexpr std::size_t node_index(std::size_t maturity, std::size_t moneyness) {
    return maturity * kGridMoneyness + moneyness;
}

class SurfaceMask {
public:
    static SurfaceMask full();
    // Drops {1m} x {0.7, 0.85, 1.15, 1.3} and {3m} x {0.7, 1.3}.
    static SurfaceMask snp19();
    static SurfaceMask from_active(const std::array<bool, kGridNodes>& active);

    bool active(std::size_t node) const { return active_[node]; }
    std::size_t count() const;
    std::vector<std::size_t> active_nodes() const;
    // Active node whose value stands in for an inactive node during
    // interpolation: same moneyness, nearest active maturity (longer on ties).
    std::size_t source(std::size_t node) const { return source_[node]; }
    std::string name() const;

    bool operator==(const SurfaceMask& o) const { return active_ == o.active_; }

private:
    explicit SurfaceMask(const std::array<bool, kGridNodes>& active);
    std::array<bool, kGridNodes> active_{};
    std::array<std::size_t, kGridNodes> source_{};
};

SurfaceMask parse_mask(const std::string& name);  // "full"/"25" or "snp19"/"19"

// Implied vols on the standard 5x5 grid. Only active nodes carry data.
struct SurfaceGrid {
    SurfaceMask mask = SurfaceMask::full();
    std::array<double, kGridNodes> vols{};

    double node_vol(std::size_t node) const { return vols[mask.source(node)]; }
    // Active vols in node order; the layout used for network features.
    std::vector<double> active_vols() const;
    static SurfaceGrid from_active_vols(const SurfaceMask& mask, std::span<const double> active);
    // Throws NumericError unless every active vol lies in (0, 2).
    void validate() const;
};

// Black-Scholes implied-vol surface of a model. Heston and Bates nodes use
// Fourier prices; lifted Heston nodes come from one common-path simulation
// configured by `mc`. Each node inverts its out-of-the-money option. Throws
// (ArbitrageError or NumericError) when a node cannot be inverted.
SurfaceGrid model_surface(const ModelParams& model, const MarketState& market, const SurfaceMask& mask,
                          const McConfig& mc = {});

// Same nodes as model_surface, but a failed node is returned as nullopt.
std::array<std::optional<double>, kGridNodes> try_model_surface(const ModelParams& model, const MarketState& market,
                                                               const SurfaceMask& mask, const McConfig& mc = {});

struct InterpolationWeights {
    std::array<std::size_t, 4> node;  // grid nodes, before mask substitution
    std::array<double, 4> weight;
};

// Bilinear weights in (moneyness, maturity); queries outside the grid hull
// are clamped to its boundary.
InterpolationWeights interpolation_weights(double K, double T, double S);
double interpolate(const SurfaceGrid& surface, double K, double T, double S);

struct OptionQuote {
    double maturity = 0.0;
    double strike = 0.0;
    double spot = 0.0;
    double impliedVol = 0.0;
    std::string date;

    bool inside_grid() const;
};

struct SurfaceFit {
    SurfaceGrid surface;
    std::array<bool, kGridNodes> flagged{};  // active nodes no quote touched
    double residual = 0.0;                   // sum of squared vol errors
    std::size_t rank = 0;
};

// Least-squares node vols: each quote's interpolated vol is linear in the
// active node vols, so the minimizer is a linear least-squares solution
// (minimum-norm when rank deficient). Nodes untouched by any quote are flagged
// and copied from the nearest determined node. Throws ConfigError for an empty
// set or a quote outside the grid.
SurfaceFit fit_surface(std::span<const OptionQuote> quotes, const SurfaceMask& mask);

// CSV formats ---------------------------------------------------------------

// Header required: date,T_years,strike,spot,implied_vol
std::vector<OptionQuote> read_quotes_csv(std::istream& in);

// maturity,moneyness,vol,active
void write_surface_csv(std::ostream& out, const SurfaceGrid& surface);
SurfaceGrid read_surface_csv(std::istream& in);

// One surface per day with its market: day,spot,rate,maturity,moneyness,vol,active
struct SurfaceDay {
    std::string id;
    MarketState market;
    SurfaceGrid surface;
};

void write_surface_panel_csv(std::ostream& out, std::span<const SurfaceDay> days);
std::vector<SurfaceDay> read_surface_panel_csv(std::istream& in);

}  // namespace exoval

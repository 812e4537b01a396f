#include "exoval/surface.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>

#include <Eigen/Dense>

#include "csv.hpp"
#include "exoval/black_scholes.hpp"
#include "exoval/error.hpp"
#include "exoval/heston_cf.hpp"

namespace exoval {

// Masks -----------------------------------------------------------------------

SurfaceMask::SurfaceMask(const std::array<bool, kGridNodes>& active) : active_(active) {
    if (std::none_of(active.begin(), active.end(), [](bool b) { return b; }))
        throw ConfigError("surface mask has no active node");
    for (std::size_t i = 0; i < kGridMaturities; ++i) {
        for (std::size_t j = 0; j < kGridMoneyness; ++j) {
            const std::size_t node = node_index(i, j);
            if (active_[node]) {
                source_[node] = node;
                continue;
            }
            // Nearest active node: maturity distance first, then moneyness;
            // among equals prefer the longer maturity.
            std::size_t best = kGridNodes;
            int bestKey = 1 << 30;
            for (std::size_t ii = 0; ii < kGridMaturities; ++ii) {
                for (std::size_t jj = 0; jj < kGridMoneyness; ++jj) {
                    if (!active_[node_index(ii, jj)]) continue;
                    const int di = std::abs(int(ii) - int(i)), dj = std::abs(int(jj) - int(j));
                    const int key = (dj * 8 + di) * 2 + (ii > i ? 0 : 1);
                    if (key < bestKey) {
                        bestKey = key;
                        best = node_index(ii, jj);
                    }
                }
            }
            source_[node] = best;
        }
    }
}

SurfaceMask SurfaceMask::full() {
    std::array<bool, kGridNodes> a;
    a.fill(true);
    return SurfaceMask(a);
}

SurfaceMask SurfaceMask::snp19() {
    std::array<bool, kGridNodes> a;
    a.fill(true);
    for (std::size_t j : {0, 1, 3, 4}) a[node_index(0, j)] = false;
    for (std::size_t j : {0, 4}) a[node_index(1, j)] = false;
    return SurfaceMask(a);
}

SurfaceMask SurfaceMask::from_active(const std::array<bool, kGridNodes>& active) { return SurfaceMask(active); }

std::size_t SurfaceMask::count() const { return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), true)); }

std::vector<std::size_t> SurfaceMask::active_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < kGridNodes; ++n)
        if (active_[n]) out.push_back(n);
    return out;
}

std::string SurfaceMask::name() const {
    if (*this == full()) return "full";
    if (*this == snp19()) return "snp19";
    return "custom";
}

SurfaceMask parse_mask(const std::string& name) {
    if (name == "full" || name == "25") return SurfaceMask::full();
    if (name == "snp19" || name == "19") return SurfaceMask::snp19();
    throw ConfigError("unknown surface mask: " + name);
}

// Grid --------------------------------------------------------------------------

std::vector<double> SurfaceGrid::active_vols() const {
    std::vector<double> out;
    for (std::size_t n : mask.active_nodes()) out.push_back(vols[n]);
    return out;
}

SurfaceGrid SurfaceGrid::from_active_vols(const SurfaceMask& mask, std::span<const double> active) {
    const auto nodes = mask.active_nodes();
    if (active.size() != nodes.size()) throw ConfigError("active vol count does not match the mask");
    SurfaceGrid g{mask, {}};
    for (std::size_t i = 0; i < nodes.size(); ++i) g.vols[nodes[i]] = active[i];
    for (std::size_t n = 0; n < kGridNodes; ++n)
        if (!mask.active(n)) g.vols[n] = g.vols[mask.source(n)];
    return g;
}

void SurfaceGrid::validate() const {
    for (std::size_t n : mask.active_nodes())
        if (!(vols[n] > 0.0 && vols[n] < 2.0)) throw NumericError("surface vol outside (0, 2)");
}

// Model surfaces ---------------------------------------------------------------

namespace {

std::optional<double> invert_otm(double call, double put, const MarketState& m, double K, double T) {
    const double forward = m.spot * std::exp((m.rate - m.yield) * T);
    try {
        if (K < forward) return implied_vol(put, m.spot, K, m.rate, m.yield, T, OptionType::put);
        return implied_vol(call, m.spot, K, m.rate, m.yield, T, OptionType::call);
    } catch (const ArbitrageError&) {
        return std::nullopt;
    } catch (const NumericError&) {
        return std::nullopt;
    }
}

}  // namespace

std::array<std::optional<double>, kGridNodes> try_model_surface(const ModelParams& model, const MarketState& market,
                                                               const SurfaceMask& mask, const McConfig& mc) {
    std::array<std::optional<double>, kGridNodes> out{};
    const double S = market.spot;

    if (kind_of(model) == ModelKind::lifted_heston) {
        std::vector<double> Ts;
        for (std::size_t i = 0; i < kGridMaturities; ++i)
            for (std::size_t j = 0; j < kGridMoneyness; ++j)
                if (mask.active(node_index(i, j))) {
                    Ts.push_back(kMaturities[i]);
                    break;
                }
        std::vector<double> Ks;
        for (double m : kMoneyness) Ks.push_back(m * S);
        const auto prices = mc_vanilla_grid(model, market, Ts, Ks, mc);
        std::size_t row = 0;
        for (std::size_t i = 0; i < kGridMaturities; ++i) {
            if (std::find(Ts.begin(), Ts.end(), kMaturities[i]) == Ts.end()) continue;
            for (std::size_t j = 0; j < kGridMoneyness; ++j) {
                if (!mask.active(node_index(i, j))) continue;
                const auto& p = prices[row * kGridMoneyness + j];
                out[node_index(i, j)] = invert_otm(p.call.price, p.put.price, market, Ks[j], kMaturities[i]);
            }
            ++row;
        }
        return out;
    }

    for (std::size_t i = 0; i < kGridMaturities; ++i) {
        std::vector<double> Ks;
        std::vector<std::size_t> nodes;
        for (std::size_t j = 0; j < kGridMoneyness; ++j)
            if (mask.active(node_index(i, j))) {
                Ks.push_back(kMoneyness[j] * S);
                nodes.push_back(node_index(i, j));
            }
        if (Ks.empty()) continue;
        std::vector<CallPut> prices;
        try {
            prices = cf_vanilla_prices(model, market, kMaturities[i], Ks);
        } catch (const NumericError&) {
            continue;
        }
        for (std::size_t k = 0; k < Ks.size(); ++k)
            out[nodes[k]] = invert_otm(prices[k].call, prices[k].put, market, Ks[k], kMaturities[i]);
    }
    return out;
}

SurfaceGrid model_surface(const ModelParams& model, const MarketState& market, const SurfaceMask& mask,
                          const McConfig& mc) {
    const auto nodes = try_model_surface(model, market, mask, mc);
    std::vector<double> active;
    for (std::size_t n : mask.active_nodes()) {
        if (!nodes[n]) throw NumericError("model surface node " + std::to_string(n) + " could not be inverted");
        active.push_back(*nodes[n]);
    }
    SurfaceGrid g = SurfaceGrid::from_active_vols(mask, active);
    g.validate();
    return g;
}

// Interpolation -----------------------------------------------------------------

namespace {

// Lower cell index and fractional position of x on an increasing axis, with x
// clamped to the axis range.
template <std::size_t N>
std::pair<std::size_t, double> locate(const std::array<double, N>& axis, double x) {
    x = std::clamp(x, axis.front(), axis.back());
    std::size_t i = 0;
    while (i + 2 < N && x > axis[i + 1]) ++i;
    return {i, (x - axis[i]) / (axis[i + 1] - axis[i])};
}

}  // namespace

InterpolationWeights interpolation_weights(double K, double T, double S) {
    const auto [ti, tf] = locate(kMaturities, T);
    const auto [mi, mf] = locate(kMoneyness, K / S);
    return {{node_index(ti, mi), node_index(ti, mi + 1), node_index(ti + 1, mi), node_index(ti + 1, mi + 1)},
            {(1 - tf) * (1 - mf), (1 - tf) * mf, tf * (1 - mf), tf * mf}};
}

double interpolate(const SurfaceGrid& surface, double K, double T, double S) {
    const auto w = interpolation_weights(K, T, S);
    double v = 0.0;
    for (std::size_t c = 0; c < 4; ++c) v += w.weight[c] * surface.node_vol(w.node[c]);
    return v;
}

// Fitting -----------------------------------------------------------------------

bool OptionQuote::inside_grid() const {
    constexpr double eps = 1e-9;
    const double m = strike / spot;
    return spot > 0.0 && strike > 0.0 && m >= kMoneyness.front() - eps && m <= kMoneyness.back() + eps &&
           maturity >= kMaturities.front() - eps && maturity <= kMaturities.back() + eps;
}

SurfaceFit fit_surface(std::span<const OptionQuote> quotes, const SurfaceMask& mask) {
    if (quotes.empty()) throw ConfigError("fit_surface needs at least one quote");
    const auto active = mask.active_nodes();
    std::array<int, kGridNodes> column{};
    column.fill(-1);
    for (std::size_t c = 0; c < active.size(); ++c) column[active[c]] = static_cast<int>(c);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(quotes.size()), static_cast<Eigen::Index>(active.size()));
    Eigen::VectorXd y(static_cast<Eigen::Index>(quotes.size()));
    for (std::size_t q = 0; q < quotes.size(); ++q) {
        const auto& quote = quotes[q];
        if (!quote.inside_grid()) throw ConfigError("quote outside the surface grid");
        if (!(quote.impliedVol > 0.0)) throw ConfigError("quote implied vol must be positive");
        const auto w = interpolation_weights(quote.strike, quote.maturity, quote.spot);
        for (std::size_t c = 0; c < 4; ++c) A(q, column[mask.source(w.node[c])]) += w.weight[c];
        y(q) = quote.impliedVol;
    }

    // Keep the columns some quote actually touches.
    std::vector<Eigen::Index> used;
    for (Eigen::Index c = 0; c < A.cols(); ++c)
        if (A.col(c).cwiseAbs().maxCoeff() > 0.0) used.push_back(c);
    if (used.empty()) throw ConfigError("no quote carries weight on an active node");
    Eigen::MatrixXd Au(A.rows(), static_cast<Eigen::Index>(used.size()));
    for (std::size_t k = 0; k < used.size(); ++k) Au.col(static_cast<Eigen::Index>(k)) = A.col(used[k]);

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Au);
    const Eigen::VectorXd x = cod.solve(y);

    SurfaceFit fit;
    fit.rank = static_cast<std::size_t>(cod.rank());
    std::vector<double> values(active.size(), 0.0);
    std::vector<bool> determined(active.size(), false);
    for (std::size_t k = 0; k < used.size(); ++k) {
        values[used[k]] = x(static_cast<Eigen::Index>(k));
        determined[used[k]] = true;
    }
    for (std::size_t c = 0; c < active.size(); ++c) {
        if (determined[c]) continue;
        fit.flagged[active[c]] = true;
        const int ci = int(active[c] / kGridMoneyness), cj = int(active[c] % kGridMoneyness);
        int bestDist = 1 << 30;
        for (std::size_t o = 0; o < active.size(); ++o) {
            if (!determined[o]) continue;
            const int d = std::abs(int(active[o] / kGridMoneyness) - ci) + std::abs(int(active[o] % kGridMoneyness) - cj);
            if (d < bestDist) {
                bestDist = d;
                values[c] = values[o];
            }
        }
    }
    fit.surface = SurfaceGrid::from_active_vols(mask, values);
    fit.residual = (Au * x - y).squaredNorm();
    return fit;
}

// CSV ---------------------------------------------------------------------------

std::vector<OptionQuote> read_quotes_csv(std::istream& in) {
    const auto pos = csv::header_columns(in, {"date", "T_years", "strike", "spot", "implied_vol"});
    std::vector<OptionQuote> out;
    std::string line;
    std::size_t lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (csv::trim(line).empty()) continue;
        const auto f = csv::split(line);
        if (f.size() <= *std::max_element(pos.begin(), pos.end()))
            throw ConfigError("line " + std::to_string(lineNo) + ": too few columns");
        OptionQuote q;
        q.date = f[pos[0]];
        q.maturity = csv::to_double(f[pos[1]], lineNo);
        q.strike = csv::to_double(f[pos[2]], lineNo);
        q.spot = csv::to_double(f[pos[3]], lineNo);
        q.impliedVol = csv::to_double(f[pos[4]], lineNo);
        out.push_back(std::move(q));
    }
    return out;
}

void write_surface_csv(std::ostream& out, const SurfaceGrid& surface) {
    out << "maturity,moneyness,vol,active\n" << std::setprecision(17);
    for (std::size_t i = 0; i < kGridMaturities; ++i)
        for (std::size_t j = 0; j < kGridMoneyness; ++j) {
            const std::size_t n = node_index(i, j);
            out << kMaturities[i] << ',' << kMoneyness[j] << ',' << surface.vols[n] << ','
                << (surface.mask.active(n) ? 1 : 0) << '\n';
        }
}

namespace {

std::size_t nearest_index(std::span<const double> axis, double v) {
    for (std::size_t i = 0; i < axis.size(); ++i)
        if (std::abs(axis[i] - v) < 1e-6) return i;
    throw ConfigError("value " + std::to_string(v) + " is not a standard grid coordinate");
}

struct NodeRow {
    std::size_t node;
    double vol;
    bool active;
};

SurfaceGrid assemble(const std::vector<NodeRow>& rows) {
    std::array<bool, kGridNodes> active{};
    std::array<double, kGridNodes> vols{};
    std::array<bool, kGridNodes> seen{};
    for (const auto& r : rows) {
        if (seen[r.node]) throw ConfigError("duplicate surface node");
        seen[r.node] = true;
        active[r.node] = r.active;
        vols[r.node] = r.vol;
    }
    SurfaceMask mask = SurfaceMask::from_active(active);
    std::vector<double> act;
    for (std::size_t n : mask.active_nodes()) act.push_back(vols[n]);
    return SurfaceGrid::from_active_vols(mask, act);
}

NodeRow parse_node(const std::vector<std::string>& f, std::size_t mCol, std::size_t kCol, std::size_t vCol,
                   std::size_t aCol, std::size_t lineNo) {
    const std::size_t i = nearest_index(kMaturities, csv::to_double(f[mCol], lineNo));
    const std::size_t j = nearest_index(kMoneyness, csv::to_double(f[kCol], lineNo));
    return {node_index(i, j), csv::to_double(f[vCol], lineNo), csv::to_double(f[aCol], lineNo) != 0.0};
}

}  // namespace

SurfaceGrid read_surface_csv(std::istream& in) {
    const auto pos = csv::header_columns(in, {"maturity", "moneyness", "vol", "active"});
    std::vector<NodeRow> rows;
    std::string line;
    std::size_t lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (csv::trim(line).empty()) continue;
        const auto f = csv::split(line);
        if (f.size() <= *std::max_element(pos.begin(), pos.end()))
            throw ConfigError("line " + std::to_string(lineNo) + ": too few columns");
        rows.push_back(parse_node(f, pos[0], pos[1], pos[2], pos[3], lineNo));
    }
    return assemble(rows);
}

void write_surface_panel_csv(std::ostream& out, std::span<const SurfaceDay> days) {
    out << "day,spot,rate,maturity,moneyness,vol,active\n" << std::setprecision(17);
    for (const auto& d : days)
        for (std::size_t i = 0; i < kGridMaturities; ++i)
            for (std::size_t j = 0; j < kGridMoneyness; ++j) {
                const std::size_t n = node_index(i, j);
                out << d.id << ',' << d.market.spot << ',' << d.market.rate << ',' << kMaturities[i] << ','
                    << kMoneyness[j] << ',' << d.surface.vols[n] << ',' << (d.surface.mask.active(n) ? 1 : 0) << '\n';
            }
}

std::vector<SurfaceDay> read_surface_panel_csv(std::istream& in) {
    const auto pos = csv::header_columns(in, {"day", "spot", "rate", "maturity", "moneyness", "vol", "active"});
    std::vector<std::string> order;
    std::map<std::string, std::pair<MarketState, std::vector<NodeRow>>> byDay;
    std::string line;
    std::size_t lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (csv::trim(line).empty()) continue;
        const auto f = csv::split(line);
        if (f.size() <= *std::max_element(pos.begin(), pos.end()))
            throw ConfigError("line " + std::to_string(lineNo) + ": too few columns");
        const std::string& id = f[pos[0]];
        auto it = byDay.find(id);
        if (it == byDay.end()) {
            order.push_back(id);
            MarketState m{csv::to_double(f[pos[1]], lineNo), csv::to_double(f[pos[2]], lineNo), 0.0};
            it = byDay.emplace(id, std::make_pair(m, std::vector<NodeRow>{})).first;
        }
        it->second.second.push_back(parse_node(f, pos[3], pos[4], pos[5], pos[6], lineNo));
    }
    if (order.empty()) throw ConfigError("surface panel is empty");
    std::vector<SurfaceDay> out;
    for (const auto& id : order) {
        const auto& [market, rows] = byDay.at(id);
        market.validate();
        out.push_back({id, market, assemble(rows)});
    }
    return out;
}

}  // namespace exoval

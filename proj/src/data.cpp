#include "qarch/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "qarch/csv.hpp"
#include "qarch/rng.hpp"

namespace qarch {

OhlcSeries load_ohlc_csv(const std::string& path) {
    const auto rows = read_csv(path);
    if (rows.empty()) throw std::runtime_error("empty OHLC file: " + path);
    const auto& header = rows[0];
    if (header.size() < 5 || header[0] != "date" || header[1] != "open" || header[2] != "high" ||
        header[3] != "low" || header[4] != "close")
        throw std::runtime_error("OHLC header must be date,open,high,low,close in " + path);
    struct Row {
        std::string date;
        double o, h, l, c;
    };
    std::vector<Row> parsed;
    parsed.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& cells = rows[i];
        const std::string ctx = path + " row " + std::to_string(i + 1);
        if (cells.size() < 5) throw std::runtime_error("short row in " + ctx);
        Row r;
        r.date = cells[0];
        r.o = parse_double(cells[1], ctx);
        r.h = parse_double(cells[2], ctx);
        r.l = parse_double(cells[3], ctx);
        r.c = parse_double(cells[4], ctx);
        if (!(r.o > 0.0 && r.h > 0.0 && r.l > 0.0 && r.c > 0.0))
            throw std::runtime_error("nonpositive price in " + ctx);
        if (r.l > std::min(r.o, r.c) + 1e-12 * r.l || r.h < std::max(r.o, r.c) - 1e-12 * r.h)
            throw std::runtime_error("OHLC ordering violated (low <= open,close <= high) in " +
                                     ctx);
        parsed.push_back(std::move(r));
    }
    OhlcSeries series;
    series.name = path;
    int warnings = 0;
    for (std::size_t i = 1; i < parsed.size(); ++i)
        if (parsed[i].date < parsed[i - 1].date) ++warnings;
    if (warnings > 0)
        std::stable_sort(parsed.begin(), parsed.end(),
                         [](const Row& a, const Row& b) { return a.date < b.date; });
    series.sort_warnings = warnings;
    for (std::size_t i = 1; i < parsed.size(); ++i)
        if (parsed[i].date == parsed[i - 1].date)
            throw std::runtime_error("duplicate date " + parsed[i].date + " in " + path);
    for (auto& r : parsed) {
        series.dates.push_back(std::move(r.date));
        series.open.push_back(r.o);
        series.high.push_back(r.h);
        series.low.push_back(r.l);
        series.close.push_back(r.c);
    }
    return series;
}

std::vector<double> rogers_satchell(const OhlcSeries& series) {
    std::vector<double> out(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        const double o = series.open[t], h = series.high[t], l = series.low[t],
                     c = series.close[t];
        if (!(o > 0.0 && h > 0.0 && l > 0.0 && c > 0.0))
            throw std::invalid_argument("rogers_satchell: nonpositive price");
        out[t] = std::log(h / o) * std::log(h / c) + std::log(l / o) * std::log(l / c);
    }
    return out;
}

Eigen::MatrixXd market_volatility(const Eigen::MatrixXd& returns) {
    const int N = static_cast<int>(returns.rows());
    const long T = returns.cols();
    if (N < 2) throw std::invalid_argument("market_volatility: needs at least 2 series");
    Eigen::MatrixXd sigma(N, T);
    for (long t = 0; t < T; ++t) {
        double total = returns.col(t).squaredNorm();
        for (int i = 0; i < N; ++i) {
            const double loo = (total - returns(i, t) * returns(i, t)) / (N - 1);
            sigma(i, t) = std::sqrt(std::max(loo, 1e-300));
        }
    }
    return sigma;
}

void standardize_series(std::vector<double>& returns, std::vector<double>* vol2) {
    const std::size_t T = returns.size();
    if (T < 2) throw std::invalid_argument("standardize_series: series too short");
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(T);
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    var /= static_cast<double>(T);
    if (!(var > 0.0)) throw std::invalid_argument("standardize_series: zero-variance series");
    const double sd = std::sqrt(var);
    for (double& r : returns) r = (r - mean) / sd;
    if (vol2) {
        double vmean = 0.0;
        for (double v : *vol2) vmean += v;
        vmean /= static_cast<double>(vol2->size());
        if (!(vmean > 0.0)) throw std::invalid_argument("standardize_series: zero mean vol2");
        for (double& v : *vol2) v /= vmean;
    }
}

Panel build_panel(const std::vector<OhlcSeries>& series, bool remove_market,
                  double max_missing_frac) {
    if (series.empty()) throw std::invalid_argument("build_panel: no series");
    // intersection of dates
    std::map<std::string, int> counts;
    for (const auto& s : series)
        for (const auto& d : s.dates) ++counts[d];
    std::vector<std::string> common;
    for (const auto& [d, c] : counts)
        if (c == static_cast<int>(series.size())) common.push_back(d);
    Panel panel;
    if (common.size() < 3) {
        // keep every series aligned on its own axis only if there is one series
        if (series.size() == 1) {
            common = series[0].dates;
        } else {
            throw std::runtime_error("build_panel: date intersection too small");
        }
    }
    std::set<std::string> keep(common.begin(), common.end());

    std::vector<const OhlcSeries*> used;
    for (const auto& s : series) {
        const double missing =
            1.0 - static_cast<double>(keep.size()) / static_cast<double>(s.dates.size());
        if (missing > max_missing_frac && series.size() > 1) {
            panel.dropped.push_back(s.name);
            continue;
        }
        used.push_back(&s);
    }
    if (used.empty()) throw std::runtime_error("build_panel: all series dropped");

    const long Tc = static_cast<long>(common.size());
    const int N = static_cast<int>(used.size());
    // close prices and RS variance on the common axis
    Eigen::MatrixXd rets(N, Tc - 1);
    Eigen::MatrixXd rs(N, Tc - 1);
    for (int i = 0; i < N; ++i) {
        const OhlcSeries& s = *used[i];
        std::map<std::string, std::size_t> pos;
        for (std::size_t t = 0; t < s.dates.size(); ++t) pos[s.dates[t]] = t;
        const std::vector<double> rsv = rogers_satchell(s);
        double prev_close = s.close[pos.at(common[0])];
        for (long t = 1; t < Tc; ++t) {
            const std::size_t at = pos.at(common[t]);
            rets(i, t - 1) = std::log(s.close[at]) - std::log(prev_close);
            rs(i, t - 1) = rsv[at];
            prev_close = s.close[at];
        }
    }
    if (remove_market && N >= 2) {
        const Eigen::MatrixXd sigma = market_volatility(rets);
        rets.array() /= sigma.array();
        rs.array() /= (sigma.array() * sigma.array());
    }
    panel.dates.assign(common.begin(), common.end());
    for (int i = 0; i < N; ++i) {
        panel.names.push_back(used[i]->name);
        std::vector<double> r(rets.row(i).data(), rets.row(i).data() + rets.cols());
        // Eigen row is not contiguous; copy element-wise instead
        for (long t = 0; t < rets.cols(); ++t) r[t] = rets(i, t);
        std::vector<double> v(rs.cols());
        for (long t = 0; t < rs.cols(); ++t) v[t] = rs(i, t);
        standardize_series(r, &v);
        panel.returns.push_back(std::move(r));
        panel.vol2.push_back(std::move(v));
    }
    return panel;
}

std::vector<Split> make_splits(int n_series, long T, SplitMode mode, int n_samplings,
                               std::uint64_t seed) {
    if (n_samplings <= 0) throw std::invalid_argument("make_splits: n_samplings must be positive");
    std::vector<Split> splits;
    splits.reserve(n_samplings);
    Rng rng(seed);
    if (mode == SplitMode::RandomHalves) {
        if (n_series < 2)
            throw std::invalid_argument("make_splits: random-halves needs at least 2 series");
        std::vector<int> idx(n_series);
        for (int s = 0; s < n_samplings; ++s) {
            std::iota(idx.begin(), idx.end(), 0);
            rng.shuffle(idx);
            Split sp;
            const int half = n_series / 2;
            sp.is_series.assign(idx.begin(), idx.begin() + half);
            sp.oos_series.assign(idx.begin() + half, idx.end());
            std::sort(sp.is_series.begin(), sp.is_series.end());
            std::sort(sp.oos_series.begin(), sp.oos_series.end());
            splits.push_back(std::move(sp));
        }
    } else {
        const long half = T / 2;
        if (half < 2) throw std::invalid_argument("make_splits: too few dates for block split");
        for (int s = 0; s < n_samplings; ++s) {
            Split sp;
            sp.is_begin = static_cast<long>(rng.below(static_cast<std::uint64_t>(T - half + 1)));
            sp.is_end = sp.is_begin + half;
            splits.push_back(std::move(sp));
        }
    }
    return splits;
}

}  // namespace qarch

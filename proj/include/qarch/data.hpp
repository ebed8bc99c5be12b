// OHLC ingestion, Rogers-Satchell volatility, market-wide volatility
// removal, standardization, and the IS/OOS split plans.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace qarch {

struct OhlcSeries {
    std::string name;
    std::vector<std::string> dates;  // strictly increasing after load
    std::vector<double> open, high, low, close;
    int sort_warnings = 0;  // rows that arrived out of order

    std::size_t size() const { return dates.size(); }
};

// header: date,open,high,low,close. Rows are validated (positive prices,
// low <= min(open, close) <= max(open, close) <= high, no duplicate dates)
// and sorted by date; ordering violations name the offending row.
OhlcSeries load_ohlc_csv(const std::string& path);

// sigma^2_t = ln(H/O) ln(H/C) + ln(L/O) ln(L/C)
std::vector<double> rogers_satchell(const OhlcSeries& series);

// leave-one-out market volatility: Sigma_{i,t} = sqrt(1/(N-1) sum_{j != i} r_{j,t}^2)
Eigen::MatrixXd market_volatility(const Eigen::MatrixXd& returns);  // N x T in, N x T out

struct Panel {
    std::vector<std::string> dates;             // common date axis (returns start at dates[1])
    std::vector<std::string> names;
    std::vector<std::vector<double>> returns;   // standardized, per series
    std::vector<std::vector<double>> vol2;      // standardized RS variance, per series
    std::vector<std::string> dropped;           // series removed by the missing-data rule
};

// Aligns series on the intersection of dates (series missing > 2% of the
// intersection are dropped), computes close-to-close returns and RS
// variance, divides by leave-one-out market volatility when N >= 2, then
// centers/standardizes returns and rescales vol2 so <vol2> = 1 per series.
Panel build_panel(const std::vector<OhlcSeries>& series, bool remove_market = true,
                  double max_missing_frac = 0.02);

// standardization core for pre-built return/vol matrices (simulated panels)
void standardize_series(std::vector<double>& returns, std::vector<double>* vol2);

enum class SplitMode { RandomHalves, BlockDates };

struct Split {
    std::vector<int> is_series;   // RandomHalves: calibration series indices
    std::vector<int> oos_series;
    long is_begin = 0;            // BlockDates: contiguous in-sample window
    long is_end = 0;              // half-open
};

std::vector<Split> make_splits(int n_series, long T, SplitMode mode, int n_samplings,
                               std::uint64_t seed);

}  // namespace qarch

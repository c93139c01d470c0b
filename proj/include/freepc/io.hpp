#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "freqdomain.hpp"
#include "frf.hpp"
#include "simloop.hpp"
#include "time_series.hpp"

// CSV import/export. Numbers use 17 significant digits so every value round-trips exactly.
namespace freepc::io {

class ParseError : public InvalidInput {
public:
    ParseError(std::size_t line, const std::string& what)
        : InvalidInput("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_number(const std::string& field, std::size_t line) {
    std::size_t b = field.find_first_not_of(" \t\r");
    std::size_t e = field.find_last_not_of(" \t\r");
    if (b == std::string::npos) {
        throw ParseError(line, "empty field");
    }
    const char* first = field.data() + b;
    const char* last  = field.data() + e + 1;
    if (*first == '+') ++first;
    double     v   = 0.0;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw ParseError(line, "not a number: '" + field + "'");
    }
    return v;
}

inline std::vector<std::string> split_fields(const std::string& row) {
    std::vector<std::string> out;
    std::string              cur;
    std::istringstream       ss(row);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!row.empty() && row.back() == ',') out.emplace_back();
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t\r");
        const auto e = f.find_last_not_of(" \t\r");
        f            = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
    }
    return out;
}

struct CsvTable {
    std::vector<std::string>         header;
    std::vector<std::vector<double>> rows;
};

/// Header line plus numeric rows; blank lines are skipped, ragged rows rejected.
inline CsvTable read_table(std::istream& in) {
    CsvTable    t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (t.header.empty()) {
            t.header = split_fields(line);
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != t.header.size()) {
            throw ParseError(lineno, "expected " + std::to_string(t.header.size()) + " fields, found " +
                                         std::to_string(fields.size()));
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(parse_number(f, lineno));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) {
        throw ParseError(std::max<std::size_t>(lineno, 1), "missing header");
    }
    if (t.rows.empty()) {
        throw ParseError(lineno, "no data rows");
    }
    return t;
}

inline void write_row(std::ostream& out, const std::vector<double>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << format_number(row[i]);
    }
    out << '\n';
}

inline void write_header(std::ostream& out, const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out << ',';
        out << names[i];
    }
    out << '\n';
}

// ---- TimeSeries: one row per sample, one column per channel.

inline void write_time_series(std::ostream& out, const TimeSeries& x) {
    write_header(out, x.names());
    for (std::size_t k = 0; k < x.length(); ++k) {
        const RealVector s = x.sample(k);
        write_row(out, std::vector<double>(s.data(), s.data() + s.size()));
    }
}

inline TimeSeries read_time_series(std::istream& in) {
    const auto t = read_table(in);
    RealMatrix m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.rows[r][c];
        }
    }
    if (!all_finite(m)) {
        throw ParseError(0, "time series contains non-finite values");
    }
    return TimeSeries(std::move(m), t.header);
}

// ---- FreqData: frequency, then (re, im) per input channel, then per output channel.

inline void write_freq_data(std::ostream& out, const freqdomain::FreqData& d) {
    std::vector<std::string> names{"frequency"};
    for (std::size_t c = 0; c < d.nu(); ++c) {
        names.push_back("u" + std::to_string(c) + "_re");
        names.push_back("u" + std::to_string(c) + "_im");
    }
    for (std::size_t c = 0; c < d.ny(); ++c) {
        names.push_back("y" + std::to_string(c) + "_re");
        names.push_back("y" + std::to_string(c) + "_im");
    }
    write_header(out, names);
    for (std::size_t m = 0; m < d.size(); ++m) {
        std::vector<double> row{d.input.frequencies()[m]};
        for (const auto* s : {&d.input, &d.output}) {
            const ComplexVector v = s->value(m);
            for (Eigen::Index c = 0; c < v.size(); ++c) {
                row.push_back(v(c).real());
                row.push_back(v(c).imag());
            }
        }
        write_row(out, row);
    }
}

inline freqdomain::FreqData read_freq_data(std::istream& in) {
    const auto  t   = read_table(in);
    std::size_t n_u = 0, n_y = 0;
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        const auto& h = t.header[c];
        if (h.empty() || (h[0] != 'u' && h[0] != 'y')) {
            throw ParseError(1, "unexpected column '" + h + "'");
        }
        (h[0] == 'u' ? n_u : n_y) += 1;
    }
    if (t.header.empty() || t.header[0] != "frequency" || n_u % 2 || n_y % 2 || n_u == 0 || n_y == 0) {
        throw ParseError(1, "header must be frequency, u*_re, u*_im, ..., y*_re, y*_im, ...");
    }
    n_u /= 2;
    n_y /= 2;
    const auto          M = static_cast<Eigen::Index>(t.rows.size());
    std::vector<double> freqs;
    ComplexMatrix       U(M, static_cast<Eigen::Index>(n_u)), Y(M, static_cast<Eigen::Index>(n_y));
    for (Eigen::Index m = 0; m < M; ++m) {
        const auto& row = t.rows[static_cast<std::size_t>(m)];
        freqs.push_back(row[0]);
        for (std::size_t c = 0; c < n_u; ++c) {
            U(m, static_cast<Eigen::Index>(c)) = {row[1 + 2 * c], row[2 + 2 * c]};
        }
        for (std::size_t c = 0; c < n_y; ++c) {
            Y(m, static_cast<Eigen::Index>(c)) = {row[1 + 2 * n_u + 2 * c], row[2 + 2 * n_u + 2 * c]};
        }
    }
    return freqdomain::FreqData(SpectrumSamples(freqs, std::move(U)), SpectrumSamples(freqs, std::move(Y)));
}

/// One spectrum from "frequency, <name>_re, <name>_im, ..." columns. For input/output files only the
/// u columns are kept, which is what a persistency check looks at.
inline SpectrumSamples read_spectrum(std::istream& in) {
    const auto t = read_table(in);
    if (t.header[0] != "frequency" || t.header.size() < 3 || t.header.size() % 2 == 0) {
        throw ParseError(1, "header must be frequency followed by _re/_im column pairs");
    }
    const bool               has_u = std::any_of(t.header.begin() + 1, t.header.end(),
                                                 [](const std::string& h) { return !h.empty() && h[0] == 'u'; });
    std::vector<std::size_t> cols;
    for (std::size_t c = 1; c < t.header.size(); c += 2) {
        if (has_u && (t.header[c].empty() || t.header[c][0] != 'u')) continue;
        cols.push_back(c);
    }
    std::vector<double> freqs;
    ComplexMatrix       V(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        freqs.push_back(t.rows[r][0]);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            V(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = {t.rows[r][cols[k]], t.rows[r][cols[k] + 1]};
        }
    }
    return SpectrumSamples(std::move(freqs), std::move(V));
}

// ---- FrfEstimate: frequency, re, im, variance, radius_99.

inline void write_frf(std::ostream& out, const frf::FrfEstimate& e) {
    write_header(out, {"frequency", "re", "im", "variance", "radius_99"});
    for (std::size_t m = 0; m < e.frequencies.size(); ++m) {
        const auto i = static_cast<Eigen::Index>(m);
        write_row(out, {e.frequencies[m], e.g_hat(i).real(), e.g_hat(i).imag(), e.variance(i),
                        e.confidence_radius_99(i)});
    }
}

inline frf::FrfEstimate read_frf(std::istream& in) {
    const auto t = read_table(in);
    if (t.header != std::vector<std::string>{"frequency", "re", "im", "variance", "radius_99"}) {
        throw ParseError(1, "header must be frequency,re,im,variance,radius_99");
    }
    frf::FrfEstimate e;
    const auto       M = static_cast<Eigen::Index>(t.rows.size());
    e.g_hat.resize(M);
    e.variance.resize(M);
    e.confidence_radius_99.resize(M);
    for (Eigen::Index m = 0; m < M; ++m) {
        const auto& row = t.rows[static_cast<std::size_t>(m)];
        e.frequencies.push_back(row[0]);
        e.g_hat(m)                = {row[1], row[2]};
        e.variance(m)             = row[3];
        e.confidence_radius_99(m) = row[4];
        if (row[3] < 0.0) {
            throw ParseError(static_cast<std::size_t>(m) + 2, "negative variance");
        }
    }
    return e;
}

// ---- Receding-horizon trajectory: step, inputs, outputs, status (0 = optimal).

inline void write_rhc(std::ostream& out, const simloop::RhcResult& r) {
    std::vector<std::string> names{"step"};
    for (std::size_t c = 0; c < r.u.channels(); ++c) names.push_back("u" + std::to_string(c));
    for (std::size_t c = 0; c < r.y.channels(); ++c) names.push_back("y" + std::to_string(c));
    names.push_back("status");
    write_header(out, names);
    for (std::size_t k = 0; k < r.u.length(); ++k) {
        std::vector<double> row{static_cast<double>(k)};
        for (std::size_t c = 0; c < r.u.channels(); ++c) row.push_back(r.u(k, c));
        for (std::size_t c = 0; c < r.y.channels(); ++c) row.push_back(r.y(k, c));
        row.push_back(static_cast<double>(static_cast<int>(r.per_step_status[k])));
        write_row(out, row);
    }
}

// ---- Monte Carlo table: P, mean_J, var_J, failures, runs.

inline void write_monte_carlo(std::ostream& out, const std::vector<simloop::MonteCarloRow>& rows) {
    write_header(out, {"P", "mean_J", "var_J", "failures", "runs"});
    for (const auto& r : rows) {
        write_row(out, {static_cast<double>(r.periods), r.mean_J, r.var_J, static_cast<double>(r.failures),
                        static_cast<double>(r.runs)});
    }
}

inline std::vector<simloop::MonteCarloRow> read_monte_carlo(std::istream& in) {
    const auto t = read_table(in);
    if (t.header != std::vector<std::string>{"P", "mean_J", "var_J", "failures", "runs"}) {
        throw ParseError(1, "header must be P,mean_J,var_J,failures,runs");
    }
    std::vector<simloop::MonteCarloRow> rows;
    for (const auto& r : t.rows) {
        rows.push_back({static_cast<std::size_t>(r[0]), static_cast<std::size_t>(r[4]),
                        static_cast<std::size_t>(r[3]), r[1], r[2]});
    }
    return rows;
}

// ---- File helpers.

template <class Fn>
void save(const std::string& path, Fn&& writer) {
    std::ofstream out(path);
    if (!out) {
        throw InvalidInput("cannot open '" + path + "' for writing");
    }
    writer(out);
}

template <class Fn>
auto load(const std::string& path, Fn&& reader) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open '" + path + "'");
    }
    return reader(in);
}

}  // namespace freepc::io

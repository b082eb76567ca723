/**
 * Right-censored survival outcomes paired with a discretely observed
 * functional covariate.
 *
 * Files are UTF-8 CSV with a header row:
 *   subjects:   id,time,status[,z1,...,zd]   (status 1 = event, 0 = censored)
 *   functional: id,s,x                       (long format, any row order)
 *
 * Grids may differ between subjects. Ids are opaque strings.
 */
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "funaft/errors.hpp"

namespace funaft {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double length() const { return hi - lo; }
    bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

struct Subject {
    std::string id;
    double time = 1.0;
    bool event = true;
    std::vector<double> scalars;
    std::vector<double> grid;
    std::vector<double> values;

    std::size_t num_points() const { return grid.size(); }
};

// Affine map from the original functional domain onto [0,1]: s01 = (s - offset) / scale.
struct DomainMap {
    double offset = 0.0;
    double scale = 1.0;

    double to_unit(double s) const { return (s - offset) / scale; }
    double to_original(double s01) const { return offset + scale * s01; }
    bool is_identity() const { return offset == 0.0 && scale == 1.0; }
};

struct SurvivalDataset {
    std::vector<Subject> subjects;
    std::vector<std::string> scalar_names;
    Interval domain;
    DomainMap domain_map;  // composition of every normalization applied so far

    std::size_t size() const { return subjects.size(); }
    std::size_t num_scalars() const { return scalar_names.size(); }
    std::size_t num_events() const {
        return static_cast<std::size_t>(std::count_if(subjects.begin(), subjects.end(),
                                                      [](const Subject& s) { return s.event; }));
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim whitespace and a trailing CR from Windows line endings
        auto b = field.find_first_not_of(" \t\r");
        auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& text, const std::string& where) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw ValidationError(where + ": cannot parse '" + text + "' as a number");
    }
    return v;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string where(const std::string& path, std::size_t line) {
    return path + ":" + std::to_string(line);
}

}  // namespace detail

/// Throws ValidationError describing the first broken invariant.
inline void validate_subject(const Subject& s) {
    if (!(s.time > 0.0) || !std::isfinite(s.time)) {
        throw ValidationError("subject '" + s.id + "': time must be positive and finite");
    }
    if (s.grid.size() != s.values.size()) {
        throw ValidationError("subject '" + s.id + "': grid and values differ in length");
    }
    if (s.grid.size() < 2) {
        throw ValidationError("subject '" + s.id + "': needs at least 2 functional observations");
    }
    for (std::size_t j = 1; j < s.grid.size(); ++j) {
        if (!(s.grid[j] > s.grid[j - 1])) {
            throw ValidationError("subject '" + s.id + "': grid is not strictly increasing at s = " +
                                  detail::format_double(s.grid[j]));
        }
    }
    for (double v : s.values) {
        if (!std::isfinite(v)) throw ValidationError("subject '" + s.id + "': non-finite functional value");
    }
    for (double z : s.scalars) {
        if (!std::isfinite(z)) throw ValidationError("subject '" + s.id + "': non-finite scalar covariate");
    }
}

inline Interval grid_hull(const std::vector<Subject>& subjects) {
    Interval d{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& s : subjects) {
        d.lo = std::min(d.lo, s.grid.front());
        d.hi = std::max(d.hi, s.grid.back());
    }
    return d;
}

/// Checks dataset-level invariants and recomputes the domain from the grids.
inline SurvivalDataset make_dataset(std::vector<Subject> subjects, std::vector<std::string> scalar_names,
                                    bool require_event = true) {
    if (subjects.empty()) throw ValidationError("dataset has no subjects");
    for (const auto& s : subjects) {
        validate_subject(s);
        if (s.scalars.size() != scalar_names.size()) {
            throw ValidationError("subject '" + s.id + "': expected " + std::to_string(scalar_names.size()) +
                                  " scalar covariates, found " + std::to_string(s.scalars.size()));
        }
    }
    SurvivalDataset data;
    data.domain = grid_hull(subjects);
    data.subjects = std::move(subjects);
    data.scalar_names = std::move(scalar_names);
    if (require_event && data.num_events() == 0) throw ValidationError("all observations censored");
    return data;
}

/// Reads the subjects and functional CSV pair. Functional rows for each id are
/// sorted by s; ids present in the functional file but not in the subjects file
/// (and vice versa) are load errors. Set require_event = false for prediction inputs.
inline SurvivalDataset load_dataset(const std::string& subjects_path, const std::string& functional_path,
                                    bool require_event = true) {
    std::ifstream sin(subjects_path);
    if (!sin) throw LoadError("cannot open subjects file '" + subjects_path + "'");
    std::string line;
    if (!std::getline(sin, line)) throw LoadError(subjects_path + ": missing header row");
    auto header = detail::split_csv_line(line);
    if (header.size() < 3 || header[0] != "id" || header[1] != "time" || header[2] != "status") {
        throw ValidationError(detail::where(subjects_path, 1) + ": header must start with id,time,status");
    }
    std::vector<std::string> scalar_names(header.begin() + 3, header.end());

    std::vector<Subject> subjects;
    std::unordered_map<std::string, std::size_t> index;
    std::size_t lineno = 1;
    while (std::getline(sin, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto f = detail::split_csv_line(line);
        const auto at = detail::where(subjects_path, lineno);
        if (f.size() != header.size()) {
            throw ValidationError(at + ": expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(f.size()));
        }
        Subject s;
        s.id = f[0];
        s.time = detail::parse_double(f[1], at);
        if (!(s.time > 0.0)) throw ValidationError(at + ": subject '" + s.id + "' has non-positive time");
        const double status = detail::parse_double(f[2], at);
        if (status != 0.0 && status != 1.0) throw ValidationError(at + ": status must be 0 or 1");
        s.event = status == 1.0;
        for (std::size_t c = 3; c < f.size(); ++c) s.scalars.push_back(detail::parse_double(f[c], at));
        if (!index.emplace(s.id, subjects.size()).second) {
            throw ValidationError(at + ": duplicate subject id '" + s.id + "'");
        }
        subjects.push_back(std::move(s));
    }

    std::ifstream fin(functional_path);
    if (!fin) throw LoadError("cannot open functional file '" + functional_path + "'");
    if (!std::getline(fin, line)) throw LoadError(functional_path + ": missing header row");
    auto fheader = detail::split_csv_line(line);
    if (fheader.size() != 3 || fheader[0] != "id" || fheader[1] != "s" || fheader[2] != "x") {
        throw ValidationError(detail::where(functional_path, 1) + ": header must be id,s,x");
    }
    std::vector<std::vector<std::pair<double, double>>> rows(subjects.size());
    lineno = 1;
    while (std::getline(fin, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto f = detail::split_csv_line(line);
        const auto at = detail::where(functional_path, lineno);
        if (f.size() != 3) throw ValidationError(at + ": expected 3 fields");
        auto it = index.find(f[0]);
        if (it == index.end()) throw LoadError(at + ": id '" + f[0] + "' not present in subjects file");
        rows[it->second].emplace_back(detail::parse_double(f[1], at), detail::parse_double(f[2], at));
    }

    for (std::size_t i = 0; i < subjects.size(); ++i) {
        auto& r = rows[i];
        if (r.empty()) throw LoadError("subject '" + subjects[i].id + "' has no functional observations");
        std::stable_sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t j = 1; j < r.size(); ++j) {
            if (r[j].first == r[j - 1].first) {
                throw ValidationError("subject '" + subjects[i].id + "': duplicate s = " +
                                      detail::format_double(r[j].first));
            }
        }
        for (const auto& [s, x] : r) {
            subjects[i].grid.push_back(s);
            subjects[i].values.push_back(x);
        }
    }
    return make_dataset(std::move(subjects), std::move(scalar_names), require_event);
}

inline void write_dataset(const SurvivalDataset& data, const std::string& subjects_path,
                          const std::string& functional_path) {
    std::ofstream sout(subjects_path);
    if (!sout) throw LoadError("cannot write '" + subjects_path + "'");
    sout << "id,time,status";
    for (const auto& n : data.scalar_names) sout << ',' << n;
    sout << '\n';
    for (const auto& s : data.subjects) {
        sout << s.id << ',' << detail::format_double(s.time) << ',' << (s.event ? 1 : 0);
        for (double z : s.scalars) sout << ',' << detail::format_double(z);
        sout << '\n';
    }
    std::ofstream fout(functional_path);
    if (!fout) throw LoadError("cannot write '" + functional_path + "'");
    fout << "id,s,x\n";
    for (const auto& s : data.subjects) {
        for (std::size_t j = 0; j < s.grid.size(); ++j) {
            fout << s.id << ',' << detail::format_double(s.grid[j]) << ',' << detail::format_double(s.values[j])
                 << '\n';
        }
    }
}

/// Maps every grid affinely onto [0,1] using the dataset domain. Idempotent.
inline SurvivalDataset normalize_domain(const SurvivalDataset& data) {
    if (!(data.domain.length() > 0.0)) throw ValidationError("functional domain has zero length");
    if (data.domain.lo == 0.0 && data.domain.hi == 1.0) return data;
    const DomainMap step{data.domain.lo, data.domain.length()};
    SurvivalDataset out = data;
    for (auto& s : out.subjects) {
        for (auto& v : s.grid) v = step.to_unit(v);
        // the affine map can round the endpoints by an ulp
        s.grid.front() = std::max(s.grid.front(), 0.0);
        s.grid.back() = std::min(s.grid.back(), 1.0);
    }
    out.domain = {0.0, 1.0};
    out.domain_map = {data.domain_map.to_original(step.offset), data.domain_map.scale * step.scale};
    return out;
}

/// Maps grids onto [0,1] with a map frozen from a training set.
inline SurvivalDataset apply_domain_map(const SurvivalDataset& data, const DomainMap& map) {
    SurvivalDataset out = data;
    for (auto& s : out.subjects) {
        for (auto& v : s.grid) v = map.to_unit(v);
    }
    out.domain = {map.to_unit(data.domain.lo), map.to_unit(data.domain.hi)};
    out.domain_map = map;
    return out;
}

/// Pointwise mean curve stored on a reference grid (linear interpolation in between).
struct MeanCurve {
    std::vector<double> grid;
    std::vector<double> values;

    bool empty() const { return grid.empty(); }

    double operator()(double s) const {
        if (grid.empty()) return 0.0;
        if (s <= grid.front()) return values.front();
        if (s >= grid.back()) return values.back();
        auto it = std::upper_bound(grid.begin(), grid.end(), s);
        const std::size_t j = static_cast<std::size_t>(it - grid.begin());
        const double w = (s - grid[j - 1]) / (grid[j] - grid[j - 1]);
        return (1.0 - w) * values[j - 1] + w * values[j];
    }
};

inline double interpolate_curve(const Subject& subj, double s) {
    const auto& g = subj.grid;
    if (s <= g.front()) return subj.values.front();
    if (s >= g.back()) return subj.values.back();
    auto it = std::upper_bound(g.begin(), g.end(), s);
    const std::size_t j = static_cast<std::size_t>(it - g.begin());
    const double w = (s - g[j - 1]) / (g[j] - g[j - 1]);
    return (1.0 - w) * subj.values[j - 1] + w * subj.values[j];
}

inline bool shares_grid(const SurvivalDataset& data) {
    const auto& g0 = data.subjects.front().grid;
    return std::all_of(data.subjects.begin(), data.subjects.end(), [&](const Subject& s) { return s.grid == g0; });
}

/// Mean of X_i(s) across subjects. Uses the shared grid when every subject has
/// the same one; otherwise curves are linearly interpolated onto an even grid.
inline MeanCurve pointwise_mean(const SurvivalDataset& data, std::size_t ref_points = 201) {
    MeanCurve m;
    if (shares_grid(data)) {
        m.grid = data.subjects.front().grid;
        m.values.assign(m.grid.size(), 0.0);
        for (const auto& s : data.subjects) {
            for (std::size_t j = 0; j < m.grid.size(); ++j) m.values[j] += s.values[j];
        }
    } else {
        m.grid.resize(ref_points);
        for (std::size_t j = 0; j < ref_points; ++j) {
            m.grid[j] = data.domain.lo + data.domain.length() * static_cast<double>(j) / (ref_points - 1.0);
        }
        m.values.assign(ref_points, 0.0);
        for (const auto& s : data.subjects) {
            for (std::size_t j = 0; j < ref_points; ++j) m.values[j] += interpolate_curve(s, m.grid[j]);
        }
    }
    for (auto& v : m.values) v /= static_cast<double>(data.size());
    return m;
}

inline SurvivalDataset subtract_mean(const SurvivalDataset& data, const MeanCurve& mean) {
    SurvivalDataset out = data;
    if (mean.empty()) return out;
    for (auto& s : out.subjects) {
        for (std::size_t j = 0; j < s.grid.size(); ++j) s.values[j] -= mean(s.grid[j]);
    }
    return out;
}

}  // namespace funaft

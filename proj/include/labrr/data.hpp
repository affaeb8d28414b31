#pragma once

// Dataset ingestion, [-1, 1] normalization, seeded splitting and the
// synthetic regression benchmarks.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "labrr/numerics.hpp"

namespace labrr {

/// Affine map of one column from [min, max] onto [-1, 1]. A constant column
/// (max == min) is flagged degenerate and maps to 0.
struct ColumnRange {
    double min = 0.0;
    double max = 0.0;
    bool degenerate = false;

    static ColumnRange fit(const Eigen::Ref<const RealVector> &values) {
        ColumnRange r;
        r.min = values.minCoeff();
        r.max = values.maxCoeff();
        r.degenerate = !(r.max > r.min);
        return r;
    }

    [[nodiscard]] double forward(double v) const { return degenerate ? 0.0 : 2.0 * (v - min) / (max - min) - 1.0; }
    [[nodiscard]] double inverse(double v) const { return degenerate ? min : (v + 1.0) * 0.5 * (max - min) + min; }

    friend bool operator==(const ColumnRange &, const ColumnRange &) = default;
};

struct NormMeta {
    std::vector<ColumnRange> features;
    ColumnRange label;

    [[nodiscard]] RealMatrix normalize_features(const RealMatrix &x) const {
        require_same(x.cols(), static_cast<Eigen::Index>(features.size()), "normalize: feature count");
        RealMatrix out(x.rows(), x.cols());
        for (Eigen::Index m = 0; m < x.cols(); ++m) {
            const auto &r = features[static_cast<std::size_t>(m)];
            for (Eigen::Index i = 0; i < x.rows(); ++i) { out(i, m) = r.forward(x(i, m)); }
        }
        return out;
    }

    [[nodiscard]] RealVector normalize_labels(const RealVector &y) const { return y.unaryExpr([this](double v) { return label.forward(v); }); }
    [[nodiscard]] RealVector denormalize_labels(const RealVector &y) const { return y.unaryExpr([this](double v) { return label.inverse(v); }); }

    [[nodiscard]] RealMatrix denormalize_features(const RealMatrix &x) const {
        require_same(x.cols(), static_cast<Eigen::Index>(features.size()), "denormalize: feature count");
        RealMatrix out(x.rows(), x.cols());
        for (Eigen::Index m = 0; m < x.cols(); ++m) {
            const auto &r = features[static_cast<std::size_t>(m)];
            for (Eigen::Index i = 0; i < x.rows(); ++i) { out(i, m) = r.inverse(x(i, m)); }
        }
        return out;
    }

    /// Identity map for data that is already in normalized units.
    static NormMeta identity(Eigen::Index dim) {
        NormMeta m;
        m.features.assign(static_cast<std::size_t>(dim), ColumnRange{-1.0, 1.0, false});
        m.label = ColumnRange{-1.0, 1.0, false};
        return m;
    }

    friend bool operator==(const NormMeta &, const NormMeta &) = default;
};

struct Dataset {
    RealMatrix x;
    RealVector y;
    /// Set once the dataset has been normalized; records the original-unit ranges.
    std::optional<NormMeta> norm_meta;
    std::string name;

    [[nodiscard]] Eigen::Index size() const { return x.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return x.cols(); }
    [[nodiscard]] bool normalized() const { return norm_meta.has_value(); }

    [[nodiscard]] Dataset subset(const std::vector<Eigen::Index> &rows) const {
        Dataset out;
        out.x.resize(static_cast<Eigen::Index>(rows.size()), dim());
        out.y.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.x.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
            out.y(static_cast<Eigen::Index>(r)) = y(rows[r]);
        }
        out.norm_meta = norm_meta;
        out.name = name;
        return out;
    }
};

/// Maps every feature column and the label onto [-1, 1] using this dataset's own ranges.
inline Dataset normalize(const Dataset &raw) {
    if (raw.size() == 0) { throw EmptyDataset("normalize: empty dataset"); }
    NormMeta meta;
    meta.features.reserve(static_cast<std::size_t>(raw.dim()));
    for (Eigen::Index m = 0; m < raw.dim(); ++m) { meta.features.push_back(ColumnRange::fit(raw.x.col(m))); }
    meta.label = ColumnRange::fit(raw.y);

    Dataset out;
    out.x = meta.normalize_features(raw.x);
    out.y = meta.normalize_labels(raw.y);
    out.norm_meta = std::move(meta);
    out.name = raw.name;
    return out;
}

/// Inverse of normalize: returns the dataset in original units without metadata.
inline Dataset denormalize(const Dataset &ds) {
    if (!ds.norm_meta) { return ds; }
    Dataset out;
    out.x = ds.norm_meta->denormalize_features(ds.x);
    out.y = ds.norm_meta->denormalize_labels(ds.y);
    out.name = ds.name;
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) { return {}; }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) { break; }
        start = comma + 1;
    }
    return cells;
}

inline std::optional<double> parse_real(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') { cell.remove_prefix(1); }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) { return std::nullopt; }
    return v;
}

inline std::string format_real(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

/// Parses a rectangular numeric table; the first line is skipped when any of
/// its cells is non-numeric. Rows and columns in errors are 1-based.
inline RealMatrix read_table(std::istream &in) {
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = trim(line);
        if (content.empty()) { continue; }
        const auto cells = split_cells(content);
        if (first) {
            first = false;
            const bool header = std::any_of(cells.begin(), cells.end(), [](std::string_view c) { return !parse_real(c); });
            if (header) {
                cols = cells.size();
                continue;
            }
        }
        if (cols == 0) { cols = cells.size(); }
        if (cells.size() != cols) {
            throw ParseError(line_no, std::min(cells.size(), cols) + 1,
                             "expected " + std::to_string(cols) + " columns, found " + std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto v = parse_real(cells[c]);
            if (!v) { throw ParseError(line_no, c + 1, "non-numeric cell '" + std::string(cells[c]) + "'"); }
            values.push_back(*v);
        }
        ++rows;
    }
    if (rows == 0) { throw EmptyDataset("no data rows"); }
    RealMatrix table(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
        }
    }
    return table;
}

inline RealMatrix read_table_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) { throw IoError("cannot open '" + path + "'"); }
    return read_table(in);
}

inline std::string stem(const std::string &path) {
    const auto slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

}  // namespace detail

/// Loads a labelled CSV: every column but the last is a feature, the last is the label.
inline Dataset load_csv(const std::string &path) {
    const RealMatrix table = detail::read_table_file(path);
    if (table.cols() < 2) { throw ParseError(1, 1, "need at least one feature column and a label column"); }
    Dataset ds;
    ds.x = table.leftCols(table.cols() - 1);
    ds.y = table.col(table.cols() - 1);
    ds.name = detail::stem(path);
    return ds;
}

/// Loads an unlabelled feature table (any column count >= 1).
inline RealMatrix load_feature_csv(const std::string &path) { return detail::read_table_file(path); }

inline void write_csv(std::ostream &out, const RealMatrix &x, const RealVector *y) {
    for (Eigen::Index m = 0; m < x.cols(); ++m) { out << (m ? "," : "") << 'x' << (m + 1); }
    if (y) { out << (x.cols() ? "," : "") << 'y'; }
    out << '\n';
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index m = 0; m < x.cols(); ++m) { out << (m ? "," : "") << detail::format_real(x(i, m)); }
        if (y) { out << (x.cols() ? "," : "") << detail::format_real((*y)(i)); }
        out << '\n';
    }
}

/// Writes the dataset in original units (denormalized when metadata is present).
inline void write_csv(const Dataset &ds, const std::string &path) {
    std::ofstream out(path);
    if (!out) { throw IoError("cannot write '" + path + "'"); }
    const Dataset raw = denormalize(ds);
    write_csv(out, raw.x, &raw.y);
    if (!out) { throw IoError("write failed for '" + path + "'"); }
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    std::uint64_t trial_index = 0;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) { throw InvalidArgument("train_fraction must be in (0, 1)"); }
    }
};

/// Seeded permutation of 0..n-1, deterministic per (seed, trial_index).
inline std::vector<Eigen::Index> split_permutation(Eigen::Index n, const SplitSpec &spec) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(spec.trial_index), static_cast<std::uint32_t>(spec.trial_index >> 32)};
    std::mt19937_64 rng(seq);
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

/// First floor(fraction * N) permuted rows train, the rest test.
inline std::pair<Dataset, Dataset> split(const Dataset &ds, const SplitSpec &spec) {
    spec.validate();
    const auto perm = split_permutation(ds.size(), spec);
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(ds.size())));
    const std::vector<Eigen::Index> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    const std::vector<Eigen::Index> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    return {ds.subset(train), ds.subset(test)};
}

// ---------------------------------------------------------------------------
// Synthetic benchmarks

enum class SynthFunction { f1, f2, f3 };

inline SynthFunction parse_synth_function(std::string_view id) {
    if (id == "f1") { return SynthFunction::f1; }
    if (id == "f2") { return SynthFunction::f2; }
    if (id == "f3") { return SynthFunction::f3; }
    throw UnknownFunction("unknown function '" + std::string(id) + "'");
}

inline std::string_view to_string(SynthFunction f) {
    switch (f) {
        case SynthFunction::f1: return "f1";
        case SynthFunction::f2: return "f2";
        case SynthFunction::f3: return "f3";
    }
    return "?";
}

struct SynthDomain {
    Eigen::Index dim;
    double lo;
    double hi;
};

inline SynthDomain synth_domain(SynthFunction f) {
    switch (f) {
        case SynthFunction::f1: return {2, -2.0, 2.0};
        case SynthFunction::f2: return {6, -1.0, 1.0};
        case SynthFunction::f3: return {4, -0.25, 0.25};
    }
    throw UnknownFunction("unknown function");
}

/// Noise-free label of a synthetic benchmark at x (x indexed from 0).
inline double synth_value(SynthFunction f, const RealVector &x) {
    require_same(x.size(), synth_domain(f).dim, "synth_value: point dim");
    using std::numbers::pi;
    switch (f) {
        case SynthFunction::f1:
            return (1.0 + std::sin(2.0 * x(0) + 3.0 * x(1))) / (3.5 + std::sin(x(0) - x(1)));
        case SynthFunction::f2:
            return 10.0 * std::sin(pi * x(0) * x(1)) + 20.0 * (x(2) - 0.5) * (x(2) - 0.5) + 5.0 * x(3) + 10.0 * x(4) +
                   0.0 * x(5);
        case SynthFunction::f3:
            return std::exp(2.0 * pi * x(0) * std::sin(x(3)) + std::sin(x(1) * x(2)));
    }
    throw UnknownFunction("unknown function");
}

struct SynthSample {
    Dataset noisy;
    RealVector clean;
};

/// Uniform inputs on the function's box; additive Gaussian label noise with
/// variance noise_ratio * Var(clean labels). Returns un-normalized data.
inline SynthSample synth_with_clean(SynthFunction f, Eigen::Index n, double noise_ratio, std::uint64_t seed) {
    if (n < 1) { throw InvalidArgument("synth: n must be >= 1"); }
    if (!(noise_ratio >= 0.0)) { throw InvalidArgument("synth: noise ratio must be >= 0"); }
    const auto dom = synth_domain(f);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(dom.lo, dom.hi);

    SynthSample s;
    s.noisy.x.resize(n, dom.dim);
    s.clean.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index m = 0; m < dom.dim; ++m) { s.noisy.x(i, m) = unif(rng); }
        s.clean(i) = synth_value(f, s.noisy.x.row(i).transpose());
    }
    s.noisy.y = s.clean;
    if (noise_ratio > 0.0) {
        const double var = (s.clean.array() - s.clean.mean()).square().mean();
        std::normal_distribution<double> noise(0.0, std::sqrt(noise_ratio * var));
        for (Eigen::Index i = 0; i < n; ++i) { s.noisy.y(i) += noise(rng); }
    }
    s.noisy.name = std::string(to_string(f));
    return s;
}

inline Dataset synth(SynthFunction f, Eigen::Index n, double noise_ratio, std::uint64_t seed) {
    return synth_with_clean(f, n, noise_ratio, seed).noisy;
}

inline Dataset synth(std::string_view function_id, Eigen::Index n, double noise_ratio, std::uint64_t seed) {
    return synth(parse_synth_function(function_id), n, noise_ratio, seed);
}

}  // namespace labrr

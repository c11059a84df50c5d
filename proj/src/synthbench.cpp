#include "shiftuq/synthbench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "shiftuq/statkit.hpp"

namespace shiftuq::synth {

bool RangeSet::contains(double v) const noexcept {
    return std::any_of(parts.begin(), parts.end(), [v](const Range& r) { return r.contains(v); });
}

double RangeSet::measure() const noexcept {
    double m = 0.0;
    for (const auto& r : parts) m += r.width();
    return m;
}

double RangeSet::min() const {
    if (parts.empty()) throw std::logic_error("empty range set");
    return std::min_element(parts.begin(), parts.end(),
                            [](const Range& a, const Range& b) { return a.lo < b.lo; })
        ->lo;
}

double RangeSet::max() const {
    if (parts.empty()) throw std::logic_error("empty range set");
    return std::max_element(parts.begin(), parts.end(),
                            [](const Range& a, const Range& b) { return a.hi < b.hi; })
        ->hi;
}

std::string to_string(ShiftKind kind) {
    switch (kind) {
        case ShiftKind::None: return "none";
        case ShiftKind::Tails: return "tails";
        case ShiftKind::Gap: return "gap";
        case ShiftKind::Intensity: return "intensity";
    }
    return "?";
}

ShiftKind shift_kind_from_string(const std::string& name) {
    if (name == "none") return ShiftKind::None;
    if (name == "tails") return ShiftKind::Tails;
    if (name == "gap") return ShiftKind::Gap;
    if (name == "intensity") return ShiftKind::Intensity;
    throw std::invalid_argument("unknown shift kind '" + name + "'");
}

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw std::invalid_argument("unknown split label '" + name + "'");
}

RangeSet intensity_range(ShiftKind base, const Range& full, const Range& band, int level) {
    if (level < 0 || level > 4) throw std::invalid_argument("intensity level must be in 0..4");
    if (level == 0) return RangeSet{{full}};
    const double f = static_cast<double>(level) / 4.0;
    if (base == ShiftKind::Tails) {
        if (level == 4) return RangeSet{{band}};
        // Tabulated ladder of the [1,200] / [50,150] benchmark.
        if (full == Range{1.0, 200.0} && band == Range{50.0, 150.0}) {
            static constexpr Range ladder[] = {{12.5, 188.5}, {25.0, 176.0}, {37.5, 163.5}};
            return RangeSet{{ladder[level - 1]}};
        }
        return RangeSet{{{full.lo + f * (band.lo - full.lo), full.hi + f * (band.hi - full.hi)}}};
    }
    if (base == ShiftKind::Gap) {
        const double center = 0.5 * (band.lo + band.hi);
        const double half = f * 0.5 * band.width();
        return RangeSet{{{full.lo, center - half}, {center + half, full.hi}}};
    }
    throw std::invalid_argument("intensity base must be tails or gap");
}

void ShiftSpec::validate() const {
    if (!(full_range.lo < full_range.hi)) throw std::invalid_argument("impossible range: lo >= hi");
    if (kind == ShiftKind::Tails || kind == ShiftKind::Gap || kind == ShiftKind::Intensity) {
        if (!(band.lo < band.hi)) throw std::invalid_argument("impossible band: lo >= hi");
        if (!(full_range.lo < band.lo && band.hi < full_range.hi))
            throw std::invalid_argument("shift band must lie strictly inside the full range");
    }
    if (kind == ShiftKind::Intensity) {
        if (level < 0 || level > 4) throw std::invalid_argument("intensity level must be in 0..4");
        if (intensity_base != ShiftKind::Tails && intensity_base != ShiftKind::Gap)
            throw std::invalid_argument("intensity base must be tails or gap");
    }
    if (input_dim == 0 || embed_width == 0) throw std::invalid_argument("dimensions must be positive");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
        throw std::invalid_argument("noise_sd must be finite and >= 0");
}

RangeSet ShiftSpec::trainval_range() const {
    switch (kind) {
        case ShiftKind::None: return RangeSet{{full_range}};
        case ShiftKind::Tails: return intensity_range(ShiftKind::Tails, full_range, band, 4);
        case ShiftKind::Gap: return intensity_range(ShiftKind::Gap, full_range, band, 4);
        case ShiftKind::Intensity: return intensity_range(intensity_base, full_range, band, level);
    }
    return RangeSet{{full_range}};
}

ShiftSpec& ShiftSpec::small() {
    n_train = 1000;
    n_val = 200;
    n_test = 1000;
    return *this;
}

std::size_t Dataset::count(Split s) const noexcept {
    return static_cast<std::size_t>(std::count(split.begin(), split.end(), s));
}

SplitData Dataset::subset(Split s) const {
    SplitData out{Matrix(0, dim()), {}};
    for (std::size_t i = 0; i < size(); ++i) {
        if (split[i] != s) continue;
        out.x.append_row(features.row(i));
        out.y.push_back(targets[i]);
    }
    return out;
}

void Dataset::validate() const {
    if (features.rows() != targets.size() || split.size() != targets.size())
        throw std::invalid_argument("dataset columns differ in length");
    for (std::size_t i = 0; i < size(); ++i) {
        if (!std::isfinite(targets[i]))
            throw std::invalid_argument("non-finite target at row " + std::to_string(i + 1));
        for (double v : features.row(i))
            if (!std::isfinite(v))
                throw std::invalid_argument("non-finite feature at row " + std::to_string(i + 1));
    }
    if (!shift) return;
    const RangeSet tv = shift->trainval_range();
    const RangeSet te = shift->test_range();
    for (std::size_t i = 0; i < size(); ++i) {
        const bool ok = split[i] == Split::Test ? te.contains(targets[i]) : tv.contains(targets[i]);
        if (!ok) throw std::invalid_argument("target outside its split range at row " + std::to_string(i + 1));
    }
}

namespace {

// Embedding draws: W1 ~ N(0, kW1^2), b1 ~ U(-kB1, kB1), W2 ~ N(0, 1/width).
constexpr double kW1 = 2.5;
constexpr double kB1 = 2.0;

struct Embedding {
    std::vector<double> w1, b1;  // width
    Matrix w2;                   // input_dim x width
    std::vector<double> b2;      // input_dim
};

Embedding draw_embedding(const ShiftSpec& spec) {
    stat::Rng rng = stat::Rng(spec.seed).substream({stat::tag("embedding")});
    Embedding e;
    const std::size_t h = spec.embed_width, d = spec.input_dim;
    for (std::size_t k = 0; k < h; ++k) e.w1.push_back(kW1 * rng.normal());
    for (std::size_t k = 0; k < h; ++k) e.b1.push_back(rng.uniform(-kB1, kB1));
    e.w2 = Matrix(d, h);
    const double s = 1.0 / std::sqrt(static_cast<double>(h));
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < h; ++k) e.w2(j, k) = s * rng.normal();
    for (std::size_t j = 0; j < d; ++j) e.b2.push_back(0.1 * rng.normal());
    return e;
}

double sample_from(const RangeSet& set, stat::Rng& rng) {
    double u = rng.uniform() * set.measure();
    for (const auto& r : set.parts) {
        if (u <= r.width()) return std::min(r.lo + u, r.hi);
        u -= r.width();
    }
    return set.parts.back().hi;
}

}  // namespace

Dataset generate(const ShiftSpec& spec) {
    spec.validate();
    const Embedding emb = draw_embedding(spec);
    const std::size_t d = spec.input_dim, h = spec.embed_width;
    const std::size_t n = spec.n_train + spec.n_val + spec.n_test;
    const Range full = spec.full_range;

    Dataset ds;
    ds.features = Matrix(n, d);
    ds.targets.reserve(n);
    ds.split.reserve(n);
    ds.shift = spec;
    ds.provenance = Provenance::Synthetic;

    const RangeSet trainval = spec.trainval_range();
    const RangeSet test = spec.test_range();
    std::vector<double> hidden(h);
    std::size_t row = 0;
    const std::pair<Split, std::size_t> plan[] = {
        {Split::Train, spec.n_train}, {Split::Val, spec.n_val}, {Split::Test, spec.n_test}};
    for (const auto& [split, count] : plan) {
        stat::Rng rng =
            stat::Rng(spec.seed).substream({stat::tag("rows"), static_cast<std::uint64_t>(split)});
        const RangeSet& range = split == Split::Test ? test : trainval;
        for (std::size_t i = 0; i < count; ++i, ++row) {
            const double t = sample_from(range, rng);
            const double t_scaled = 2.0 * (t - full.lo) / full.width() - 1.0;
            for (std::size_t k = 0; k < h; ++k) hidden[k] = std::tanh(emb.w1[k] * t_scaled + emb.b1[k]);
            auto x = ds.features.row(row);
            for (std::size_t j = 0; j < d; ++j) {
                double v = emb.b2[j];
                for (std::size_t k = 0; k < h; ++k) v += emb.w2(j, k) * hidden[k];
                x[j] = v + spec.noise_sd * rng.normal();
            }
            ds.targets.push_back(t);
            ds.split.push_back(split);
        }
    }
    return ds;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t b = cell.find_first_not_of(' ');
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_number(const std::string& cell, std::size_t line_no, const std::string& column) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || cell.empty())
        throw std::invalid_argument("non-numeric value '" + cell + "' in column '" + column +
                                    "' at line " + std::to_string(line_no));
    if (!std::isfinite(v))
        throw std::invalid_argument("non-finite value in column '" + column + "' at line " +
                                    std::to_string(line_no));
    return v;
}

std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open dataset " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty csv file " + path.string());
    const auto header = split_line(line);

    auto find = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw std::invalid_argument("missing column '" + name + "' in " + path.string());
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t y_col = find(schema.target_column);
    const std::size_t s_col = find(schema.split_column);
    std::vector<std::size_t> x_cols;
    std::vector<std::string> x_names;
    if (schema.feature_columns.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (c != y_col && c != s_col) {
                x_cols.push_back(c);
                x_names.push_back(header[c]);
            }
    } else {
        for (const auto& name : schema.feature_columns) {
            x_cols.push_back(find(name));
            x_names.push_back(name);
        }
    }
    if (x_cols.empty()) throw std::invalid_argument("no feature columns in " + path.string());

    Dataset ds;
    ds.provenance = Provenance::CsvImport;
    ds.features = Matrix(0, x_cols.size());
    std::vector<double> row(x_cols.size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw std::invalid_argument("line " + std::to_string(line_no) + " has " +
                                        std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(header.size()));
        for (std::size_t k = 0; k < x_cols.size(); ++k)
            row[k] = parse_number(cells[x_cols[k]], line_no, x_names[k]);
        ds.features.append_row(row);
        ds.targets.push_back(parse_number(cells[y_col], line_no, schema.target_column));
        try {
            ds.split.push_back(split_from_string(cells[s_col]));
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("unknown split label '" + cells[s_col] + "' at line " +
                                        std::to_string(line_no));
        }
    }
    return ds;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset " + path.string());
    const std::size_t d = dataset.dim();
    for (std::size_t j = 0; j < d; ++j) out << 'x' << j << ',';
    out << "y,split\n";
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (double v : dataset.features.row(i)) out << format_double(v) << ',';
        out << format_double(dataset.targets[i]) << ',' << to_string(dataset.split[i]) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing dataset " + path.string());
}

nlohmann::json to_json(const ShiftSpec& s) {
    return nlohmann::json{{"kind", to_string(s.kind)},
                          {"level", s.level},
                          {"intensity_base", to_string(s.intensity_base)},
                          {"full_range", {s.full_range.lo, s.full_range.hi}},
                          {"band", {s.band.lo, s.band.hi}},
                          {"n_train", s.n_train},
                          {"n_val", s.n_val},
                          {"n_test", s.n_test},
                          {"input_dim", s.input_dim},
                          {"embed_width", s.embed_width},
                          {"noise_sd", s.noise_sd},
                          {"seed", s.seed}};
}

ShiftSpec shift_spec_from_json(const nlohmann::json& j) {
    ShiftSpec s;
    s.kind = shift_kind_from_string(j.at("kind").get<std::string>());
    s.level = j.at("level").get<int>();
    s.intensity_base = shift_kind_from_string(j.at("intensity_base").get<std::string>());
    s.full_range = {j.at("full_range").at(0).get<double>(), j.at("full_range").at(1).get<double>()};
    s.band = {j.at("band").at(0).get<double>(), j.at("band").at(1).get<double>()};
    s.n_train = j.at("n_train").get<std::size_t>();
    s.n_val = j.at("n_val").get<std::size_t>();
    s.n_test = j.at("n_test").get<std::size_t>();
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.embed_width = j.at("embed_width").get<std::size_t>();
    s.noise_sd = j.at("noise_sd").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

void save_manifest(const Dataset& dataset, const std::filesystem::path& path) {
    nlohmann::json j{{"format", "shiftuq-dataset-manifest"},
                     {"version", 1},
                     {"provenance", dataset.provenance == Provenance::Synthetic ? "synthetic" : "csv"},
                     {"rows",
                      {{"train", dataset.count(Split::Train)},
                       {"val", dataset.count(Split::Val)},
                       {"test", dataset.count(Split::Test)}}},
                     {"input_dim", dataset.dim()}};
    if (dataset.shift) j["shift"] = to_json(*dataset.shift);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace shiftuq::synth

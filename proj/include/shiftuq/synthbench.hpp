#pragma once

// Synthetic regression benchmarks with controlled target-range shifts
// between train/val and test, plus CSV import/export of arbitrary
// feature/target tables.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftuq/matrix.hpp"

namespace shiftuq::synth {

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi - lo; }
    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    friend bool operator==(const Range&, const Range&) = default;
};

/// Union of disjoint closed intervals, sampled proportionally to length.
struct RangeSet {
    std::vector<Range> parts;

    bool contains(double v) const noexcept;
    double measure() const noexcept;
    double min() const;
    double max() const;
    friend bool operator==(const RangeSet&, const RangeSet&) = default;
};

enum class ShiftKind { None, Tails, Gap, Intensity };

std::string to_string(ShiftKind kind);
ShiftKind shift_kind_from_string(const std::string& name);

struct ShiftSpec {
    ShiftKind kind = ShiftKind::None;
    /// Intensity only: 0 (no shift) .. 4 (full Tails or Gap shift).
    int level = 0;
    /// Intensity only: which shift the ladder ends at.
    ShiftKind intensity_base = ShiftKind::Tails;
    Range full_range{1.0, 200.0};
    /// Central band: train/val range for Tails, excluded band for Gap.
    Range band{50.0, 150.0};
    std::size_t n_train = 10000;
    std::size_t n_val = 2000;
    std::size_t n_test = 10000;
    std::size_t input_dim = 16;
    /// Hidden width of the latent-to-input embedding.
    std::size_t embed_width = 16;
    double noise_sd = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
    /// Target range of train and val rows.
    RangeSet trainval_range() const;
    RangeSet test_range() const { return RangeSet{{full_range}}; }

    /// 1000/200/1000 rows for fast runs.
    ShiftSpec& small();
    friend bool operator==(const ShiftSpec&, const ShiftSpec&) = default;
};

/// Train/val range for an intensity level on the given base shift.
RangeSet intensity_range(ShiftKind base, const Range& full, const Range& band, int level);

enum class Split { Train, Val, Test };
std::string to_string(Split split);
Split split_from_string(const std::string& name);

enum class Provenance { Synthetic, CsvImport };

struct SplitData {
    Matrix x;
    std::vector<double> y;
};

struct Dataset {
    Matrix features;
    std::vector<double> targets;
    std::vector<Split> split;
    std::optional<ShiftSpec> shift;
    Provenance provenance = Provenance::Synthetic;

    std::size_t size() const noexcept { return targets.size(); }
    std::size_t dim() const noexcept { return features.cols(); }
    std::size_t count(Split s) const noexcept;
    SplitData subset(Split s) const;
    void validate() const;
};

/// Latent t ~ U(range of the row's split); x = W2 tanh(W1 t~ + b1) + b2 +
/// noise_sd * eta with t~ the latent rescaled to [-1, 1] over full_range
/// and the embedding parameters drawn once per seed. y = t.
Dataset generate(const ShiftSpec& spec);

struct CsvSchema {
    /// Empty: every column except target/split, in file order.
    std::vector<std::string> feature_columns;
    std::string target_column = "y";
    std::string split_column = "split";
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
/// Header x0..x{d-1},y,split; 17 significant digits.
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

nlohmann::json to_json(const ShiftSpec& spec);
ShiftSpec shift_spec_from_json(const nlohmann::json& j);
/// Manifest recording the generating ShiftSpec next to a CSV export.
void save_manifest(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace shiftuq::synth

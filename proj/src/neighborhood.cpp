#include "limekit/neighborhood.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "limekit/rng.hpp"

namespace limekit {
namespace {

void check_sampler(int dhat, const SamplerSpec& spec, SamplerKind expected) {
    if (dhat < 1) throw InvalidArgument("dhat must be positive");
    if (spec.n < 1) throw InvalidArgument("sampler n must be positive");
    if (spec.kind != expected) throw InvalidArgument("sampler kind does not match operation");
}

void validate_segmentation(const ConversionSpec& c) {
    const auto d = static_cast<std::size_t>(c.target.size());
    if (c.segment_of.empty()) {
        throw MissingSegmentation("segmented conversion requires a segmentation map");
    }
    if (c.segment_of.size() != d) {
        throw DimensionMismatch("segmentation must cover every original index exactly once");
    }
    if (c.baseline.size() != c.target.size()) {
        throw DimensionMismatch("baseline and target must have equal length");
    }
    int max_segment = -1;
    for (int s : c.segment_of) {
        if (s < 0) throw InvalidArgument("segment indices must be nonnegative");
        max_segment = std::max(max_segment, s);
    }
    std::vector<bool> seen(static_cast<std::size_t>(max_segment) + 1, false);
    for (int s : c.segment_of) seen[static_cast<std::size_t>(s)] = true;
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
        throw InvalidArgument("segment indices must be contiguous from 0");
    }
}

}  // namespace

ConversionSpec ConversionSpec::tabular(Eigen::VectorXd target) {
    if (target.size() < 1) throw InvalidArgument("target must be non-empty");
    ConversionSpec c;
    c.kind = Kind::Tabular;
    c.target = std::move(target);
    return c;
}

ConversionSpec ConversionSpec::segmented(Eigen::VectorXd target, Eigen::VectorXd baseline,
                                         std::vector<int> segment_of) {
    if (target.size() < 1) throw InvalidArgument("target must be non-empty");
    ConversionSpec c;
    c.kind = Kind::Segmented;
    c.target = std::move(target);
    c.baseline = std::move(baseline);
    c.segment_of = std::move(segment_of);
    validate_segmentation(c);
    return c;
}

int ConversionSpec::surrogate_dim() const {
    if (kind == Kind::Tabular) return original_dim();
    int max_segment = -1;
    for (int s : segment_of) max_segment = std::max(max_segment, s);
    return max_segment + 1;
}

bool ConversionSpec::identity_segments() const {
    if (kind == Kind::Tabular) return true;
    if (segment_of.size() != static_cast<std::size_t>(target.size())) return false;
    for (std::size_t i = 0; i < segment_of.size(); ++i) {
        if (segment_of[i] != static_cast<int>(i)) return false;
    }
    return true;
}

std::vector<int> identity_segmentation(int d) {
    if (d < 1) throw InvalidArgument("d must be positive");
    std::vector<int> seg(static_cast<std::size_t>(d));
    std::iota(seg.begin(), seg.end(), 0);
    return seg;
}

Eigen::MatrixXd sample_binary_neighborhood(int dhat, const SamplerSpec& spec) {
    check_sampler(dhat, spec, SamplerKind::BinaryToggle);
    Eigen::MatrixXd rows(spec.n, dhat);
    rows.row(0).setOnes();  // the target is always part of the neighborhood
    std::vector<int> index(static_cast<std::size_t>(dhat));
    for (int r = 1; r < spec.n; ++r) {
        SplitMix64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(r)));
        // Row 0 already covers the zero-toggle shell; every other row is a
        // proper neighbor, so the target's kernel weight stays unique.
        const auto toggles =
            static_cast<int>(1 + rng.next_below(static_cast<std::uint64_t>(dhat)));
        rows.row(r).setOnes();
        std::iota(index.begin(), index.end(), 0);
        // Partial Fisher-Yates: the first `toggles` entries are a uniform subset.
        for (int i = 0; i < toggles; ++i) {
            const auto j = static_cast<int>(
                i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(dhat - i))));
            std::swap(index[static_cast<std::size_t>(i)], index[static_cast<std::size_t>(j)]);
            rows(r, index[static_cast<std::size_t>(i)]) = 0.0;
        }
    }
    return rows;
}

Eigen::MatrixXd sample_uniform_cube(int dhat, const SamplerSpec& spec) {
    check_sampler(dhat, spec, SamplerKind::UniformCube);
    if (!(spec.sigma > 0.0) || spec.sigma > 1.0) {
        throw InvalidSigma("uniform cube requires sigma in (0, 1]");
    }
    Eigen::MatrixXd rows(spec.n, dhat);
    for (int r = 0; r < spec.n; ++r) {
        SplitMix64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(r)));
        for (int c = 0; c < dhat; ++c) {
            rows(r, c) = (1.0 - spec.sigma) + spec.sigma * rng.next_unit();
        }
    }
    return rows;
}

Eigen::MatrixXd sample_gaussian_offsets(int dhat, const SamplerSpec& spec) {
    check_sampler(dhat, spec, SamplerKind::GaussianOffset);
    if (!(spec.sigma > 0.0)) throw InvalidSigma("gaussian offsets require sigma > 0");
    Eigen::MatrixXd rows(spec.n, dhat);
    for (int r = 0; r < spec.n; ++r) {
        SplitMix64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(r)));
        for (int c = 0; c < dhat; ++c) {
            rows(r, c) = spec.sigma * rng.next_gaussian();
        }
    }
    return rows;
}

double kernel_weight(const Eigen::VectorXd& target, const Eigen::VectorXd& point,
                     const KernelSpec& kernel) {
    if (target.size() != point.size()) {
        throw DimensionMismatch("kernel arguments must have equal length");
    }
    if (!(kernel.sigma > 0.0)) throw InvalidSigma("kernel sigma must be positive");
    const double d2 = (target - point).squaredNorm();
    const double w = std::exp(-d2 / (kernel.sigma * kernel.sigma));
    // Clamp underflow so weights stay strictly positive.
    return std::max(w, std::numeric_limits<double>::min());
}

Eigen::VectorXd convert(const ConversionSpec& conversion, const Eigen::VectorXd& point) {
    if (conversion.kind == ConversionSpec::Kind::Tabular) {
        if (point.size() != conversion.target.size()) {
            throw DimensionMismatch("tabular conversion expects dhat == d");
        }
        return conversion.target + point;
    }
    validate_segmentation(conversion);
    if (point.size() != conversion.surrogate_dim()) {
        throw DimensionMismatch("point length does not match segment count");
    }
    Eigen::VectorXd out(conversion.target.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double z = point[conversion.segment_of[static_cast<std::size_t>(i)]];
        out[i] = (1.0 - z) * conversion.baseline[i] + z * conversion.target[i];
    }
    return out;
}

double effective_sample_size(const Eigen::VectorXd& weights) {
    if (weights.size() == 0) throw EmptyWeights("effective sample size of no weights");
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0)) throw InvalidArgument("weights must be strictly positive");
    }
    const double sum = weights.sum();
    const double ess = sum * sum / weights.squaredNorm();
    // The exact value lies in [1, n]; clamp the rounding spill.
    return std::clamp(ess, 1.0, static_cast<double>(weights.size()));
}

void save_segmentation_csv(const std::string& path, const std::vector<int>& segment_of) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "original_index,segment_index\n";
    for (std::size_t i = 0; i < segment_of.size(); ++i) {
        out << i << ',' << segment_of[i] << '\n';
    }
    if (!out) throw IoError("failed writing " + path);
}

std::vector<int> load_segmentation_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "original_index,segment_index") {
        throw CsvFormatError("segmentation CSV must start with the standard header");
    }
    std::vector<std::pair<int, int>> entries;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw CsvFormatError("malformed segmentation row: " + line);
        int original = 0;
        int segment = 0;
        const char* b = line.data();
        auto r1 = std::from_chars(b, b + comma, original);
        auto r2 = std::from_chars(b + comma + 1, b + line.size(), segment);
        if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != b + comma ||
            r2.ptr != b + line.size()) {
            throw CsvFormatError("malformed segmentation row: " + line);
        }
        entries.emplace_back(original, segment);
    }
    std::vector<int> segment_of(entries.size(), -1);
    for (auto [original, segment] : entries) {
        if (original < 0 || static_cast<std::size_t>(original) >= entries.size() ||
            segment_of[static_cast<std::size_t>(original)] != -1) {
            throw CsvFormatError("segmentation must list each original index exactly once");
        }
        segment_of[static_cast<std::size_t>(original)] = segment;
    }
    return segment_of;
}

}  // namespace limekit

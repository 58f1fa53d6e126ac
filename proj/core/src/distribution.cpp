#include "corepick/distribution.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "corepick/errors.hpp"

namespace corepick {

namespace {

constexpr char kMagic[4] = {'B', 'K', 'D', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "distribution files are little-endian; add byte swapping for "
              "big-endian hosts");

void check_same_buckets(std::uint32_t a, std::uint32_t b) {
    if (a != b) {
        throw ConfigError("bucket count mismatch: " + std::to_string(a) +
                          " vs " + std::to_string(b));
    }
}

template <typename T>
void write_le(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename T>
T read_le(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(value));
    return value;
}

}  // namespace

BucketDistribution BucketDistribution::from_probs(std::vector<double> probs,
                                                  double alpha) {
    if (probs.empty()) throw ConfigError("distribution needs at least one bucket");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p > 0.0) || !std::isfinite(p)) {
            throw ConfigError("distribution entries must be strictly positive");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("distribution does not sum to 1");
    }
    BucketDistribution d;
    d.num_buckets = static_cast<std::uint32_t>(probs.size());
    d.probs = std::move(probs);
    d.smoothing_alpha = alpha;
    return d;
}

BucketAccumulator::BucketAccumulator(std::uint32_t num_buckets)
    : counts_(num_buckets, 0) {
    if (num_buckets < 1) throw ConfigError("num_buckets must be positive");
}

void BucketAccumulator::add(const FeatureVector& fv) {
    check_same_buckets(num_buckets(), fv.num_buckets);
    for (const auto& [bucket, count] : fv.counts) {
        counts_[bucket] += count;
        total_ += count;
    }
    ++documents_;
}

void BucketAccumulator::merge(const BucketAccumulator& other) {
    check_same_buckets(num_buckets(), other.num_buckets());
    for (std::size_t b = 0; b < counts_.size(); ++b) counts_[b] += other.counts_[b];
    total_ += other.total_;
    documents_ += other.documents_;
}

BucketDistribution BucketAccumulator::finalize(double alpha) const {
    if (!(alpha > 0.0)) throw ConfigError("smoothing alpha must be positive");
    BucketDistribution dist;
    dist.num_buckets = num_buckets();
    dist.smoothing_alpha = alpha;
    dist.support_total = total_;
    dist.probs.resize(counts_.size());
    const double denom = static_cast<double>(total_) +
                         alpha * static_cast<double>(counts_.size());
    for (std::size_t b = 0; b < counts_.size(); ++b) {
        dist.probs[b] = (static_cast<double>(counts_[b]) + alpha) / denom;
    }
    return dist;
}

BucketDistribution estimate_distribution(const std::vector<FeatureVector>& vectors,
                                         std::uint32_t num_buckets, double alpha) {
    BucketAccumulator acc(num_buckets);
    for (const auto& fv : vectors) acc.add(fv);
    return acc.finalize(alpha);
}

double kl_divergence(const BucketDistribution& p, const BucketDistribution& q) {
    check_same_buckets(p.num_buckets, q.num_buckets);
    double sum = 0.0;
    for (std::size_t b = 0; b < p.probs.size(); ++b) {
        if (p.probs[b] > 0.0) {
            sum += p.probs[b] * std::log(p.probs[b] / q.probs[b]);
        }
    }
    return sum;
}

double kl_reduction(const BucketDistribution& target,
                    const BucketDistribution& selected,
                    const BucketDistribution& random_baseline) {
    check_same_buckets(target.num_buckets, selected.num_buckets);
    check_same_buckets(target.num_buckets, random_baseline.num_buckets);
    return kl_divergence(target, random_baseline) - kl_divergence(target, selected);
}

void save_distribution(const BucketDistribution& dist, const std::string& path,
                       const std::string& corpus, std::uint64_t doc_count) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write distribution file: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_le(out, kVersion);
    write_le(out, dist.num_buckets);
    write_le(out, dist.smoothing_alpha);
    for (double p : dist.probs) write_le(out, p);
    if (!out) throw InputError("failed writing distribution file: " + path);

    nlohmann::json sidecar = {
        {"corpus", corpus},
        {"documents", doc_count},
        {"num_buckets", dist.num_buckets},
        {"alpha", dist.smoothing_alpha},
        {"support_total", dist.support_total},
    };
    std::ofstream side(path + ".json", std::ios::binary | std::ios::trunc);
    if (!side) throw InputError("cannot write distribution sidecar: " + path + ".json");
    side << sidecar.dump(2) << '\n';
}

BucketDistribution load_distribution(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open distribution file: " + path);
    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw InputError("not a distribution file: " + path);
    }
    const auto version = read_le<std::uint32_t>(in);
    if (version != kVersion) {
        throw InputError("unsupported distribution file version in " + path);
    }
    BucketDistribution dist;
    dist.num_buckets = read_le<std::uint32_t>(in);
    dist.smoothing_alpha = read_le<double>(in);
    dist.probs.resize(dist.num_buckets);
    in.read(reinterpret_cast<char*>(dist.probs.data()),
            static_cast<std::streamsize>(dist.probs.size() * sizeof(double)));
    if (!in) throw InputError("truncated distribution file: " + path);
    return dist;
}

}  // namespace corepick
